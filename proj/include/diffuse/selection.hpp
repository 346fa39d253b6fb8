#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "diffuse/clustering.hpp"
#include "diffuse/vectors.hpp"

namespace diffuse {

enum class SelectionStrategy { kDiffuse, kRandom, kMaxNorm, kInputCluster };

std::string_view to_string(SelectionStrategy s);
SelectionStrategy parse_strategy(std::string_view name);

// How clusters are formed for the cluster-based strategies.
enum class ClusterMethod { kWardEuclidean, kAverageCosine, kKMeans };

std::string_view to_string(ClusterMethod m);
ClusterMethod parse_cluster_method(std::string_view name);

struct ClusterOptions {
  ClusterMethod method = ClusterMethod::kWardEuclidean;
  RepresentativeRule representative;
  std::uint64_t seed = 0;  // k-means seeding
};

struct SelectionPlan {
  SelectionStrategy strategy = SelectionStrategy::kDiffuse;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> selected;
  std::vector<std::size_t> positions;  // pool positions, aligned to selected
  // Cluster index of every pool example (cluster-based strategies only).
  std::optional<std::map<std::string, std::size_t>> cluster_of;
};

SelectionPlan select_diffuse(const DifferenceSpace& space, std::size_t budget,
                             const ClusterOptions& options = {});

// One representative per cluster of cut(d, budget), in cluster order.
SelectionPlan select_from_dendrogram(const DifferenceSpace& space,
                                     const Dendrogram& d, std::size_t budget,
                                     RepresentativeRule rule = {});

SelectionPlan select_random(std::span<const std::string> pool,
                            std::size_t budget, std::uint64_t seed);

SelectionPlan select_max_norm(const DifferenceSpace& space, std::size_t budget);

SelectionPlan select_input_cluster(const EmbeddingMatrix& inputs,
                                   std::size_t budget,
                                   const ClusterOptions& options = {});

nlohmann::json to_json(const SelectionPlan& plan);

}  // namespace diffuse
