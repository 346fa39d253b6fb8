#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "diffuse/vectors.hpp"

namespace diffuse {

enum class Linkage { kWardEuclidean, kAverageCosine };

std::string_view to_string(Linkage linkage);
Linkage parse_linkage(std::string_view name);

// One agglomeration step. `left` is the child whose smallest leaf position is
// smaller; `height` is the linkage distance at which the children joined.
struct Merge {
  std::size_t left = 0;
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;

  friend bool operator==(const Merge&, const Merge&) = default;
};

/// Full agglomerative merge tree.
///
/// Node ids 0..n-1 are leaves (example positions); merge i creates node
/// n + i. The constructor checks the structural invariants: n - 1 merges,
/// every non-root node consumed exactly once by a later merge, and sizes
/// that add up.
class Dendrogram {
 public:
  Dendrogram() = default;
  Dendrogram(std::size_t n_leaves, std::vector<Merge> merges);

  std::size_t n_leaves() const { return n_leaves_; }
  const std::vector<Merge>& merges() const { return merges_; }
  std::size_t root() const { return 2 * n_leaves_ - 2; }
  std::size_t node_size(std::size_t node) const;
  std::size_t min_leaf(std::size_t node) const { return min_leaf_[node]; }

  // Leaf positions under a node, ascending.
  std::vector<std::size_t> members(std::size_t node) const;

  friend bool operator==(const Dendrogram& a, const Dendrogram& b) {
    return a.n_leaves_ == b.n_leaves_ && a.merges_ == b.merges_;
  }

 private:
  std::size_t n_leaves_ = 0;
  std::vector<Merge> merges_;
  std::vector<std::size_t> min_leaf_;
};

/// A partition of example positions into k non-empty clusters. Cluster
/// indices are ordered by each cluster's smallest member position.
struct ClusterAssignment {
  std::size_t k = 0;
  std::vector<std::size_t> labels;
  std::vector<std::vector<std::size_t>> members;

  friend bool operator==(const ClusterAssignment&,
                         const ClusterAssignment&) = default;
};

// Canonical assignment from arbitrary group ids (one per position).
ClusterAssignment assignment_from_groups(std::span<const std::size_t> groups);

// Lance-Williams agglomeration over all rows of the space. Among equal
// linkage distances the pair whose smaller-key cluster has the smallest
// member position wins, then the other cluster's smallest position.
Dendrogram build_dendrogram(const DifferenceSpace& space,
                            Linkage linkage = Linkage::kWardEuclidean);

// Undo the top k - 1 merges.
ClusterAssignment cut(const Dendrogram& d, std::size_t k);

// Nodes that are clusters of cut(d, k), ordered like cut's cluster indices.
std::vector<std::size_t> cut_nodes(const Dendrogram& d, std::size_t k);

struct Split {
  std::size_t parent_node = 0;
  std::size_t left_node = 0;
  std::size_t right_node = 0;
  std::vector<std::size_t> parent;
  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
};

// The single cluster of cut(d, k) that cut(d, k + 1) splits in two.
Split split_next(const Dendrogram& d, std::size_t k);

struct KMeansResult {
  ClusterAssignment assignment;
  double inertia = 0.0;
  std::size_t iterations = 0;
};

// Lloyd iterations from greedy k-means++ seeding; at most 300 iterations.
KMeansResult kmeans(const DifferenceSpace& space, std::size_t k,
                    std::uint64_t seed);

enum class RepresentativeStrategy {
  kCosineCenter,
  kEuclideanCenter,
  kMaxNorm,
  kRandom
};

std::string_view to_string(RepresentativeStrategy s);
RepresentativeStrategy parse_representative(std::string_view name);

struct RepresentativeRule {
  RepresentativeStrategy strategy = RepresentativeStrategy::kCosineCenter;
  std::uint64_t seed = 0;

  friend bool operator==(const RepresentativeRule&,
                         const RepresentativeRule&) = default;
};

// Position of the member that represents the cluster. Always one of
// `members`; ties go to the smallest position.
std::size_t representative(const DifferenceSpace& space,
                           std::span<const std::size_t> members,
                           RepresentativeRule rule = {});

nlohmann::json to_json(const Dendrogram& d);
Dendrogram dendrogram_from_json(const nlohmann::json& j);

}  // namespace diffuse
