#include "diffuse/selection.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "diffuse/random.hpp"

namespace diffuse {
namespace {

void check_budget(std::size_t budget, std::size_t pool) {
  if (budget < 1) throw std::invalid_argument("budget must be at least 1");
  if (budget > pool) {
    throw std::invalid_argument("budget " + std::to_string(budget) +
                                " exceeds pool size " + std::to_string(pool));
  }
}

SelectionPlan plan_from_assignment(const DifferenceSpace& space,
                                   const ClusterAssignment& a,
                                   SelectionStrategy strategy,
                                   RepresentativeRule rule, std::uint64_t seed) {
  SelectionPlan plan;
  plan.strategy = strategy;
  plan.budget = a.k;
  plan.seed = seed;
  for (const auto& members : a.members) {
    std::size_t p = representative(space, members, rule);
    plan.positions.push_back(p);
    plan.selected.push_back(space.ids()[p]);
  }
  std::map<std::string, std::size_t> cluster_of;
  for (std::size_t p = 0; p < a.labels.size(); ++p) {
    cluster_of.emplace(space.ids()[p], a.labels[p]);
  }
  plan.cluster_of = std::move(cluster_of);
  return plan;
}

SelectionPlan cluster_select(const DifferenceSpace& space, std::size_t budget,
                             const ClusterOptions& options,
                             SelectionStrategy strategy) {
  check_budget(budget, space.size());
  if (budget == 1) {
    ClusterAssignment all;
    all.k = 1;
    all.labels.assign(space.size(), 0);
    all.members.emplace_back(space.size());
    std::iota(all.members[0].begin(), all.members[0].end(), std::size_t{0});
    return plan_from_assignment(space, all, strategy, options.representative,
                                options.seed);
  }
  ClusterAssignment a;
  switch (options.method) {
    case ClusterMethod::kWardEuclidean:
      a = cut(build_dendrogram(space, Linkage::kWardEuclidean), budget);
      break;
    case ClusterMethod::kAverageCosine:
      a = cut(build_dendrogram(space, Linkage::kAverageCosine), budget);
      break;
    case ClusterMethod::kKMeans:
      a = kmeans(space, budget, options.seed).assignment;
      break;
  }
  return plan_from_assignment(space, a, strategy, options.representative,
                              options.seed);
}

}  // namespace

std::string_view to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::kDiffuse: return "diffuse";
    case SelectionStrategy::kRandom: return "random";
    case SelectionStrategy::kMaxNorm: return "max-norm";
    case SelectionStrategy::kInputCluster: return "input-cluster";
  }
  return "diffuse";
}

SelectionStrategy parse_strategy(std::string_view name) {
  if (name == "diffuse") return SelectionStrategy::kDiffuse;
  if (name == "random") return SelectionStrategy::kRandom;
  if (name == "max-norm") return SelectionStrategy::kMaxNorm;
  if (name == "input-cluster") return SelectionStrategy::kInputCluster;
  throw std::invalid_argument("unknown selection strategy '" +
                              std::string(name) + "'");
}

std::string_view to_string(ClusterMethod m) {
  switch (m) {
    case ClusterMethod::kWardEuclidean: return "ward-euclidean";
    case ClusterMethod::kAverageCosine: return "average-cosine";
    case ClusterMethod::kKMeans: return "kmeans";
  }
  return "ward-euclidean";
}

ClusterMethod parse_cluster_method(std::string_view name) {
  if (name == "ward-euclidean" || name == "ward") return ClusterMethod::kWardEuclidean;
  if (name == "average-cosine") return ClusterMethod::kAverageCosine;
  if (name == "kmeans" || name == "k-means") return ClusterMethod::kKMeans;
  throw std::invalid_argument("unknown clustering method '" +
                              std::string(name) + "'");
}

SelectionPlan select_diffuse(const DifferenceSpace& space, std::size_t budget,
                             const ClusterOptions& options) {
  return cluster_select(space, budget, options, SelectionStrategy::kDiffuse);
}

SelectionPlan select_from_dendrogram(const DifferenceSpace& space,
                                     const Dendrogram& d, std::size_t budget,
                                     RepresentativeRule rule) {
  if (d.n_leaves() != space.size()) {
    throw std::invalid_argument("dendrogram does not match the space");
  }
  check_budget(budget, space.size());
  return plan_from_assignment(space, cut(d, budget), SelectionStrategy::kDiffuse,
                              rule, rule.seed);
}

SelectionPlan select_random(std::span<const std::string> pool,
                            std::size_t budget, std::uint64_t seed) {
  check_budget(budget, pool.size());
  Rng rng(derive_seed(seed, "select-random"));
  SelectionPlan plan;
  plan.strategy = SelectionStrategy::kRandom;
  plan.budget = budget;
  plan.seed = seed;
  plan.positions = sample_without_replacement(rng, pool.size(), budget);
  for (std::size_t p : plan.positions) plan.selected.push_back(pool[p]);
  return plan;
}

SelectionPlan select_max_norm(const DifferenceSpace& space, std::size_t budget) {
  check_budget(budget, space.size());
  std::vector<std::size_t> order(space.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return space.norm(a) > space.norm(b);
  });
  order.resize(budget);
  SelectionPlan plan;
  plan.strategy = SelectionStrategy::kMaxNorm;
  plan.budget = budget;
  plan.positions = order;
  for (std::size_t p : order) plan.selected.push_back(space.ids()[p]);
  return plan;
}

SelectionPlan select_input_cluster(const EmbeddingMatrix& inputs,
                                   std::size_t budget,
                                   const ClusterOptions& options) {
  return cluster_select(identity_space(inputs), budget, options,
                        SelectionStrategy::kInputCluster);
}

nlohmann::json to_json(const SelectionPlan& plan) {
  nlohmann::json j = {{"strategy", to_string(plan.strategy)},
                      {"budget", plan.budget},
                      {"seed", plan.seed},
                      {"selected", plan.selected}};
  if (plan.cluster_of) {
    j["cluster_of"] = *plan.cluster_of;
  } else {
    j["cluster_of"] = nullptr;
  }
  return j;
}

}  // namespace diffuse
