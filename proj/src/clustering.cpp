#include "diffuse/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "diffuse/random.hpp"

namespace diffuse {
namespace {

constexpr double kZeroCentroid = 1e-12;
constexpr std::size_t kMaxLloydIterations = 300;

// Condensed upper-triangular distance storage.
class CondensedMatrix {
 public:
  explicit CondensedMatrix(std::size_t n) : n_(n), data_(n * (n - 1) / 2) {}

  double& at(std::size_t i, std::size_t j) { return data_[index(i, j)]; }
  double at(std::size_t i, std::size_t j) const { return data_[index(i, j)]; }

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return i * n_ - i * (i + 1) / 2 + (j - i - 1);
  }

  std::size_t n_;
  std::vector<double> data_;
};

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    double d = a[c] - b[c];
    s += d * d;
  }
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s += a[c] * b[c];
  return s;
}

// Cosine distance in [0, 2]; a zero vector is maximally distant.
double cosine_distance(std::span<const double> a, double na,
                       std::span<const double> b, double nb) {
  if (na == 0.0 || nb == 0.0) return 2.0;
  double d = 1.0 - dot(a, b) / (na * nb);
  return std::clamp(d, 0.0, 2.0);
}

// Merge candidate ordered by distance, then by the smaller and larger of the
// two clusters' smallest member positions.
struct Candidate {
  double distance = std::numeric_limits<double>::infinity();
  std::size_t lo_key = std::numeric_limits<std::size_t>::max();
  std::size_t hi_key = std::numeric_limits<std::size_t>::max();

  bool operator<(const Candidate& o) const {
    if (distance != o.distance) return distance < o.distance;
    if (lo_key != o.lo_key) return lo_key < o.lo_key;
    return hi_key < o.hi_key;
  }
};

class Agglomerator {
 public:
  Agglomerator(const DifferenceSpace& space, Linkage linkage)
      : n_(space.size()),
        linkage_(linkage),
        dist_(n_),
        key_(n_),
        node_(n_),
        size_(n_, 1),
        nn_(n_),
        nn_cand_(n_) {
    for (std::size_t i = 0; i < n_; ++i) {
      key_[i] = i;
      node_[i] = i;
      active_.push_back(i);
    }
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) {
        dist_.at(i, j) =
            linkage_ == Linkage::kWardEuclidean
                ? squared_distance(space.row(i), space.row(j))
                : cosine_distance(space.row(i), space.norm(i), space.row(j),
                                  space.norm(j));
      }
    }
    for (std::size_t s : active_) rescan(s);
  }

  Dendrogram run() {
    std::vector<Merge> merges;
    merges.reserve(n_ - 1);
    for (std::size_t step = 0; step + 1 < n_; ++step) {
      std::size_t best = active_.front();
      for (std::size_t s : active_) {
        if (nn_cand_[s] < nn_cand_[best]) best = s;
      }
      std::size_t i = best;
      std::size_t j = nn_[best];
      if (key_[j] < key_[i]) std::swap(i, j);
      const double dij = dist_.at(i, j);

      Merge m;
      m.left = node_[i];
      m.right = node_[j];
      m.height = linkage_ == Linkage::kWardEuclidean ? std::sqrt(dij) : dij;
      m.size = size_[i] + size_[j];
      merges.push_back(m);

      active_.erase(std::find(active_.begin(), active_.end(), j));
      const double ni = static_cast<double>(size_[i]);
      const double nj = static_cast<double>(size_[j]);
      for (std::size_t k : active_) {
        if (k == i) continue;
        const double dik = dist_.at(i, k);
        const double djk = dist_.at(j, k);
        double updated;
        if (linkage_ == Linkage::kWardEuclidean) {
          const double nk = static_cast<double>(size_[k]);
          updated = ((ni + nk) * dik + (nj + nk) * djk - nk * dij) /
                    (ni + nj + nk);
          updated = std::max(updated, 0.0);
        } else {
          updated = (ni * dik + nj * djk) / (ni + nj);
        }
        dist_.at(i, k) = updated;
      }
      size_[i] += size_[j];
      node_[i] = n_ + step;

      if (active_.size() > 1) {
        rescan(i);
        for (std::size_t k : active_) {
          if (k == i) continue;
          if (nn_[k] == i || nn_[k] == j) {
            rescan(k);
          } else {
            Candidate c = candidate(k, i);
            if (c < nn_cand_[k]) {
              nn_[k] = i;
              nn_cand_[k] = c;
            }
          }
        }
      }
    }
    return Dendrogram(n_, std::move(merges));
  }

 private:
  Candidate candidate(std::size_t a, std::size_t b) const {
    return {dist_.at(a, b), std::min(key_[a], key_[b]),
            std::max(key_[a], key_[b])};
  }

  void rescan(std::size_t s) {
    Candidate best;
    std::size_t arg = s;
    for (std::size_t t : active_) {
      if (t == s) continue;
      Candidate c = candidate(s, t);
      if (c < best) {
        best = c;
        arg = t;
      }
    }
    nn_[s] = arg;
    nn_cand_[s] = best;
  }

  std::size_t n_;
  Linkage linkage_;
  CondensedMatrix dist_;
  std::vector<std::size_t> key_;
  std::vector<std::size_t> node_;
  std::vector<std::size_t> size_;
  std::vector<std::size_t> nn_;
  std::vector<Candidate> nn_cand_;
  std::vector<std::size_t> active_;
};

std::vector<double> centroid(const DifferenceSpace& space,
                             std::span<const std::size_t> members) {
  std::vector<double> c(space.dim(), 0.0);
  for (std::size_t p : members) {
    auto r = space.row(p);
    for (std::size_t d = 0; d < c.size(); ++d) c[d] += r[d];
  }
  for (double& x : c) x /= static_cast<double>(members.size());
  return c;
}

template <typename Score>
std::size_t argmin_by(std::span<const std::size_t> members, Score score) {
  std::size_t best = members.front();
  double best_score = score(best);
  for (std::size_t p : members.subspan(1)) {
    double s = score(p);
    if (s < best_score || (s == best_score && p < best)) {
      best = p;
      best_score = s;
    }
  }
  return best;
}

}  // namespace

std::string_view to_string(Linkage linkage) {
  return linkage == Linkage::kWardEuclidean ? "ward-euclidean"
                                            : "average-cosine";
}

Linkage parse_linkage(std::string_view name) {
  if (name == "ward-euclidean" || name == "ward") return Linkage::kWardEuclidean;
  if (name == "average-cosine") return Linkage::kAverageCosine;
  throw std::invalid_argument("unknown linkage '" + std::string(name) + "'");
}

Dendrogram::Dendrogram(std::size_t n_leaves, std::vector<Merge> merges)
    : n_leaves_(n_leaves), merges_(std::move(merges)) {
  if (n_leaves_ < 2) throw std::invalid_argument("dendrogram needs >= 2 leaves");
  if (merges_.size() != n_leaves_ - 1) {
    throw std::invalid_argument("dendrogram must have n_leaves - 1 merges");
  }
  const std::size_t n_nodes = 2 * n_leaves_ - 1;
  std::vector<std::size_t> sizes(n_nodes, 1);
  std::vector<bool> consumed(n_nodes, false);
  min_leaf_.resize(n_nodes);
  std::iota(min_leaf_.begin(), min_leaf_.begin() + n_leaves_, std::size_t{0});
  for (std::size_t i = 0; i < merges_.size(); ++i) {
    const Merge& m = merges_[i];
    const std::size_t created = n_leaves_ + i;
    for (std::size_t child : {m.left, m.right}) {
      if (child >= created) {
        throw std::invalid_argument("merge " + std::to_string(i) +
                                    " references a node not yet created");
      }
      if (consumed[child]) {
        throw std::invalid_argument("node " + std::to_string(child) +
                                    " merged twice");
      }
      consumed[child] = true;
    }
    if (m.left == m.right) throw std::invalid_argument("self merge");
    if (!(m.height >= 0.0) || !std::isfinite(m.height)) {
      throw std::invalid_argument("merge height must be finite and >= 0");
    }
    sizes[created] = sizes[m.left] + sizes[m.right];
    if (m.size != sizes[created]) {
      throw std::invalid_argument("merge " + std::to_string(i) +
                                  " size mismatch");
    }
    min_leaf_[created] = std::min(min_leaf_[m.left], min_leaf_[m.right]);
  }
}

std::size_t Dendrogram::node_size(std::size_t node) const {
  return node < n_leaves_ ? 1 : merges_[node - n_leaves_].size;
}

std::vector<std::size_t> Dendrogram::members(std::size_t node) const {
  std::vector<std::size_t> out;
  out.reserve(node_size(node));
  std::vector<std::size_t> stack{node};
  while (!stack.empty()) {
    std::size_t x = stack.back();
    stack.pop_back();
    if (x < n_leaves_) {
      out.push_back(x);
    } else {
      const Merge& m = merges_[x - n_leaves_];
      stack.push_back(m.left);
      stack.push_back(m.right);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

ClusterAssignment assignment_from_groups(std::span<const std::size_t> groups) {
  // Order groups by first appearance, which is their smallest position.
  std::vector<std::size_t> remap;
  std::vector<std::size_t> seen_ids;
  ClusterAssignment a;
  a.labels.resize(groups.size());
  for (std::size_t p = 0; p < groups.size(); ++p) {
    auto it = std::find(seen_ids.begin(), seen_ids.end(), groups[p]);
    std::size_t label;
    if (it == seen_ids.end()) {
      label = seen_ids.size();
      seen_ids.push_back(groups[p]);
      a.members.emplace_back();
    } else {
      label = static_cast<std::size_t>(it - seen_ids.begin());
    }
    a.labels[p] = label;
    a.members[label].push_back(p);
  }
  a.k = a.members.size();
  return a;
}

Dendrogram build_dendrogram(const DifferenceSpace& space, Linkage linkage) {
  if (space.size() < 2) {
    throw std::invalid_argument("build_dendrogram: need at least 2 vectors");
  }
  return Agglomerator(space, linkage).run();
}

std::vector<std::size_t> cut_nodes(const Dendrogram& d, std::size_t k) {
  const std::size_t n = d.n_leaves();
  if (k < 1 || k > n) {
    throw std::out_of_range("cut: k must be in [1, " + std::to_string(n) +
                            "], got " + std::to_string(k));
  }
  const std::size_t applied = n - k;
  std::vector<bool> alive(n + applied, true);
  for (std::size_t i = 0; i < applied; ++i) {
    alive[d.merges()[i].left] = false;
    alive[d.merges()[i].right] = false;
  }
  std::vector<std::size_t> nodes;
  nodes.reserve(k);
  for (std::size_t x = 0; x < alive.size(); ++x) {
    if (alive[x]) nodes.push_back(x);
  }
  std::sort(nodes.begin(), nodes.end(), [&](std::size_t a, std::size_t b) {
    return d.min_leaf(a) < d.min_leaf(b);
  });
  return nodes;
}

ClusterAssignment cut(const Dendrogram& d, std::size_t k) {
  auto nodes = cut_nodes(d, k);
  ClusterAssignment a;
  a.k = k;
  a.labels.assign(d.n_leaves(), 0);
  a.members.reserve(k);
  for (std::size_t c = 0; c < nodes.size(); ++c) {
    a.members.push_back(d.members(nodes[c]));
    for (std::size_t p : a.members.back()) a.labels[p] = c;
  }
  return a;
}

Split split_next(const Dendrogram& d, std::size_t k) {
  const std::size_t n = d.n_leaves();
  if (k < 1 || k >= n) {
    throw std::out_of_range("split_next: k must be in [1, " +
                            std::to_string(n - 1) + "], got " +
                            std::to_string(k));
  }
  const std::size_t m = n - k - 1;
  const Merge& merge = d.merges()[m];
  Split s;
  s.parent_node = n + m;
  s.left_node = merge.left;
  s.right_node = merge.right;
  s.parent = d.members(s.parent_node);
  s.left = d.members(s.left_node);
  s.right = d.members(s.right_node);
  return s;
}

KMeansResult kmeans(const DifferenceSpace& space, std::size_t k,
                    std::uint64_t seed) {
  const std::size_t n = space.size();
  const std::size_t dim = space.dim();
  if (k < 2 || k > n) {
    throw std::out_of_range("kmeans: k must be in [2, " + std::to_string(n) +
                            "], got " + std::to_string(k));
  }
  Rng rng(derive_seed(seed, "kmeans-init"));

  // Greedy k-means++: several D^2-weighted candidates per center, keep the
  // one that lowers the total potential the most.
  std::vector<double> centers;
  centers.reserve(k * dim);
  std::vector<bool> is_center(n, false);
  auto add_center = [&](std::size_t p) {
    auto r = space.row(p);
    centers.insert(centers.end(), r.begin(), r.end());
    is_center[p] = true;
  };
  std::size_t first = uniform_index(rng, n);
  add_center(first);
  std::vector<double> closest(n);
  for (std::size_t i = 0; i < n; ++i) {
    closest[i] = squared_distance(space.row(i), space.row(first));
  }
  const std::size_t trials =
      2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  std::vector<double> scratch(n);
  for (std::size_t c = 1; c < k; ++c) {
    const double potential = std::accumulate(closest.begin(), closest.end(), 0.0);
    std::size_t best_point = n;
    double best_potential = std::numeric_limits<double>::infinity();
    std::vector<double> best_closest;
    if (potential <= 0.0) {
      // Every remaining point coincides with a center.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!is_center[i]) free.push_back(i);
      }
      best_point = free[uniform_index(rng, free.size())];
      best_closest = closest;
    } else {
      for (std::size_t t = 0; t < trials; ++t) {
        double r = uniform01(rng) * potential;
        std::size_t cand = n - 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          acc += closest[i];
          if (acc > r) {
            cand = i;
            break;
          }
        }
        double pot = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          scratch[i] = std::min(closest[i],
                                squared_distance(space.row(i), space.row(cand)));
          pot += scratch[i];
        }
        if (pot < best_potential) {
          best_potential = pot;
          best_point = cand;
          best_closest = scratch;
        }
      }
    }
    add_center(best_point);
    closest = std::move(best_closest);
  }

  auto center = [&](std::size_t c) {
    return std::span<const double>(centers.data() + c * dim, dim);
  };
  std::vector<std::size_t> labels(n, k);
  std::size_t iter = 0;
  for (; iter < kMaxLloydIterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(space.row(i), center(0));
      for (std::size_t c = 1; c < k; ++c) {
        double d = squared_distance(space.row(i), center(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t l : labels) ++counts[l];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      // Reseed the empty cluster at the point farthest from its own center,
      // taken from a cluster that can spare it.
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[labels[i]] < 2) continue;
        double d = squared_distance(space.row(i), center(labels[i]));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --counts[labels[far]];
      labels[far] = c;
      counts[c] = 1;
      changed = true;
    }
    std::fill(centers.begin(), centers.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto r = space.row(i);
      for (std::size_t d = 0; d < dim; ++d) centers[labels[i] * dim + d] += r[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t d = 0; d < dim; ++d) {
        centers[c * dim + d] /= static_cast<double>(counts[c]);
      }
    }
    if (!changed) break;
  }

  KMeansResult result;
  result.iterations = std::min(iter + 1, kMaxLloydIterations);
  for (std::size_t i = 0; i < n; ++i) {
    result.inertia += squared_distance(space.row(i), center(labels[i]));
  }
  result.assignment = assignment_from_groups(labels);
  return result;
}

std::string_view to_string(RepresentativeStrategy s) {
  switch (s) {
    case RepresentativeStrategy::kCosineCenter: return "cosine-center";
    case RepresentativeStrategy::kEuclideanCenter: return "euclidean-center";
    case RepresentativeStrategy::kMaxNorm: return "max-norm";
    case RepresentativeStrategy::kRandom: return "random";
  }
  return "cosine-center";
}

RepresentativeStrategy parse_representative(std::string_view name) {
  if (name == "cosine-center") return RepresentativeStrategy::kCosineCenter;
  if (name == "euclidean-center") return RepresentativeStrategy::kEuclideanCenter;
  if (name == "max-norm") return RepresentativeStrategy::kMaxNorm;
  if (name == "random") return RepresentativeStrategy::kRandom;
  throw std::invalid_argument("unknown representative strategy '" +
                              std::string(name) + "'");
}

std::size_t representative(const DifferenceSpace& space,
                           std::span<const std::size_t> members,
                           RepresentativeRule rule) {
  if (members.empty()) {
    throw std::invalid_argument("representative: empty cluster");
  }
  if (members.size() == 1) return members.front();

  switch (rule.strategy) {
    case RepresentativeStrategy::kMaxNorm:
      return argmin_by(members, [&](std::size_t p) { return -space.norm(p); });
    case RepresentativeStrategy::kRandom: {
      std::vector<std::size_t> sorted(members.begin(), members.end());
      std::sort(sorted.begin(), sorted.end());
      Rng rng(derive_seed(rule.seed, "representative", sorted.front()));
      return sorted[uniform_index(rng, sorted.size())];
    }
    case RepresentativeStrategy::kCosineCenter:
    case RepresentativeStrategy::kEuclideanCenter:
      break;
  }

  const auto c = centroid(space, members);
  const double c_norm = std::sqrt(dot(c, c));
  if (rule.strategy == RepresentativeStrategy::kCosineCenter &&
      c_norm >= kZeroCentroid) {
    return argmin_by(members, [&](std::size_t p) {
      if (space.norm(p) == 0.0) return std::numeric_limits<double>::infinity();
      return 1.0 - dot(space.row(p), c) / (space.norm(p) * c_norm);
    });
  }
  return argmin_by(members, [&](std::size_t p) {
    return squared_distance(space.row(p), c);
  });
}

nlohmann::json to_json(const Dendrogram& d) {
  nlohmann::json merges = nlohmann::json::array();
  for (const Merge& m : d.merges()) {
    merges.push_back({{"left", m.left},
                      {"right", m.right},
                      {"height", m.height},
                      {"size", m.size}});
  }
  return {{"n_leaves", d.n_leaves()}, {"merges", merges}};
}

Dendrogram dendrogram_from_json(const nlohmann::json& j) {
  std::vector<Merge> merges;
  for (const auto& m : j.at("merges")) {
    merges.push_back({m.at("left").get<std::size_t>(),
                      m.at("right").get<std::size_t>(),
                      m.at("height").get<double>(),
                      m.at("size").get<std::size_t>()});
  }
  return Dendrogram(j.at("n_leaves").get<std::size_t>(), std::move(merges));
}

}  // namespace diffuse
