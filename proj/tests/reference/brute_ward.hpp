#pragma once

// Brute-force Ward agglomeration. Every step rescans all cluster pairs and
// recomputes centroids from the member lists, so it shares no state or
// update rule with the production agglomerator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace reference {

struct RefMerge {
  std::size_t left;
  std::size_t right;
  double height;
  std::size_t size;
};

inline std::vector<RefMerge> brute_ward(
    const std::vector<std::vector<double>>& points) {
  struct Cluster {
    std::size_t node;
    std::size_t key;  // smallest member
    std::vector<std::size_t> members;
  };
  const std::size_t n = points.size();
  const std::size_t dim = n ? points[0].size() : 0;
  std::vector<Cluster> active;
  for (std::size_t i = 0; i < n; ++i) active.push_back({i, i, {i}});

  auto centroid = [&](const Cluster& c) {
    std::vector<double> m(dim, 0.0);
    for (std::size_t p : c.members) {
      for (std::size_t d = 0; d < dim; ++d) m[d] += points[p][d];
    }
    for (double& v : m) v /= static_cast<double>(c.members.size());
    return m;
  };
  // sqrt(2 na nb / (na + nb)) * |ca - cb|
  auto ward = [&](const Cluster& a, const Cluster& b) {
    const auto ca = centroid(a), cb = centroid(b);
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) sq += (ca[d] - cb[d]) * (ca[d] - cb[d]);
    const double na = static_cast<double>(a.members.size());
    const double nb = static_cast<double>(b.members.size());
    return std::sqrt(2.0 * na * nb / (na + nb)) * std::sqrt(sq);
  };

  std::vector<RefMerge> merges;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    // Recomputed centroids of identical points can differ in the last bit,
    // so distances within 1e-12 of the minimum count as ties.
    std::vector<double> dist(active.size() * active.size());
    double min_d = INFINITY;
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        dist[i * active.size() + j] = ward(active[i], active[j]);
        min_d = std::min(min_d, dist[i * active.size() + j]);
      }
    }
    std::size_t bi = 0, bj = 0;
    double best = INFINITY;
    bool found = false;
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double d = dist[i * active.size() + j];
        if (d > min_d + 1e-12 * (1.0 + min_d)) continue;
        auto lo = std::min(active[i].key, active[j].key);
        auto hi = std::max(active[i].key, active[j].key);
        auto blo = found ? std::min(active[bi].key, active[bj].key) : 0;
        auto bhi = found ? std::max(active[bi].key, active[bj].key) : 0;
        if (!found || lo < blo || (lo == blo && hi < bhi)) {
          best = d;
          bi = i;
          bj = j;
          found = true;
        }
      }
    }
    Cluster a = active[bi], b = active[bj];
    if (b.key < a.key) std::swap(a, b);
    Cluster merged{n + step, a.key, a.members};
    merged.members.insert(merged.members.end(), b.members.begin(), b.members.end());
    merges.push_back({a.node, b.node, best, merged.members.size()});
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(std::max(bi, bj)));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(std::min(bi, bj)));
    active.push_back(std::move(merged));
  }
  return merges;
}

}  // namespace reference
