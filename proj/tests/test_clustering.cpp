#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "brute_ward.hpp"
#include "diffuse/clustering.hpp"
#include "diffuse/error.hpp"
#include "helpers.hpp"

using namespace diffuse;
using testing_util::gaussian_space;

namespace {

// Average linkage over cosine distances, recomputed from members each step.
std::vector<Merge> brute_average_cosine(const DifferenceSpace& s) {
  const std::size_t n = s.size();
  auto cos_d = [&](std::size_t a, std::size_t b) {
    if (s.norm(a) == 0.0 || s.norm(b) == 0.0) return 2.0;
    double dot = 0.0;
    for (std::size_t d = 0; d < s.dim(); ++d) dot += s.row(a)[d] * s.row(b)[d];
    return std::clamp(1.0 - dot / (s.norm(a) * s.norm(b)), 0.0, 2.0);
  };
  struct C {
    std::size_t node, key;
    std::vector<std::size_t> m;
  };
  std::vector<C> act;
  for (std::size_t i = 0; i < n; ++i) act.push_back({i, i, {i}});
  std::vector<Merge> out;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    double best = INFINITY;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < act.size(); ++i) {
      for (std::size_t j = i + 1; j < act.size(); ++j) {
        double sum = 0.0;
        for (auto a : act[i].m) {
          for (auto b : act[j].m) sum += cos_d(a, b);
        }
        const double d = sum / static_cast<double>(act[i].m.size() * act[j].m.size());
        if (d < best - 1e-12) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    C a = act[bi], b = act[bj];
    if (b.key < a.key) std::swap(a, b);
    C merged{n + step, a.key, a.m};
    merged.m.insert(merged.m.end(), b.m.begin(), b.m.end());
    out.push_back({a.node, b.node, best, merged.m.size()});
    act.erase(act.begin() + static_cast<std::ptrdiff_t>(bj));
    act.erase(act.begin() + static_cast<std::ptrdiff_t>(bi));
    act.push_back(merged);
  }
  return out;
}

void check_matches_reference(const DifferenceSpace& s) {
  const auto ref = reference::brute_ward(testing_util::rows_of(s));
  const auto d = build_dendrogram(s);
  REQUIRE(d.merges().size() == ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const Merge& m = d.merges()[i];
    CHECK(m.left == ref[i].left);
    CHECK(m.right == ref[i].right);
    CHECK(m.size == ref[i].size);
    CHECK(m.height == doctest::Approx(ref[i].height).epsilon(1e-9));
  }
}

}  // namespace

TEST_SUITE("clustering") {
  TEST_CASE("ward merges match the brute-force agglomerator") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      CAPTURE(seed);
      check_matches_reference(gaussian_space(3 + seed % 30, 1 + seed % 7, seed));
    }
  }

  TEST_CASE("duplicate points merge first and in key order") {
    // Rows 0, 2 and 5 coincide, as do 1 and 4.
    std::vector<double> v{0, 0, 3, 1, 0, 0, 7, 7, 3, 1, 0, 0, -4, 2};
    DifferenceSpace s(testing_util::make_ids(7), PairMode::kSubtract, 2, v);
    const auto d = build_dendrogram(s);
    CHECK(d.merges()[0] == Merge{0, 2, 0.0, 2});
    CHECK(d.merges()[1] == Merge{7, 5, 0.0, 3});
    CHECK(d.merges()[2] == Merge{1, 4, 0.0, 2});
    check_matches_reference(s);
  }

  TEST_CASE("ward heights never decrease") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto d = build_dendrogram(gaussian_space(120, 5, seed));
      for (std::size_t i = 1; i < d.merges().size(); ++i) {
        CHECK(d.merges()[i].height >= d.merges()[i - 1].height);
      }
    }
  }

  TEST_CASE("two well separated blobs split at the root") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<double> v;
    for (int i = 0; i < 40; ++i) {
      const double off = i % 2 ? 10.0 : -10.0;
      v.push_back(off + noise(rng));
      v.push_back(noise(rng));
    }
    DifferenceSpace s(testing_util::make_ids(40), PairMode::kSubtract, 2, v);
    const auto a = cut(build_dendrogram(s), 2);
    for (std::size_t i = 0; i < 40; ++i) CHECK(a.labels[i] == i % 2);
  }

  TEST_CASE("average cosine linkage matches brute force") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto s = gaussian_space(4 + seed * 2, 3, seed + 100);
      const auto ref = brute_average_cosine(s);
      const auto d = build_dendrogram(s, Linkage::kAverageCosine);
      for (std::size_t i = 0; i < ref.size(); ++i) {
        CHECK(d.merges()[i].left == ref[i].left);
        CHECK(d.merges()[i].right == ref[i].right);
        CHECK(d.merges()[i].height == doctest::Approx(ref[i].height).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("zero vectors are far from everything under cosine") {
    DifferenceSpace s(testing_util::make_ids(3), PairMode::kSubtract, 2, {1, 0, 0, 0, 2, 0.1});
    const auto d = build_dendrogram(s, Linkage::kAverageCosine);
    CHECK(d.merges()[0].left == 0);
    CHECK(d.merges()[0].right == 2);
    CHECK(d.merges()[1].height == doctest::Approx(2.0));
  }

  TEST_CASE("cuts refine one split at a time") {
    const auto s = gaussian_space(60, 4, 9);
    const auto d = build_dendrogram(s);
    CHECK(cut(d, 1).members.front().size() == 60);
    for (std::size_t k = 1; k < 60; ++k) {
      const auto coarse = cut(d, k);
      const auto fine = cut(d, k + 1);
      CHECK(fine.k == k + 1);
      std::set<std::set<std::size_t>> cs, fs;
      for (auto& m : coarse.members) cs.emplace(m.begin(), m.end());
      for (auto& m : fine.members) fs.emplace(m.begin(), m.end());
      std::vector<std::set<std::size_t>> gone, added;
      std::set_difference(cs.begin(), cs.end(), fs.begin(), fs.end(), std::back_inserter(gone));
      std::set_difference(fs.begin(), fs.end(), cs.begin(), cs.end(), std::back_inserter(added));
      REQUIRE(gone.size() == 1);
      REQUIRE(added.size() == 2);

      const Split sp = split_next(d, k);
      CHECK(std::set<std::size_t>(sp.parent.begin(), sp.parent.end()) == gone[0]);
      std::set<std::size_t> l(sp.left.begin(), sp.left.end());
      std::set<std::size_t> r(sp.right.begin(), sp.right.end());
      CHECK((l == added[0] || l == added[1]));
      CHECK((r == added[0] || r == added[1]));
      CHECK(*l.begin() < *r.begin());
    }
    const auto singles = cut(d, 60);
    for (std::size_t i = 0; i < 60; ++i) CHECK(singles.labels[i] == i);
    CHECK_THROWS(cut(d, 0));
    CHECK_THROWS(cut(d, 61));
    CHECK_THROWS(split_next(d, 60));
  }

  TEST_CASE("cluster indices follow the smallest member") {
    const auto d = build_dendrogram(gaussian_space(30, 3, 4));
    for (std::size_t k = 1; k <= 30; ++k) {
      const auto a = cut(d, k);
      for (std::size_t c = 1; c < a.k; ++c) {
        CHECK(a.members[c - 1].front() < a.members[c].front());
      }
      const auto nodes = cut_nodes(d, k);
      for (std::size_t c = 0; c < k; ++c) CHECK(d.members(nodes[c]) == a.members[c]);
    }
  }

  TEST_CASE("dendrogram json round trip and validation") {
    const auto d = build_dendrogram(gaussian_space(12, 3, 2));
    CHECK(dendrogram_from_json(to_json(d)) == d);
    auto bad = d.merges();
    bad[3].left = bad[2].left;
    CHECK_THROWS(Dendrogram(12, bad));
    bad = d.merges();
    bad.back().size = 11;
    CHECK_THROWS(Dendrogram(12, bad));
    CHECK_THROWS(Dendrogram(12, std::vector<Merge>(d.merges().begin(), d.merges().end() - 1)));
  }

  TEST_CASE("k-means is deterministic and finds blobs") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> noise(0.0, 0.2);
    std::vector<double> v;
    for (int i = 0; i < 90; ++i) {
      v.push_back(10.0 * (i % 3) + noise(rng));
      v.push_back(-5.0 * (i % 3) + noise(rng));
    }
    DifferenceSpace s(testing_util::make_ids(90), PairMode::kSubtract, 2, v);
    const auto r = kmeans(s, 3, 1);
    CHECK(r.assignment.k == 3);
    for (std::size_t i = 0; i < 90; ++i) CHECK(r.assignment.labels[i] == i % 3);
    CHECK(kmeans(s, 3, 1).assignment == r.assignment);
    CHECK(r.iterations <= 300);

    const auto g = gaussian_space(50, 4, 6);
    for (std::size_t k : {2u, 7u, 50u}) {
      const auto a = kmeans(g, k, 3).assignment;
      CHECK(a.members.size() == k);
      for (const auto& m : a.members) CHECK_FALSE(m.empty());
    }
  }

  TEST_CASE("k-means copes with coincident points") {
    DifferenceSpace s(testing_util::make_ids(6), PairMode::kSubtract, 1, {1, 1, 1, 1, 2, 2});
    const auto a = kmeans(s, 4, 0).assignment;
    CHECK(a.k == 4);
    for (const auto& m : a.members) CHECK_FALSE(m.empty());
  }

  TEST_CASE("representatives") {
    const auto s = gaussian_space(25, 6, 12);
    std::vector<std::size_t> members{3, 7, 8, 11, 19, 24};

    std::vector<double> c(6, 0.0);
    for (auto p : members) {
      for (std::size_t d = 0; d < 6; ++d) c[d] += s.row(p)[d] / 6.0;
    }
    auto cosine = [&](std::size_t p) {
      double dot = 0.0, cn = 0.0;
      for (std::size_t d = 0; d < 6; ++d) {
        dot += s.row(p)[d] * c[d];
        cn += c[d] * c[d];
      }
      return 1.0 - dot / (s.norm(p) * std::sqrt(cn));
    };
    auto euclid = [&](std::size_t p) {
      double q = 0.0;
      for (std::size_t d = 0; d < 6; ++d) q += (s.row(p)[d] - c[d]) * (s.row(p)[d] - c[d]);
      return q;
    };
    auto best = [&](auto f) {
      return *std::min_element(members.begin(), members.end(),
                               [&](auto a, auto b) { return f(a) < f(b); });
    };
    CHECK(representative(s, members) == best(cosine));
    CHECK(representative(s, members, {RepresentativeStrategy::kEuclideanCenter}) == best(euclid));
    CHECK(representative(s, members, {RepresentativeStrategy::kMaxNorm}) ==
          best([&](auto p) { return -s.norm(p); }));

    RepresentativeRule rnd{RepresentativeStrategy::kRandom, 5};
    const auto r = representative(s, members, rnd);
    CHECK(std::count(members.begin(), members.end(), r) == 1);
    CHECK(representative(s, members, rnd) == r);
    CHECK(representative(s, std::vector<std::size_t>{13}) == 13);
    CHECK_THROWS(representative(s, std::vector<std::size_t>{}));
  }

  TEST_CASE("cosine center falls back when the centroid vanishes") {
    // Members cancel out; the zero vector sits exactly on the centroid.
    DifferenceSpace s(testing_util::make_ids(3), PairMode::kSubtract, 2, {1, 0, -1, 0, 0, 0});
    std::vector<std::size_t> all{0, 1, 2};
    CHECK(representative(s, all) == 2);
    // Non-vanishing centroid: the zero vector is never picked.
    DifferenceSpace t(testing_util::make_ids(3), PairMode::kSubtract, 2, {0, 0, 1, 0.1, 1, -0.1});
    CHECK(representative(t, all) != 0);
  }

  TEST_CASE("names round trip") {
    CHECK(parse_linkage(to_string(Linkage::kAverageCosine)) == Linkage::kAverageCosine);
    CHECK(parse_representative(to_string(RepresentativeStrategy::kRandom)) ==
          RepresentativeStrategy::kRandom);
    CHECK_THROWS(parse_linkage("single"));
  }
}
