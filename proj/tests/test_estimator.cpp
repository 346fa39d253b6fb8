#include <doctest.h>

#include <cmath>
#include <vector>

#include "diffuse/estimator.hpp"
#include "exact_hypergeom.hpp"

using namespace diffuse;
using L = PreferenceLabel;

TEST_SUITE("estimator") {
  TEST_CASE("worked example: 8 of 10 votes from a pool of 500") {
    CHECK(std::abs(hypergeom_sf(7, 500, 250, 10) - 0.0529) <= 5e-4);
    CHECK(risk(LabelCounts{8, 2, 0}, 500) == hypergeom_sf(7, 500, 250, 10));
  }

  TEST_CASE("survival function matches exact enumeration") {
    for (int N = 0; N <= 30; ++N) {
      for (int K = 0; K <= N; ++K) {
        for (int n = 0; n <= N; ++n) {
          for (int k = -1; k <= n; ++k) {
            const double got = hypergeom_sf(k, N, K, n);
            const double want = static_cast<double>(reference::exact_sf(k, N, K, n));
            if (std::abs(got - want) > 1e-10) {
              FAIL("sf(" << k << "," << N << "," << K << "," << n << ") = " << got
                         << ", exact " << want);
            }
          }
        }
      }
    }
  }

  TEST_CASE("large pools stay accurate and monotone") {
    double prev = 1.0;
    for (int k = -1; k <= 40; ++k) {
      const double v = hypergeom_sf(k, 1000000, 500000, 40);
      CHECK(v <= prev);
      CHECK(v >= 0.0);
      prev = v;
    }
    CHECK(hypergeom_sf(-1, 1000, 500, 10) == 1.0);
    CHECK(hypergeom_sf(10, 1000, 500, 10) == 0.0);
    CHECK(hypergeom_sf(5, 1000000, 500000, 10) ==
          doctest::Approx(0.376953125).epsilon(1e-5));  // binomial limit
  }

  TEST_CASE("invalid arguments are rejected") {
    CHECK_THROWS(hypergeom_sf(-2, 10, 5, 3));
    CHECK_THROWS(hypergeom_sf(4, 10, 5, 3));
    CHECK_THROWS(hypergeom_sf(1, 10, 11, 3));
    CHECK_THROWS(hypergeom_sf(1, 10, 5, 11));
  }

  TEST_CASE("winning stats") {
    std::vector<L> labels{L::kA, L::kB, L::kA, L::kTie, L::kA};
    const auto s = winning_stats(labels);
    CHECK(s.winner == L::kA);
    CHECK(s.p_a == doctest::Approx(0.6));
    CHECK(s.p_tie == doctest::Approx(0.2));
    CHECK(s.distance == doctest::Approx(0.4));

    const auto level = winning_stats(LabelCounts{3, 3, 1});
    CHECK(level.winner == L::kTie);
    CHECK(level.distance == 0.0);
    CHECK(winning_stats(LabelCounts{1, 4, 0}).winner == L::kB);
    CHECK_THROWS(winning_stats(LabelCounts{}));
  }

  TEST_CASE("risk conventions") {
    CHECK(risk(LabelCounts{3, 3, 2}, 100) == 1.0);
    CHECK_THROWS(risk(LabelCounts{0, 0, 4}, 100));
    CHECK_THROWS(risk(LabelCounts{30, 1, 0}, 20));
    // Ties are draws, never successes.
    CHECK(risk(LabelCounts{5, 1, 3}, 60) ==
          doctest::Approx(static_cast<double>(reference::exact_sf(4, 60, 30, 9))));
    // Odd pools use floor(N / 2) successes.
    CHECK(risk(LabelCounts{4, 0, 0}, 61) ==
          doctest::Approx(static_cast<double>(reference::exact_sf(3, 61, 30, 4))));
    for (std::size_t a = 0; a <= 6; ++a) {
      for (std::size_t b = 0; b <= 6; ++b) {
        if (a == 0 && b == 0) continue;
        CHECK(risk(LabelCounts{a, b, 1}, 50) == risk(LabelCounts{b, a, 1}, 50));
      }
    }
  }

  TEST_CASE("labels") {
    CHECK(parse_label("A") == L::kA);
    CHECK(parse_label("tie") == L::kTie);
    CHECK_THROWS(parse_label("left"));
    CHECK(mirror(L::kA) == L::kB);
    CHECK(mirror(L::kTie) == L::kTie);
    for (auto l : {L::kA, L::kB, L::kTie}) CHECK(parse_label(to_string(l)) == l);
  }
}
