#include <doctest.h>

#include <algorithm>
#include <set>

#include "diffuse/selection.hpp"
#include "helpers.hpp"

using namespace diffuse;
using testing_util::gaussian_space;

TEST_SUITE("selection") {
  TEST_CASE("diffuse picks one representative per cluster") {
    const auto s = gaussian_space(80, 5, 1);
    const auto d = build_dendrogram(s);
    for (std::size_t b : {1u, 2u, 5u, 13u, 80u}) {
      const auto plan = select_diffuse(s, b);
      CHECK(plan.selected.size() == b);
      CHECK(plan.budget == b);
      REQUIRE(plan.cluster_of);
      CHECK(plan.cluster_of->size() == 80);
      const auto a = cut(d, b);
      for (std::size_t c = 0; c < b; ++c) {
        CHECK(plan.positions[c] == representative(s, a.members[c]));
        CHECK(plan.cluster_of->at(plan.selected[c]) == c);
      }
      CHECK(select_from_dendrogram(s, d, b).selected == plan.selected);
    }
  }

  TEST_CASE("full budget lists every example") {
    const auto s = gaussian_space(30, 3, 2);
    auto ids = select_diffuse(s, 30).selected;
    std::sort(ids.begin(), ids.end());
    auto all = s.ids();
    std::sort(all.begin(), all.end());
    CHECK(ids == all);
  }

  TEST_CASE("budget bounds") {
    const auto s = gaussian_space(10, 3, 3);
    CHECK_THROWS_AS(select_diffuse(s, 11), std::invalid_argument);
    CHECK_THROWS_AS(select_diffuse(s, 0), std::invalid_argument);
    CHECK_THROWS_AS(select_random(s.ids(), 11, 0), std::invalid_argument);
    CHECK_THROWS_AS(select_max_norm(s, 11), std::invalid_argument);
  }

  TEST_CASE("random selection is seeded and distinct") {
    const auto s = gaussian_space(50, 2, 4);
    const auto a = select_random(s.ids(), 20, 9);
    CHECK(a.selected == select_random(s.ids(), 20, 9).selected);
    CHECK(a.selected != select_random(s.ids(), 20, 10).selected);
    CHECK(std::set<std::string>(a.selected.begin(), a.selected.end()).size() == 20);
    CHECK_FALSE(a.cluster_of);
  }

  TEST_CASE("max norm takes the largest difference vectors") {
    const auto s = gaussian_space(40, 4, 5);
    const auto plan = select_max_norm(s, 6);
    std::vector<double> norms = s.norms();
    std::sort(norms.rbegin(), norms.rend());
    for (std::size_t i = 0; i < 6; ++i) CHECK(s.norm(plan.positions[i]) == norms[i]);
  }

  TEST_CASE("other clustering backends") {
    const auto s = gaussian_space(60, 4, 6);
    for (auto m : {ClusterMethod::kAverageCosine, ClusterMethod::kKMeans}) {
      ClusterOptions o;
      o.method = m;
      o.seed = 3;
      const auto plan = select_diffuse(s, 7, o);
      CHECK(plan.selected.size() == 7);
      CHECK(std::set<std::string>(plan.selected.begin(), plan.selected.end()).size() == 7);
      CHECK(select_diffuse(s, 7, o).selected == plan.selected);
    }
  }

  TEST_CASE("input clustering works on the input embeddings") {
    EmbeddingMatrix inputs(testing_util::make_ids(12), 1,
                           {0, 0.1, 0.2, 10, 10.1, 10.2, 20, 20.1, 20.2, 30, 30.1, 30.2});
    ClusterOptions o;
    o.representative.strategy = RepresentativeStrategy::kEuclideanCenter;
    const auto plan = select_input_cluster(inputs, 4, o);
    CHECK(plan.strategy == SelectionStrategy::kInputCluster);
    CHECK(plan.selected == std::vector<std::string>{"e1", "e4", "e7", "e10"});
  }

  TEST_CASE("plan json") {
    const auto s = gaussian_space(8, 2, 7);
    const auto j = to_json(select_diffuse(s, 3));
    CHECK(j["strategy"] == "diffuse");
    CHECK(j["selected"].size() == 3);
    CHECK(j["cluster_of"].size() == 8);
    CHECK(to_json(select_random(s.ids(), 2, 1))["cluster_of"].is_null());
    CHECK(parse_strategy("max-norm") == SelectionStrategy::kMaxNorm);
    CHECK(parse_cluster_method("kmeans") == ClusterMethod::kKMeans);
    CHECK_THROWS(parse_strategy("best"));
  }
}
