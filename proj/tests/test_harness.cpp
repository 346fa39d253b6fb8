#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "diffuse/error.hpp"
#include "diffuse/harness.hpp"
#include "helpers.hpp"

using namespace diffuse;

namespace {

const SyntheticCorpus& corpus() {
  static const SyntheticCorpus c = [] {
    SyntheticOptions o;
    o.pairs = 6;
    o.examples = 150;
    o.dim = 8;
    return generate_synthetic_corpus(o);
  }();
  return c;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.strategies = {SelectionStrategy::kDiffuse, SelectionStrategy::kRandom,
                  SelectionStrategy::kMaxNorm, SelectionStrategy::kInputCluster};
  c.budgets = {5, 10, 20};
  c.seeds = {0, 1, 2};
  c.full_budget = true;
  c.iterative = IterativeExperimentConfig{};
  c.iterative->thresholds = {0.1, 0.2};
  c.norms = NormAnalysisConfig{10, 10, 10, 8};
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("cells cover every strategy and budget") {
    const auto data = experiment_data_from_corpus(corpus());
    const auto cfg = small_config();
    const auto r = run_experiment(cfg, data);
    CHECK(r.success.size() == 4 * 4);
    CHECK(r.deviation.size() == 4 * 4);
    for (const auto& c : r.success) {
      CHECK(c.runs == 18);
      CHECK(c.rate >= 0.0);
      CHECK(c.rate <= 1.0);
      if (c.budget == 120) CHECK(c.rate == 1.0);
    }
    for (const auto& d : r.deviation) {
      if (d.budget == 120) {
        CHECK(d.mean == 0.0);
        CHECK(d.std_error == 0.0);
      }
    }
    CHECK(r.iterative.size() == 4);
    for (const auto& c : r.iterative) {
      CHECK(c.runs == 18);
      CHECK(c.max_annotations <= 120);
      CHECK(c.success + c.error + c.inconclusive == doctest::Approx(1.0));
    }
    CHECK(r.pair_norms.size() == 6);
    CHECK(r.cluster_norms.size() == 60);
    CHECK(r.norm_bins.size() == 10);
    CHECK(r.histogram.size() == 4 * 8);
    std::size_t hist_total = 0;
    for (const auto& h : r.histogram) {
      if (h.strategy == SelectionStrategy::kRandom) hist_total += h.count;
    }
    CHECK(hist_total == 18 * 10);
  }

  TEST_CASE("results do not depend on the job count") {
    const auto data = experiment_data_from_corpus(corpus());
    const auto cfg = small_config();
    testing_util::TempDir dir;
    const auto one = write_results(run_experiment(cfg, data, 1), cfg, dir.path() / "a");
    const auto four = write_results(run_experiment(cfg, data, 4), cfg, dir.path() / "b");
    REQUIRE(one.size() == four.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
      CHECK(one[i].filename() == four[i].filename());
      CHECK(slurp(one[i]) == slurp(four[i]));
    }
    CHECK(slurp(dir.path() / "a" / "success_rate.csv").rfind(
              "strategy,budget,runs,successes,success_rate,std_error\n", 0) == 0);
  }

  TEST_CASE("deviation is signed toward the test winner") {
    // One pair where every example favours B: any sample agrees exactly.
    SyntheticOptions o;
    o.pairs = 1;
    o.examples = 40;
    o.dim = 3;
    o.unanimous = true;
    auto data = experiment_data_from_corpus(generate_synthetic_corpus(o));
    for (auto& l : data[0].labels) l = PreferenceLabel::kB;
    ExperimentConfig cfg;
    cfg.budgets = {4};
    cfg.seeds = {0};
    const auto dev = deviation_analysis(cfg, data);
    for (const auto& d : dev) CHECK(d.mean == 0.0);

    // Hand-built labels: 3 A at the largest norms, B elsewhere.
    auto& pair = data[0];
    std::vector<std::size_t> order(pair.space.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](auto a, auto b) { return pair.space.norm(a) > pair.space.norm(b); });
    for (std::size_t i = 0; i < order.size(); ++i) {
      pair.labels[order[i]] = i < 30 ? PreferenceLabel::kA : PreferenceLabel::kB;
    }
    cfg.strategies = {SelectionStrategy::kMaxNorm};
    cfg.subset_fraction = 1.0;
    const auto r = run_success_rate(cfg, data);
    // Test: A wins 30/40 -> gap 0.5. Top-4 sample: all A -> gap 1.
    CHECK(r.deviation[0].mean == doctest::Approx(0.5));
    CHECK(r.success[0].rate == 1.0);
  }

  TEST_CASE("norm analyses of one pair") {
    const auto data = experiment_data_from_corpus(corpus());
    const auto t = norm_analyses(data[0], 7, 4);
    CHECK(t.clusters.size() == 7);
    double frac = 0.0;
    for (const auto& c : t.clusters) frac += c.fraction;
    CHECK(frac == doctest::Approx(1.0));
    CHECK(t.bin_success.size() == 4);
    for (std::size_t b = 1; b < 4; ++b) CHECK(t.bin_mean_norm[b] >= t.bin_mean_norm[b - 1]);
    auto norms = data[0].space.norms();
    std::sort(norms.begin(), norms.end());
    CHECK(t.summary.median_norm == doctest::Approx(0.5 * (norms[74] + norms[75])));
    CHECK_THROWS(norm_analyses(data[0], 0, 4));
    CHECK_THROWS(norm_analyses(data[0], 5, 151));
  }

  TEST_CASE("config validation and json") {
    ExperimentConfig c = small_config();
    CHECK_NOTHROW(c.validate());
    const auto back = experiment_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));

    auto bad = c;
    bad.budgets = {10, 5};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.seeds = {1, 1};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.subset_fraction = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(experiment_config_from_json({{"budgets", "many"}}), std::invalid_argument);
    CHECK_THROWS_AS(experiment_config_from_json({{"strategies", {"oracle"}}}), std::invalid_argument);

    const auto data = experiment_data_from_corpus(corpus());
    bad = c;
    bad.budgets = {5, 500};
    CHECK_THROWS_AS(run_experiment(bad, data), std::invalid_argument);
  }

  TEST_CASE("loading reports missing data") {
    testing_util::TempDir dir;
    ExperimentConfig c;
    CHECK_THROWS_AS(load_experiment_data(c, dir.path()), DataError);
    write_corpus(generate_synthetic_corpus({.pairs = 1, .examples = 20, .dim = 2}), dir.path());
    c.pairs = {{"pair000-a", "ghost"}};
    CHECK_THROWS_AS(load_experiment_data(c, dir.path()), DataError);
  }
}
