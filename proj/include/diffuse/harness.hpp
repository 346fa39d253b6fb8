#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "diffuse/estimator.hpp"
#include "diffuse/selection.hpp"
#include "diffuse/synthetic.hpp"
#include "diffuse/vectors.hpp"

namespace diffuse {

struct IterativeExperimentConfig {
  std::vector<double> thresholds{0.2};
  std::size_t n_min = 5;
  std::size_t b_max = 200;
  std::vector<SelectionStrategy> strategies{SelectionStrategy::kDiffuse,
                                            SelectionStrategy::kRandom};
};

struct NormAnalysisConfig {
  std::size_t k = 50;                 // cut used for cluster size vs norm
  std::size_t bins = 50;              // equal-count norm bins
  std::size_t histogram_budget = 20;  // selections whose norms are histogrammed
  std::size_t histogram_bins = 20;
};

struct ExperimentConfig {
  std::vector<SelectionStrategy> strategies{SelectionStrategy::kDiffuse,
                                            SelectionStrategy::kRandom};
  std::vector<std::size_t> budgets{5, 10, 20, 50};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  double subset_fraction = 0.8;
  std::string metric = kSyntheticMetric;
  // Empty: every pair listed in the data directory's pairs.json.
  std::vector<std::pair<std::string, std::string>> pairs;
  PairMode pair_mode = PairMode::kSubtract;
  ClusterOptions clustering;
  // Also evaluate a budget equal to the whole test subset.
  bool full_budget = false;
  std::optional<IterativeExperimentConfig> iterative;
  std::optional<NormAnalysisConfig> norms;

  // Throws std::invalid_argument on empty or unsorted budgets, duplicate
  // seeds, or a subset fraction outside (0, 1].
  void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);

// Everything the harness needs about one model pair, aligned by position.
struct PairData {
  std::string name;
  std::string model_a;
  std::string model_b;
  DifferenceSpace space;
  std::vector<PreferenceLabel> labels;
  std::optional<DifferenceSpace> inputs;
};

using ExperimentData = std::vector<PairData>;

// Reads embeddings/<model>.{bin,jsonl}, scores.jsonl, optional
// inputs.{bin,jsonl} and pairs.json from a data directory.
ExperimentData load_experiment_data(const ExperimentConfig& config,
                                    const std::filesystem::path& data_dir);

ExperimentData experiment_data_from_corpus(const SyntheticCorpus& corpus,
                                           PairMode mode = PairMode::kSubtract);

struct RateCell {
  SelectionStrategy strategy;
  std::size_t budget;
  std::size_t runs = 0;
  std::size_t successes = 0;
  double rate = 0.0;
  double std_error = 0.0;
};

struct DeviationCell {
  SelectionStrategy strategy;
  std::size_t budget;
  std::size_t runs = 0;
  double mean = 0.0;
  double std_error = 0.0;
};

struct IterativeCell {
  SelectionStrategy strategy;
  double p = 0.0;
  std::size_t runs = 0;
  double mean_annotations = 0.0;
  std::size_t max_annotations = 0;
  double success = 0.0;
  double error = 0.0;
  double inconclusive = 0.0;
  // Mean test winning distance per outcome class; NaN when the class is empty.
  double distance_success = 0.0;
  double distance_error = 0.0;
  double distance_inconclusive = 0.0;
  // Among concluded runs.
  double error_rate_concluded = 0.0;
};

struct ClusterNormRow {
  std::string pair;
  std::size_t cluster = 0;
  std::size_t size = 0;
  double fraction = 0.0;
  double mean_norm = 0.0;
};

struct PairNormSummary {
  std::string pair;
  double median_norm = 0.0;
  double largest_fraction = 0.0;
  double largest_mean_norm = 0.0;
};

struct NormBinRow {
  std::size_t bin = 0;
  std::size_t pairs = 0;
  double success_rate = 0.0;
  double std_error = 0.0;
  double mean_norm = 0.0;
};

struct HistogramRow {
  SelectionStrategy strategy;
  std::size_t bin = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

struct SelectedNormSummary {
  SelectionStrategy strategy;
  std::size_t count = 0;
  double median = 0.0;
  double mean = 0.0;
};

// Norm tables for one pair over its full pool.
struct PairNormTables {
  std::vector<ClusterNormRow> clusters;
  PairNormSummary summary;
  std::vector<bool> bin_success;
  std::vector<double> bin_mean_norm;
};

struct ExperimentResult {
  std::vector<RateCell> success;
  std::vector<DeviationCell> deviation;
  std::vector<IterativeCell> iterative;
  std::vector<ClusterNormRow> cluster_norms;
  std::vector<PairNormSummary> pair_norms;
  std::vector<NormBinRow> norm_bins;
  std::vector<HistogramRow> histogram;
  std::vector<SelectedNormSummary> selected_norms;
};

// Success rate and deviation from the test winning distance per
// (strategy, budget), aggregated over every (pair, seed) run.
ExperimentResult run_success_rate(const ExperimentConfig& config,
                                  const ExperimentData& data,
                                  std::size_t jobs = 1);

std::vector<DeviationCell> deviation_analysis(const ExperimentConfig& config,
                                              const ExperimentData& data,
                                              std::size_t jobs = 1);

PairNormTables norm_analyses(const PairData& pair, std::size_t k,
                             std::size_t bins);

std::vector<IterativeCell> run_iterative_experiment(
    const ExperimentConfig& config, const ExperimentData& data,
    std::size_t jobs = 1);

// Runs every analysis the config enables.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const ExperimentData& data,
                                std::size_t jobs = 1);

// CSV files with fixed headers plus manifest.json. Output depends only on
// the result and config, never on timing or thread count.
std::vector<std::filesystem::path> write_results(
    const ExperimentResult& result, const ExperimentConfig& config,
    const std::filesystem::path& out_dir);

}  // namespace diffuse
