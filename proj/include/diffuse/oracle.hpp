#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "diffuse/error.hpp"
#include "diffuse/estimator.hpp"

namespace diffuse {

// Batch oracle contract: one label per id, in the order given.
using Oracle =
    std::function<std::vector<PreferenceLabel>(std::span<const std::string>)>;

class MissingScoreError : public DataError {
 public:
  MissingScoreError(std::string id, std::string model, std::string metric)
      : DataError("missing score for id '" + id + "', model '" + model +
                  "', metric '" + metric + "'"),
        id_(std::move(id)),
        model_(std::move(model)),
        metric_(std::move(metric)) {}

  const std::string& id() const { return id_; }
  const std::string& model() const { return model_; }
  const std::string& metric() const { return metric_; }

 private:
  std::string id_;
  std::string model_;
  std::string metric_;
};

/// Per-example metric scores keyed by (example id, model id, metric name).
class ScoreTable {
 public:
  // Throws DataError on a duplicate key or a non-finite score.
  void add(const std::string& id, const std::string& model,
           const std::string& metric, double score);

  const double* find(const std::string& id, const std::string& model,
                     const std::string& metric) const;
  double at(const std::string& id, const std::string& model,
            const std::string& metric) const;
  std::size_t size() const { return scores_.size(); }

 private:
  std::map<std::tuple<std::string, std::string, std::string>, double> scores_;
};

// JSONL: {"id": ..., "model": ..., "metric": ..., "score": number}
ScoreTable load_scores(std::istream& in);
ScoreTable load_scores_file(const std::filesystem::path& path);
void write_scores(std::ostream& out,
                  std::span<const std::tuple<std::string, std::string,
                                             std::string, double>> rows);

// A if model_a scored higher, B if lower, Tie if equal.
PreferenceLabel simulated_preference(const ScoreTable& t, const std::string& id,
                                     const std::string& model_a,
                                     const std::string& model_b,
                                     const std::string& metric);

WinStats ground_truth(const ScoreTable& t, std::span<const std::string> pool,
                      const std::string& model_a, const std::string& model_b,
                      const std::string& metric);

// Score-replay oracle over a table.
Oracle score_oracle(const ScoreTable& t, std::string model_a,
                    std::string model_b, std::string metric);

// One model's outputs for display: {"id": ..., "input": ..., "output": ...}
struct OutputRecord {
  std::string id;
  std::string input;
  std::string output;
};

std::vector<OutputRecord> load_outputs(std::istream& in);
std::vector<OutputRecord> load_outputs_file(const std::filesystem::path& path);

}  // namespace diffuse
