#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "diffuse/estimator.hpp"
#include "diffuse/vectors.hpp"

namespace diffuse {

// Synthetic model-pair corpus. For each pair a mean gap mu ~ U(-r, r) and a
// random unit direction u are drawn; example i gets a quality gap
// g_i ~ N(mu, 1) and a difference vector g_i * u + eps_i with
// eps_i ~ N(0, noise^2 I). The oracle prefers A when g_i >= tie_band, B when
// g_i <= -tie_band, and calls a tie otherwise.
//
// Model B's embedding is a standard-normal base vector and model A's is the
// base plus the difference vector. All coordinates are rounded to 32-bit
// floats so the corpus survives the binary embedding format unchanged.
struct SyntheticOptions {
  std::size_t pairs = 100;
  std::size_t examples = 1000;
  std::size_t dim = 32;
  double noise = 1.0;
  double mean_gap_range = 0.5;
  double tie_band = 0.05;
  // Pairs whose gaps are all >= 0.5, so model A wins every example.
  bool unanimous = false;
  std::uint64_t seed = 7;
};

struct SyntheticPair {
  std::string model_a;
  std::string model_b;
  double mean_gap = 0.0;
  EmbeddingMatrix embeddings_a;
  EmbeddingMatrix embeddings_b;
  std::vector<double> gaps;
  std::vector<PreferenceLabel> labels;
};

struct SyntheticCorpus {
  SyntheticOptions options;
  std::vector<std::string> ids;
  std::vector<SyntheticPair> pairs;
  EmbeddingMatrix inputs;  // unrelated to the gaps
};

inline constexpr const char* kSyntheticMetric = "gap";

SyntheticCorpus generate_synthetic_corpus(const SyntheticOptions& options);

// Writes the corpus as a data directory: embeddings/<model>.bin,
// inputs.bin, scores.jsonl (metric "gap") and pairs.json.
void write_corpus(const SyntheticCorpus& corpus,
                  const std::filesystem::path& dir);

}  // namespace diffuse
