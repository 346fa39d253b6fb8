#include "diffuse/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "diffuse/oracle.hpp"
#include "diffuse/random.hpp"

namespace diffuse {
namespace {

double as_float(double x) { return static_cast<double>(static_cast<float>(x)); }

std::string pair_prefix(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "pair%03zu", i);
  return buf;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SyntheticOptions& options) {
  if (options.pairs == 0 || options.examples < 2 || options.dim == 0) {
    throw std::invalid_argument("synthetic corpus needs pairs, examples, dim");
  }
  SyntheticCorpus corpus;
  corpus.options = options;
  const std::size_t n = options.examples;
  const std::size_t dim = options.dim;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "ex%05zu", i);
    corpus.ids.emplace_back(buf);
  }

  {
    Rng rng(derive_seed(options.seed, "synthetic-inputs"));
    std::normal_distribution<double> normal;
    std::vector<double> values(n * dim);
    for (double& v : values) v = as_float(normal(rng));
    corpus.inputs = EmbeddingMatrix(corpus.ids, dim, std::move(values));
  }

  for (std::size_t p = 0; p < options.pairs; ++p) {
    Rng rng(derive_seed(options.seed, "synthetic-pair", p));
    std::normal_distribution<double> normal;
    SyntheticPair pair;
    pair.model_a = pair_prefix(p) + "-a";
    pair.model_b = pair_prefix(p) + "-b";
    pair.mean_gap = options.mean_gap_range * (2.0 * uniform01(rng) - 1.0);

    std::vector<double> u(dim);
    double norm = 0.0;
    while (norm == 0.0) {
      for (double& x : u) x = normal(rng);
      norm = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
    }
    for (double& x : u) x /= norm;

    std::vector<double> a(n * dim);
    std::vector<double> b(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
      double g = pair.mean_gap + normal(rng);
      if (options.unanimous) g = 0.5 + std::abs(g);
      pair.gaps.push_back(g);
      pair.labels.push_back(g >= options.tie_band    ? PreferenceLabel::kA
                            : g <= -options.tie_band ? PreferenceLabel::kB
                                                     : PreferenceLabel::kTie);
      for (std::size_t c = 0; c < dim; ++c) {
        const double base = normal(rng);
        const double diff = g * u[c] + options.noise * normal(rng);
        b[i * dim + c] = as_float(base);
        a[i * dim + c] = as_float(base + diff);
      }
    }
    pair.embeddings_a = EmbeddingMatrix(corpus.ids, dim, std::move(a));
    pair.embeddings_b = EmbeddingMatrix(corpus.ids, dim, std::move(b));
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

void write_corpus(const SyntheticCorpus& corpus,
                  const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "embeddings");
  write_embeddings_file(dir / "inputs.bin", corpus.inputs);
  nlohmann::json pairs = nlohmann::json::array();
  std::ofstream scores(dir / "scores.jsonl", std::ios::trunc);
  if (!scores) throw std::runtime_error("cannot write scores.jsonl");
  for (const auto& pair : corpus.pairs) {
    write_embeddings_file(dir / "embeddings" / (pair.model_a + ".bin"),
                          pair.embeddings_a);
    write_embeddings_file(dir / "embeddings" / (pair.model_b + ".bin"),
                          pair.embeddings_b);
    pairs.push_back({pair.model_a, pair.model_b});
    std::vector<std::tuple<std::string, std::string, std::string, double>> rows;
    for (std::size_t i = 0; i < corpus.ids.size(); ++i) {
      // Ties are written as equal scores.
      const double score_a =
          pair.labels[i] == PreferenceLabel::kTie ? 0.0 : pair.gaps[i];
      rows.emplace_back(corpus.ids[i], pair.model_a, kSyntheticMetric, score_a);
      rows.emplace_back(corpus.ids[i], pair.model_b, kSyntheticMetric, 0.0);
    }
    write_scores(scores, rows);
  }
  std::ofstream(dir / "pairs.json", std::ios::trunc) << pairs.dump(1) << '\n';
}

}  // namespace diffuse
