#include "diffuse/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "diffuse/error.hpp"
#include "diffuse/iterative.hpp"
#include "diffuse/oracle.hpp"
#include "diffuse/random.hpp"

namespace diffuse {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Runs fn(i) for i in [0, count) on up to `jobs` threads. Each index is
// processed exactly once; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

double signed_gap(const WinStats& s) { return s.p_a - s.p_b; }

double orientation(PreferenceLabel winner) {
  return winner == PreferenceLabel::kB ? -1.0 : 1.0;
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

struct SelectionRecord {
  std::size_t strategy;
  std::size_t budget;
  bool success;
  double deviation;
  std::vector<double> norms;
};

struct IterationRecord {
  std::size_t strategy;
  std::size_t threshold;
  Outcome outcome;
  std::size_t annotations;
  PreferenceLabel test_winner;
  double test_distance;
};

struct JobOutput {
  std::vector<SelectionRecord> selection;
  std::vector<IterationRecord> iteration;
};

std::size_t subset_size(const ExperimentConfig& config, std::size_t pool) {
  auto m = static_cast<std::size_t>(
      std::llround(config.subset_fraction * static_cast<double>(pool)));
  return std::clamp<std::size_t>(m, 2, pool);
}

std::vector<std::size_t> effective_budgets(const ExperimentConfig& config,
                                           std::size_t subset) {
  std::vector<std::size_t> budgets = config.budgets;
  if (config.full_budget && budgets.back() != subset) budgets.push_back(subset);
  for (std::size_t b : budgets) {
    if (b > subset) {
      throw std::invalid_argument("budget " + std::to_string(b) +
                                  " exceeds test subset of " +
                                  std::to_string(subset));
    }
  }
  return budgets;
}

Linkage linkage_of(ClusterMethod m) {
  return m == ClusterMethod::kAverageCosine ? Linkage::kAverageCosine
                                            : Linkage::kWardEuclidean;
}

JobOutput run_job(const ExperimentConfig& config, const PairData& pair,
                  std::size_t pair_index, std::uint64_t seed, bool selection,
                  bool iteration) {
  JobOutput out;
  const std::size_t m = subset_size(config, pair.space.size());
  Rng subset_rng(derive_seed(seed, "subset", pair_index));
  auto positions = sample_without_replacement(subset_rng, pair.space.size(), m);
  std::sort(positions.begin(), positions.end());
  auto space = std::make_shared<const DifferenceSpace>(pair.space.subset(positions));
  std::vector<PreferenceLabel> labels;
  labels.reserve(m);
  for (std::size_t p : positions) labels.push_back(pair.labels[p]);
  const WinStats test = winning_stats(labels);
  const double orient = orientation(test.winner);

  auto uses = [](const std::vector<SelectionStrategy>& v, SelectionStrategy s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  const bool hierarchical = config.clustering.method != ClusterMethod::kKMeans;
  const bool need_selection_tree =
      selection && hierarchical &&
      uses(config.strategies, SelectionStrategy::kDiffuse);
  const bool need_ward_tree =
      iteration && uses(config.iterative->strategies, SelectionStrategy::kDiffuse);

  std::shared_ptr<const Dendrogram> selection_tree;
  std::shared_ptr<const Dendrogram> ward_tree;
  if (need_selection_tree) {
    selection_tree = std::make_shared<const Dendrogram>(
        build_dendrogram(*space, linkage_of(config.clustering.method)));
    if (config.clustering.method == ClusterMethod::kWardEuclidean) {
      ward_tree = selection_tree;
    }
  }
  if (need_ward_tree && !ward_tree) {
    ward_tree = std::make_shared<const Dendrogram>(
        build_dendrogram(*space, Linkage::kWardEuclidean));
  }

  RepresentativeRule rule = config.clustering.representative;
  rule.seed = derive_seed(seed, "representative", pair_index, rule.seed);

  if (selection) {
    const auto budgets = effective_budgets(config, m);
    std::optional<DifferenceSpace> inputs;
    if (uses(config.strategies, SelectionStrategy::kInputCluster)) {
      if (!pair.inputs) {
        throw DataError("input-cluster strategy needs input embeddings for " +
                        pair.name);
      }
      inputs = pair.inputs->subset(positions);
    }
    for (std::size_t si = 0; si < config.strategies.size(); ++si) {
      const SelectionStrategy strategy = config.strategies[si];
      for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
        const std::size_t budget = budgets[bi];
        SelectionPlan plan;
        ClusterOptions options = config.clustering;
        options.representative = rule;
        options.seed = derive_seed(seed, "kmeans", pair_index, budget);
        switch (strategy) {
          case SelectionStrategy::kDiffuse:
            plan = selection_tree
                       ? select_from_dendrogram(*space, *selection_tree, budget, rule)
                       : select_diffuse(*space, budget, options);
            break;
          case SelectionStrategy::kRandom:
            plan = select_random(space->ids(), budget,
                                 derive_seed(seed, "select", pair_index));
            break;
          case SelectionStrategy::kMaxNorm:
            plan = select_max_norm(*space, budget);
            break;
          case SelectionStrategy::kInputCluster: {
            // Rows follow the pair subset, so positions carry over.
            plan = select_diffuse(*inputs, budget, options);
            break;
          }
        }
        LabelCounts counts;
        for (std::size_t p : plan.positions) counts.add(labels[p]);
        const WinStats sample = winning_stats(counts);
        SelectionRecord rec{si, bi, sample.winner == test.winner,
                            orient * (signed_gap(sample) - signed_gap(test)),
                            {}};
        if (config.norms && budget == config.norms->histogram_budget) {
          for (std::size_t p : plan.positions) rec.norms.push_back(space->norm(p));
        }
        out.selection.push_back(std::move(rec));
      }
    }
  }

  if (iteration) {
    const auto& it = *config.iterative;
    auto oracle = [&](std::span<const std::string> ids) {
      std::vector<PreferenceLabel> result;
      result.reserve(ids.size());
      for (const auto& id : ids) result.push_back(labels[*space->position(id)]);
      return result;
    };
    for (std::size_t si = 0; si < it.strategies.size(); ++si) {
      for (std::size_t ti = 0; ti < it.thresholds.size(); ++ti) {
        SessionConfig sc;
        sc.p = it.thresholds[ti];
        sc.n_min = it.n_min;
        sc.b_max = std::min(it.b_max, m);
        sc.representative = rule;
        sc.seed = seed;
        IterationRecord rec{si, ti, Outcome::kInconclusive, 0, test.winner,
                            test.distance};
        switch (it.strategies[si]) {
          case SelectionStrategy::kDiffuse: {
            Session session = start_session(space, sc, ward_tree);
            rec.outcome = run_iterative(session, oracle);
            rec.annotations = session.state().annotated_count;
            break;
          }
          case SelectionStrategy::kRandom: {
            auto summary = run_iterative_random(
                space->ids(), sc, oracle, derive_seed(seed, "iterative", pair_index));
            rec.outcome = summary.outcome;
            rec.annotations = summary.annotated_count;
            break;
          }
          default:
            throw std::invalid_argument(
                "iterative experiments support diffuse and random only");
        }
        out.iteration.push_back(rec);
      }
    }
  }
  return out;
}

std::vector<JobOutput> run_jobs(const ExperimentConfig& config,
                                const ExperimentData& data, std::size_t jobs,
                                bool selection, bool iteration) {
  config.validate();
  if (data.empty()) throw DataError("no model pairs to evaluate");
  const std::size_t n_seeds = config.seeds.size();
  std::vector<JobOutput> outputs(data.size() * n_seeds);
  parallel_for(outputs.size(), jobs, [&](std::size_t j) {
    const std::size_t p = j / n_seeds;
    outputs[j] = run_job(config, data[p], p, config.seeds[j % n_seeds],
                         selection, iteration);
  });
  return outputs;
}

void aggregate_selection(const ExperimentConfig& config,
                         const ExperimentData& data,
                         const std::vector<JobOutput>& outputs,
                         ExperimentResult& result) {
  const auto budgets =
      effective_budgets(config, subset_size(config, data.front().space.size()));
  const std::size_t nb = budgets.size();
  const std::size_t ns = config.strategies.size();
  std::vector<std::size_t> runs(ns * nb, 0), wins(ns * nb, 0);
  std::vector<double> sum(ns * nb, 0.0), sum_sq(ns * nb, 0.0);
  std::vector<std::vector<double>> norms(ns);
  for (const auto& job : outputs) {
    for (const auto& r : job.selection) {
      const std::size_t c = r.strategy * nb + r.budget;
      ++runs[c];
      wins[c] += r.success ? 1 : 0;
      sum[c] += r.deviation;
      sum_sq[c] += r.deviation * r.deviation;
      norms[r.strategy].insert(norms[r.strategy].end(), r.norms.begin(),
                               r.norms.end());
    }
  }
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t c = s * nb + b;
      const double n = static_cast<double>(runs[c]);
      RateCell rate{config.strategies[s], budgets[b], runs[c], wins[c]};
      rate.rate = n > 0 ? static_cast<double>(wins[c]) / n : kNaN;
      rate.std_error = n > 0 ? std::sqrt(rate.rate * (1.0 - rate.rate) / n) : kNaN;
      result.success.push_back(rate);

      DeviationCell dev{config.strategies[s], budgets[b], runs[c]};
      dev.mean = n > 0 ? sum[c] / n : kNaN;
      const double var =
          n > 1 ? std::max(0.0, (sum_sq[c] - n * dev.mean * dev.mean) / (n - 1.0))
                : 0.0;
      dev.std_error = n > 0 ? std::sqrt(var / n) : kNaN;
      result.deviation.push_back(dev);
    }
  }

  if (!config.norms) return;
  double top = 0.0;
  for (const auto& v : norms) {
    for (double x : v) top = std::max(top, x);
  }
  const std::size_t nbins = config.norms->histogram_bins;
  const double width = top > 0.0 ? top / static_cast<double>(nbins) : 1.0;
  for (std::size_t s = 0; s < ns; ++s) {
    std::vector<std::size_t> counts(nbins, 0);
    for (double x : norms[s]) {
      auto b = static_cast<std::size_t>(x / width);
      ++counts[std::min(b, nbins - 1)];
    }
    for (std::size_t b = 0; b < nbins; ++b) {
      result.histogram.push_back({config.strategies[s], b,
                                  width * static_cast<double>(b),
                                  width * static_cast<double>(b + 1), counts[b]});
    }
    SelectedNormSummary summary{config.strategies[s], norms[s].size()};
    summary.median = median(norms[s]);
    summary.mean = norms[s].empty()
                       ? kNaN
                       : std::accumulate(norms[s].begin(), norms[s].end(), 0.0) /
                             static_cast<double>(norms[s].size());
    result.selected_norms.push_back(summary);
  }
}

std::vector<IterativeCell> aggregate_iteration(
    const ExperimentConfig& config, const std::vector<JobOutput>& outputs) {
  const auto& it = *config.iterative;
  const std::size_t nt = it.thresholds.size();
  std::vector<IterativeCell> cells;
  for (std::size_t s = 0; s < it.strategies.size(); ++s) {
    for (std::size_t t = 0; t < nt; ++t) {
      IterativeCell cell{it.strategies[s], it.thresholds[t]};
      std::size_t ok = 0, bad = 0, open = 0, annotations = 0;
      double d_ok = 0.0, d_bad = 0.0, d_open = 0.0;
      for (const auto& job : outputs) {
        for (const auto& r : job.iteration) {
          if (r.strategy != s || r.threshold != t) continue;
          ++cell.runs;
          annotations += r.annotations;
          cell.max_annotations = std::max(cell.max_annotations, r.annotations);
          if (r.outcome == Outcome::kInconclusive) {
            ++open;
            d_open += r.test_distance;
          } else if ((r.outcome == Outcome::kA &&
                      r.test_winner == PreferenceLabel::kA) ||
                     (r.outcome == Outcome::kB &&
                      r.test_winner == PreferenceLabel::kB)) {
            ++ok;
            d_ok += r.test_distance;
          } else {
            ++bad;
            d_bad += r.test_distance;
          }
        }
      }
      const double n = static_cast<double>(cell.runs);
      if (cell.runs > 0) {
        cell.mean_annotations = static_cast<double>(annotations) / n;
        cell.success = static_cast<double>(ok) / n;
        cell.error = static_cast<double>(bad) / n;
        cell.inconclusive = static_cast<double>(open) / n;
      }
      cell.distance_success = ok ? d_ok / static_cast<double>(ok) : kNaN;
      cell.distance_error = bad ? d_bad / static_cast<double>(bad) : kNaN;
      cell.distance_inconclusive = open ? d_open / static_cast<double>(open) : kNaN;
      cell.error_rate_concluded =
          ok + bad ? static_cast<double>(bad) / static_cast<double>(ok + bad) : 0.0;
      cells.push_back(cell);
    }
  }
  return cells;
}

void aggregate_norms(const ExperimentConfig& config, const ExperimentData& data,
                     std::size_t jobs, ExperimentResult& result) {
  const auto& nc = *config.norms;
  std::vector<PairNormTables> tables(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t p) {
    tables[p] = norm_analyses(data[p], nc.k, nc.bins);
  });
  std::vector<std::size_t> wins(nc.bins, 0);
  std::vector<double> norm_sum(nc.bins, 0.0);
  for (const auto& t : tables) {
    result.cluster_norms.insert(result.cluster_norms.end(), t.clusters.begin(),
                                t.clusters.end());
    result.pair_norms.push_back(t.summary);
    for (std::size_t b = 0; b < nc.bins; ++b) {
      wins[b] += t.bin_success[b] ? 1 : 0;
      norm_sum[b] += t.bin_mean_norm[b];
    }
  }
  const double n = static_cast<double>(tables.size());
  for (std::size_t b = 0; b < nc.bins; ++b) {
    NormBinRow row{b, tables.size()};
    row.success_rate = static_cast<double>(wins[b]) / n;
    row.std_error = std::sqrt(row.success_rate * (1.0 - row.success_rate) / n);
    row.mean_norm = norm_sum[b] / n;
    result.norm_bins.push_back(row);
  }
}

std::vector<SelectionStrategy> strategies_from_json(const json& j) {
  std::vector<SelectionStrategy> out;
  for (const auto& s : j) out.push_back(parse_strategy(s.get<std::string>()));
  return out;
}

json strategies_to_json(const std::vector<SelectionStrategy>& v) {
  json out = json::array();
  for (auto s : v) out.push_back(to_string(s));
  return out;
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::string>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header << '\n';
  for (const auto& r : rows) out << r << '\n';
}

template <typename... Ts>
std::string row(const Ts&... cells) {
  std::ostringstream s;
  bool first = true;
  auto put = [&](const auto& c) {
    if (!first) s << ',';
    first = false;
    using C = std::decay_t<decltype(c)>;
    if constexpr (std::is_floating_point_v<C>) {
      s << fmt(c);
    } else {
      s << c;
    }
  };
  (put(cells), ...);
  return s.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (strategies.empty()) throw std::invalid_argument("no strategies configured");
  if (budgets.empty()) throw std::invalid_argument("no budgets configured");
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    if (budgets[i] == 0 || (i > 0 && budgets[i] <= budgets[i - 1])) {
      throw std::invalid_argument("budgets must be positive and ascending");
    }
  }
  if (seeds.empty()) throw std::invalid_argument("no seeds configured");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw std::invalid_argument("seeds must be unique");
  }
  if (!(subset_fraction > 0.0 && subset_fraction <= 1.0)) {
    throw std::invalid_argument("subset_fraction must lie in (0, 1]");
  }
  if (iterative) {
    for (double p : iterative->thresholds) {
      if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("iterative thresholds must lie in (0, 1)");
      }
    }
  }
  if (norms && (norms->bins == 0 || norms->histogram_bins == 0 || norms->k == 0)) {
    throw std::invalid_argument("norm analysis needs positive k and bin counts");
  }
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("strategies")) c.strategies = strategies_from_json(j["strategies"]);
    if (j.contains("budgets")) c.budgets = j["budgets"].get<std::vector<std::size_t>>();
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    c.subset_fraction = j.value("subset_fraction", c.subset_fraction);
    c.metric = j.value("metric", c.metric);
    if (j.contains("pairs")) {
      for (const auto& p : j["pairs"]) {
        c.pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
      }
    }
    c.pair_mode = parse_pair_mode(j.value("pair_mode", std::string("subtract")));
    c.clustering.method =
        parse_cluster_method(j.value("clustering", std::string("ward-euclidean")));
    c.clustering.representative.strategy =
        parse_representative(j.value("representative", std::string("cosine-center")));
    c.full_budget = j.value("full_budget", false);
    if (j.contains("iterative") && !j["iterative"].is_null()) {
      const auto& it = j["iterative"];
      IterativeExperimentConfig ic;
      if (it.contains("thresholds")) {
        ic.thresholds = it["thresholds"].get<std::vector<double>>();
      }
      ic.n_min = it.value("n_min", ic.n_min);
      ic.b_max = it.value("b_max", ic.b_max);
      if (it.contains("strategies")) ic.strategies = strategies_from_json(it["strategies"]);
      c.iterative = ic;
    }
    if (j.contains("norm_analysis") && !j["norm_analysis"].is_null()) {
      const auto& na = j["norm_analysis"];
      NormAnalysisConfig nc;
      nc.k = na.value("k", nc.k);
      nc.bins = na.value("bins", nc.bins);
      nc.histogram_budget = na.value("histogram_budget", nc.histogram_budget);
      nc.histogram_bins = na.value("histogram_bins", nc.histogram_bins);
      c.norms = nc;
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json pairs = json::array();
  for (const auto& [a, b] : c.pairs) pairs.push_back({a, b});
  json j = {{"strategies", strategies_to_json(c.strategies)},
            {"budgets", c.budgets},
            {"seeds", c.seeds},
            {"subset_fraction", c.subset_fraction},
            {"metric", c.metric},
            {"pairs", pairs},
            {"pair_mode", to_string(c.pair_mode)},
            {"clustering", to_string(c.clustering.method)},
            {"representative", to_string(c.clustering.representative.strategy)},
            {"full_budget", c.full_budget}};
  if (c.iterative) {
    j["iterative"] = {{"thresholds", c.iterative->thresholds},
                      {"n_min", c.iterative->n_min},
                      {"b_max", c.iterative->b_max},
                      {"strategies", strategies_to_json(c.iterative->strategies)}};
  }
  if (c.norms) {
    j["norm_analysis"] = {{"k", c.norms->k},
                          {"bins", c.norms->bins},
                          {"histogram_budget", c.norms->histogram_budget},
                          {"histogram_bins", c.norms->histogram_bins}};
  }
  return j;
}

ExperimentData load_experiment_data(const ExperimentConfig& config,
                                    const fs::path& data_dir) {
  auto pairs = config.pairs;
  if (pairs.empty()) {
    std::ifstream in(data_dir / "pairs.json");
    if (!in) throw DataError("no pairs configured and no pairs.json in data dir");
    try {
      for (const auto& p : json::parse(in)) {
        pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
      }
    } catch (const json::exception& e) {
      throw DataError(std::string("malformed pairs.json: ") + e.what());
    }
  }
  const ScoreTable scores = load_scores_file(data_dir / "scores.jsonl");

  std::map<std::string, std::shared_ptr<const EmbeddingMatrix>> cache;
  auto model_embeddings = [&](const std::string& model) {
    auto it = cache.find(model);
    if (it != cache.end()) return it->second;
    for (const char* ext : {".bin", ".jsonl"}) {
      fs::path path = data_dir / "embeddings" / (model + ext);
      if (fs::exists(path)) {
        auto m = std::make_shared<const EmbeddingMatrix>(load_embeddings_file(path));
        cache.emplace(model, m);
        return m;
      }
    }
    throw DataError("missing embeddings for model '" + model + "'");
  };

  std::optional<EmbeddingMatrix> inputs;
  for (const char* name : {"inputs.bin", "inputs.jsonl"}) {
    if (fs::exists(data_dir / name)) {
      inputs = load_embeddings_file(data_dir / name);
      break;
    }
  }

  ExperimentData data;
  for (const auto& [a, b] : pairs) {
    PairData pd;
    pd.name = a + "|" + b;
    pd.model_a = a;
    pd.model_b = b;
    pd.space = pair_space(*model_embeddings(a), *model_embeddings(b), config.pair_mode);
    for (const auto& id : pd.space.ids()) {
      pd.labels.push_back(simulated_preference(scores, id, a, b, config.metric));
    }
    if (inputs) {
      std::vector<std::size_t> rows;
      for (const auto& id : pd.space.ids()) {
        auto pos = inputs->position(id);
        if (!pos) throw DataError("input embeddings lack id '" + id + "'");
        rows.push_back(*pos);
      }
      pd.inputs = identity_space(*inputs).subset(rows);
    }
    data.push_back(std::move(pd));
  }
  return data;
}

ExperimentData experiment_data_from_corpus(const SyntheticCorpus& corpus,
                                           PairMode mode) {
  ExperimentData data;
  for (const auto& pair : corpus.pairs) {
    PairData pd;
    pd.name = pair.model_a + "|" + pair.model_b;
    pd.model_a = pair.model_a;
    pd.model_b = pair.model_b;
    pd.space = pair_space(pair.embeddings_a, pair.embeddings_b, mode);
    pd.labels = pair.labels;
    pd.inputs = identity_space(corpus.inputs);
    data.push_back(std::move(pd));
  }
  return data;
}

ExperimentResult run_success_rate(const ExperimentConfig& config,
                                  const ExperimentData& data, std::size_t jobs) {
  ExperimentResult result;
  auto outputs = run_jobs(config, data, jobs, true, false);
  aggregate_selection(config, data, outputs, result);
  return result;
}

std::vector<DeviationCell> deviation_analysis(const ExperimentConfig& config,
                                              const ExperimentData& data,
                                              std::size_t jobs) {
  return run_success_rate(config, data, jobs).deviation;
}

PairNormTables norm_analyses(const PairData& pair, std::size_t k,
                             std::size_t bins) {
  const DifferenceSpace& space = pair.space;
  const std::size_t n = space.size();
  if (k < 1 || k > n) throw std::invalid_argument("norm analysis: k out of range");
  if (bins < 1 || bins > n) throw std::invalid_argument("norm analysis: bad bin count");
  PairNormTables t;

  const auto assignment = cut(build_dendrogram(space), k);
  std::size_t largest = 0;
  for (std::size_t c = 0; c < assignment.k; ++c) {
    const auto& members = assignment.members[c];
    double sum = 0.0;
    for (std::size_t p : members) sum += space.norm(p);
    ClusterNormRow r{pair.name, c, members.size(),
                     static_cast<double>(members.size()) / static_cast<double>(n),
                     sum / static_cast<double>(members.size())};
    if (members.size() > assignment.members[largest].size()) largest = c;
    t.clusters.push_back(r);
  }
  t.summary.pair = pair.name;
  t.summary.median_norm = median(space.norms());
  t.summary.largest_fraction = t.clusters[largest].fraction;
  t.summary.largest_mean_norm = t.clusters[largest].mean_norm;

  const WinStats truth = winning_stats(pair.labels);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return space.norm(a) < space.norm(b);
  });
  // Equal-count bins; the first n % bins bins hold one extra example.
  std::size_t start = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t len = n / bins + (b < n % bins ? 1 : 0);
    LabelCounts counts;
    double sum = 0.0;
    for (std::size_t i = start; i < start + len; ++i) {
      counts.add(pair.labels[order[i]]);
      sum += space.norm(order[i]);
    }
    t.bin_success.push_back(winning_stats(counts).winner == truth.winner);
    t.bin_mean_norm.push_back(sum / static_cast<double>(len));
    start += len;
  }
  return t;
}

std::vector<IterativeCell> run_iterative_experiment(const ExperimentConfig& config,
                                                    const ExperimentData& data,
                                                    std::size_t jobs) {
  if (!config.iterative) throw std::invalid_argument("no iterative config");
  auto outputs = run_jobs(config, data, jobs, false, true);
  return aggregate_iteration(config, outputs);
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const ExperimentData& data, std::size_t jobs) {
  ExperimentResult result;
  const bool iteration = config.iterative.has_value();
  auto outputs = run_jobs(config, data, jobs, true, iteration);
  aggregate_selection(config, data, outputs, result);
  if (iteration) result.iterative = aggregate_iteration(config, outputs);
  if (config.norms) aggregate_norms(config, data, jobs, result);
  return result;
}

std::vector<fs::path> write_results(const ExperimentResult& result,
                                    const ExperimentConfig& config,
                                    const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<fs::path> files;
  auto emit = [&](const char* name, const std::string& header,
                  const std::vector<std::string>& rows) {
    write_csv(out_dir / name, header, rows);
    files.push_back(out_dir / name);
  };

  std::vector<std::string> rows;
  for (const auto& c : result.success) {
    rows.push_back(row(to_string(c.strategy), c.budget, c.runs, c.successes,
                       c.rate, c.std_error));
  }
  emit("success_rate.csv", "strategy,budget,runs,successes,success_rate,std_error",
       rows);

  rows.clear();
  for (const auto& c : result.deviation) {
    rows.push_back(row(to_string(c.strategy), c.budget, c.runs, c.mean, c.std_error));
  }
  emit("deviation.csv", "strategy,budget,runs,mean_deviation,std_error", rows);

  if (!result.iterative.empty()) {
    rows.clear();
    for (const auto& c : result.iterative) {
      rows.push_back(row(to_string(c.strategy), c.p, c.runs, c.mean_annotations,
                         c.max_annotations, c.success, c.error, c.inconclusive,
                         c.error_rate_concluded, c.distance_success,
                         c.distance_error, c.distance_inconclusive));
    }
    emit("iterative.csv",
         "strategy,p,runs,mean_annotations,max_annotations,success,error,"
         "inconclusive,error_rate_concluded,distance_success,distance_error,"
         "distance_inconclusive",
         rows);
  }

  if (config.norms) {
    rows.clear();
    for (const auto& c : result.cluster_norms) {
      rows.push_back(row(c.pair, c.cluster, c.size, c.fraction, c.mean_norm));
    }
    emit("cluster_norms.csv", "pair,cluster,size,fraction,mean_norm", rows);

    rows.clear();
    for (const auto& s : result.pair_norms) {
      rows.push_back(row(s.pair, s.median_norm, s.largest_fraction,
                         s.largest_mean_norm));
    }
    emit("pair_norms.csv", "pair,median_norm,largest_fraction,largest_mean_norm",
         rows);

    rows.clear();
    for (const auto& b : result.norm_bins) {
      rows.push_back(row(b.bin, b.pairs, b.success_rate, b.std_error, b.mean_norm));
    }
    emit("norm_bins.csv", "bin,pairs,success_rate,std_error,mean_norm", rows);

    rows.clear();
    for (const auto& h : result.histogram) {
      rows.push_back(row(to_string(h.strategy), h.bin, h.lo, h.hi, h.count));
    }
    emit("norm_histogram.csv", "strategy,bin,lo,hi,count", rows);

    rows.clear();
    for (const auto& s : result.selected_norms) {
      rows.push_back(row(to_string(s.strategy), s.count, s.median, s.mean));
    }
    emit("selected_norms.csv", "strategy,count,median,mean", rows);
  }

  json manifest = {{"config", to_json(config)}, {"files", json::array()}};
  for (const auto& f : files) manifest["files"].push_back(f.filename().string());
  std::ofstream(out_dir / "manifest.json", std::ios::trunc) << manifest.dump(2) << '\n';
  files.push_back(out_dir / "manifest.json");
  return files;
}

}  // namespace diffuse
