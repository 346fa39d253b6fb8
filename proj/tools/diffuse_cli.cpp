// diffuse: example selection, iterative comparison, simulation and the
// annotation service from the command line.
//
// Exit codes: 0 success or winner found, 2 usage error, 3 inconclusive,
// 4 data error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "diffuse/embed_client.hpp"
#include "diffuse/error.hpp"
#include "diffuse/harness.hpp"
#include "diffuse/iterative.hpp"
#include "diffuse/oracle.hpp"
#include "diffuse/selection.hpp"
#include "diffuse/service.hpp"
#include "diffuse/synthetic.hpp"
#include "diffuse/vectors.hpp"

namespace fs = std::filesystem;
using namespace diffuse;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitInconclusive = 3;
constexpr int kExitData = 4;

struct PairArgs {
  std::string embeddings_a;
  std::string embeddings_b;
  std::string mode = "subtract";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--embeddings-a", embeddings_a, "Model A embeddings (.jsonl or .bin)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--embeddings-b", embeddings_b, "Model B embeddings (.jsonl or .bin)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--mode", mode, "subtract, concat or add")->capture_default_str();
  }

  DifferenceSpace load() const {
    auto space = pair_space(load_embeddings_file(embeddings_a),
                            load_embeddings_file(embeddings_b), parse_pair_mode(mode));
    if (space.dropped() > 0) {
      std::cerr << "note: " << space.dropped()
                << " example(s) present in only one embedding file were dropped\n";
    }
    return space;
  }
};

void write_output(const std::string& path, const nlohmann::json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DiffUse annotation-budget engine"};
  app.require_subcommand(1);

  // select
  auto* select = app.add_subcommand("select", "Pick a budget of examples to annotate");
  PairArgs select_pair;
  select_pair.add_to(select);
  std::string strategy = "diffuse", clustering = "ward-euclidean",
              representative_name = "cosine-center", inputs_path, select_out;
  std::size_t budget = 0;
  std::uint64_t select_seed = 0;
  select->add_option("--strategy", strategy, "diffuse, random, max-norm or input-cluster")
      ->capture_default_str();
  select->add_option("--budget", budget, "Number of examples")->required();
  select->add_option("--seed", select_seed)->capture_default_str();
  select->add_option("--clustering", clustering, "ward-euclidean, average-cosine or kmeans")
      ->capture_default_str();
  select->add_option("--representative", representative_name,
                     "cosine-center, euclidean-center, max-norm or random")
      ->capture_default_str();
  select->add_option("--inputs", inputs_path, "Input embeddings for input-cluster")
      ->check(CLI::ExistingFile);
  select->add_option("--out", select_out, "Plan JSON path (stdout if omitted)");

  // compare
  auto* compare = app.add_subcommand("compare", "Iterative comparison with a score oracle");
  PairArgs compare_pair;
  compare_pair.add_to(compare);
  std::string scores_path, metric = kSyntheticMetric, model_a, model_b, events_out;
  SessionConfig session;
  compare->add_option("--scores", scores_path, "Score table (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  compare->add_option("--metric", metric)->capture_default_str();
  compare->add_option("--risk", session.p, "Risk threshold p")->capture_default_str();
  compare->add_option("--min", session.n_min, "Annotations before the first check")
      ->capture_default_str();
  compare->add_option("--max", session.b_max, "Annotation budget")->capture_default_str();
  compare->add_option("--seed", session.seed)->capture_default_str();
  compare->add_option("--model-a", model_a, "Model A id in the score table (default: file stem)");
  compare->add_option("--model-b", model_b, "Model B id in the score table (default: file stem)");
  compare->add_option("--events", events_out, "Write the session event log (JSONL)");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run selection experiments over a data directory");
  std::string config_path, data_dir, out_dir;
  std::size_t jobs = 1;
  simulate->add_option("--config", config_path, "Experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  simulate->add_option("--data-dir", data_dir)->required()->check(CLI::ExistingDirectory);
  simulate->add_option("--out-dir", out_dir)->required();
  simulate->add_option("--jobs", jobs, "Parallel (pair, seed) jobs")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  // serve
  auto* serve = app.add_subcommand("serve", "Annotation session service");
  int port = 8080;
  std::string host = "127.0.0.1", store_dir = "sessions";
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--store-dir", store_dir)->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic data directory");
  SyntheticOptions synth_opts;
  std::string synth_out;
  synth->add_option("--out-dir", synth_out)->required();
  synth->add_option("--pairs", synth_opts.pairs)->capture_default_str();
  synth->add_option("--examples", synth_opts.examples)->capture_default_str();
  synth->add_option("--dim", synth_opts.dim)->capture_default_str();
  synth->add_option("--noise", synth_opts.noise)->capture_default_str();
  synth->add_option("--seed", synth_opts.seed)->capture_default_str();
  synth->add_flag("--unanimous", synth_opts.unanimous, "Model A wins every example");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*select) {
      const DifferenceSpace space = select_pair.load();
      ClusterOptions options;
      options.method = parse_cluster_method(clustering);
      options.representative.strategy = parse_representative(representative_name);
      options.representative.seed = select_seed;
      options.seed = select_seed;
      SelectionPlan plan;
      switch (parse_strategy(strategy)) {
        case SelectionStrategy::kDiffuse:
          plan = select_diffuse(space, budget, options);
          break;
        case SelectionStrategy::kRandom:
          plan = select_random(space.ids(), budget, select_seed);
          break;
        case SelectionStrategy::kMaxNorm:
          plan = select_max_norm(space, budget);
          break;
        case SelectionStrategy::kInputCluster: {
          if (inputs_path.empty()) throw std::invalid_argument("input-cluster needs --inputs");
          const EmbeddingMatrix inputs = load_embeddings_file(inputs_path);
          std::vector<std::size_t> rows;
          for (const auto& id : space.ids()) {
            auto pos = inputs.position(id);
            if (!pos) throw DataError("input embeddings lack id '" + id + "'");
            rows.push_back(*pos);
          }
          plan = select_diffuse(identity_space(inputs).subset(rows), budget, options);
          plan.strategy = SelectionStrategy::kInputCluster;
          break;
        }
      }
      write_output(select_out, to_json(plan));
      return 0;
    }

    if (*compare) {
      if (model_a.empty()) model_a = fs::path(compare_pair.embeddings_a).stem().string();
      if (model_b.empty()) model_b = fs::path(compare_pair.embeddings_b).stem().string();
      auto space = std::make_shared<const DifferenceSpace>(compare_pair.load());
      if (session.b_max > space->size()) {
        std::cerr << "note: --max capped at the pool size " << space->size() << '\n';
        session.b_max = space->size();
      }
      const ScoreTable scores = load_scores_file(scores_path);
      auto result = run_iterative(space, session, score_oracle(scores, model_a, model_b, metric));
      const SessionState& s = result.session.state();
      std::cout << "outcome: "
                << (result.outcome == Outcome::kA   ? model_a + " wins"
                    : result.outcome == Outcome::kB ? model_b + " wins"
                                                    : std::string("inconclusive"))
                << '\n'
                << "annotations: " << result.annotated_count << '\n'
                << "risk: " << s.current_risk << '\n'
                << "votes: " << s.decision_counts.a << " A, " << s.decision_counts.b
                << " B, " << s.decision_counts.tie << " tie\n";
      if (!events_out.empty()) {
        std::ofstream out(events_out, std::ios::trunc);
        for (const auto& e : result.session.events()) out << to_json(e).dump() << '\n';
      }
      return result.outcome == Outcome::kInconclusive ? kExitInconclusive : 0;
    }

    if (*simulate) {
      std::ifstream in(config_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
      }
      const ExperimentConfig config = experiment_config_from_json(j);
      const ExperimentData data = load_experiment_data(config, data_dir);
      const ExperimentResult result = run_experiment(config, data, jobs);
      for (const auto& f : write_results(result, config, out_dir)) {
        std::cout << f.string() << '\n';
      }
      return 0;
    }

    if (*serve) {
      ServiceOptions options;
      options.store_dir = store_dir;
      if (auto endpoint = default_embed_endpoint()) {
        EmbedClientOptions embed;
        embed.endpoint = *endpoint;
        options.embed = embed;
      }
      return run_service(options, host, port);
    }

    if (*synth) {
      write_corpus(generate_synthetic_corpus(synth_opts), synth_out);
      std::cout << synth_out << '\n';
      return 0;
    }
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
