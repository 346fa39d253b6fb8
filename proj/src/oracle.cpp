#include "diffuse/oracle.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

namespace diffuse {

using nlohmann::json;

void ScoreTable::add(const std::string& id, const std::string& model,
                     const std::string& metric, double score) {
  if (!std::isfinite(score)) {
    throw DataError("non-finite score for id '" + id + "'");
  }
  if (!scores_.emplace(std::make_tuple(id, model, metric), score).second) {
    throw DataError("duplicate score for id '" + id + "', model '" + model +
                    "', metric '" + metric + "'");
  }
}

const double* ScoreTable::find(const std::string& id, const std::string& model,
                               const std::string& metric) const {
  auto it = scores_.find(std::make_tuple(id, model, metric));
  return it == scores_.end() ? nullptr : &it->second;
}

double ScoreTable::at(const std::string& id, const std::string& model,
                      const std::string& metric) const {
  const double* s = find(id, model, metric);
  if (!s) throw MissingScoreError(id, model, metric);
  return *s;
}

ScoreTable load_scores(std::istream& in) {
  ScoreTable table;
  std::string line;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++record;
    json obj;
    try {
      obj = json::parse(line);
      table.add(obj.at("id").get<std::string>(),
                obj.at("model").get<std::string>(),
                obj.at("metric").get<std::string>(),
                obj.at("score").get<double>());
    } catch (const DataError& e) {
      throw DataError(e.what(), record);
    } catch (const json::exception& e) {
      throw DataError(std::string("malformed score record: ") + e.what(),
                      record);
    }
  }
  return table;
}

ScoreTable load_scores_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scores file " + path.string());
  return load_scores(in);
}

void write_scores(std::ostream& out,
                  std::span<const std::tuple<std::string, std::string,
                                             std::string, double>> rows) {
  for (const auto& [id, model, metric, score] : rows) {
    out << json{{"id", id}, {"model", model}, {"metric", metric}, {"score", score}}
               .dump()
        << '\n';
  }
}

PreferenceLabel simulated_preference(const ScoreTable& t, const std::string& id,
                                     const std::string& model_a,
                                     const std::string& model_b,
                                     const std::string& metric) {
  const double a = t.at(id, model_a, metric);
  const double b = t.at(id, model_b, metric);
  if (a > b) return PreferenceLabel::kA;
  if (a < b) return PreferenceLabel::kB;
  return PreferenceLabel::kTie;
}

WinStats ground_truth(const ScoreTable& t, std::span<const std::string> pool,
                      const std::string& model_a, const std::string& model_b,
                      const std::string& metric) {
  LabelCounts counts;
  for (const auto& id : pool) {
    counts.add(simulated_preference(t, id, model_a, model_b, metric));
  }
  return winning_stats(counts);
}

Oracle score_oracle(const ScoreTable& t, std::string model_a,
                    std::string model_b, std::string metric) {
  return [&t, a = std::move(model_a), b = std::move(model_b),
          m = std::move(metric)](std::span<const std::string> ids) {
    std::vector<PreferenceLabel> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(simulated_preference(t, id, a, b, m));
    return out;
  };
}

std::vector<OutputRecord> load_outputs(std::istream& in) {
  std::vector<OutputRecord> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++record;
    try {
      json obj = json::parse(line);
      OutputRecord r{obj.at("id").get<std::string>(),
                     obj.value("input", std::string{}),
                     obj.at("output").get<std::string>()};
      if (!seen.insert(r.id).second) {
        throw DataError("duplicate id '" + r.id + "'", record);
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(std::string("malformed output record: ") + e.what(),
                      record);
    }
  }
  return out;
}

std::vector<OutputRecord> load_outputs_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open outputs file " + path.string());
  return load_outputs(in);
}

}  // namespace diffuse
