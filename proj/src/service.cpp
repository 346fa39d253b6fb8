#include "diffuse/service.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <httplib.h>

#include "diffuse/error.hpp"
#include "diffuse/random.hpp"

namespace diffuse {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct HttpError {
  int status;
  std::string message;
};

ServiceResponse error_response(int status, const std::string& message) {
  return {status, {{"error", message}}};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t random_u64() {
  static std::mutex m;
  static std::random_device rd;
  std::lock_guard lock(m);
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      now.time_since_epoch()) %
                  1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms.count()));
  return out;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed " + path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump() << '\n';
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

json space_to_json(const DifferenceSpace& s) {
  return {{"ids", s.ids()},
          {"mode", to_string(s.mode())},
          {"dim", s.dim()},
          {"values", s.values()}};
}

DifferenceSpace space_from_json(const json& j) {
  return DifferenceSpace(j.at("ids").get<std::vector<std::string>>(),
                         parse_pair_mode(j.at("mode").get<std::string>()),
                         j.at("dim").get<std::size_t>(),
                         j.at("values").get<std::vector<double>>());
}

// Embedding rows in a request: an array of {"id", "vector"} records or a
// path to an embedding file readable by the server.
EmbeddingMatrix embeddings_from_request(const json& j, const char* field) {
  if (j.is_string()) return load_embeddings_file(j.get<std::string>());
  if (!j.is_array()) {
    throw HttpError{400, std::string(field) + " must be an array or a path"};
  }
  std::stringstream lines;
  for (const auto& rec : j) lines << rec.dump() << '\n';
  return load_embeddings(lines, EmbeddingFormat::kJsonl);
}

std::vector<OutputRecord> outputs_from_request(const json& j, const char* field) {
  if (!j.is_array()) throw HttpError{400, std::string(field) + " must be an array"};
  std::vector<OutputRecord> out;
  for (const auto& rec : j) {
    if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string() ||
        !rec.contains("output") || !rec["output"].is_string()) {
      throw HttpError{400, std::string(field) + " records need string id and output"};
    }
    out.push_back({rec["id"].get<std::string>(), rec.value("input", std::string()),
                   rec["output"].get<std::string>()});
  }
  return out;
}

PreferenceLabel parse_choice(const std::string& choice, bool swapped) {
  if (choice == "tie") return PreferenceLabel::kTie;
  if (choice == "left") return swapped ? PreferenceLabel::kB : PreferenceLabel::kA;
  if (choice == "right") return swapped ? PreferenceLabel::kA : PreferenceLabel::kB;
  throw HttpError{400, "choice must be left, right or tie"};
}

std::optional<std::pair<std::string, std::string>> winner_of(
    const SessionState& s, const std::string& model_a, const std::string& model_b) {
  if (s.status == SessionStatus::kConcludedA) return std::pair{std::string("A"), model_a};
  if (s.status == SessionStatus::kConcludedB) return std::pair{std::string("B"), model_b};
  return std::nullopt;
}

}  // namespace

struct SessionService::Entry {
  struct Display {
    std::string input;
    std::string output_a;
    std::string output_b;
  };

  std::string id;
  fs::path dir;
  std::mutex mutex;
  std::uint64_t secret = 0;
  std::string model_a;
  std::string model_b;
  std::map<std::string, Display> outputs;
  std::optional<Session> session;
  std::size_t persisted = 0;

  std::string token(const std::string& example) const {
    return hex64(derive_seed(secret, example, session->state().batch));
  }

  // Ids issued in the current batch, labeled or not.
  std::set<std::string> batch_ids() const {
    const auto& events = session->events();
    for (auto it = events.rbegin(); it != events.rend(); ++it) {
      if (it->kind == EventKind::kBatchIssued) {
        auto ids = it->payload.at("ids").get<std::vector<std::string>>();
        return {ids.begin(), ids.end()};
      }
    }
    return {};
  }
};

bool swapped_sides(std::uint64_t secret, const std::string& example_id) {
  return derive_seed(secret, example_id, 0x5eed) & 1U;
}

SessionService::SessionService(ServiceOptions options)
    : options_(std::move(options)) {
  fs::create_directories(options_.store_dir);
  restore();
}

std::size_t SessionService::session_count() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

std::shared_ptr<SessionService::Entry> SessionService::find(
    const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

void SessionService::persist(Entry& e) {
  const auto& events = e.session->events();
  if (e.persisted == events.size()) return;
  std::string chunk;
  const std::string stamp = utc_now();
  for (std::size_t i = e.persisted; i < events.size(); ++i) {
    SessionEvent ev = events[i];
    ev.timestamp = stamp;
    chunk += to_json(ev).dump();
    chunk += '\n';
  }
  std::ofstream out(e.dir / "events.jsonl", std::ios::app | std::ios::binary);
  out.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
  out.flush();
  if (!out) throw std::runtime_error("cannot append to " + (e.dir / "events.jsonl").string());
  e.persisted = events.size();
}

void SessionService::restore() {
  for (const auto& dirent : fs::directory_iterator(options_.store_dir)) {
    if (!dirent.is_directory() || !fs::exists(dirent.path() / "meta.json")) continue;
    const fs::path dir = dirent.path();
    try {
      auto e = std::make_shared<Entry>();
      e->id = dir.filename().string();
      e->dir = dir;
      const json meta = read_json_file(dir / "meta.json");
      e->secret = std::stoull(meta.at("secret").get<std::string>(), nullptr, 16);
      e->model_a = meta.value("model_a", std::string("A"));
      e->model_b = meta.value("model_b", std::string("B"));
      if (fs::exists(dir / "outputs.json")) {
        const json outputs = read_json_file(dir / "outputs.json");
        for (const auto& [id, d] : outputs.items()) {
          e->outputs[id] = {d.at("input").get<std::string>(),
                            d.at("output_a").get<std::string>(),
                            d.at("output_b").get<std::string>()};
        }
      }
      auto space =
          std::make_shared<const DifferenceSpace>(space_from_json(read_json_file(dir / "space.json")));

      // A torn final line (crash mid-append) is dropped; anything else that
      // fails to parse makes the session unrecoverable.
      std::ifstream in(dir / "events.jsonl", std::ios::binary);
      std::string content((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
      std::vector<SessionEvent> events;
      std::size_t kept = 0;
      for (std::size_t nl; (nl = content.find('\n', kept)) != std::string::npos;
           kept = nl + 1) {
        try {
          events.push_back(session_event_from_json(json::parse(
              content.begin() + static_cast<std::ptrdiff_t>(kept),
              content.begin() + static_cast<std::ptrdiff_t>(nl))));
        } catch (const std::exception& ex) {
          throw DataError(std::string("corrupt event log: ") + ex.what());
        }
      }
      if (kept != content.size()) fs::resize_file(dir / "events.jsonl", kept);
      if (events.empty()) throw DataError("empty event log for " + e->id);

      e->session = replay_session(space, events);
      e->persisted = events.size();
      persist(*e);
      std::unique_lock lock(mutex_);
      sessions_[e->id] = e;
    } catch (const std::exception& ex) {
      std::cerr << "skipping session " << dir.filename().string() << ": "
                << ex.what() << '\n';
    }
  }
}

ServiceResponse SessionService::create(const json& request) {
  try {
    if (!request.is_object()) throw HttpError{400, "request must be a JSON object"};
    SessionConfig config;
    try {
      config = session_config_from_json(request.value("config", json::object()));
    } catch (const json::exception& e) {
      throw HttpError{400, std::string("bad config: ") + e.what()};
    }
    const PairMode mode =
        parse_pair_mode(request.value("pair_mode", std::string("subtract")));

    std::vector<OutputRecord> out_a, out_b;
    if (request.contains("outputs_a")) out_a = outputs_from_request(request["outputs_a"], "outputs_a");
    if (request.contains("outputs_b")) out_b = outputs_from_request(request["outputs_b"], "outputs_b");

    auto side = [&](const char* field, const std::vector<OutputRecord>& outs) {
      if (request.contains(field)) return embeddings_from_request(request[field], field);
      if (outs.empty()) {
        throw HttpError{400, std::string("need ") + field + " or outputs to embed"};
      }
      if (!options_.embed) throw HttpError{400, "no embedding endpoint configured"};
      std::vector<std::pair<std::string, std::string>> texts;
      for (const auto& o : outs) texts.emplace_back(o.id, o.output);
      try {
        return embed_texts(*options_.embed, texts);
      } catch (const EmbedError& e) {
        throw HttpError{502, std::string("embedding service failed: ") + e.what()};
      }
    };
    const EmbeddingMatrix a = side("embeddings_a", out_a);
    const EmbeddingMatrix b = side("embeddings_b", out_b);

    std::size_t common = 0;
    for (const auto& id : a.ids()) common += b.position(id) ? 1 : 0;
    if (common < std::max<std::size_t>(2, config.n_min)) {
      throw HttpError{422, "pool of " + std::to_string(common) +
                               " examples is smaller than n_min " +
                               std::to_string(config.n_min)};
    }
    auto space = std::make_shared<const DifferenceSpace>(pair_space(a, b, mode));
    config.b_max = std::min(config.b_max, space->size());
    try {
      config.validate(space->size());
    } catch (const std::invalid_argument& e) {
      throw HttpError{400, e.what()};
    }

    auto e = std::make_shared<Entry>();
    e->secret = random_u64();
    e->model_a = request.value("model_a", std::string("A"));
    e->model_b = request.value("model_b", std::string("B"));
    std::map<std::string, const OutputRecord*> by_id_b;
    for (const auto& o : out_b) by_id_b[o.id] = &o;
    for (const auto& o : out_a) {
      auto it = by_id_b.find(o.id);
      if (it == by_id_b.end() || !space->position(o.id)) continue;
      e->outputs[o.id] = {o.input, o.output, it->second->output};
    }
    e->session = start_session(space, config);

    {
      std::unique_lock lock(mutex_);
      do {
        e->id = hex64(random_u64());
      } while (sessions_.count(e->id) || fs::exists(options_.store_dir / e->id));
      e->dir = options_.store_dir / e->id;
      fs::create_directories(e->dir);
      sessions_[e->id] = e;
    }
    std::lock_guard entry_lock(e->mutex);
    json outputs = json::object();
    for (const auto& [id, d] : e->outputs) {
      outputs[id] = {{"input", d.input}, {"output_a", d.output_a}, {"output_b", d.output_b}};
    }
    write_json_file(e->dir / "space.json", space_to_json(*space));
    write_json_file(e->dir / "outputs.json", outputs);
    write_json_file(e->dir / "meta.json", {{"secret", hex64(e->secret)},
                                           {"model_a", e->model_a},
                                           {"model_b", e->model_b}});
    persist(*e);
    return {201, {{"session_id", e->id}}};
  } catch (const HttpError& e) {
    return error_response(e.status, e.message);
  } catch (const DataError& e) {
    return error_response(400, e.what());
  } catch (const std::invalid_argument& e) {
    return error_response(400, e.what());
  } catch (const json::exception& e) {
    return error_response(400, e.what());
  }
}

ServiceResponse SessionService::next(const std::string& id) {
  auto e = find(id);
  if (!e) return error_response(404, "unknown session");
  std::lock_guard lock(e->mutex);
  const SessionState& s = e->session->state();
  json items = json::array();
  for (const auto& ex : s.pending) {
    const bool swapped = swapped_sides(e->secret, ex);
    json item = {{"example_id", ex}, {"side_map_token", e->token(ex)}};
    auto it = e->outputs.find(ex);
    if (it != e->outputs.end()) {
      item["input"] = it->second.input;
      item["output_left"] = swapped ? it->second.output_b : it->second.output_a;
      item["output_right"] = swapped ? it->second.output_a : it->second.output_b;
    } else {
      item["input"] = nullptr;
      item["output_left"] = nullptr;
      item["output_right"] = nullptr;
    }
    items.push_back(item);
  }
  return {200, {{"session_id", id},
                {"status", to_string(s.status)},
                {"batch_seq", s.batch},
                {"items", items}}};
}

ServiceResponse SessionService::submit(const std::string& id, const json& request) {
  auto e = find(id);
  if (!e) return error_response(404, "unknown session");
  std::unique_lock lock(e->mutex, std::try_to_lock);
  if (!lock.owns_lock()) return error_response(409, "concurrent submission");
  try {
    const SessionState& s = e->session->state();
    if (!request.is_object() || !request.contains("batch_seq") ||
        !request["batch_seq"].is_number_integer() || !request.contains("labels") ||
        !request["labels"].is_array()) {
      throw HttpError{400, "need batch_seq and a labels array"};
    }
    if (e->session->finished()) throw HttpError{409, "session already finished"};
    if (request["batch_seq"].get<std::int64_t>() != static_cast<std::int64_t>(s.batch)) {
      throw HttpError{409, "stale batch_seq"};
    }
    const std::set<std::string> pending(s.pending.begin(), s.pending.end());
    const std::set<std::string> issued = e->batch_ids();
    std::vector<std::pair<std::string, PreferenceLabel>> labels;
    std::set<std::string> seen;
    for (const auto& item : request["labels"]) {
      if (!item.is_object()) throw HttpError{400, "label entries must be objects"};
      const std::string ex = item.value("example_id", item.value("id", std::string()));
      if (!pending.count(ex)) {
        if (issued.count(ex)) throw HttpError{409, "example already labeled: " + ex};
        throw HttpError{400, "unknown example: " + ex};
      }
      if (!seen.insert(ex).second) throw HttpError{400, "duplicate example: " + ex};
      if (item.contains("side_map_token") && item["side_map_token"] != e->token(ex)) {
        throw HttpError{400, "side_map_token does not match " + ex};
      }
      labels.emplace_back(ex, parse_choice(item.value("choice", std::string()),
                                           swapped_sides(e->secret, ex)));
    }
    for (const auto& [ex, label] : labels) e->session->record_label(ex, label);
    persist(*e);

    const SessionState& after = e->session->state();
    json body = {{"status", to_string(after.status)},
                 {"current_risk", after.current_risk},
                 {"counts",
                  {{"A", after.decision_counts.a},
                   {"B", after.decision_counts.b},
                   {"Tie", after.decision_counts.tie}}},
                 {"annotated_count", after.annotated_count},
                 {"batch_seq", after.batch}};
    if (auto w = winner_of(after, e->model_a, e->model_b)) {
      body["winner"] = w->first;
      body["winner_model"] = w->second;
    }
    return {200, body};
  } catch (const HttpError& err) {
    return error_response(err.status, err.message);
  } catch (const json::exception& err) {
    return error_response(400, err.what());
  }
}

ServiceResponse SessionService::status(const std::string& id) {
  auto e = find(id);
  if (!e) return error_response(404, "unknown session");
  std::lock_guard lock(e->mutex);
  const SessionState& s = e->session->state();
  // Model-space labels stay hidden until the verdict is in.
  json body = to_json(s, e->session->finished());
  body["session_id"] = id;
  body["models"] = {{"A", e->model_a}, {"B", e->model_b}};
  if (auto w = winner_of(s, e->model_a, e->model_b)) body["winner_model"] = w->second;
  return {200, body};
}

void SessionService::mount(httplib::Server& server) {
  auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto parse = [](const httplib::Request& req) {
    return json::parse(req.body, nullptr, false);
  };
  server.Get("/healthz", [reply](const httplib::Request&, httplib::Response& res) {
    reply(res, {200, {{"ok", true}}});
  });
  server.Post("/sessions", [this, reply, parse](const httplib::Request& req,
                                                httplib::Response& res) {
    json body = parse(req);
    reply(res, body.is_discarded() ? error_response(400, "malformed JSON")
                                   : create(body));
  });
  server.Get(R"(/sessions/([^/]+)/next)",
             [this, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, next(req.matches[1]));
             });
  server.Get(R"(/sessions/([^/]+)/status)",
             [this, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, status(req.matches[1]));
             });
  server.Post(R"(/sessions/([^/]+)/labels)",
              [this, reply, parse](const httplib::Request& req, httplib::Response& res) {
                json body = parse(req);
                reply(res, body.is_discarded() ? error_response(400, "malformed JSON")
                                               : submit(req.matches[1], body));
              });
}

int run_service(const ServiceOptions& options, const std::string& host, int port) {
  SessionService service(options);
  httplib::Server server;
  service.mount(server);
  std::cerr << "diffuse: serving " << service.session_count() << " session(s) on "
            << host << ':' << port << '\n';
  return server.listen(host, port) ? 0 : 1;
}

}  // namespace diffuse
