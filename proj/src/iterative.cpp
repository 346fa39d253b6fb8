#include "diffuse/iterative.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "diffuse/error.hpp"
#include "diffuse/random.hpp"

namespace diffuse {

using nlohmann::json;

void SessionConfig::validate(std::size_t pool_size) const {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("risk threshold p must lie in (0, 1)");
  }
  if (n_min < 1) throw std::invalid_argument("n_min must be at least 1");
  if (b_max < n_min) throw std::invalid_argument("b_max must be >= n_min");
  if (n_min > pool_size) {
    throw std::invalid_argument("pool of " + std::to_string(pool_size) +
                                " examples is smaller than n_min " +
                                std::to_string(n_min));
  }
}

json to_json(const SessionConfig& c) {
  return {{"p", c.p},
          {"n_min", c.n_min},
          {"b_max", c.b_max},
          {"representative", to_string(c.representative.strategy)},
          {"representative_seed", c.representative.seed},
          {"seed", c.seed}};
}

SessionConfig session_config_from_json(const json& j) {
  SessionConfig c;
  c.p = j.value("p", c.p);
  c.n_min = j.value("n_min", c.n_min);
  c.b_max = j.value("b_max", c.b_max);
  c.representative.strategy = parse_representative(
      j.value("representative", std::string(to_string(c.representative.strategy))));
  c.representative.seed = j.value("representative_seed", c.representative.seed);
  c.seed = j.value("seed", c.seed);
  return c;
}

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::kAwaitingLabels: return "awaiting-labels";
    case SessionStatus::kConcludedA: return "concluded-winner-A";
    case SessionStatus::kConcludedB: return "concluded-winner-B";
    case SessionStatus::kInconclusive: return "inconclusive";
  }
  return "awaiting-labels";
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::kA: return "A";
    case Outcome::kB: return "B";
    case Outcome::kInconclusive: return "inconclusive";
  }
  return "inconclusive";
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::kCreated: return "created";
    case EventKind::kBatchIssued: return "batch-issued";
    case EventKind::kLabelReceived: return "label-received";
    case EventKind::kSplit: return "split";
    case EventKind::kConcluded: return "concluded";
    case EventKind::kInconclusive: return "inconclusive";
  }
  return "created";
}

EventKind parse_event_kind(std::string_view name) {
  for (auto k : {EventKind::kCreated, EventKind::kBatchIssued,
                 EventKind::kLabelReceived, EventKind::kSplit,
                 EventKind::kConcluded, EventKind::kInconclusive}) {
    if (to_string(k) == name) return k;
  }
  throw DataError("unknown event kind '" + std::string(name) + "'");
}

json to_json(const SessionEvent& e) {
  json j = {{"seq", e.seq}, {"kind", to_string(e.kind)}, {"payload", e.payload}};
  if (!e.timestamp.empty()) j["timestamp"] = e.timestamp;
  return j;
}

SessionEvent session_event_from_json(const json& j) {
  try {
    SessionEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.kind = parse_event_kind(j.at("kind").get<std::string>());
    e.payload = j.at("payload");
    e.timestamp = j.value("timestamp", std::string{});
    return e;
  } catch (const json::exception& ex) {
    throw DataError(std::string("malformed session event: ") + ex.what());
  }
}

json to_json(const SessionState& s, bool reveal_annotations) {
  json j = {{"status", to_string(s.status)},
            {"k", s.k},
            {"pool_size", s.pool_size},
            {"annotated_count", s.annotated_count},
            {"current_risk", s.current_risk},
            {"batch", s.batch},
            {"pending", s.pending},
            {"counts",
             {{"A", s.decision_counts.a},
              {"B", s.decision_counts.b},
              {"Tie", s.decision_counts.tie}}},
            {"config", to_json(s.config)}};
  if (s.status == SessionStatus::kConcludedA) j["winner"] = "A";
  if (s.status == SessionStatus::kConcludedB) j["winner"] = "B";
  if (reveal_annotations) {
    json ann = json::array();
    for (const auto& [id, label] : s.annotations) {
      ann.push_back({{"id", id}, {"label", to_string(label)}});
    }
    j["annotations"] = ann;
    j["decision_set"] = s.decision_set;
  }
  return j;
}

Outcome Session::outcome() const {
  switch (state_.status) {
    case SessionStatus::kConcludedA: return Outcome::kA;
    case SessionStatus::kConcludedB: return Outcome::kB;
    default: return Outcome::kInconclusive;
  }
}

void Session::emit(EventKind kind, json payload) {
  SessionEvent e;
  e.seq = events_.size() + 1;
  e.kind = kind;
  e.payload = std::move(payload);
  events_.push_back(std::move(e));
}

std::size_t Session::pick_representative(std::size_t node) const {
  auto members = dendrogram_->members(node);
  return representative(*space_, members, state_.config.representative);
}

void Session::refresh_decision_set() {
  state_.decision_set.clear();
  state_.decision_counts = {};
  for (const auto& c : clusters_) {
    state_.decision_set.push_back(space_->ids()[c.rep]);
    auto it = label_of_.find(c.rep);
    if (it != label_of_.end()) state_.decision_counts.add(it->second);
  }
  const auto& counts = state_.decision_counts;
  // An all-tie vote carries no evidence either way.
  state_.current_risk = (counts.a == 0 && counts.b == 0)
                            ? 1.0
                            : risk(counts, state_.pool_size);
}

void Session::record_label(const std::string& id, PreferenceLabel label) {
  if (finished()) throw std::logic_error("session already finished");
  auto it = std::find(state_.pending.begin(), state_.pending.end(), id);
  if (it == state_.pending.end()) {
    throw std::invalid_argument("example '" + id + "' is not pending");
  }
  state_.pending.erase(it);
  const std::size_t pos = *space_->position(id);
  label_of_.emplace(pos, label);
  state_.annotations.emplace_back(id, label);
  state_.annotated_count = state_.annotations.size();
  emit(EventKind::kLabelReceived, {{"id", id}, {"label", to_string(label)}});
  refresh_decision_set();
  if (state_.pending.empty() && auto_advance_) settle();
}

void Session::submit_labels(const std::map<std::string, PreferenceLabel>& labels) {
  if (finished()) throw std::logic_error("session already finished");
  std::set<std::string> pending(state_.pending.begin(), state_.pending.end());
  for (const auto& [id, label] : labels) {
    if (!pending.count(id)) {
      throw std::invalid_argument("label for non-pending example '" + id + "'");
    }
  }
  for (const auto& id : state_.pending) {
    if (!labels.count(id)) {
      throw std::invalid_argument("missing label for pending example '" + id +
                                  "'");
    }
  }
  const auto order = state_.pending;
  for (const auto& id : order) record_label(id, labels.at(id));
}

void Session::settle() {
  while (!finished() && state_.pending.empty()) advance();
}

void Session::advance() {
  if (finished()) throw std::logic_error("session already finished");
  if (!state_.pending.empty()) {
    throw std::logic_error("advance called with pending labels");
  }
  const SessionConfig& cfg = state_.config;
  if (state_.current_risk <= cfg.p) {
    const WinStats stats = winning_stats(state_.decision_counts);
    state_.status = stats.winner == PreferenceLabel::kA
                        ? SessionStatus::kConcludedA
                        : SessionStatus::kConcludedB;
    emit(EventKind::kConcluded, {{"winner", to_string(stats.winner)},
                                 {"risk", state_.current_risk},
                                 {"annotated_count", state_.annotated_count}});
    return;
  }
  const bool budget_left = state_.annotated_count + 2 <= cfg.b_max;
  const bool can_split = state_.k < dendrogram_->n_leaves();
  if (!budget_left || !can_split) {
    state_.status = SessionStatus::kInconclusive;
    emit(EventKind::kInconclusive,
         {{"reason", budget_left ? "clusters-exhausted" : "budget"},
          {"risk", state_.current_risk},
          {"annotated_count", state_.annotated_count}});
    return;
  }

  const Split split = split_next(*dendrogram_, state_.k);
  auto parent = std::find_if(clusters_.begin(), clusters_.end(),
                             [&](const ActiveCluster& c) {
                               return c.node == split.parent_node;
                             });
  if (parent == clusters_.end()) {
    throw std::logic_error("split cluster is not active");
  }
  const std::size_t discarded = parent->rep;
  const std::size_t left_rep =
      representative(*space_, split.left, cfg.representative);
  const std::size_t right_rep =
      representative(*space_, split.right, cfg.representative);
  clusters_.erase(parent);
  for (ActiveCluster c : {ActiveCluster{split.left_node, left_rep},
                          ActiveCluster{split.right_node, right_rep}}) {
    auto at = std::find_if(clusters_.begin(), clusters_.end(),
                           [&](const ActiveCluster& x) {
                             return dendrogram_->min_leaf(x.node) >
                                    dendrogram_->min_leaf(c.node);
                           });
    clusters_.insert(at, c);
  }
  ++state_.k;

  json reused = json::array();
  for (std::size_t rep : {left_rep, right_rep}) {
    const std::string& id = space_->ids()[rep];
    if (label_of_.count(rep)) {
      reused.push_back(id);
    } else {
      state_.pending.push_back(id);
    }
  }
  emit(EventKind::kSplit,
       {{"k", state_.k},
        {"parent", split.parent_node},
        {"children", {split.left_node, split.right_node}},
        {"discarded", space_->ids()[discarded]},
        {"representatives",
         {space_->ids()[left_rep], space_->ids()[right_rep]}},
        {"reused", reused}});
  refresh_decision_set();
  if (!state_.pending.empty()) {
    ++state_.batch;
    emit(EventKind::kBatchIssued,
         {{"batch", state_.batch}, {"ids", state_.pending}});
  }
}

Session start_session(std::shared_ptr<const DifferenceSpace> space,
                      SessionConfig config,
                      std::shared_ptr<const Dendrogram> dendrogram) {
  if (!space) throw std::invalid_argument("start_session: no space");
  config.validate(space->size());
  if (space->size() < 2) {
    throw std::invalid_argument("start_session: pool needs at least 2 examples");
  }
  if (!dendrogram) {
    dendrogram = std::make_shared<const Dendrogram>(
        build_dendrogram(*space, Linkage::kWardEuclidean));
  } else if (dendrogram->n_leaves() != space->size()) {
    throw std::invalid_argument("start_session: dendrogram does not match pool");
  }

  Session s;
  s.space_ = std::move(space);
  s.dendrogram_ = std::move(dendrogram);
  s.state_.config = config;
  s.state_.pool_size = s.space_->size();
  s.state_.k = config.n_min;
  for (std::size_t node : cut_nodes(*s.dendrogram_, config.n_min)) {
    s.clusters_.push_back({node, s.pick_representative(node)});
  }
  for (const auto& c : s.clusters_) {
    s.state_.pending.push_back(s.space_->ids()[c.rep]);
  }
  s.refresh_decision_set();
  s.emit(EventKind::kCreated,
         {{"config", to_json(config)}, {"pool_size", s.state_.pool_size}});
  s.emit(EventKind::kBatchIssued,
         {{"batch", s.state_.batch}, {"ids", s.state_.pending}});
  return s;
}

Session replay_session(std::shared_ptr<const DifferenceSpace> space,
                       std::span<const SessionEvent> events,
                       std::shared_ptr<const Dendrogram> dendrogram) {
  if (events.empty() || events.front().kind != EventKind::kCreated) {
    throw DataError("event log must start with a created event");
  }
  SessionConfig config;
  try {
    config = session_config_from_json(events.front().payload.at("config"));
  } catch (const std::exception& e) {
    throw DataError(std::string("bad created event: ") + e.what());
  }
  Session s = start_session(std::move(space), config, std::move(dendrogram));
  for (const SessionEvent& e : events) {
    if (e.kind != EventKind::kLabelReceived) continue;
    try {
      s.record_label(e.payload.at("id").get<std::string>(),
                     parse_label(e.payload.at("label").get<std::string>()));
    } catch (const std::exception& ex) {
      throw DataError("event " + std::to_string(e.seq) +
                      " cannot be replayed: " + ex.what());
    }
  }
  if (s.events().size() < events.size()) {
    throw DataError("event log has events beyond what replay produces");
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!(s.events()[i] == events[i])) {
      throw DataError("event log diverges from replay at seq " +
                      std::to_string(events[i].seq));
    }
  }
  return s;
}

Outcome run_iterative(Session& session, const Oracle& oracle) {
  while (!session.finished()) {
    const auto ids = session.state().pending;
    const auto labels = oracle(ids);
    if (labels.size() != ids.size()) {
      throw std::runtime_error("oracle returned " +
                               std::to_string(labels.size()) + " labels for " +
                               std::to_string(ids.size()) + " examples");
    }
    std::map<std::string, PreferenceLabel> batch;
    for (std::size_t i = 0; i < ids.size(); ++i) batch.emplace(ids[i], labels[i]);
    session.submit_labels(batch);
  }
  return session.outcome();
}

IterativeResult run_iterative(std::shared_ptr<const DifferenceSpace> space,
                              const SessionConfig& config,
                              const Oracle& oracle) {
  Session session = start_session(std::move(space), config);
  Outcome outcome = run_iterative(session, oracle);
  const std::size_t used = session.state().annotated_count;
  return {std::move(session), outcome, used};
}

IterativeSummary run_iterative_random(std::span<const std::string> pool,
                                      const SessionConfig& config,
                                      const Oracle& oracle, std::uint64_t seed) {
  config.validate(pool.size());
  Rng rng(derive_seed(seed, "iterative-random"));
  const auto order = sample_without_replacement(rng, pool.size(), pool.size());
  IterativeSummary out;
  std::size_t next = 0;
  auto draw = [&](std::size_t count) {
    std::vector<std::string> ids;
    for (; count > 0 && next < order.size(); --count) ids.push_back(pool[order[next++]]);
    for (auto label : oracle(ids)) out.counts.add(label);
    out.annotated_count += ids.size();
  };
  draw(config.n_min);
  while (true) {
    const auto& c = out.counts;
    out.risk = (c.a == 0 && c.b == 0) ? 1.0 : risk(c, pool.size());
    if (out.risk <= config.p) {
      out.outcome = c.a > c.b ? Outcome::kA : Outcome::kB;
      return out;
    }
    if (out.annotated_count + 2 > config.b_max || next >= order.size()) {
      out.outcome = Outcome::kInconclusive;
      return out;
    }
    draw(2);
  }
}

}  // namespace diffuse
