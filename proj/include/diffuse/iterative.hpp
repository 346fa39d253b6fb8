#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "diffuse/clustering.hpp"
#include "diffuse/estimator.hpp"
#include "diffuse/oracle.hpp"
#include "diffuse/vectors.hpp"

namespace diffuse {

struct SessionConfig {
  double p = 0.2;          // risk threshold, in (0, 1)
  std::size_t n_min = 5;   // annotations before the first stop check
  std::size_t b_max = 200; // hard annotation budget
  RepresentativeRule representative;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument unless 0 < p < 1, 1 <= n_min <= b_max and
  // n_min <= pool_size.
  void validate(std::size_t pool_size) const;

  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

nlohmann::json to_json(const SessionConfig& c);
SessionConfig session_config_from_json(const nlohmann::json& j);

enum class SessionStatus {
  kAwaitingLabels,
  kConcludedA,
  kConcludedB,
  kInconclusive
};

std::string_view to_string(SessionStatus s);

enum class Outcome { kA, kB, kInconclusive };

std::string_view to_string(Outcome o);

enum class EventKind {
  kCreated,
  kBatchIssued,
  kLabelReceived,
  kSplit,
  kConcluded,
  kInconclusive
};

std::string_view to_string(EventKind k);
EventKind parse_event_kind(std::string_view name);

// One entry of a session's append-only history. Equality ignores the
// timestamp, which is stamped by whoever persists the event.
struct SessionEvent {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::kCreated;
  nlohmann::json payload;
  std::string timestamp;

  friend bool operator==(const SessionEvent& a, const SessionEvent& b) {
    return a.seq == b.seq && a.kind == b.kind && a.payload == b.payload;
  }
};

nlohmann::json to_json(const SessionEvent& e);
SessionEvent session_event_from_json(const nlohmann::json& j);

// Public snapshot of a session. `decision_set` lists the current cluster
// representatives in cluster order; `annotations` is every oracle answer in
// the order received, including discarded ones.
struct SessionState {
  SessionConfig config;
  std::size_t pool_size = 0;
  std::size_t k = 0;
  std::vector<std::pair<std::string, PreferenceLabel>> annotations;
  std::vector<std::string> decision_set;
  std::vector<std::string> pending;
  SessionStatus status = SessionStatus::kAwaitingLabels;
  double current_risk = 1.0;
  std::size_t annotated_count = 0;
  std::uint64_t batch = 0;
  LabelCounts decision_counts;

  friend bool operator==(const SessionState&, const SessionState&) = default;
};

// Status document for clients. Annotation details are included only when
// `reveal_annotations` is set.
nlohmann::json to_json(const SessionState& s, bool reveal_annotations = true);

/// Risk-thresholded iterative annotation over a dendrogram.
///
/// The session starts with one representative per cluster of the n_min-cut.
/// Once a batch is fully labeled it stops if the risk over the decision set
/// is at most p, gives up if fewer than two budget units remain, and
/// otherwise splits the next dendrogram cluster: the split cluster's
/// representative leaves the vote and the two children's representatives
/// join it. Representatives that were labeled before are reused for free.
///
/// Single writer: callers serialize mutations of one session.
class Session {
 public:
  const SessionState& state() const { return state_; }
  const std::vector<SessionEvent>& events() const { return events_; }
  const DifferenceSpace& space() const { return *space_; }
  const Dendrogram& dendrogram() const { return *dendrogram_; }
  bool finished() const {
    return state_.status != SessionStatus::kAwaitingLabels;
  }
  Outcome outcome() const;

  // Labels must cover exactly the pending set.
  void submit_labels(const std::map<std::string, PreferenceLabel>& labels);

  // Ingests one pending label. When the batch completes, the stopping logic
  // runs unless auto-advance is off.
  void record_label(const std::string& id, PreferenceLabel label);

  // One stop-check / split step. Requires no pending labels.
  void advance();

  void set_auto_advance(bool on) { auto_advance_ = on; }

 private:
  friend Session start_session(std::shared_ptr<const DifferenceSpace>,
                               SessionConfig,
                               std::shared_ptr<const Dendrogram>);

  struct ActiveCluster {
    std::size_t node;
    std::size_t rep;
  };

  void emit(EventKind kind, nlohmann::json payload);
  void refresh_decision_set();
  void settle();
  std::size_t pick_representative(std::size_t node) const;

  std::shared_ptr<const DifferenceSpace> space_;
  std::shared_ptr<const Dendrogram> dendrogram_;
  SessionState state_;
  std::vector<SessionEvent> events_;
  std::vector<ActiveCluster> clusters_;  // ordered by smallest member
  std::map<std::size_t, PreferenceLabel> label_of_;
  bool auto_advance_ = true;
};

// Builds the dendrogram (ward-euclidean) unless one is supplied.
Session start_session(std::shared_ptr<const DifferenceSpace> space,
                      SessionConfig config,
                      std::shared_ptr<const Dendrogram> dendrogram = nullptr);

// Rebuilds a session from a prefix of its event log. Events derived from
// the last logged label (splits, verdicts) are regenerated, so the result
// may carry more events than were supplied. Throws DataError if the log
// disagrees with the replay.
Session replay_session(std::shared_ptr<const DifferenceSpace> space,
                       std::span<const SessionEvent> events,
                       std::shared_ptr<const Dendrogram> dendrogram = nullptr);

struct IterativeResult {
  Session session;
  Outcome outcome;
  std::size_t annotated_count;
};

// Drives the session with the oracle until it stops. An oracle exception
// propagates and leaves `session` at its last consistent state.
Outcome run_iterative(Session& session, const Oracle& oracle);
IterativeResult run_iterative(std::shared_ptr<const DifferenceSpace> space,
                              const SessionConfig& config, const Oracle& oracle);

struct IterativeSummary {
  Outcome outcome = Outcome::kInconclusive;
  std::size_t annotated_count = 0;
  double risk = 1.0;
  LabelCounts counts;
};

// Same stopping rule with i.i.d. sampling: n_min random examples first,
// then two more per round, nothing discarded.
IterativeSummary run_iterative_random(std::span<const std::string> pool,
                                      const SessionConfig& config,
                                      const Oracle& oracle, std::uint64_t seed);

}  // namespace diffuse
