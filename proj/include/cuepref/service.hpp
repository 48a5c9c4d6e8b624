#pragma once

// Live elicitation sessions. Every mutation is appended to a per-session
// JSON-lines event log before it is applied, so a store reopened on the
// same directory replays into the same state. Inference runs on a
// background thread, at most one job per session.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cuepref/domain.hpp"
#include "cuepref/error.hpp"
#include "cuepref/likelihood.hpp"
#include "cuepref/sampler.hpp"

namespace httplib {
class Server;
}

namespace cuepref {

/// Stale pair, duplicate answer, concurrent job or wrong session state.
class ConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Field-level rejection of a submitted record.
class RecordRejected : public ValidationError {
 public:
  RecordRejected(std::string message, std::vector<Violation> violations)
      : ValidationError(std::move(message)), violations(std::move(violations)) {}
  std::vector<Violation> violations;
};

enum class SessionStatus { kCollecting, kInferring, kDone, kFailed };
std::string status_name(SessionStatus s);
SessionStatus parse_status(const std::string& s);

struct SessionPlan {
  int pair_budget = 30;
  VariantSpec variant = VariantSpec::parse("i2");
  int segments = 2;
  SamplerConfig sampler;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults.
  static SessionPlan from_json(const nlohmann::json& j);
};

struct InferenceJob {
  std::string id;
  std::string status;  // running, done, failed
  int chains_done = 0;
  nlohmann::json diagnostics;
  std::string error;
};

struct Session {
  std::string id;
  std::string problem_ref;
  SessionPlan plan;
  std::vector<IndexPair> schedule;   // pre-drawn pair order
  std::vector<bool> swapped;         // per scheduled pair: second shown on the left
  std::vector<PreferenceRecord> answers;
  SessionStatus status = SessionStatus::kCollecting;
  std::optional<InferenceJob> job;
  nlohmann::json result;             // ResultBundle JSON once done
  std::size_t events = 0;            // applied log entries

  /// Pairs served so far: the answered ones plus the current one.
  std::vector<IndexPair> asked_pairs() const;
  /// Full state, deterministic key order.
  nlohmann::json to_json(const Problem& problem) const;
};

/// A display-ready pair, or nullopt when the budget is exhausted.
struct ServedPair {
  std::size_t index = 0;
  std::string left;
  std::string right;
};

class SessionStore {
 public:
  /// Loads problems and replays every session found under `root`. The
  /// bundled phone contracts problem is always available.
  explicit SessionStore(std::filesystem::path root);
  ~SessionStore();
  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  /// Registers a problem; re-posting an identical problem is accepted,
  /// a different problem under a taken id is a conflict. Returns true
  /// when newly created.
  bool add_problem(const Problem& problem);
  Problem problem(const std::string& id) const;

  Session create_session(const std::string& problem_ref, const SessionPlan& plan);
  Session session(const std::string& id) const;
  std::vector<std::string> session_ids() const;

  std::optional<ServedPair> next_pair(const std::string& id) const;
  /// Appends an answer for the currently served pair.
  Session submit_answer(const std::string& id, const PreferenceRecord& record);
  /// Starts a background job. `wait` joins it before returning (tests/CLI).
  InferenceJob start_inference(const std::string& id, bool wait = false);
  /// Blocks until the session's job (if any) has finished.
  void wait_for_job(const std::string& id);

  /// State rebuilt from the log alone, ignoring snapshot and memory.
  Session replay(const std::string& id) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  struct Slot {
    mutable std::mutex mutex;
    Session session;
    std::jthread worker;
  };

  std::shared_ptr<Slot> slot(const std::string& id) const;
  void append_event(Slot& slot, const nlohmann::json& event);
  void write_snapshot(const Slot& slot) const;
  void run_job(Slot* slot, const std::string& job_id);
  std::filesystem::path session_dir(const std::string& id) const;

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::map<std::string, Problem> problems_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::size_t session_counter_ = 0;
};

/// Applies one logged event to a session.
void apply_event(Session& session, const Problem& problem, const nlohmann::json& event);

/// Pair payload for the UI: ids, names, per-criterion performances.
nlohmann::json pair_payload(const Problem& problem, const ServedPair& pair);

/// Routes of the HTTP API on `server`, backed by `store`.
void register_routes(httplib::Server& server, SessionStore& store);

/// Blocking HTTP server.
void serve(const std::filesystem::path& root, const std::string& host, int port);

}  // namespace cuepref
