#include "cuepref/service.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

#include <httplib.h>

#include "cuepref/io.hpp"
#include "cuepref/random.hpp"
#include "cuepref/simulator.hpp"
#include "cuepref/workflow.hpp"

namespace cuepref {

namespace fs = std::filesystem;
using nlohmann::json;

std::string status_name(SessionStatus s) {
  switch (s) {
    case SessionStatus::kCollecting: return "collecting";
    case SessionStatus::kInferring: return "inferring";
    case SessionStatus::kDone: return "done";
    case SessionStatus::kFailed: return "failed";
  }
  return "unknown";
}

SessionStatus parse_status(const std::string& s) {
  if (s == "collecting") return SessionStatus::kCollecting;
  if (s == "inferring") return SessionStatus::kInferring;
  if (s == "done") return SessionStatus::kDone;
  if (s == "failed") return SessionStatus::kFailed;
  throw ValidationError("unknown session status '" + s + "'");
}

json SessionPlan::to_json() const {
  return {{"pair_budget", pair_budget},
          {"variant", variant.name()},
          {"segments", segments},
          {"samples", sampler.samples},
          {"warmup", sampler.warmup},
          {"chains", sampler.chains},
          {"leapfrog_steps", sampler.leapfrog_steps},
          {"seed", seed}};
}

SessionPlan SessionPlan::from_json(const json& j) {
  SessionPlan p;
  try {
    p.pair_budget = j.value("pair_budget", p.pair_budget);
    p.variant = VariantSpec::parse(j.value("variant", p.variant.name()));
    p.segments = j.value("segments", p.segments);
    p.sampler.samples = j.value("samples", p.sampler.samples);
    p.sampler.warmup = j.value("warmup", p.sampler.warmup);
    p.sampler.chains = j.value("chains", p.sampler.chains);
    p.sampler.leapfrog_steps = j.value("leapfrog_steps", p.sampler.leapfrog_steps);
    p.seed = j.value("seed", p.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed plan: ") + e.what());
  }
  p.sampler.seed = p.seed;
  if (p.pair_budget < 1) throw ValidationError("pair budget must be at least 1");
  if (p.segments < 1) throw ValidationError("segments must be at least 1");
  p.sampler.validate();
  return p;
}

std::vector<IndexPair> Session::asked_pairs() const {
  std::size_t n = answers.size();
  if (status == SessionStatus::kCollecting && n < schedule.size()) ++n;
  return {schedule.begin(), schedule.begin() + static_cast<std::ptrdiff_t>(n)};
}

json Session::to_json(const Problem& problem) const {
  auto ids = [&](const IndexPair& p) {
    return json::array({problem.alternatives()[p.first].id, problem.alternatives()[p.second].id});
  };
  json sched = json::array();
  for (const auto& p : schedule) sched.push_back(ids(p));
  json asked = json::array();
  for (const auto& p : asked_pairs()) asked.push_back(ids(p));
  json ans = json::array();
  for (const auto& r : answers) ans.push_back(record_to_json(r));
  json j_job = nullptr;
  if (job) {
    j_job = {{"id", job->id},
             {"status", job->status},
             {"chains_done", job->chains_done},
             {"chains", plan.sampler.chains},
             {"diagnostics", job->diagnostics},
             {"error", job->error}};
  }
  return {{"id", id},
          {"problem_ref", problem_ref},
          {"plan", plan.to_json()},
          {"status", status_name(status)},
          {"schedule", sched},
          {"swapped", swapped},
          {"asked_pairs", asked},
          {"answers", ans},
          {"job", j_job},
          {"result", result},
          {"events", events}};
}

void apply_event(Session& s, const Problem& problem, const json& event) {
  const std::string type = event.at("type").get<std::string>();
  if (type == "created") {
    s.id = event.at("id").get<std::string>();
    s.problem_ref = event.at("problem_ref").get<std::string>();
    s.plan = SessionPlan::from_json(event.at("plan"));
    s.schedule.clear();
    for (const auto& p : event.at("schedule")) {
      s.schedule.emplace_back(problem.alternative_index(p[0].get<std::string>()),
                              problem.alternative_index(p[1].get<std::string>()));
    }
    s.swapped = event.at("swapped").get<std::vector<bool>>();
    s.status = SessionStatus::kCollecting;
  } else if (type == "answer") {
    s.answers.push_back(record_from_json(event.at("record")));
  } else if (type == "inference_started") {
    s.status = SessionStatus::kInferring;
    s.job = InferenceJob{event.at("job_id").get<std::string>(), "running", 0, nullptr, ""};
    s.result = nullptr;
  } else if (type == "inference_completed") {
    s.status = SessionStatus::kDone;
    if (!s.job) s.job = InferenceJob{};
    s.job->id = event.at("job_id").get<std::string>();
    s.job->status = "done";
    s.job->chains_done = s.plan.sampler.chains;
    s.job->diagnostics = event.value("diagnostics", json(nullptr));
    s.job->error.clear();
    s.result = event.at("result");
  } else if (type == "inference_failed") {
    s.status = SessionStatus::kFailed;
    if (!s.job) s.job = InferenceJob{};
    s.job->id = event.at("job_id").get<std::string>();
    s.job->status = "failed";
    s.job->diagnostics = event.value("diagnostics", json(nullptr));
    s.job->error = event.value("error", std::string());
    s.result = nullptr;
  } else {
    throw ValidationError("unknown event type '" + type + "'");
  }
  ++s.events;
}

json pair_payload(const Problem& problem, const ServedPair& pair) {
  auto side = [&](const std::string& id) {
    const std::size_t a = problem.alternative_index(id);
    json perf = json::object();
    for (std::size_t m = 0; m < problem.num_criteria(); ++m) {
      perf[problem.criteria()[m].id] = problem.performance(a, m);
    }
    return json{{"id", id}, {"name", problem.alternatives()[a].name}, {"performances", perf}};
  };
  json criteria = json::array();
  for (const auto& c : problem.criteria()) {
    criteria.push_back({{"id", c.id}, {"name", c.name},
                        {"direction", c.direction == Direction::kGain ? "gain" : "cost"}});
  }
  return {{"complete", false},
          {"index", pair.index},
          {"pair", {pair.left, pair.right}},
          {"left", side(pair.left)},
          {"right", side(pair.right)},
          {"criteria", criteria}};
}

// ---------------------------------------------------------------------------
// SessionStore

namespace {

std::vector<json> read_events(const fs::path& path) {
  std::vector<json> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception&) {
      // A torn final line from a crash mid-write is dropped.
      break;
    }
  }
  return out;
}

std::string now_rfc3339() {
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  return format_rfc3339(std::chrono::duration<double>(now).count());
}

bool same_pair(const PreferenceRecord& r, const Problem& problem, const IndexPair& p) {
  const std::string& a = problem.alternatives()[p.first].id;
  const std::string& b = problem.alternatives()[p.second].id;
  return (r.pair.first == a && r.pair.second == b) || (r.pair.first == b && r.pair.second == a);
}

}  // namespace

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "problems");
  fs::create_directories(root_ / "sessions");
  const Problem fixture = phone_contracts_problem();
  problems_.emplace(fixture.id(), fixture);
  for (const auto& entry : fs::directory_iterator(root_ / "problems")) {
    if (entry.path().extension() != ".json") continue;
    Problem p = read_problem(entry.path());
    problems_.insert_or_assign(p.id(), std::move(p));
  }
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root_ / "sessions")) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const std::string id = dir.filename().string();
    auto s = std::make_shared<Slot>();
    s->session = replay(id);
    if (s->session.id.empty()) continue;
    sessions_.emplace(id, s);
    // A job cannot survive a restart; record its loss so the log stays authoritative.
    if (s->session.status == SessionStatus::kInferring) {
      append_event(*s, {{"type", "inference_failed"},
                        {"job_id", s->session.job->id},
                        {"error", "interrupted by restart"}});
    }
    write_snapshot(*s);
    const std::string digits = id.substr(1);
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit)) {
      session_counter_ = std::max<std::size_t>(session_counter_, std::stoul(digits));
    }
  }
}

SessionStore::~SessionStore() {
  std::vector<std::shared_ptr<Slot>> slots;
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, s] : sessions_) slots.push_back(s);
  }
  for (auto& s : slots) {
    if (s->worker.joinable()) s->worker.join();
  }
}

fs::path SessionStore::session_dir(const std::string& id) const { return root_ / "sessions" / id; }

bool SessionStore::add_problem(const Problem& problem) {
  std::lock_guard lock(mutex_);
  auto it = problems_.find(problem.id());
  if (it != problems_.end()) {
    if (it->second == problem) return false;
    throw ConflictError("problem '" + problem.id() + "' already exists with different content");
  }
  write_problem(problem, root_ / "problems" / (problem.id() + ".json"));
  problems_.emplace(problem.id(), problem);
  return true;
}

Problem SessionStore::problem(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = problems_.find(id);
  if (it == problems_.end()) throw NotFoundError("unknown problem '" + id + "'");
  return it->second;
}

std::shared_ptr<SessionStore::Slot> SessionStore::slot(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

std::vector<std::string> SessionStore::session_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

void SessionStore::append_event(Slot& s, const json& event) {
  const fs::path dir = session_dir(s.session.id.empty() ? event.at("id").get<std::string>() : s.session.id);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "events.jsonl", std::ios::app);
    out << event.dump() << '\n';
    out.flush();
    if (!out) throw std::runtime_error("cannot append to the event log in " + dir.string());
  }
  apply_event(s.session, problem(s.session.problem_ref.empty() ? event.at("problem_ref").get<std::string>()
                                                                : s.session.problem_ref),
              event);
  write_snapshot(s);
}

void SessionStore::write_snapshot(const Slot& s) const {
  const fs::path dir = session_dir(s.session.id);
  const fs::path tmp = dir / "snapshot.json.tmp";
  {
    std::ofstream out(tmp);
    out << s.session.to_json(problem(s.session.problem_ref)).dump(2) << '\n';
  }
  fs::rename(tmp, dir / "snapshot.json");
}

Session SessionStore::replay(const std::string& id) const {
  Session s;
  const auto events = read_events(session_dir(id) / "events.jsonl");
  if (events.empty()) return s;
  const Problem p = problem(events.front().at("problem_ref").get<std::string>());
  for (const auto& e : events) apply_event(s, p, e);
  return s;
}

Session SessionStore::create_session(const std::string& problem_ref, const SessionPlan& plan) {
  const Problem p = problem(problem_ref);
  const std::size_t available = candidate_pairs(p).size();
  if (plan.pair_budget < 1) throw ValidationError("pair budget must be at least 1");
  if (static_cast<std::size_t>(plan.pair_budget) > available) {
    throw ValidationError("pair budget " + std::to_string(plan.pair_budget) + " exceeds the " +
                          std::to_string(available) + " non-dominated pairs");
  }
  const auto schedule = sample_pairs(p, static_cast<std::size_t>(plan.pair_budget), derive_seed(plan.seed, {1}));
  Rng rng(derive_seed(plan.seed, {2}));
  std::bernoulli_distribution coin(0.5);
  std::vector<bool> swapped;
  json sched = json::array();
  for (const auto& [a, b] : schedule) {
    swapped.push_back(coin(rng));
    sched.push_back({p.alternatives()[a].id, p.alternatives()[b].id});
  }

  std::string id;
  {
    std::lock_guard lock(mutex_);
    std::ostringstream os;
    os << 's' << std::setw(6) << std::setfill('0') << ++session_counter_;
    id = os.str();
  }
  auto s = std::make_shared<Slot>();
  std::lock_guard slot_lock(s->mutex);
  append_event(*s, {{"type", "created"},
                    {"id", id},
                    {"problem_ref", problem_ref},
                    {"plan", plan.to_json()},
                    {"schedule", sched},
                    {"swapped", swapped}});
  {
    std::lock_guard lock(mutex_);
    sessions_.emplace(id, s);
  }
  return s->session;
}

Session SessionStore::session(const std::string& id) const {
  auto s = slot(id);
  std::lock_guard lock(s->mutex);
  return s->session;
}

std::optional<ServedPair> SessionStore::next_pair(const std::string& id) const {
  auto s = slot(id);
  std::lock_guard lock(s->mutex);
  const Session& ses = s->session;
  if (ses.status != SessionStatus::kCollecting) {
    throw ConflictError("session is " + status_name(ses.status) + ", not collecting");
  }
  const std::size_t k = ses.answers.size();
  if (k >= ses.schedule.size()) return std::nullopt;
  const Problem p = problem(ses.problem_ref);
  const auto& [a, b] = ses.schedule[k];
  ServedPair out{k, p.alternatives()[a].id, p.alternatives()[b].id};
  if (ses.swapped[k]) std::swap(out.left, out.right);
  return out;
}

Session SessionStore::submit_answer(const std::string& id, const PreferenceRecord& record) {
  auto s = slot(id);
  std::lock_guard lock(s->mutex);
  const Session& ses = s->session;
  const Problem p = problem(ses.problem_ref);
  if (ses.status != SessionStatus::kCollecting) {
    throw ConflictError("session is " + status_name(ses.status) + ", not collecting");
  }
  for (std::size_t i = 0; i < ses.answers.size(); ++i) {
    if (same_pair(record, p, ses.schedule[i])) throw ConflictError("pair was already answered");
  }
  const std::size_t k = ses.answers.size();
  if (k >= ses.schedule.size()) throw ConflictError("pair budget is exhausted");
  if (!same_pair(record, p, ses.schedule[k])) throw ConflictError("answer does not match the served pair");

  PreferenceRecord rec = record;
  if (rec.recorded_at.empty()) rec.recorded_at = now_rfc3339();
  const auto violations = validate_dataset(Dataset{p.id(), {rec}}, p);
  if (!violations.empty()) {
    throw RecordRejected("record failed validation on field " + violations.front().field, violations);
  }
  append_event(*s, {{"type", "answer"}, {"record", record_to_json(rec)}});
  return s->session;
}

InferenceJob SessionStore::start_inference(const std::string& id, bool wait) {
  auto s = slot(id);
  InferenceJob job;
  {
    std::lock_guard lock(s->mutex);
    if (s->session.status == SessionStatus::kInferring) throw ConflictError("an inference job is already running");
    if (s->session.answers.empty()) throw ValidationError("inference needs at least one answer");
    // The previous worker set its final status under this lock and has nothing left to do.
    if (s->worker.joinable()) s->worker.join();
    std::size_t started = 0;
    for (const auto& e : read_events(session_dir(id) / "events.jsonl")) {
      if (e.at("type") == "inference_started") ++started;
    }
    const std::string job_id = id + "-j" + std::to_string(started + 1);
    append_event(*s, {{"type", "inference_started"}, {"job_id", job_id}});
    job = *s->session.job;
    s->worker = std::jthread([this, raw = s.get(), job_id] { run_job(raw, job_id); });
  }
  if (wait) wait_for_job(id);
  return job;
}

void SessionStore::wait_for_job(const std::string& id) {
  auto s = slot(id);
  std::jthread worker;
  {
    std::lock_guard lock(s->mutex);
    worker = std::move(s->worker);
  }
  if (worker.joinable()) worker.join();
}

void SessionStore::run_job(Slot* s, const std::string& job_id) {
  std::optional<Problem> problem_copy;
  Dataset data;
  SessionPlan plan;
  {
    std::lock_guard lock(s->mutex);
    problem_copy = problem(s->session.problem_ref);
    data = Dataset{problem_copy->id(), s->session.answers};
    plan = s->session.plan;
  }
  const Problem& p = *problem_copy;
  json event;
  try {
    FitRequest req{plan.variant, PiecewiseConfig::uniform(p.num_criteria(), plan.segments), plan.sampler};
    req.sampler.seed = derive_seed(plan.seed, {3});
    const FitResult fit = fit_model(p, data, req, [s](int done) {
      std::lock_guard lock(s->mutex);
      if (s->session.job) s->session.job->chains_done = std::max(s->session.job->chains_done, done);
    });
    const json diag = fit.bundle.diagnostics ? fit.bundle.diagnostics->to_json() : json(nullptr);
    if (fit.converged) {
      event = {{"type", "inference_completed"}, {"job_id", job_id}, {"diagnostics", diag},
               {"result", fit.bundle.to_json()}};
    } else {
      event = {{"type", "inference_failed"}, {"job_id", job_id}, {"diagnostics", diag},
               {"error", "chains did not converge after a retry"}};
    }
  } catch (const std::exception& e) {
    event = {{"type", "inference_failed"}, {"job_id", job_id}, {"error", e.what()}};
  }
  std::lock_guard lock(s->mutex);
  append_event(*s, event);
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json violations_json(const std::vector<Violation>& vs) {
  json out = json::array();
  for (const auto& v : vs) out.push_back({{"record", v.record}, {"field", v.field}, {"message", v.message}});
  return out;
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const RecordRejected& e) {
      send_json(res, 422, {{"error", e.what()}, {"violations", violations_json(e.violations)}});
    } catch (const ValidationError& e) {
      send_json(res, 422, {{"error", e.what()}});
    } catch (const ConflictError& e) {
      send_json(res, 409, {{"error", e.what()}});
    } catch (const NotFoundError& e) {
      send_json(res, 404, {{"error", e.what()}});
    } catch (const json::exception& e) {
      send_json(res, 400, {{"error", std::string("malformed JSON: ") + e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", e.what()}});
    }
  };
}

json session_view(const SessionStore& store, const Session& s) {
  json j = s.to_json(store.problem(s.problem_ref));
  j.erase("result");
  j["answered"] = s.answers.size();
  j["has_result"] = !s.result.is_null();
  return j;
}

}  // namespace

void register_routes(httplib::Server& server, SessionStore& store) {
  server.Post("/problems", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    const Problem p = problem_from_json(json::parse(req.body));
    const bool created = store.add_problem(p);
    send_json(res, created ? 201 : 200, problem_to_json(p));
  }));
  server.Get(R"(/problems/([^/]+))", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, problem_to_json(store.problem(req.matches[1])));
  }));
  server.Post("/sessions", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body);
    const std::string ref = body.contains("problem_ref") ? body.at("problem_ref").get<std::string>()
                                                         : body.at("problem_id").get<std::string>();
    const SessionPlan plan = SessionPlan::from_json(body.value("plan", json::object()));
    const Session s = store.create_session(ref, plan);
    send_json(res, 201, session_view(store, s));
  }));
  server.Get(R"(/sessions/([^/]+))", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, session_view(store, store.session(req.matches[1])));
  }));
  server.Get(R"(/sessions/([^/]+)/next-pair)",
             guarded([&store](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               const auto pair = store.next_pair(id);
               if (!pair) {
                 send_json(res, 200, {{"complete", true}});
                 return;
               }
               const Session s = store.session(id);
               send_json(res, 200, pair_payload(store.problem(s.problem_ref), *pair));
             }));
  server.Post(R"(/sessions/([^/]+)/answers)",
              guarded([&store](const httplib::Request& req, httplib::Response& res) {
                const PreferenceRecord rec = record_from_json(json::parse(req.body));
                const Session s = store.submit_answer(req.matches[1], rec);
                send_json(res, 201, {{"accepted", true}, {"answered", s.answers.size()},
                                     {"complete", s.answers.size() == s.schedule.size()}});
              }));
  server.Post(R"(/sessions/([^/]+)/inference)",
              guarded([&store](const httplib::Request& req, httplib::Response& res) {
                const InferenceJob job = store.start_inference(req.matches[1]);
                send_json(res, 202, {{"job_id", job.id}, {"status", job.status}});
              }));
  server.Get(R"(/sessions/([^/]+)/results)",
             guarded([&store](const httplib::Request& req, httplib::Response& res) {
               const Session s = store.session(req.matches[1]);
               switch (s.status) {
                 case SessionStatus::kDone:
                   send_json(res, 200, {{"status", "done"}, {"result", s.result}});
                   return;
                 case SessionStatus::kInferring:
                   send_json(res, 202, {{"status", "inferring"},
                                        {"progress", {{"chains_done", s.job->chains_done},
                                                      {"chains", s.plan.sampler.chains}}}});
                   return;
                 case SessionStatus::kFailed:
                   send_json(res, 200, {{"status", "failed"},
                                        {"error", s.job->error},
                                        {"diagnostics", s.job->diagnostics}});
                   return;
                 case SessionStatus::kCollecting:
                   send_json(res, 404, {{"status", "collecting"}, {"error", "no inference has run"}});
                   return;
               }
             }));
}

void serve(const fs::path& root, const std::string& host, int port) {
  SessionStore store(root);
  httplib::Server server;
  register_routes(server, store);
  if (!server.listen(host, port)) {
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace cuepref
