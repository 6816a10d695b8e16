#pragma once

// Session service for the interactive reference-point loop: sessions hold a
// model and its criterion bounds, reference points are solved
// asynchronously (one at a time per session, FIFO) and every result is
// appended to a history that can be persisted as JSON lines.

#include <chrono>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "refpoint/document.hpp"
#include "refpoint/scalarize.hpp"

namespace refpoint {

struct ServiceOptions {
  /// Directory for per-session JSON-lines files; empty disables persistence.
  std::filesystem::path state_dir;
  SolverOptions solver;
};

struct Reply {
  int status = 200;
  json body;
};

inline json error_body(const std::string& message) { return {{"error", message}}; }

/// Criterion ranges in reported units (minimization objectives un-negated).
inline json bounds_to_json(const MoLpModel& model, const CriterionBounds& b) {
  json out = json::array();
  for (std::size_t j = 0; j < b.size(); ++j) {
    const auto& o = model.objectives[j];
    double lo = o.reported(b.z_min[j]), hi = o.reported(b.z_max[j]);
    if (lo > hi) std::swap(lo, hi);
    out.push_back({{"name", o.name}, {"sense", o.minimize ? "min" : "max"}, {"min", lo}, {"max", hi}});
  }
  return out;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

/// Solves one reference point given in reported units and renders the
/// result entry (without token, index or timestamp).
inline json solve_entry(const ModelDocument& doc, const MoLpModel& model, const CriterionBounds& bounds,
                        const std::vector<double>& reference, const SolverOptions& options) {
  ReferencePoint ref;
  for (std::size_t j = 0; j < reference.size(); ++j) ref.values.push_back(model.objectives[j].canonical(reference[j]));
  const auto start = std::chrono::steady_clock::now();
  const auto res = solve_reference_point(model, ref, bounds, options);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json e = {{"reference", reference}, {"status", to_string(res.outcome.status)}, {"seconds", seconds}};
  if (!res.outcome.criteria.values.empty()) {
    e["criteria"] = reported_criteria(model, res.outcome.criteria.values);
    e["achievement"] = res.achievement;
    e["rho"] = res.rho_used;
    e["decision"] = decision_payload(doc, model, res.outcome.decision);
  }
  return e;
}

class Service {
 public:
  explicit Service(ServiceOptions options = {}) : options_(std::move(options)) {
    if (!options_.state_dir.empty()) {
      std::filesystem::create_directories(options_.state_dir);
      load_state();
    }
  }

  ~Service() {
    std::unique_lock lock(sessions_mu_);
    for (auto& [id, s] : sessions_) s->stop();
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  Reply create_session(std::string_view body) {
    ModelDocument doc;
    try {
      doc = document_from_json(body);
    } catch (const ParseError& e) {
      return {400, {{"error", "malformed JSON"}, {"position", e.position()}}};
    } catch (const ValidationError& e) {
      return {400, {{"error", "invalid model"}, {"violations", e.violations()}}};
    }
    return create_session(std::move(doc));
  }

  Reply create_session(ModelDocument doc) {
    auto model = doc.working_model();
    CriterionBounds bounds;
    try {
      bounds = criterion_bounds(model, options_.solver);
    } catch (const BoundsError& e) {
      json body = error_body(e.what());
      if (!e.criterion().empty()) body["criterion"] = e.criterion();
      return {422, body};
    }
    auto s = std::make_shared<Session>(new_id(), std::move(doc), std::move(model), std::move(bounds), options_);
    s->persist_header();
    s->start();
    {
      std::unique_lock lock(sessions_mu_);
      sessions_[s->id] = s;
    }
    return {201, s->summary()};
  }

  /// POST /v1/demos/{mdp|grid}; the body may override generator parameters.
  Reply create_demo(const std::string& kind, std::string_view body) {
    json p = json::object();
    if (!body.empty()) {
      try {
        p = detail::parse_document(body);
      } catch (const ParseError& e) {
        return {400, {{"error", "malformed JSON"}, {"position", e.position()}}};
      }
      if (!p.is_object()) return {400, error_body("demo parameters must be a JSON object")};
    }
    try {
      if (kind == "mdp") {
        auto mdp = generate_predator_prey(p.value("seed", std::uint64_t{1}), p.value("states", std::size_t{10}), 4,
                                          p.value("horizon", std::size_t{20}));
        return create_session(make_document(std::move(mdp)));
      }
      if (kind == "grid") {
        std::optional<std::size_t> k = std::size_t{12};
        if (p.contains("k")) k = p.at("k").is_null() ? std::nullopt : std::optional(p.at("k").get<std::size_t>());
        std::optional<double> budget;
        if (p.contains("budget") && !p.at("budget").is_null()) budget = p.at("budget").get<double>();
        auto g = generate_instance(p.value("seed", std::uint64_t{1}), p.value("rows", std::size_t{20}),
                                   p.value("cols", std::size_t{20}), {}, k, budget);
        return create_session(make_document(std::move(g)));
      }
    } catch (const json::exception& e) {
      return {400, error_body(std::string("bad demo parameter: ") + e.what())};
    } catch (const ValidationError& e) {
      return {400, {{"error", "invalid demo instance"}, {"violations", e.violations()}}};
    } catch (const std::invalid_argument& e) {
      return {400, error_body(e.what())};
    }
    return {404, error_body("unknown demo '" + kind + "'")};
  }

  Reply submit_reference(const std::string& id, std::string_view body) {
    auto s = find(id);
    if (!s) return {404, error_body("unknown session " + id)};
    json j;
    try {
      j = detail::parse_document(body);
    } catch (const ParseError& e) {
      return {400, {{"error", "malformed JSON"}, {"position", e.position()}}};
    }
    if (j.is_object() && j.contains("reference")) j = j.at("reference");
    if (!j.is_array()) return {400, error_body("expected a reference array")};
    std::vector<double> ref;
    for (const auto& v : j) {
      if (!v.is_number() || !std::isfinite(v.get<double>())) return {400, error_body("reference values must be finite numbers")};
      ref.push_back(v.get<double>());
    }
    if (ref.size() != s->model.criteria())
      return {400, error_body("reference has " + std::to_string(ref.size()) + " values, session has " +
                              std::to_string(s->model.criteria()) + " criteria")};
    const std::string token = s->enqueue(std::move(ref));
    return {202, {{"token", token}, {"status", "pending"}}};
  }

  Reply result(const std::string& id, const std::string& token) {
    auto s = find(id);
    if (!s) return {404, error_body("unknown session " + id)};
    auto r = s->lookup(token);
    if (!r) return {404, error_body("unknown result token " + token)};
    if (r->is_null()) return {202, {{"token", token}, {"status", "pending"}}};
    return {200, *r};
  }

  Reply history(const std::string& id) {
    auto s = find(id);
    if (!s) return {404, error_body("unknown session " + id)};
    const auto snap = s->snapshot();
    return {200, json(*snap)};
  }

  Reply session_info(const std::string& id) {
    auto s = find(id);
    if (!s) return {404, error_body("unknown session " + id)};
    return {200, s->summary()};
  }

  /// Blocks until the session's queue is empty (used by tests and the CLI).
  void wait_idle(const std::string& id) {
    if (auto s = find(id)) s->wait_idle();
  }

  std::vector<std::string> session_ids() const {
    std::shared_lock lock(sessions_mu_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
  }

  void mount(httplib::Server& server) {
    auto send = [](httplib::Response& res, const Reply& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    server.Post("/v1/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, create_session(req.body));
    });
    server.Get(R"(/v1/sessions/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, session_info(req.matches[1]));
    });
    server.Post(R"(/v1/sessions/([^/]+)/reference)", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, submit_reference(req.matches[1], req.body));
    });
    server.Get(R"(/v1/sessions/([^/]+)/results/([^/]+))",
               [this, send](const httplib::Request& req, httplib::Response& res) {
                 send(res, result(req.matches[1], req.matches[2]));
               });
    server.Get(R"(/v1/sessions/([^/]+)/history)", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, history(req.matches[1]));
    });
    server.Post(R"(/v1/demos/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, create_demo(req.matches[1], req.body));
    });
    server.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      send(res, {500, error_body(what)});
    });
  }

 private:
  struct Session {
    std::string id;
    ModelDocument doc;
    MoLpModel model;
    CriterionBounds bounds;
    std::filesystem::path log_path;
    SolverOptions solver;

    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::pair<std::string, std::vector<double>>> queue;
    bool busy = false;
    bool stopping = false;
    std::size_t next_token = 0;
    std::map<std::string, json> results;  // null = pending
    std::shared_ptr<const std::vector<json>> history = std::make_shared<const std::vector<json>>();
    std::thread worker;

    Session(std::string id_, ModelDocument d, MoLpModel m, CriterionBounds b, const ServiceOptions& opts)
        : id(std::move(id_)), doc(std::move(d)), model(std::move(m)), bounds(std::move(b)), solver(opts.solver) {
      if (!opts.state_dir.empty()) log_path = opts.state_dir / (id + ".jsonl");
    }

    ~Session() { stop(); }

    json summary() const {
      json j = {{"id", id}, {"bounds", bounds_to_json(model, bounds)}};
      j["kind"] = doc.mdp ? "mdp" : doc.grid ? "grid" : "model";
      return j;
    }

    void persist_header() {
      if (log_path.empty()) return;
      std::ofstream out(log_path, std::ios::trunc);
      out << json{{"type", "session"},
                  {"id", id},
                  {"bounds", {{"z_min", bounds.z_min}, {"z_max", bounds.z_max}}},
                  {"document", document_to_tree(doc)}}
                 .dump()
          << '\n';
    }

    void persist_entry(const json& e) {
      if (log_path.empty()) return;
      std::ofstream out(log_path, std::ios::app);
      out << json{{"type", "entry"}, {"entry", e}}.dump() << '\n';
    }

    void start() {
      worker = std::thread([this] { run(); });
    }

    void stop() {
      {
        std::lock_guard lock(mu);
        stopping = true;
      }
      cv.notify_all();
      if (worker.joinable()) worker.join();
    }

    std::string enqueue(std::vector<double> ref) {
      std::lock_guard lock(mu);
      std::string token = "r" + std::to_string(++next_token);
      results[token] = nullptr;
      queue.emplace_back(token, std::move(ref));
      cv.notify_all();
      return token;
    }

    std::optional<json> lookup(const std::string& token) {
      std::lock_guard lock(mu);
      auto it = results.find(token);
      if (it == results.end()) return std::nullopt;
      return it->second;
    }

    std::shared_ptr<const std::vector<json>> snapshot() const { return std::atomic_load(&history); }

    void append(json entry) {
      auto next = std::make_shared<std::vector<json>>(*snapshot());
      next->push_back(std::move(entry));
      std::atomic_store(&history, std::shared_ptr<const std::vector<json>>(std::move(next)));
    }

    void wait_idle() {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return (queue.empty() && !busy) || stopping; });
    }

    void run() {
      std::unique_lock lock(mu);
      while (true) {
        cv.wait(lock, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        auto [token, ref] = std::move(queue.front());
        queue.pop_front();
        busy = true;
        lock.unlock();
        json e;
        try {
          e = solve_entry(doc, model, bounds, ref, solver);
        } catch (const std::exception& ex) {
          e = {{"reference", ref}, {"status", "error"}, {"error", ex.what()}};
        }
        e["token"] = token;
        e["index"] = snapshot()->size();
        e["timestamp"] = utc_timestamp();
        persist_entry(e);
        append(e);
        lock.lock();
        results[token] = std::move(e);
        busy = false;
        cv.notify_all();
      }
    }
  };

  std::shared_ptr<Session> find(const std::string& id) const {
    std::shared_lock lock(sessions_mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  std::string new_id() {
    std::lock_guard lock(id_mu_);
    std::ostringstream os;
    os << std::hex;
    while (true) {
      os.str("");
      os << "s" << id_rng_();
      std::shared_lock lock2(sessions_mu_);
      if (!sessions_.count(os.str())) return os.str();
    }
  }

  void load_state() {
    for (const auto& entry : std::filesystem::directory_iterator(options_.state_dir)) {
      if (entry.path().extension() != ".jsonl") continue;
      std::ifstream in(entry.path());
      std::string line;
      std::shared_ptr<Session> s;
      std::vector<json> entries;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
          j = json::parse(line);
        } catch (const json::exception&) {
          break;  // truncated tail from an interrupted write
        }
        if (j.value("type", "") == "session") {
          auto doc = document_from_tree(j.at("document"));
          auto model = doc.working_model();
          CriterionBounds b{j.at("bounds").at("z_min").get<std::vector<double>>(),
                            j.at("bounds").at("z_max").get<std::vector<double>>()};
          s = std::make_shared<Session>(j.at("id").get<std::string>(), std::move(doc), std::move(model), std::move(b),
                                        options_);
        } else if (s && j.value("type", "") == "entry") {
          entries.push_back(j.at("entry"));
        }
      }
      if (!s) continue;
      for (auto& e : entries) {
        const std::string token = e.value("token", "");
        s->results[token] = e;
      }
      s->next_token = entries.size();
      s->history = std::make_shared<const std::vector<json>>(std::move(entries));
      s->start();
      sessions_[s->id] = s;
    }
  }

  ServiceOptions options_;
  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex id_mu_;
  std::mt19937_64 id_rng_{std::random_device{}()};
};

}  // namespace refpoint
