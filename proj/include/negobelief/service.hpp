#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "negobelief/session.hpp"

namespace negobelief {

inline constexpr const char* kApiPrefix = "/v1";

namespace service_detail {

using nlohmann::json;

inline Posterior posterior_from(const json& j, const IssueDomain& d) {
  Posterior::Array a{};
  if (j.is_array()) {
    if (j.size() != kOrderingCount) throw ValidationError("posterior needs exactly 6 entries");
    for (std::size_t i = 0; i < kOrderingCount; ++i) a[i] = j[i].get<double>();
  } else if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto o = Ordering::parse_label(it.key(), d);
      if (!o) throw ValidationError("unknown ordering label '" + it.key() + "'");
      a[o->index()] = it.value().get<double>();
    }
  } else {
    throw ValidationError("posterior must be an array or a labeled object");
  }
  return Posterior::from_probs(a);
}

// Session config from a create request; unspecified fields keep the
// manager defaults.
inline SessionConfig config_from(const json& j, const SessionConfig& defaults) {
  SessionConfig c = defaults;
  c.session_id = j.value("session_id", std::string());
  const IssueDomain& d = c.domain;
  if (j.contains("agent_priorities")) c.agent_priorities = corpus_json::priorities_from_json(j["agent_priorities"], d);
  if (j.contains("human_priorities") && !j["human_priorities"].is_null())
    c.human_priorities = corpus_json::priorities_from_json(j["human_priorities"], d);
  if (j.contains("lambda")) c.planner.lambda = j["lambda"].get<double>();
  if (j.contains("accept_margin")) c.planner.accept_margin = j["accept_margin"].get<double>();
  if (j.contains("accept_floor")) c.planner.accept_floor = j["accept_floor"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("retention")) c.retention = j["retention"].get<double>();
  if (j.contains("prior")) c.belief.prior = posterior_from(j["prior"], d);
  if (j.contains("likelihood_temperature")) c.belief.likelihood_temperature = j["likelihood_temperature"].get<double>();
  if (j.contains("posterior_temperature")) c.belief.posterior_temperature = j["posterior_temperature"].get<double>();
  return c;
}

inline void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void reply_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
  reply_json(res, status, json{{"error", kind}, {"message", message}});
}

}  // namespace service_detail

// HTTP front end over a SessionManager. Request and response bodies are JSON.
class SessionService {
 public:
  explicit SessionService(std::shared_ptr<SessionManager> manager) : manager_(std::move(manager)) { routes(); }

  ~SessionService() { stop(); }

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  // Serves on the calling thread until stop() is called elsewhere.
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }

  void stop() {
    stopping_ = true;
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  SessionManager& manager() { return *manager_; }

 private:
  using json = nlohmann::json;

  void guarded(httplib::Response& res, const std::function<void()>& body) {
    try {
      body();
    } catch (const ProtocolError& e) {
      service_detail::reply_error(res, 409, "protocol", e.what());
    } catch (const ValidationError& e) {
      service_detail::reply_error(res, 400, "validation", e.what());
    } catch (const json::exception& e) {
      service_detail::reply_error(res, 400, "validation", e.what());
    } catch (const std::exception& e) {
      service_detail::reply_error(res, 500, "internal", e.what());
    }
  }

  bool known(const std::string& id, httplib::Response& res) {
    if (manager_->contains(id)) return true;
    service_detail::reply_error(res, 404, "not_found", "unknown session '" + id + "'");
    return false;
  }

  void routes() {
    const std::string p = kApiPrefix;
    const std::string sid = p + R"(/sessions/([A-Za-z0-9_\-\.]+))";

    server_.Post(p + "/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = req.body.empty() ? json::object() : json::parse(req.body);
        const std::string id = manager_->create(service_detail::config_from(body, manager_->defaults()));
        service_detail::reply_json(res, 201, {{"session_id", id}, {"state", session_json::state(manager_->snapshot(id))}});
      });
    });

    server_.Post(sid + "/events", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!known(id, res)) return;
      guarded(res, [&] {
        const auto domain = manager_->snapshot(id).config.domain;
        const auto reply = manager_->post(id, session_json::event_from(json::parse(req.body), domain));
        const Session s = manager_->snapshot(id);
        service_detail::reply_json(res, 200, {{"reply", session_json::action(reply, domain)}, {"state", session_json::state(s)}});
      });
    });

    server_.Get(sid, [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!known(id, res)) return;
      guarded(res, [&] { service_detail::reply_json(res, 200, session_json::state(manager_->snapshot(id))); });
    });

    server_.Get(sid + "/menu", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!known(id, res)) return;
      guarded(res, [&] {
        std::size_t top_k = 10;
        if (req.has_param("top_k")) {
          const long long k = std::stoll(req.get_param_value("top_k"));
          if (k < 1) throw ValidationError("top_k must be >= 1");
          top_k = static_cast<std::size_t>(k);
        }
        const Session s = manager_->snapshot(id);
        auto menu = score_menu(s.belief, s.config.agent_priorities, s.config.planner, s.config.domain);
        if (menu.size() > top_k) menu.resize(top_k);
        service_detail::reply_json(res, 200, {{"menu", session_json::menu(menu, s.config.domain)}});
      });
    });

    server_.Post(sid + "/whatif", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!known(id, res)) return;
      guarded(res, [&] {
        const Session s = manager_->snapshot(id);
        const json body = req.body.empty() ? json::object() : json::parse(req.body);
        Hypothetical h;
        if (body.contains("posterior")) h.posterior = service_detail::posterior_from(body["posterior"], s.config.domain);
        if (body.contains("lambda")) h.lambda = body["lambda"].get<double>();
        if (body.contains("offer") && !body["offer"].is_null())
          h.offer = corpus_json::allocation_from_json(body["offer"], s.config.domain);
        const auto top_k = body.value("top_k", std::size_t{3});
        const auto preview = whatif(s, h, top_k);
        service_detail::reply_json(res, 200,
                                   {{"menu", session_json::menu(preview.menu, s.config.domain)},
                                    {"action", session_json::action(preview.action, s.config.domain)}});
      });
    });

    server_.Get(sid + "/trajectory", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!known(id, res)) return;
      guarded(res, [&] { service_detail::reply_json(res, 200, session_json::trajectory(manager_->snapshot(id))); });
    });

    server_.Get(sid + "/score", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!known(id, res)) return;
      guarded(res, [&] {
        const Session s = manager_->snapshot(id);
        service_detail::reply_json(res, 200, session_json::score(score_session(s), s.config.domain));
      });
    });

    server_.Get(sid + "/log", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!known(id, res)) return;
      guarded(res, [&] { service_detail::reply_json(res, 200, session_json::log(manager_->snapshot(id))); });
    });

    // Server-sent events: the current state, then one event per revision
    // until the session closes or the client disconnects.
    server_.Get(sid + "/stream", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!known(id, res)) return;
      auto last = std::make_shared<std::optional<std::size_t>>();
      res.set_chunked_content_provider("text/event-stream", [this, id, last](size_t, httplib::DataSink& sink) {
        std::optional<Session> s;
        if (!*last) {
          s = manager_->snapshot(id);
        } else {
          s = manager_->wait_for_change(id, **last, std::chrono::milliseconds(200));
        }
        if (stopping_) {
          sink.done();
          return true;
        }
        if (s) {
          *last = s->version();
          const std::string frame = "event: state\ndata: " + session_json::state(*s).dump() + "\n\n";
          if (!sink.write(frame.data(), frame.size())) return false;
          if (is_closed(s->phase)) sink.done();
        }
        return sink.is_writable();
      });
    });
  }

  std::shared_ptr<SessionManager> manager_;
  httplib::Server server_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
};

}  // namespace negobelief
