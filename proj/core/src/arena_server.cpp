#include "simarena/arena_server.hpp"

#include <httplib.h>

#include "simarena/error.hpp"

namespace simarena {

using nlohmann::json;

json experiment_spec_to_json(const ExperimentSpec& spec) {
  json prompts = json::array();
  for (const auto& p : spec.prompts) {
    prompts.push_back({{"prompt_id", p.prompt_id}, {"text", p.text}, {"ptype", to_string(p.ptype)}});
  }
  json j{{"experiment_id", spec.experiment_id},
         {"prompts", prompts},
         {"method_ids", spec.method_ids},
         {"seed", spec.seed},
         {"profile_card", spec.profile_card},
         {"prompts_per_judge", spec.prompts_per_judge}};
  j["cohort"] = spec.cohort ? json(to_string(*spec.cohort)) : json(nullptr);
  return j;
}

ExperimentSpec experiment_spec_from_json(const json& j) {
  ExperimentSpec spec;
  spec.experiment_id = j.value("experiment_id", std::string{});
  for (const auto& p : j.at("prompts")) {
    spec.prompts.push_back({p.at("prompt_id").get<std::string>(), p.at("text").get<std::string>(),
                            parse_prompt_type(p.at("ptype").get<std::string>())});
  }
  spec.method_ids = j.at("method_ids").get<std::vector<std::string>>();
  spec.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("cohort") && !j["cohort"].is_null()) {
    spec.cohort = parse_cohort(j["cohort"].get<std::string>());
  }
  spec.profile_card = j.value("profile_card", std::string{});
  spec.prompts_per_judge = j.value("prompts_per_judge", std::size_t{0});
  return spec;
}

json session_to_json(const SessionInfo& s) {
  return {{"session_id", s.session_id},
          {"judge_id", s.judge_id},
          {"cohort", to_string(s.cohort)},
          {"experiment_id", s.experiment_id},
          {"assigned", s.assigned},
          {"completed", s.completed},
          {"remaining", s.assigned.size() - s.completed.size()},
          {"profile_shown", s.profile_shown}};
}

json next_item_to_json(const NextItem& item) {
  json j{{"done", item.done}, {"completed", item.completed}, {"total", item.total}};
  if (item.profile_card) j["profile_card"] = *item.profile_card;
  if (!item.done) {
    j["prompt_id"] = item.prompt_id;
    j["prompt"] = item.prompt_text;
    json entries = json::array();
    for (const auto& [label, text] : item.entries) entries.push_back({{"label", label}, {"text", text}});
    j["candidates"] = std::move(entries);
  }
  return j;
}

struct ArenaServer::Impl {
  httplib::Server server;
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  reply(res, status, {{"code", code}, {"message", message}});
}

// Runs `fn` and maps exceptions onto error documents.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const ArenaError& e) {
    reply_error(res, e.http_status(), e.code(), e.what());
  } catch (const json::exception& e) {
    reply_error(res, 400, "invalid_request", e.what());
  } catch (const DataError& e) {
    reply_error(res, 400, "invalid_request", e.what());
  } catch (const std::exception& e) {
    reply_error(res, 500, "internal", e.what());
  }
}

json parse_body(const httplib::Request& req) {
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ArenaError("invalid_request", "body must be a JSON object");
  return j;
}

}  // namespace

ArenaServer::ArenaServer(ArenaService& service) : impl_(std::make_unique<Impl>()), service_(service) {
  auto& srv = impl_->server;

  srv.Post("/experiments", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = service_.create_experiment(experiment_spec_from_json(parse_body(req)));
      reply(res, 201, {{"experiment_id", id}});
    });
  });

  srv.Get(R"(/experiments/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, experiment_spec_to_json(service_.experiment(req.matches[1]))); });
  });

  srv.Post(R"(/experiments/([^/]+)/pools)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      std::vector<GenerationRecord> records;
      for (const auto& r : body.at("records")) records.push_back(GenerationRecord::from_json(r));
      const auto truths = body.at("truths").get<std::map<std::string, std::string>>();
      const std::string id = req.matches[1];
      service_.build_pools(id, records, truths);
      reply(res, 201, {{"experiment_id", id}, {"pools", service_.experiment(id).prompts.size()}});
    });
  });

  srv.Get(R"(/experiments/([^/]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, service_.report(req.matches[1])); });
  });

  srv.Get(R"(/experiments/([^/]+)/ballots)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      service_.experiment(id);
      json out = json::array();
      for (const auto& b : service_.ballots(id)) out.push_back(b.to_json());
      reply(res, 200, out);
    });
  });

  srv.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      const auto s = service_.create_session(body.at("judge_id").get<std::string>(),
                                             parse_cohort(body.at("cohort").get<std::string>()),
                                             body.value("experiment_id", std::string{}));
      reply(res, 201, session_to_json(s));
    });
  });

  srv.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, session_to_json(service_.session(req.matches[1]))); });
  });

  srv.Get(R"(/sessions/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, next_item_to_json(service_.next(req.matches[1]))); });
  });

  srv.Post(R"(/sessions/([^/]+)/ballots)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      const auto s = service_.submit(req.matches[1], body.at("prompt_id").get<std::string>(),
                                     body.at("ranking").get<std::map<std::string, int>>());
      reply(res, 201, session_to_json(s));
    });
  });

  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      reply_error(res, res.status, res.status == 404 ? "not_found" : "error", "no such route");
    }
  });
}

ArenaServer::~ArenaServer() { stop(); }

int ArenaServer::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  host_ = host;
  port_ = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) throw IoError(host + ":" + std::to_string(port), "cannot bind arena server");
  thread_ = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return port_;
}

void ArenaServer::listen_blocking(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!impl_->server.listen(host, port)) {
    throw IoError(host + ":" + std::to_string(port), "cannot bind arena server");
  }
}

void ArenaServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string ArenaServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

}  // namespace simarena
