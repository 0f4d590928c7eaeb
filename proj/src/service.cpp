#include "catrag/service.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <mutex>
#include <semaphore>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "catrag/log.hpp"
#include "catrag/text.hpp"
#include "catrag/wire.hpp"

namespace catrag {

using nlohmann::json;

namespace {

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyQuery: return 422;
    case ErrorCode::GenerationUnavailable: return 503;
    case ErrorCode::ConfigError: return 400;
    default: return 500;
  }
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_object(const httplib::Request& req) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::exception&) {
    throw HttpError{400, "BadRequest", "body is not valid JSON"};
  }
  if (!body.is_object()) throw HttpError{400, "BadRequest", "body must be a JSON object"};
  return body;
}

std::size_t positive_field(const json& body, const char* field, std::size_t fallback) {
  if (!body.contains(field)) return fallback;
  const auto& v = body[field];
  if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
    throw HttpError{400, "BadRequest", std::string("field '") + field + "' must be a positive integer"};
  }
  return v.get<std::size_t>();
}

}  // namespace

struct Service::Impl {
  Impl(std::shared_ptr<const Engine> e, EngineConfig c)
      : engine(std::move(e)),
        config(std::move(c)),
        query_slots(static_cast<std::ptrdiff_t>(config.server.max_concurrent_queries)) {
    if (!config.request_log.empty() && config.request_log != "-") {
      request_log.open(config.request_log, std::ios::app);
      if (!request_log) log::warn("cannot open request log " + config.request_log);
    }
    routes();
  }

  void log_request(const json& line) {
    if (config.request_log.empty()) return;
    std::lock_guard lock(log_mutex);
    if (config.request_log == "-") {
      std::clog << line.dump() << '\n';
    } else if (request_log) {
      request_log << line.dump() << '\n';
      request_log.flush();
    }
  }

  template <typename Handler>
  httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const HttpError& e) {
        reply(res, e.status, wire::error_envelope(e.code, e.message));
      } catch (const Error& e) {
        reply(res, status_for(e.code()), wire::error_envelope(to_string(e.code()), e.what()));
      } catch (const std::exception& e) {
        reply(res, 500, wire::error_envelope("Internal", e.what()));
      }
    };
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", config.server.cors_origin},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        res.set_content(wire::error_envelope(res.status == 404 ? "NotFound" : "HttpError",
                                             httplib::status_message(res.status))
                            .dump(),
                        "application/json");
      }
    });

    server.Get("/api/health", guarded([this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200,
            {{"status", "ok"},
             {"graph", wire::to_json(engine->graph().stats())},
             {"vstore", {{"count", engine->store().size()}, {"dim", engine->store().dim()}}}});
    }));

    server.Get("/api/graph/stats", guarded([this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, wire::to_json(engine->graph().stats()));
    }));

    server.Get("/api/categories", guarded([this](const httplib::Request&, httplib::Response& res) {
      json out = json::array();
      const auto& cats = engine->graph().categories();
      for (const auto& label : engine->router().labels()) {
        auto it = cats.find(label.name);
        out.push_back({{"name", label.name}, {"id", label.id}, {"chunks", it == cats.end() ? 0 : it->second.size()}});
      }
      reply(res, 200, {{"categories", out}});
    }));

    server.Post("/api/classify", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_object(req);
      if (!body.contains("text") || !body["text"].is_string()) {
        throw HttpError{400, "BadRequest", "field 'text' must be a string"};
      }
      const auto prediction = engine->router().predict(engine->prepare(body["text"].get<std::string>()));
      reply(res, 200, wire::to_json(prediction, engine->router()));
    }));

    server.Post("/api/query", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_object(req);
      if (!body.contains("query") || !body["query"].is_string()) {
        throw HttpError{400, "BadRequest", "field 'query' must be a string"};
      }
      const auto q = body["query"].get<std::string>();
      QueryConfig qc = config.query;
      qc.k_vec = positive_field(body, "k_vec", qc.k_vec);
      qc.k_graph = positive_field(body, "k_graph", qc.k_graph);
      if (body.contains("sim_threshold")) {
        const auto& t = body["sim_threshold"];
        if (!t.is_number() || t.get<double>() < 0.0 || t.get<double>() > 1.0) {
          throw HttpError{400, "BadRequest", "field 'sim_threshold' must be a number in [0, 1]"};
        }
        qc.sim_threshold = t.get<double>();
      }
      if (body.contains("mode")) {
        const auto mode = body["mode"].is_string() ? parse_mode(body["mode"].get<std::string>()) : std::nullopt;
        if (!mode) throw HttpError{400, "BadRequest", "field 'mode' must be \"catrag\" or \"rag\""};
        qc.mode = *mode;
      }
      if (text::canonicalize(q).empty()) throw HttpError{422, "EmptyQuery", "query is empty"};

      if (!query_slots.try_acquire()) {
        throw HttpError{429, "TooManyRequests", "concurrent query limit reached"};
      }
      struct Release {
        std::counting_semaphore<>& sem;
        ~Release() { sem.release(); }
      } release{query_slots};

      json log_line{{"query", q}, {"mode", std::string(to_string(qc.mode))}};
      try {
        const auto result = engine->query(q, qc);
        log_line["status"] = 200;
        log_line["label"] = result.label ? json(result.label->name) : json(nullptr);
        log_line["timings"] = wire::to_json(result.timings);
        log_request(log_line);
        reply(res, 200, wire::to_json(result, engine->graph()));
      } catch (const GenerationFailure& e) {
        log_line["status"] = 503;
        log_line["timings"] = wire::to_json(e.evidence().timings);
        log_request(log_line);
        auto out = wire::error_envelope(to_string(e.code()), e.what());
        out["result"] = wire::to_json(e.evidence(), engine->graph());
        reply(res, 503, out);
      }
    }));

    server.Get("/api/graph/neighbors", guarded([this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_param("entity")) throw HttpError{400, "BadRequest", "query parameter 'entity' is required"};
      const auto entity = text::canonicalize(req.get_param_value("entity"));
      std::size_t limit = 50;
      if (req.has_param("limit")) {
        try {
          const long v = std::stol(req.get_param_value("limit"));
          if (v < 1) throw std::invalid_argument("limit");
          limit = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
          throw HttpError{400, "BadRequest", "query parameter 'limit' must be a positive integer"};
        }
      }
      json rels = json::array();
      for (const auto& r : engine->graph().neighbors(entity, limit)) rels.push_back(wire::to_json(r));
      const bool known = engine->graph().entities().contains(entity);
      reply(res, 200, {{"entity", entity}, {"known", known}, {"relations", rels}});
    }));
  }

  std::shared_ptr<const Engine> engine;
  EngineConfig config;
  httplib::Server server;
  std::counting_semaphore<> query_slots;
  std::mutex log_mutex;
  std::ofstream request_log;
};

Service::Service(std::shared_ptr<const Engine> engine, EngineConfig config)
    : impl_(std::make_unique<Impl>(std::move(engine), std::move(config))) {}

Service::~Service() { stop(); }

bool Service::listen() { return impl_->server.listen(impl_->config.server.host, impl_->config.server.port); }

int Service::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace catrag
