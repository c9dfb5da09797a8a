#include "evidencedesk/api.hpp"

#ifdef EVIDENCEDESK_WITH_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

namespace evidencedesk::api {

HttpReply error_reply(int status, std::string_view code, std::string_view message) {
  const nlohmann::json body{{"error", {{"code", code}, {"message", message}}}};
  return {status, body.dump()};
}

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kSchema:
    case ErrorCode::kParse:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kDuplicateKey:
      return 409;
    case ErrorCode::kTransport:
    case ErrorCode::kTimeout:
    case ErrorCode::kRateLimited:
      return 503;
    case ErrorCode::kMalformedResponse:
      return 502;
    default:
      return 500;
  }
}

namespace {

HttpReply from_error(const Error& e) {
  return error_reply(http_status_for(e.code()), to_string(e.code()), e.what());
}

nlohmann::json parse_body(std::string_view body) {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("body is not valid JSON: ") + e.what());
  }
}

}  // namespace

Service::Service(Engine& engine, std::shared_ptr<dataset::RatingsLog> ratings,
                 std::optional<dataset::BenchmarkSet> benchmark)
    : engine_(engine), ratings_(std::move(ratings)), benchmark_(std::move(benchmark)) {}

HttpReply Service::handle(std::string_view method, std::string_view path,
                          std::string_view body) {
  constexpr std::string_view kTraces = "/v1/traces/";
  try {
    if (path == "/v1/ask") {
      if (method != "POST") return error_reply(405, "method_not_allowed", "use POST");
      return ask(body);
    }
    if (path == "/v1/ratings") {
      if (method != "POST") return error_reply(405, "method_not_allowed", "use POST");
      return rate(body);
    }
    if (path.starts_with(kTraces)) {
      if (method != "GET") return error_reply(405, "method_not_allowed", "use GET");
      return trace(path.substr(kTraces.size()));
    }
    if (path == "/v1/benchmark") {
      if (method != "GET") return error_reply(405, "method_not_allowed", "use GET");
      return benchmark();
    }
    if (path == "/v1/health") {
      if (method != "GET") return error_reply(405, "method_not_allowed", "use GET");
      return health();
    }
    return error_reply(404, "not_found", "no route for " + std::string(path));
  } catch (const pipeline::StageError& e) {
    auto reply = from_error(e);
    auto j = nlohmann::json::parse(reply.body);
    j["error"]["stage"] = e.stage();
    j["error"]["trace_id"] = e.trace_id();
    reply.body = j.dump();
    return reply;
  } catch (const Error& e) {
    return from_error(e);
  } catch (const std::exception& e) {
    return error_reply(500, "internal", e.what());
  }
}

HttpReply Service::ask(std::string_view body) {
  const auto request = AskRequest::from_json(parse_body(body));
  const auto result = engine_.ask(request);
  nlohmann::json out;
  if (result.refusal) {
    out = {{"status", "refused"}, {"refusal", pipeline::to_json(*result.refusal)}};
  } else {
    out = {{"status", "done"}, {"response", pipeline::to_json(*result.answer)}};
  }
  out["trace_id"] = result.trace.trace_id;
  return {200, out.dump()};
}

HttpReply Service::trace(std::string_view id) {
  const std::string trace_id(id);
  if (auto doc = engine_.trace(trace_id)) return {200, doc->dump()};
  return error_reply(404, "not_found", "unknown trace '" + trace_id + "'");
}

HttpReply Service::rate(std::string_view body) {
  if (!ratings_) return error_reply(503, "unavailable", "no ratings log configured");
  const auto j = parse_body(body);
  if (!j.is_object()) throw Error(ErrorCode::kSchema, "rating must be a JSON object");
  dataset::LikertRating r;
  try {
    r.rater_id = j.at("rater_id").get<std::string>();
    r.item_id = j.at("item_id").get<std::string>();
    r.axis_id = j.at("axis_id").get<std::string>();
    r.value = j.at("value").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchema,
                std::string("rating needs rater_id, item_id, axis_id and integer value: ") +
                    e.what());
  }
  if (!j.at("value").is_number_integer()) {
    throw Error(ErrorCode::kSchema, "rating value must be an integer");
  }
  dataset::check_rating(r);
  ratings_->append(std::span<const dataset::LikertRating>(&r, 1));
  const nlohmann::json out{{"status", "recorded"},
                           {"rating",
                            {{"rater_id", r.rater_id},
                             {"item_id", r.item_id},
                             {"axis_id", r.axis_id},
                             {"value", r.value}}}};
  return {201, out.dump()};
}

HttpReply Service::benchmark() const {
  if (!benchmark_) return error_reply(404, "not_found", "no benchmark configured");
  return {200, nlohmann::json::parse(dataset::serialize_benchmark(*benchmark_)).dump()};
}

HttpReply Service::health() const {
  const nlohmann::json out{{"status", "ok"},
                           {"ratings", static_cast<bool>(ratings_)},
                           {"benchmark", benchmark_ ? benchmark_->total() : 0}};
  return {200, out.dump()};
}

struct HttpServer::Impl {
  httplib::Server server;
  Service& service;
  explicit Impl(Service& s) : service(s) {}
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const auto reply = impl_->service.handle(req.method, req.path, req.body);
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  };
  impl_->server.Get(R"(/v1/.*)", route);
  impl_->server.Post(R"(/v1/.*)", route);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace evidencedesk::api
