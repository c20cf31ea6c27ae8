#include "prospector/http.hpp"

#include <regex>

#include <httplib.h>

namespace prospector::service {

namespace {

HttpResponse error(int status, const std::string& code, const std::string& message, Json fields = nullptr) {
  Json e{{"code", code}, {"message", message}};
  if (!fields.is_null()) e["fields"] = std::move(fields);
  return {status, Json{{"error", e}}};
}

Json parse_body(const std::string& body) {
  if (body.empty()) return Json::object();
  try {
    return Json::parse(body);
  } catch (const Json::parse_error& e) {
    throw ValidationError("body", std::string("malformed JSON: ") + e.what());
  }
}

HttpResponse route(SessionStore& store, const std::string& method, const std::string& path, const std::string& body) {
  static const std::regex session_re(R"(^/sessions/([^/]+)(?:/([a-z]+))?/?$)");
  if (path == "/health" && method == "GET") return {200, Json{{"status", "ok"}}};
  if (path == "/sessions" || path == "/sessions/") {
    if (method != "POST") return error(405, "method_not_allowed", method + " " + path);
    const Json req = parse_body(body);
    if (!req.is_object()) throw ValidationError("body", "must be a JSON object");
    std::optional<std::string> id;
    if (req.contains("id")) {
      if (!req.at("id").is_string()) throw ValidationError("id", "must be a string");
      id = req.at("id").get<std::string>();
    }
    auto s = store.create(req.value("config", Json::object()), id);
    std::lock_guard lock(s->mutex());
    return {201, s->summary()};
  }
  std::smatch m;
  if (!std::regex_match(path, m, session_re)) return error(404, "not_found", "no route for " + path);
  const std::string id = m[1];
  const std::string sub = m[2];
  if (sub.empty() && method == "GET") return {200, store.read(id, [](Session& s) { return s.summary(); })};
  if (sub == "belief" && method == "GET") return {200, store.read(id, [](Session& s) { return s.belief_summary(); })};
  if (sub == "falsification" && method == "GET")
    return {200, store.read(id, [](Session& s) { return s.falsification(); })};
  if (sub == "recommendation" && method == "GET")
    return {200, store.mutate(id, [](Session& s) { return s.recommendation(); })};
  if (sub == "observations" && method == "POST") {
    const Json req = parse_body(body);
    return {200, store.mutate(id, [&](Session& s) { return s.add_observation(req); })};
  }
  if (sub == "decision" && method == "POST") {
    const Json req = parse_body(body);
    if (!req.is_object() || !req.contains("decision") || !req.at("decision").is_string())
      throw ValidationError("decision", "required string 'develop' or 'abandon'");
    const auto d = req.at("decision").get<std::string>();
    return {200, store.mutate(id, [&](Session& s) { return s.record_decision(d); })};
  }
  if (sub.empty() || sub == "belief" || sub == "falsification" || sub == "recommendation" || sub == "observations" ||
      sub == "decision")
    return error(405, "method_not_allowed", method + " " + path);
  return error(404, "not_found", "no route for " + path);
}

}  // namespace

HttpResponse handle_request(SessionStore& store, const std::string& method, const std::string& path,
                            const std::string& body) {
  try {
    return route(store, method, path, body);
  } catch (const ValidationError& e) {
    Json fields = Json::array();
    for (const auto& f : e.errors()) fields.push_back(Json{{"field", f.field}, {"message", f.message}});
    return error(400, "validation", e.what(), fields);
  } catch (const NotFound& e) {
    return error(404, "not_found", e.what());
  } catch (const Conflict& e) {
    return error(409, "conflict", e.what());
  } catch (const std::exception& e) {
    return error(500, "internal", e.what());
  }
}

bool serve(SessionStore& store, const std::string& host, int port) {
  httplib::Server server;
  auto dispatch = [&store](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = handle_request(store, req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Get(".*", dispatch);
  server.Post(".*", dispatch);
  server.Put(".*", dispatch);
  server.Delete(".*", dispatch);
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  return server.listen(host, port);
}

}  // namespace prospector::service
