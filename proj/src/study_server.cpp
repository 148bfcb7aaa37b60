#include "lfqa/study_server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace lfqa {

using nlohmann::json;

namespace {

WireResponse json_response(int status, const json& body) { return WireResponse{status, body.dump(), "application/json"}; }

WireResponse error(int status, const std::string& message) { return json_response(status, json{{"error", message}}); }

json parse_body(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError("request body must be a JSON object");
  return j;
}

std::string body_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw DataError(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

WireResponse route(Study& study, const WireRequest& req) {
  const bool get = req.method == "GET";
  const bool post = req.method == "POST";
  auto query = [&](const char* key) -> std::optional<std::string> {
    auto it = req.query.find(key);
    if (it == req.query.end()) return std::nullopt;
    return it->second;
  };

  if (get && req.path == "/api/config") {
    return json_response(200, json{{"instructions", study.instructions()},
                                   {"annotators_per_cell", study.annotators_per_cell()}});
  }
  if (get && req.path == "/api/task") {
    auto annotator = query("annotator");
    if (!annotator || annotator->empty()) return error(400, "missing query parameter 'annotator'");
    auto a = study.assign_task(*annotator);
    if (!a) return WireResponse{204, "", "application/json"};
    return json_response(200, to_json(*a));
  }
  if (post && req.path == "/api/stage1") {
    auto j = parse_body(req.body);
    auto id = body_string(j, "assignment_id");
    auto fluency = parse_yes_no(body_string(j, "fluency"));
    auto adequacy = parse_ternary(body_string(j, "adequacy"));
    return json_response(200, json{{"long_answer", study.submit_stage1(id, fluency, adequacy)}});
  }
  if (post && req.path == "/api/stage2") {
    auto j = parse_body(req.body);
    auto id = body_string(j, "assignment_id");
    auto faithfulness = parse_yes_no(body_string(j, "faithfulness"));
    auto long_adequacy = parse_ternary(body_string(j, "long_adequacy"));
    study.submit_stage2(id, faithfulness, long_adequacy);
    return json_response(200, json{{"status", "complete"}});
  }
  if (get && req.path == "/api/report") {
    ReportOptions opts;
    auto mode = query("mode").value_or("both");
    auto partial = query("partial").value_or("0");
    opts.partial = partial == "1" || partial == "true";
    const auto snap = study.snapshot();
    try {
      if (mode == "both") {
        opts.mode = AggregationMode::per_response;
        auto per = aggregate_report(snap, opts);
        opts.mode = AggregationMode::majority;
        auto maj = aggregate_report(snap, opts);
        return json_response(200, json{{"per-response", to_json(per)}, {"majority", to_json(maj)}});
      }
      opts.mode = parse_mode(mode);
      return json_response(200, to_json(aggregate_report(snap, opts)));
    } catch (const ConfigError& e) {
      return error(400, e.what());
    } catch (const DataError& e) {
      return error(409, e.what());
    }
  }
  if (get && req.path == "/api/export") {
    return WireResponse{200, study.export_log(), "application/x-ndjson"};
  }
  if (get && req.path == "/api/selection") {
    auto id = query("example_id");
    if (!id) return error(400, "missing query parameter 'example_id'");
    auto [question, sentences] = study.selection_item(*id);
    return json_response(200, json{{"example_id", *id}, {"question", question}, {"sentences", sentences}});
  }
  if (post && req.path == "/api/selection") {
    auto j = parse_body(req.body);
    auto annotator = body_string(j, "annotator_id");
    auto example = body_string(j, "example_id");
    auto sel = j.find("selected");
    if (sel == j.end() || !sel->is_array()) throw DataError("missing array field 'selected'");
    std::set<std::size_t> selected;
    for (const auto& v : *sel) {
      if (!v.is_number_unsigned()) throw DataError("'selected' must hold non-negative integers");
      selected.insert(v.get<std::size_t>());
    }
    study.submit_selection(annotator, example, selected);
    return json_response(200, json{{"status", "recorded"}});
  }
  return error(404, "no route for " + req.method + " " + req.path);
}

}  // namespace

WireResponse handle_request(Study& study, const WireRequest& request, const std::string& bearer_token) {
  if (!bearer_token.empty() && request.authorization != "Bearer " + bearer_token) {
    return error(401, "missing or invalid bearer token");
  }
  try {
    return route(study, request);
  } catch (const UnknownAssignment& e) {
    return error(404, e.what());
  } catch (const ProtocolError& e) {
    return error(409, e.what());
  } catch (const DataError& e) {
    return error(400, e.what());
  } catch (const std::exception& e) {
    spdlog::error("study server: {}", e.what());
    return error(500, "internal error");
  }
}

StudyServer::StudyServer(Study& study, ServerOptions options)
    : study_(study), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    WireRequest w;
    w.method = req.method;
    w.path = req.path;
    for (const auto& [k, v] : req.params) w.query.emplace(k, v);
    w.body = req.body;
    w.authorization = req.get_header_value("Authorization");
    auto out = handle_request(study_, w, options_.bearer_token);
    res.status = out.status;
    if (out.status != 204) res.set_content(out.body, out.content_type);
  };
  server_->Get(R"(/api/.*)", handler);
  server_->Post(R"(/api/.*)", handler);
}

StudyServer::~StudyServer() { stop(); }

int StudyServer::bind() {
  int port = options_.port == 0 ? server_->bind_to_any_port(options_.host)
                                : (server_->bind_to_port(options_.host, options_.port) ? options_.port : -1);
  if (port < 0) throw ConfigError("cannot bind " + options_.host + ":" + std::to_string(options_.port));
  return port;
}

void StudyServer::serve() { server_->listen_after_bind(); }

void StudyServer::stop() {
  if (server_) server_->stop();
}

}  // namespace lfqa
