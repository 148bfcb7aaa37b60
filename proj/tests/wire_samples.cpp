// Drives a small study through every wire route and prints one JSON line per
// payload: {"schema": <$defs name>, "valid": <expected>, "instance": ...}.
// tests/validate_wire.py checks each line against schemas/study_wire.json.

#include <iostream>
#include <sstream>

#include "lfqa/study_server.hpp"

using namespace lfqa;
using nlohmann::json;

namespace {

std::int64_t fake_now = 1000;

void emit(const std::string& schema, const json& instance, bool valid = true) {
  std::cout << json{{"schema", schema}, {"valid", valid}, {"instance", instance}}.dump() << '\n';
}

json call(Study& s, const std::string& method, const std::string& path, std::map<std::string, std::string> query,
          const json& body, int expect) {
  auto r = handle_request(s, WireRequest{method, path, std::move(query), body.is_null() ? "" : body.dump(), ""});
  if (r.status != expect) {
    throw std::runtime_error(method + " " + path + " returned " + std::to_string(r.status) + ": " + r.body);
  }
  return r.body.empty() ? json() : json::parse(r.body);
}

// A request the schema must reject and the server must answer with `status`.
void reject(Study& s, const std::string& path, const std::string& schema, const json& body, int status) {
  emit(schema, body, false);
  call(s, "POST", path, {}, body, status);
}

}  // namespace

int main() {
  try {
    std::vector<StudyItem> items;
    for (int i = 0; i < 2; ++i) {
      StudyItem it;
      it.example_id = "ex" + std::to_string(i);
      it.question = "Why does thing " + std::to_string(i) + " happen?";
      it.long_answer = "Because of a cause. The cause has effects.";
      it.variants = {{"gold", "Because of a cause."}, {"abstractive", "A cause makes it happen."}};
      items.push_back(it);
    }
    StudyConfig cfg;
    cfg.annotators_per_cell = 2;
    cfg.lease_seconds = 1;
    cfg.instructions = json{{"stage1", "Read the summary."}, {"stage2", "Now read the answer."}};
    auto study = Study::create(items, cfg, {}, [] { return fake_now; });
    Study& s = *study;

    emit("config_response", call(s, "GET", "/api/config", {}, nullptr, 200));
    emit("error_response", call(s, "GET", "/api/nowhere", {}, nullptr, 404));

    // An abandoned assignment, released once its lease runs out.
    call(s, "GET", "/api/task", {{"annotator", "idle"}}, nullptr, 200);
    fake_now += 5000;

    std::map<std::string, int> turn;
    for (int w = 0; w < 10; ++w) {
      const std::string who = "w" + std::to_string(w);
      for (;;) {
        auto r = handle_request(s, WireRequest{"GET", "/api/task", {{"annotator", who}}, "", ""});
        if (r.status == 204) break;
        auto task = json::parse(r.body);
        emit("task_response", task);
        emit("task_stage1", task);
        const std::string id = task["assignment_id"];
        const int k = turn[who]++;

        json s1{{"assignment_id", id}, {"fluency", k % 2 ? "No" : "Yes"}, {"adequacy", k % 3 ? "Partially" : "Yes"}};
        emit("stage1_request", s1);
        emit("stage1_response", call(s, "POST", "/api/stage1", {}, s1, 200));

        auto again = call(s, "GET", "/api/task", {{"annotator", who}}, nullptr, 200);
        emit("task_stage2", again);
        emit("task_stage1", again, false);

        json s2{{"assignment_id", id}, {"faithfulness", "Yes"}, {"long_adequacy", w % 2 ? "Yes" : "No"}};
        emit("stage2_request", s2);
        emit("stage2_response", call(s, "POST", "/api/stage2", {}, s2, 200));
      }
    }

    reject(s, "/api/stage1", "stage1_request", json{{"assignment_id", "a2"}, {"fluency", "yes"}, {"adequacy", "Yes"}}, 400);
    reject(s, "/api/stage1", "stage1_request", json{{"assignment_id", "a2"}, {"fluency", "Yes"}}, 400);
    reject(s, "/api/stage2", "stage2_request",
           json{{"assignment_id", "a2"}, {"faithfulness", "Yes"}, {"long_adequacy", "Mostly"}}, 400);

    auto item = call(s, "GET", "/api/selection", {{"example_id", "ex1"}}, nullptr, 200);
    emit("selection_item_response", item);
    json sel{{"annotator_id", "w0"}, {"example_id", "ex1"}, {"selected", {0}}};
    emit("selection_request", sel);
    emit("selection_response", call(s, "POST", "/api/selection", {}, sel, 200));
    reject(s, "/api/selection", "selection_request",
           json{{"annotator_id", "w0"}, {"example_id", "ex1"}, {"selected", json::array()}}, 400);
    reject(s, "/api/selection", "selection_request",
           json{{"annotator_id", "w0"}, {"example_id", "ex1"}, {"selected", {-1}}}, 400);

    emit("report_response", call(s, "GET", "/api/report", {{"mode", "per-response"}}, nullptr, 200));
    emit("report_response", call(s, "GET", "/api/report", {{"mode", "majority"}}, nullptr, 200));
    emit("report_both_response", call(s, "GET", "/api/report", {}, nullptr, 200));

    auto exported = handle_request(s, WireRequest{"GET", "/api/export", {}, "", ""});
    std::istringstream lines(exported.body);
    std::string line;
    std::set<std::string> types;
    while (std::getline(lines, line)) {
      auto e = json::parse(line);
      types.insert(e["type"].get<std::string>());
      emit("log_event", e);
    }
    for (const char* t : {"study", "assign", "stage1", "stage2", "release", "selection"}) {
      if (!types.count(t)) throw std::runtime_error(std::string("export lacks a '") + t + "' event");
    }
  } catch (const std::exception& e) {
    std::cerr << "wire_samples: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
