#pragma once

#include <map>
#include <memory>
#include <string>

#include "lfqa/study.hpp"

namespace httplib {
class Server;
}

namespace lfqa {

struct WireRequest {
  std::string method;  // GET | POST
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  std::string authorization;  // raw Authorization header
};

struct WireResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Routes one request against the study. Transport-free so every route can
/// be exercised without sockets.
///
///   GET  /api/config                 {instructions, annotators_per_cell}
///   GET  /api/task?annotator=ID      {assignment_id, question, summary_text, stage} or 204
///   POST /api/stage1                 {assignment_id, fluency, adequacy} -> {long_answer}
///   POST /api/stage2                 {assignment_id, faithfulness, long_adequacy} -> {status}
///   GET  /api/report?mode=M[&partial=1]
///   GET  /api/export                 the log, JSONL
///   GET  /api/selection?example_id=  {example_id, question, sentences}
///   POST /api/selection              {annotator_id, example_id, selected}
///
/// Errors carry {"error": message}: 400 bad body or label, 401 bad token,
/// 404 unknown route, assignment or example, 409 protocol violation or an
/// incomplete study.
WireResponse handle_request(Study& study, const WireRequest& request, const std::string& bearer_token = {});

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string bearer_token;  // empty disables auth
};

class StudyServer {
 public:
  StudyServer(Study& study, ServerOptions options);
  ~StudyServer();

  /// Binds and returns the port actually bound. Throws ConfigError on failure.
  int bind();
  /// Serves until stop(). Call bind() first.
  void serve();
  void stop();

 private:
  Study& study_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace lfqa
