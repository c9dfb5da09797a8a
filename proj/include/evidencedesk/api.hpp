#pragma once

#include "evidencedesk/dataset.hpp"
#include "evidencedesk/error.hpp"
#include "evidencedesk/knowledge_base.hpp"
#include "evidencedesk/llm_client.hpp"
#include "evidencedesk/pipeline.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace evidencedesk::api {

struct AskRequest {
  std::string question;
  std::vector<llm::ChatMessage> history;
  nlohmann::json overrides = nlohmann::json::object();

  /// {question, history?: [{role, content}], config?: {...}}; kSchema on a
  /// malformed body, kInvalidArgument on an empty question.
  static AskRequest from_json(const nlohmann::json& body);
};

/// Copy of `base` with the recognised keys of `overrides` applied; unknown
/// keys and wrongly typed values throw kSchema.
pipeline::PipelineConfig apply_overrides(const pipeline::PipelineConfig& base,
                                         const nlohmann::json& overrides);

enum class JobStatus { kRunning, kDone, kRefused, kFailed };

std::string_view to_string(JobStatus status);

struct JobRecord {
  std::string trace_id;
  JobStatus status = JobStatus::kRunning;
  std::optional<pipeline::AnsweredResponse> response;
  std::optional<pipeline::Refusal> refusal;
  std::string error;

  /// Only running -> {done, refused, failed}; anything else throws
  /// kInvalidArgument.
  void advance(JobStatus next);
};

/// Shared by the CLI and the HTTP service: runs the pipeline, keeps job
/// records and persists one trace document per run.
class Engine {
 public:
  Engine(pipeline::KnowledgeBase kb, pipeline::PipelineConfig defaults,
         std::shared_ptr<llm::ChatClient> client, std::filesystem::path trace_dir);

  /// Throws pipeline::StageError on a stage failure, after recording the
  /// failed job and persisting the partial trace.
  pipeline::PipelineResult ask(const AskRequest& request);

  /// Trace document written by a run in this process, or found in trace_dir.
  std::optional<nlohmann::json> trace(const std::string& trace_id) const;
  std::optional<JobRecord> job(const std::string& trace_id) const;

  const pipeline::PipelineConfig& defaults() const { return defaults_; }
  llm::ChatClient& client() { return *client_; }

 private:
  void persist(const pipeline::PipelineTrace& trace);

  pipeline::KnowledgeBase kb_;
  pipeline::PipelineConfig defaults_;
  std::shared_ptr<llm::ChatClient> client_;
  std::filesystem::path trace_dir_;

  mutable std::mutex mu_;
  std::map<std::string, JobRecord> jobs_;
  std::map<std::string, nlohmann::json> traces_;
  std::map<std::string, std::shared_ptr<std::mutex>> write_locks_;
};

/// True for ids made of letters, digits, '-' and '_' only.
bool valid_trace_id(std::string_view id);

struct HttpReply {
  int status = 200;
  std::string body;  // JSON
};

/// Error body {"error": {"code", "message"}}.
HttpReply error_reply(int status, std::string_view code, std::string_view message);
int http_status_for(ErrorCode code);

/// Routes of the /v1 surface, independent of any socket.
class Service {
 public:
  Service(Engine& engine, std::shared_ptr<dataset::RatingsLog> ratings,
          std::optional<dataset::BenchmarkSet> benchmark);

  HttpReply handle(std::string_view method, std::string_view path, std::string_view body);

 private:
  HttpReply ask(std::string_view body);
  HttpReply trace(std::string_view id);
  HttpReply rate(std::string_view body);
  HttpReply benchmark() const;
  HttpReply health() const;

  Engine& engine_;
  std::shared_ptr<dataset::RatingsLog> ratings_;
  std::optional<dataset::BenchmarkSet> benchmark_;
};

/// httplib front end for Service.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Command-line entry point. Exit codes: 0 success, 1 runtime error, 2 usage.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace evidencedesk::api
