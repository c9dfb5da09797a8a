#pragma once

#include "evidencedesk/http_transport.hpp"
#include "evidencedesk/knowledge_base.hpp"
#include "evidencedesk/llm_client.hpp"
#include "evidencedesk/pipeline.hpp"

#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace edtest {

std::filesystem::path data_dir();
std::filesystem::path golden_dir();
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline constexpr const char* kGoldenModels = "hash:384:1,hash:1024:2,hash:1536:3";

/// Golden corpus ingested at the default scales and indexed with kGoldenModels,
/// held in memory.
evidencedesk::pipeline::KnowledgeBase golden_kb();

/// Golden corpus ingested and indexed on disk under `dir` (store/, index.bin).
void build_golden_on_disk(const std::filesystem::path& dir);

std::shared_ptr<evidencedesk::llm::ScriptedChatClient> golden_client(bool strict = true);

/// Single-partition knowledge base where the question text sits close to a
/// distractor chunk and the mock's hypothetical passage sits close to the
/// planted answer chunk.
struct PlantedHyde {
  evidencedesk::pipeline::KnowledgeBase kb;
  evidencedesk::pipeline::PipelineConfig config;
  std::string model_id;
  int scale = 0;
  std::string question;
  std::string passage;
  std::string planted_chunk;
  std::string distractor_chunk;
  std::vector<std::string> chunk_ids;
  std::vector<std::string> chunk_texts;
  evidencedesk::llm::ScriptedTranscript transcript;
};

PlantedHyde planted_hyde();

/// Every chunk in `chunk_ids` ranked against `text` by a direct cosine
/// computation with the knowledge base's provider for `model`; ties by id.
std::vector<std::string> brute_force_ranking(const evidencedesk::pipeline::KnowledgeBase& kb,
                                             const std::string& model, const std::string& text,
                                             const std::vector<std::string>& chunk_ids);

/// Transport double: replays queued outcomes and records every request.
class FakeTransport final : public evidencedesk::net::HttpTransport {
 public:
  struct Outcome {
    std::optional<evidencedesk::net::HttpResponse> response;
    evidencedesk::ErrorCode error = evidencedesk::ErrorCode::kTransport;
  };
  struct Request {
    std::string path;
    std::string body;
    evidencedesk::net::Headers headers;
  };

  void push_response(int status, std::string body);
  void push_error(evidencedesk::ErrorCode code);
  /// Used when the queue is empty; without one an empty queue is a transport error.
  void set_default(int status, std::string body);

  evidencedesk::net::HttpResponse post_json(const std::string& path, const std::string& body,
                                            const evidencedesk::net::Headers& headers,
                                            std::chrono::milliseconds timeout) override;
  std::size_t requests_sent() const override;
  std::vector<Request> requests() const;

 private:
  mutable std::mutex mu_;
  std::deque<Outcome> queue_;
  std::optional<evidencedesk::net::HttpResponse> default_;
  std::vector<Request> requests_;
};

/// Retry policy with zero backoff for tests.
evidencedesk::net::RetryPolicy fast_retry(int max_retries = 3);

}  // namespace edtest
