#pragma once

#include "evidencedesk/http_transport.hpp"

#include <condition_variable>
#include <filesystem>
#include <istream>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace evidencedesk::llm {

enum class Role { kSystem, kUser, kAssistant };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

inline constexpr const char* kDefaultModel = "gpt-3.5-turbo";

struct CompletionRequest {
  std::string model_id = kDefaultModel;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
  /// Pipeline stage label, e.g. "safety", "hyde", "compose".
  std::string tag;

  /// Throws kInvalidArgument when the invariants do not hold.
  void validate() const;
  /// Content of the last user message, or "" when there is none.
  std::string_view last_user_message() const;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Returns the assistant message content.
  virtual std::string complete(const CompletionRequest& request) = 0;
  /// Requests that reached a network transport.
  virtual std::size_t transport_calls() const = 0;
};

struct TranscriptEntry {
  std::string stage;
  std::string match_substring;
  std::string response;
};

struct ScriptedTranscript {
  std::vector<TranscriptEntry> entries;
  bool strict = true;
};

/// Newline-delimited JSON records {stage, match_substring, response}. Blank
/// lines are skipped; a bad record raises kParse naming its line.
ScriptedTranscript parse_transcript(std::istream& in, bool strict = true);
ScriptedTranscript load_transcript(const std::filesystem::path& path,
                                   bool strict = true);

/// Deterministic mock. A request matches an entry when the tags are equal and
/// the entry's substring occurs in the last user message. Strict mode
/// consumes the first unconsumed matching entry in file order, so each entry
/// answers at most once; non-strict mode answers with the first matching
/// entry and never consumes. No match raises kUnmatchedRequest.
class ScriptedChatClient final : public ChatClient {
 public:
  struct Call {
    std::string tag;
    std::vector<ChatMessage> messages;
    std::size_t entry = 0;
  };

  explicit ScriptedChatClient(ScriptedTranscript transcript);

  std::string complete(const CompletionRequest& request) override;
  std::size_t transport_calls() const override { return 0; }

  std::vector<Call> calls() const;
  std::size_t consumed() const;
  void reset();

 private:
  ScriptedTranscript transcript_;
  std::vector<bool> used_;
  std::vector<Call> calls_;
  mutable std::mutex mu_;
};

/// OpenAI-compatible chat-completions client: POST /chat/completions with
/// {model, messages, temperature, max_tokens}; content read from
/// choices[0].message.content.
class RemoteChatClient final : public ChatClient {
 public:
  RemoteChatClient(std::shared_ptr<net::HttpTransport> transport,
                   std::string api_key, net::RetryPolicy policy = {},
                   std::size_t max_in_flight = 8, net::SleepFn sleep = {});

  std::string complete(const CompletionRequest& request) override;
  std::size_t transport_calls() const override;

 private:
  std::shared_ptr<net::HttpTransport> transport_;
  std::string api_key_;
  net::RetryPolicy policy_;
  net::SleepFn sleep_;
  std::size_t max_in_flight_;
  std::size_t in_flight_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

/// Remote client configured from EVIDENCEDESK_LLM_BASE_URL and
/// EVIDENCEDESK_LLM_API_KEY.
std::unique_ptr<ChatClient> make_remote_client_from_env(net::RetryPolicy policy = {});

}  // namespace evidencedesk::llm
