#include "evidencedesk/llm_client.hpp"

#include "evidencedesk/error.hpp"
#include "evidencedesk/text_util.hpp"

#include <cstdlib>
#include <fstream>

#include "json.hpp"

namespace evidencedesk::llm {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view text) {
  if (text == "system") return Role::kSystem;
  if (text == "user") return Role::kUser;
  if (text == "assistant") return Role::kAssistant;
  throw Error(ErrorCode::kInvalidArgument, "unknown chat role '" + std::string(text) + "'");
}

void CompletionRequest::validate() const {
  if (messages.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "completion request has no messages");
  }
  if (messages.front().role == Role::kAssistant) {
    throw Error(ErrorCode::kInvalidArgument,
                "first message must have role system or user");
  }
  for (const auto& m : messages) {
    if (m.content.empty() && m.role != Role::kAssistant) {
      throw Error(ErrorCode::kInvalidArgument, "empty non-assistant message");
    }
  }
  if (!(temperature >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be >= 0");
  }
  if (max_tokens <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_tokens must be positive");
  }
}

std::string_view CompletionRequest::last_user_message() const {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::kUser) return it->content;
  }
  return {};
}

ScriptedTranscript parse_transcript(std::istream& in, bool strict) {
  ScriptedTranscript t;
  t.strict = strict;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      t.entries.push_back({j.at("stage").get<std::string>(),
                           j.at("match_substring").get<std::string>(),
                           j.at("response").get<std::string>()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse,
                  "transcript line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return t;
}

ScriptedTranscript load_transcript(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read transcript " + path.string());
  return parse_transcript(in, strict);
}

ScriptedChatClient::ScriptedChatClient(ScriptedTranscript transcript)
    : transcript_(std::move(transcript)), used_(transcript_.entries.size(), false) {}

std::string ScriptedChatClient::complete(const CompletionRequest& request) {
  request.validate();
  const std::string_view last_user = request.last_user_message();
  std::lock_guard lock(mu_);
  for (std::size_t i = 0; i < transcript_.entries.size(); ++i) {
    const auto& e = transcript_.entries[i];
    if (transcript_.strict && used_[i]) continue;
    if (e.stage != request.tag) continue;
    if (last_user.find(e.match_substring) == std::string_view::npos) continue;
    if (transcript_.strict) used_[i] = true;
    calls_.push_back({request.tag, request.messages, i});
    return e.response;
  }
  std::string preview(last_user.substr(0, 80));
  throw Error(ErrorCode::kUnmatchedRequest,
              "no transcript entry for stage '" + request.tag + "' and message \"" +
                  preview + "\"");
}

std::vector<ScriptedChatClient::Call> ScriptedChatClient::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t ScriptedChatClient::consumed() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (bool u : used_) n += u ? 1 : 0;
  return n;
}

void ScriptedChatClient::reset() {
  std::lock_guard lock(mu_);
  used_.assign(transcript_.entries.size(), false);
  calls_.clear();
}

RemoteChatClient::RemoteChatClient(std::shared_ptr<net::HttpTransport> transport,
                                   std::string api_key, net::RetryPolicy policy,
                                   std::size_t max_in_flight, net::SleepFn sleep)
    : transport_(std::move(transport)),
      api_key_(std::move(api_key)),
      policy_(policy),
      sleep_(std::move(sleep)),
      max_in_flight_(max_in_flight == 0 ? 1 : max_in_flight) {}

std::string RemoteChatClient::complete(const CompletionRequest& request) {
  request.validate();
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  const json body{{"model", request.model_id},
                  {"messages", messages},
                  {"temperature", request.temperature},
                  {"max_tokens", request.max_tokens}};
  net::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
    ++in_flight_;
  }
  struct Release {
    RemoteChatClient* self;
    ~Release() {
      {
        std::lock_guard lock(self->mu_);
        --self->in_flight_;
      }
      self->cv_.notify_one();
    }
  } release{this};

  auto res = net::post_with_retry(*transport_, "/chat/completions", body.dump(),
                                  headers, policy_, sleep_);
  try {
    const auto j = json::parse(res.body);
    const auto& message = j.at("choices").at(0).at("message");
    const auto& content = message.at("content");
    // Provider-side refusals arrive with null content and a refusal string;
    // the text is passed through for the calling stage to judge.
    if (content.is_null() && message.contains("refusal") && message["refusal"].is_string()) {
      return message["refusal"].get<std::string>();
    }
    if (!content.is_string()) {
      throw Error(ErrorCode::kMalformedResponse, "message content is not a string");
    }
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse,
                std::string("chat completion response: ") + e.what());
  }
}

std::size_t RemoteChatClient::transport_calls() const {
  return transport_->requests_sent();
}

std::unique_ptr<ChatClient> make_remote_client_from_env(net::RetryPolicy policy) {
  const char* base = std::getenv("EVIDENCEDESK_LLM_BASE_URL");
  const char* key = std::getenv("EVIDENCEDESK_LLM_API_KEY");
  if (!base || !*base) {
    throw Error(ErrorCode::kInvalidArgument,
                "EVIDENCEDESK_LLM_BASE_URL is not set; pass --mock for offline runs");
  }
  return std::make_unique<RemoteChatClient>(net::make_http_transport(base),
                                            key ? key : "", policy);
}

}  // namespace evidencedesk::llm
