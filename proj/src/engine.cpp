#include "evidencedesk/api.hpp"

#include "evidencedesk/text_util.hpp"

#include <fstream>

namespace evidencedesk::api {

AskRequest AskRequest::from_json(const nlohmann::json& body) {
  if (!body.is_object()) throw Error(ErrorCode::kSchema, "request body must be a JSON object");
  AskRequest req;
  const auto q = body.find("question");
  if (q == body.end() || !q->is_string()) {
    throw Error(ErrorCode::kSchema, "'question' must be a string");
  }
  req.question = q->get<std::string>();
  if (util::trim(req.question).empty()) {
    throw Error(ErrorCode::kInvalidArgument, "'question' must not be empty");
  }
  if (auto h = body.find("history"); h != body.end() && !h->is_null()) {
    if (!h->is_array()) throw Error(ErrorCode::kSchema, "'history' must be an array");
    for (std::size_t i = 0; i < h->size(); ++i) {
      const auto& m = (*h)[i];
      const std::string where = "history[" + std::to_string(i) + "]";
      if (!m.is_object() || !m.contains("role") || !m.contains("content") ||
          !m["role"].is_string() || !m["content"].is_string()) {
        throw Error(ErrorCode::kSchema, where + " must be {role, content}");
      }
      try {
        req.history.push_back(
            {llm::parse_role(m["role"].get<std::string>()), m["content"].get<std::string>()});
      } catch (const Error& e) {
        throw Error(ErrorCode::kSchema, where + ": " + e.what());
      }
    }
  }
  if (auto c = body.find("config"); c != body.end() && !c->is_null()) {
    if (!c->is_object()) throw Error(ErrorCode::kSchema, "'config' must be an object");
    req.overrides = *c;
  }
  return req;
}

pipeline::PipelineConfig apply_overrides(const pipeline::PipelineConfig& base,
                                         const nlohmann::json& overrides) {
  if (!overrides.is_object()) throw Error(ErrorCode::kSchema, "config overrides must be an object");
  auto config = base;
  auto count = [](const nlohmann::json& v, const std::string& key) -> std::size_t {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw Error(ErrorCode::kSchema, "'" + key + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
  };
  auto flag = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_boolean()) throw Error(ErrorCode::kSchema, "'" + key + "' must be a boolean");
    return v.get<bool>();
  };
  auto number = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw Error(ErrorCode::kSchema, "'" + key + "' must be a number");
    return v.get<double>();
  };
  for (const auto& [key, v] : overrides.items()) {
    if (key == "use_hyde") {
      config.use_hyde = flag(v, key);
    } else if (key == "use_adapter") {
      config.use_adapter = flag(v, key);
    } else if (key == "llm_safety_check") {
      config.llm_safety_check = flag(v, key);
    } else if (key == "k_per_partition") {
      config.k_per_partition = count(v, key);
    } else if (key == "k_context") {
      config.k_context = count(v, key);
    } else if (key == "max_subquestions") {
      config.max_subquestions = count(v, key);
    } else if (key == "parallel_subquestions") {
      config.parallel_subquestions = count(v, key);
    } else if (key == "k_rrf") {
      config.k_rrf = number(v, key);
    } else if (key == "temperature") {
      config.temperature = number(v, key);
    } else if (key == "max_tokens") {
      config.max_tokens = static_cast<int>(count(v, key));
    } else if (key == "chat_model") {
      if (!v.is_string()) throw Error(ErrorCode::kSchema, "'chat_model' must be a string");
      config.chat_model = v.get<std::string>();
    } else if (key == "scales") {
      if (!v.is_array()) throw Error(ErrorCode::kSchema, "'scales' must be an array");
      config.scales.clear();
      for (const auto& s : v) config.scales.push_back(static_cast<int>(count(s, key)));
    } else if (key == "models") {
      if (!v.is_array()) throw Error(ErrorCode::kSchema, "'models' must be an array");
      config.models.clear();
      for (const auto& m : v) {
        if (!m.is_string()) throw Error(ErrorCode::kSchema, "'models' must hold strings");
        config.models.push_back(m.get<std::string>());
      }
    } else {
      throw Error(ErrorCode::kSchema, "unknown config key '" + key + "'");
    }
  }
  try {
    config.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kSchema, e.what());
  }
  return config;
}

std::string_view to_string(JobStatus status) {
  switch (status) {
    case JobStatus::kRunning: return "running";
    case JobStatus::kDone: return "done";
    case JobStatus::kRefused: return "refused";
    case JobStatus::kFailed: return "failed";
  }
  return "unknown";
}

void JobRecord::advance(JobStatus next) {
  if (status != JobStatus::kRunning || next == JobStatus::kRunning) {
    throw Error(ErrorCode::kInvalidArgument, "job " + trace_id + " cannot move from " +
                                                 std::string(to_string(status)) + " to " +
                                                 std::string(to_string(next)));
  }
  status = next;
}

bool valid_trace_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_';
    if (!ok) return false;
  }
  return true;
}

Engine::Engine(pipeline::KnowledgeBase kb, pipeline::PipelineConfig defaults,
               std::shared_ptr<llm::ChatClient> client, std::filesystem::path trace_dir)
    : kb_(std::move(kb)), defaults_(std::move(defaults)), client_(std::move(client)),
      trace_dir_(std::move(trace_dir)) {
  if (!client_) throw Error(ErrorCode::kInvalidArgument, "engine needs a chat client");
  defaults_.validate();
  kb_.check();
}

pipeline::PipelineResult Engine::ask(const AskRequest& request) {
  const auto config = apply_overrides(defaults_, request.overrides);
  const auto trace_id = pipeline::make_trace_id(request.question, request.history, config);
  {
    std::lock_guard lock(mu_);
    jobs_[trace_id] = JobRecord{trace_id, JobStatus::kRunning, {}, {}, {}};
  }
  auto finish = [&](JobStatus status, auto&& fill) {
    std::lock_guard lock(mu_);
    auto& job = jobs_[trace_id];
    job.advance(status);
    fill(job);
  };
  try {
    auto result = pipeline::answer_question(request.question, request.history, kb_, config,
                                            *client_);
    persist(result.trace);
    if (result.refusal) {
      finish(JobStatus::kRefused, [&](JobRecord& j) { j.refusal = result.refusal; });
    } else {
      finish(JobStatus::kDone, [&](JobRecord& j) { j.response = result.answer; });
    }
    return result;
  } catch (const pipeline::StageError& e) {
    if (auto partial = e.partial_trace()) persist(*partial);
    finish(JobStatus::kFailed, [&](JobRecord& j) { j.error = e.what(); });
    throw;
  } catch (const Error& e) {
    finish(JobStatus::kFailed, [&](JobRecord& j) { j.error = e.what(); });
    throw;
  }
}

void Engine::persist(const pipeline::PipelineTrace& trace) {
  auto doc = trace.to_json(true);
  std::shared_ptr<std::mutex> file_lock;
  {
    std::lock_guard lock(mu_);
    traces_[trace.trace_id] = doc;
    auto& slot = write_locks_[trace.trace_id];
    if (!slot) slot = std::make_shared<std::mutex>();
    file_lock = slot;
  }
  if (trace_dir_.empty()) return;
  std::lock_guard write(*file_lock);
  std::error_code ec;
  std::filesystem::create_directories(trace_dir_, ec);
  const auto final_path = trace_dir_ / (trace.trace_id + ".json");
  const auto tmp_path = trace_dir_ / (trace.trace_id + ".json.tmp");
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write trace " + tmp_path.string());
    out << doc.dump(2) << "\n";
    if (!out) throw Error(ErrorCode::kIo, "cannot write trace " + tmp_path.string());
  }
  std::filesystem::rename(tmp_path, final_path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot persist trace " + final_path.string());
}

std::optional<nlohmann::json> Engine::trace(const std::string& trace_id) const {
  if (!valid_trace_id(trace_id)) return std::nullopt;
  {
    std::lock_guard lock(mu_);
    if (auto it = traces_.find(trace_id); it != traces_.end()) return it->second;
  }
  if (trace_dir_.empty()) return std::nullopt;
  std::ifstream in(trace_dir_ / (trace_id + ".json"), std::ios::binary);
  if (!in) return std::nullopt;
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kCorruptFile, "trace " + trace_id + " is not valid JSON");
  }
}

std::optional<JobRecord> Engine::job(const std::string& trace_id) const {
  std::lock_guard lock(mu_);
  if (auto it = jobs_.find(trace_id); it != jobs_.end()) return it->second;
  return std::nullopt;
}

}  // namespace evidencedesk::api
