#include "evidencedesk/pipeline.hpp"

#include "evidencedesk/text_util.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <set>
#include <thread>

namespace evidencedesk::pipeline {

nlohmann::json to_json(const index::SearchHit& hit) {
  return {{"chunk_id", hit.chunk_id},
          {"score", hit.score},
          {"model_id", hit.model_id},
          {"scale", hit.scale},
          {"rank", hit.rank}};
}

namespace {

std::atomic<std::uint64_t> g_invocations{0};

nlohmann::json hits_json(const std::vector<index::SearchHit>& hits) {
  auto out = nlohmann::json::array();
  for (const auto& h : hits) out.push_back(to_json(h));
  return out;
}

nlohmann::json retrieval_json(const RetrievalOutcome& r) {
  return {{"hyde_used", r.hyde_used},
          {"hypothetical", r.hypothetical},
          {"direct", hits_json(r.direct)},
          {"hyde", hits_json(r.hyde)},
          {"fused", hits_json(r.fused)}};
}

nlohmann::json citations_json(std::span<const grade::Citation> citations) {
  auto out = nlohmann::json::array();
  for (const auto& c : citations) out.push_back({{"number", c.number}, {"source_ref", c.source_ref}});
  return out;
}

nlohmann::json history_json(std::span<const llm::ChatMessage> history) {
  auto out = nlohmann::json::array();
  for (const auto& m : history) {
    out.push_back({{"role", std::string(llm::to_string(m.role))}, {"content", m.content}});
  }
  return out;
}

class StageClock {
 public:
  StageClock() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

constexpr const char* kRefusalMessage =
    "This request cannot be answered. Please ask a clinical question without "
    "instructions directed at the assistant or requests that could cause harm.";

std::vector<SubAnswer> answer_all(const std::vector<std::string>& subquestions,
                                  const KnowledgeBase& kb, const PipelineConfig& config,
                                  llm::ChatClient& client) {
  const std::size_t n = subquestions.size();
  std::vector<SubAnswer> answers(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        answers[i] = answer_subquestion(subquestions[i], kb, config, client);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(n, config.parallel_subquestions);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "sub-question " + std::to_string(i + 1) + " (\"" +
                                subquestions[i] + "\"): " + e.what());
    }
  }
  return answers;
}

}  // namespace

nlohmann::json to_json(const AnsweredResponse& r) {
  return {{"question", r.question},
          {"standalone_question", r.standalone_question},
          {"answer_markdown", r.answer_markdown},
          {"citations", citations_json(r.citations)},
          {"evidence_grade", std::string(grade::to_string(r.evidence_grade))},
          {"rationale", r.rationale},
          {"trace_id", r.trace_id}};
}

nlohmann::json to_json(const Refusal& r) {
  return {{"question", r.question},
          {"layer", r.layer},
          {"reason", r.reason},
          {"message", r.message},
          {"trace_id", r.trace_id}};
}

nlohmann::json PipelineTrace::to_json(bool include_timing) const {
  auto stages = nlohmann::json::array();
  for (const auto& s : stage_records) {
    nlohmann::json j{{"stage", s.stage},
                     {"name", s.name},
                     {"inputs_digest", s.inputs_digest},
                     {"outputs", s.outputs}};
    if (include_timing) j["wall_ms"] = s.wall_ms;
    stages.push_back(std::move(j));
  }
  auto subs = nlohmann::json::array();
  for (const auto& sa : subquestions) {
    subs.push_back({{"question", sa.question},
                    {"context_chunk_ids", sa.context_chunk_ids},
                    {"context_source_refs", sa.context_source_refs},
                    {"answer", sa.answer},
                    {"retrieval", retrieval_json(sa.retrieval)}});
  }
  return {{"trace_id", trace_id},
          {"status", status},
          {"question", question},
          {"stages", std::move(stages)},
          {"retrieval", retrieval_json(retrieval)},
          {"subquestions", std::move(subs)},
          {"grade_record", grade_record},
          {"final_answer", final_answer},
          {"error", error}};
}

std::string PipelineTrace::digest() const { return util::digest(to_json(false).dump()); }

std::vector<std::string> PipelineTrace::evidence_sources(const corpus::CorpusStore& store) const {
  std::set<std::string> chunk_ids;
  auto add = [&](const RetrievalOutcome& r) {
    for (const auto* list : {&r.direct, &r.hyde, &r.fused}) {
      for (const auto& h : *list) chunk_ids.insert(h.chunk_id);
    }
  };
  add(retrieval);
  for (const auto& sa : subquestions) {
    add(sa.retrieval);
    chunk_ids.insert(sa.context_chunk_ids.begin(), sa.context_chunk_ids.end());
  }
  std::set<std::string> refs;
  for (const auto& id : chunk_ids) {
    if (store.find_chunk(id)) refs.insert(store.source_ref_for_chunk(id));
  }
  return {refs.begin(), refs.end()};
}

std::string make_trace_id(std::string_view question, std::span<const llm::ChatMessage> history,
                          const PipelineConfig& config) {
  const nlohmann::json key{{"question", question},
                           {"history", history_json(history)},
                           {"config", config.to_json()}};
  return "tr-" + util::digest(key.dump());
}

std::uint64_t answer_question_invocations() { return g_invocations.load(); }

PipelineResult answer_question(std::string_view question,
                               std::span<const llm::ChatMessage> history,
                               const KnowledgeBase& kb, const PipelineConfig& config,
                               llm::ChatClient& client) {
  ++g_invocations;
  if (util::trim(question).empty()) {
    throw Error(ErrorCode::kInvalidArgument, "question must not be empty");
  }
  config.validate();

  auto trace = std::make_shared<PipelineTrace>();
  trace->trace_id = make_trace_id(question, history, config);
  trace->status = "running";
  trace->question = std::string(question);

  std::string current_stage;
  auto fail = [&](const Error& e) -> StageError {
    trace->status = "failed";
    trace->error = "stage " + current_stage + ": " + std::string(to_string(e.code())) + ": " + e.what();
    return StageError(e.code(), current_stage, trace->trace_id, trace->error, trace);
  };

  try {
    // Stage I
    current_stage = "I";
    StageClock clock1;
    const auto verdict = safety_screen(question, client, config);
    if (!verdict.safe) {
      trace->stage_records.push_back(
          {"I", "safety-and-standalone",
           util::digest(nlohmann::json{{"question", question}, {"history", history_json(history)}}
                            .dump()),
           {{"safe", false}, {"layer", verdict.layer}, {"reason", verdict.reason}},
           clock1.elapsed_ms()});
      trace->status = "refused";
      PipelineResult result;
      result.refusal = Refusal{std::string(question), verdict.layer, verdict.reason,
                               kRefusalMessage, trace->trace_id};
      result.trace = *trace;
      return result;
    }
    const std::string standalone = formulate_standalone(history, question, client, config);
    trace->stage_records.push_back(
        {"I", "safety-and-standalone",
         util::digest(
             nlohmann::json{{"question", question}, {"history", history_json(history)}}.dump()),
         {{"safe", true}, {"standalone_question", standalone}},
         clock1.elapsed_ms()});

    // Stage II
    current_stage = "II";
    StageClock clock2;
    trace->retrieval = hyde_retrieve(standalone, kb, config, client);
    trace->stage_records.push_back({"II", "retrieval", util::digest(standalone),
                                    retrieval_json(trace->retrieval), clock2.elapsed_ms()});

    // Stage III
    current_stage = "III";
    StageClock clock3;
    std::vector<std::string> context;
    for (const auto& hit : trace->retrieval.fused) {
      if (const auto* chunk = kb.corpus->find_chunk(hit.chunk_id)) context.push_back(chunk->text);
    }
    const auto subquestions = decompose(standalone, context, client, config);
    trace->subquestions = answer_all(subquestions, kb, config, client);
    const auto sources = collect_sources(trace->subquestions);
    trace->stage_records.push_back({"III", "decompose-and-answer",
                                    util::digest(nlohmann::json{{"question", standalone},
                                                                {"context", context}}
                                                     .dump()),
                                    {{"subquestions", subquestions},
                                     {"sources", citations_json(sources)}},
                                    clock3.elapsed_ms()});

    // Stage IV
    current_stage = "IV";
    StageClock clock4;
    std::vector<grade::GradedClaim> claims;
    for (const auto& sa : trace->subquestions) {
      std::vector<std::string> refs;
      for (const auto& r : sa.context_source_refs) {
        if (std::find(refs.begin(), refs.end(), r) == refs.end()) refs.push_back(r);
      }
      claims.push_back({sa.question, renumber_citations(sa, sources), std::move(refs)});
    }
    llm::CompletionRequest grade_req;
    grade_req.model_id = config.chat_model;
    grade_req.temperature = config.temperature;
    grade_req.max_tokens = config.max_tokens;
    grade_req.tag = "grade";
    grade_req.messages = grade::build_grade_prompt(claims, sources);
    const std::string grade_text = client.complete(grade_req);
    auto grade_record = grade::parse_grade(grade_text);
    grade_record.evidence_items = grade::make_evidence_items(claims);
    trace->grade_record = grade::render(grade_record.grade, grade_record.rationale);
    auto items = nlohmann::json::array();
    for (const auto& it : grade_record.evidence_items) {
      items.push_back({{"claim_digest", it.claim_digest}, {"source_ref", it.source_ref}});
    }
    trace->stage_records.push_back(
        {"IV", "grade",
         util::digest(grade_req.messages.back().content),
         {{"grade", std::string(grade::to_string(grade_record.grade))},
          {"rationale", grade_record.rationale},
          {"evidence_items", std::move(items)}},
         clock4.elapsed_ms()});

    // Stage V
    current_stage = "V";
    StageClock clock5;
    auto composed =
        compose_answer(standalone, trace->subquestions, sources, grade_record, client, config);
    const auto report = check_answer(composed.markdown, sources);
    if (!report.pass()) {
      throw Error(ErrorCode::kFormatUnrepairable, report.violations.front());
    }
    AnsweredResponse answer;
    answer.question = std::string(question);
    answer.standalone_question = standalone;
    answer.answer_markdown = composed.markdown;
    for (const auto& entry : report.references) {
      for (const auto& s : sources) {
        if (entry.text.find(s.source_ref) != std::string::npos) {
          answer.citations.push_back({entry.number, s.source_ref});
          break;
        }
      }
    }
    const auto final_grade = grade::parse_grade(composed.markdown);
    answer.evidence_grade = final_grade.grade;
    answer.rationale = final_grade.rationale;
    answer.trace_id = trace->trace_id;
    trace->final_answer = composed.markdown;
    trace->stage_records.push_back({"V", "compose-and-validate",
                                    util::digest(trace->grade_record),
                                    {{"llm_calls", composed.llm_calls},
                                     {"repaired_violations", composed.repaired_violations},
                                     {"citations", citations_json(answer.citations)}},
                                    clock5.elapsed_ms()});
    trace->status = "done";
    PipelineResult result;
    result.answer = std::move(answer);
    result.trace = *trace;
    return result;
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw fail(e);
  } catch (const std::exception& e) {
    throw fail(Error(ErrorCode::kStageFailed, e.what()));
  }
}

}  // namespace evidencedesk::pipeline
