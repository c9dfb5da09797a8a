#pragma once

#include "evidencedesk/error.hpp"
#include "evidencedesk/grade.hpp"
#include "evidencedesk/index.hpp"
#include "evidencedesk/knowledge_base.hpp"
#include "evidencedesk/llm_client.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace evidencedesk::pipeline {

struct PipelineConfig {
  std::vector<int> scales;          // empty: every scale in the index
  std::vector<std::string> models;  // empty: every model in the index
  std::size_t k_per_partition = 8;
  double k_rrf = index::kDefaultRrfK;
  std::size_t k_context = 6;
  std::size_t max_subquestions = 5;
  std::size_t parallel_subquestions = 4;
  bool use_hyde = true;
  bool use_adapter = true;
  bool llm_safety_check = true;
  std::string chat_model = llm::kDefaultModel;
  double temperature = 0.0;
  int max_tokens = 1024;

  void validate() const;
  /// Canonical JSON of every field; part of the trace id.
  nlohmann::json to_json() const;
};

// ---------------------------------------------------------------- Stage I

struct SafetyVerdict {
  bool safe = true;
  std::string layer;   // "rule" or "classifier" when refused
  std::string reason;  // rule name, "unsafe" or "unparseable"
};

/// Name of the first matching refusal rule (instruction-override,
/// prompt-exfiltration, harmful-procedure), if any.
std::optional<std::string> match_safety_rule(std::string_view question);

/// Rule layer first; then, when enabled, a "safety" classification call that
/// must answer SAFE or UNSAFE. Anything else fails closed.
SafetyVerdict safety_screen(std::string_view question, llm::ChatClient& client,
                            const PipelineConfig& config);

/// With no history the question is returned verbatim and no call is made;
/// otherwise one "standalone" call rewrites it.
std::string formulate_standalone(std::span<const llm::ChatMessage> history,
                                 std::string_view question, llm::ChatClient& client,
                                 const PipelineConfig& config);

// ---------------------------------------------------------------- Stage II

struct RetrievalOutcome {
  std::string hypothetical;  // empty when HyDE was off or produced nothing
  bool hyde_used = false;
  std::vector<index::SearchHit> direct;  // fusion of the question probes
  std::vector<index::SearchHit> hyde;    // fusion of the passage probes
  std::vector<index::SearchHit> fused;   // fusion of all probes, k_context long
};

/// Per-partition top-k lists for one probe text, in partition order. The text
/// is embedded once per model; the model's adapter is applied when enabled.
std::vector<std::vector<index::SearchHit>> probe_partitions(std::string_view text,
                                                            const KnowledgeBase& kb,
                                                            const PipelineConfig& config);

RetrievalOutcome direct_retrieve(std::string_view question, const KnowledgeBase& kb,
                                 const PipelineConfig& config);

/// One "hyde" call writes a hypothetical answer passage; question and passage
/// probes over every selected partition are fused together. An empty passage
/// falls back to direct retrieval.
RetrievalOutcome hyde_retrieve(std::string_view question, const KnowledgeBase& kb,
                               const PipelineConfig& config, llm::ChatClient& client);

// ---------------------------------------------------------------- Stage III

/// Items of a "1. a 2. b" style list; markers must count up from 1.
std::vector<std::string> parse_numbered_list(std::string_view text);

/// One "decompose" call; at most max_subquestions items, or the question
/// itself when nothing parses.
std::vector<std::string> decompose(std::string_view question,
                                   std::span<const std::string> context,
                                   llm::ChatClient& client, const PipelineConfig& config);

struct SubAnswer {
  std::string question;
  std::vector<std::string> context_chunk_ids;
  std::vector<std::string> context_source_refs;  // parallel to chunk ids
  std::string answer;  // inline [n] refer to context position n
  RetrievalOutcome retrieval;
};

/// Fresh retrieval and a fresh "subanswer" call whose prompt holds only this
/// sub-question and its own passages.
SubAnswer answer_subquestion(std::string_view subquestion, const KnowledgeBase& kb,
                             const PipelineConfig& config, llm::ChatClient& client);

/// Unique source refs across sub-answers in first-seen order, numbered 1..m.
std::vector<grade::Citation> collect_sources(std::span<const SubAnswer> subanswers);

/// Rewrites a sub-answer's local [n] markers to numbers in `sources`.
std::string renumber_citations(const SubAnswer& subanswer,
                               std::span<const grade::Citation> sources);

// ---------------------------------------------------------------- Stage V

struct ReferenceEntry {
  int number = 0;
  std::string text;
};

struct FormatReport {
  std::vector<std::string> violations;
  std::vector<ReferenceEntry> references;
  std::optional<grade::EvidenceGrade> grade;

  bool pass() const { return violations.empty(); }
};

/// Checks, all reported: a "References:" list numbered 1..m; every inline [n]
/// has 1 <= n <= m; exactly one parseable "Evidence Strength:" line; a
/// "Rationale:" section after it.
FormatReport validate_format(std::string_view text);

/// Format report plus one violation per reference entry that names none of
/// `sources`.
FormatReport check_answer(std::string_view text, std::span<const grade::Citation> sources);

struct ComposeResult {
  std::string markdown;
  int llm_calls = 0;
  std::vector<std::string> repaired_violations;
};

/// One "compose" call (exemplar plus step-by-step instruction); on a failed
/// check one "repair" call with the violation list; a second failure throws
/// kFormatUnrepairable.
ComposeResult compose_answer(std::string_view standalone_question,
                             std::span<const SubAnswer> subanswers,
                             std::span<const grade::Citation> sources,
                             const grade::GradeRecord& grade_record,
                             llm::ChatClient& client, const PipelineConfig& config);

// ---------------------------------------------------------------- end to end

struct AnsweredResponse {
  std::string question;
  std::string standalone_question;
  std::string answer_markdown;
  std::vector<grade::Citation> citations;
  grade::EvidenceGrade evidence_grade = grade::EvidenceGrade::kVeryLow;
  std::string rationale;
  std::string trace_id;
};

struct Refusal {
  std::string question;
  std::string layer;
  std::string reason;
  std::string message;
  std::string trace_id;
};

struct StageRecord {
  std::string stage;  // "I" .. "V"
  std::string name;
  std::string inputs_digest;
  nlohmann::json outputs;
  double wall_ms = 0.0;
};

struct PipelineTrace {
  std::string trace_id;
  std::string status;  // running, done, refused, failed
  std::string question;
  std::vector<StageRecord> stage_records;
  RetrievalOutcome retrieval;
  std::vector<SubAnswer> subquestions;
  std::string grade_record;
  std::string final_answer;
  std::string error;

  /// Timing is left out when include_timing is false, which makes the
  /// output a pure function of the inputs and the model responses.
  nlohmann::json to_json(bool include_timing = true) const;
  std::string digest() const;
  /// Source refs of every chunk the trace retrieved.
  std::vector<std::string> evidence_sources(const corpus::CorpusStore& store) const;
};

struct PipelineResult {
  PipelineTrace trace;
  std::optional<AnsweredResponse> answer;
  std::optional<Refusal> refusal;
};

class StageError : public Error {
 public:
  StageError(ErrorCode code, std::string stage, std::string trace_id,
             const std::string& message, std::shared_ptr<PipelineTrace> partial)
      : Error(code, message), stage_(std::move(stage)), trace_id_(std::move(trace_id)),
        partial_(std::move(partial)) {}

  const std::string& stage() const { return stage_; }
  const std::string& trace_id() const { return trace_id_; }
  std::shared_ptr<const PipelineTrace> partial_trace() const { return partial_; }

 private:
  std::string stage_;
  std::string trace_id_;
  std::shared_ptr<PipelineTrace> partial_;
};

std::string make_trace_id(std::string_view question, std::span<const llm::ChatMessage> history,
                          const PipelineConfig& config);

/// Stages I-V. A Stage I refusal returns a refusal with a one-stage trace;
/// any stage failure throws StageError carrying the partial trace.
PipelineResult answer_question(std::string_view question,
                               std::span<const llm::ChatMessage> history,
                               const KnowledgeBase& kb, const PipelineConfig& config,
                               llm::ChatClient& client);

/// Number of answer_question calls in this process.
std::uint64_t answer_question_invocations();

nlohmann::json to_json(const index::SearchHit& hit);
nlohmann::json to_json(const AnsweredResponse& response);
nlohmann::json to_json(const Refusal& refusal);

}  // namespace evidencedesk::pipeline
