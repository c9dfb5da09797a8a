// Stage V: answer format checks and composition with a single repair pass.
#include "evidencedesk/pipeline.hpp"

#include "evidencedesk/text_util.hpp"

#include <regex>
#include <sstream>

namespace evidencedesk::pipeline {
namespace {

enum class LineKind { kBody, kReferences, kGrade, kRationale };

LineKind classify(std::string_view raw) {
  const auto line = grade::strip_markdown_prefix(util::trim(raw));
  if (util::starts_with_ci(line, "references:")) return LineKind::kReferences;
  if (util::starts_with_ci(line, "evidence strength:")) return LineKind::kGrade;
  if (util::starts_with_ci(line, "rationale:")) return LineKind::kRationale;
  return LineKind::kBody;
}

std::string after_colon(std::string_view raw) {
  const auto line = grade::strip_markdown_prefix(util::trim(raw));
  const auto colon = line.find(':');
  std::string rest(line.substr(colon + 1));
  // "**Rationale:** text" leaves the closing emphasis behind the colon.
  std::size_t i = 0;
  while (i < rest.size() && (rest[i] == '*' || rest[i] == '_')) ++i;
  return std::string(util::trim(std::string_view(rest).substr(i)));
}

}  // namespace

FormatReport validate_format(std::string_view text) {
  static const std::regex entry_re(R"(^\s*(\d+)[.)]\s+(.*)$)");
  static const std::regex cite_re(R"(\[(\d+)\])");

  FormatReport report;
  const auto lines = util::split_lines(text);
  std::vector<LineKind> kinds;
  kinds.reserve(lines.size());
  for (const auto& l : lines) kinds.push_back(classify(l));

  std::optional<std::size_t> refs_at;
  std::vector<std::size_t> grade_lines;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (kinds[i] == LineKind::kReferences && !refs_at) refs_at = i;
    if (kinds[i] == LineKind::kGrade) grade_lines.push_back(i);
  }

  // (1) References section numbered 1..m.
  std::vector<bool> in_refs(lines.size(), false);
  if (!refs_at) {
    report.violations.push_back("missing \"References:\" section");
  } else {
    in_refs[*refs_at] = true;
    const std::string inline_entry = after_colon(lines[*refs_at]);
    if (!inline_entry.empty()) {
      report.violations.push_back("\"References:\" line must not carry an entry");
    }
    for (std::size_t i = *refs_at + 1; i < lines.size() && kinds[i] == LineKind::kBody; ++i) {
      in_refs[i] = true;
      const std::string line(util::trim(lines[i]));
      if (line.empty()) continue;
      std::smatch m;
      if (std::regex_match(line, m, entry_re)) {
        report.references.push_back({std::stoi(m[1].str()), std::string(util::trim(m[2].str()))});
      } else if (!report.references.empty()) {
        report.references.back().text += " " + line;
      } else {
        report.violations.push_back("unnumbered line in \"References:\" section");
      }
    }
    for (std::size_t i = 0; i < report.references.size(); ++i) {
      if (report.references[i].number != static_cast<int>(i) + 1) {
        report.violations.push_back("reference entries are not numbered 1.." +
                                    std::to_string(report.references.size()) +
                                    " contiguously");
        break;
      }
    }
  }

  // (2) Inline citations resolve to an entry.
  const long m = static_cast<long>(report.references.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (in_refs[i]) continue;
    for (auto it = std::sregex_iterator(lines[i].begin(), lines[i].end(), cite_re);
         it != std::sregex_iterator(); ++it) {
      const long n = std::stol((*it)[1].str());
      if (n < 1 || n > m) {
        report.violations.push_back("dangling citation [" + std::to_string(n) + "] with " +
                                    std::to_string(m) + " references");
      }
    }
  }

  // (3) Exactly one parseable grade line.
  if (grade_lines.empty()) {
    report.violations.push_back("missing \"Evidence Strength:\" line");
  } else if (grade_lines.size() > 1) {
    report.violations.push_back("more than one \"Evidence Strength:\" line");
  }
  if (!grade_lines.empty()) {
    report.grade = grade::parse_level(after_colon(lines[grade_lines.front()]));
    if (!report.grade) {
      report.violations.push_back("unrecognized evidence level '" +
                                  after_colon(lines[grade_lines.front()]) + "'");
    }
  }

  // (4) Rationale after the grade, with content.
  const std::size_t from = grade_lines.empty() ? 0 : grade_lines.front() + 1;
  bool rationale_found = false;
  bool rationale_content = false;
  for (std::size_t i = from; i < lines.size(); ++i) {
    if (kinds[i] != LineKind::kRationale) continue;
    rationale_found = true;
    rationale_content = !after_colon(lines[i]).empty();
    for (std::size_t j = i + 1; j < lines.size() && !rationale_content; ++j) {
      rationale_content = !util::trim(lines[j]).empty();
    }
    break;
  }
  if (!rationale_found) {
    report.violations.push_back(grade_lines.empty()
                                    ? "missing \"Rationale:\" section"
                                    : "missing \"Rationale:\" section after the grade");
  } else if (!rationale_content) {
    report.violations.push_back("empty \"Rationale:\" section");
  }
  return report;
}

FormatReport check_answer(std::string_view text, std::span<const grade::Citation> sources) {
  auto report = validate_format(text);
  for (const auto& entry : report.references) {
    bool found = false;
    for (const auto& s : sources) {
      if (!s.source_ref.empty() && entry.text.find(s.source_ref) != std::string::npos) {
        found = true;
        break;
      }
    }
    if (!found) {
      report.violations.push_back("reference " + std::to_string(entry.number) +
                                  " names no retrieved source");
    }
  }
  return report;
}

namespace {

constexpr const char* kComposeSystem =
    "You write the final answer of a clinical question-answering assistant.\n"
    "Think through the findings step by step before writing: decide what they "
    "establish, where they disagree and what remains uncertain. Output only the "
    "finished answer.\n\n"
    "Rules:\n"
    "- Cite every supported statement inline with the source number in square "
    "brackets, e.g. [1].\n"
    "- Under \"References:\" list the cited sources as \"1. <source>\", numbered "
    "from 1 without gaps, using the source names exactly as given.\n"
    "- Then copy the evidence grade line \"Evidence Strength: <level>\" and the "
    "\"Rationale:\" paragraph supplied to you.\n\n"
    "Example of the required shape:\n\n"
    "Oral rehydration solution is the first-line treatment for mild to moderate "
    "dehydration in children with acute gastroenteritis [1]. Intravenous fluids "
    "are reserved for severe dehydration or failed oral intake [2].\n\n"
    "References:\n\n"
    "1. who-diarrhoea-guideline.txt\n"
    "2. paediatric-fluids-review.txt\n\n"
    "Evidence Strength: High\n\n"
    "Rationale: Recommendations rest on randomized trials with consistent, direct "
    "results in the target population [1][2].";

std::string compose_user_message(std::string_view question,
                                 std::span<const SubAnswer> subanswers,
                                 std::span<const grade::Citation> sources,
                                 const grade::GradeRecord& grade_record) {
  std::ostringstream user;
  user << "Question: " << question << "\n\nSources:\n";
  if (sources.empty()) user << "(none retrieved)\n";
  for (const auto& s : sources) user << s.number << ". " << s.source_ref << "\n";
  user << "\nFindings:\n";
  for (std::size_t i = 0; i < subanswers.size(); ++i) {
    user << "(" << i + 1 << ") " << subanswers[i].question << "\n"
         << renumber_citations(subanswers[i], sources) << "\n\n";
  }
  user << "Evidence grade:\n" << grade::render(grade_record.grade, grade_record.rationale);
  return user.str();
}

}  // namespace

ComposeResult compose_answer(std::string_view standalone_question,
                             std::span<const SubAnswer> subanswers,
                             std::span<const grade::Citation> sources,
                             const grade::GradeRecord& grade_record,
                             llm::ChatClient& client, const PipelineConfig& config) {
  llm::CompletionRequest req;
  req.model_id = config.chat_model;
  req.temperature = config.temperature;
  req.max_tokens = config.max_tokens;
  req.tag = "compose";
  req.messages = {
      {llm::Role::kSystem, kComposeSystem},
      {llm::Role::kUser,
       compose_user_message(standalone_question, subanswers, sources, grade_record)}};

  ComposeResult result;
  std::string draft = client.complete(req);
  ++result.llm_calls;
  auto report = check_answer(draft, sources);
  if (report.pass()) {
    result.markdown = std::move(draft);
    return result;
  }

  result.repaired_violations = report.violations;
  std::ostringstream fix;
  fix << "The answer above breaks these format rules:\n";
  for (const auto& v : report.violations) fix << "- " << v << "\n";
  fix << "\nRewrite the complete answer to the question \"" << standalone_question
      << "\" so that every rule holds.";
  req.tag = "repair";
  req.messages.push_back({llm::Role::kAssistant, draft});
  req.messages.push_back({llm::Role::kUser, fix.str()});
  draft = client.complete(req);
  ++result.llm_calls;
  report = check_answer(draft, sources);
  if (!report.pass()) {
    std::string msg = "answer format still invalid after repair:";
    for (const auto& v : report.violations) msg += " " + v + ";";
    msg.pop_back();
    throw Error(ErrorCode::kFormatUnrepairable, msg);
  }
  result.markdown = std::move(draft);
  return result;
}

}  // namespace evidencedesk::pipeline
