#include "evidencedesk/grade.hpp"

#include "evidencedesk/error.hpp"
#include "evidencedesk/text_util.hpp"

#include <cctype>
#include <sstream>

namespace evidencedesk::grade {

std::string_view to_string(EvidenceGrade grade) {
  switch (grade) {
    case EvidenceGrade::kHigh: return "High";
    case EvidenceGrade::kModerate: return "Moderate";
    case EvidenceGrade::kLow: return "Low";
    case EvidenceGrade::kVeryLow: return "Very Low";
  }
  return "Very Low";
}

namespace {

bool is_decoration(char c) {
  return c == '*' || c == '_' || c == '#' || c == '>' ||
         std::isspace(static_cast<unsigned char>(c));
}

}  // namespace

std::string_view strip_markdown_prefix(std::string_view line) {
  while (!line.empty() && is_decoration(line.front())) line.remove_prefix(1);
  return line;
}

std::optional<EvidenceGrade> parse_level(std::string_view token) {
  std::string words;
  bool pending_space = false;
  for (char c : token) {
    if (c == '*' || c == '_' || c == '`') continue;
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !words.empty();
      continue;
    }
    if (pending_space) words += ' ';
    pending_space = false;
    words += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  while (!words.empty() && (words.back() == '.' || words.back() == ' ')) words.pop_back();
  if (words == "high") return EvidenceGrade::kHigh;
  if (words == "moderate") return EvidenceGrade::kModerate;
  if (words == "low") return EvidenceGrade::kLow;
  if (words == "very low") return EvidenceGrade::kVeryLow;
  return std::nullopt;
}

std::vector<llm::ChatMessage> build_grade_prompt(std::span<const GradedClaim> claims,
                                                 std::span<const Citation> citations) {
  std::string system =
      "You assess the certainty of medical evidence with the GRADE framework.\n"
      "Rate the overall body of evidence at exactly one of four levels:\n"
      "- High: further research is very unlikely to change confidence in the estimate.\n"
      "- Moderate: further research is likely to have an important impact and may "
      "change the estimate.\n"
      "- Low: further research is very likely to change the estimate.\n"
      "- Very Low: any estimate is very uncertain.\n"
      "Judge the sources on study design (randomized trials and systematic reviews "
      "rank above observational studies, case reports and expert opinion), "
      "consistency across sources, directness to the question, and precision.\n"
      "Respond in exactly this format:\n"
      "Evidence Strength: <High|Moderate|Low|Very Low>\n\n"
      "Rationale: <one paragraph justifying the level>";

  std::ostringstream user;
  if (claims.empty()) {
    user << "There is no retrieved evidence for this answer. Without supporting "
            "sources the assessment should lean toward Very Low.\n";
  } else {
    user << "Assess the evidence behind the following answered sub-questions.\n";
    for (std::size_t i = 0; i < claims.size(); ++i) {
      const auto& c = claims[i];
      user << "\nSub-question " << (i + 1) << ": " << c.question << "\n"
           << "Answer: " << c.answer << "\n"
           << "Sources:";
      if (c.source_refs.empty()) {
        user << " none (no retrieved context)";
      }
      for (const auto& ref : c.source_refs) user << "\n- " << ref;
      user << "\n";
    }
  }
  if (!citations.empty()) {
    user << "\nReference list:\n";
    for (const auto& cit : citations) user << cit.number << ". " << cit.source_ref << "\n";
  }
  return {{llm::Role::kSystem, system}, {llm::Role::kUser, user.str()}};
}

GradeRecord parse_grade(std::string_view text) {
  const auto lines = util::split_lines(text);
  std::size_t grade_line = lines.size();
  std::optional<EvidenceGrade> level;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto body = strip_markdown_prefix(lines[i]);
    if (util::starts_with_ci(body, "evidence strength:")) {
      grade_line = i;
      auto value = body.substr(std::string_view("evidence strength:").size());
      level = parse_level(value);
      if (!level) {
        throw Error(ErrorCode::kParse, "unrecognized evidence level '" +
                                           std::string(util::trim(value)) + "'");
      }
      break;
    }
  }
  if (grade_line == lines.size()) {
    throw Error(ErrorCode::kParse, "missing 'Evidence Strength:' line");
  }

  for (std::size_t i = grade_line + 1; i < lines.size(); ++i) {
    auto body = strip_markdown_prefix(lines[i]);
    if (!util::starts_with_ci(body, "rationale:")) continue;
    std::string rest(body.substr(std::string_view("rationale:").size()));
    // "**Rationale:** text" leaves emphasis characters behind the colon.
    auto first = rest.find_first_not_of("*_ \t");
    rest = first == std::string::npos ? std::string{} : rest.substr(first);
    std::vector<std::string> tail{rest};
    tail.insert(tail.end(), lines.begin() + static_cast<long>(i) + 1, lines.end());
    std::string rationale(util::trim(util::join(tail, "\n")));
    if (rationale.empty()) throw Error(ErrorCode::kParse, "empty rationale");
    return {*level, std::move(rationale), {}};
  }
  throw Error(ErrorCode::kParse, "missing 'Rationale:' section after the grade");
}

std::string render(EvidenceGrade grade, std::string_view rationale) {
  std::string out = "Evidence Strength: ";
  out += to_string(grade);
  out += "\n\nRationale: ";
  out += rationale;
  return out;
}

std::vector<EvidenceItem> make_evidence_items(std::span<const GradedClaim> claims) {
  std::vector<EvidenceItem> items;
  for (const auto& c : claims) {
    const auto d = util::digest(c.answer);
    for (const auto& ref : c.source_refs) items.push_back({d, ref});
  }
  return items;
}

}  // namespace evidencedesk::grade
