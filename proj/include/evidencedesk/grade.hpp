#pragma once

#include "evidencedesk/llm_client.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evidencedesk::grade {

/// The four GRADE certainty levels.
enum class EvidenceGrade { kHigh, kModerate, kLow, kVeryLow };

inline constexpr EvidenceGrade kAllGrades[] = {
    EvidenceGrade::kHigh, EvidenceGrade::kModerate, EvidenceGrade::kLow,
    EvidenceGrade::kVeryLow};

/// "High", "Moderate", "Low" or "Very Low".
std::string_view to_string(EvidenceGrade grade);

/// Case- and whitespace-insensitive; surrounding markdown emphasis and a
/// trailing period are ignored. nullopt for anything else.
std::optional<EvidenceGrade> parse_level(std::string_view token);

struct EvidenceItem {
  std::string claim_digest;
  std::string source_ref;

  bool operator==(const EvidenceItem&) const = default;
};

struct GradeRecord {
  EvidenceGrade grade = EvidenceGrade::kVeryLow;
  std::string rationale;
  std::vector<EvidenceItem> evidence_items;
};

struct Citation {
  int number = 0;
  std::string source_ref;

  bool operator==(const Citation&) const = default;
};

/// One answered sub-question as seen by the grader.
struct GradedClaim {
  std::string question;
  std::string answer;
  std::vector<std::string> source_refs;
};

/// System message: the four levels and the criteria summary; user message:
/// every claim with its sources, or a no-evidence notice. Output format is
/// "Evidence Strength: <level>" followed by "Rationale: <text>".
std::vector<llm::ChatMessage> build_grade_prompt(std::span<const GradedClaim> claims,
                                                 std::span<const Citation> citations);

/// Grade taken from the first "Evidence Strength:" line; the rationale is
/// everything after the first "Rationale:" that follows it. Throws kParse for
/// a missing grade line, an unknown level or a missing/empty rationale.
GradeRecord parse_grade(std::string_view text);

/// "Evidence Strength: <level>\n\nRationale: <rationale>".
std::string render(EvidenceGrade grade, std::string_view rationale);

/// One item per (claim, source) pair, keyed by a digest of the claim text.
std::vector<EvidenceItem> make_evidence_items(std::span<const GradedClaim> claims);

/// Strips leading markdown decoration ('*', '_', '#', '>', whitespace).
std::string_view strip_markdown_prefix(std::string_view line);

}  // namespace evidencedesk::grade
