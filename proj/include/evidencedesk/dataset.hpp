#pragma once

#include "evidencedesk/evalstats.hpp"

#include <filesystem>
#include <istream>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evidencedesk::dataset {

struct BenchmarkQuestion {
  std::string question_id;
  std::string specialty;
  std::string question;
  std::string source_set;

  bool operator==(const BenchmarkQuestion&) const = default;
};

inline const std::vector<std::string> kExpertSpecialties{
    "Pediatrics", "Internal Medicine", "Psychiatry", "Neurology"};

struct BenchmarkSet {
  std::vector<BenchmarkQuestion> questions;
  std::map<std::string, std::size_t> counts_by_specialty;

  std::size_t total() const { return questions.size(); }
  const BenchmarkQuestion* find(std::string_view question_id) const;
};

/// JSON array of {question_id, specialty, question[, source_set]}. Blank input
/// is an empty set. Throws kSchema naming the 1-based record and
/// kDuplicateKey naming the id.
BenchmarkSet parse_benchmark(std::string_view text);
BenchmarkSet load_benchmark(const std::filesystem::path& path);
/// Pretty JSON with a fixed field order.
std::string serialize_benchmark(const BenchmarkSet& set);

struct LikertRating {
  std::string rater_id;
  std::string item_id;
  std::string axis_id;
  int value = 0;

  bool operator==(const LikertRating&) const = default;
};

inline constexpr std::string_view kRatingsHeader = "rater_id,item_id,axis_id,value";

/// Delimited ratings with header kRatingsHeader. Row numbers in errors count
/// data rows from 1 (the header is row 0).
std::vector<LikertRating> parse_ratings(std::istream& in);
std::vector<LikertRating> load_ratings(const std::filesystem::path& path);
std::string format_rating_row(const LikertRating& r);

/// Throws kSchema for a value outside 1..5 or an empty id.
void check_rating(const LikertRating& r);

/// Append-only ratings file shared by the CLI and the HTTP service.
class RatingsLog {
 public:
  explicit RatingsLog(std::filesystem::path path);

  /// All-or-nothing; kDuplicateKey if any (rater, item, axis) already exists.
  void append(std::span<const LikertRating> ratings);
  std::vector<LikertRating> all() const;

 private:
  std::filesystem::path path_;
  std::vector<LikertRating> ratings_;
  mutable std::mutex mu_;
};

struct ValidationAxis {
  std::string axis_id;
  std::string label;
  std::string anchor_low;
  std::string anchor_high;
};

struct EvaluationAxis {
  std::string axis_id;
  std::string label;
};

/// The ten question-validation axes, expertise-required first.
const std::vector<ValidationAxis>& validation_axes();
/// accuracy, adequacy, formatting, clarity-precision, citation-relevance.
const std::vector<EvaluationAxis>& evaluation_axes();

struct AxisSummary {
  std::string axis_id;
  std::size_t n = 0;
  double median = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t k_high = 0;
  double p_value = 1.0;
  double q_value = 1.0;
};

struct SummaryOptions {
  double p0 = stats::kDefaultNullProportion;
  stats::Alternative alternative = stats::Alternative::kGreater;
  double level = 0.95;
  std::size_t n_boot = stats::kDefaultBootstrapResamples;
  std::uint64_t seed = 0;
};

/// Per axis, over all pooled (rater, item) values: median with bootstrap CI,
/// proportion of ratings >= 4 and its binomial test; q-values by BH across
/// the axes that have ratings. Rows follow `axes` order; axes without
/// ratings are omitted. kNotFound for a rating on an axis not in `axes`.
std::vector<AxisSummary> summarize_validation(std::span<const LikertRating> ratings,
                                              std::span<const ValidationAxis> axes,
                                              const SummaryOptions& options = {});

struct ModelEvalCell {
  std::string specialty;
  std::string axis_id;
  std::size_t n = 0;
  double median = 0.0;
  std::size_t k_high = 0;
  double p_value = 1.0;
  double q_value = 1.0;
};

struct SpecialtyComparison {
  std::string axis_id;
  std::size_t groups = 0;
  stats::StatTestResult kruskal_wallis;
  double q_value = 1.0;
};

struct ModelEvalReport {
  std::vector<ModelEvalCell> cells;
  std::vector<SpecialtyComparison> comparisons;
};

/// Ratings are tagged with a specialty through item_id -> benchmark question.
/// Cells: median and binomial test per (specialty, axis), BH across cells.
/// Comparisons: Kruskal-Wallis across specialties on the pooled ratings of
/// each axis with data in >= 2 specialties, BH across those axes.
ModelEvalReport summarize_model_eval(std::span<const LikertRating> ratings,
                                     const BenchmarkSet& benchmark,
                                     std::span<const EvaluationAxis> axes,
                                     const SummaryOptions& options = {});

std::string format_validation_table(std::span<const AxisSummary> rows);
std::string format_model_eval_tables(const ModelEvalReport& report);

}  // namespace evidencedesk::dataset
