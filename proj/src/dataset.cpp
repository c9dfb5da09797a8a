#include "evidencedesk/dataset.hpp"

#include "evidencedesk/error.hpp"
#include "evidencedesk/text_util.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace evidencedesk::dataset {

using nlohmann::json;
using nlohmann::ordered_json;

const BenchmarkQuestion* BenchmarkSet::find(std::string_view question_id) const {
  for (const auto& q : questions) {
    if (q.question_id == question_id) return &q;
  }
  return nullptr;
}

BenchmarkSet parse_benchmark(std::string_view text) {
  BenchmarkSet set;
  if (util::trim(text).empty()) return set;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("benchmark file: ") + e.what());
  }
  if (!doc.is_array()) {
    throw Error(ErrorCode::kSchema, "benchmark file must be a JSON array of questions");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    const std::string where = "benchmark record " + std::to_string(i + 1);
    if (!rec.is_object()) throw Error(ErrorCode::kSchema, where + ": not an object");
    auto field = [&](const char* name, bool required) -> std::string {
      auto it = rec.find(name);
      if (it == rec.end() || it->is_null()) {
        if (required) throw Error(ErrorCode::kSchema, where + ": missing '" + name + "'");
        return {};
      }
      if (!it->is_string()) {
        throw Error(ErrorCode::kSchema, where + ": '" + name + "' must be a string");
      }
      return it->get<std::string>();
    };
    BenchmarkQuestion q{field("question_id", true), field("specialty", true),
                        field("question", true), field("source_set", false)};
    if (q.question_id.empty()) throw Error(ErrorCode::kSchema, where + ": empty question_id");
    if (util::trim(q.question).empty()) {
      throw Error(ErrorCode::kSchema, where + ": empty question");
    }
    if (!seen.insert(q.question_id).second) {
      throw Error(ErrorCode::kDuplicateKey, "duplicate question_id '" + q.question_id + "'");
    }
    ++set.counts_by_specialty[q.specialty];
    set.questions.push_back(std::move(q));
  }
  return set;
}

BenchmarkSet load_benchmark(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_benchmark(ss.str());
}

std::string serialize_benchmark(const BenchmarkSet& set) {
  ordered_json arr = ordered_json::array();
  for (const auto& q : set.questions) {
    ordered_json rec;
    rec["question_id"] = q.question_id;
    rec["specialty"] = q.specialty;
    rec["question"] = q.question;
    if (!q.source_set.empty()) rec["source_set"] = q.source_set;
    arr.push_back(std::move(rec));
  }
  return arr.dump(2) + "\n";
}

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(util::trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.emplace_back(util::trim(cur));
  return fields;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

using RatingKey = std::tuple<std::string, std::string, std::string>;

RatingKey key_of(const LikertRating& r) { return {r.rater_id, r.item_id, r.axis_id}; }

}  // namespace

void check_rating(const LikertRating& r) {
  if (r.rater_id.empty() || r.item_id.empty() || r.axis_id.empty()) {
    throw Error(ErrorCode::kSchema, "rating has an empty id field");
  }
  if (r.value < 1 || r.value > 5) {
    throw Error(ErrorCode::kSchema,
                "rating value " + std::to_string(r.value) + " outside 1..5");
  }
}

std::vector<LikertRating> parse_ratings(std::istream& in) {
  std::string line;
  std::vector<LikertRating> out;
  if (!std::getline(in, line)) return out;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (util::trim(line) != kRatingsHeader) {
    throw Error(ErrorCode::kSchema,
                "ratings header must be '" + std::string(kRatingsHeader) + "'");
  }
  std::set<RatingKey> seen;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (util::trim(line).empty()) continue;
    ++row;
    const std::string where = "ratings row " + std::to_string(row);
    auto f = split_csv_line(line);
    if (f.size() != 4) {
      throw Error(ErrorCode::kSchema, where + ": expected 4 fields, got " +
                                          std::to_string(f.size()));
    }
    LikertRating r{f[0], f[1], f[2], 0};
    try {
      std::size_t used = 0;
      r.value = std::stoi(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument(f[3]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kSchema, where + ": value '" + f[3] + "' is not an integer");
    }
    try {
      check_rating(r);
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
    if (!seen.insert(key_of(r)).second) {
      throw Error(ErrorCode::kDuplicateKey, where + ": duplicate rating (" + r.rater_id +
                                                ", " + r.item_id + ", " + r.axis_id + ")");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LikertRating> load_ratings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  return parse_ratings(in);
}

std::string format_rating_row(const LikertRating& r) {
  return csv_field(r.rater_id) + "," + csv_field(r.item_id) + "," +
         csv_field(r.axis_id) + "," + std::to_string(r.value);
}

RatingsLog::RatingsLog(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) ratings_ = load_ratings(path_);
}

void RatingsLog::append(std::span<const LikertRating> ratings) {
  std::lock_guard lock(mu_);
  std::set<RatingKey> keys;
  for (const auto& r : ratings_) keys.insert(key_of(r));
  for (const auto& r : ratings) {
    check_rating(r);
    if (!keys.insert(key_of(r)).second) {
      throw Error(ErrorCode::kDuplicateKey, "rating (" + r.rater_id + ", " + r.item_id +
                                                ", " + r.axis_id + ") already recorded");
    }
  }
  const bool fresh = !std::filesystem::exists(path_) ||
                     std::filesystem::file_size(path_) == 0;
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::kIo, "cannot append to " + path_.string());
  if (fresh) out << kRatingsHeader << '\n';
  for (const auto& r : ratings) out << format_rating_row(r) << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path_.string());
  ratings_.insert(ratings_.end(), ratings.begin(), ratings.end());
}

std::vector<LikertRating> RatingsLog::all() const {
  std::lock_guard lock(mu_);
  return ratings_;
}

const std::vector<ValidationAxis>& validation_axes() {
  static const std::vector<ValidationAxis> axes{
      {"expertise-required", "Expertise Required to Answer", "General Public", "Field Expert"},
      {"clarity", "Clarity of the Question", "Very Confusing/Not Clear",
       "Very Clear/Straightforward"},
      {"depth-of-knowledge", "Depth of Knowledge Required", "Surface Level Knowledge",
       "In-depth Understanding"},
      {"relevance", "Relevance to Current Trends/Research", "Outdated/Not Relevant",
       "Highly Pertinent to Current Practice/Research"},
      {"specificity", "Specificity of the Question", "Very General",
       "Highly Specific to a Particular Topic"},
      {"critical-thinking", "Potential for Critical Thinking", "Purely Factual/Recall-based",
       "Requires Critical Analysis"},
      {"breadth", "Breadth of the Topic Covered", "Very Narrow Area",
       "Broad Spectrum of the Field"},
      {"originality", "Originality of the Question", "Commonly Asked/Typical",
       "Unique/Original Perspective"},
      {"clinical-importance", "Importance in Clinical or Research Setting",
       "Rarely Relevant", "Frequently Encountered/Key Concept"},
      {"assessment-applicability", "Applicability for Assessment",
       "Not Suitable for Testing Knowledge", "Ideal for Gauging Expertise"},
  };
  return axes;
}

const std::vector<EvaluationAxis>& evaluation_axes() {
  static const std::vector<EvaluationAxis> axes{
      {"accuracy", "Factual Accuracy of Answer"},
      {"adequacy", "Adequacy of the Answer"},
      {"formatting", "Correctness in Formatting"},
      {"clarity-precision", "Clarity & Precision"},
      {"citation-relevance", "Citation Relevance and Appropriateness"},
  };
  return axes;
}

std::vector<AxisSummary> summarize_validation(std::span<const LikertRating> ratings,
                                              std::span<const ValidationAxis> axes,
                                              const SummaryOptions& options) {
  std::map<std::string, std::vector<int>> by_axis;
  for (const auto& r : ratings) {
    const bool known = std::any_of(axes.begin(), axes.end(),
                                   [&](const ValidationAxis& a) { return a.axis_id == r.axis_id; });
    if (!known) throw Error(ErrorCode::kNotFound, "unknown axis '" + r.axis_id + "'");
    by_axis[r.axis_id].push_back(r.value);
  }

  std::vector<AxisSummary> rows;
  std::vector<double> p_values;
  for (const auto& axis : axes) {
    auto it = by_axis.find(axis.axis_id);
    if (it == by_axis.end()) continue;
    const auto& values = it->second;
    std::vector<double> as_real(values.begin(), values.end());
    const auto ci = stats::median_with_ci(as_real, options.level, options.n_boot, options.seed);
    const auto [k, n] = stats::proportion_high(values);
    AxisSummary row;
    row.axis_id = axis.axis_id;
    row.n = n;
    row.median = ci.median;
    row.ci_low = ci.ci_low;
    row.ci_high = ci.ci_high;
    row.k_high = k;
    row.p_value = stats::binomial_test(static_cast<int>(k), static_cast<int>(n), options.p0,
                                       options.alternative);
    p_values.push_back(row.p_value);
    rows.push_back(std::move(row));
  }
  const auto q = stats::bh_adjust(p_values);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].q_value = q[i];
  return rows;
}

ModelEvalReport summarize_model_eval(std::span<const LikertRating> ratings,
                                     const BenchmarkSet& benchmark,
                                     std::span<const EvaluationAxis> axes,
                                     const SummaryOptions& options) {
  // specialty order: benchmark order of first appearance
  std::vector<std::string> specialties;
  for (const auto& q : benchmark.questions) {
    if (std::find(specialties.begin(), specialties.end(), q.specialty) == specialties.end()) {
      specialties.push_back(q.specialty);
    }
  }
  std::map<std::pair<std::string, std::string>, std::vector<int>> cells;
  for (const auto& r : ratings) {
    const auto* q = benchmark.find(r.item_id);
    if (!q) {
      throw Error(ErrorCode::kNotFound,
                  "rated item '" + r.item_id + "' is not in the benchmark");
    }
    const bool known = std::any_of(axes.begin(), axes.end(),
                                   [&](const EvaluationAxis& a) { return a.axis_id == r.axis_id; });
    if (!known) throw Error(ErrorCode::kNotFound, "unknown axis '" + r.axis_id + "'");
    cells[{q->specialty, r.axis_id}].push_back(r.value);
  }

  ModelEvalReport report;
  std::vector<double> cell_p;
  std::vector<double> axis_p;
  for (const auto& axis : axes) {
    std::vector<std::vector<double>> groups;
    for (const auto& spec : specialties) {
      auto it = cells.find({spec, axis.axis_id});
      if (it == cells.end()) continue;
      const auto& values = it->second;
      std::vector<double> as_real(values.begin(), values.end());
      const auto [k, n] = stats::proportion_high(values);
      ModelEvalCell cell{spec, axis.axis_id, n, stats::median(as_real), k, 1.0, 1.0};
      cell.p_value = stats::binomial_test(static_cast<int>(k), static_cast<int>(n), options.p0,
                                          options.alternative);
      cell_p.push_back(cell.p_value);
      report.cells.push_back(std::move(cell));
      groups.push_back(std::move(as_real));
    }
    if (groups.size() >= 2) {
      SpecialtyComparison cmp{axis.axis_id, groups.size(), stats::kruskal_wallis(groups), 1.0};
      axis_p.push_back(cmp.kruskal_wallis.p_value);
      report.comparisons.push_back(std::move(cmp));
    }
  }
  const auto cell_q = stats::bh_adjust(cell_p);
  for (std::size_t i = 0; i < report.cells.size(); ++i) report.cells[i].q_value = cell_q[i];
  const auto axis_q = stats::bh_adjust(axis_p);
  for (std::size_t i = 0; i < report.comparisons.size(); ++i) {
    report.comparisons[i].q_value = axis_q[i];
  }
  return report;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string format_validation_table(std::span<const AxisSummary> rows) {
  std::ostringstream os;
  os << "axis,n,median,ci_low,ci_high,k_high,p,q\n";
  for (const auto& r : rows) {
    os << r.axis_id << ',' << r.n << ',' << num(r.median) << ',' << num(r.ci_low) << ','
       << num(r.ci_high) << ',' << r.k_high << ',' << num(r.p_value) << ','
       << num(r.q_value) << '\n';
  }
  return os.str();
}

std::string format_model_eval_tables(const ModelEvalReport& report) {
  std::ostringstream os;
  os << "specialty,axis,n,median,k_high,p,q\n";
  for (const auto& c : report.cells) {
    os << csv_field(c.specialty) << ',' << c.axis_id << ',' << c.n << ',' << num(c.median)
       << ',' << c.k_high << ',' << num(c.p_value) << ',' << num(c.q_value) << '\n';
  }
  os << "\naxis,groups,H,df,p,q\n";
  for (const auto& c : report.comparisons) {
    os << c.axis_id << ',' << c.groups << ',' << num(c.kruskal_wallis.statistic) << ','
       << c.kruskal_wallis.df << ',' << num(c.kruskal_wallis.p_value) << ','
       << num(c.q_value) << '\n';
  }
  return os.str();
}

}  // namespace evidencedesk::dataset
