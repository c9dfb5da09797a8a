#include "evidencedesk/evalstats.hpp"

#include "evidencedesk/error.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace evidencedesk::stats {

Alternative parse_alternative(std::string_view text) {
  if (text == "greater") return Alternative::kGreater;
  if (text == "less") return Alternative::kLess;
  if (text == "two-sided" || text == "two_sided") return Alternative::kTwoSided;
  throw Error(ErrorCode::kInvalidArgument,
              "alternative must be greater, less or two-sided");
}

std::string_view to_string(Alternative alt) {
  switch (alt) {
    case Alternative::kGreater: return "greater";
    case Alternative::kLess: return "less";
    case Alternative::kTwoSided: return "two-sided";
  }
  return "greater";
}

double binomial_pmf(int k, int n, double p) {
  if (k < 0 || k > n) return 0.0;
  if (p == 0.0) return k == 0 ? 1.0 : 0.0;
  if (p == 1.0) return k == n ? 1.0 : 0.0;
  const double log_choose =
      std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return std::exp(log_choose + k * std::log(p) + (n - k) * std::log1p(-p));
}

double binomial_test(int k, int n, double p0, Alternative alternative) {
  if (n < 1 || k < 0 || k > n) {
    throw Error(ErrorCode::kInvalidArgument,
                "binomial test needs 0 <= k <= n and n >= 1 (k=" +
                    std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }
  if (!(p0 > 0.0 && p0 < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "p0 must lie in (0, 1)");
  }
  double p = 0.0;
  switch (alternative) {
    case Alternative::kGreater:
      if (k == 0) return 1.0;
      for (int i = k; i <= n; ++i) p += binomial_pmf(i, n, p0);
      break;
    case Alternative::kLess:
      if (k == n) return 1.0;
      for (int i = 0; i <= k; ++i) p += binomial_pmf(i, n, p0);
      break;
    case Alternative::kTwoSided: {
      const double threshold = binomial_pmf(k, n, p0) * (1.0 + 1e-7);
      for (int i = 0; i <= n; ++i) {
        const double m = binomial_pmf(i, n, p0);
        if (m <= threshold) p += m;
      }
      break;
    }
  }
  return std::min(1.0, p);
}

std::pair<std::size_t, std::size_t> proportion_high(std::span<const int> values) {
  std::size_t k = 0;
  for (int v : values) {
    if (v < 1 || v > 5) {
      throw Error(ErrorCode::kInvalidArgument,
                  "Likert value " + std::to_string(v) + " outside 1..5");
    }
    if (v >= kHighRatingThreshold) ++k;
  }
  return {k, values.size()};
}

std::vector<double> bh_adjust(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "p-value outside [0, 1]");
    }
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> q(m);
  double running = 1.0;
  for (std::size_t i = m; i-- > 0;) {
    const double scaled =
        p_values[order[i]] * static_cast<double>(m) / static_cast<double>(i + 1);
    running = std::min(running, scaled);
    // m p / j >= p holds exactly, but the rounded product can land one ulp below p.
    q[order[i]] = std::max(p_values[order[i]], std::min(1.0, running));
  }
  return q;
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

namespace {

// Sum of t^3 - t over groups of tied values.
double tie_term(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    sum += t * t * t - t;
    i = j + 1;
  }
  return sum;
}

}  // namespace

StatTestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "Kruskal-Wallis needs at least 2 groups");
  }
  std::vector<double> pooled;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "Kruskal-Wallis group " + std::to_string(g) + " is empty");
    }
    pooled.insert(pooled.end(), groups[g].begin(), groups[g].end());
  }
  const double n = static_cast<double>(pooled.size());
  const auto ranks = average_ranks(pooled);
  double sum_term = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double r = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) r += ranks[offset + i];
    sum_term += r * r / static_cast<double>(g.size());
    offset += g.size();
  }
  const double ties = tie_term(pooled);
  StatTestResult res;
  res.df = static_cast<int>(groups.size()) - 1;
  res.tie_corrected = ties > 0.0;
  const double correction = 1.0 - ties / (n * n * n - n);
  if (correction <= 0.0) {
    res.statistic = 0.0;
    res.p_value = 1.0;
    return res;
  }
  const double h = 12.0 / (n * (n + 1.0)) * sum_term - 3.0 * (n + 1.0);
  res.statistic = std::max(0.0, h / correction);
  res.p_value = chi2_sf(res.statistic, res.df);
  return res;
}

StatTestResult friedman(const std::vector<std::vector<double>>& blocks) {
  if (blocks.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "Friedman test needs at least 2 blocks");
  }
  const std::size_t k = blocks.front().size();
  if (k < 2) {
    throw Error(ErrorCode::kInvalidArgument, "Friedman test needs at least 2 treatments");
  }
  std::vector<double> col_sums(k, 0.0);
  double ties = 0.0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].size() != k) {
      throw Error(ErrorCode::kInvalidArgument,
                  "Friedman matrix is incomplete at block " + std::to_string(b));
    }
    const auto ranks = average_ranks(blocks[b]);
    for (std::size_t j = 0; j < k; ++j) col_sums[j] += ranks[j];
    ties += tie_term(blocks[b]);
  }
  const double n = static_cast<double>(blocks.size());
  const double kk = static_cast<double>(k);
  double sum_sq = 0.0;
  for (double r : col_sums) sum_sq += r * r;

  StatTestResult res;
  res.df = static_cast<int>(k) - 1;
  res.tie_corrected = ties > 0.0;
  const double denom = n * kk * (kk + 1.0) - ties / (kk - 1.0);
  if (denom <= 1e-12 * n * kk * (kk + 1.0)) {
    res.statistic = 0.0;
    res.p_value = 1.0;
    return res;
  }
  const double numer = 12.0 * sum_sq - 3.0 * n * n * kk * (kk + 1.0) * (kk + 1.0);
  res.statistic = std::max(0.0, numer / denom);
  res.p_value = chi2_sf(res.statistic, res.df);
  return res;
}

double chi2_sf(double x, int df) {
  if (df <= 0) throw Error(ErrorCode::kInvalidArgument, "df must be positive");
  if (!(x >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "chi-square statistic must be >= 0");
  if (x == 0.0) return 1.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

double median(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "median of empty data");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<long>(mid));
  return (lower + upper) / 2.0;
}

std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

MedianCI median_with_ci(std::span<const double> values, double level,
                        std::size_t n_boot, std::uint64_t seed) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "median of empty data");
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "confidence level must lie in (0, 1)");
  }
  if (n_boot == 0) throw Error(ErrorCode::kInvalidArgument, "n_boot must be positive");

  MedianCI out;
  out.median = median(values);
  std::mt19937_64 rng(seed);
  std::vector<double> boot(n_boot);
  std::vector<double> sample(values.size());
  for (std::size_t b = 0; b < n_boot; ++b) {
    for (auto& s : sample) s = values[draw_index(rng, values.size())];
    boot[b] = median(sample);
  }
  std::sort(boot.begin(), boot.end());
  const double alpha = 1.0 - level;
  const double nb = static_cast<double>(n_boot);
  auto lo = static_cast<std::size_t>(std::floor(alpha / 2.0 * nb));
  auto hi_edge = static_cast<std::size_t>(std::ceil((1.0 - alpha / 2.0) * nb));
  lo = std::min(lo, n_boot - 1);
  const std::size_t hi = std::clamp<std::size_t>(hi_edge, 1, n_boot) - 1;
  out.ci_low = std::min(boot[lo], out.median);
  out.ci_high = std::max(boot[hi], out.median);
  return out;
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "pearson_r needs two equal-length samples of size >= 2");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "pearson_r of a zero-variance sample");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman_brown(double r) {
  if (r <= -1.0) return -1.0;
  return 2.0 * r / (1.0 + r);
}

ReliabilityResult split_half_reliability(const std::vector<std::vector<double>>& ratings,
                                         std::size_t n_splits, std::uint64_t seed) {
  const std::size_t raters = ratings.size();
  if (raters < 2) throw Error(ErrorCode::kInvalidArgument, "split-half needs >= 2 raters");
  const std::size_t items = ratings.front().size();
  if (items < 2) throw Error(ErrorCode::kInvalidArgument, "split-half needs >= 2 items");
  for (const auto& row : ratings) {
    if (row.size() != items) {
      throw Error(ErrorCode::kInvalidArgument, "ratings matrix is incomplete");
    }
  }
  if (n_splits == 0) throw Error(ErrorCode::kInvalidArgument, "n_splits must be positive");

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(raters);
  const std::size_t half = raters / 2;
  double sum_r = 0.0;
  for (std::size_t s = 0; s < n_splits; ++s) {
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = raters - 1; i > 0; --i) {
      std::swap(perm[i], perm[draw_index(rng, i + 1)]);
    }
    std::vector<double> mean_a(items, 0.0), mean_b(items, 0.0);
    for (std::size_t r = 0; r < raters; ++r) {
      auto& target = r < half ? mean_a : mean_b;
      for (std::size_t j = 0; j < items; ++j) target[j] += ratings[perm[r]][j];
    }
    for (std::size_t j = 0; j < items; ++j) {
      mean_a[j] /= static_cast<double>(half);
      mean_b[j] /= static_cast<double>(raters - half);
    }
    sum_r += pearson_r(mean_a, mean_b);
  }
  ReliabilityResult res;
  res.mean_split_r = sum_r / static_cast<double>(n_splits);
  res.corrected_r = spearman_brown(res.mean_split_r);
  res.n_splits = n_splits;
  res.seed = seed;
  return res;
}

}  // namespace evidencedesk::stats
