#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace evidencedesk::stats {

enum class Alternative { kGreater, kLess, kTwoSided };

Alternative parse_alternative(std::string_view text);
std::string_view to_string(Alternative alt);

inline constexpr double kDefaultNullProportion = 0.5;
inline constexpr std::size_t kDefaultBootstrapResamples = 10000;
inline constexpr std::size_t kDefaultSplits = 200;
inline constexpr int kHighRatingThreshold = 4;

double binomial_pmf(int k, int n, double p);

/// Exact binomial test p-value. kTwoSided sums every outcome whose mass does
/// not exceed mass(k) (relative tolerance 1e-7).
double binomial_test(int k, int n, double p0,
                     Alternative alternative = Alternative::kGreater);

/// (count of values >= 4, total). Values must lie in 1..5.
std::pair<std::size_t, std::size_t> proportion_high(std::span<const int> values);

/// Benjamini-Hochberg step-up q-values, returned in input order.
std::vector<double> bh_adjust(std::span<const double> p_values);

struct StatTestResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool tie_corrected = false;
};

/// Average ranks (1-based) of `values`; tied values share the mean rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Kruskal-Wallis H with tie correction; all-identical data gives H = 0, p = 1.
StatTestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

/// Friedman chi-square over an n x k matrix (rows are blocks, columns are
/// treatments) with the within-row tie correction; constant rows give 0, p = 1.
StatTestResult friedman(const std::vector<std::vector<double>>& blocks);

/// Upper tail of the chi-square distribution.
double chi2_sf(double x, int df);

/// Sample median; the mean of the middle two for even n.
double median(std::span<const double> values);

struct MedianCI {
  double median = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Index in [0, n) drawn for bootstrap resampling and rater splits:
/// the next std::mt19937_64 output modulo n.
std::size_t draw_index(std::mt19937_64& rng, std::size_t n);

/// Percentile bootstrap of the median. Each of n_boot resamples draws n
/// indices with draw_index from one std::mt19937_64 seeded with `seed`. The
/// bounds are the sorted resample medians at 0-based positions
/// floor(a/2 * B) and ceil((1 - a/2) * B) - 1 with a = 1 - level, widened
/// if needed so they bracket the sample median.
MedianCI median_with_ci(std::span<const double> values, double level = 0.95,
                        std::size_t n_boot = kDefaultBootstrapResamples,
                        std::uint64_t seed = 0);

double pearson_r(std::span<const double> x, std::span<const double> y);

/// Spearman-Brown step-up for a split-half correlation: 2r / (1 + r).
/// Returns -1 for r <= -1.
double spearman_brown(double r);

struct ReliabilityResult {
  double mean_split_r = 0.0;
  double corrected_r = 0.0;
  std::size_t n_splits = 0;
  std::uint64_t seed = 0;
};

/// `ratings` is raters x items. Each split shuffles the raters (Fisher-Yates
/// driven by draw_index) and puts the first floor(R/2) in one half; the
/// per-item mean ratings of the halves are correlated, averaged over splits
/// and corrected with spearman_brown.
ReliabilityResult split_half_reliability(
    const std::vector<std::vector<double>>& ratings,
    std::size_t n_splits = kDefaultSplits, std::uint64_t seed = 0);

}  // namespace evidencedesk::stats
