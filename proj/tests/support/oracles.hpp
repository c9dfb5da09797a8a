#pragma once

// Reference computations written from first principles, independent of the
// library implementations they check.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace edtest {

/// Binomial test p-value by enumerating all 2^n outcome sequences (n <= 24).
double binomial_bruteforce(int k, int n, double p0, const std::string& alternative);

/// BH q-values straight from the definition q_(i) = min_{j >= i} m p_(j) / j.
std::vector<double> bh_definition(const std::vector<double>& p);

/// Mid-ranks by counting: #less + (#equal + 1) / 2.
std::vector<double> midranks_by_counting(const std::vector<double>& x);

/// H = (N - 1) sum n_i (rbar_i - rbar)^2 / sum (r - rbar)^2; ties included.
double kruskal_wallis_h_definition(const std::vector<std::vector<double>>& groups);

/// Tie-corrected Friedman statistic (k - 1) sum (R_j - n(k+1)/2)^2 / (A - C)
/// over blocks x treatments.
double friedman_definition(const std::vector<std::vector<double>>& blocks);

/// Chi-square survival function for even degrees of freedom (Poisson sum).
double chi2_sf_even_df(double x, int df);

/// Solves A x = b by Gauss-Jordan elimination with partial pivoting.
std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b);

/// W = (T Q^T + lambda I)(Q Q^T + lambda I)^-1 with plain loops and
/// gauss_solve; rows of q/t are the pair vectors. Row-major d x d.
std::vector<double> ridge_adapter_oracle(const std::vector<std::vector<double>>& q,
                                         const std::vector<std::vector<double>>& t,
                                         double lambda);

/// Random orthogonal d x d matrix (row-major) via Gram-Schmidt.
std::vector<double> random_orthogonal(std::size_t d, std::mt19937_64& rng);

struct ScoredId {
  std::string id;
  double score;
};

/// Cosine of every candidate against the query after rounding candidates to
/// float; full sort by score descending then id ascending; first k.
std::vector<std::string> full_sort_topk(const std::vector<double>& query,
                                        const std::vector<std::string>& ids,
                                        const std::vector<std::vector<double>>& vectors,
                                        std::size_t k);

/// Percentile-bootstrap interval of the median: B resamples drawn as
/// rng() % n from mt19937_64(seed); bounds at floor(a/2 B) and
/// ceil((1 - a/2) B) - 1 of the sorted medians.
std::pair<double, double> bootstrap_median_interval(const std::vector<double>& x, double level,
                                                    std::size_t n_boot, std::uint64_t seed);

/// Reciprocal-rank fusion of the first k entries of each ranked list:
/// sum of 1 / (k_rrf + rank), ties by ascending id.
std::vector<std::string> rrf_fusion(const std::vector<std::vector<std::string>>& lists,
                                    std::size_t k, double k_rrf);

std::vector<double> random_unit_vector(std::size_t d, std::mt19937_64& rng);

}  // namespace edtest
