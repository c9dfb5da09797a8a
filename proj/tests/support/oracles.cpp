#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace edtest {

double binomial_bruteforce(int k, int n, double p0, const std::string& alternative) {
  if (n > 24) throw std::invalid_argument("n too large for enumeration");
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1, 0.0);
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    const int ones = __builtin_popcount(mask);
    double prob = 1.0;
    for (int i = 0; i < n; ++i) prob *= ((mask >> i) & 1u) ? p0 : 1.0 - p0;
    pmf[static_cast<std::size_t>(ones)] += prob;
  }
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double pi = pmf[static_cast<std::size_t>(i)];
    if (alternative == "greater" && i >= k) total += pi;
    if (alternative == "less" && i <= k) total += pi;
    if (alternative == "two-sided" && pi <= pmf[static_cast<std::size_t>(k)] * (1.0 + 1e-7)) {
      total += pi;
    }
  }
  return std::min(1.0, total);
}

std::vector<double> bh_definition(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  std::vector<double> q(m);
  for (std::size_t i = 0; i < m; ++i) {
    double best = 1.0;
    for (std::size_t j = i; j < m; ++j) {
      best = std::min(best, static_cast<double>(m) * p[order[j]] / static_cast<double>(j + 1));
    }
    q[order[i]] = best;
  }
  return q;
}

std::vector<double> midranks_by_counting(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0.0, equal = 0.0;
    for (double y : x) {
      if (y < x[i]) less += 1.0;
      if (y == x[i]) equal += 1.0;
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

double kruskal_wallis_h_definition(const std::vector<std::vector<double>>& groups) {
  std::vector<double> all;
  for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
  const auto r = midranks_by_counting(all);
  const double n = static_cast<double>(all.size());
  const double rbar = (n + 1.0) / 2.0;
  double between = 0.0, total = 0.0;
  std::size_t pos = 0;
  for (const auto& g : groups) {
    double sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) sum += r[pos + i];
    const double mean = sum / static_cast<double>(g.size());
    between += static_cast<double>(g.size()) * (mean - rbar) * (mean - rbar);
    pos += g.size();
  }
  for (double ri : r) total += (ri - rbar) * (ri - rbar);
  return total == 0.0 ? 0.0 : (n - 1.0) * between / total;
}

double friedman_definition(const std::vector<std::vector<double>>& blocks) {
  const double n = static_cast<double>(blocks.size());
  const std::size_t k = blocks.front().size();
  std::vector<double> rank_sums(k, 0.0);
  double a = 0.0;
  for (const auto& b : blocks) {
    const auto r = midranks_by_counting(b);
    for (std::size_t j = 0; j < k; ++j) {
      rank_sums[j] += r[j];
      a += r[j] * r[j];
    }
  }
  const double kk = static_cast<double>(k);
  const double c = n * kk * (kk + 1.0) * (kk + 1.0) / 4.0;
  double num = 0.0;
  for (double rj : rank_sums) {
    const double d = rj - n * (kk + 1.0) / 2.0;
    num += d * d;
  }
  return (a - c) == 0.0 ? 0.0 : (kk - 1.0) * num / (a - c);
}

double chi2_sf_even_df(double x, int df) {
  if (df % 2 != 0) throw std::invalid_argument("even df only");
  const double half = x / 2.0;
  double term = 1.0, sum = 0.0;
  for (int i = 0; i < df / 2; ++i) {
    if (i > 0) term *= half / i;
    sum += term;
  }
  return std::exp(-half) * sum;
}

std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    }
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    if (a[col][col] == 0.0) throw std::runtime_error("singular system");
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= a[i][i];
  return b;
}

std::vector<double> ridge_adapter_oracle(const std::vector<std::vector<double>>& q,
                                         const std::vector<std::vector<double>>& t,
                                         double lambda) {
  const std::size_t d = q.front().size();
  std::vector<std::vector<double>> gram(d, std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> cross(d, std::vector<double>(d, 0.0));
  for (std::size_t p = 0; p < q.size(); ++p) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        gram[i][j] += q[p][i] * q[p][j];
        cross[i][j] += t[p][i] * q[p][j];
      }
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    gram[i][i] += lambda;
    cross[i][i] += lambda;
  }
  // W gram = cross, gram symmetric: row i of W solves gram w_i = cross_i.
  std::vector<double> w(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    const auto row = gauss_solve(gram, cross[i]);
    std::copy(row.begin(), row.end(), w.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return w;
}

std::vector<double> random_orthogonal(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> rows;
  while (rows.size() < d) {
    std::vector<double> v(d);
    for (auto& x : v) x = normal(rng);
    for (const auto& u : rows) {
      const double dot = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
      for (std::size_t i = 0; i < d; ++i) v[i] -= dot * u[i];
    }
    const double len = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (len < 1e-8) continue;
    for (auto& x : v) x /= len;
    rows.push_back(std::move(v));
  }
  std::vector<double> out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

std::vector<std::string> full_sort_topk(const std::vector<double>& query,
                                        const std::vector<std::string>& ids,
                                        const std::vector<std::vector<double>>& vectors,
                                        std::size_t k) {
  std::vector<ScoredId> scored;
  double qq = 0.0;
  for (double x : query) qq += x * x;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    double dot = 0.0, vv = 0.0;
    for (std::size_t j = 0; j < query.size(); ++j) {
      const double v = static_cast<double>(static_cast<float>(vectors[i][j]));
      dot += query[j] * v;
      vv += v * v;
    }
    scored.push_back({ids[i], dot / (std::sqrt(qq) * std::sqrt(vv))});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) out.push_back(scored[i].id);
  return out;
}

namespace {
double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}
}  // namespace

std::pair<double, double> bootstrap_median_interval(const std::vector<double>& x, double level,
                                                    std::size_t n_boot, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> medians;
  std::vector<double> sample(x.size());
  for (std::size_t b = 0; b < n_boot; ++b) {
    for (auto& s : sample) s = x[rng() % x.size()];
    medians.push_back(median_of(sample));
  }
  std::sort(medians.begin(), medians.end());
  const double alpha = 1.0 - level;
  const auto lo = static_cast<std::size_t>(std::floor(alpha / 2.0 * static_cast<double>(n_boot)));
  auto hi = static_cast<std::size_t>(std::ceil((1.0 - alpha / 2.0) * static_cast<double>(n_boot)));
  hi = hi == 0 ? 0 : hi - 1;
  const double m = median_of(x);
  return {std::min(medians[lo], m), std::max(medians[std::min(hi, n_boot - 1)], m)};
}

std::vector<double> random_unit_vector(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> v(d);
  double len = 0.0;
  do {
    len = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      len += x * x;
    }
  } while (len == 0.0);
  len = std::sqrt(len);
  for (auto& x : v) x /= len;
  return v;
}

std::vector<std::string> rrf_fusion(const std::vector<std::vector<std::string>>& lists,
                                    std::size_t k, double k_rrf) {
  std::map<std::string, double> score;
  for (const auto& list : lists) {
    for (std::size_t r = 0; r < k && r < list.size(); ++r) {
      score[list[r]] += 1.0 / (k_rrf + static_cast<double>(r + 1));
    }
  }
  std::vector<std::pair<double, std::string>> order;
  for (const auto& [id, s] : score) order.emplace_back(s, id);
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (const auto& o : order) out.push_back(o.second);
  return out;
}

}  // namespace edtest
