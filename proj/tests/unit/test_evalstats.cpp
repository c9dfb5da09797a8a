#include "evidencedesk/error.hpp"
#include "evidencedesk/evalstats.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace ed = evidencedesk;
namespace st = evidencedesk::stats;
using st::Alternative;

TEST(Binomial, Examples) {
  EXPECT_NEAR(st::binomial_test(10, 10, 0.5, Alternative::kGreater), 0.0009765625, 1e-15);
  EXPECT_DOUBLE_EQ(st::binomial_test(0, 10, 0.5, Alternative::kGreater), 1.0);
  EXPECT_NEAR(st::binomial_test(7, 10, 0.5, Alternative::kGreater), 176.0 / 1024.0, 1e-15);
  EXPECT_THROW(st::binomial_test(11, 10, 0.5), ed::Error);
  EXPECT_THROW(st::binomial_test(3, 10, 0.0), ed::Error);
  EXPECT_THROW(st::binomial_test(3, 10, 1.0), ed::Error);
  EXPECT_THROW(st::binomial_test(0, 0, 0.5), ed::Error);
  EXPECT_THROW(st::binomial_test(-1, 10, 0.5), ed::Error);
}

TEST(Binomial, MatchesEnumeration) {
  for (int n = 1; n <= 14; ++n) {
    for (int k = 0; k <= n; ++k) {
      for (double p0 : {0.5, 0.4, 0.2, 0.73}) {
        EXPECT_NEAR(st::binomial_test(k, n, p0, Alternative::kGreater),
                    edtest::binomial_bruteforce(k, n, p0, "greater"), 1e-12);
        EXPECT_NEAR(st::binomial_test(k, n, p0, Alternative::kLess),
                    edtest::binomial_bruteforce(k, n, p0, "less"), 1e-12);
        EXPECT_NEAR(st::binomial_test(k, n, p0, Alternative::kTwoSided),
                    edtest::binomial_bruteforce(k, n, p0, "two-sided"), 1e-12)
            << k << "/" << n << " p0 " << p0;
      }
    }
  }
}

TEST(Binomial, TailsComplement) {
  for (int n = 1; n <= 40; ++n) {
    for (int k = 1; k <= n; ++k) {
      const double upper = st::binomial_test(k, n, 0.37, Alternative::kGreater);
      const double lower = st::binomial_test(k - 1, n, 0.37, Alternative::kLess);
      EXPECT_NEAR(upper + lower, 1.0, 1e-12);
    }
  }
}

using Count = std::pair<std::size_t, std::size_t>;

TEST(ProportionHigh, Examples) {
  EXPECT_EQ(st::proportion_high(std::vector<int>{4, 5, 4}), (Count{3, 3}));
  EXPECT_EQ(st::proportion_high(std::vector<int>{1, 2, 3}), (Count{0, 3}));
  EXPECT_EQ(st::proportion_high(std::vector<int>{3, 4}), (Count{1, 2}));
  EXPECT_THROW(st::proportion_high(std::vector<int>{0}), ed::Error);
  EXPECT_THROW(st::proportion_high(std::vector<int>{6}), ed::Error);
}

TEST(BH, Examples) {
  const auto q = st::bh_adjust(std::vector<double>{0.01, 0.04, 0.03, 0.002});
  const std::vector<double> expected{0.02, 0.04, 0.04, 0.008};
  ASSERT_EQ(q.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(q[i], expected[i]);
  const auto same = st::bh_adjust(std::vector<double>{0.2, 0.2, 0.2});
  for (double x : same) EXPECT_DOUBLE_EQ(x, 0.2);
  EXPECT_DOUBLE_EQ(st::bh_adjust(std::vector<double>{0.37})[0], 0.37);
  EXPECT_TRUE(st::bh_adjust({}).empty());
  EXPECT_THROW(st::bh_adjust(std::vector<double>{0.1, 1.2}), ed::Error);
  EXPECT_THROW(st::bh_adjust(std::vector<double>{-0.1}), ed::Error);
}

TEST(BH, PropertiesOnSeededVectors) {
  std::mt19937_64 rng(1000);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> p(1 + rng() % 30);
    for (auto& x : p) {
      x = u(rng);
      if (rng() % 5 == 0) x = x * x * x * 0.01;
      if (rng() % 9 == 0) x = p.front();
    }
    const auto q = st::bh_adjust(p);
    const auto oracle = edtest::bh_definition(p);
    std::vector<std::size_t> perm(p.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pp(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) pp[i] = p[perm[i]];
    const auto qp = st::bh_adjust(pp);
    for (std::size_t i = 0; i < p.size(); ++i) {
      ASSERT_GE(q[i], p[i]);
      ASSERT_LE(q[i], 1.0);
      ASSERT_NEAR(q[i], oracle[i], 1e-15);
      ASSERT_DOUBLE_EQ(qp[i], q[perm[i]]) << "permutation equivariance";
    }
  }
}

TEST(Ranks, AverageRanks) {
  EXPECT_EQ(st::average_ranks(std::vector<double>{10, 20, 20, 5}),
            (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(KruskalWallis, Examples) {
  const auto a = st::kruskal_wallis({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
  EXPECT_NEAR(a.statistic, 7.2, 1e-9);
  EXPECT_EQ(a.df, 2);
  EXPECT_NEAR(a.p_value, std::exp(-3.6), 1e-9);
  const auto b = st::kruskal_wallis({{1, 1}, {1, 1}});
  EXPECT_EQ(b.statistic, 0.0);
  EXPECT_EQ(b.p_value, 1.0);
  const auto c = st::kruskal_wallis({{1, 2}, {3, 4}});
  EXPECT_NEAR(c.statistic, 2.4, 1e-12);
  EXPECT_EQ(c.df, 1);
  EXPECT_THROW(st::kruskal_wallis({{1, 2}}), ed::Error);
  EXPECT_THROW(st::kruskal_wallis({{1, 2}, {}}), ed::Error);
}

TEST(Friedman, Examples) {
  const auto a = st::friedman({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
  EXPECT_NEAR(a.statistic, 6.0, 1e-9);
  EXPECT_EQ(a.df, 2);
  EXPECT_NEAR(a.p_value, std::exp(-3.0), 1e-9);
  const auto b = st::friedman({{2, 2, 2}, {5, 5, 5}});
  EXPECT_EQ(b.statistic, 0.0);
  EXPECT_EQ(b.p_value, 1.0);
  EXPECT_NEAR(st::friedman({{1, 2}, {2, 1}}).statistic, 0.0, 1e-12);
  EXPECT_THROW(st::friedman({{1, 2, 3}, {1, 2}}), ed::Error);
  EXPECT_THROW(st::friedman({{1, 2, 3}}), ed::Error);
}

TEST(RankTests, AgreeWithDefinitionOracles) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    // Kruskal-Wallis, N <= 12 with Likert-like ties.
    std::vector<std::vector<double>> groups(2 + rng() % 3);
    std::size_t total = 0;
    for (auto& g : groups) {
      g.resize(1 + rng() % 3);
      for (auto& x : g) x = static_cast<double>(1 + rng() % 5);
      total += g.size();
    }
    ASSERT_LE(total, 12u);
    const auto kw = st::kruskal_wallis(groups);
    EXPECT_NEAR(kw.statistic, edtest::kruskal_wallis_h_definition(groups), 1e-9);
    if (kw.df % 2 == 0 && kw.statistic > 0) {
      EXPECT_NEAR(kw.p_value, edtest::chi2_sf_even_df(kw.statistic, kw.df), 1e-10);
    }

    std::vector<std::vector<double>> blocks(2 + rng() % 3, std::vector<double>(2 + rng() % 3));
    for (auto& b : blocks) {
      for (auto& x : b) x = static_cast<double>(1 + rng() % 4);
    }
    const auto fr = st::friedman(blocks);
    EXPECT_NEAR(fr.statistic, edtest::friedman_definition(blocks), 1e-9) << "trial " << trial;
  }
}

TEST(RankTests, InvariantUnderIncreasingTransform) {
  std::mt19937_64 rng(500);
  auto transform = [](std::vector<std::vector<double>> m) {
    for (auto& row : m) {
      for (auto& x : row) x = 10.0 * x + 7.0;
    }
    return m;
  };
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::vector<double>> groups(2 + rng() % 4);
    for (auto& g : groups) {
      g.resize(1 + rng() % 6);
      for (auto& x : g) x = static_cast<double>(rng() % 7) - 2.5;
    }
    const auto a = st::kruskal_wallis(groups);
    const auto b = st::kruskal_wallis(transform(groups));
    EXPECT_NEAR(a.statistic, b.statistic, 1e-9);
    EXPECT_NEAR(a.p_value, b.p_value, 1e-12);

    std::vector<std::vector<double>> blocks(2 + rng() % 5, std::vector<double>(2 + rng() % 4));
    for (auto& r : blocks) {
      for (auto& x : r) x = static_cast<double>(rng() % 5);
    }
    const auto c = st::friedman(blocks);
    const auto d = st::friedman(transform(blocks));
    EXPECT_NEAR(c.statistic, d.statistic, 1e-9);
    EXPECT_NEAR(c.p_value, d.p_value, 1e-12);
  }
}

TEST(Chi2, ClosedFormsAndAccuracy) {
  EXPECT_DOUBLE_EQ(st::chi2_sf(0.0, 3), 1.0);
  EXPECT_NEAR(st::chi2_sf(7.2, 2), std::exp(-3.6), 1e-12);
  EXPECT_NEAR(st::chi2_sf(6.0, 2), std::exp(-3.0), 1e-12);
  for (int df = 2; df <= 50; df += 2) {
    for (double x = 0.5; x <= 200.0; x *= 1.7) {
      EXPECT_NEAR(st::chi2_sf(x, df), edtest::chi2_sf_even_df(x, df), 1e-10) << df << " " << x;
    }
  }
  // df = 1: P(|Z| > sqrt(x)).
  EXPECT_NEAR(st::chi2_sf(3.841458820694124, 1), 0.05, 1e-10);
  EXPECT_THROW(st::chi2_sf(-1.0, 2), ed::Error);
}

TEST(Median, Examples) {
  const auto c = st::median_with_ci(std::vector<double>{4, 4, 4, 4}, 0.95, 500, 1);
  EXPECT_EQ(c.median, 4.0);
  EXPECT_EQ(c.ci_low, 4.0);
  EXPECT_EQ(c.ci_high, 4.0);
  EXPECT_DOUBLE_EQ(st::median(std::vector<double>{1, 2, 3, 4}), 2.5);
  EXPECT_THROW(st::median_with_ci({}, 0.95, 10, 1), ed::Error);
}

TEST(Median, BootstrapMatchesIndependentResampler) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x(100);
    for (auto& v : x) v = static_cast<double>(1 + gen() % 5);
    for (std::size_t b : {1000u, 2000u}) {
      const auto got = st::median_with_ci(x, 0.95, b, 1234 + trial);
      const auto [lo, hi] = edtest::bootstrap_median_interval(x, 0.95, b, 1234 + trial);
      EXPECT_EQ(got.ci_low, lo);
      EXPECT_EQ(got.ci_high, hi);
      EXPECT_LE(got.ci_low, got.median);
      EXPECT_GE(got.ci_high, got.median);
    }
  }
  std::vector<double> y(37);
  for (auto& v : y) v = std::fmod(static_cast<double>(gen() % 1000), 17.0);
  const auto a = st::median_with_ci(y, 0.9, 3000, 5);
  const auto b = st::median_with_ci(y, 0.9, 3000, 5);
  EXPECT_EQ(a.ci_low, b.ci_low);
  EXPECT_EQ(a.ci_high, b.ci_high);
  const auto [lo, hi] = edtest::bootstrap_median_interval(y, 0.9, 3000, 5);
  EXPECT_EQ(a.ci_low, lo);
  EXPECT_EQ(a.ci_high, hi);
}

TEST(Pearson, Examples) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_NEAR(st::pearson_r(x, x), 1.0, 1e-15);
  EXPECT_NEAR(st::pearson_r(x, std::vector<double>{-1, -2, -3}), -1.0, 1e-15);
  EXPECT_NEAR(st::pearson_r(x, std::vector<double>{1, 2, 4}), 0.9819805060619657, 1e-12);
  EXPECT_THROW(st::pearson_r(x, std::vector<double>{2, 2, 2}), ed::Error);
  EXPECT_THROW(st::pearson_r(x, std::vector<double>{1, 2}), ed::Error);
}

TEST(SpearmanBrown, ValuesAndMonotonicity) {
  EXPECT_NEAR(st::spearman_brown(0.83486), 0.9100, 2e-4);
  EXPECT_DOUBLE_EQ(st::spearman_brown(0.0), 0.0);
  EXPECT_DOUBLE_EQ(st::spearman_brown(1.0), 1.0);
  double prev = -std::numeric_limits<double>::infinity();
  for (double r = -0.99; r <= 1.0; r += 0.01) {
    const double s = st::spearman_brown(r);
    EXPECT_NEAR(s, 2 * r / (1 + r), 1e-12);
    EXPECT_GT(s, prev);
    // Inverse: r = s / (2 - s).
    EXPECT_NEAR(s / (2.0 - s), r, 1e-12);
    prev = s;
  }
}

TEST(SplitHalf, IdenticalRatersAndDeterminism) {
  const std::vector<double> item_scores{1, 3, 2, 5, 4, 4, 2};
  std::vector<std::vector<double>> same(6, item_scores);
  const auto r = st::split_half_reliability(same, 50, 3);
  EXPECT_NEAR(r.mean_split_r, 1.0, 1e-12);
  EXPECT_NEAR(r.corrected_r, 1.0, 1e-12);
  EXPECT_EQ(r.n_splits, 50u);

  std::mt19937_64 rng(4);
  std::vector<std::vector<double>> noisy(21, std::vector<double>(30));
  for (std::size_t j = 0; j < 30; ++j) {
    const int base = 1 + static_cast<int>(rng() % 5);
    for (auto& row : noisy) row[j] = std::clamp(base + static_cast<int>(rng() % 3) - 1, 1, 5);
  }
  const auto a = st::split_half_reliability(noisy, 200, 11);
  const auto b = st::split_half_reliability(noisy, 200, 11);
  EXPECT_EQ(a.mean_split_r, b.mean_split_r);
  EXPECT_NEAR(a.corrected_r, 2 * a.mean_split_r / (1 + a.mean_split_r), 1e-12);
  EXPECT_GT(a.corrected_r, a.mean_split_r);
  EXPECT_THROW(st::split_half_reliability({{1, 2}}, 10, 1), ed::Error);
}
