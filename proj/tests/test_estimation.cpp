// Copyright 2026 The pierisk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "pierisk/bounds.hpp"
#include "pierisk/estimation.hpp"

namespace pierisk {
namespace {

// Fixed data set with exact frequencies p over |X| symbols.
std::vector<Symbol> fixed_data(std::span<const double> p, std::size_t n) {
  std::vector<Symbol> out;
  for (std::size_t x = 0; x < p.size(); ++x) {
    const auto c = static_cast<std::size_t>(std::llround(p[x] * static_cast<double>(n)));
    out.insert(out.end(), c, static_cast<Symbol>(x));
  }
  return out;
}

struct Moments {
  std::vector<double> mean;
  std::vector<double> var;
};

template <typename Draw>
Moments monte_carlo(std::size_t reps, std::size_t k, Draw&& draw) {
  Moments m{std::vector<double>(k, 0.0), std::vector<double>(k, 0.0)};
  std::vector<double> sq(k, 0.0);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto est = draw(r);
    for (std::size_t x = 0; x < k; ++x) {
      m.mean[x] += est[x];
      sq[x] += est[x] * est[x];
    }
  }
  const double R = static_cast<double>(reps);
  for (std::size_t x = 0; x < k; ++x) {
    m.mean[x] /= R;
    m.var[x] = (sq[x] - R * m.mean[x] * m.mean[x]) / (R - 1.0);
  }
  return m;
}

const std::vector<double> kTruth{0.3, 0.2, 0.15, 0.1, 0.1, 0.1, 0.05, 0.0};

TEST(EstimateRr, PassThroughIsEmpirical) {
  const std::vector<Symbol> ys{0, 1, 1, 3, 3, 3};
  const auto est = estimate_rr(std::span<const Symbol>(ys), Epsilon::unbounded(), 4);
  EXPECT_EQ(est.estimate, (std::vector<double>{1.0 / 6, 2.0 / 6, 0.0, 3.0 / 6}));
}

TEST(EstimateRr, AllRecordsEqual) {
  const std::vector<Symbol> ys(10, 0);
  const auto est = estimate_rr(std::span<const Symbol>(ys), Epsilon::finite(std::log(3.0)), 2);
  EXPECT_NEAR(est.estimate[0], 1.5, 1e-12);
  EXPECT_NEAR(est.estimate[1], -0.5, 1e-12);
}

TEST(EstimateRr, RejectsUninformativeAndEmpty) {
  const std::vector<Symbol> ys{0};
  EXPECT_THROW(estimate_rr(std::span<const Symbol>(ys), Epsilon::finite(0.0), 2), std::invalid_argument);
  EXPECT_THROW(estimate_rr(std::span<const Symbol>(), Epsilon::finite(1.0), 2), std::invalid_argument);
}

TEST(EstimateGlh, SingleRecordExamples) {
  const HashDescriptor h{1, 0, 7, 2};
  const std::vector<GlhRecord> recs{{0, h, 2}};  // h(3) = 2
  const auto est = estimate_glh(recs, Epsilon::finite(std::log(3.0)), 2, 5);
  EXPECT_EQ(est.counts[3], 1.0);
  EXPECT_NEAR(est.estimate[3], 2.0, 1e-12);
  EXPECT_EQ(est.counts[0], 0.0);  // h(0) = 1
  EXPECT_NEAR(est.estimate[0], -0.5 / 0.25, 1e-12);
}

TEST(EstimateGlh, GroupedCountsMatchStreamingAndAreThreadInvariant) {
  const GeneralLocalHash glh(Epsilon::finite(1.0), HashFamily::carter_wegman(40, 6));
  Rng rng(3);
  std::vector<GlhRecord> recs;
  GlhCountAccumulator acc(40);
  for (std::uint64_t i = 0; i < 5000; ++i) {
    const auto o = glh.sample(static_cast<Symbol>(i % 40), rng);
    // Repeat descriptors so grouping matters.
    const HashDescriptor d = i % 3 == 0 && !recs.empty() ? recs.back().hash : o.hash;
    recs.push_back({i, d, o.bucket});
    acc.add(d, o.bucket);
  }
  const auto one = glh_support_counts(recs, 40, 1);
  EXPECT_EQ(one, acc.counts());
  EXPECT_EQ(glh_support_counts(recs, 40, 3), one);
  EXPECT_THROW(estimate_glh(recs, Epsilon::finite(1.0), 7, 40), DataError);
}

TEST(EstimateRr, UnbiasedAndVarianceMatches) {
  const std::size_t n = 100000;
  const auto data = fixed_data(kTruth, n);
  const Epsilon eps = Epsilon::finite(std::log(3.0));
  const RandomizedResponse rr(eps, kTruth.size());
  const Rng base(2024);
  const auto m = monte_carlo(500, kTruth.size(), [&](std::size_t r) {
    Rng rng = base.split(r);
    std::vector<double> counts(kTruth.size(), 0.0);
    for (Symbol x : data) counts[rr.sample(x, rng)] += 1.0;
    return rr_estimate_from_counts(std::move(counts), n, eps).estimate;
  });
  double var_mc = 0.0;
  double var_formula = 0.0;
  for (std::size_t x = 0; x < kTruth.size(); ++x) {
    const double v = expected_l2_rr(eps, kTruth.size(), n, kTruth[x]);
    EXPECT_NEAR(m.mean[x], kTruth[x], 4.0 * std::sqrt(v / 500.0)) << "symbol " << x;
    var_mc += m.var[x];
    var_formula += v;
  }
  EXPECT_NEAR(var_mc / var_formula, 1.0, 0.1);
}

TEST(EstimateGlh, UnbiasedAndVarianceMatches) {
  const std::size_t n = 100000;
  const std::uint32_t g = 16;
  const auto data = fixed_data(kTruth, n);
  const Epsilon eps = Epsilon::finite(std::log(3.0));
  const GeneralLocalHash glh(eps, HashFamily::carter_wegman(kTruth.size(), g));
  const Rng base(77);
  const auto m = monte_carlo(300, kTruth.size(), [&](std::size_t r) {
    Rng rng = base.split(r);
    GlhCountAccumulator acc(kTruth.size());
    for (Symbol x : data) {
      const auto o = glh.sample(x, rng);
      acc.add(o.hash, o.bucket);
    }
    return glh_estimate_from_counts(acc.take_counts(), n, eps, g).estimate;
  });
  double var_mc = 0.0;
  double var_formula = 0.0;
  for (std::size_t x = 0; x < kTruth.size(); ++x) {
    const double v = expected_l2_glh(eps, g, n, kTruth[x]);
    EXPECT_NEAR(m.mean[x], kTruth[x], 4.0 * std::sqrt(v / 300.0)) << "symbol " << x;
    var_mc += m.var[x];
    var_formula += v;
  }
  EXPECT_NEAR(var_mc / var_formula, 1.0, 0.12);
}

TEST(ExpectedL2, Examples) {
  EXPECT_NEAR(expected_l2_rr(Epsilon::finite(std::log(2.0)), 4, 1000, 0.5), 0.005, 1e-15);
  EXPECT_DOUBLE_EQ(expected_l2_rr(Epsilon::finite(1.0), 2, 1000, 0.0), expected_l2_rr(Epsilon::finite(1.0), 2, 1000, 0.9));
  EXPECT_NEAR(expected_l2_glh(Epsilon::finite(std::log(3.0)), 2, 1000, 0.5), 0.0035, 1e-15);
  EXPECT_EQ(expected_l2_rr(Epsilon::unbounded(), 4, 10, 0.2), 0.0);
}

TEST(ExpectedL2, GlhDecreasesInGAtFixedTheta) {
  for (double theta : {0.1, 0.5, 0.9}) {
    for (double px : {0.0, 0.01, 0.3}) {
      double prev = std::numeric_limits<double>::infinity();
      for (std::size_t g : {4u, 64u, 1024u, 1000000u}) {
        const double v = expected_l2_glh(epsilon_for_theta(theta, g), g, 1000, px);
        EXPECT_LT(v, prev) << theta << " " << px << " " << g;
        prev = v;
      }
    }
  }
}

TEST(ExpectedL2, GlhLimit) {
  EXPECT_NEAR(expected_l2_glh_limit(0.5, 1000, 0.1), 1e-4, 1e-18);
  EXPECT_LT(expected_l2_glh_limit(1.0 - 1e-9, 1000, 0.1), 1e-12);
  const double v = expected_l2_glh(epsilon_for_theta(0.5, 1000000), 1000000, 1000, 0.1);
  EXPECT_NEAR(v / expected_l2_glh_limit(0.5, 1000, 0.1), 1.0, 0.01);
  // With equal theta the limit equals the p-dependent RR term.
  for (std::size_t k : {10u, 1000u}) {
    const Epsilon e_rr = epsilon_for_theta(0.5, k);
    const double rr_term = 0.1 * static_cast<double>(k) / (1000.0 * std::expm1(e_rr.value()));
    EXPECT_NEAR(expected_l2_glh_limit(0.5, 1000, 0.1), rr_term, 1e-15);
  }
}

TEST(Threshold, BonferroniQuantile) {
  // Phi^-1(1 - 0.0005) to 15 digits.
  EXPECT_NEAR(bonferroni_z(0.05, 100), 3.29052673149190, 1e-9);
  EXPECT_NEAR(bonferroni_z(0.05, 1), 1.64485362695147, 1e-9);
}

TEST(Threshold, Examples) {
  FrequencyEstimate high{{0.5, 0.4, 0.3}, {}, 100};
  const auto kept = apply_significance_threshold(high, 1e-6, 0.05);
  EXPECT_EQ(kept.estimate, high.estimate);
  EXPECT_TRUE(kept.thresholded);
  FrequencyEstimate neg{{-0.1, -0.2, -0.01}, {}, 100};
  EXPECT_EQ(apply_significance_threshold(neg, 1e-6, 0.05).estimate, std::vector<double>(3, 0.0));
  FrequencyEstimate mixed{{0.9, 0.001, 0.2}, {}, 100};
  const auto t = apply_significance_threshold(mixed, 1e-4, 0.05);
  EXPECT_EQ(t.estimate, (std::vector<double>{0.9, 0.0, 0.2}));
  EXPECT_NEAR(t.threshold, bonferroni_z(0.05, 3) * 1e-2, 1e-15);
}

TEST(TopPhi, ErrorsAndTies) {
  const std::vector<double> p{0.5, 0.5};
  const std::vector<double> q{0.6, 0.4};
  const auto e = l2_and_relative_error(p, q, 2);
  EXPECT_NEAR(e.l2_sum, 0.02, 1e-15);
  EXPECT_NEAR(e.mean_relative_error, 0.2, 1e-15);
  const auto z = l2_and_relative_error(p, p, 2);
  EXPECT_EQ(z.l2_sum, 0.0);
  EXPECT_EQ(z.mean_relative_error, 0.0);
  EXPECT_EQ(top_phi(std::vector<double>{0.1, 0.3, 0.3, 0.3}, 2), (std::vector<Symbol>{1, 2}));
  const auto zero = l2_and_relative_error(std::vector<double>{1.0, 0.0}, std::vector<double>{0.9, 0.1}, 2);
  EXPECT_EQ(zero.excluded_relative, std::vector<Symbol>{1});
  EXPECT_NEAR(zero.mean_relative_error, 0.1, 1e-12);
}

}  // namespace
}  // namespace pierisk
