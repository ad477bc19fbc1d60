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
#include <sstream>

#include "pierisk/probcore.hpp"
#include "pierisk/rng.hpp"

namespace pierisk {
namespace {

TEST(Alphabet, LabelsAreABijection) {
  const auto a = Alphabet::with_labels({"cafe", "park", "gym"});
  EXPECT_EQ(a.size(), 3u);
  EXPECT_EQ(*a.index_of("park"), 1u);
  EXPECT_EQ(a.label(2), "gym");
  EXPECT_FALSE(a.index_of("zoo").has_value());
  EXPECT_THROW(Alphabet::with_labels({"a", "a"}), std::invalid_argument);
  EXPECT_THROW(Alphabet(0), std::invalid_argument);
}

TEST(CategoricalDistribution, ToleranceContract) {
  // Drift within 1e-9 is renormalized, larger drift rejected.
  const CategoricalDistribution d({0.5, 0.5 + 5e-10});
  EXPECT_NEAR(d[0] + d[1], 1.0, 1e-15);
  EXPECT_THROW(CategoricalDistribution({0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(CategoricalDistribution({1.5, -0.5}), std::invalid_argument);
}

TEST(Entropy, Examples) {
  EXPECT_NEAR(entropy(CategoricalDistribution::uniform(4)), 2.0, 1e-12);
  EXPECT_EQ(entropy(CategoricalDistribution::point_mass(5, 3)), 0.0);
  // -0.75 log2 0.75 - 0.25 log2 0.25, summed term by term in long double.
  const long double h = -0.75L * std::log2(0.75L) - 0.25L * std::log2(0.25L);
  EXPECT_NEAR(entropy(CategoricalDistribution({0.75, 0.25})), static_cast<double>(h), 1e-12);
  EXPECT_NEAR(entropy(CategoricalDistribution({0.75, 0.25})), 0.8113, 1e-4);
}

TEST(KlDivergence, Examples) {
  const CategoricalDistribution p({0.3, 0.7});
  EXPECT_EQ(kl_divergence(p, p), 0.0);
  EXPECT_NEAR(kl_divergence(CategoricalDistribution({1.0, 0.0}), CategoricalDistribution::uniform(2)), 1.0, 1e-12);
  EXPECT_NEAR(kl_divergence(CategoricalDistribution({0.75, 0.25}), CategoricalDistribution::uniform(2)), 0.1887, 1e-4);
}

TEST(KlDivergence, SupportViolationIsAnError) {
  EXPECT_THROW(kl_divergence(CategoricalDistribution::uniform(2), CategoricalDistribution({1.0, 0.0})),
               InfiniteDivergence);
}

TEST(KlDivergence, NonNegativeWithEqualityOnlyAtIdentity) {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const CategoricalDistribution p(dirichlet(5, 1.0, rng));
    const CategoricalDistribution q(dirichlet(5, 1.0, rng));
    EXPECT_GT(kl_divergence(p, q), 0.0);
    EXPECT_NEAR(kl_divergence(p, p), 0.0, 1e-15);
  }
}

TEST(MutualInformation, Examples) {
  Matrix product(2, 3);
  const double a[2] = {0.4, 0.6};
  const double b[3] = {0.2, 0.3, 0.5};
  for (int u = 0; u < 2; ++u) {
    for (int y = 0; y < 3; ++y) product(u, y) = a[u] * b[y];
  }
  EXPECT_NEAR(mutual_information(JointDistribution(product)), 0.0, 1e-12);

  Matrix diag(2, 2);
  diag(0, 0) = diag(1, 1) = 0.5;
  EXPECT_NEAR(mutual_information(JointDistribution(diag)), 1.0, 1e-12);

  Matrix cond(2, 2);
  cond(0, 0) = 0.75;
  cond(0, 1) = 0.25;
  cond(1, 0) = 0.25;
  cond(1, 1) = 0.75;
  const auto j = JointDistribution::from_conditional(CategoricalDistribution::uniform(2), cond);
  EXPECT_NEAR(mutual_information(j), 1.0 - entropy(CategoricalDistribution({0.75, 0.25})), 1e-12);
  EXPECT_NEAR(mutual_information(j), 0.1887, 1e-4);
}

TEST(MutualInformation, BoundedByMarginalEntropiesAndMatchesKlExpansion) {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.uniform_index(5);
    const std::size_t k = 2 + rng.uniform_index(5);
    const CategoricalDistribution prior(dirichlet(n, 1.0, rng));
    Matrix cond(n, k);
    for (std::size_t u = 0; u < n; ++u) {
      const auto row = dirichlet(k, 0.7, rng);
      std::copy(row.begin(), row.end(), cond.row(u).begin());
    }
    const auto j = JointDistribution::from_conditional(prior, cond);
    const double mi = mutual_information(j);
    EXPECT_GE(mi, 0.0);
    EXPECT_LE(mi, std::min(entropy(j.row_marginal()), entropy(j.col_marginal())) + 1e-12);
    // I(U;Y) = sum_u p(u) D(p_{Y|u} || p_Y).
    const auto py = j.col_marginal();
    double expansion = 0.0;
    for (std::size_t u = 0; u < n; ++u) expansion += prior[static_cast<Symbol>(u)] * kl_divergence(cond.row(u), py);
    EXPECT_NEAR(mi, expansion, 1e-9);
  }
}

TEST(MutualInformation, SparseMatchesDense) {
  Rng rng(3);
  Matrix m(4, 6);
  std::vector<SparseJointDistribution::Entry> entries;
  const auto w = dirichlet(24, 0.3, rng);
  for (std::size_t i = 0; i < 24; ++i) {
    m.data[i] = w[i];
    if (w[i] > 0.0) entries.push_back({i / 6, i % 6, w[i]});
  }
  EXPECT_NEAR(mutual_information(JointDistribution(m)), mutual_information(SparseJointDistribution(4, 6, entries)),
              1e-12);
}

TEST(Sample, PointMassAndDeterminism) {
  Rng rng(5);
  const auto pm = CategoricalDistribution::point_mass(6, 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample(pm, rng), 3u);

  const CategoricalDistribution d({0.1, 0.2, 0.3, 0.4});
  Rng a(99);
  Rng b(99);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample(d, a), sample(d, b));
}

TEST(Sample, UniformFrequencyBand) {
  Rng rng(12345);
  const auto d = CategoricalDistribution::uniform(2);
  const int draws = 1'000'000;
  int zeros = 0;
  for (int i = 0; i < draws; ++i) zeros += sample(d, rng) == 0;
  EXPECT_NEAR(static_cast<double>(zeros) / draws, 0.5, 0.002);
}

TEST(Sample, DiscreteSamplerMatchesLinearScanInLaw) {
  Rng rng(8);
  const CategoricalDistribution d({0.0, 0.25, 0.0, 0.75});
  const DiscreteSampler s(d);
  int hits[4] = {0, 0, 0, 0};
  for (int i = 0; i < 200000; ++i) ++hits[s(rng)];
  EXPECT_EQ(hits[0], 0);
  EXPECT_EQ(hits[2], 0);
  EXPECT_NEAR(hits[3] / 200000.0, 0.75, 5 * std::sqrt(0.75 * 0.25 / 200000));
}

TEST(Rng, SplitIsIndependentOfParentPosition) {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 17; ++i) b();
  Rng ca = a.split(3);
  Rng cb = b.split(3);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(ca(), cb());
  EXPECT_NE(a.split(3).key(), a.split(4).key());
}

TEST(MarkovSource, SamplesFollowSupportAndLength) {
  Matrix t(2, 2);
  t(0, 0) = 0.9;
  t(0, 1) = 0.1;
  t(1, 0) = 0.2;
  t(1, 1) = 0.8;
  const auto src = MarkovSource::from_dense(CategoricalDistribution({1.0, 0.0}), t, 50);
  Rng rng(1);
  const auto trace = src.sample(rng);
  ASSERT_EQ(trace.size(), 50u);
  EXPECT_EQ(trace.front(), 0u);
}

TEST(MarkovSource, ReachableStatesNeedRows) {
  std::vector<std::pair<Symbol, SparseDistribution>> rows;
  rows.emplace_back(0, SparseDistribution({0, 1}, {0.5, 0.5}));
  EXPECT_THROW(MarkovSource(2, SparseDistribution({0}, {1.0}), rows, 3), std::invalid_argument);
  EXPECT_NO_THROW(MarkovSource(2, SparseDistribution({0}, {1.0}), rows, 1));
}

TEST(PopulationModel, JointOfSingleDatumModel) {
  const PopulationModel pop(CategoricalDistribution::uniform(2),
                            PopulationModel::SingleDatum{CategoricalDistribution::point_mass(2, 0),
                                                         CategoricalDistribution::point_mass(2, 1)});
  EXPECT_NEAR(mutual_information(pop.joint()), 1.0, 1e-12);
  Rng rng(2);
  EXPECT_EQ(pop.sample_data(1, rng), std::vector<Symbol>{1});
}

TEST(DistributionCsv, HeaderAndRows) {
  std::ostringstream os;
  const std::vector<double> p{0.25, 0.75};
  write_distribution_csv(os, p);
  EXPECT_EQ(os.str(), "symbol,probability\n0,0.25\n1,0.75\n");
}

}  // namespace
}  // namespace pierisk
