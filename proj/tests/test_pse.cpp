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

#include <algorithm>
#include <cmath>
#include <map>

#include "pierisk/pse.hpp"

namespace pierisk {
namespace {

std::vector<double> normals(std::size_t count, double mean, Rng& rng) {
  std::vector<double> v(count);
  for (double& x : v) x = mean + rng.normal();
  return v;
}

// Atoms a with probabilities p: values drawn exactly on the atoms.
std::vector<double> atoms(std::size_t count, const std::vector<double>& values, const std::vector<double>& p, Rng& rng) {
  const DiscreteSampler s(p);
  std::vector<double> v(count);
  for (double& x : v) x = values[s(rng)];
  return v;
}

TEST(KnnKl, SameLawIsNearZero) {
  Rng rng(1);
  const auto p = normals(10000, 0.0, rng);
  const auto q = normals(10000, 0.0, rng);
  EXPECT_NEAR(knn_kl_estimate(p, q).raw_bits, 0.0, 0.05);
}

TEST(KnnKl, GaussianShift) {
  Rng rng(2);
  const auto p = normals(50000, 0.0, rng);
  const auto q = normals(50000, 1.0, rng);
  const double truth = 0.5 / std::log(2.0);
  EXPECT_NEAR(truth, 0.7213, 1e-4);
  EXPECT_NEAR(knn_kl_estimate(p, q).bits / truth, 1.0, 0.05);
}

TEST(KnnKl, MixtureOfUniforms) {
  // P = .5 U[0,1) + .5 U[1,2), Q = .25 U[0,1) + .75 U[1,2).
  Rng rng(3);
  auto draw = [&](double w0, std::size_t count) {
    std::vector<double> v(count);
    for (double& x : v) x = (rng.uniform() < w0 ? 0.0 : 1.0) + rng.uniform();
    return v;
  };
  const auto p = draw(0.5, 100000);
  const auto q = draw(0.25, 100000);
  const double truth = 0.5 * std::log2(0.5 / 0.25) + 0.5 * std::log2(0.5 / 0.75);
  EXPECT_NEAR(knn_kl_estimate(p, q).bits / truth, 1.0, 0.05);
}

TEST(KnnKl, DiscreteScoresAreJitteredAndConsistent) {
  Rng rng(4);
  const std::vector<double> values{-3.0, -1.0, 0.0};
  const std::vector<double> pp{0.5, 0.3, 0.2};
  const std::vector<double> qp{0.2, 0.3, 0.5};
  const auto p = atoms(100000, values, pp, rng);
  const auto q = atoms(100000, values, qp, rng);
  const auto est = knn_kl_estimate(p, q);
  EXPECT_TRUE(est.jittered);
  double truth = 0.0;
  for (int i = 0; i < 3; ++i) truth += pp[i] * std::log2(pp[i] / qp[i]);
  EXPECT_NEAR(est.bits / truth, 1.0, 0.1);
}

TEST(KnnKl, PermutationInvariant) {
  Rng rng(5);
  auto p = normals(3000, 0.0, rng);
  auto q = normals(4000, 0.5, rng);
  const double a = knn_kl_estimate(p, q).raw_bits;
  std::shuffle(p.begin(), p.end(), rng);
  std::shuffle(q.begin(), q.end(), rng);
  EXPECT_NEAR(knn_kl_estimate(p, q).raw_bits, a, 1e-12);
}

TEST(KnnKl, ClampsNegativeAndValidates) {
  Rng rng(6);
  const auto p = normals(200, 0.0, rng);
  const auto q = normals(200, 0.0, rng);
  const auto est = knn_kl_estimate(p, q);
  EXPECT_EQ(est.bits, std::max(0.0, est.raw_bits));
  EXPECT_EQ(est.below_noise_floor, est.raw_bits < 0.0);
  EXPECT_THROW(knn_kl_estimate(std::vector<double>(5, 0.0), q), std::invalid_argument);
  std::vector<double> bad = p;
  bad[3] = std::nan("");
  EXPECT_THROW(knn_kl_estimate(bad, q), std::invalid_argument);
}

TEST(KnnKl, MonotoneTransformStaysWithinEstimatorSpread) {
  Rng rng(7);
  ScoreSample s{normals(20000, 0.0, rng), normals(20000, 1.0, rng), "gauss"};
  ScoreSample t = s;
  auto f = [](double v) { return v + 0.3 * std::sinh(v); };  // smooth, strictly increasing
  std::transform(t.genuine.begin(), t.genuine.end(), t.genuine.begin(), f);
  std::transform(t.impostor.begin(), t.impostor.end(), t.impostor.begin(), f);
  const double se = half_sample_standard_error(s, {}, 10, Rng(8));
  EXPECT_GT(se, 0.0);
  EXPECT_NEAR(pse_estimate(t).estimate.raw_bits, pse_estimate(s).estimate.raw_bits, 3.0 * se);
}

TEST(Convergence, ProbeContract) {
  Rng rng(9);
  ScoreSample s{normals(4000, 0.0, rng), normals(4000, 1.0, rng), ""};
  const std::vector<double> full{1.0};
  const auto one = convergence_probe(s, full, {}, Rng(10));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_NEAR(one[0].bits, pse_estimate(s).estimate.raw_bits, 1e-9);

  ScoreSample sorted = s;
  std::sort(sorted.genuine.begin(), sorted.genuine.end());
  std::sort(sorted.impostor.begin(), sorted.impostor.end());
  const std::vector<double> fr{0.25, 0.5, 1.0};
  const auto a = convergence_probe(s, fr, {}, Rng(10));
  const auto b = convergence_probe(sorted, fr, {}, Rng(10));
  EXPECT_NEAR(a.back().bits, b.back().bits, 1e-9);
  // Prefixes are random subsets even for sorted input.
  EXPECT_NEAR(b.front().bits, a.back().bits, 0.25);
  EXPECT_THROW(convergence_probe(s, std::vector<double>{0.0}, {}, Rng(1)), std::invalid_argument);
}

TEST(Convergence, StationarySeriesStaysInBand) {
  Rng rng(11);
  ScoreSample s{normals(40000, 0.0, rng), normals(40000, 1.0, rng), ""};
  const std::vector<double> fr{0.25, 0.5, 1.0};
  const auto series = convergence_probe(s, fr, {}, Rng(12));
  const double se = half_sample_standard_error(s, {}, 10, Rng(13));
  for (const auto& p : series) {
    const double scale = std::sqrt(static_cast<double>(s.genuine.size()) / static_cast<double>(p.genuine_count));
    EXPECT_NEAR(p.bits, series.back().bits, 4.0 * se * scale + 1e-3);
  }
  EXPECT_TRUE(converged(series, 0.05));
}

// Three users; profile u puts mass (.5, .3, .2) on a rotation starting at u.
struct Toy {
  PopulationModel population;
  std::vector<MarkovProfile> profiles;
};

Toy toy_population(bool identical_profiles) {
  const std::size_t n = 3;
  std::vector<CategoricalDistribution> data;
  std::vector<MarkovProfile> profiles;
  const double mass[3] = {0.5, 0.3, 0.2};
  for (std::size_t u = 0; u < n; ++u) {
    std::vector<double> d(n, 0.1);
    d[u] = 0.8;
    data.emplace_back(d);
    const std::size_t shift = identical_profiles ? 0 : u;
    std::vector<std::pair<Symbol, double>> visit;
    for (std::size_t x = 0; x < n; ++x) visit.emplace_back(static_cast<Symbol>(x), mass[(x + n - shift) % n]);
    profiles.emplace_back(u, n, visit, std::vector<std::pair<std::uint64_t, double>>{}, kDefaultLikelihoodFloor);
  }
  return {PopulationModel(CategoricalDistribution::uniform(n), data), profiles};
}

TEST(Harvest, SingleUserIsUnusable) {
  const PopulationModel pop(CategoricalDistribution::uniform(1), {CategoricalDistribution::uniform(2)});
  const std::vector<MarkovProfile> p{train_profile(Trace{0, 1}, 2)};
  const auto s = harvest_scores(pop, TraceMechanism::identity(), p, HarvestOptions{10, 0, 1}, Rng(1));
  EXPECT_TRUE(s.impostor.empty());
  EXPECT_FALSE(s.usable());
  EXPECT_THROW(pse_estimate(s), std::invalid_argument);
}

TEST(Harvest, IdenticalProfilesGiveZeroPse) {
  const auto toy = toy_population(true);
  const auto mech = TraceMechanism::rr(RandomizedResponse(Epsilon::finite(1.0), 3));
  const auto s = harvest_scores(toy.population, mech, toy.profiles, HarvestOptions{20000, 0, 1}, Rng(2));
  EXPECT_EQ(s.genuine.size(), 20000u);
  EXPECT_EQ(s.impostor.size(), 40000u);
  EXPECT_NEAR(pse_estimate(s).estimate.raw_bits, 0.0, 0.05);
}

TEST(Harvest, SeparableGenuineDominatesImpostor) {
  const auto toy = toy_population(false);
  const auto s = harvest_scores(toy.population, TraceMechanism::identity(), toy.profiles, HarvestOptions{4000, 0, 1}, Rng(3));
  // Mann-Whitney AUC = P(G > I) + P(G = I)/2.
  std::vector<double> im = s.impostor;
  std::sort(im.begin(), im.end());
  double auc = 0.0;
  for (double g : s.genuine) {
    const auto lo = std::lower_bound(im.begin(), im.end(), g) - im.begin();
    const auto hi = std::upper_bound(im.begin(), im.end(), g) - im.begin();
    auc += (static_cast<double>(lo) + 0.5 * static_cast<double>(hi - lo)) / static_cast<double>(im.size());
  }
  auc /= static_cast<double>(s.genuine.size());
  EXPECT_GT(auc, 0.7);
}

TEST(Harvest, EstimateMatchesExactScoreDivergence) {
  const auto toy = toy_population(false);
  const Epsilon eps = Epsilon::finite(1.0);
  const auto kernel = rr_kernel(eps, 3);
  // Exact genuine and impostor score laws by enumeration.
  std::map<double, double> fg;
  std::map<double, double> fi;
  for (std::size_t u = 0; u < 3; ++u) {
    for (std::size_t x = 0; x < 3; ++x) {
      for (std::size_t y = 0; y < 3; ++y) {
        const double w = toy.population.single_datum()[u][static_cast<Symbol>(x)] * kernel(y, x) / 3.0;
        fg[toy.profiles[u].log2_visit(static_cast<Symbol>(y))] += w;
        for (std::size_t v = 0; v < 3; ++v) {
          if (v != u) fi[toy.profiles[v].log2_visit(static_cast<Symbol>(y))] += w / 2.0;
        }
      }
    }
  }
  double exact = 0.0;
  for (const auto& [a, p] : fg) exact += p * std::log2(p / fi.at(a));
  ASSERT_GT(exact, 0.01);

  const auto s = harvest_scores(toy.population, TraceMechanism::rr(RandomizedResponse(eps, 3)), toy.profiles,
                                HarvestOptions{100000, 0, 1}, Rng(4));
  EXPECT_NEAR(pse_estimate(s).estimate.bits / exact, 1.0, 0.1);
}

TEST(Harvest, DeterministicAcrossThreadCounts) {
  const auto toy = toy_population(false);
  const auto mech = TraceMechanism::rr(RandomizedResponse(Epsilon::finite(2.0), 3));
  const auto a = harvest_scores(toy.population, mech, toy.profiles, HarvestOptions{3000, 1, 1}, Rng(5));
  const auto b = harvest_scores(toy.population, mech, toy.profiles, HarvestOptions{3000, 1, 3}, Rng(5));
  EXPECT_EQ(a.genuine, b.genuine);
  EXPECT_EQ(a.impostor, b.impostor);
}

}  // namespace
}  // namespace pierisk
