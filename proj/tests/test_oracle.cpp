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

#include "pierisk/oracle.hpp"

namespace pierisk::oracle {
namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  const std::size_t cols = r.begin()->size();
  Matrix m(r.size(), cols);
  std::size_t i = 0;
  for (const auto& row : r) {
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

// User u holds symbol u with certainty.
SmallInstance deterministic(std::size_t n) {
  Matrix d(n, n);
  for (std::size_t u = 0; u < n; ++u) d(u, u) = 1.0;
  return {CategoricalDistribution::uniform(n), d, {}};
}

TEST(ExactPie, IdentityTwoUsersIsOneBit) {
  const auto inst = deterministic(2);
  EXPECT_NEAR(exact_pie(inst, MechanismKernel::identity(2)), 1.0, 1e-12);
  EXPECT_NEAR(information_ux(inst), 1.0, 1e-12);
}

TEST(ExactPie, ZeroEpsilonReleasesNothing) {
  const auto inst = deterministic(3);
  EXPECT_NEAR(exact_pie(inst, rr_kernel(Epsilon::finite(0.0), 3)), 0.0, 1e-12);
  EXPECT_NEAR(exact_pie_glh(inst, Epsilon::finite(0.0), 2), 0.0, 1e-12);
}

TEST(ExactPie, BinaryRandomizedResponse) {
  // e^eps = 3 on two symbols: mu = 3/4, theta = 1/2.
  const auto inst = deterministic(2);
  const Epsilon eps = Epsilon::finite(std::log(3.0));
  const double pie = exact_pie(inst, rr_kernel(eps, 2));
  EXPECT_NEAR(pie, 1.0 - entropy(CategoricalDistribution({0.75, 0.25})), 1e-12);
  EXPECT_NEAR(pie, 0.1887, 1e-4);
  EXPECT_NEAR(mi_loss_rr(eps, 2), 0.5, 1e-12);
  EXPECT_LE(pie, 0.5 * information_ux(inst));
}

TEST(ExactPie, GlhRespectsItsLossFactor) {
  const SmallInstance inst{CategoricalDistribution({0.2, 0.3, 0.5}),
                           rows({{0.7, 0.1, 0.1, 0.1}, {0.1, 0.6, 0.2, 0.1}, {0.0, 0.1, 0.2, 0.7}}),
                           {}};
  for (double e : {0.5, 1.0, 3.0}) {
    for (std::uint32_t g : {2u, 3u}) {
      const Epsilon eps = Epsilon::finite(e);
      const double pie = exact_pie_glh(inst, eps, g);
      EXPECT_GT(pie, 0.0);
      EXPECT_LE(pie, mi_loss_glh(eps, g) * information_ux(inst) + 1e-12);
      EXPECT_LE(pie, pie_bound_glh(eps, g, 3, 4) + 1e-12);
    }
  }
}

TEST(ExactPse, LikelihoodIsSufficientConstantIsBlind) {
  const SmallInstance inst{CategoricalDistribution::uniform(3),
                           rows({{0.6, 0.3, 0.1}, {0.2, 0.5, 0.3}, {0.1, 0.1, 0.8}}),
                           {}};
  const auto kernel = rr_kernel(Epsilon::finite(1.5), 3);
  const Matrix j = joint_uy(inst, kernel);
  const double pie = exact_pie(inst, kernel);
  EXPECT_NEAR(exact_pse(j, likelihood_matcher(j, inst.prior)), pie, 1e-12);
  EXPECT_NEAR(exact_pse(j, constant_matcher(3)), 0.0, 1e-15);
  EXPECT_LE(exact_pse(j, profile_matcher(j, inst.prior)), pie + 1e-12);
}

TEST(ExactPse, ArgmaxCanLoseInformation) {
  // Outputs 0 and 1 both point at user 0 but carry different evidence.
  const SmallInstance inst{CategoricalDistribution::uniform(2), rows({{0.6, 0.4, 0.0}, {0.0, 0.3, 0.7}}), {}};
  const auto id = MechanismKernel::identity(3);
  const Matrix j = joint_uy(inst, id);
  const double pie = exact_pie(inst, id);
  const double arg = exact_pse(j, argmax_matcher(likelihood_matcher(j, inst.prior)));
  EXPECT_LT(arg, pie - 1e-3);
  EXPECT_NEAR(exact_pse(j, likelihood_matcher(j, inst.prior)), pie, 1e-12);
}

TEST(ExactBayesError, Examples) {
  const auto inst = deterministic(4);
  const Matrix j = joint_uy(inst, MechanismKernel::identity(4));
  EXPECT_NEAR(exact_bayes_error(joint_us(j, likelihood_matcher(j, inst.prior))), 0.0, 1e-15);
  EXPECT_NEAR(exact_bayes_error(joint_us(j, constant_matcher(4))), 0.75, 1e-12);
}

TEST(Composition, IndependentSecondAttributeAddsNothing) {
  // x2 is uniform for every user, so only x1 carries identity.
  const auto base = deterministic(2);
  SmallInstance inst = base;
  for (std::size_t u = 0; u < 2; ++u) {
    Matrix p(2, 2);
    p(u, 0) = p(u, 1) = 0.5;
    inst.pair.push_back(p);
  }
  const auto k = rr_kernel(Epsilon::finite(2.0), 2);
  EXPECT_NEAR(exact_composed_pie(inst, k, k), exact_pie(base, k), 1e-12);
}

TEST(Composition, FullyCorrelatedPairStaysUnderTwiceAlpha) {
  SmallInstance inst = deterministic(3);
  for (std::size_t u = 0; u < 3; ++u) {
    Matrix p(3, 3);
    p(u, u) = 1.0;
    inst.pair.push_back(p);
  }
  const Epsilon eps = Epsilon::finite(1.0);
  const auto k = rr_kernel(eps, 3);
  const double one = exact_pie(inst, k);
  const double two = exact_composed_pie(inst, k, k);
  EXPECT_GT(two, one);
  EXPECT_LE(two, 2.0 * one + 1e-12);
  EXPECT_LE(two, pie_bound_composed(pie_bound_rr(eps, 3, 3), 2) + 1e-12);
  const double glh = exact_composed_pie_glh(inst, eps, 2);
  EXPECT_LE(glh, pie_bound_composed(pie_bound_glh(eps, 2, 3, 3), 2) + 1e-12);
  SmallInstance missing = deterministic(3);
  EXPECT_THROW(exact_composed_pie(missing, k, k), std::invalid_argument);
}

TEST(SizeCaps, LargeInstancesAreRefused) {
  EXPECT_THROW(exact_pie(deterministic(9), MechanismKernel::identity(9)), SizeCapExceeded);
  const SmallInstance wide{CategoricalDistribution::uniform(2), Matrix(2, 9), {}};
  EXPECT_THROW(information_ux(wide), SizeCapExceeded);
  // 8^8 hash functions over 8 symbols is past the enumeration cap.
  EXPECT_THROW(exact_pie_glh(deterministic(8), Epsilon::finite(1.0), 8), SizeCapExceeded);
}

TEST(BoundSuite, ThousandRandomInstancesHoldEveryBound) {
  const auto report = verify_bound_suite(1000, Rng(20260501));
  EXPECT_EQ(report.instances, 1000u);
  EXPECT_GT(report.checks, 20000u);
  for (const auto& v : report.violations) {
    ADD_FAILURE() << "instance " << v.instance << " " << v.check << ": " << v.lhs << " > " << v.rhs;
  }
}

TEST(BoundSuite, ThreadCountDoesNotChangeTheReport) {
  const auto a = verify_bound_suite(150, Rng(3), {}, 1);
  const auto b = verify_bound_suite(150, Rng(3), {}, 4);
  EXPECT_EQ(a.checks, b.checks);
  EXPECT_EQ(a.violations.size(), b.violations.size());
}

TEST(BoundSuite, DetectsABrokenBound) {
  // A negative tolerance turns every tight equality into a violation.
  SuiteOptions opt;
  opt.tolerance = -1e-3;
  EXPECT_FALSE(verify_bound_suite(20, Rng(4), opt).ok());
}

}  // namespace
}  // namespace pierisk::oracle
