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

// Brute-force ground truth on small instances.
//
// Everything here enumerates the full joint law of (U, Y) and evaluates the
// information quantities exactly (up to floating point). The randomized
// bound checker compares those exact values against every closed-form bound
// in bounds.hpp.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pierisk/bounds.hpp"
#include "pierisk/errors.hpp"
#include "pierisk/mechanisms.hpp"
#include "pierisk/parallel.hpp"
#include "pierisk/probcore.hpp"
#include "pierisk/reid.hpp"

namespace pierisk::oracle {

inline constexpr std::size_t kMaxUsers = 8;
inline constexpr std::size_t kMaxAlphabet = 8;
inline constexpr double kEnumerationCap = 1e7;

/// Single-datum population small enough to enumerate, plus an optional
/// second attribute for composition: pair[u](x1, x2) = p(x1, x2 | u).
struct SmallInstance {
  CategoricalDistribution prior;
  Matrix data;  // n x |X|, row u = p_{X|U=u}
  std::vector<Matrix> pair;

  std::size_t users() const { return prior.size(); }
  std::size_t alphabet_size() const { return data.cols; }
};

namespace detail {

inline void check_shape(const SmallInstance& inst) {
  if (inst.users() > kMaxUsers || inst.alphabet_size() > kMaxAlphabet) {
    throw SizeCapExceeded("oracle: instance exceeds n <= 8, |X| <= 8");
  }
  if (inst.data.rows != inst.users()) throw std::invalid_argument("oracle: data rows must match users");
}

inline void check_cap(double cells) {
  if (cells > kEnumerationCap) throw SizeCapExceeded("oracle: enumeration exceeds 1e7 cells");
}

inline std::vector<double> x_marginal(const SmallInstance& inst) {
  std::vector<double> px(inst.alphabet_size(), 0.0);
  for (std::size_t u = 0; u < inst.users(); ++u) {
    for (std::size_t x = 0; x < px.size(); ++x) px[x] += inst.prior[static_cast<Symbol>(u)] * inst.data(u, x);
  }
  return px;
}

}  // namespace detail

/// p(u, y) for Y = kernel(X).
inline Matrix joint_uy(const SmallInstance& inst, const MechanismKernel& kernel) {
  detail::check_shape(inst);
  if (kernel.input_size() != inst.alphabet_size()) throw std::invalid_argument("oracle: kernel input size mismatch");
  detail::check_cap(static_cast<double>(inst.users() * inst.alphabet_size() * kernel.output_size()));
  Matrix j(inst.users(), kernel.output_size());
  for (std::size_t u = 0; u < inst.users(); ++u) {
    const double pu = inst.prior[static_cast<Symbol>(u)];
    for (std::size_t x = 0; x < inst.alphabet_size(); ++x) {
      const double pux = pu * inst.data(u, x);
      if (pux == 0.0) continue;
      for (std::size_t y = 0; y < kernel.output_size(); ++y) j(u, y) += pux * kernel(y, x);
    }
  }
  return j;
}

inline double information_ux(const SmallInstance& inst) {
  detail::check_shape(inst);
  return mutual_information(JointDistribution::from_conditional(inst.prior, inst.data));
}

/// I(X; Y) for X ~ p_X of the instance.
inline double information_xy(const SmallInstance& inst, const MechanismKernel& kernel) {
  const auto px = detail::x_marginal(inst);
  Matrix j(px.size(), kernel.output_size());
  for (std::size_t x = 0; x < px.size(); ++x) {
    for (std::size_t y = 0; y < kernel.output_size(); ++y) j(x, y) = px[x] * kernel(y, x);
  }
  return mutual_information(JointDistribution(std::move(j)));
}

/// Exact PIE I(U; Y).
inline double exact_pie(const SmallInstance& inst, const MechanismKernel& kernel) {
  return mutual_information(JointDistribution(joint_uy(inst, kernel)));
}

/// p(u, (h, y)) for GLH with the exhaustive hash table; column h*g + (y-1).
inline Matrix joint_u_glh(const SmallInstance& inst, Epsilon eps, std::uint32_t g) {
  detail::check_shape(inst);
  const HashFamily family = HashFamily::exhaustive_table(inst.alphabet_size(), g);
  const std::uint64_t hs = family.table_size();
  detail::check_cap(static_cast<double>(inst.users() * inst.alphabet_size()) * static_cast<double>(hs) * g);
  const RandomizedResponse rr(eps, g);
  const double ph = 1.0 / static_cast<double>(hs);
  Matrix j(inst.users(), hs * g);
  for (std::uint64_t h = 0; h < hs; ++h) {
    const HashDescriptor d = family.member(h);
    for (std::size_t x = 0; x < inst.alphabet_size(); ++x) {
      const std::uint32_t z = family.evaluate(d, static_cast<Symbol>(x));
      for (std::size_t u = 0; u < inst.users(); ++u) {
        const double w = inst.prior[static_cast<Symbol>(u)] * inst.data(u, x) * ph;
        if (w == 0.0) continue;
        for (std::uint32_t y = 1; y <= g; ++y) j(u, h * g + (y - 1)) += w * (y == z ? rr.mu() : rr.nu());
      }
    }
  }
  return j;
}

/// Exact I(U; (H, Y)) for (g, ε)-GLH over the exactly universal family.
inline double exact_pie_glh(const SmallInstance& inst, Epsilon eps, std::uint32_t g) {
  return mutual_information(JointDistribution(joint_u_glh(inst, eps, g)));
}

/// Score vector as a function of the output index.
using Matcher = std::function<std::vector<double>(std::size_t y)>;

/// Groups output columns with identical score vectors (within 1e-12
/// relative) into the joint law of (U, S).
inline Matrix joint_us(const Matrix& juy, const Matcher& matcher) {
  std::vector<std::vector<double>> keys;
  std::vector<std::size_t> group(juy.cols);
  auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == b[i]) continue;
      if (!std::isfinite(a[i]) || !std::isfinite(b[i])) return false;
      if (std::abs(a[i] - b[i]) > 1e-12 * std::max({1.0, std::abs(a[i]), std::abs(b[i])})) return false;
    }
    return true;
  };
  for (std::size_t y = 0; y < juy.cols; ++y) {
    const auto s = matcher(y);
    std::size_t gi = 0;
    while (gi < keys.size() && !same(keys[gi], s)) ++gi;
    if (gi == keys.size()) keys.push_back(s);
    group[y] = gi;
  }
  Matrix jus(juy.rows, keys.size());
  for (std::size_t u = 0; u < juy.rows; ++u) {
    for (std::size_t y = 0; y < juy.cols; ++y) jus(u, group[y]) += juy(u, y);
  }
  return jus;
}

/// Exact PSE I(U; S) where S = matcher(Y).
inline double exact_pse(const Matrix& juy, const Matcher& matcher) {
  return mutual_information(JointDistribution(joint_us(juy, matcher)));
}

inline double exact_pse(const SmallInstance& inst, const MechanismKernel& kernel, const Matcher& matcher) {
  return exact_pse(joint_uy(inst, kernel), matcher);
}

/// β = 1 − Σ_s max_u p(u, s).
inline double exact_bayes_error(const Matrix& jus) {
  double correct = 0.0;
  for (std::size_t s = 0; s < jus.cols; ++s) {
    double best = 0.0;
    for (std::size_t u = 0; u < jus.rows; ++u) best = std::max(best, jus(u, s));
    correct += best;
  }
  return std::max(0.0, 1.0 - correct);
}

/// Scores s_i(y) = p(Y = y | U = i): the likelihood vector.
inline Matcher likelihood_matcher(const Matrix& juy, const CategoricalDistribution& prior) {
  return [juy, prior](std::size_t y) {
    std::vector<double> s(juy.rows);
    for (std::size_t u = 0; u < juy.rows; ++u) {
      const double pu = prior[static_cast<Symbol>(u)];
      s[u] = pu > 0.0 ? juy(u, y) / pu : 0.0;
    }
    return s;
  };
}

/// The reid scorer: one visit-vector profile per user, built from
/// p(Y | U = i), scored as floored log2-likelihood of a length-1 trace.
inline Matcher profile_matcher(const Matrix& juy, const CategoricalDistribution& prior,
                               double floor = kDefaultLikelihoodFloor) {
  std::vector<MarkovProfile> profiles;
  for (std::size_t u = 0; u < juy.rows; ++u) {
    std::vector<std::pair<Symbol, double>> visit;
    const double pu = prior[static_cast<Symbol>(u)];
    for (std::size_t y = 0; y < juy.cols; ++y) {
      const double q = pu > 0.0 ? juy(u, y) / pu : 0.0;
      if (q > 0.0) visit.emplace_back(static_cast<Symbol>(y), q);
    }
    profiles.emplace_back(u, juy.cols, std::move(visit), std::vector<std::pair<std::uint64_t, double>>{}, floor);
  }
  return [profiles = std::move(profiles)](std::size_t y) {
    return score_vector(Observation(Trace{static_cast<Symbol>(y)}), profiles);
  };
}

/// One-hot vector of the best-score decision of `inner`.
inline Matcher argmax_matcher(Matcher inner) {
  return [inner = std::move(inner)](std::size_t y) {
    const auto s = inner(y);
    std::vector<double> out(s.size(), 0.0);
    out[best_score_decision(s)] = 1.0;
    return out;
  };
}

inline Matcher constant_matcher(std::size_t users) {
  return [users](std::size_t) { return std::vector<double>(users, 0.0); };
}

/// Exact I(U; (Y1, Y2)) for two attributes released through independent
/// mechanism randomness. inst.pair must hold p(x1, x2 | u).
inline double exact_composed_pie(const SmallInstance& inst, const MechanismKernel& k1, const MechanismKernel& k2) {
  detail::check_shape(inst);
  if (inst.pair.size() != inst.users()) throw std::invalid_argument("oracle: composition needs p(x1,x2|u) per user");
  const std::size_t kx = inst.alphabet_size();
  const std::size_t o1 = k1.output_size();
  const std::size_t o2 = k2.output_size();
  detail::check_cap(static_cast<double>(inst.users() * kx * kx * o1 * o2));
  Matrix j(inst.users(), o1 * o2);
  for (std::size_t u = 0; u < inst.users(); ++u) {
    const double pu = inst.prior[static_cast<Symbol>(u)];
    for (std::size_t x1 = 0; x1 < kx; ++x1) {
      for (std::size_t x2 = 0; x2 < kx; ++x2) {
        const double w = pu * inst.pair[u](x1, x2);
        if (w == 0.0) continue;
        for (std::size_t y1 = 0; y1 < o1; ++y1) {
          const double a = w * k1(y1, x1);
          if (a == 0.0) continue;
          for (std::size_t y2 = 0; y2 < o2; ++y2) j(u, y1 * o2 + y2) += a * k2(y2, x2);
        }
      }
    }
  }
  return mutual_information(JointDistribution(std::move(j)));
}

/// Composition for GLH: each attribute gets its own hash draw and bucket.
inline double exact_composed_pie_glh(const SmallInstance& inst, Epsilon eps, std::uint32_t g) {
  detail::check_shape(inst);
  if (inst.pair.size() != inst.users()) throw std::invalid_argument("oracle: composition needs p(x1,x2|u) per user");
  const HashFamily family = HashFamily::exhaustive_table(inst.alphabet_size(), g);
  const std::size_t outs = family.table_size() * g;
  detail::check_cap(static_cast<double>(inst.users()) * static_cast<double>(outs * outs));
  // Channel x -> (h, y) as an ordinary kernel, then reuse the generic path.
  const RandomizedResponse rr(eps, g);
  Matrix q(inst.alphabet_size(), outs);
  for (std::uint64_t h = 0; h < family.table_size(); ++h) {
    const HashDescriptor d = family.member(h);
    for (std::size_t x = 0; x < inst.alphabet_size(); ++x) {
      const std::uint32_t z = family.evaluate(d, static_cast<Symbol>(x));
      for (std::uint32_t y = 1; y <= g; ++y) {
        q(x, h * g + (y - 1)) = (y == z ? rr.mu() : rr.nu()) / static_cast<double>(family.table_size());
      }
    }
  }
  const MechanismKernel kernel(std::move(q));
  return exact_composed_pie(inst, kernel, kernel);
}

// ---------------------------------------------------------------------------
// Randomized bound checker.

struct Violation {
  std::size_t instance;
  std::string check;
  double lhs;  // quantity that must not exceed rhs
  double rhs;
};

struct ViolationReport {
  std::size_t instances = 0;
  std::size_t checks = 0;
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

struct SuiteOptions {
  double tolerance = 1e-9;
  double max_epsilon = 5.0;
  double degenerate_rate = 0.05;
  double uniform_prior_rate = 0.3;
};

namespace detail {

inline Matrix random_stochastic(std::size_t rows, std::size_t cols, Rng& rng, double degenerate_rate) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (rng.uniform() < degenerate_rate) {
      m(r, rng.uniform_index(cols)) = 1.0;
      continue;
    }
    const auto d = dirichlet(cols, 1.0, rng);
    std::copy(d.begin(), d.end(), m.row(r).begin());
  }
  return m;
}

}  // namespace detail

/// Draws a random instance: Dirichlet(1) prior and rows, point masses
/// injected at `degenerate_rate`, and a random p(x1, x2 | u) that is fully
/// correlated (x2 = x1) for a quarter of the instances.
inline SmallInstance random_instance(Rng& rng, const SuiteOptions& opt = {}) {
  const std::size_t n = 2 + rng.uniform_index(5);
  const std::size_t k = 2 + rng.uniform_index(5);
  std::vector<double> prior = rng.uniform() < opt.uniform_prior_rate ? std::vector<double>(n, 1.0 / static_cast<double>(n))
                                                                      : dirichlet(n, 1.0, rng);
  SmallInstance inst{CategoricalDistribution(prior), detail::random_stochastic(n, k, rng, opt.degenerate_rate), {}};
  const bool correlated = rng.uniform() < 0.25;
  for (std::size_t u = 0; u < n; ++u) {
    Matrix p(k, k);
    if (correlated) {
      for (std::size_t x = 0; x < k; ++x) p(x, x) = inst.data(u, x);
    } else {
      const Matrix flat = detail::random_stochastic(1, k * k, rng, opt.degenerate_rate);
      p.data = flat.data;
    }
    inst.pair.push_back(std::move(p));
  }
  return inst;
}

/// Checks every closed-form bound against exact enumeration on `count`
/// random instances. Instance i uses rng.split(i).
inline ViolationReport verify_bound_suite(std::size_t count, const Rng& rng, const SuiteOptions& opt = {},
                                          std::size_t threads = 1) {
  std::vector<ViolationReport> parts(count);
  parallel_for(count, threads, [&](std::size_t i) {
    ViolationReport& report = parts[i];
    auto check_le = [&](std::size_t inst_id, const char* name, double lhs, double rhs) {
      ++report.checks;
      if (!(lhs <= rhs + opt.tolerance)) report.violations.push_back({inst_id, name, lhs, rhs});
    };
    auto check_eq = [&](std::size_t inst_id, const char* name, double a, double b) {
      ++report.checks;
      if (!(std::abs(a - b) <= opt.tolerance)) report.violations.push_back({inst_id, name, a, b});
    };
    Rng r = rng.split(i);
    const SmallInstance inst = random_instance(r, opt);
    const std::size_t n = inst.users();
    const std::size_t k = inst.alphabet_size();
    const Epsilon eps = Epsilon::finite(r.uniform() * opt.max_epsilon);
    const double iux = information_ux(inst);

    // Randomized response and the generic LDP cap.
    const MechanismKernel rr = rr_kernel(eps, k);
    const Matrix j_rr = joint_uy(inst, rr);
    const double i_rr = mutual_information(JointDistribution(j_rr));
    check_le(i, "data_processing_ux", i_rr, iux);
    check_le(i, "data_processing_xy", i_rr, information_xy(inst, rr));
    check_le(i, "ldp_cap", i_rr, pie_bound_ldp(eps, n, k));
    check_le(i, "rr_mi_loss", i_rr, mi_loss_rr(eps, k) * iux);
    check_le(i, "rr_alpha", i_rr, pie_bound_rr(eps, n, k));

    // Identity release: the data-processing cap binds exactly.
    check_eq(i, "identity_binds", exact_pie(inst, MechanismKernel::identity(k)), iux);

    // A random strictly positive kernel: LDP cap with its own tight epsilon.
    {
      const std::size_t outs = 2 + r.uniform_index(4);
      Matrix q = detail::random_stochastic(k, outs, r, 0.0);
      for (double& v : q.data) v = 0.5 * v + 0.5 / static_cast<double>(outs);
      const MechanismKernel generic(std::move(q));
      const double i_gen = exact_pie(inst, generic);
      check_le(i, "ldp_cap_generic", i_gen, pie_bound_ldp(ldp_epsilon_of_kernel(generic), n, k));
      check_le(i, "data_processing_generic", i_gen, std::min(iux, information_xy(inst, generic)));
    }

    // GLH over the exhaustive family.
    {
      const std::uint32_t g = 2 + static_cast<std::uint32_t>(r.uniform_index(std::min<std::size_t>(k, 3)));
      if (std::pow(static_cast<double>(g), static_cast<double>(k)) <= 4096.0) {
        const double i_glh = exact_pie_glh(inst, eps, g);
        check_le(i, "glh_mi_loss", i_glh, mi_loss_glh(eps, g) * iux);
        check_le(i, "glh_alpha", i_glh, pie_bound_glh(eps, g, n, k));
        check_le(i, "ldp_cap_glh", i_glh, pie_bound_ldp(eps, n, k));
      }
    }

    // Post-processing.
    {
      const MechanismKernel lambda(detail::random_stochastic(k, 2 + r.uniform_index(4), r, opt.degenerate_rate));
      const double i_post = exact_pie(inst, postprocess(rr, lambda));
      check_le(i, "postprocessing", i_post, i_rr);
      check_le(i, "postprocessing_alpha", i_post, pie_bound_rr(eps, n, k));
    }

    // Mixture convexity.
    {
      const double w = r.uniform();
      const Epsilon eps2 = Epsilon::finite(r.uniform() * opt.max_epsilon);
      const MechanismKernel rr2 = rr_kernel(eps2, k);
      const double i2 = exact_pie(inst, rr2);
      const double i_mix = exact_pie(inst, mixture_kernel(w, rr, rr2));
      check_le(i, "mixture_convexity", i_mix, w * i_rr + (1.0 - w) * i2);
      check_le(i, "mixture_alpha", i_mix,
               w * pie_bound_rr(eps, n, k) + (1.0 - w) * pie_bound_rr(eps2, n, k));
    }

    // Scores: likelihood vector is sufficient, argmax is not.
    const Matcher likelihood = likelihood_matcher(j_rr, inst.prior);
    const Matcher profiles = profile_matcher(j_rr, inst.prior);
    const Matrix j_s = joint_us(j_rr, profiles);
    const double i_s = mutual_information(JointDistribution(j_s));
    check_le(i, "pse_le_pie", i_s, i_rr);
    check_eq(i, "likelihood_sufficient", exact_pse(j_rr, likelihood), i_rr);
    const Matrix j_arg = joint_us(j_rr, argmax_matcher(profiles));
    const double i_arg = mutual_information(JointDistribution(j_arg));
    check_le(i, "pse_le_pie_argmax", i_arg, i_rr);

    // Fano: exact Bayes error against the generalized and uniform forms.
    {
      const auto pu = inst.prior.probabilities();
      const double beta_u = 1.0 - *std::max_element(pu.begin(), pu.end());
      const bool uniform = std::all_of(pu.begin(), pu.end(), [&](double v) { return std::abs(v - pu[0]) < 1e-15; });
      for (const Matrix* js : {&j_s, &j_arg}) {
        const double beta = exact_bayes_error(*js);
        const double i_score = mutual_information(JointDistribution(*js));
        if (beta_u > 0.0) {
          const double fano_s = fano_lower_bound(i_score, GeneralPrior{beta_u}).raw;
          const double fano_y = fano_lower_bound(i_rr, GeneralPrior{beta_u}).raw;
          check_le(i, "fano_general", fano_s, beta);
          check_le(i, "fano_general_pie", fano_y, fano_s);
          check_le(i, "fano_general_alpha", fano_lower_bound(pie_bound_rr(eps, n, k), GeneralPrior{beta_u}).raw, beta);
        }
        if (uniform) {
          check_le(i, "fano_uniform", fano_lower_bound(i_score, UniformPrior{n}).raw, beta);
          check_le(i, "fano_uniform_pie", fano_lower_bound(i_rr, UniformPrior{n}).raw, beta);
          check_le(i, "fano_uniform_alpha", fano_lower_bound(pie_bound_rr(eps, n, k), UniformPrior{n}).raw, beta);
        }
      }
    }

    // Composition, t = 2.
    {
      const double i_comp = exact_composed_pie(inst, rr, rr);
      check_le(i, "rr_composition", i_comp, pie_bound_composed(pie_bound_rr(eps, n, k), 2));
      const std::uint32_t g = 2;
      if (std::pow(2.0, static_cast<double>(k)) * 2.0 <= 64.0) {
        const double i_comp_glh = exact_composed_pie_glh(inst, eps, g);
        check_le(i, "glh_composition", i_comp_glh, pie_bound_composed(pie_bound_glh(eps, g, n, k), 2));
      }
    }
    ++report.instances;
  });
  ViolationReport total;
  for (auto& part : parts) {
    total.instances += part.instances;
    total.checks += part.checks;
    total.violations.insert(total.violations.end(), part.violations.begin(), part.violations.end());
  }
  return total;
}

}  // namespace pierisk::oracle
