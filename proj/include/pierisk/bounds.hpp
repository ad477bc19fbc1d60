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

// Closed-form privacy arithmetic: MI loss parameters, caps on I(U;Y), and
// Fano-type lower bounds on the Bayes identification error.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <variant>

#include "pierisk/mechanisms.hpp"
#include "pierisk/probcore.hpp"

namespace pierisk {

/// θ_RR = (e^ε − 1) / (|X| + e^ε − 1).
inline double mi_loss_rr(Epsilon eps, std::size_t alphabet_size) {
  if (alphabet_size < 2) throw std::invalid_argument("mi_loss_rr: |X| must be >= 2");
  if (eps.is_unbounded()) return 1.0;
  return detail::rr_theta(eps.value(), static_cast<double>(alphabet_size));
}

/// θ_GLH = (e^ε − 1) / (g + e^ε − 1).
inline double mi_loss_glh(Epsilon eps, std::size_t g) {
  if (g < 2) throw std::invalid_argument("mi_loss_glh: g must be >= 2");
  if (eps.is_unbounded()) return 1.0;
  return detail::rr_theta(eps.value(), static_cast<double>(g));
}

/// min(log2 n, log2 |X|): the largest I(U;X) can be.
inline double identity_information_cap(std::size_t n, std::size_t alphabet_size) {
  if (n < 1 || alphabet_size < 1) throw std::invalid_argument("bounds: n and |X| must be >= 1");
  return std::min(std::log2(static_cast<double>(n)), std::log2(static_cast<double>(alphabet_size)));
}

/// Generic ε-LDP cap: min{ε log e, ε² log e, log n, log |X|}.
inline double pie_bound_ldp(Epsilon eps, std::size_t n, std::size_t alphabet_size) {
  const double cap = identity_information_cap(n, alphabet_size);
  if (eps.is_unbounded()) return cap;
  const double e = eps.value();
  return std::min({e * kLog2E, e * e * kLog2E, cap});
}

inline double pie_bound_rr(Epsilon eps, std::size_t n, std::size_t alphabet_size) {
  return mi_loss_rr(eps, alphabet_size) * identity_information_cap(n, alphabet_size);
}

inline double pie_bound_glh(Epsilon eps, std::size_t g, std::size_t n, std::size_t alphabet_size) {
  return mi_loss_glh(eps, g) * identity_information_cap(n, alphabet_size);
}

/// t releases of an α-PIE mechanism leak at most t·α, correlated or not.
inline double pie_bound_composed(double alpha_single, std::size_t t) {
  if (t < 1) throw std::invalid_argument("pie_bound_composed: t must be >= 1");
  return static_cast<double>(t) * alpha_single;
}

struct UniformPrior {
  std::size_t n;
};
/// Arbitrary prior summarized by its Bayes error β_U = 1 − max_u p_U(u).
struct GeneralPrior {
  double beta_u;
};
using PriorSpec = std::variant<UniformPrior, GeneralPrior>;

namespace detail {

// log2(1 − β_U) for the prior; negative for every valid prior.
inline double log_max_prior(const PriorSpec& prior) {
  if (const auto* u = std::get_if<UniformPrior>(&prior)) {
    if (u->n < 2) throw std::invalid_argument("fano: uniform prior needs n >= 2");
    return -std::log2(static_cast<double>(u->n));
  }
  const double b = std::get<GeneralPrior>(prior).beta_u;
  if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("fano: beta_U must lie in (0,1)");
  return std::log2(1.0 - b);
}

}  // namespace detail

struct FanoBound {
  double raw;       // formula value, may be negative
  double reported;  // clamped to [0, 1)
  bool vacuous;     // raw <= 0
};

/// Lower bound on β_{U|S} given I(U;S) (or any upper bound on it, such as α).
inline FanoBound fano_lower_bound(double info_bits, const PriorSpec& prior) {
  if (!(info_bits >= 0.0)) throw std::invalid_argument("fano_lower_bound: information must be >= 0");
  const double raw = 1.0 + (info_bits + 1.0) / detail::log_max_prior(prior);
  return {raw, std::clamp(raw, 0.0, std::nextafter(1.0, 0.0)), raw <= 0.0};
}

struct AlphaTarget {
  double alpha_max;
  bool achievable;  // false when alpha_max < 0
};

/// Largest α whose Fano bound still guarantees β_{U|S} >= beta_min.
inline AlphaTarget alpha_for_target_bayes_error(double beta_min, const PriorSpec& prior) {
  if (!(beta_min > 0.0 && beta_min < 1.0)) throw std::invalid_argument("alpha_for_target: beta_min must be in (0,1)");
  const double a = -(1.0 - beta_min) * detail::log_max_prior(prior) - 1.0;
  return {a, a >= 0.0};
}

/// ε with mi_loss(ε, domain) = θ, for RR (domain = |X|) or GLH (domain = g).
inline Epsilon epsilon_for_theta(double theta, std::size_t domain_size) {
  if (!(theta >= 0.0 && theta < 1.0)) throw std::invalid_argument("epsilon_for_theta: theta must be in [0,1)");
  return Epsilon::finite(std::log1p(theta * static_cast<double>(domain_size) / (1.0 - theta)));
}

/// g = e^ε + 1, the LDP-utility optimum for fixed ε. Reference only.
inline double ldp_optimal_g(Epsilon eps) {
  if (eps.is_unbounded()) return std::numeric_limits<double>::infinity();
  return std::exp(eps.value()) + 1.0;
}

struct DataProcessingCap {
  double info_ux;  // I(U;X)
  double entropy_x;
  double cap;  // min(log2 n, log2 |X|, H(X)); I(U;Y) <= min(I(U;X), cap) for any mechanism
};

inline constexpr std::size_t kDataProcessingCellCap = 50'000'000;

inline DataProcessingCap pie_data_processing_cap(const PopulationModel& population) {
  if (!population.is_single_datum()) {
    throw std::invalid_argument("pie_data_processing_cap: only single-datum populations are enumerable");
  }
  if (population.users() * population.alphabet_size() > kDataProcessingCellCap) {
    throw SizeCapExceeded("pie_data_processing_cap: n * |X| exceeds 5e7 cells");
  }
  const JointDistribution j = population.joint();
  const double hx = entropy(j.col_marginal());
  return {mutual_information(j), hx,
          std::min(identity_information_cap(population.users(), population.alphabet_size()), hx)};
}

/// Everything the `bounds` command reports for one parameter point.
struct PieBoundReport {
  std::size_t n = 0;
  std::size_t alphabet_size = 0;
  std::optional<Epsilon> epsilon;
  std::optional<std::size_t> g;
  std::size_t t = 1;
  double theta = 0.0;            // MI loss of the specific mechanism (RR, or GLH when g is set)
  double alpha_ldp = 0.0;        // generic LDP cap, times t
  double alpha_mechanism = 0.0;  // mechanism-specific cap, times t
  double beta_u = 0.0;           // prior Bayes error (uniform prior: 1 − 1/n)
  FanoBound fano_ldp{};
  FanoBound fano_mechanism{};
  std::optional<double> target_beta;
  std::optional<AlphaTarget> target_alpha;
};

inline PieBoundReport make_bound_report(Epsilon eps, std::size_t n, std::size_t alphabet_size,
                                        std::optional<std::size_t> g = std::nullopt, std::size_t t = 1,
                                        std::optional<double> target_beta = std::nullopt) {
  PieBoundReport r;
  r.n = n;
  r.alphabet_size = alphabet_size;
  r.epsilon = eps;
  r.g = g;
  r.t = t;
  r.theta = g ? mi_loss_glh(eps, *g) : mi_loss_rr(eps, alphabet_size);
  r.alpha_ldp = pie_bound_composed(pie_bound_ldp(eps, n, alphabet_size), t);
  r.alpha_mechanism =
      pie_bound_composed(g ? pie_bound_glh(eps, *g, n, alphabet_size) : pie_bound_rr(eps, n, alphabet_size), t);
  r.beta_u = 1.0 - 1.0 / static_cast<double>(n);
  if (n >= 2) {
    r.fano_ldp = fano_lower_bound(r.alpha_ldp, UniformPrior{n});
    r.fano_mechanism = fano_lower_bound(r.alpha_mechanism, UniformPrior{n});
    if (target_beta) {
      r.target_beta = target_beta;
      r.target_alpha = alpha_for_target_bayes_error(*target_beta, UniformPrior{n});
    }
  }
  return r;
}

}  // namespace pierisk
