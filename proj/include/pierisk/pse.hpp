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

// Score-based identification entropy: harvest genuine and impostor scores,
// then estimate D(f_G || f_I) with the fixed-k nearest-neighbour estimator
// on the real line.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pierisk/parallel.hpp"
#include "pierisk/reid.hpp"
#include "pierisk/rng.hpp"

namespace pierisk {

inline constexpr std::size_t kDefaultKnnK = 5;
inline constexpr double kDefaultTieJitter = 1e-10;

struct ScoreSample {
  std::vector<double> genuine;
  std::vector<double> impostor;
  std::string provenance;

  bool usable() const { return !genuine.empty() && !impostor.empty(); }
};

struct KnnOptions {
  std::size_t k = kDefaultKnnK;
  /// Jitter half-width, relative to the pooled score range, applied when the
  /// pooled sample contains exact duplicates.
  double tie_jitter = kDefaultTieJitter;
  std::uint64_t jitter_seed = 0x5eed;
};

struct KlEstimate {
  double bits = 0.0;      // max(raw, 0)
  double raw_bits = 0.0;  // unclipped estimator output
  bool below_noise_floor = false;
  bool jittered = false;
};

namespace detail {

// Distance from v to its k-th nearest neighbour in `sorted`, skipping index
// `self` (pass npos to include every element).
inline double kth_neighbor_distance(std::span<const double> sorted, double v, std::size_t pos, std::size_t k,
                                    std::size_t self) {
  // Two cursors walking outwards from the insertion point.
  std::ptrdiff_t left = static_cast<std::ptrdiff_t>(pos) - 1;
  auto right = static_cast<std::ptrdiff_t>(pos);
  const auto n = static_cast<std::ptrdiff_t>(sorted.size());
  const auto skip = static_cast<std::ptrdiff_t>(self);
  double d = 0.0;
  for (std::size_t found = 0; found < k;) {
    if (left == skip) --left;
    if (right == skip) ++right;
    const double dl = left >= 0 ? v - sorted[static_cast<std::size_t>(left)] : std::numeric_limits<double>::infinity();
    const double dr = right < n ? sorted[static_cast<std::size_t>(right)] - v : std::numeric_limits<double>::infinity();
    if (dl <= dr) {
      d = dl;
      --left;
    } else {
      d = dr;
      ++right;
    }
    ++found;
  }
  return d;
}

inline bool has_duplicates(std::vector<double> all) {
  std::sort(all.begin(), all.end());
  return std::adjacent_find(all.begin(), all.end()) != all.end();
}

// Smallest positive spacing representable near v.
inline double ulp_at(double v) { return std::nextafter(std::abs(v), std::numeric_limits<double>::infinity()) - std::abs(v); }

}  // namespace detail

/// D̂(p || q) in bits for scalar samples (fixed k, dimension 1):
/// (1/n) Σ ln(ν_k(i) / ρ_k(i)) + ln(m / (n − 1)), converted from nats.
inline KlEstimate knn_kl_estimate(std::span<const double> p_samples, std::span<const double> q_samples,
                                  const KnnOptions& opt = {}) {
  const std::size_t k = opt.k;
  if (k < 1) throw std::invalid_argument("knn_kl_estimate: k must be >= 1");
  if (p_samples.size() < k + 1) throw std::invalid_argument("knn_kl_estimate: need at least k+1 p-samples");
  if (q_samples.size() < k) throw std::invalid_argument("knn_kl_estimate: need at least k q-samples");

  std::vector<double> p(p_samples.begin(), p_samples.end());
  std::vector<double> q(q_samples.begin(), q_samples.end());
  for (double v : p) {
    if (!std::isfinite(v)) throw std::invalid_argument("knn_kl_estimate: non-finite sample");
  }
  for (double v : q) {
    if (!std::isfinite(v)) throw std::invalid_argument("knn_kl_estimate: non-finite sample");
  }

  KlEstimate out;
  std::vector<double> pooled(p);
  pooled.insert(pooled.end(), q.begin(), q.end());
  if (detail::has_duplicates(pooled)) {
    const auto [lo, hi] = std::minmax_element(pooled.begin(), pooled.end());
    const double range = *hi - *lo;
    const double half_width = opt.tie_jitter * (range > 0.0 ? range : 1.0);
    Rng rng(opt.jitter_seed);
    for (double& v : p) v += half_width * (2.0 * rng.uniform() - 1.0);
    for (double& v : q) v += half_width * (2.0 * rng.uniform() - 1.0);
    out.jittered = true;
  }

  std::sort(p.begin(), p.end());
  std::sort(q.begin(), q.end());
  const double n = static_cast<double>(p.size());
  const double m = static_cast<double>(q.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = p[i];
    double rho = detail::kth_neighbor_distance(p, v, i, k, i);
    const auto qpos = static_cast<std::size_t>(std::lower_bound(q.begin(), q.end(), v) - q.begin());
    double nu = detail::kth_neighbor_distance(q, v, qpos, k, static_cast<std::size_t>(-1));
    // Coincident floats survive jitter only at the resolution limit.
    const double tiny = detail::ulp_at(v);
    rho = std::max(rho, tiny);
    nu = std::max(nu, tiny);
    sum += std::log(nu / rho);
  }
  const double nats = sum / n + std::log(m / (n - 1.0));
  out.raw_bits = nats / std::log(2.0);
  out.bits = std::max(0.0, out.raw_bits);
  out.below_noise_floor = out.raw_bits < 0.0;
  return out;
}

struct PseResult {
  KlEstimate estimate;
  std::size_t k = kDefaultKnnK;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
};

/// Large-n PSE: D(f_G || f_I) estimated from the harvested scores.
inline PseResult pse_estimate(const ScoreSample& sample, const KnnOptions& opt = {}) {
  if (!sample.usable()) throw std::invalid_argument("pse_estimate: sample needs genuine and impostor scores");
  return {knn_kl_estimate(sample.genuine, sample.impostor, opt), opt.k, sample.genuine.size(), sample.impostor.size()};
}

struct HarvestOptions {
  std::size_t trials = 1000;
  /// Impostor scores recorded per trial, drawn uniformly from the other
  /// users with replacement; 0 records every other user.
  std::size_t impostors_per_trial = 0;
  unsigned threads = 1;
};

namespace detail {

inline ScoreSample harvest_impl(std::size_t n, const std::function<std::size_t(Rng&)>& pick_user,
                                const std::function<Observation(std::size_t, Rng&)>& observe,
                                std::span<const MarkovProfile> profiles, const HarvestOptions& opt, const Rng& rng) {
  if (opt.trials < 1) throw std::invalid_argument("harvest_scores: trials must be >= 1");
  if (profiles.size() != n) throw std::invalid_argument("harvest_scores: one profile per user required");
  ScoreSample out;
  if (n == 1) {
    // Single user: no impostors exist, sample flagged unusable.
    Rng r = rng.split(0);
    out.genuine.push_back(score(profiles[0], observe(0, r)));
    return out;
  }
  const std::size_t per = opt.impostors_per_trial == 0 ? n - 1 : opt.impostors_per_trial;
  std::vector<double> genuine(opt.trials);
  std::vector<double> impostor(opt.trials * per);
  parallel_for(opt.trials, opt.threads, [&](std::size_t t) {
    Rng r = rng.split(t);
    const std::size_t u = pick_user(r);
    const Observation y = observe(u, r);
    genuine[t] = score(profiles[u], y);
    double* dst = impostor.data() + t * per;
    if (opt.impostors_per_trial == 0) {
      for (std::size_t j = 0, w = 0; j < n; ++j) {
        if (j != u) dst[w++] = score(profiles[j], y);
      }
    } else {
      for (std::size_t w = 0; w < per; ++w) {
        std::size_t j = r.uniform_index(n - 1);
        if (j >= u) ++j;
        dst[w] = score(profiles[j], y);
      }
    }
  });
  out.genuine = std::move(genuine);
  out.impostor = std::move(impostor);
  return out;
}

}  // namespace detail

/// Scores from a population model: U ~ p_U, X ~ p_{X|U}, Y = mechanism(X).
inline ScoreSample harvest_scores(const PopulationModel& population, const TraceMechanism& mechanism,
                                  std::span<const MarkovProfile> profiles, const HarvestOptions& opt, const Rng& rng) {
  const DiscreteSampler pick(population.prior());
  return detail::harvest_impl(
      population.users(), [&](Rng& r) { return static_cast<std::size_t>(pick(r)); },
      [&](std::size_t u, Rng& r) { return mechanism.apply(population.sample_data(u, r), r); }, profiles, opt, rng);
}

/// Scores from fixed per-user evaluation data with a uniform user prior.
inline ScoreSample harvest_scores(std::span<const Trace> eval_data, const TraceMechanism& mechanism,
                                  std::span<const MarkovProfile> profiles, const HarvestOptions& opt, const Rng& rng) {
  const std::size_t n = eval_data.size();
  return detail::harvest_impl(
      n, [&](Rng& r) { return static_cast<std::size_t>(r.uniform_index(n)); },
      [&](std::size_t u, Rng& r) { return mechanism.apply(eval_data[u], r); }, profiles, opt, rng);
}

struct ConvergencePoint {
  std::size_t genuine_count;
  std::size_t impostor_count;
  double bits;
};

/// Estimates on nested prefixes of a seeded shuffle of both lists.
inline std::vector<ConvergencePoint> convergence_probe(const ScoreSample& sample, std::span<const double> fractions,
                                                       const KnnOptions& opt, const Rng& rng) {
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("convergence_probe: fractions must lie in (0,1]");
  }
  std::vector<double> g = sample.genuine;
  std::vector<double> im = sample.impostor;
  Rng r = rng.split(0xc0);
  std::shuffle(g.begin(), g.end(), r);
  std::shuffle(im.begin(), im.end(), r);
  std::vector<ConvergencePoint> out;
  for (double f : fractions) {
    const auto ng = std::max<std::size_t>(opt.k + 1, static_cast<std::size_t>(std::ceil(f * static_cast<double>(g.size()))));
    const auto ni = std::max<std::size_t>(opt.k, static_cast<std::size_t>(std::ceil(f * static_cast<double>(im.size()))));
    const auto est = knn_kl_estimate(std::span(g).first(std::min(ng, g.size())),
                                     std::span(im).first(std::min(ni, im.size())), opt);
    out.push_back({std::min(ng, g.size()), std::min(ni, im.size()), est.raw_bits});
  }
  return out;
}

/// True when the last two probe points agree within `relative` (default 5%).
inline bool converged(std::span<const ConvergencePoint> series, double relative = 0.05, double absolute = 1e-3) {
  if (series.size() < 2) return false;
  const double a = series[series.size() - 2].bits;
  const double b = series.back().bits;
  return std::abs(a - b) <= std::max(relative * std::max(std::abs(a), std::abs(b)), absolute);
}

/// Spread of the estimator: standard deviation of estimates on disjoint
/// random halves, scaled by 1/sqrt(2) to the full-sample size. Resampling
/// with replacement is avoided because it manufactures zero distances.
inline double half_sample_standard_error(const ScoreSample& sample, const KnnOptions& opt, std::size_t reps,
                                         const Rng& rng) {
  if (reps < 2) throw std::invalid_argument("half_sample_standard_error: reps must be >= 2");
  std::vector<double> est;
  est.reserve(reps);
  for (std::size_t i = 0; i < reps; ++i) {
    Rng r = rng.split(i);
    std::vector<double> g = sample.genuine;
    std::vector<double> im = sample.impostor;
    std::shuffle(g.begin(), g.end(), r);
    std::shuffle(im.begin(), im.end(), r);
    g.resize(g.size() / 2);
    im.resize(im.size() / 2);
    est.push_back(knn_kl_estimate(g, im, opt).raw_bits);
  }
  const double mean = std::accumulate(est.begin(), est.end(), 0.0) / static_cast<double>(reps);
  double ss = 0.0;
  for (double v : est) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(reps - 1)) / std::sqrt(2.0);
}

}  // namespace pierisk
