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

// Server-side frequency estimation from obfuscated records, plus the
// analytic l2 loss of each estimator.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "pierisk/mechanisms.hpp"
#include "pierisk/parallel.hpp"
#include "pierisk/records.hpp"

namespace pierisk {

struct FrequencyEstimate {
  std::vector<double> estimate;  // may be negative before thresholding
  std::vector<double> counts;    // c_RR(x) or c_GLH(x)
  std::size_t n = 0;
  bool thresholded = false;
  double threshold = 0.0;
};

namespace detail {

inline void require_informative(double mu, double nu, const char* who) {
  if (!(mu - nu > 0.0)) throw std::invalid_argument(std::string(who) + ": mechanism carries no information (mu == nu)");
}

}  // namespace detail

/// RR estimate from precomputed counts c_RR(x) over n records.
inline FrequencyEstimate rr_estimate_from_counts(std::vector<double> counts, std::size_t n, Epsilon eps) {
  if (n == 0) throw std::invalid_argument("estimate_rr: need at least one record");
  const RandomizedResponse rr(eps, counts.size());
  detail::require_informative(rr.mu(), rr.nu(), "estimate_rr");
  FrequencyEstimate est;
  est.n = n;
  est.counts = std::move(counts);
  est.estimate.resize(est.counts.size());
  const double nn = static_cast<double>(n);
  for (std::size_t x = 0; x < est.counts.size(); ++x) {
    est.estimate[x] = (est.counts[x] / nn - rr.nu()) / (rr.mu() - rr.nu());
  }
  return est;
}

/// GLH estimate from precomputed support counts c_GLH(x) over n records.
inline FrequencyEstimate glh_estimate_from_counts(std::vector<double> counts, std::size_t n, Epsilon eps,
                                                  std::uint32_t g) {
  if (n == 0) throw std::invalid_argument("estimate_glh: need at least one record");
  if (g < 2) throw std::invalid_argument("estimate_glh: g must be >= 2");
  const RandomizedResponse bucket_rr(eps, g);
  const double nu = 1.0 / static_cast<double>(g);
  detail::require_informative(bucket_rr.mu(), nu, "estimate_glh");
  FrequencyEstimate est;
  est.n = n;
  est.counts = std::move(counts);
  est.estimate.resize(est.counts.size());
  const double nn = static_cast<double>(n);
  for (std::size_t x = 0; x < est.counts.size(); ++x) {
    est.estimate[x] = (est.counts[x] / nn - nu) / (bucket_rr.mu() - nu);
  }
  return est;
}

/// Streaming c_GLH accumulator: O(|X|) per record, no grouping or buffering.
class GlhCountAccumulator {
 public:
  explicit GlhCountAccumulator(std::size_t alphabet_size) : counts_(alphabet_size, 0.0) {}

  void add(const HashDescriptor& h, std::uint32_t y) {
    for (std::size_t x = 0; x < counts_.size(); ++x) {
      if (HashFamily::carter_wegman_eval(h, x) == y) counts_[x] += 1.0;
    }
    ++n_;
  }

  std::size_t records() const { return n_; }
  const std::vector<double>& counts() const { return counts_; }
  std::vector<double> take_counts() { return std::move(counts_); }

 private:
  std::vector<double> counts_;
  std::size_t n_ = 0;
};

/// Unbiased RR estimate from the reported symbols alone.
inline FrequencyEstimate estimate_rr(std::span<const Symbol> ys, Epsilon eps, std::size_t alphabet_size) {
  if (ys.empty()) throw std::invalid_argument("estimate_rr: need at least one record");
  std::vector<double> counts(alphabet_size, 0.0);
  for (Symbol y : ys) {
    if (y >= alphabet_size) throw std::out_of_range("estimate_rr: record symbol out of range");
    counts[y] += 1.0;
  }
  return rr_estimate_from_counts(std::move(counts), ys.size(), eps);
}

inline FrequencyEstimate estimate_rr(std::span<const RrRecord> records, Epsilon eps, std::size_t alphabet_size) {
  std::vector<Symbol> ys;
  ys.reserve(records.size());
  for (const auto& r : records) ys.push_back(r.y);
  return estimate_rr(ys, eps, alphabet_size);
}

/// c_GLH(x) = #{(h, y) : h(x) = y}.
///
/// Records sharing a descriptor are grouped so each (descriptor, x) pair is
/// hashed once. Work is O(#distinct descriptors · |X| + n); shards are
/// counted independently and merged in shard order.
inline std::vector<double> glh_support_counts(std::span<const GlhRecord> records, std::size_t alphabet_size,
                                              unsigned threads = 1) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return records[l].hash < records[r].hash; });

  // [begin, end) ranges of `order` with a common descriptor.
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && records[order[j]].hash == records[order[i]].hash) ++j;
    groups.emplace_back(i, j);
    i = j;
  }

  const std::size_t shards = std::max<std::size_t>(1, std::min<std::size_t>(groups.size(), 64));
  std::vector<std::vector<double>> partial(shards);
  parallel_shards(groups.size(), shards, threads, [&](std::size_t s, std::size_t b, std::size_t e) {
    auto& counts = partial[s];
    counts.assign(alphabet_size, 0.0);
    std::map<std::uint32_t, double> hist;
    for (std::size_t gi = b; gi < e; ++gi) {
      const auto [gb, ge] = groups[gi];
      const HashDescriptor& h = records[order[gb]].hash;
      if (h.prime == 0 || h.buckets < 2) throw DataError("estimate_glh: record without a Carter-Wegman descriptor");
      if (ge - gb == 1) {
        const std::uint32_t y = records[order[gb]].y;
        for (std::size_t x = 0; x < alphabet_size; ++x) {
          if (HashFamily::carter_wegman_eval(h, x) == y) counts[x] += 1.0;
        }
        continue;
      }
      hist.clear();
      for (std::size_t k = gb; k < ge; ++k) hist[records[order[k]].y] += 1.0;
      for (std::size_t x = 0; x < alphabet_size; ++x) {
        auto it = hist.find(HashFamily::carter_wegman_eval(h, x));
        if (it != hist.end()) counts[x] += it->second;
      }
    }
  });
  std::vector<double> counts(alphabet_size, 0.0);
  for (const auto& p : partial) {
    if (p.empty()) continue;
    for (std::size_t x = 0; x < alphabet_size; ++x) counts[x] += p[x];
  }
  return counts;
}

/// Unbiased GLH estimate; records carry their own hash descriptors.
inline FrequencyEstimate estimate_glh(std::span<const GlhRecord> records, Epsilon eps, std::uint32_t g,
                                      std::size_t alphabet_size, unsigned threads = 1) {
  if (records.empty()) throw std::invalid_argument("estimate_glh: need at least one record");
  for (const auto& r : records) {
    if (r.hash.buckets != g) throw DataError("estimate_glh: record bucket count differs from g");
  }
  return glh_estimate_from_counts(glh_support_counts(records, alphabet_size, threads), records.size(), eps, g);
}

/// Expected l2 loss (= variance) of the RR estimate of p(x).
inline double expected_l2_rr(Epsilon eps, std::size_t alphabet_size, std::size_t n, double px) {
  if (eps.is_unbounded()) return 0.0;
  const double em1 = std::expm1(eps.value());
  if (!(em1 > 0.0)) throw std::invalid_argument("expected_l2_rr: epsilon must be > 0");
  const double k = static_cast<double>(alphabet_size);
  const double nn = static_cast<double>(n);
  return (k + em1 - 1.0) / (nn * em1 * em1) + px * (k - 2.0) / (nn * em1);
}

/// Expected l2 loss (= variance) of the GLH estimate of p(x), ideal universal family.
inline double expected_l2_glh(Epsilon eps, std::size_t g, std::size_t n, double px) {
  if (g < 2) throw std::invalid_argument("expected_l2_glh: g must be >= 2");
  if (eps.is_unbounded()) throw std::invalid_argument("expected_l2_glh: epsilon must be finite");
  const double em1 = std::expm1(eps.value());
  if (!(em1 > 0.0)) throw std::invalid_argument("expected_l2_glh: epsilon must be > 0");
  const double gg = static_cast<double>(g);
  const double nn = static_cast<double>(n);
  const double e = em1 + 1.0;
  return (gg + em1) * (gg + em1) / (nn * em1 * em1 * (gg - 1.0)) +
         px * (gg * gg - 2.0 * gg - e + 1.0) / (nn * em1 * (gg - 1.0));
}

/// g -> infinity limit of expected_l2_glh at fixed θ_GLH.
inline double expected_l2_glh_limit(double theta, std::size_t n, double px) {
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("expected_l2_glh_limit: theta must be in (0,1)");
  return px * (1.0 - theta) / (static_cast<double>(n) * theta);
}

/// Null-hypothesis (p(x) = 0) variances used to set significance thresholds.
inline double null_variance_rr(Epsilon eps, std::size_t alphabet_size, std::size_t n) {
  return expected_l2_rr(eps, alphabet_size, n, 0.0);
}
inline double null_variance_glh(Epsilon eps, std::size_t g, std::size_t n) { return expected_l2_glh(eps, g, n, 0.0); }

/// Bonferroni-corrected one-sided z for `level` over `tests` hypotheses.
inline double bonferroni_z(double level, std::size_t tests) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bonferroni_z: level must be in (0,1)");
  const boost::math::normal_distribution<double> std_normal;
  return boost::math::quantile(boost::math::complement(std_normal, level / static_cast<double>(tests)));
}

/// Zeroes entries at or below z·sqrt(null_variance). Not renormalized.
inline FrequencyEstimate apply_significance_threshold(FrequencyEstimate est, double null_variance, double level) {
  if (!(null_variance > 0.0)) throw std::invalid_argument("apply_significance_threshold: null variance must be > 0");
  const double t = bonferroni_z(level, est.estimate.size()) * std::sqrt(null_variance);
  for (double& v : est.estimate) {
    if (v <= t) v = 0.0;
  }
  est.thresholded = true;
  est.threshold = t;
  return est;
}

struct TopPhiError {
  double l2_sum = 0.0;
  double mean_relative_error = 0.0;
  std::vector<Symbol> top;                // selected symbols, descending p_true
  std::vector<Symbol> excluded_relative;  // p_true(x) = 0, left out of the relative mean
};

/// Indices of the φ largest entries of p, ties broken by lower index.
inline std::vector<Symbol> top_phi(std::span<const double> p, std::size_t phi) {
  if (phi > p.size()) throw std::invalid_argument("top_phi: phi exceeds alphabet size");
  std::vector<Symbol> idx(p.size());
  std::iota(idx.begin(), idx.end(), Symbol{0});
  auto cmp = [&](Symbol a, Symbol b) { return p[a] != p[b] ? p[a] > p[b] : a < b; };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(phi), idx.end(), cmp);
  idx.resize(phi);
  return idx;
}

inline TopPhiError l2_and_relative_error(std::span<const double> p_true, std::span<const double> p_hat,
                                         std::size_t phi) {
  if (p_true.size() != p_hat.size()) throw std::invalid_argument("l2_and_relative_error: size mismatch");
  TopPhiError out;
  out.top = top_phi(p_true, phi);
  double rel = 0.0;
  std::size_t rel_count = 0;
  for (Symbol x : out.top) {
    const double d = p_true[x] - p_hat[x];
    out.l2_sum += d * d;
    if (p_true[x] > 0.0) {
      rel += std::abs(d) / p_true[x];
      ++rel_count;
    } else {
      out.excluded_relative.push_back(x);
    }
  }
  out.mean_relative_error = rel_count ? rel / static_cast<double>(rel_count) : 0.0;
  return out;
}

}  // namespace pierisk
