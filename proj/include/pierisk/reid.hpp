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

// Re-identification by Markov-profile likelihood matching.
//
// Each user is profiled by a visit vector and a transition matrix learned
// from training events. An obfuscated trace is scored against every profile
// (log2-likelihood, zero entries replaced by a floor) and attributed to the
// best-scoring user.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "pierisk/mechanisms.hpp"
#include "pierisk/parallel.hpp"
#include "pierisk/probcore.hpp"
#include "pierisk/rng.hpp"

namespace pierisk {

using Trace = std::vector<Symbol>;

inline constexpr double kDefaultLikelihoodFloor = 1e-8;

/// r_i = (Λ_i, π_i) learned by maximum likelihood. Both are stored sparsely;
/// absent entries are zero and the floor is applied only when scoring.
class MarkovProfile {
 public:
  MarkovProfile(std::size_t owner, std::size_t alphabet_size, std::vector<std::pair<Symbol, double>> visit,
                std::vector<std::pair<std::uint64_t, double>> transitions, double floor)
      : owner_(owner),
        alphabet_size_(alphabet_size),
        visit_(std::move(visit)),
        transitions_(std::move(transitions)),
        floor_(floor),
        log_floor_(std::log2(floor)) {
    if (!(floor > 0.0)) throw std::invalid_argument("MarkovProfile: floor must be > 0");
    std::sort(visit_.begin(), visit_.end());
    std::sort(transitions_.begin(), transitions_.end());
    for (auto& [s, p] : visit_) log_visit_.push_back(std::log2(p));
    for (auto& [k, p] : transitions_) log_transitions_.push_back(std::log2(p));
  }

  std::size_t owner() const { return owner_; }
  std::size_t alphabet_size() const { return alphabet_size_; }
  double floor() const { return floor_; }
  std::span<const std::pair<Symbol, double>> visit_entries() const { return visit_; }

  /// MLE π(x); 0 when unseen.
  double visit(Symbol x) const {
    const auto i = find_visit(x);
    return i < visit_.size() ? visit_[i].second : 0.0;
  }
  /// MLE Λ(a, b); 0 when unseen.
  double transition(Symbol a, Symbol b) const {
    const auto i = find_transition(key(a, b));
    return i < transitions_.size() ? transitions_[i].second : 0.0;
  }

  double log2_visit(Symbol x) const {
    const auto i = find_visit(x);
    return i < visit_.size() ? log_visit_[i] : log_floor_;
  }
  double log2_transition(Symbol a, Symbol b) const {
    const auto i = find_transition(key(a, b));
    return i < transitions_.size() ? log_transitions_[i] : log_floor_;
  }

 private:
  std::uint64_t key(Symbol a, Symbol b) const { return static_cast<std::uint64_t>(a) * alphabet_size_ + b; }

  std::size_t find_visit(Symbol x) const {
    auto it = std::lower_bound(visit_.begin(), visit_.end(), x, [](const auto& e, Symbol v) { return e.first < v; });
    return (it != visit_.end() && it->first == x) ? static_cast<std::size_t>(it - visit_.begin()) : visit_.size();
  }
  std::size_t find_transition(std::uint64_t k) const {
    auto it = std::lower_bound(transitions_.begin(), transitions_.end(), k,
                               [](const auto& e, std::uint64_t v) { return e.first < v; });
    return (it != transitions_.end() && it->first == k) ? static_cast<std::size_t>(it - transitions_.begin())
                                                         : transitions_.size();
  }

  std::size_t owner_;
  std::size_t alphabet_size_;
  std::vector<std::pair<Symbol, double>> visit_;
  std::vector<std::pair<std::uint64_t, double>> transitions_;
  std::vector<double> log_visit_;
  std::vector<double> log_transitions_;
  double floor_;
  double log_floor_;
};

/// Count-and-normalize MLE of π and Λ from one training trace.
inline MarkovProfile train_profile(std::span<const Symbol> trace, std::size_t alphabet_size, std::size_t owner = 0,
                                   double floor = kDefaultLikelihoodFloor) {
  if (trace.empty()) throw std::invalid_argument("train_profile: empty trace");
  std::vector<Symbol> sorted(trace.begin(), trace.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<Symbol, double>> visit;
  for (std::size_t i = 0; i < sorted.size();) {
    if (sorted[i] >= alphabet_size) throw std::out_of_range("train_profile: symbol outside alphabet");
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    visit.emplace_back(sorted[i], static_cast<double>(j - i) / static_cast<double>(sorted.size()));
    i = j;
  }

  std::vector<std::pair<std::uint64_t, std::uint64_t>> moves;  // (from, key)
  moves.reserve(trace.size());
  for (std::size_t t = 1; t < trace.size(); ++t) {
    moves.emplace_back(trace[t - 1], static_cast<std::uint64_t>(trace[t - 1]) * alphabet_size + trace[t]);
  }
  std::sort(moves.begin(), moves.end());
  std::vector<std::pair<std::uint64_t, double>> transitions;
  for (std::size_t i = 0; i < moves.size();) {
    std::size_t row_end = i;
    while (row_end < moves.size() && moves[row_end].first == moves[i].first) ++row_end;
    const double row_total = static_cast<double>(row_end - i);
    for (std::size_t j = i; j < row_end;) {
      std::size_t k = j;
      while (k < row_end && moves[k].second == moves[j].second) ++k;
      transitions.emplace_back(moves[j].second, static_cast<double>(k - j) / row_total);
      j = k;
    }
    i = row_end;
  }
  return MarkovProfile(owner, alphabet_size, std::move(visit), std::move(transitions), floor);
}

/// log2 π(y_1) + Σ_t log2 Λ(y_{t-1}, y_t), zero entries replaced by the floor.
inline double log_likelihood(const MarkovProfile& profile, std::span<const Symbol> trace) {
  if (trace.empty()) throw std::invalid_argument("log_likelihood: empty trace");
  double ll = profile.log2_visit(trace[0]);
  for (std::size_t t = 1; t < trace.size(); ++t) ll += profile.log2_transition(trace[t - 1], trace[t]);
  return ll;
}

/// One GLH report: a hash member and the perturbed 1-based bucket.
using GlhObservation = GeneralLocalHash::Output;

/// GLH reports are scored on the visit vector: each event contributes
/// log2 of the π-mass hashing to its bucket (floored when that mass is 0).
inline double log_likelihood_hashed(const MarkovProfile& profile, std::span<const GlhObservation> reports) {
  if (reports.empty()) throw std::invalid_argument("log_likelihood_hashed: no reports");
  double ll = 0.0;
  for (const auto& r : reports) {
    double mass = 0.0;
    for (const auto& [x, p] : profile.visit_entries()) {
      if (HashFamily::carter_wegman_eval(r.hash, x) == r.bucket) mass += p;
    }
    ll += mass > 0.0 ? std::log2(mass) : std::log2(profile.floor());
  }
  return ll;
}

/// What the adversary observes for one user.
using Observation = std::variant<Trace, std::vector<GlhObservation>>;

/// Obfuscation applied independently to every event of a trace.
class TraceMechanism {
 public:
  static TraceMechanism identity() { return TraceMechanism(std::monostate{}); }
  static TraceMechanism rr(RandomizedResponse m) { return TraceMechanism(std::move(m)); }
  static TraceMechanism glh(GeneralLocalHash m) { return TraceMechanism(std::move(m)); }

  Observation apply(std::span<const Symbol> trace, Rng& rng) const {
    if (const auto* m = std::get_if<RandomizedResponse>(&impl_)) {
      Trace out;
      out.reserve(trace.size());
      for (Symbol x : trace) out.push_back(m->sample(x, rng));
      return out;
    }
    if (const auto* m = std::get_if<GeneralLocalHash>(&impl_)) {
      std::vector<GlhObservation> out;
      out.reserve(trace.size());
      for (Symbol x : trace) out.push_back(m->sample(x, rng));
      return out;
    }
    return Trace(trace.begin(), trace.end());
  }

  bool is_identity() const { return std::holds_alternative<std::monostate>(impl_); }

 private:
  using Impl = std::variant<std::monostate, RandomizedResponse, GeneralLocalHash>;
  explicit TraceMechanism(Impl impl) : impl_(std::move(impl)) {}
  Impl impl_;
};

inline double score(const MarkovProfile& profile, const Observation& y) {
  if (const auto* t = std::get_if<Trace>(&y)) return log_likelihood(profile, *t);
  return log_likelihood_hashed(profile, std::get<std::vector<GlhObservation>>(y));
}

using ScoreVector = std::vector<double>;

/// s_i = log-likelihood of y under profile i.
inline ScoreVector score_vector(const Observation& y, std::span<const MarkovProfile> profiles) {
  if (profiles.empty()) throw std::invalid_argument("score_vector: no profiles");
  ScoreVector s;
  s.reserve(profiles.size());
  const auto* reports = std::get_if<std::vector<GlhObservation>>(&y);
  if (reports == nullptr) {
    for (const auto& p : profiles) s.push_back(score(p, y));
    return s;
  }
  if (reports->empty()) throw std::invalid_argument("score_vector: no reports");
  // Hash every symbol once per report instead of once per (profile, entry).
  const std::size_t k = profiles.front().alphabet_size();
  std::vector<std::vector<std::uint8_t>> hits(reports->size(), std::vector<std::uint8_t>(k));
  for (std::size_t r = 0; r < reports->size(); ++r) {
    const auto& rep = (*reports)[r];
    for (std::size_t x = 0; x < k; ++x) hits[r][x] = HashFamily::carter_wegman_eval(rep.hash, x) == rep.bucket;
  }
  for (const auto& p : profiles) {
    double ll = 0.0;
    for (const auto& hit : hits) {
      double mass = 0.0;
      for (const auto& [x, px] : p.visit_entries()) {
        if (hit[x]) mass += px;
      }
      ll += mass > 0.0 ? std::log2(mass) : std::log2(p.floor());
    }
    s.push_back(ll);
  }
  return s;
}

/// Best score rule: argmax, ties to the lowest index.
inline std::size_t best_score_decision(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("best_score_decision: empty score vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

struct IdentificationResult {
  std::size_t trials = 0;
  std::size_t errors = 0;
  /// Proportion of trials attributed to the wrong user.
  double error_rate() const { return trials ? static_cast<double>(errors) / static_cast<double>(trials) : 0.0; }
};

/// Monte Carlo identification error: U ~ p_U, X ~ p_{X|U}, Y = mechanism(X),
/// decision by the best score rule. Trial i uses rng.split(i).
inline IdentificationResult identification_error_rate(const PopulationModel& population,
                                                      const TraceMechanism& mechanism,
                                                      std::span<const MarkovProfile> profiles, std::size_t trials,
                                                      const Rng& rng, unsigned threads = 1) {
  if (trials < 1) throw std::invalid_argument("identification_error_rate: trials must be >= 1");
  if (profiles.size() != population.users()) throw std::invalid_argument("identification_error_rate: one profile per user");
  const DiscreteSampler pick_user(population.prior());
  std::vector<std::uint8_t> wrong(trials, 0);
  parallel_for(trials, threads, [&](std::size_t i) {
    Rng r = rng.split(i);
    const std::size_t u = pick_user(r);
    const auto x = population.sample_data(u, r);
    const Observation y = mechanism.apply(x, r);
    const ScoreVector s = score_vector(y, profiles);
    wrong[i] = best_score_decision(s) != u ? 1 : 0;
  });
  IdentificationResult out;
  out.trials = trials;
  for (auto w : wrong) out.errors += w;
  return out;
}

/// Same measurement on fixed per-user evaluation data: pass p attributes
/// every user's data once (single-datum releases have a uniform prior).
inline IdentificationResult identification_error_rate(std::span<const Trace> eval_data, const TraceMechanism& mechanism,
                                                      std::span<const MarkovProfile> profiles, std::size_t passes,
                                                      const Rng& rng, unsigned threads = 1) {
  if (passes < 1) throw std::invalid_argument("identification_error_rate: passes must be >= 1");
  if (profiles.size() != eval_data.size()) throw std::invalid_argument("identification_error_rate: one profile per user");
  const std::size_t n = eval_data.size();
  std::vector<std::uint8_t> wrong(n * passes, 0);
  parallel_for(n * passes, threads, [&](std::size_t i) {
    Rng r = rng.split(i);
    const std::size_t u = i % n;
    const Observation y = mechanism.apply(eval_data[u], r);
    wrong[i] = best_score_decision(score_vector(y, profiles)) != u ? 1 : 0;
  });
  IdentificationResult out;
  out.trials = wrong.size();
  for (auto w : wrong) out.errors += w;
  return out;
}

struct DetPoint {
  double threshold;
  double far;
  double frr;
};

/// FAR/FRR at every distinct observed score plus ±∞. Accept iff score >= τ.
inline std::vector<DetPoint> far_frr_det(std::span<const double> genuine, std::span<const double> impostor) {
  if (genuine.empty() || impostor.empty()) throw std::invalid_argument("far_frr_det: score lists must be non-empty");
  std::vector<double> g(genuine.begin(), genuine.end());
  std::vector<double> im(impostor.begin(), impostor.end());
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());
  std::vector<double> thresholds;
  thresholds.reserve(g.size() + im.size() + 2);
  thresholds.push_back(-std::numeric_limits<double>::infinity());
  std::merge(g.begin(), g.end(), im.begin(), im.end(), std::back_inserter(thresholds));
  thresholds.push_back(std::numeric_limits<double>::infinity());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double ng = static_cast<double>(g.size());
  const double ni = static_cast<double>(im.size());
  std::vector<DetPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto below_g = std::lower_bound(g.begin(), g.end(), t) - g.begin();
    const auto below_i = std::lower_bound(im.begin(), im.end(), t) - im.begin();
    out.push_back({t, (ni - static_cast<double>(below_i)) / ni, static_cast<double>(below_g) / ng});
  }
  return out;
}

/// FAR and FRR at a single threshold.
inline DetPoint far_frr_at(std::span<const double> genuine, std::span<const double> impostor, double threshold) {
  if (genuine.empty() || impostor.empty()) throw std::invalid_argument("far_frr_at: score lists must be non-empty");
  const auto accepted = std::count_if(impostor.begin(), impostor.end(), [&](double s) { return s >= threshold; });
  const auto rejected = std::count_if(genuine.begin(), genuine.end(), [&](double s) { return s < threshold; });
  return {threshold, static_cast<double>(accepted) / static_cast<double>(impostor.size()),
          static_cast<double>(rejected) / static_cast<double>(genuine.size())};
}

}  // namespace pierisk
