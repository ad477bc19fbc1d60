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

// Synthetic populations of per-user Markov chains over a Zipf-popular
// alphabet.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pierisk/dataset.hpp"
#include "pierisk/parallel.hpp"
#include "pierisk/probcore.hpp"
#include "pierisk/rng.hpp"

namespace pierisk {

struct SynthesisSpec {
  std::size_t users = 1000;
  std::size_t alphabet_size = 1000;
  double zipf_exponent = 1.0;
  /// Dirichlet concentration around the global law; +inf makes every user
  /// share the global chain, values near 0 give near-deterministic users.
  double concentration = 1.0;
  /// Symbols each user can visit (sparsity of pi_i and Lambda_i).
  std::size_t support = 20;
  /// Give users pairwise disjoint supports (requires users * support <= |X|).
  bool disjoint_supports = false;
  std::size_t train_length = 10;
  std::size_t test_length = 10;

  void validate() const {
    if (users < 1) throw std::invalid_argument("SynthesisSpec: users must be >= 1");
    if (alphabet_size < 1) throw std::invalid_argument("SynthesisSpec: alphabet must be non-empty");
    if (!(zipf_exponent > 0.0)) throw std::invalid_argument("SynthesisSpec: Zipf exponent must be > 0");
    if (!(concentration > 0.0)) throw std::invalid_argument("SynthesisSpec: concentration must be > 0");
    if (support < 1) throw std::invalid_argument("SynthesisSpec: support must be >= 1");
    if (train_length < 1 || test_length < 1) throw std::invalid_argument("SynthesisSpec: lengths must be >= 1");
    if (disjoint_supports && users * support > alphabet_size) {
      throw std::invalid_argument("SynthesisSpec: disjoint supports need users * support <= |X|");
    }
  }

  std::string describe() const {
    std::ostringstream os;
    os << "synth(users=" << users << ",alphabet=" << alphabet_size << ",zipf=" << zipf_exponent
       << ",concentration=" << concentration << ",support=" << support << ",disjoint=" << disjoint_supports
       << ",train=" << train_length << ",test=" << test_length << ")";
    return os.str();
  }
};

/// p(x) proportional to (x + 1)^-s.
inline std::vector<double> zipf_distribution(std::size_t k, double s) {
  std::vector<double> p(k);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += p[i] = std::pow(static_cast<double>(i + 1), -s);
  for (double& v : p) v /= sum;
  return p;
}

struct SynthResult {
  PopulationModel population;
  TraceDataset dataset;
};

namespace detail {

/// Dirichlet(concentration * base) over the listed symbols.
inline SparseDistribution perturbed(std::span<const Symbol> symbols, std::span<const double> global, double concentration,
                                    Rng& rng) {
  std::vector<double> base(symbols.size());
  double total = 0.0;
  for (std::size_t i = 0; i < symbols.size(); ++i) total += base[i] = global[symbols[i]];
  for (double& b : base) b /= total;
  std::vector<Symbol> s(symbols.begin(), symbols.end());
  if (std::isinf(concentration)) return SparseDistribution(std::move(s), std::move(base));
  std::vector<double> w(symbols.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) sum += w[i] = rng.gamma(concentration * base[i]);
  if (!(sum > 0.0)) {
    std::fill(w.begin(), w.end(), 0.0);
    w[DiscreteSampler(base)(rng)] = 1.0;
    sum = 1.0;
  }
  for (double& v : w) v /= sum;
  std::vector<Symbol> keep;
  std::vector<double> kept;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) {
      keep.push_back(s[i]);
      kept.push_back(w[i]);
    }
  }
  return SparseDistribution(std::move(keep), std::move(kept));
}

inline std::vector<Symbol> draw_support(const SynthesisSpec& spec, std::size_t user, const DiscreteSampler& popularity,
                                        Rng& rng) {
  std::vector<Symbol> out;
  if (spec.disjoint_supports) {
    for (std::size_t i = 0; i < spec.support; ++i) out.push_back(static_cast<Symbol>(user * spec.support + i));
    return out;
  }
  if (spec.support >= spec.alphabet_size) {
    for (std::size_t i = 0; i < spec.alphabet_size; ++i) out.push_back(static_cast<Symbol>(i));
    return out;
  }
  std::vector<bool> taken(spec.alphabet_size, false);
  // Popularity-weighted draws without replacement; uniform fill if the head
  // keeps colliding.
  for (std::size_t attempts = 0; out.size() < spec.support && attempts < 64 * spec.support; ++attempts) {
    const Symbol s = popularity(rng);
    if (!taken[s]) {
      taken[s] = true;
      out.push_back(s);
    }
  }
  while (out.size() < spec.support) {
    const auto s = static_cast<Symbol>(rng.uniform_index(spec.alphabet_size));
    if (!taken[s]) {
      taken[s] = true;
      out.push_back(s);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Builds n per-user chains and samples one trace of length
/// train_length + test_length from each. User u draws from rng.split(u),
/// so the result is independent of `threads`.
inline SynthResult synth_population(const SynthesisSpec& spec, const Rng& rng, unsigned threads = 1) {
  spec.validate();
  const auto global = zipf_distribution(spec.alphabet_size, spec.zipf_exponent);
  const DiscreteSampler popularity(global);
  const bool shared = std::isinf(spec.concentration);
  std::vector<Symbol> shared_support;
  if (shared && !spec.disjoint_supports) {
    Rng r = rng.split(std::numeric_limits<std::uint64_t>::max());
    shared_support = detail::draw_support(spec, 0, popularity, r);
  }

  const std::size_t length = spec.train_length + spec.test_length;
  std::vector<std::optional<MarkovSource>> sources(spec.users);
  std::vector<Trace> traces(spec.users);
  parallel_for(spec.users, threads, [&](std::size_t u) {
    Rng r = rng.split(u);
    const std::vector<Symbol> support =
        shared_support.empty() ? detail::draw_support(spec, u, popularity, r) : shared_support;
    SparseDistribution initial = detail::perturbed(support, global, spec.concentration, r);
    std::vector<std::pair<Symbol, SparseDistribution>> rows;
    rows.reserve(support.size());
    for (Symbol a : support) rows.emplace_back(a, detail::perturbed(support, global, spec.concentration, r));
    sources[u].emplace(spec.alphabet_size, std::move(initial), std::move(rows), length);
    traces[u] = sources[u]->sample(r);
  });

  std::vector<MarkovSource> chains;
  chains.reserve(spec.users);
  for (auto& s : sources) chains.push_back(std::move(*s));
  TraceDataset ds;
  ds.alphabet = Alphabet(spec.alphabet_size);
  ds.traces = std::move(traces);
  ds.provenance = spec.describe() + ";seed_key=" + std::to_string(rng.key());
  return {PopulationModel(CategoricalDistribution::uniform(spec.users), std::move(chains)), std::move(ds)};
}

}  // namespace pierisk
