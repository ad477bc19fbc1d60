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

// Discrete probability primitives. Every information quantity is in bits.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "pierisk/errors.hpp"
#include "pierisk/rng.hpp"

namespace pierisk {

inline constexpr double kProbTolerance = 1e-9;
inline constexpr double kLog2E = 1.4426950408889634074;

using Symbol = std::uint32_t;

namespace detail {

// Validates a probability vector in place: rejects negatives and sums that
// are off by more than kProbTolerance, renormalizes smaller drift.
inline void normalize_probabilities(std::vector<double>& p, const char* what) {
  if (p.empty()) throw std::invalid_argument(std::string(what) + ": empty probability vector");
  double sum = 0.0;
  for (double& v : p) {
    if (!std::isfinite(v) || v < 0.0) {
      // Roundoff from subtractions can leave -1e-17; anything real is rejected.
      if (std::isfinite(v) && v > -1e-15) {
        v = 0.0;
      } else {
        throw std::invalid_argument(std::string(what) + ": negative or non-finite probability");
      }
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbTolerance) {
    throw std::invalid_argument(std::string(what) + ": probabilities sum to " + std::to_string(sum));
  }
  if (sum != 1.0) {
    for (double& v : p) v /= sum;
  }
}

}  // namespace detail

/// Finite alphabet with dense ids 0..size-1 and an optional label table.
class Alphabet {
 public:
  explicit Alphabet(std::size_t size) : size_(size) {
    if (size == 0) throw std::invalid_argument("Alphabet: size must be >= 1");
  }

  static Alphabet with_labels(std::vector<std::string> labels) {
    Alphabet a(labels.size());
    a.index_.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!a.index_.emplace(labels[i], static_cast<Symbol>(i)).second) {
        throw std::invalid_argument("Alphabet: duplicate label '" + labels[i] + "'");
      }
    }
    a.labels_ = std::move(labels);
    return a;
  }

  std::size_t size() const { return size_; }
  bool has_labels() const { return !labels_.empty(); }
  const std::string& label(Symbol s) const { return labels_.at(s); }
  std::optional<Symbol> index_of(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(Symbol s) const { return s < size_; }

 private:
  std::size_t size_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, Symbol> index_;
};

/// A point on the probability simplex over {0, ..., size-1}.
class CategoricalDistribution {
 public:
  explicit CategoricalDistribution(std::vector<double> p) : p_(std::move(p)) {
    detail::normalize_probabilities(p_, "CategoricalDistribution");
  }

  static CategoricalDistribution uniform(std::size_t k) {
    return CategoricalDistribution(std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }
  static CategoricalDistribution point_mass(std::size_t k, Symbol at) {
    std::vector<double> p(k, 0.0);
    p.at(at) = 1.0;
    return CategoricalDistribution(std::move(p));
  }

  std::size_t size() const { return p_.size(); }
  double operator[](Symbol x) const { return p_[x]; }
  std::span<const double> probabilities() const { return p_; }

  friend bool operator==(const CategoricalDistribution&, const CategoricalDistribution&) = default;

 private:
  std::vector<double> p_;
};

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
};

/// Joint law of (U, Y): rows index users, columns index outputs.
class JointDistribution {
 public:
  explicit JointDistribution(Matrix m) : m_(std::move(m)) {
    detail::normalize_probabilities(m_.data, "JointDistribution");
  }

  /// p(u, y) = prior(u) * conditional(u, y); each conditional row must be a distribution.
  static JointDistribution from_conditional(const CategoricalDistribution& prior, const Matrix& conditional) {
    if (conditional.rows != prior.size()) throw std::invalid_argument("JointDistribution: row count mismatch");
    Matrix m(conditional.rows, conditional.cols);
    for (std::size_t u = 0; u < m.rows; ++u) {
      for (std::size_t y = 0; y < m.cols; ++y) m(u, y) = prior[static_cast<Symbol>(u)] * conditional(u, y);
    }
    return JointDistribution(std::move(m));
  }

  std::size_t rows() const { return m_.rows; }
  std::size_t cols() const { return m_.cols; }
  double operator()(std::size_t r, std::size_t c) const { return m_(r, c); }
  const Matrix& matrix() const { return m_; }

  std::vector<double> row_marginal() const {
    std::vector<double> out(m_.rows, 0.0);
    for (std::size_t r = 0; r < m_.rows; ++r) {
      for (std::size_t c = 0; c < m_.cols; ++c) out[r] += m_(r, c);
    }
    return out;
  }
  std::vector<double> col_marginal() const {
    std::vector<double> out(m_.cols, 0.0);
    for (std::size_t r = 0; r < m_.rows; ++r) {
      for (std::size_t c = 0; c < m_.cols; ++c) out[c] += m_(r, c);
    }
    return out;
  }

 private:
  Matrix m_;
};

/// Coordinate-list joint for huge, mostly empty (U, Y) tables.
class SparseJointDistribution {
 public:
  struct Entry {
    std::size_t row;
    std::size_t col;
    double p;
  };

  SparseJointDistribution(std::size_t rows, std::size_t cols, std::vector<Entry> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    double sum = 0.0;
    for (const Entry& e : entries_) {
      if (e.row >= rows_ || e.col >= cols_) throw std::invalid_argument("SparseJointDistribution: index out of range");
      if (!(e.p >= 0.0)) throw std::invalid_argument("SparseJointDistribution: negative probability");
      sum += e.p;
    }
    if (std::abs(sum - 1.0) > kProbTolerance) throw std::invalid_argument("SparseJointDistribution: mass != 1");
    for (Entry& e : entries_) e.p /= sum;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const Entry> entries() const { return entries_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<Entry> entries_;
};

/// Fraction of nonzero cells below which callers should prefer the sparse joint.
inline constexpr double kSparseJointDensity = 0.01;

/// Distribution with explicit support; entries sum to 1.
class SparseDistribution {
 public:
  SparseDistribution() = default;
  SparseDistribution(std::vector<Symbol> symbols, std::vector<double> probs)
      : symbols_(std::move(symbols)), probs_(std::move(probs)) {
    if (symbols_.size() != probs_.size()) throw std::invalid_argument("SparseDistribution: size mismatch");
    detail::normalize_probabilities(probs_, "SparseDistribution");
  }

  static SparseDistribution from_dense(std::span<const double> p) {
    std::vector<Symbol> s;
    std::vector<double> v;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] > 0.0) {
        s.push_back(static_cast<Symbol>(i));
        v.push_back(p[i]);
      }
    }
    return SparseDistribution(std::move(s), std::move(v));
  }

  std::span<const Symbol> symbols() const { return symbols_; }
  std::span<const double> probabilities() const { return probs_; }
  bool empty() const { return symbols_.empty(); }

  Symbol sample(Rng& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      acc += probs_[i];
      if (u < acc) return symbols_[i];
    }
    return symbols_.back();
  }

 private:
  std::vector<Symbol> symbols_;
  std::vector<double> probs_;
};

/// Homogeneous Markov source generating traces of fixed length. Only states
/// reachable from the initial support carry transition rows.
class MarkovSource {
 public:
  MarkovSource(std::size_t alphabet_size, SparseDistribution initial,
               std::vector<std::pair<Symbol, SparseDistribution>> rows, std::size_t length)
      : alphabet_size_(alphabet_size), initial_(std::move(initial)), rows_(std::move(rows)), length_(length) {
    if (length_ < 1) throw std::invalid_argument("MarkovSource: trace length must be >= 1");
    if (initial_.empty()) throw std::invalid_argument("MarkovSource: empty initial distribution");
    std::sort(rows_.begin(), rows_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    auto check = [&](Symbol s) {
      if (s >= alphabet_size_) throw std::invalid_argument("MarkovSource: symbol outside alphabet");
      if (length_ > 1 && row_index(s) == rows_.size()) {
        throw std::invalid_argument("MarkovSource: reachable state " + std::to_string(s) + " has no transition row");
      }
    };
    for (Symbol s : initial_.symbols()) check(s);
    for (const auto& [state, row] : rows_) {
      if (row.empty()) throw std::invalid_argument("MarkovSource: empty transition row");
      for (Symbol s : row.symbols()) check(s);
    }
  }

  /// Dense convenience constructor; every row of `transition` must be a distribution.
  static MarkovSource from_dense(const CategoricalDistribution& initial, const Matrix& transition, std::size_t length) {
    std::vector<std::pair<Symbol, SparseDistribution>> rows;
    for (std::size_t a = 0; a < transition.rows; ++a) {
      rows.emplace_back(static_cast<Symbol>(a), SparseDistribution::from_dense(transition.row(a)));
    }
    return MarkovSource(initial.size(), SparseDistribution::from_dense(initial.probabilities()), std::move(rows),
                        length);
  }

  std::size_t alphabet_size() const { return alphabet_size_; }
  std::size_t length() const { return length_; }
  const SparseDistribution& initial() const { return initial_; }
  std::span<const std::pair<Symbol, SparseDistribution>> rows() const { return rows_; }
  const SparseDistribution& row(Symbol state) const {
    const std::size_t i = row_index(state);
    if (i == rows_.size()) throw std::out_of_range("MarkovSource: no transition row for state");
    return rows_[i].second;
  }

  std::vector<Symbol> sample(Rng& rng) const {
    std::vector<Symbol> trace;
    trace.reserve(length_);
    trace.push_back(initial_.sample(rng));
    for (std::size_t t = 1; t < length_; ++t) trace.push_back(row(trace.back()).sample(rng));
    return trace;
  }

 private:
  std::size_t row_index(Symbol s) const {
    auto it = std::lower_bound(rows_.begin(), rows_.end(), s, [](const auto& r, Symbol v) { return r.first < v; });
    return (it != rows_.end() && it->first == s) ? static_cast<std::size_t>(it - rows_.begin()) : rows_.size();
  }

  std::size_t alphabet_size_;
  SparseDistribution initial_;
  std::vector<std::pair<Symbol, SparseDistribution>> rows_;
  std::size_t length_;
};

/// p_U together with p_{X|U=u} for every user.
class PopulationModel {
 public:
  using SingleDatum = std::vector<CategoricalDistribution>;
  using Markov = std::vector<MarkovSource>;

  PopulationModel(CategoricalDistribution prior, SingleDatum data) : prior_(std::move(prior)), data_(std::move(data)) {
    const auto& rows = std::get<SingleDatum>(data_);
    if (rows.size() != prior_.size()) throw std::invalid_argument("PopulationModel: one data model per user required");
    for (const auto& r : rows) {
      if (r.size() != rows.front().size()) throw std::invalid_argument("PopulationModel: alphabet size mismatch");
    }
    alphabet_size_ = rows.front().size();
  }

  PopulationModel(CategoricalDistribution prior, Markov sources) : prior_(std::move(prior)), data_(std::move(sources)) {
    const auto& rows = std::get<Markov>(data_);
    if (rows.size() != prior_.size()) throw std::invalid_argument("PopulationModel: one data model per user required");
    alphabet_size_ = rows.front().alphabet_size();
    for (const auto& src : rows) {
      if (src.alphabet_size() != alphabet_size_) throw std::invalid_argument("PopulationModel: alphabet size mismatch");
    }
  }

  std::size_t users() const { return prior_.size(); }
  std::size_t alphabet_size() const { return alphabet_size_; }
  const CategoricalDistribution& prior() const { return prior_; }
  bool is_single_datum() const { return std::holds_alternative<SingleDatum>(data_); }
  const SingleDatum& single_datum() const { return std::get<SingleDatum>(data_); }
  const Markov& markov() const { return std::get<Markov>(data_); }

  /// Exact p_{U,X} for single-datum models (X is one symbol).
  JointDistribution joint() const {
    const auto& rows = single_datum();
    Matrix cond(users(), alphabet_size_);
    for (std::size_t u = 0; u < users(); ++u) {
      for (std::size_t x = 0; x < alphabet_size_; ++x) cond(u, x) = rows[u][static_cast<Symbol>(x)];
    }
    return JointDistribution::from_conditional(prior_, cond);
  }

  /// Draws one datum (single-datum) or one full trace (Markov) for user u.
  std::vector<Symbol> sample_data(std::size_t u, Rng& rng) const;

 private:
  CategoricalDistribution prior_;
  std::variant<SingleDatum, Markov> data_;
  std::size_t alphabet_size_ = 0;
};

/// Shannon entropy in bits.
inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return std::max(0.0, h);
}
inline double entropy(const CategoricalDistribution& d) { return entropy(d.probabilities()); }

/// D(p || q) in bits. Throws InfiniteDivergence when support(p) is not in support(q).
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: alphabet mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) throw InfiniteDivergence();
    d += p[i] * std::log2(p[i] / q[i]);
  }
  return std::max(0.0, d);
}
inline double kl_divergence(const CategoricalDistribution& p, const CategoricalDistribution& q) {
  return kl_divergence(p.probabilities(), q.probabilities());
}

/// I(U; Y) in bits from the double-sum definition.
inline double mutual_information(const JointDistribution& j) {
  const auto pu = j.row_marginal();
  const auto py = j.col_marginal();
  double mi = 0.0;
  for (std::size_t u = 0; u < j.rows(); ++u) {
    for (std::size_t y = 0; y < j.cols(); ++y) {
      const double p = j(u, y);
      if (p > 0.0) mi += p * std::log2(p / (pu[u] * py[y]));
    }
  }
  return std::max(0.0, mi);
}

inline double mutual_information(const SparseJointDistribution& j) {
  std::vector<double> pu(j.rows(), 0.0);
  std::vector<double> py(j.cols(), 0.0);
  for (const auto& e : j.entries()) {
    pu[e.row] += e.p;
    py[e.col] += e.p;
  }
  double mi = 0.0;
  for (const auto& e : j.entries()) {
    if (e.p > 0.0) mi += e.p * std::log2(e.p / (pu[e.row] * py[e.col]));
  }
  return std::max(0.0, mi);
}

/// Inverse-CDF sampler; O(log k) per draw after O(k) setup.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(std::span<const double> p) : cdf_(p.size()) {
    std::partial_sum(p.begin(), p.end(), cdf_.begin());
    last_positive_ = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] > 0.0) last_positive_ = i;
    }
  }
  explicit DiscreteSampler(const CategoricalDistribution& d) : DiscreteSampler(d.probabilities()) {}

  Symbol operator()(Rng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    auto idx = static_cast<std::size_t>(it - cdf_.begin());
    // u can land on the final cumulative value only through rounding.
    return static_cast<Symbol>(std::min(idx, last_positive_));
  }

 private:
  std::vector<double> cdf_;
  std::size_t last_positive_;
};

/// One draw from d. Deterministic for a fixed rng state.
inline Symbol sample(const CategoricalDistribution& d, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double p = d[static_cast<Symbol>(i)];
    if (p <= 0.0) continue;
    acc += p;
    last = i;
    if (u < acc) return static_cast<Symbol>(i);
  }
  return static_cast<Symbol>(last);
}

inline std::vector<Symbol> PopulationModel::sample_data(std::size_t u, Rng& rng) const {
  if (is_single_datum()) return {sample(single_datum().at(u), rng)};
  return markov().at(u).sample(rng);
}

/// Symmetric Dirichlet(concentration) draw of dimension k.
inline std::vector<double> dirichlet(std::size_t k, double concentration, Rng& rng) {
  std::vector<double> out(k);
  double sum = 0.0;
  for (double& v : out) {
    v = rng.gamma(concentration);
    sum += v;
  }
  if (sum <= 0.0) {
    // All gammas underflowed (tiny concentration): fall back to a random vertex.
    std::fill(out.begin(), out.end(), 0.0);
    out[rng.uniform_index(k)] = 1.0;
    return out;
  }
  for (double& v : out) v /= sum;
  return out;
}

/// Writes `symbol,probability` rows (with header).
inline void write_distribution_csv(std::ostream& os, std::span<const double> p, const Alphabet* labels = nullptr) {
  os << "symbol,probability\n";
  os.precision(17);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (labels != nullptr && labels->has_labels()) {
      os << labels->label(static_cast<Symbol>(i));
    } else {
      os << i;
    }
    os << ',' << p[i] << '\n';
  }
}

}  // namespace pierisk
