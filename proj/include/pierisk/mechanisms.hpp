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

// Local obfuscation mechanisms: randomized response over X, general local
// hashing into [g], and the channel algebra used to reason about them.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pierisk/probcore.hpp"
#include "pierisk/rng.hpp"

namespace pierisk {

/// A privacy budget that is either a finite non-negative real or unbounded.
class Epsilon {
 public:
  static Epsilon finite(double value) {
    if (!(value >= 0.0) || !std::isfinite(value)) throw std::invalid_argument("Epsilon: must be finite and >= 0");
    return Epsilon(value, false);
  }
  static Epsilon unbounded() { return Epsilon(0.0, true); }

  bool is_unbounded() const { return unbounded_; }
  double value() const {
    if (unbounded_) throw std::logic_error("Epsilon: value() on unbounded budget");
    return value_;
  }
  std::string to_string() const { return unbounded_ ? std::string("inf") : std::to_string(value_); }

 private:
  Epsilon(double v, bool u) : value_(v), unbounded_(u) {}
  double value_;
  bool unbounded_;
};

namespace detail {

// Keep probability mu = e^eps / (k + e^eps - 1) of the k-ary randomized
// response. Written as 1 / (1 + (k-1) e^-eps) so huge eps never overflows.
inline double rr_keep_probability(double eps, double k) { return 1.0 / (1.0 + (k - 1.0) * std::exp(-eps)); }

inline double rr_other_probability(double eps, double k) {
  const double t = std::exp(-eps);
  return t / (1.0 + (k - 1.0) * t);
}

// (e^eps - 1) / (k + e^eps - 1).
inline double rr_theta(double eps, double k) {
  if (eps < 1.0) {
    const double em1 = std::expm1(eps);
    return em1 / (k + em1);
  }
  const double t = std::exp(-eps);
  return -std::expm1(-eps) / (1.0 + (k - 1.0) * t);
}

}  // namespace detail

/// Q(y|x) with inputs in [0, in) and outputs in [0, out). Row x is the
/// distribution of the output given input x (a "column" in channel notation).
class MechanismKernel {
 public:
  MechanismKernel(Matrix q) : q_(std::move(q)) {
    if (q_.rows == 0 || q_.cols == 0) throw std::invalid_argument("MechanismKernel: empty alphabet");
    for (std::size_t x = 0; x < q_.rows; ++x) {
      std::vector<double> row(q_.row(x).begin(), q_.row(x).end());
      detail::normalize_probabilities(row, "MechanismKernel column");
      std::copy(row.begin(), row.end(), q_.row(x).begin());
    }
  }

  static MechanismKernel identity(std::size_t k) {
    Matrix m(k, k);
    for (std::size_t i = 0; i < k; ++i) m(i, i) = 1.0;
    return MechanismKernel(std::move(m));
  }
  static MechanismKernel constant(std::size_t in, const CategoricalDistribution& out) {
    Matrix m(in, out.size());
    for (std::size_t x = 0; x < in; ++x) {
      for (std::size_t y = 0; y < out.size(); ++y) m(x, y) = out[static_cast<Symbol>(y)];
    }
    return MechanismKernel(std::move(m));
  }

  std::size_t input_size() const { return q_.rows; }
  std::size_t output_size() const { return q_.cols; }
  /// Q(y | x).
  double operator()(std::size_t y, std::size_t x) const { return q_(x, y); }
  std::span<const double> given(std::size_t x) const { return q_.row(x); }
  const Matrix& matrix() const { return q_; }

 private:
  Matrix q_;
};

/// Randomized response over a k-ary alphabet.
class RandomizedResponse {
 public:
  RandomizedResponse(Epsilon eps, std::size_t alphabet_size) : eps_(eps), k_(alphabet_size) {
    if (k_ < 2) throw std::invalid_argument("RandomizedResponse: alphabet size must be >= 2");
    const double k = static_cast<double>(k_);
    if (eps_.is_unbounded()) {
      mu_ = 1.0;
      nu_ = 0.0;
      theta_ = 1.0;
    } else {
      mu_ = detail::rr_keep_probability(eps_.value(), k);
      nu_ = detail::rr_other_probability(eps_.value(), k);
      theta_ = detail::rr_theta(eps_.value(), k);
    }
  }

  const Epsilon& epsilon() const { return eps_; }
  std::size_t alphabet_size() const { return k_; }
  /// Probability of reporting the true symbol.
  double mu() const { return mu_; }
  /// Probability of reporting each specific other symbol.
  double nu() const { return nu_; }
  /// MI loss parameter; also the "keep" probability of the two-stage view.
  double theta() const { return theta_; }

  MechanismKernel kernel() const {
    Matrix m(k_, k_, nu_);
    for (std::size_t i = 0; i < k_; ++i) m(i, i) = mu_;
    return MechanismKernel(std::move(m));
  }

  /// Keep x with probability theta, otherwise report a uniform symbol
  /// (possibly x itself). Distributionally identical to Q(.|x).
  Symbol sample(Symbol x, Rng& rng) const {
    if (x >= k_) throw std::out_of_range("RandomizedResponse: symbol out of range");
    if (rng.uniform() < theta_) return x;
    return static_cast<Symbol>(rng.uniform_index(k_));
  }

 private:
  Epsilon eps_;
  std::size_t k_;
  double mu_;
  double nu_;
  double theta_;
};

/// ε-RR kernel on a k-ary alphabet.
inline MechanismKernel rr_kernel(Epsilon eps, std::size_t alphabet_size) {
  return RandomizedResponse(eps, alphabet_size).kernel();
}

/// Self-describing hash function member. For Carter-Wegman members
/// h(x) = ((a x + b) mod prime) mod buckets + 1. For exhaustive-table members
/// `a` is the table index and `prime` is 0.
struct HashDescriptor {
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  std::uint64_t prime = 0;
  std::uint32_t buckets = 0;

  friend bool operator==(const HashDescriptor&, const HashDescriptor&) = default;
  friend auto operator<=>(const HashDescriptor&, const HashDescriptor&) = default;
};

inline bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  if (n % 2 == 0) return n == 2;
  for (std::uint64_t d = 3; d * d <= n; d += 2) {
    if (n % d == 0) return false;
  }
  return true;
}

inline std::uint64_t next_prime_above(std::uint64_t n) {
  std::uint64_t p = n + 1;
  while (!is_prime(p)) ++p;
  return p;
}

/// Universal hash family X -> [g] (buckets are 1-based).
class HashFamily {
 public:
  enum class Kind { kCarterWegman, kExhaustiveTable };

  static constexpr std::uint64_t kExhaustiveTableCap = 1'000'000;

  /// Carter-Wegman family with the smallest prime above max(|X|, 2^31).
  static HashFamily carter_wegman(std::size_t domain_size, std::uint32_t buckets) {
    return carter_wegman_with_prime(domain_size, buckets,
                                    next_prime_above(std::max<std::uint64_t>(domain_size, 1ULL << 31)));
  }

  static HashFamily carter_wegman_with_prime(std::size_t domain_size, std::uint32_t buckets, std::uint64_t prime) {
    if (buckets < 2) throw std::invalid_argument("HashFamily: g must be >= 2");
    if (!is_prime(prime) || prime <= domain_size) throw std::invalid_argument("HashFamily: need prime P > |X|");
    if (prime >= (1ULL << 32)) throw std::invalid_argument("HashFamily: prime must fit in 32 bits");
    return HashFamily(Kind::kCarterWegman, domain_size, buckets, prime, 0);
  }

  /// All g^|X| functions X -> [g]; exactly universal, for enumeration only.
  static HashFamily exhaustive_table(std::size_t domain_size, std::uint32_t buckets) {
    if (buckets < 2) throw std::invalid_argument("HashFamily: g must be >= 2");
    double count = std::pow(static_cast<double>(buckets), static_cast<double>(domain_size));
    if (count > static_cast<double>(kExhaustiveTableCap)) {
      throw SizeCapExceeded("HashFamily: exhaustive table exceeds 1e6 functions");
    }
    std::uint64_t n = 1;
    for (std::size_t i = 0; i < domain_size; ++i) n *= buckets;
    return HashFamily(Kind::kExhaustiveTable, domain_size, buckets, 0, n);
  }

  Kind kind() const { return kind_; }
  std::size_t domain_size() const { return domain_; }
  std::uint32_t buckets() const { return g_; }
  std::uint64_t prime() const { return prime_; }
  /// Number of members for the exhaustive table (0 for Carter-Wegman).
  std::uint64_t table_size() const { return table_size_; }

  HashDescriptor draw(Rng& rng) const {
    if (kind_ == Kind::kCarterWegman) {
      return {1 + rng.uniform_index(prime_ - 1), rng.uniform_index(prime_), prime_, g_};
    }
    return {rng.uniform_index(table_size_), 0, 0, g_};
  }

  HashDescriptor member(std::uint64_t table_index) const {
    if (kind_ != Kind::kExhaustiveTable || table_index >= table_size_) {
      throw std::invalid_argument("HashFamily: invalid table index");
    }
    return {table_index, 0, 0, g_};
  }

  bool valid(const HashDescriptor& h) const {
    if (h.buckets != g_) return false;
    if (kind_ == Kind::kCarterWegman) return h.prime == prime_ && h.a >= 1 && h.a < prime_ && h.b < prime_;
    return h.prime == 0 && h.a < table_size_ && h.b == 0;
  }

  /// Bucket of x in [1, g].
  std::uint32_t evaluate(const HashDescriptor& h, Symbol x) const {
    if (!valid(h)) throw std::invalid_argument("HashFamily: invalid descriptor");
    if (x >= domain_) throw std::out_of_range("HashFamily: symbol out of range");
    return evaluate_unchecked(h, x);
  }

  std::uint32_t evaluate_unchecked(const HashDescriptor& h, Symbol x) const {
    if (kind_ == Kind::kCarterWegman) return carter_wegman_eval(h, x);
    std::uint64_t t = h.a;
    for (Symbol i = 0; i < x; ++i) t /= g_;
    return static_cast<std::uint32_t>(t % g_) + 1;
  }

  /// ((a x + b) mod P) mod g + 1 from the descriptor alone.
  static std::uint32_t carter_wegman_eval(const HashDescriptor& h, std::uint64_t x) {
    return static_cast<std::uint32_t>(((h.a * x + h.b) % h.prime) % h.buckets) + 1;
  }

 private:
  HashFamily(Kind kind, std::size_t domain, std::uint32_t g, std::uint64_t prime, std::uint64_t table)
      : kind_(kind), domain_(domain), g_(g), prime_(prime), table_size_(table) {}

  Kind kind_;
  std::size_t domain_;
  std::uint32_t g_;
  std::uint64_t prime_;
  std::uint64_t table_size_;
};

/// Stateless evaluation of a descriptor read back from a record.
inline std::uint32_t hash_eval(const HashFamily& family, const HashDescriptor& h, Symbol x) {
  return family.evaluate(h, x);
}

/// (g, ε)-GLH: hash x with a fresh random family member, then randomized
/// response over the g buckets.
class GeneralLocalHash {
 public:
  GeneralLocalHash(Epsilon eps, HashFamily family) : eps_(eps), family_(std::move(family)), bucket_rr_(eps, family_.buckets()) {}

  const Epsilon& epsilon() const { return eps_; }
  std::uint32_t g() const { return family_.buckets(); }
  const HashFamily& family() const { return family_; }
  /// P(y = h(x)).
  double mu() const { return bucket_rr_.mu(); }
  /// Background rate 1/g used by the estimator.
  double nu() const { return 1.0 / static_cast<double>(g()); }
  /// P(y = b) for each specific bucket b != h(x).
  double other() const { return bucket_rr_.nu(); }
  double theta() const { return bucket_rr_.theta(); }
  /// The bucket channel given a fixed h: randomized response on [g].
  const RandomizedResponse& bucket_mechanism() const { return bucket_rr_; }

  struct Output {
    HashDescriptor hash;
    std::uint32_t bucket;  // 1-based
  };

  Output sample(Symbol x, Rng& rng) const {
    if (x >= family_.domain_size()) throw std::out_of_range("GeneralLocalHash: symbol out of range");
    const HashDescriptor h = family_.draw(rng);
    return {h, perturb(family_.evaluate_unchecked(h, x), rng)};
  }

  /// Randomized response on a 1-based bucket.
  std::uint32_t perturb(std::uint32_t z, Rng& rng) const { return bucket_rr_.sample(z - 1, rng) + 1; }

 private:
  Epsilon eps_;
  HashFamily family_;
  RandomizedResponse bucket_rr_;
};

/// Smallest ε with Q(y|x) <= e^ε Q(y|x') for all x, x', y.
inline Epsilon ldp_epsilon_of_kernel(const MechanismKernel& k) {
  double eps = 0.0;
  for (std::size_t y = 0; y < k.output_size(); ++y) {
    double hi = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < k.input_size(); ++x) {
      hi = std::max(hi, k(y, x));
      lo = std::min(lo, k(y, x));
    }
    if (hi <= 0.0) continue;
    if (lo <= 0.0) return Epsilon::unbounded();
    eps = std::max(eps, std::log(hi / lo));
  }
  return Epsilon::finite(eps);
}

/// λ∘Q: run k, then feed its output through `channel`.
inline MechanismKernel postprocess(const MechanismKernel& k, const MechanismKernel& channel) {
  if (channel.input_size() != k.output_size()) throw std::invalid_argument("postprocess: alphabet mismatch");
  Matrix m(k.input_size(), channel.output_size());
  for (std::size_t x = 0; x < k.input_size(); ++x) {
    for (std::size_t y = 0; y < k.output_size(); ++y) {
      const double q = k(y, x);
      if (q == 0.0) continue;
      for (std::size_t z = 0; z < channel.output_size(); ++z) m(x, z) += q * channel(z, y);
    }
  }
  return MechanismKernel(std::move(m));
}

/// Runs q1 with probability w and q2 otherwise.
inline MechanismKernel mixture_kernel(double w, const MechanismKernel& q1, const MechanismKernel& q2) {
  if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("mixture_kernel: w must be in [0,1]");
  if (q1.input_size() != q2.input_size() || q1.output_size() != q2.output_size()) {
    throw std::invalid_argument("mixture_kernel: alphabet mismatch");
  }
  Matrix m(q1.input_size(), q1.output_size());
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = w * q1.matrix().data[i] + (1.0 - w) * q2.matrix().data[i];
  return MechanismKernel(std::move(m));
}

/// Output distribution of a kernel for input distribution p_X.
inline std::vector<double> push_forward(const MechanismKernel& k, std::span<const double> px) {
  if (px.size() != k.input_size()) throw std::invalid_argument("push_forward: alphabet mismatch");
  std::vector<double> out(k.output_size(), 0.0);
  for (std::size_t x = 0; x < px.size(); ++x) {
    if (px[x] == 0.0) continue;
    for (std::size_t y = 0; y < out.size(); ++y) out[y] += px[x] * k(y, x);
  }
  return out;
}

}  // namespace pierisk
