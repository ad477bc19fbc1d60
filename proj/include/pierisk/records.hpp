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

// Obfuscated-record files.
//
// CSV:
//   RR   header `user_idx,y`            rows `<user>,<symbol>`
//   GLH  header `user_idx,a,b,P,g,y`    rows with the hash descriptor and 1-based bucket
//
// Binary batch (all integers little-endian):
//   bytes 0-3   magic "PIER"
//   bytes 4-5   version (1)
//   bytes 6-7   record kind (1 = RR, 2 = GLH)
//   bytes 8-15  record count
//   then per record: RR  -> u64 user, u32 y
//                    GLH -> u64 user, u64 a, u64 b, u64 P, u32 g, u32 y

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pierisk/errors.hpp"
#include "pierisk/mechanisms.hpp"

namespace pierisk {

struct RrRecord {
  std::uint64_t user = 0;
  Symbol y = 0;

  friend bool operator==(const RrRecord&, const RrRecord&) = default;
};

struct GlhRecord {
  std::uint64_t user = 0;
  HashDescriptor hash;
  std::uint32_t y = 0;  // 1-based bucket

  friend bool operator==(const GlhRecord&, const GlhRecord&) = default;
};

enum class RecordKind : std::uint16_t { kRr = 1, kGlh = 2 };

inline constexpr std::array<char, 4> kBatchMagic{'P', 'I', 'E', 'R'};
inline constexpr std::uint16_t kBatchVersion = 1;

namespace detail {

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_unsigned_v<T>);
  std::array<char, sizeof(T)> buf;
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> buf;
  if (!is.read(reinterpret_cast<char*>(buf.data()), buf.size())) throw DataError("binary records: truncated input");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::uint64_t parse_u64(const std::string& s, std::size_t line_no) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (s.empty() || s[0] == '-') throw std::invalid_argument("neg");
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": expected unsigned integer, got '" + s + "'");
  }
  if (used != s.size()) throw DataError("line " + std::to_string(line_no) + ": trailing characters in '" + s + "'");
  return v;
}

inline void check_glh(const GlhRecord& r, const std::string& where) {
  if (r.hash.buckets < 2 || r.y < 1 || r.y > r.hash.buckets) throw DataError(where + ": bucket outside [1, g]");
  if (r.hash.prime == 0 || r.hash.a == 0 || r.hash.a >= r.hash.prime || r.hash.b >= r.hash.prime) {
    throw DataError(where + ": invalid hash descriptor");
  }
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace detail

inline void write_rr_csv(std::ostream& os, std::span<const RrRecord> records) {
  os << "user_idx,y\n";
  for (const auto& r : records) os << r.user << ',' << r.y << '\n';
}

inline void write_glh_csv(std::ostream& os, std::span<const GlhRecord> records) {
  os << "user_idx,a,b,P,g,y\n";
  for (const auto& r : records) {
    os << r.user << ',' << r.hash.a << ',' << r.hash.b << ',' << r.hash.prime << ',' << r.hash.buckets << ',' << r.y
       << '\n';
  }
}

/// Reads RR records; symbols must lie in [0, alphabet_size).
inline std::vector<RrRecord> read_rr_csv(std::istream& is, std::size_t alphabet_size) {
  std::vector<RrRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("user_idx", 0) == 0) continue;
    auto f = detail::split_csv(line);
    if (f.size() != 2) throw DataError("line " + std::to_string(line_no) + ": expected 2 fields (user_idx,y)");
    RrRecord r{detail::parse_u64(f[0], line_no), static_cast<Symbol>(detail::parse_u64(f[1], line_no))};
    if (r.y >= alphabet_size) throw DataError("line " + std::to_string(line_no) + ": symbol out of range");
    out.push_back(r);
  }
  return out;
}

inline std::vector<GlhRecord> read_glh_csv(std::istream& is) {
  std::vector<GlhRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("user_idx", 0) == 0) continue;
    auto f = detail::split_csv(line);
    if (f.size() != 6) throw DataError("line " + std::to_string(line_no) + ": expected 6 fields (user_idx,a,b,P,g,y)");
    GlhRecord r;
    r.user = detail::parse_u64(f[0], line_no);
    r.hash.a = detail::parse_u64(f[1], line_no);
    r.hash.b = detail::parse_u64(f[2], line_no);
    r.hash.prime = detail::parse_u64(f[3], line_no);
    r.hash.buckets = static_cast<std::uint32_t>(detail::parse_u64(f[4], line_no));
    r.y = static_cast<std::uint32_t>(detail::parse_u64(f[5], line_no));
    detail::check_glh(r, "line " + std::to_string(line_no));
    out.push_back(r);
  }
  return out;
}

namespace detail {

inline void write_batch_header(std::ostream& os, RecordKind kind, std::uint64_t count) {
  os.write(kBatchMagic.data(), kBatchMagic.size());
  put_le<std::uint16_t>(os, kBatchVersion);
  put_le<std::uint16_t>(os, static_cast<std::uint16_t>(kind));
  put_le<std::uint64_t>(os, count);
}

inline std::uint64_t read_batch_header(std::istream& is, RecordKind expected) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kBatchMagic) throw DataError("binary records: bad magic");
  if (get_le<std::uint16_t>(is) != kBatchVersion) throw DataError("binary records: unsupported version");
  if (get_le<std::uint16_t>(is) != static_cast<std::uint16_t>(expected)) {
    throw DataError("binary records: unexpected record kind");
  }
  return get_le<std::uint64_t>(is);
}

}  // namespace detail

inline void write_rr_binary(std::ostream& os, std::span<const RrRecord> records) {
  detail::write_batch_header(os, RecordKind::kRr, records.size());
  for (const auto& r : records) {
    detail::put_le<std::uint64_t>(os, r.user);
    detail::put_le<std::uint32_t>(os, r.y);
  }
}

inline void write_glh_binary(std::ostream& os, std::span<const GlhRecord> records) {
  detail::write_batch_header(os, RecordKind::kGlh, records.size());
  for (const auto& r : records) {
    detail::put_le<std::uint64_t>(os, r.user);
    detail::put_le<std::uint64_t>(os, r.hash.a);
    detail::put_le<std::uint64_t>(os, r.hash.b);
    detail::put_le<std::uint64_t>(os, r.hash.prime);
    detail::put_le<std::uint32_t>(os, r.hash.buckets);
    detail::put_le<std::uint32_t>(os, r.y);
  }
}

inline std::vector<RrRecord> read_rr_binary(std::istream& is) {
  const auto n = detail::read_batch_header(is, RecordKind::kRr);
  std::vector<RrRecord> out;
  out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 24)));
  for (std::uint64_t i = 0; i < n; ++i) {
    RrRecord r;
    r.user = detail::get_le<std::uint64_t>(is);
    r.y = detail::get_le<std::uint32_t>(is);
    out.push_back(r);
  }
  return out;
}

inline std::vector<GlhRecord> read_glh_binary(std::istream& is) {
  const auto n = detail::read_batch_header(is, RecordKind::kGlh);
  std::vector<GlhRecord> out;
  out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 24)));
  for (std::uint64_t i = 0; i < n; ++i) {
    GlhRecord r;
    r.user = detail::get_le<std::uint64_t>(is);
    r.hash.a = detail::get_le<std::uint64_t>(is);
    r.hash.b = detail::get_le<std::uint64_t>(is);
    r.hash.prime = detail::get_le<std::uint64_t>(is);
    r.hash.buckets = detail::get_le<std::uint32_t>(is);
    r.y = detail::get_le<std::uint32_t>(is);
    detail::check_glh(r, "record " + std::to_string(i));
    out.push_back(r);
  }
  return out;
}

}  // namespace pierisk
