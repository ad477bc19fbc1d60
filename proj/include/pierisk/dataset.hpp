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

// Per-user symbol traces: check-in CSV ingestion, train/eval splitting.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <span>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pierisk/errors.hpp"
#include "pierisk/probcore.hpp"
#include "pierisk/records.hpp"
#include "pierisk/reid.hpp"

namespace pierisk {

struct TraceDataset {
  Alphabet alphabet{1};
  std::vector<Trace> traces;             // index = dense user id
  std::vector<std::string> user_labels;  // original ids, may be empty
  std::string provenance;

  std::size_t users() const { return traces.size(); }

  /// Throws DataError unless every trace is non-empty and in the alphabet.
  void validate() const {
    if (!user_labels.empty() && user_labels.size() != traces.size()) {
      throw DataError("TraceDataset: user label table size mismatch");
    }
    for (std::size_t u = 0; u < traces.size(); ++u) {
      if (traces[u].empty()) throw DataError("TraceDataset: empty trace for user " + std::to_string(u));
      for (Symbol s : traces[u]) {
        if (!alphabet.contains(s)) throw DataError("TraceDataset: symbol out of alphabet for user " + std::to_string(u));
      }
    }
  }
};

struct IngestOptions {
  std::size_t min_events = 10;
  std::size_t error_budget = 0;  // malformed rows tolerated before aborting
};

struct IngestStats {
  std::size_t rows = 0;
  std::size_t malformed = 0;
  std::size_t users_seen = 0;
  std::size_t users_dropped = 0;
  std::size_t events_dropped = 0;
  std::vector<std::string> errors;  // one message per malformed row
};

struct IngestResult {
  TraceDataset dataset;
  IngestStats stats;
};

namespace detail {

struct CheckinRow {
  std::string timestamp;
  std::string poi;
  double numeric_time;
};

inline bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

}  // namespace detail

/// Reads `user_id,timestamp,poi_id` rows.
///
/// Per-user events are ordered by timestamp (numeric when every timestamp
/// parses as a number, otherwise lexicographic); equal timestamps keep
/// input order. Users are numbered by first appearance, POIs likewise
/// among retained users.
inline IngestResult ingest_checkins(std::istream& is, const IngestOptions& opt = {}, std::string provenance = "stream") {
  IngestResult res;
  auto& st = res.stats;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line)) throw DataError("ingest_checkins: empty input");
  ++line_no;
  if (detail::strip_cr(line) != "user_id,timestamp,poi_id") {
    throw DataError("ingest_checkins: line 1: expected header user_id,timestamp,poi_id");
  }
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<detail::CheckinRow>> per_user;
  bool all_numeric = true;
  while (std::getline(is, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    ++st.rows;
    const auto f = detail::split_csv(line);
    if (f.size() != 3 || f[0].empty() || f[1].empty() || f[2].empty()) {
      ++st.malformed;
      st.errors.push_back("line " + std::to_string(line_no) + ": expected 3 non-empty fields");
      if (st.malformed > opt.error_budget) throw DataError("ingest_checkins: " + st.errors.back());
      continue;
    }
    double t = 0.0;
    if (!detail::parse_number(f[1], t)) all_numeric = false;
    auto [it, inserted] = per_user.try_emplace(f[0]);
    if (inserted) order.push_back(f[0]);
    it->second.push_back({f[1], f[2], t});
  }
  st.users_seen = order.size();

  std::unordered_map<std::string, Symbol> poi_ids;
  std::vector<std::string> poi_labels;
  for (const auto& user : order) {
    auto& rows = per_user[user];
    if (rows.size() < opt.min_events) {
      ++st.users_dropped;
      st.events_dropped += rows.size();
      continue;
    }
    std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
      return all_numeric ? a.numeric_time < b.numeric_time : a.timestamp < b.timestamp;
    });
    Trace trace;
    trace.reserve(rows.size());
    for (const auto& r : rows) {
      auto [it, inserted] = poi_ids.try_emplace(r.poi, static_cast<Symbol>(poi_labels.size()));
      if (inserted) poi_labels.push_back(r.poi);
      trace.push_back(it->second);
    }
    res.dataset.traces.push_back(std::move(trace));
    res.dataset.user_labels.push_back(user);
  }
  if (poi_labels.empty()) throw DataError("ingest_checkins: no user meets the minimum of " + std::to_string(opt.min_events) + " events");
  res.dataset.alphabet = Alphabet::with_labels(std::move(poi_labels));
  res.dataset.provenance = std::move(provenance);
  return res;
}

inline IngestResult ingest_checkins(const std::string& path, const IngestOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("ingest_checkins: cannot open " + path);
  return ingest_checkins(in, opt, "file:" + path);
}

/// Writes the dataset back in check-in form; timestamps are event positions.
inline void write_checkins(std::ostream& os, const TraceDataset& d) {
  os << "user_id,timestamp,poi_id\n";
  for (std::size_t u = 0; u < d.users(); ++u) {
    const std::string user = d.user_labels.empty() ? std::to_string(u) : d.user_labels[u];
    for (std::size_t t = 0; t < d.traces[u].size(); ++t) {
      const Symbol s = d.traces[u][t];
      os << user << ',' << t << ',' << (d.alphabet.has_labels() ? d.alphabet.label(s) : std::to_string(s)) << '\n';
    }
  }
}

struct TraceSplit {
  TraceDataset train;
  TraceDataset eval;
};

/// First ceil(L/2) events train, the rest evaluate. With `overlap` the eval
/// side keeps the full trace, so the training half is contained in it.
inline TraceSplit split_traces(const TraceDataset& d, bool overlap = false) {
  TraceSplit out{d, d};
  for (std::size_t u = 0; u < d.users(); ++u) {
    const Trace& t = d.traces[u];
    if (t.size() < 2) {
      throw DataError("split_traces: user " + (d.user_labels.empty() ? std::to_string(u) : d.user_labels[u]) +
                      " has a trace of length " + std::to_string(t.size()));
    }
    const std::size_t half = (t.size() + 1) / 2;
    out.train.traces[u].assign(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(half));
    if (!overlap) out.eval.traces[u].assign(t.begin() + static_cast<std::ptrdiff_t>(half), t.end());
  }
  out.train.provenance = d.provenance + "#train";
  out.eval.provenance = d.provenance + (overlap ? "#eval-overlap" : "#eval");
  return out;
}

/// Empirical frequency of the given per-user data (one datum or a trace).
inline std::vector<double> empirical_marginal(std::span<const Trace> data, std::size_t alphabet_size) {
  std::vector<double> p(alphabet_size, 0.0);
  std::size_t total = 0;
  for (const auto& t : data) {
    for (Symbol s : t) p.at(s) += 1.0;
    total += t.size();
  }
  if (total == 0) throw DataError("empirical_marginal: no events");
  for (double& v : p) v /= static_cast<double>(total);
  return p;
}

}  // namespace pierisk
