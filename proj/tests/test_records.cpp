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


#include <gtest/gtest.h>

#include <sstream>

#include "pierisk/estimation.hpp"
#include "pierisk/records.hpp"

namespace pierisk {
namespace {

std::vector<GlhRecord> sample_glh_records() {
  const GeneralLocalHash glh(Epsilon::finite(1.0), HashFamily::carter_wegman(50, 8));
  Rng rng(12);
  std::vector<GlhRecord> out;
  for (std::uint64_t u = 0; u < 40; ++u) {
    const auto o = glh.sample(static_cast<Symbol>(u % 50), rng);
    out.push_back({u, o.hash, o.bucket});
  }
  return out;
}

TEST(RecordCsv, RrRoundTrip) {
  const std::vector<RrRecord> recs{{0, 3}, {1, 0}, {7, 9}};
  std::stringstream ss;
  write_rr_csv(ss, recs);
  EXPECT_EQ(ss.str(), "user_idx,y\n0,3\n1,0\n7,9\n");
  EXPECT_EQ(read_rr_csv(ss, 10), recs);
}

TEST(RecordCsv, GlhRoundTripIsSelfDescribing) {
  const auto recs = sample_glh_records();
  std::stringstream ss;
  write_glh_csv(ss, recs);
  const auto back = read_glh_csv(ss);
  EXPECT_EQ(back, recs);
  // The estimator can recompute every h(x) from the stored tuple alone.
  for (const auto& r : back) {
    EXPECT_EQ(HashFamily::carter_wegman_eval(r.hash, 5), HashFamily::carter_wegman_eval(recs[r.user].hash, 5));
  }
}

TEST(RecordCsv, MalformedRowsReportLine) {
  std::istringstream bad_count("user_idx,y\n0,1\n1\n");
  try {
    read_rr_csv(bad_count, 4);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  std::istringstream out_of_range("0,4\n");
  EXPECT_THROW(read_rr_csv(out_of_range, 4), DataError);
  std::istringstream negative("0,-1\n");
  EXPECT_THROW(read_rr_csv(negative, 4), DataError);
  std::istringstream bucket("user_idx,a,b,P,g,y\n0,1,0,7,2,3\n");
  EXPECT_THROW(read_glh_csv(bucket), DataError);
  std::istringstream zero_a("0,0,0,7,2,1\n");
  EXPECT_THROW(read_glh_csv(zero_a), DataError);
}

TEST(RecordCsv, AcceptsCrLf) {
  std::istringstream ss("user_idx,y\r\n0,1\r\n");
  const auto recs = read_rr_csv(ss, 2);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].y, 1u);
}

TEST(RecordBinary, HeaderLayout) {
  std::ostringstream os;
  const std::vector<RrRecord> recs{{1, 2}};
  write_rr_binary(os, recs);
  const std::string b = os.str();
  ASSERT_EQ(b.size(), 4u + 2 + 2 + 8 + 8 + 4);
  EXPECT_EQ(b.substr(0, 4), "PIER");
  EXPECT_EQ(b[4], 1);  // version, little-endian
  EXPECT_EQ(b[5], 0);
  EXPECT_EQ(b[6], 1);  // RR kind
  EXPECT_EQ(b[8], 1);  // count
}

TEST(RecordBinary, RoundTripsBothKinds) {
  const std::vector<RrRecord> rr{{0, 5}, {1, 1}, {99, 0}};
  std::stringstream a;
  write_rr_binary(a, rr);
  EXPECT_EQ(read_rr_binary(a), rr);

  const auto glh = sample_glh_records();
  std::stringstream b;
  write_glh_binary(b, glh);
  EXPECT_EQ(read_glh_binary(b), glh);
}

TEST(RecordBinary, RejectsWrongKindTruncationAndBadMagic) {
  std::stringstream a;
  const std::vector<RrRecord> rr{{0, 5}, {1, 1}};
  write_rr_binary(a, rr);
  const std::string bytes = a.str();
  std::istringstream kind(bytes);
  EXPECT_THROW(read_glh_binary(kind), DataError);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_rr_binary(truncated), DataError);
  std::istringstream magic("XXXX" + bytes.substr(4));
  EXPECT_THROW(read_rr_binary(magic), DataError);
}

TEST(RecordBinary, GlhDescriptorIsValidated) {
  auto glh = sample_glh_records();
  glh[3].y = 0;
  std::stringstream b;
  write_glh_binary(b, glh);
  EXPECT_THROW(read_glh_binary(b), DataError);
}

TEST(RecordCsv, EstimatorConsumesReadBackRecords) {
  // Same estimate from in-memory and CSV round-tripped GLH records.
  const auto recs = sample_glh_records();
  std::stringstream ss;
  write_glh_csv(ss, recs);
  const auto back = read_glh_csv(ss);
  const auto a = estimate_glh(recs, Epsilon::finite(1.0), 8, 50);
  const auto b = estimate_glh(back, Epsilon::finite(1.0), 8, 50);
  EXPECT_EQ(a.estimate, b.estimate);
}

}  // namespace
}  // namespace pierisk
