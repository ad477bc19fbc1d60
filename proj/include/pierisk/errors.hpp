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

#pragma once

#include <stdexcept>
#include <string>

namespace pierisk {

/// Malformed or inconsistent input data (files, records, traces).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// KL divergence is infinite because p puts mass outside the support of q.
class InfiniteDivergence : public std::domain_error {
 public:
  InfiniteDivergence() : std::domain_error("kl_divergence: support(p) is not contained in support(q)") {}
};

/// An exact enumeration would exceed its documented size cap.
class SizeCapExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace pierisk
