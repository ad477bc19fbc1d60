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

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pierisk {

inline unsigned default_thread_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs fn(shard, begin, end) over `shards` contiguous slices of [0, count).
///
/// The slicing depends only on (count, shards), not on the thread count, so
/// callers that reduce per-shard results in shard order get identical output
/// for any degree of parallelism.
template <typename Fn>
void parallel_shards(std::size_t count, std::size_t shards, unsigned threads, Fn&& fn) {
  shards = std::max<std::size_t>(1, std::min(shards, std::max<std::size_t>(count, 1)));
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(shards)));
  auto bounds = [&](std::size_t s) {
    return std::pair{count * s / shards, count * (s + 1) / shards};
  };
  if (threads == 1) {
    for (std::size_t s = 0; s < shards; ++s) {
      auto [b, e] = bounds(s);
      fn(s, b, e);
    }
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t s = t; s < shards; s += threads) {
        try {
          auto [b, e] = bounds(s);
          fn(s, b, e);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

/// Runs fn(i) for every i in [0, count). fn must only write to slot i.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  parallel_shards(count, std::max<std::size_t>(1, threads) * 4, threads,
                  [&](std::size_t, std::size_t b, std::size_t e) {
                    for (std::size_t i = b; i < e; ++i) fn(i);
                  });
}

}  // namespace pierisk
