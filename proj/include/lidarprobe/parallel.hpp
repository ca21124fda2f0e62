// Copyright 2026 The lidarprobe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LIDARPROBE_PARALLEL_HPP
#define LIDARPROBE_PARALLEL_HPP

#include <cstdint>

namespace lidarprobe {

// Caps the number of worker threads used by parallel loops. Values < 1 select
// the runtime default. Every parallel loop in the library writes results into
// per-index slots and reduces in index order, so the thread count never
// changes results.
void set_thread_count(int threads);
int thread_count();

/// Counter-based random stream: every draw is a pure function of
/// (seed, stream_a, stream_b, counter).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream_a, std::uint64_t stream_b = 0)
      : key_(mix(mix(seed ^ 0x9e3779b97f4a7c15ULL) ^ mix(stream_a + 0x632be59bd9b4e019ULL) ^
                 mix(stream_b + 0x85157af5ULL))) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() { return mix(key_ ^ mix(counter_++)); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

  double normal();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace lidarprobe

#endif  // LIDARPROBE_PARALLEL_HPP
