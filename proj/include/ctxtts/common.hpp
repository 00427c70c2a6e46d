// Copyright (c) 2026 The ctxtts Authors
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

#ifndef CTXTTS_COMMON_HPP_
#define CTXTTS_COMMON_HPP_

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctxtts {

// Error taxonomy. Invalid inputs and config mismatches raise InvalidInput,
// non-finite numerics raise NumericError, metrics with an empty support
// raise UndefinedMetric, file problems raise IoError.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidInput : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct UndefinedMetric : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

// Deterministic 64-bit RNG (splitmix64 core). All randomness in the project
// flows through this type so that runs are reproducible bit-for-bit across
// platforms; std:: distributions are never used.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return next_u64() % n; }

  int range(int lo, int hi) {  // inclusive ends
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // Standard normal via Box-Muller (one draw per call, second discarded).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  uint64_t state_;
};

// FNV-1a, used to derive per-name parameter seeds and per-token embeddings.
inline uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t mix_seed(uint64_t seed, const std::string& name) {
  Rng r(seed ^ fnv1a(name));
  return r.next_u64();
}

// Splits UTF-8 text into codepoint strings. Context windows are counted in
// codepoints so that multi-byte scripts are handled the same as ASCII.
std::vector<std::string> utf8_codepoints(const std::string& text);

// Number of codepoints in a UTF-8 string.
size_t utf8_length(const std::string& text);

}  // namespace ctxtts

#endif  // CTXTTS_COMMON_HPP_
