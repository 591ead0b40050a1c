// Copyright 2026 The fedcrypt Authors
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

#ifndef FEDCRYPT_RANDOM_H_
#define FEDCRYPT_RANDOM_H_

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace fedcrypt {

// Purpose tags used when deriving per-client, per-round streams. Distinct
// tags give statistically independent streams for the same (client, round).
enum class StreamPurpose : uint64_t {
  kSelection = 1,
  kInit = 2,
  kLocalSgd = 3,
  kNoise = 4,
  kQuantize = 5,
  kEncrypt = 6,
  kKeygen = 7,
  kData = 8,
};

// SplitMix64 finaliser. Used for seed derivation only.
constexpr uint64_t MixBits(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// A seeded, single-owner stream of 64-bit uniform integers. Satisfies
// UniformRandomBitGenerator so it can drive std::shuffle and friends.
class RandomStream {
 public:
  using result_type = uint64_t;

  explicit RandomStream(uint64_t seed) : engine_(MixBits(seed)) {}

  // Derives an independent stream from a master seed and a path such as
  // {purpose, round, client}. Same inputs always give the same stream.
  static RandomStream Derive(uint64_t master_seed,
                             std::initializer_list<uint64_t> path) {
    uint64_t h = MixBits(master_seed);
    for (uint64_t p : path) h = MixBits(h ^ MixBits(p + 0x632be59bd9b4e019ULL));
    return RandomStream(h);
  }
  static RandomStream Derive(uint64_t master_seed, StreamPurpose purpose,
                             uint64_t round, uint64_t client) {
    return Derive(master_seed,
                  {static_cast<uint64_t>(purpose), round, client});
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<uint64_t>::max();
  }
  result_type operator()() { return engine_(); }

  uint64_t NextU64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double NextDouble() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on [2^-64, 1]: the smallest value is exactly 2^-64, so
  // -log of it is bounded by 64 ln 2.
  double NextPositiveDouble() {
    return (static_cast<double>(engine_()) + 1.0) * 0x1.0p-64;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fedcrypt

#endif  // FEDCRYPT_RANDOM_H_
