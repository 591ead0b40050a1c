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

// Bounded Gaussian sampling for distributed noise generation.
//
// Every sampler here draws from a 64-bit integer source, so its output range
// is finite and known in closed form. SamplerBound() returns that range in
// standard-deviation units; the quantiser relies on it to place its offset
// below every noised coordinate.

#ifndef FEDCRYPT_SAMPLING_H_
#define FEDCRYPT_SAMPLING_H_

#include <optional>
#include <string_view>

#include "absl/status/statusor.h"
#include "fedcrypt/random.h"

namespace fedcrypt {

enum class GaussianAlgorithm {
  kBoxMullerCartesian,
  kBoxMullerPolar,
  kZiggurat,
};

std::string_view GaussianAlgorithmName(GaussianAlgorithm algorithm);
absl::StatusOr<GaussianAlgorithm> ParseGaussianAlgorithm(std::string_view name);

// Tail abscissa quoted for the 255-rectangle ziggurat, used for the declared
// bound. The sampler's own tables use kZigguratR.
inline constexpr double kZigguratTailRounded = 3.65;
// Exact right edge of the 255-rectangle (256-layer) ziggurat.
inline constexpr double kZigguratR = 3.6541528853610088;
inline constexpr int kDefaultSourceBits = 64;

struct SamplerBoundSpec {
  GaussianAlgorithm algorithm = GaussianAlgorithm::kZiggurat;
  int n_bits = kDefaultSourceBits;
  // Required iff algorithm == kZiggurat.
  std::optional<double> x_tail;
};

// Largest |z| a standard-normal sampler can emit when its uniform source has
// n_bits of resolution:
//   cartesian: sqrt(-2 ln 2^-n)
//   polar:     sqrt(-2 ln 2^(-2n+1))
//   ziggurat:  -ln(2^-n) / x_tail + x_tail
absl::StatusOr<double> SamplerBound(const SamplerBoundSpec& spec);

// Declared bound (std units) of the default sampler configuration for the
// given algorithm at 64 bits.
double DeclaredBound(GaussianAlgorithm algorithm);

// Draws N(mean, std^2). |sample - mean| <= DeclaredBound(algorithm) * std by
// construction; there is no clamping or rejection on the bound.
class GaussianSampler {
 public:
  explicit GaussianSampler(
      GaussianAlgorithm algorithm = GaussianAlgorithm::kZiggurat)
      : algorithm_(algorithm) {}

  double Sample(RandomStream& rng, double mean, double std) const {
    return mean + std * StandardNormal(rng);
  }
  double StandardNormal(RandomStream& rng) const;

  GaussianAlgorithm algorithm() const { return algorithm_; }
  double declared_bound() const { return DeclaredBound(algorithm_); }

 private:
  GaussianAlgorithm algorithm_;
};

// Noise calibration for K participants whose noises sum to std sigma_total.
struct NoiseSpec {
  double sigma_total = 0.0;
  int participants = 1;
  double sigma_individual = 0.0;
  double bound_std_units = 0.0;
};

// sigma / sqrt(K). Requires K >= 1.
double PerParticipantStd(double sigma_total, int participants);

absl::StatusOr<NoiseSpec> MakeNoiseSpec(
    double sigma_total, int participants,
    GaussianAlgorithm algorithm = GaussianAlgorithm::kZiggurat);

}  // namespace fedcrypt

#endif  // FEDCRYPT_SAMPLING_H_
