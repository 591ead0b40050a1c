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

// Poisson stochastic quantisation.
//
// Q_{s,mu}(x) = s*Y + mu with Y ~ Poisson((x - mu) / s), defined for x > mu
// and mu on the grid sZ. It is unbiased, and a sum of m quantised values has
// the law of Q_{s,m*mu} applied to the sum, so quantising before aggregation
// is a post-processing of the aggregate. Clients transmit Y only (offsetless,
// nonnegative) reduced modulo N = 2^b; mu comes back after aggregation.

#ifndef FEDCRYPT_QUANTIZER_H_
#define FEDCRYPT_QUANTIZER_H_

#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedcrypt/random.h"

namespace fedcrypt {

inline constexpr double kDefaultQuantScale = 1e-4;
inline constexpr int kDefaultPlaintextBits = 26;

struct QuantConfig {
  double scale = kDefaultQuantScale;
  // mu = offset_steps * scale, so the offset is on the grid by construction.
  int64_t offset_steps = 0;
  int bits = kDefaultPlaintextBits;

  double offset() const { return static_cast<double>(offset_steps) * scale; }
  uint64_t modulus() const { return uint64_t{1} << bits; }
  absl::Status Validate() const;
};

// Poisson(lambda). Inversion by sequential search below lambda = 30,
// transformed rejection with squeeze (PTRS) above.
absl::StatusOr<uint64_t> PoissonSample(RandomStream& rng, double lambda);

// Offsetless count Y of Q_{s,mu}(x). Requires x > mu.
absl::StatusOr<uint64_t> PoissonQuantize(double x, const QuantConfig& cfg,
                                         RandomStream& rng);

// Componentwise quantisation followed by reduction mod N.
absl::StatusOr<std::vector<uint64_t>> PoissonQuantizeVector(
    std::span<const double> x, const QuantConfig& cfg, RandomStream& rng);

// Number of grid steps in the offset: ceil((S + B * sigma_ind) / s), so that
// mu = -s * steps lies at or below every clipped-and-noised coordinate.
int64_t OffsetSteps(double clip_s, double sigma_individual, double bound_b,
                    double scale);
// mu itself.
double OffsetGrid(double clip_s, double sigma_individual, double bound_b,
                  double scale);

// Nonnegative remainder mod N, componentwise.
std::vector<uint64_t> ModReduce(std::span<const int64_t> values,
                                uint64_t modulus);
std::vector<uint64_t> ModReduce(std::span<const uint64_t> values,
                                uint64_t modulus);

// (s * count) / K + mu per coordinate: the average of the K quantised
// contributions.
std::vector<double> DequantizeAggregate(std::span<const uint64_t> sum_counts,
                                        const QuantConfig& cfg,
                                        int participants);

// Chebyshev bound on P(sum_k Y_k >= N) for a coordinate whose pre-noise
// value is x_max at every client:
//   E = K (x_max - mu) / s,  Var = E + (sigma_total / s)^2,
//   bound = Var / (N - E)^2, or 1 when E >= N.
// sigma_total = 0 drops the Gaussian term and leaves the Poisson variance
// alone.
double WrapProbabilityBound(double x_max, const QuantConfig& cfg,
                            int participants, double sigma_total = 0.0);

}  // namespace fedcrypt

#endif  // FEDCRYPT_QUANTIZER_H_
