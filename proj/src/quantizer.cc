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

#include "fedcrypt/quantizer.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "absl/strings/str_cat.h"

namespace fedcrypt {
namespace {

constexpr double kSearchThreshold = 30.0;

// log Gamma(x) by the Stirling series, shifted up to x >= 7. Reentrant,
// unlike std::lgamma on glibc which writes signgam.
double LogGamma(double x) {
  static constexpr double kCoeffs[10] = {
      8.333333333333333e-02, -2.777777777777778e-03, 7.936507936507937e-04,
      -5.952380952380952e-04, 8.417508417508418e-04, -1.917526917526918e-03,
      6.410256410256410e-03, -2.955065359477124e-02, 1.796443723688307e-01,
      -1.39243221690590e+00};
  if (x == 1.0 || x == 2.0) return 0.0;
  int shift = x < 7.0 ? static_cast<int>(7 - x) : 0;
  double x0 = x + shift;
  const double x2 = 1.0 / (x0 * x0);
  double series = kCoeffs[9];
  for (int k = 8; k >= 0; --k) series = series * x2 + kCoeffs[k];
  double lg = series / x0 + 0.5 * std::log(2.0 * std::numbers::pi) +
              (x0 - 0.5) * std::log(x0) - x0;
  for (int k = 1; k <= shift; ++k) {
    lg -= std::log(x0 - 1.0);
    x0 -= 1.0;
  }
  return lg;
}

uint64_t PoissonSearch(RandomStream& rng, double lambda) {
  // Restart guard: if rounding leaves the cdf short of u far in the tail.
  const double cap = lambda + 40.0 * std::sqrt(lambda) + 100.0;
  for (;;) {
    const double u = rng.NextDouble();
    double p = std::exp(-lambda);
    double cdf = p;
    uint64_t k = 0;
    while (u > cdf && k < cap) {
      ++k;
      p *= lambda / static_cast<double>(k);
      cdf += p;
    }
    if (u <= cdf) return k;
  }
}

// Hormann's PTRS.
uint64_t PoissonPtrs(RandomStream& rng, double lambda) {
  const double slam = std::sqrt(lambda);
  const double loglam = std::log(lambda);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.NextDouble() - 0.5;
    const double v = rng.NextDouble();
    const double us = 0.5 - std::abs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<uint64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -lambda + kf * loglam - LogGamma(kf + 1.0)) {
      return static_cast<uint64_t>(kf);
    }
  }
}

uint64_t FloorMod(int64_t v, uint64_t modulus) {
  const int64_t m = static_cast<int64_t>(modulus);
  int64_t r = v % m;
  if (r < 0) r += m;
  return static_cast<uint64_t>(r);
}

}  // namespace

absl::Status QuantConfig::Validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    return absl::InvalidArgumentError("quantisation scale must be positive");
  }
  if (bits < 1 || bits > 62) {
    return absl::InvalidArgumentError(
        absl::StrCat("plaintext bits must lie in [1, 62], got ", bits));
  }
  return absl::OkStatus();
}

absl::StatusOr<uint64_t> PoissonSample(RandomStream& rng, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    return absl::InvalidArgumentError(
        absl::StrCat("Poisson rate must be finite and >= 0, got ", lambda));
  }
  if (lambda == 0.0) return uint64_t{0};
  if (lambda < kSearchThreshold) return PoissonSearch(rng, lambda);
  return PoissonPtrs(rng, lambda);
}

absl::StatusOr<uint64_t> PoissonQuantize(double x, const QuantConfig& cfg,
                                         RandomStream& rng) {
  const double mu = cfg.offset();
  if (!(x > mu)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "Poisson quantisation needs x > offset (x=", x, ", offset=", mu, ")"));
  }
  return PoissonSample(rng, (x - mu) / cfg.scale);
}

absl::StatusOr<std::vector<uint64_t>> PoissonQuantizeVector(
    std::span<const double> x, const QuantConfig& cfg, RandomStream& rng) {
  std::vector<uint64_t> counts(x.size());
  const uint64_t mask = cfg.modulus() - 1;
  for (size_t i = 0; i < x.size(); ++i) {
    absl::StatusOr<uint64_t> y = PoissonQuantize(x[i], cfg, rng);
    if (!y.ok()) return y.status();
    counts[i] = *y & mask;
  }
  return counts;
}

int64_t OffsetSteps(double clip_s, double sigma_individual, double bound_b,
                    double scale) {
  return static_cast<int64_t>(
      std::ceil((clip_s + bound_b * sigma_individual) / scale));
}

double OffsetGrid(double clip_s, double sigma_individual, double bound_b,
                  double scale) {
  return -scale * static_cast<double>(
                      OffsetSteps(clip_s, sigma_individual, bound_b, scale));
}

std::vector<uint64_t> ModReduce(std::span<const int64_t> values,
                                uint64_t modulus) {
  std::vector<uint64_t> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    out[i] = FloorMod(values[i], modulus);
  }
  return out;
}

std::vector<uint64_t> ModReduce(std::span<const uint64_t> values,
                                uint64_t modulus) {
  std::vector<uint64_t> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) out[i] = values[i] % modulus;
  return out;
}

std::vector<double> DequantizeAggregate(std::span<const uint64_t> sum_counts,
                                        const QuantConfig& cfg,
                                        int participants) {
  std::vector<double> out(sum_counts.size());
  const double mu = cfg.offset();
  for (size_t i = 0; i < sum_counts.size(); ++i) {
    out[i] = cfg.scale * static_cast<double>(sum_counts[i]) / participants + mu;
  }
  return out;
}

double WrapProbabilityBound(double x_max, const QuantConfig& cfg,
                            int participants, double sigma_total) {
  const double n = static_cast<double>(cfg.modulus());
  const double mean = participants * (x_max - cfg.offset()) / cfg.scale;
  if (mean >= n) return 1.0;
  const double noise = sigma_total / cfg.scale;
  const double variance = mean + noise * noise;
  const double gap = n - mean;
  return std::min(1.0, variance / (gap * gap));
}

}  // namespace fedcrypt
