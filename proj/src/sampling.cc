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

#include "fedcrypt/sampling.h"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace fedcrypt {
namespace {

// Marsaglia-Tsang ziggurat with 256 layers: layer 0 is the base strip plus
// tail, layers 1..255 are the rectangles. Abscissae are scaled by 2^52 so a
// 52-bit integer indexes into each layer.
constexpr int kLayers = 256;
constexpr double kZigguratArea = 0.00492867323399;

struct ZigguratTables {
  std::array<uint64_t, kLayers> k{};
  std::array<double, kLayers> w{};
  std::array<double, kLayers> f{};
};

ZigguratTables BuildTables() {
  ZigguratTables t;
  const double m = 0x1.0p52;
  double dn = kZigguratR;
  double tn = dn;
  const double q = kZigguratArea / std::exp(-0.5 * dn * dn);
  t.k[0] = static_cast<uint64_t>((dn / q) * m);
  t.k[1] = 0;
  t.w[0] = q / m;
  t.w[kLayers - 1] = dn / m;
  t.f[0] = 1.0;
  t.f[kLayers - 1] = std::exp(-0.5 * dn * dn);
  for (int i = kLayers - 2; i >= 1; --i) {
    dn = std::sqrt(-2.0 * std::log(kZigguratArea / dn +
                                   std::exp(-0.5 * dn * dn)));
    t.k[i + 1] = static_cast<uint64_t>((dn / tn) * m);
    tn = dn;
    t.f[i] = std::exp(-0.5 * dn * dn);
    t.w[i] = dn / m;
  }
  return t;
}

const ZigguratTables& Tables() {
  static const ZigguratTables tables = BuildTables();
  return tables;
}

double Ziggurat(RandomStream& rng) {
  const ZigguratTables& t = Tables();
  for (;;) {
    uint64_t r = rng.NextU64();
    const int idx = static_cast<int>(r & 0xff);
    r >>= 8;
    const bool negative = r & 0x1;
    const uint64_t rabs = (r >> 1) & 0x000fffffffffffffULL;
    double x = static_cast<double>(rabs) * t.w[idx];
    if (negative) x = -x;
    if (rabs < t.k[idx]) return x;
    if (idx == 0) {
      // Tail beyond kZigguratR. NextPositiveDouble() >= 2^-64 caps xx at
      // 64 ln 2 / r.
      for (;;) {
        const double xx = -std::log(rng.NextPositiveDouble()) / kZigguratR;
        const double yy = -std::log(rng.NextPositiveDouble());
        if (yy + yy > xx * xx) {
          return ((rabs >> 8) & 0x1) ? -(kZigguratR + xx) : kZigguratR + xx;
        }
      }
    }
    if ((t.f[idx - 1] - t.f[idx]) * rng.NextDouble() + t.f[idx] <
        std::exp(-0.5 * x * x)) {
      return x;
    }
  }
}

double BoxMullerCartesian(RandomStream& rng) {
  const double u1 = rng.NextPositiveDouble();
  const double u2 = rng.NextDouble();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double BoxMullerPolar(RandomStream& rng) {
  for (;;) {
    // Signed 64-bit integers mapped to [-1, 1) on a 2^-63 grid.
    const double u =
        static_cast<double>(static_cast<int64_t>(rng.NextU64())) * 0x1.0p-63;
    const double v =
        static_cast<double>(static_cast<int64_t>(rng.NextU64())) * 0x1.0p-63;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

}  // namespace

std::string_view GaussianAlgorithmName(GaussianAlgorithm algorithm) {
  switch (algorithm) {
    case GaussianAlgorithm::kBoxMullerCartesian:
      return "box_muller_cartesian";
    case GaussianAlgorithm::kBoxMullerPolar:
      return "box_muller_polar";
    case GaussianAlgorithm::kZiggurat:
      return "ziggurat";
  }
  return "unknown";
}

absl::StatusOr<GaussianAlgorithm> ParseGaussianAlgorithm(
    std::string_view name) {
  for (auto a : {GaussianAlgorithm::kBoxMullerCartesian,
                 GaussianAlgorithm::kBoxMullerPolar,
                 GaussianAlgorithm::kZiggurat}) {
    if (GaussianAlgorithmName(a) == name) return a;
  }
  return absl::InvalidArgumentError(
      absl::StrCat("unknown sampler '", std::string(name),
                   "' (expected box_muller_cartesian, box_muller_polar or "
                   "ziggurat)"));
}

absl::StatusOr<double> SamplerBound(const SamplerBoundSpec& spec) {
  if (spec.n_bits < 8) {
    return absl::InvalidArgumentError(
        absl::StrCat("n_bits must be >= 8, got ", spec.n_bits));
  }
  const bool is_ziggurat = spec.algorithm == GaussianAlgorithm::kZiggurat;
  if (is_ziggurat != spec.x_tail.has_value()) {
    return absl::InvalidArgumentError(
        is_ziggurat ? "ziggurat bound requires x_tail"
                    : "x_tail only applies to the ziggurat sampler");
  }
  // -ln(2^-n) = n ln 2
  const double neg_log_min = spec.n_bits * std::numbers::ln2;
  switch (spec.algorithm) {
    case GaussianAlgorithm::kBoxMullerCartesian:
      return std::sqrt(2.0 * neg_log_min);
    case GaussianAlgorithm::kBoxMullerPolar:
      return std::sqrt(2.0 * (2 * spec.n_bits - 1) * std::numbers::ln2);
    case GaussianAlgorithm::kZiggurat: {
      const double x_tail = *spec.x_tail;
      if (!(x_tail > 0.0)) {
        return absl::InvalidArgumentError("x_tail must be positive");
      }
      return neg_log_min / x_tail + x_tail;
    }
  }
  return absl::InvalidArgumentError("unknown algorithm");
}

double DeclaredBound(GaussianAlgorithm algorithm) {
  SamplerBoundSpec spec{algorithm, kDefaultSourceBits, std::nullopt};
  if (algorithm == GaussianAlgorithm::kZiggurat) {
    spec.x_tail = kZigguratTailRounded;
  }
  return *SamplerBound(spec);
}

double GaussianSampler::StandardNormal(RandomStream& rng) const {
  switch (algorithm_) {
    case GaussianAlgorithm::kBoxMullerCartesian:
      return BoxMullerCartesian(rng);
    case GaussianAlgorithm::kBoxMullerPolar:
      return BoxMullerPolar(rng);
    case GaussianAlgorithm::kZiggurat:
      return Ziggurat(rng);
  }
  return 0.0;
}

double PerParticipantStd(double sigma_total, int participants) {
  return sigma_total / std::sqrt(static_cast<double>(participants));
}

absl::StatusOr<NoiseSpec> MakeNoiseSpec(double sigma_total, int participants,
                                        GaussianAlgorithm algorithm) {
  if (!(sigma_total > 0.0)) {
    return absl::InvalidArgumentError("sigma_total must be positive");
  }
  if (participants < 1) {
    return absl::InvalidArgumentError("participants must be >= 1");
  }
  return NoiseSpec{sigma_total, participants,
                   PerParticipantStd(sigma_total, participants),
                   DeclaredBound(algorithm)};
}

}  // namespace fedcrypt
