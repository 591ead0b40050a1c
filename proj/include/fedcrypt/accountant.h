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

// Moments accountant for the subsampled Gaussian mechanism with user-level
// adjacency.
//
// With aggregated noise std sigma, clipping bound S and participation ratio
// q, the two adjacent output densities are
//
//   f1(x) = N(x; 0, sigma^2)
//   f2(x) = (1 - q) N(x; 0, sigma^2) + q N(x; 2S, sigma^2)
//
// (the 2S offset is the full span of a coordinate clipped to [-S, S]). The
// per-round log-moment of order l is
//
//   alpha(l) = log max( E_f2[(f1/f2)^l], E_f2[(f2/f1)^l] ),
//
// evaluated by adaptive Gauss-Kronrod quadrature in the log domain. Rounds
// compose additively and (epsilon, delta) follow from the tail bound
// delta = min_l exp(alpha(l) - l * epsilon).

#ifndef FEDCRYPT_ACCOUNTANT_H_
#define FEDCRYPT_ACCOUNTANT_H_

#include <map>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace fedcrypt {

inline constexpr int kDefaultMaxMomentOrder = 20;

std::vector<int> DefaultMomentOrders();

struct PrivacyParams {
  double sigma = 6.0;
  double clip_s = 1.0;
  double q = 0.0;
  int rounds = 1;
  double delta = 1e-5;
  std::vector<int> moment_orders = DefaultMomentOrders();

  absl::Status Validate() const;
};

struct MomentProfile {
  std::map<int, double> per_order;
  int rounds_composed = 0;
};

// alpha(l) for one round. Exactly 0 when q == 0. Returns an internal error if
// the quadrature fails to reach its tolerance.
absl::StatusOr<double> LogMoment(int order, const PrivacyParams& params);

// alpha(l) for every configured order, one round. The parallel variant
// distributes orders across OpenMP threads and returns the same values.
absl::StatusOr<MomentProfile> PerRoundProfile(const PrivacyParams& params);
absl::StatusOr<MomentProfile> PerRoundProfileParallel(
    const PrivacyParams& params);

// Multiplies a single-round profile by T.
absl::StatusOr<MomentProfile> Compose(const MomentProfile& per_round,
                                      int rounds);

// Per-order sum of two composed profiles over the same orders.
absl::StatusOr<MomentProfile> Combine(const MomentProfile& a,
                                      const MomentProfile& b);

// min over l of (alpha(l) + ln(1/delta)) / l.
double EpsilonForDelta(const MomentProfile& profile, double delta);

// min over l of exp(alpha(l) - l * epsilon), clamped to (0, 1].
double DeltaForEpsilon(const MomentProfile& profile, double epsilon);

// Convenience: per-round profile composed over params.rounds, then
// converted at params.delta.
absl::StatusOr<double> EpsilonFor(const PrivacyParams& params);

// sigma * (sqrt(K) - 1) / sqrt(K): a participant knows its own noise share.
absl::StatusOr<double> ParticipantViewSigma(double sigma, int participants);

// (1 - chi) * sigma for a colluding fraction chi of participants.
absl::StatusOr<double> CollusionAdjustedSigma(double sigma, double chi);

}  // namespace fedcrypt

#endif  // FEDCRYPT_ACCOUNTANT_H_
