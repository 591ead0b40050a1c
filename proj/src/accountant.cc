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

#include "fedcrypt/accountant.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <vector>

#include "absl/strings/str_cat.h"

namespace fedcrypt {
namespace {

constexpr double kRelTolerance = 1e-9;
constexpr int kInitialPanels = 32;
constexpr int kMaxPanels = 8192;
constexpr int kShiftScanPoints = 4096;
constexpr double kTailWidthSigmas = 20.0;

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

// Log-domain integrand: exp(log_integrand(x) - shift).
class LogIntegrand {
 public:
  LogIntegrand(double sigma, double clip_s, double q, double exponent)
      : sigma_(sigma), clip_s_(clip_s), q_(q), exponent_(exponent) {
    log_norm_ = std::log(sigma * std::sqrt(2.0 * std::numbers::pi));
  }

  // log(f2(x) / f1(x)).
  double LogRatio(double x) const {
    const double z = 2.0 * clip_s_ * (x - clip_s_) / (sigma_ * sigma_);
    if (q_ >= 1.0) return z;
    if (z <= 0.0) return std::log1p(q_ * std::expm1(z));
    return z + std::log(q_ + (1.0 - q_) * std::exp(-z));
  }

  // exponent * log(f2/f1) + log f1, i.e. log of (f2/f1)^exponent * f1.
  double operator()(double x) const {
    const double log_f1 = -0.5 * x * x / (sigma_ * sigma_) - log_norm_;
    return exponent_ * LogRatio(x) + log_f1;
  }

 private:
  double sigma_;
  double clip_s_;
  double q_;
  double exponent_;
  double log_norm_;
};

Panel Kronrod(const LogIntegrand& g, double shift, double a, double b) {
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  auto f = [&](double x) { return std::exp(g(x) - shift); };
  const double fc = f(centre);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double pair = f(centre - dx) + f(centre + dx);
    kronrod += kKronrodWeights[j] * pair;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * pair;
  }
  kronrod *= half;
  gauss *= half;
  return Panel{a, b, kronrod, std::abs(kronrod - gauss)};
}

// log of the integral of exp(g) over [a, b].
absl::StatusOr<double> LogIntegral(const LogIntegrand& g, double a, double b) {
  double shift = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kShiftScanPoints; ++i) {
    shift = std::max(shift, g(a + (b - a) * i / kShiftScanPoints));
  }
  if (!std::isfinite(shift)) {
    return absl::InternalError("quadrature: integrand is not finite");
  }

  std::priority_queue<Panel> panels;
  double total = 0.0;
  double total_error = 0.0;
  for (int i = 0; i < kInitialPanels; ++i) {
    Panel p = Kronrod(g, shift, a + (b - a) * i / kInitialPanels,
                      a + (b - a) * (i + 1) / kInitialPanels);
    total += p.value;
    total_error += p.error;
    panels.push(p);
  }
  int count = kInitialPanels;
  while (total_error > kRelTolerance * std::abs(total)) {
    if (count >= kMaxPanels) {
      return absl::InternalError(absl::StrCat(
          "quadrature did not converge: estimated relative error ",
          total_error / std::abs(total), " after ", count, " panels"));
    }
    Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Panel left = Kronrod(g, shift, worst.a, mid);
    Panel right = Kronrod(g, shift, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
    ++count;
  }
  // Re-sum to shed accumulated cancellation from the running updates.
  total = 0.0;
  while (!panels.empty()) {
    total += panels.top().value;
    panels.pop();
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    return absl::InternalError("quadrature produced a non-positive integral");
  }
  return shift + std::log(total);
}

absl::Status ValidateOrder(int order) {
  if (order < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("moment order must be >= 1, got ", order));
  }
  return absl::OkStatus();
}

}  // namespace

std::vector<int> DefaultMomentOrders() {
  std::vector<int> orders(kDefaultMaxMomentOrder);
  for (int i = 0; i < kDefaultMaxMomentOrder; ++i) orders[i] = i + 1;
  return orders;
}

absl::Status PrivacyParams::Validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    return absl::InvalidArgumentError("sigma must be positive and finite");
  }
  if (!(clip_s > 0.0) || !std::isfinite(clip_s)) {
    return absl::InvalidArgumentError("clip bound S must be positive");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    return absl::InvalidArgumentError("q must lie in [0, 1]");
  }
  if (rounds < 1) return absl::InvalidArgumentError("rounds T must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError("delta must lie in (0, 1)");
  }
  if (moment_orders.empty()) {
    return absl::InvalidArgumentError("moment_orders must be nonempty");
  }
  for (size_t i = 0; i < moment_orders.size(); ++i) {
    if (moment_orders[i] < 1 ||
        (i > 0 && moment_orders[i] <= moment_orders[i - 1])) {
      return absl::InvalidArgumentError(
          "moment_orders must be positive and strictly increasing");
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<double> LogMoment(int order, const PrivacyParams& params) {
  if (absl::Status s = ValidateOrder(order); !s.ok()) return s;
  if (absl::Status s = params.Validate(); !s.ok()) return s;
  if (params.q == 0.0) return 0.0;

  const double sigma = params.sigma;
  const double span = 2.0 * params.clip_s;
  // (f2/f1)^(l+1) f1 concentrates near 2S(l+1); keep 20 sigma of margin
  // around both that peak and the mixture components.
  const double lo = -kTailWidthSigmas * sigma;
  const double hi = span * (order + 1) + kTailWidthSigmas * sigma;

  // E_f2[(f1/f2)^l] = integral of (f2/f1)^(1-l) f1.
  LogIntegrand lower(sigma, params.clip_s, params.q, 1.0 - order);
  // E_f2[(f2/f1)^l] = integral of (f2/f1)^(l+1) f1.
  LogIntegrand upper(sigma, params.clip_s, params.q, 1.0 + order);
  absl::StatusOr<double> log_a = LogIntegral(lower, lo, hi);
  if (!log_a.ok()) return log_a.status();
  absl::StatusOr<double> log_b = LogIntegral(upper, lo, hi);
  if (!log_b.ok()) return log_b.status();
  // Both expectations are >= 1 by Jensen; rounding may leave a hair below.
  return std::max(0.0, std::max(*log_a, *log_b));
}

absl::StatusOr<MomentProfile> PerRoundProfile(const PrivacyParams& params) {
  if (absl::Status s = params.Validate(); !s.ok()) return s;
  MomentProfile profile;
  profile.rounds_composed = 1;
  for (int order : params.moment_orders) {
    absl::StatusOr<double> alpha = LogMoment(order, params);
    if (!alpha.ok()) return alpha.status();
    profile.per_order[order] = *alpha;
  }
  return profile;
}

absl::StatusOr<MomentProfile> PerRoundProfileParallel(
    const PrivacyParams& params) {
  if (absl::Status s = params.Validate(); !s.ok()) return s;
  const int n = static_cast<int>(params.moment_orders.size());
  std::vector<absl::StatusOr<double>> alphas(n, 0.0);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    alphas[i] = LogMoment(params.moment_orders[i], params);
  }
  MomentProfile profile;
  profile.rounds_composed = 1;
  for (int i = 0; i < n; ++i) {
    if (!alphas[i].ok()) return alphas[i].status();
    profile.per_order[params.moment_orders[i]] = *alphas[i];
  }
  return profile;
}

absl::StatusOr<MomentProfile> Compose(const MomentProfile& per_round,
                                      int rounds) {
  if (per_round.rounds_composed != 1) {
    return absl::InvalidArgumentError(
        "Compose expects a single-round profile");
  }
  if (rounds < 0) return absl::InvalidArgumentError("rounds must be >= 0");
  MomentProfile out;
  out.rounds_composed = rounds;
  for (const auto& [order, alpha] : per_round.per_order) {
    out.per_order[order] = alpha * rounds;
  }
  return out;
}

absl::StatusOr<MomentProfile> Combine(const MomentProfile& a,
                                      const MomentProfile& b) {
  if (a.per_order.size() != b.per_order.size()) {
    return absl::InvalidArgumentError("profiles cover different orders");
  }
  MomentProfile out;
  out.rounds_composed = a.rounds_composed + b.rounds_composed;
  for (const auto& [order, alpha] : a.per_order) {
    auto it = b.per_order.find(order);
    if (it == b.per_order.end()) {
      return absl::InvalidArgumentError("profiles cover different orders");
    }
    out.per_order[order] = alpha + it->second;
  }
  return out;
}

double EpsilonForDelta(const MomentProfile& profile, double delta) {
  const double log_inv_delta = -std::log(delta);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [order, alpha] : profile.per_order) {
    best = std::min(best, (alpha + log_inv_delta) / order);
  }
  return best;
}

double DeltaForEpsilon(const MomentProfile& profile, double epsilon) {
  double best_log = 0.0;
  for (const auto& [order, alpha] : profile.per_order) {
    best_log = std::min(best_log, alpha - order * epsilon);
  }
  return std::max(std::exp(best_log), std::numeric_limits<double>::min());
}

absl::StatusOr<double> EpsilonFor(const PrivacyParams& params) {
  absl::StatusOr<MomentProfile> per_round = PerRoundProfile(params);
  if (!per_round.ok()) return per_round.status();
  absl::StatusOr<MomentProfile> total = Compose(*per_round, params.rounds);
  if (!total.ok()) return total.status();
  return EpsilonForDelta(*total, params.delta);
}

absl::StatusOr<double> ParticipantViewSigma(double sigma, int participants) {
  if (participants < 2) {
    return absl::InvalidArgumentError(
        "participant view needs K >= 2: a lone participant's own noise "
        "cannot protect it");
  }
  const double root_k = std::sqrt(static_cast<double>(participants));
  return sigma * (root_k - 1.0) / root_k;
}

absl::StatusOr<double> CollusionAdjustedSigma(double sigma, double chi) {
  if (!(chi >= 0.0) || chi >= 1.0) {
    return absl::InvalidArgumentError(
        "colluding fraction chi must lie in [0, 1)");
  }
  return (1.0 - chi) * sigma;
}

}  // namespace fedcrypt
