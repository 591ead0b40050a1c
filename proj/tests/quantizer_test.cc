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

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "fedcrypt/random.h"
#include "fedcrypt/sampling.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace fedcrypt {
namespace {

QuantConfig Config(double scale, int64_t offset_steps, int bits = 26) {
  QuantConfig cfg;
  cfg.scale = scale;
  cfg.offset_steps = offset_steps;
  cfg.bits = bits;
  return cfg;
}

struct Moments {
  double mean;
  double var;
};

Moments SampleMoments(const std::vector<double>& xs) {
  double sum = 0, sum_sq = 0;
  for (double x : xs) {
    sum += x;
    sum_sq += x * x;
  }
  const double n = xs.size();
  const double mean = sum / n;
  return {mean, sum_sq / n - mean * mean};
}

TEST(QuantConfigTest, Validate) {
  EXPECT_TRUE(Config(1e-4, -100).Validate().ok());
  EXPECT_FALSE(Config(0.0, -100).Validate().ok());
  EXPECT_FALSE(Config(1e-4, -100, 0).Validate().ok());
  EXPECT_FALSE(Config(1e-4, -100, 63).Validate().ok());
  EXPECT_EQ(Config(1e-4, 0, 26).modulus(), uint64_t{1} << 26);
}

TEST(PoissonSampleTest, ZeroRateIsZero) {
  RandomStream rng(1);
  for (int i = 0; i < 1000; ++i) {
    absl::StatusOr<uint64_t> k = PoissonSample(rng, 0.0);
    ASSERT_TRUE(k.ok());
    EXPECT_EQ(*k, 0u);
  }
}

TEST(PoissonSampleTest, RejectsBadRates) {
  RandomStream rng(1);
  EXPECT_FALSE(PoissonSample(rng, -1.0).ok());
  EXPECT_FALSE(PoissonSample(rng, std::nan("")).ok());
  EXPECT_FALSE(
      PoissonSample(rng, std::numeric_limits<double>::infinity()).ok());
}

TEST(PoissonSampleTest, SmallRateMoments) {
  RandomStream rng(2);
  std::vector<double> xs(1'000'000);
  for (double& x : xs) x = static_cast<double>(*PoissonSample(rng, 4.0));
  const Moments m = SampleMoments(xs);
  EXPECT_NEAR(m.mean, 4.0, 0.008);
  EXPECT_NEAR(m.var, 4.0, 0.03);
}

// Chi-square against the exact pmf with bins of `width` counts spanning
// lambda +- 5 sd; the two tails form their own bins.
testing::ChiSquareResult FitToExactPmf(double lambda, int draws, int width,
                                       uint64_t seed) {
  RandomStream rng(seed);
  const double sd = std::sqrt(lambda);
  const int64_t lo = std::max<int64_t>(0, std::floor(lambda - 5 * sd));
  const int64_t hi = std::ceil(lambda + 5 * sd);
  const int inner = static_cast<int>((hi - lo + width - 1) / width);
  // bin 0: k < lo; bins 1..inner; bin inner + 1: k >= lo + inner * width.
  auto bin_of = [&](int64_t k) {
    if (k < lo) return 0;
    const int64_t b = (k - lo) / width + 1;
    return static_cast<int>(std::min<int64_t>(b, inner + 1));
  };
  std::vector<double> expected(inner + 2, 0.0);
  const int64_t k_max = hi + 20 * static_cast<int64_t>(sd) + 50;
  double covered = 0.0;
  for (int64_t k = 0; k <= k_max; ++k) {
    const double p = std::exp(testing::PoissonLogPmf(lambda, k));
    expected[bin_of(k)] += p;
    covered += p;
  }
  expected[inner + 1] += std::max(0.0, 1.0 - covered);
  std::vector<int64_t> observed(inner + 2, 0);
  for (int i = 0; i < draws; ++i) ++observed[bin_of(*PoissonSample(rng, lambda))];

  testing::ChiSquareResult r;
  int used = 0;
  double pending_e = 0.0;
  int64_t pending_o = 0;
  for (int b = 0; b < inner + 2; ++b) {
    pending_e += expected[b] * draws;
    pending_o += observed[b];
    if (pending_e >= 5.0 || b == inner + 1) {
      if (pending_e > 0) {
        r.statistic += (pending_o - pending_e) * (pending_o - pending_e) / pending_e;
        ++used;
      }
      pending_e = 0.0;
      pending_o = 0;
    }
  }
  r.df = used - 1;
  r.critical = testing::ChiSquareCritical(r.df, 1e-3);
  return r;
}

TEST(PoissonSampleTest, LargeRateMatchesExactPmf) {
  const testing::ChiSquareResult r = FitToExactPmf(40000.0, 100'000, 20, 3);
  EXPECT_TRUE(r.passes()) << "chi2=" << r.statistic << " df=" << r.df
                          << " critical=" << r.critical;
}

TEST(PoissonSampleTest, BothSidesOfTheMethodSwitchMatchExactPmf) {
  for (double lambda : {0.5, 7.0, 29.9, 30.0, 30.1, 150.0}) {
    const testing::ChiSquareResult r = FitToExactPmf(lambda, 200'000, 1, 4);
    EXPECT_TRUE(r.passes()) << "lambda=" << lambda << " chi2=" << r.statistic
                            << " df=" << r.df << " critical=" << r.critical;
  }
}

TEST(PoissonQuantizeTest, RejectsValuesAtOrBelowOffset) {
  RandomStream rng(1);
  const QuantConfig cfg = Config(0.01, -100);  // mu = -1
  EXPECT_FALSE(PoissonQuantize(-1.0, cfg, rng).ok());
  EXPECT_FALSE(PoissonQuantize(-2.0, cfg, rng).ok());
  EXPECT_TRUE(PoissonQuantize(-0.99, cfg, rng).ok());
}

TEST(PoissonQuantizeTest, JustAboveOffsetGivesZero) {
  RandomStream rng(1);
  const QuantConfig cfg = Config(0.01, 0);
  for (int i = 0; i < 1000; ++i) {
    absl::StatusOr<uint64_t> y = PoissonQuantize(0.01 * 1e-15, cfg, rng);
    ASSERT_TRUE(y.ok());
    EXPECT_EQ(*y, 0u);
  }
}

TEST(PoissonQuantizeTest, UnbiasedWithPredictedVariance) {
  RandomStream rng(5);
  const QuantConfig cfg = Config(0.1, 0);
  std::vector<double> xs(1'000'000);
  for (double& v : xs) v = 0.1 * static_cast<double>(*PoissonQuantize(1.0, cfg, rng));
  const Moments m = SampleMoments(xs);
  EXPECT_NEAR(m.mean, 1.0, 0.0013);
  EXPECT_NEAR(m.var, 0.1, 0.0006);
}

// Q_{s,mu}(x_1) + ... + Q_{s,mu}(x_m) against Q_{s,m mu}(x_1 + ... + x_m),
// compared as counts.
void ExpectSumCommutes(const std::vector<double>& xs, uint64_t seed) {
  const double s = 0.01;
  const QuantConfig single = Config(s, -100);  // mu = -1
  const QuantConfig joint = Config(s, -100 * static_cast<int64_t>(xs.size()));
  double total = 0.0;
  for (double x : xs) total += x;
  RandomStream rng_a = RandomStream::Derive(seed, {1});
  RandomStream rng_b = RandomStream::Derive(seed, {2});
  const int draws = 1'000'000;
  std::vector<int64_t> separate(draws), together(draws);
  for (int i = 0; i < draws; ++i) {
    int64_t sum = 0;
    for (double x : xs) sum += *PoissonQuantize(x, single, rng_a);
    separate[i] = sum;
    together[i] = *PoissonQuantize(total, joint, rng_b);
  }
  const testing::ChiSquareResult r =
      testing::TwoSampleChiSquare(separate, together, 1e-3);
  EXPECT_TRUE(r.passes()) << "m=" << xs.size() << " chi2=" << r.statistic
                          << " df=" << r.df << " critical=" << r.critical;
}

TEST(PoissonQuantizeTest, SumCommutesTwoTerms) {
  ExpectSumCommutes({0.3, 0.7}, 11);
}

TEST(PoissonQuantizeTest, SumCommutesFiveTerms) {
  ExpectSumCommutes({0.3, 0.7, -0.5, 0.05, 0.9}, 12);
}

TEST(PoissonQuantizeTest, DeterministicGivenSeed) {
  const QuantConfig cfg = Config(1e-4, -40000);
  std::vector<double> x(200);
  for (size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.1 * i);
  RandomStream a(8), b(8);
  absl::StatusOr<std::vector<uint64_t>> ya = PoissonQuantizeVector(x, cfg, a);
  absl::StatusOr<std::vector<uint64_t>> yb = PoissonQuantizeVector(x, cfg, b);
  ASSERT_TRUE(ya.ok() && yb.ok());
  EXPECT_EQ(*ya, *yb);
  for (uint64_t y : *ya) EXPECT_LT(y, cfg.modulus());
}

// Smallest k with k * s >= v, found by stepping from a float estimate.
int64_t BruteCeilSteps(double v, double s) {
  int64_t k = static_cast<int64_t>(v / s) - 2;
  while (static_cast<double>(k) * s < v) ++k;
  return k;
}

TEST(OffsetGridTest, ReferenceParameters) {
  const double sigma_ind = 6.0 / std::sqrt(1000.0);
  const double mu = OffsetGrid(1.0, sigma_ind, 15.81, 1e-4);
  EXPECT_EQ(OffsetSteps(1.0, sigma_ind, 15.81, 1e-4),
            BruteCeilSteps(1.0 + 15.81 * sigma_ind, 1e-4));
  EXPECT_NEAR(mu, -3.9998, 1e-12);
  EXPECT_LE(mu, -(1.0 + 15.81 * sigma_ind));
}

TEST(OffsetGridTest, NoiselessLimit) {
  EXPECT_DOUBLE_EQ(OffsetGrid(1.0, 0.0, 15.81, 1.0), -1.0);
  EXPECT_DOUBLE_EQ(OffsetGrid(1.0, 1e-3, 15.81, 1.0), -2.0);
}

TEST(OffsetGridTest, OnGridAndBelowBound) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  std::uniform_int_distribution<int> e(1, 5);
  for (int i = 0; i < 1000; ++i) {
    const double s_clip = u(gen), sigma = u(gen), bound = 3.0 * u(gen);
    const double scale = std::pow(10.0, -e(gen));
    const int64_t steps = OffsetSteps(s_clip, sigma, bound, scale);
    const double mu = OffsetGrid(s_clip, sigma, bound, scale);
    EXPECT_EQ(mu, -static_cast<double>(steps) * scale);
    EXPECT_LE(mu, -(s_clip + bound * sigma) * (1 - 1e-12));
    EXPECT_GT(mu + scale, -(s_clip + bound * sigma) * (1 + 1e-12));
  }
}

TEST(ModReduceTest, ExhaustiveTriples) {
  const uint64_t n = 7;
  int failures = 0;
  for (int64_t a = -10; a <= 10; ++a) {
    for (int64_t b = -10; b <= 10; ++b) {
      for (int64_t c = -10; c <= 10; ++c) {
        const std::vector<int64_t> parts = {a, b, c};
        const std::vector<uint64_t> reduced = ModReduce(parts, n);
        const uint64_t lhs = (reduced[0] + reduced[1] + reduced[2]) % n;
        const std::vector<int64_t> sum = {a + b + c};
        if (lhs != ModReduce(sum, n)[0]) ++failures;
      }
    }
  }
  EXPECT_EQ(failures, 0);
}

TEST(ModReduceTest, IdentityInRange) {
  const std::vector<uint64_t> v = {0, 1, 5, 6};
  EXPECT_EQ(ModReduce(std::span<const uint64_t>(v), 7), v);
}

TEST(ModReduceTest, MatchesNaiveRemainder) {
  std::mt19937_64 gen(21);
  std::uniform_int_distribution<int64_t> value(-(int64_t{1} << 40),
                                               int64_t{1} << 40);
  std::uniform_int_distribution<int> bits(1, 40);
  for (int i = 0; i < 100'000; ++i) {
    const uint64_t n = (gen() % ((uint64_t{1} << bits(gen)))) + 1;
    const std::vector<int64_t> v = {value(gen), value(gen)};
    const std::vector<uint64_t> got = ModReduce(v, n);
    for (size_t j = 0; j < v.size(); ++j) {
      int64_t r = v[j] % static_cast<int64_t>(n);
      if (r < 0) r += static_cast<int64_t>(n);
      ASSERT_EQ(got[j], static_cast<uint64_t>(r)) << v[j] << " mod " << n;
    }
  }
}

TEST(DequantizeTest, ZeroCountsGiveOffset) {
  const QuantConfig cfg = Config(1e-4, -39986);
  const std::vector<uint64_t> zeros(10, 0);
  for (double v : DequantizeAggregate(zeros, cfg, 5)) {
    EXPECT_DOUBLE_EQ(v, cfg.offset());
  }
}

TEST(DequantizeTest, SingleClientRoundTripIsUnbiased) {
  const QuantConfig cfg = Config(0.01, -300);
  RandomStream rng(31);
  const double x = 0.42;
  const int draws = 1'000'000;
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) {
    const std::vector<uint64_t> c = {*PoissonQuantize(x, cfg, rng)};
    sum += DequantizeAggregate(c, cfg, 1)[0];
  }
  // Var of one dequantised value is s (x - mu) = 0.0342.
  const double se = std::sqrt(0.01 * (x - cfg.offset()) / draws);
  EXPECT_NEAR(sum / draws, x, 4 * se);
}

TEST(DequantizeTest, AggregateOfCountsIsMeanOfQuantisedValues) {
  const QuantConfig cfg = Config(1e-4, -39986);
  const int k = 5;
  const int d = 10;
  RandomStream rng(41);
  std::vector<std::vector<uint64_t>> counts;
  std::vector<uint64_t> integer_sum(d, 0);
  for (int c = 0; c < k; ++c) {
    std::vector<double> x(d);
    for (int j = 0; j < d; ++j) x[j] = std::cos(c + 0.3 * j);
    counts.push_back(*PoissonQuantizeVector(x, cfg, rng));
    for (int j = 0; j < d; ++j) integer_sum[j] += counts.back()[j];
  }
  std::vector<uint64_t> summed(d, 0);
  for (const auto& v : counts) {
    for (int j = 0; j < d; ++j) summed[j] += v[j];
  }
  const std::vector<uint64_t> reduced = ModReduce(std::span<const uint64_t>(summed), cfg.modulus());
  for (int j = 0; j < d; ++j) ASSERT_LT(integer_sum[j], cfg.modulus());
  EXPECT_EQ(reduced, integer_sum);
  const std::vector<double> avg = DequantizeAggregate(reduced, cfg, k);
  for (int j = 0; j < d; ++j) {
    double plain = 0.0;
    for (int c = 0; c < k; ++c) {
      plain += cfg.scale * static_cast<double>(counts[c][j]) + cfg.offset();
    }
    plain /= k;
    EXPECT_NEAR(avg[j], plain, 1e-12) << "j=" << j;
  }
}

TEST(WrapBoundTest, ReferenceScaleIsSmall) {
  const double sigma_ind = PerParticipantStd(6.0, 1000);
  QuantConfig cfg = Config(1e-4, -OffsetSteps(1.0, sigma_ind,
                                              DeclaredBound(GaussianAlgorithm::kZiggurat),
                                              1e-4));
  EXPECT_LT(WrapProbabilityBound(1.0, cfg, 1000), 1e-4);
  EXPECT_LT(WrapProbabilityBound(1.0, cfg, 1000, 6.0), 1e-4);
}

TEST(WrapBoundTest, VacuousWhenMeanExceedsModulus) {
  const QuantConfig cfg = Config(1e-4, -40000, 20);
  EXPECT_EQ(WrapProbabilityBound(1.0, cfg, 1000), 1.0);
}

TEST(WrapBoundTest, DecreasesWithBits) {
  double prev = 2.0;
  for (int b = 26; b <= 40; ++b) {
    const double bound = WrapProbabilityBound(1.0, Config(1e-4, -39986, b), 1000, 6.0);
    EXPECT_LT(bound, prev) << "b=" << b;
    prev = bound;
  }
}

}  // namespace
}  // namespace fedcrypt
