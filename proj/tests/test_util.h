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

// Statistical helpers and independent oracles shared by the unit tests and
// the acceptance binary. Nothing here calls into the code under test.

#ifndef FEDCRYPT_TESTS_TEST_UTIL_H_
#define FEDCRYPT_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "boost/math/distributions/chi_squared.hpp"
#include "boost/math/distributions/normal.hpp"

namespace fedcrypt::testing {

// Upper critical value of chi-square(df) at the given significance.
inline double ChiSquareCritical(int df, double significance) {
  boost::math::chi_squared dist(df);
  return boost::math::quantile(boost::math::complement(dist, significance));
}

struct ChiSquareResult {
  double statistic = 0.0;
  int df = 0;
  double critical = 0.0;
  bool passes() const { return statistic <= critical; }
};

// Goodness of fit of standard-normal samples over `bins` equiprobable bins.
inline ChiSquareResult NormalGoodnessOfFit(const std::vector<double>& samples,
                                           int bins, double significance) {
  boost::math::normal standard;
  std::vector<double> edges;
  for (int i = 1; i < bins; ++i) {
    edges.push_back(boost::math::quantile(standard, double(i) / bins));
  }
  std::vector<int64_t> counts(bins, 0);
  for (double x : samples) {
    const auto it = std::upper_bound(edges.begin(), edges.end(), x);
    ++counts[it - edges.begin()];
  }
  const double expected = double(samples.size()) / bins;
  ChiSquareResult r;
  for (int64_t c : counts) r.statistic += (c - expected) * (c - expected) / expected;
  r.df = bins - 1;
  r.critical = ChiSquareCritical(r.df, significance);
  return r;
}

// Two-sample chi-square homogeneity test on integer samples of equal size.
// Values are binned individually; sparse tails are merged until every bin
// holds at least `min_pooled` observations from both samples together.
inline ChiSquareResult TwoSampleChiSquare(const std::vector<int64_t>& a,
                                          const std::vector<int64_t>& b,
                                          double significance,
                                          int64_t min_pooled = 20) {
  std::map<int64_t, std::pair<int64_t, int64_t>> hist;
  for (int64_t v : a) ++hist[v].first;
  for (int64_t v : b) ++hist[v].second;
  std::vector<std::pair<int64_t, int64_t>> bins;
  std::pair<int64_t, int64_t> acc{0, 0};
  for (const auto& [v, c] : hist) {
    acc.first += c.first;
    acc.second += c.second;
    if (acc.first + acc.second >= min_pooled) {
      bins.push_back(acc);
      acc = {0, 0};
    }
  }
  if (acc.first + acc.second > 0) {
    if (bins.empty()) {
      bins.push_back(acc);
    } else {
      bins.back().first += acc.first;
      bins.back().second += acc.second;
    }
  }
  const double na = a.size();
  const double nb = b.size();
  ChiSquareResult r;
  for (const auto& [ca, cb] : bins) {
    const double pooled = ca + cb;
    const double ea = pooled * na / (na + nb);
    const double eb = pooled * nb / (na + nb);
    r.statistic += (ca - ea) * (ca - ea) / ea + (cb - eb) * (cb - eb) / eb;
  }
  r.df = static_cast<int>(bins.size()) - 1;
  r.critical = ChiSquareCritical(r.df, significance);
  return r;
}

// Log pmf of Poisson(lambda) at k via std::lgamma.
inline double PoissonLogPmf(double lambda, int64_t k) {
  return k * std::log(lambda) - lambda - std::lgamma(k + 1.0);
}

struct MonteCarloMoment {
  double mean = 0.0;
  double std_error = 0.0;
};

struct MonteCarloLogMoment {
  MonteCarloMoment forward;   // E_f2[(f1/f2)^l]
  MonteCarloMoment backward;  // E_f2[(f2/f1)^l]
};

// Monte-Carlo estimate of both likelihood-ratio moments under
// f2 = (1-q) N(0, sigma^2) + q N(2S, sigma^2), against f1 = N(0, sigma^2).
inline MonteCarloLogMoment MonteCarloMoments(int order, double sigma,
                                             double clip_s, double q,
                                             int64_t samples, uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::bernoulli_distribution shifted(q);
  const double mu = 2.0 * clip_s;
  double sf = 0, sf2 = 0, sb = 0, sb2 = 0;
  for (int64_t i = 0; i < samples; ++i) {
    const double x = noise(gen) + (shifted(gen) ? mu : 0.0);
    // f2 / f1 = 1 - q + q exp((2 mu x - mu^2) / (2 sigma^2)).
    const double ratio =
        1.0 - q + q * std::exp((2.0 * mu * x - mu * mu) / (2.0 * sigma * sigma));
    const double fwd = std::pow(ratio, -order);
    const double bwd = std::pow(ratio, order);
    sf += fwd;
    sf2 += fwd * fwd;
    sb += bwd;
    sb2 += bwd * bwd;
  }
  const double n = static_cast<double>(samples);
  MonteCarloLogMoment out;
  out.forward.mean = sf / n;
  out.forward.std_error = std::sqrt((sf2 / n - out.forward.mean * out.forward.mean) / n);
  out.backward.mean = sb / n;
  out.backward.std_error = std::sqrt((sb2 / n - out.backward.mean * out.backward.mean) / n);
  return out;
}

}  // namespace fedcrypt::testing

#endif  // FEDCRYPT_TESTS_TEST_UTIL_H_
