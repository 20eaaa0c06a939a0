// Copyright 2026 The kxops Authors.
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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "kxops/metrics/frechet.hpp"
#include "kxops/metrics/kmeans.hpp"
#include "kxops/metrics/mauve.hpp"
#include "kxops/metrics/mmd.hpp"
#include "kxops/metrics/prd.hpp"
#include "kxops/metrics/similarity.hpp"
#include "test_util.hpp"

namespace kxops::metrics {
namespace {

using kxops::testing::from_rows;
using kxops::testing::gaussian;

// Brute-force max F1 over a dense angle grid. Recall is evaluated from its
// own definition sum(min(p, q / lambda)) rather than alpha / lambda.
double brute_force_max_f1(const std::vector<double>& p, const std::vector<double>& q,
                          std::size_t grid) {
  double best = 0.0;
  for (std::size_t j = 1; j <= grid; ++j) {
    const double lambda = std::tan(std::numbers::pi / 2.0 * static_cast<double>(j) /
                                   static_cast<double>(grid + 1));
    double alpha = 0.0, beta = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      alpha += std::min(lambda * p[i], q[i]);
      beta += std::min(p[i], q[i] / lambda);
    }
    if (alpha + beta > 0.0) best = std::max(best, 2.0 * alpha * beta / (alpha + beta));
  }
  return best;
}

double brute_force_median_distance(const EmbeddingMatrix& pooled) {
  std::vector<double> d;
  for (std::size_t i = 0; i < pooled.n_rows(); ++i) {
    for (std::size_t j = i + 1; j < pooled.n_rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < pooled.dim(); ++k) {
        const double diff = double(pooled(i, k)) - double(pooled(j, k));
        s += diff * diff;
      }
      d.push_back(std::sqrt(s));
    }
  }
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  return n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
}

EmbeddingMatrix reversed(const EmbeddingMatrix& m) {
  std::vector<std::size_t> rows(m.n_rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = rows.size() - 1 - i;
  return m.select_rows(rows);
}

// ---- MMD ------------------------------------------------------------------

TEST(MmdTest, HandEvaluatedSinglePoints) {
  const auto x = from_rows({{0.0f}});
  const auto y = from_rows({{1.0f}});
  const auto v = mmd_squared(x, y, KernelSpec{{1.0}});
  // k(x,x) = k(y,y) = 1, k(x,y) = exp(-1/2).
  EXPECT_NEAR(v.value, 2.0 - 2.0 * std::exp(-0.5), 1e-12);
  EXPECT_NEAR(v.value, 0.786939, 1e-6);
  EXPECT_EQ(v.direction, Direction::kDistance);
}

TEST(MmdTest, SelfDistanceIsZero) {
  const auto x = gaussian(300, 8, 1);
  for (double sigma : {0.1, 1.0, 10.0}) {
    EXPECT_LE(mmd_squared(x, x, KernelSpec{{sigma}}).value, 1e-9);
  }
}

TEST(MmdTest, SymmetricAndPermutationInvariant) {
  const auto x = gaussian(200, 6, 2);
  const auto y = gaussian(150, 6, 3, {0.7});
  const KernelSpec k{{0.5, 1.0, 2.0, 4.0}};
  const double xy = mmd_squared(x, y, k).value;
  EXPECT_NEAR(xy, mmd_squared(y, x, k).value, 1e-9);
  // Row order only changes summation order.
  EXPECT_NEAR(xy, mmd_squared(reversed(x), y, k).value, 1e-12);
  EXPECT_NEAR(xy, mmd_squared(x, reversed(y), k).value, 1e-12);
}

TEST(MmdTest, AveragesOverBandwidths) {
  const auto x = gaussian(50, 3, 4);
  const auto y = gaussian(60, 3, 5, {1.0});
  const double a = mmd_squared(x, y, KernelSpec{{0.5}}).value;
  const double b = mmd_squared(x, y, KernelSpec{{2.0}}).value;
  EXPECT_NEAR(mmd_squared(x, y, KernelSpec{{0.5, 2.0}}).value, 0.5 * (a + b), 1e-12);
}

TEST(MmdTest, ShiftedDistributionBeatsDisjointHalves) {
  const auto x = gaussian(2000, 1, 6);
  const auto y = gaussian(2000, 1, 7, {1.0});
  std::vector<std::size_t> first(1000), second(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    first[i] = i;
    second[i] = 1000 + i;
  }
  const auto a = x.select_rows(first);
  const auto b = x.select_rows(second);
  const auto mult = default_bandwidth_multipliers();
  const double shifted = mmd_squared(x, y, median_heuristic_bandwidths(x, y, mult, 1)).value;
  const double halves = mmd_squared(a, b, median_heuristic_bandwidths(a, b, mult, 1)).value;
  EXPECT_GT(shifted, halves);
}

TEST(MmdTest, RejectsDimensionMismatch) {
  EXPECT_THROW(mmd_squared(gaussian(3, 2, 1), gaussian(3, 3, 1), KernelSpec{{1.0}}), Error);
  EXPECT_THROW(mmd_squared(gaussian(3, 2, 1), gaussian(3, 2, 1), KernelSpec{{}}), Error);
  EXPECT_THROW(mmd_squared(gaussian(3, 2, 1), gaussian(3, 2, 1), KernelSpec{{-1.0}}), Error);
}

TEST(MedianHeuristicTest, TwoPoints) {
  const auto x = from_rows({{0.0f, 0.0f}});
  const auto y = from_rows({{2.0f, 0.0f}});
  const auto k = median_heuristic_bandwidths(x, y, {1.0});
  ASSERT_EQ(k.bandwidths.size(), 1u);
  EXPECT_DOUBLE_EQ(k.bandwidths[0], 2.0);
}

TEST(MedianHeuristicTest, IdenticalPointsFallBackToOne) {
  const auto x = from_rows({{3.0f}, {3.0f}});
  const auto y = from_rows({{3.0f}});
  const auto k = median_heuristic_bandwidths(x, y, default_bandwidth_multipliers());
  EXPECT_EQ(k.bandwidths, (std::vector<double>{0.25, 0.5, 1.0, 2.0, 4.0}));
}

TEST(MedianHeuristicTest, MatchesBruteForceMedian) {
  const auto x = gaussian(60, 5, 11);
  const auto y = gaussian(40, 5, 12, {0.5});
  std::vector<float> pooled(x.data().begin(), x.data().end());
  pooled.insert(pooled.end(), y.data().begin(), y.data().end());
  const double oracle = brute_force_median_distance(EmbeddingMatrix(100, 5, pooled));
  const auto k = median_heuristic_bandwidths(x, y, {1.0, 2.0}, 99);
  EXPECT_NEAR(k.bandwidths[0], oracle, 1e-12);
  EXPECT_NEAR(k.bandwidths[1], 2.0 * oracle, 1e-12);
}

TEST(MedianHeuristicTest, CapsThePoolDeterministically) {
  const auto x = gaussian(900, 2, 13);
  const auto y = gaussian(900, 2, 14);
  const auto a = median_heuristic_bandwidths(x, y, {1.0}, 5);
  const auto b = median_heuristic_bandwidths(x, y, {1.0}, 5);
  EXPECT_EQ(a.bandwidths, b.bandwidths);
  // Median distance of two standard 2-D Gaussians is sqrt(2 ln 4) ~ 1.665.
  EXPECT_NEAR(a.bandwidths[0], std::sqrt(2.0 * 2.0 * std::log(2.0)), 0.1);
}

// ---- Fréchet ----------------------------------------------------------------

TEST(FrechetTest, SelfDistanceIsZero) {
  const auto x = gaussian(500, 10, 21);
  EXPECT_LE(frechet_distance(x, x).value, 1e-6);
}

TEST(FrechetTest, OneDimensionalClosedForm) {
  // Sample mean 0 / 2 and sample variance 1 for both: 4 + (1 + 1 - 2) = 4.
  const float a = static_cast<float>(1.0 / std::sqrt(2.0));
  const auto x = from_rows({{-a}, {a}});
  const auto y = from_rows({{2.0f - a}, {2.0f + a}});
  EXPECT_NEAR(frechet_distance(x, y).value, 4.0, 1e-6);
}

TEST(FrechetTest, DiagonalCovarianceClosedForm) {
  // Four points (+-p, 0), (0, +-q) around a centre have diag(2p^2/3, 2q^2/3).
  auto cloud = [](float cx, float cy, float p, float q) {
    return from_rows({{cx + p, cy}, {cx - p, cy}, {cx, cy + q}, {cx, cy - q}});
  };
  const auto x = cloud(0.0f, 0.0f, 1.0f, 2.0f);
  const auto y = cloud(1.0f, -1.0f, 3.0f, 0.5f);
  const double a1 = 2.0 / 3.0, b1 = 8.0 / 3.0;
  const double a2 = 6.0, b2 = 0.5 / 3.0;
  const double oracle = (1.0 + 1.0) + std::pow(std::sqrt(a1) - std::sqrt(a2), 2) +
                        std::pow(std::sqrt(b1) - std::sqrt(b2), 2);
  EXPECT_NEAR(frechet_distance(x, y).value, oracle, 1e-5);
}

TEST(FrechetTest, Symmetric) {
  const auto x = gaussian(400, 5, 22);
  const auto y = gaussian(300, 5, 23, {0.2, -0.4}, 1.5);
  EXPECT_NEAR(frechet_distance(x, y).value, frechet_distance(y, x).value, 1e-9);
}

TEST(FrechetTest, ConvergesToAnalyticValue) {
  // N(0,1) vs N(2,1): 4 + (1 + 1 - 2) = 4.
  const auto x = gaussian(5000, 1, 24);
  const auto y = gaussian(5000, 1, 25, {2.0});
  EXPECT_NEAR(frechet_distance(x, y).value, 4.0, 0.05 * 4.0);
}

TEST(FrechetTest, RequiresTwoRows) {
  EXPECT_THROW(frechet_distance(from_rows({{1.0f}}), from_rows({{1.0f}, {2.0f}})), Error);
  EXPECT_THROW(frechet_distance(gaussian(4, 2, 1), gaussian(4, 3, 1)), Error);
}

TEST(FrechetTest, RankDeficientCovarianceIsClamped) {
  // 3 points in 8 dimensions: covariance rank <= 2.
  const auto x = gaussian(3, 8, 26);
  const auto y = gaussian(3, 8, 27);
  const double v = frechet_distance(x, y).value;
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GE(v, 0.0);
}

TEST(MonotonicityTest, MmdAndFrechetGrowWithMeanShift) {
  const auto x = gaussian(2000, 2, 31);
  double prev_mmd = -1.0, prev_fd = -1.0;
  for (double t : {0.0, 0.5, 1.0, 2.0}) {
    const auto y = gaussian(2000, 2, 32, {t});
    const auto k = median_heuristic_bandwidths(x, y, default_bandwidth_multipliers(), 3);
    const double m = mmd_squared(x, y, k).value;
    const double f = frechet_distance(x, y).value;
    EXPECT_GE(m, prev_mmd) << "t=" << t;
    EXPECT_GE(f, prev_fd) << "t=" << t;
    prev_mmd = m;
    prev_fd = f;
  }
}

// ---- k-means ----------------------------------------------------------------

TEST(KMeansTest, SeparatesObviousClusters) {
  Eigen::MatrixXd pts(6, 1);
  pts << 0.0, 0.1, 0.2, 10.0, 10.1, 10.2;
  const auto r = kmeans(pts, 2, 7);
  EXPECT_EQ(r.labels[0], r.labels[1]);
  EXPECT_EQ(r.labels[1], r.labels[2]);
  EXPECT_EQ(r.labels[3], r.labels[4]);
  EXPECT_NE(r.labels[0], r.labels[3]);
  EXPECT_NEAR(r.inertia, 4 * 0.01, 1e-9);
}

TEST(KMeansTest, DeterministicForSeed) {
  const auto m = to_eigen(gaussian(300, 4, 41));
  const auto a = kmeans(m, 8, 5);
  const auto b = kmeans(m, 8, 5);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.inertia, b.inertia);
  EXPECT_LE(a.iterations, 100u);
}

TEST(KMeansTest, TiesGoToLowestCentroid) {
  // All points identical: every centroid coincides, label 0 wins.
  Eigen::MatrixXd pts = Eigen::MatrixXd::Ones(5, 2);
  const auto r = kmeans(pts, 3, 1);
  for (auto l : r.labels) EXPECT_EQ(l, 0u);
}

TEST(KMeansTest, TooFewPoints) {
  EXPECT_THROW(kmeans(Eigen::MatrixXd::Zero(2, 2), 3, 0), Error);
}

// ---- PRD ---------------------------------------------------------------------

TEST(PrdTest, InjectedHistogramsMatchBruteForce) {
  const std::vector<double> p = {0.5, 0.5, 0.0};
  const std::vector<double> q = {0.0, 0.5, 0.5};
  const double oracle = brute_force_max_f1(p, q, 100001);
  EXPECT_NEAR(prd_max_f1(p, q, 1001), oracle, 1e-6);
  EXPECT_NEAR(oracle, 0.5, 1e-9);
}

TEST(PrdTest, CurveMatchesIndependentRecallOnSameGrid) {
  std::mt19937_64 gen(51);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p(7), q(7);
    double sp = 0, sq = 0;
    for (int i = 0; i < 7; ++i) {
      p[i] = u(gen);
      q[i] = u(gen);
      sp += p[i];
      sq += q[i];
    }
    for (int i = 0; i < 7; ++i) {
      p[i] /= sp;
      q[i] /= sq;
    }
    EXPECT_NEAR(prd_max_f1(p, q, 2001), brute_force_max_f1(p, q, 2001), 1e-12);
  }
}

TEST(PrdTest, IdenticalHistogramsGiveOne) {
  const std::vector<double> p = {0.1, 0.2, 0.3, 0.4};
  EXPECT_NEAR(prd_max_f1(p, p, 1001), 1.0, 1e-12);
}

TEST(PrdTest, IdenticalSamplesUpToShuffle) {
  const auto x = gaussian(400, 4, 52);
  const auto v = pr_f1(x, reversed(x), 20, 1001, 3);
  EXPECT_GE(v.value, 0.95);
  EXPECT_EQ(v.direction, Direction::kSimilarity);
}

TEST(PrdTest, FarSeparatedCloudsScoreNearZero) {
  const auto x = gaussian(300, 4, 53);
  const auto y = gaussian(300, 4, 54, {100.0, 100.0});
  EXPECT_LT(pr_f1(x, y, 20, 1001, 4).value, 0.05);
}

TEST(PrdTest, RejectsTooFewSamples) {
  EXPECT_THROW(pr_f1(gaussian(5, 2, 1), gaussian(5, 2, 2), 20, 1001), Error);
  EXPECT_THROW(pr_f1(gaussian(5, 2, 1), gaussian(5, 2, 2), 1, 1001), Error);
}

// ---- Mauve -------------------------------------------------------------------

TEST(MauveTest, EqualHistogramsGiveUnitArea) {
  const std::vector<double> p = {0.2, 0.3, 0.5};
  const auto curve = divergence_frontier(p, p, 5.0, 101, 1e-6);
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    EXPECT_NEAR(curve[i].x, 1.0, 1e-12);
    EXPECT_NEAR(curve[i].y, 1.0, 1e-12);
  }
  EXPECT_NEAR(mauve_from_histograms(p, p), 1.0, 1e-12);
}

TEST(MauveTest, DisjointHistogramsMatchBetaIntegral) {
  // With disjoint supports the frontier is ((1-w)^c, w^c); its area is
  // c * B(c+1, c) = 5 * 5! 4! / 10! for c = 5.
  const std::vector<double> p = {0.5, 0.5, 0.0, 0.0};
  const std::vector<double> q = {0.0, 0.0, 0.5, 0.5};
  const double oracle = 5.0 * 120.0 * 24.0 / 3628800.0;
  EXPECT_NEAR(mauve_from_histograms(p, q), oracle, 2e-3);
}

TEST(MauveTest, IdenticalSamples) {
  const auto x = gaussian(400, 32, 61);
  const auto v = mauve(x, x, MauveOptions{}, 1);
  EXPECT_GE(v.value, 0.95);
  EXPECT_EQ(v.direction, Direction::kSimilarity);
}

TEST(MauveTest, FarSeparatedClouds) {
  const auto x = gaussian(400, 8, 62);
  const auto y = gaussian(400, 8, 63, {50.0, -50.0});
  EXPECT_LE(mauve(x, y, 20, 4, 5.0, 2).value, 0.1);
}

TEST(MauveTest, DegenerateCovarianceIsNamed) {
  const auto x = from_rows({{1.0f, 2.0f}, {1.0f, 2.0f}, {1.0f, 2.0f}});
  try {
    mauve(x, x, 2, 2, 5.0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate covariance"), std::string::npos);
  }
}

TEST(MauveTest, RejectsBadParameters) {
  const auto x = gaussian(50, 4, 64);
  EXPECT_THROW(mauve(x, x, 2, 5, 5.0), Error);
  EXPECT_THROW(mauve(x, x, 1, 2, 5.0), Error);
  EXPECT_THROW(mauve(x, x, 4, 2, 0.0), Error);
}

TEST(MauveTest, DefaultClusterCount) {
  EXPECT_EQ(default_mauve_clusters(100), 20u);
  EXPECT_EQ(default_mauve_clusters(2000), 50u);
  EXPECT_EQ(default_mauve_clusters(1), 2u);
}

// ---- Bounds on random pairs ---------------------------------------------------

TEST(BoundsTest, PrAndMauveStayInUnitInterval) {
  std::mt19937_64 gen(71);
  std::uniform_real_distribution<double> shift(-3.0, 3.0);
  for (int trial = 0; trial < 25; ++trial) {
    const auto x = gaussian(80, 3, 1000 + trial);
    const auto y = gaussian(60, 3, 2000 + trial, {shift(gen), shift(gen)});
    const double pr = pr_f1(x, y, 10, 201, trial).value;
    const double mv = mauve(x, y, 10, 3, 5.0, trial).value;
    EXPECT_GE(pr, 0.0);
    EXPECT_LE(pr, 1.0);
    EXPECT_GE(mv, 0.0);
    EXPECT_LE(mv, 1.0);
  }
}

// ---- Subsampling ----------------------------------------------------------------

TEST(SubsampleTest, DegeneratePlanEqualsPlainMetric) {
  const auto x = gaussian(120, 4, 81);
  const auto y = gaussian(90, 4, 82, {0.5});
  const SamplingPlan plan{1000, 1, 9};
  MetricConfig cfg;
  cfg.kernel = KernelSpec{{1.0, 2.0}};
  EXPECT_EQ(subsampled_metric(Metric::kMmd, x, y, plan, cfg).value,
            mmd_squared(x, y, *cfg.kernel).value);
  EXPECT_EQ(subsampled_metric(Metric::kFbd, x, y, plan).value, frechet_distance(x, y).value);
}

TEST(SubsampleTest, SameSeedSameResult) {
  const auto x = gaussian(600, 4, 83);
  const auto y = gaussian(700, 4, 84, {0.3});
  const SamplingPlan plan{200, 3, 17};
  for (Metric m : kAllMetrics) {
    EXPECT_EQ(subsampled_metric(m, x, y, plan).value, subsampled_metric(m, x, y, plan).value)
        << to_string(m);
  }
}

TEST(SubsampleTest, SplitOfOneCorpusIsCloserThanShiftedCorpus) {
  const auto corpus = gaussian(3000, 8, 85);
  std::vector<std::size_t> a_rows, b_rows;
  for (std::size_t i = 0; i < 3000; ++i) (i % 2 ? b_rows : a_rows).push_back(i);
  const auto a = corpus.select_rows(a_rows);
  const auto b = corpus.select_rows(b_rows);
  const auto shifted = gaussian(1500, 8, 86, {1.0, 1.0});
  const SamplingPlan plan{500, 3, 1};
  const double same = subsampled_metric(Metric::kMmd, a, b, plan).value;
  const double diff = subsampled_metric(Metric::kMmd, a, shifted, plan).value;
  EXPECT_LT(5.0 * same, diff);
}

TEST(SubsampleTest, RejectsInvalidPlan) {
  const auto x = gaussian(10, 2, 1);
  EXPECT_THROW(subsampled_metric(Metric::kFbd, x, x, SamplingPlan{1, 1, 0}), Error);
  EXPECT_THROW(subsampled_metric(Metric::kFbd, x, x, SamplingPlan{10, 0, 0}), Error);
}

}  // namespace
}  // namespace kxops::metrics
