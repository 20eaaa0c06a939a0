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

#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "kxops/core/embedding.hpp"
#include "kxops/metrics/metric_value.hpp"

namespace kxops::metrics {

// Eigenvalues above -kEigenClampTolerance * max(1, largest eigenvalue) are
// clamped to zero before taking square roots; anything more negative is a
// numerical error.
inline constexpr double kEigenClampTolerance = 1e-8;

namespace detail {

inline Eigen::VectorXd clamped_eigenvalues(const Eigen::VectorXd& values, const char* what) {
  const double scale = std::max(1.0, values.maxCoeff());
  Eigen::VectorXd out = values;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out[i] < 0.0) {
      if (out[i] < -kEigenClampTolerance * scale) {
        fail(ErrorKind::kNumerical, std::string(what) + " has a negative eigenvalue " +
                                        std::to_string(out[i]));
      }
      out[i] = 0.0;
    }
  }
  return out;
}

}  // namespace detail

// Principal square root of a symmetric positive semi-definite matrix.
inline Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& s) {
  const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) {
    fail(ErrorKind::kNumerical, "eigendecomposition did not converge");
  }
  const Eigen::VectorXd roots =
      detail::clamped_eigenvalues(eig.eigenvalues(), "covariance").cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

// Tr((A B)^{1/2}) for covariance matrices A, B, evaluated through the
// symmetric product A^{1/2} B A^{1/2}, which shares its eigenvalues with A B.
inline double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd ra = symmetric_sqrt(a);
  Eigen::MatrixXd m = ra * b * ra;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) {
    fail(ErrorKind::kNumerical, "eigendecomposition did not converge");
  }
  return detail::clamped_eigenvalues(eig.eigenvalues(), "covariance product").cwiseSqrt().sum();
}

struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // sample covariance, n - 1 denominator
};

inline GaussianMoments sample_moments(const EmbeddingMatrix& x) {
  require(x.n_rows() >= 2, "sample covariance needs at least 2 rows, got " +
                               std::to_string(x.n_rows()));
  const Eigen::MatrixXd ex = to_eigen(x);
  GaussianMoments m;
  m.mean = ex.colwise().mean().transpose();
  const Eigen::MatrixXd centered = ex.rowwise() - m.mean.transpose();
  m.covariance = (centered.transpose() * centered) / static_cast<double>(ex.rows() - 1);
  return m;
}

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}).
inline double frechet_distance(const GaussianMoments& a, const GaussianMoments& b) {
  require(a.mean.size() == b.mean.size(), "dimension mismatch");
  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double trace_term = a.covariance.trace() + b.covariance.trace() -
                            2.0 * trace_sqrt_product(a.covariance, b.covariance);
  return std::max(0.0, mean_term + trace_term);
}

inline MetricValue frechet_distance(const EmbeddingMatrix& x, const EmbeddingMatrix& y) {
  require_same_dim(x, y);
  return MetricValue::of(Metric::kFbd, frechet_distance(sample_moments(x), sample_moments(y)));
}

}  // namespace kxops::metrics
