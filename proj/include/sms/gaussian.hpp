#pragma once

#include <sms/error.hpp>
#include <sms/types.hpp>

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

namespace sms {

/// One class-conditional Gaussian over soft labels.
struct GaussianFit {
  Vector mean;
  Matrix covariance;  // sample covariance + epsilon * I
  Matrix chol;        // lower triangular, chol * chol^T == covariance
  double log_det = 0.0;
  Eigen::Index count = 0;

  Eigen::Index dim() const { return mean.size(); }
};

inline constexpr double kDefaultRidge = 1e-6;

/// Fits mean and ridge-regularized sample covariance (divisor c-1) to the rows
/// of `points`.
inline GaussianFit fit_gaussian(const Matrix& points, double epsilon = kDefaultRidge) {
  if (points.rows() < 2) fail(ErrorCode::TooFewPoints, "need at least 2 points, got " + std::to_string(points.rows()));
  if (points.cols() < 1) fail(ErrorCode::InvalidDimension, "points have zero dimensions");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) fail(ErrorCode::InvalidArgument, "epsilon must be a nonnegative finite number");

  GaussianFit fit;
  fit.count = points.rows();
  fit.mean = points.colwise().mean().transpose();
  const Matrix centered = points.rowwise() - fit.mean.transpose();
  fit.covariance = (centered.transpose() * centered) / static_cast<double>(points.rows() - 1);
  fit.covariance.diagonal().array() += epsilon;
  // exact symmetry regardless of how the product was blocked
  fit.covariance = (0.5 * (fit.covariance + fit.covariance.transpose())).eval();

  Eigen::LLT<Matrix> llt(fit.covariance);
  if (llt.info() != Eigen::Success) fail(ErrorCode::NotPositiveDefinite, "cluster covariance is not positive definite");
  fit.chol = llt.matrixL();
  const auto diag = fit.chol.diagonal();
  if ((diag.array() <= 0.0).any()) fail(ErrorCode::NotPositiveDefinite, "cluster covariance is not positive definite");
  fit.log_det = 2.0 * diag.array().log().sum();
  if (!std::isfinite(fit.log_det)) fail(ErrorCode::NotPositiveDefinite, "log-determinant is not finite");
  return fit;
}

/// (x - mean)^T covariance^{-1} (x - mean) through one triangular solve.
inline double mahalanobis_sq(const GaussianFit& fit, const Vector& x) {
  if (x.size() != fit.dim()) {
    fail(ErrorCode::DimensionMismatch, "point has " + std::to_string(x.size()) + " dims, fit has " + std::to_string(fit.dim()));
  }
  const Vector y = fit.chol.triangularView<Eigen::Lower>().solve(x - fit.mean);
  return y.squaredNorm();
}

/// ln of the unnormalized density exp(-maha/2); normalizers cancel in the
/// separation degree.
inline double log_density_unnormalized(const GaussianFit& fit, const Vector& x) { return -0.5 * mahalanobis_sq(fit, x); }

}  // namespace sms
