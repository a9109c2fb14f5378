#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace roadframe {

struct UnscentedParams {
  double alpha = 0.5;
  double beta = 2.0;
  double kappa = 0.0;
};

/// Scaled unscented sigma set: column 0 is the mean, columns 1..n are
/// mean + sqrt((n+lambda) P) columns, n+1..2n the mirrored ones.
template <int N>
struct SigmaPoints {
  static constexpr int kCount = 2 * N + 1;
  Eigen::Matrix<double, N, kCount> points;
  Eigen::Matrix<double, kCount, 1> mean_weights;
  Eigen::Matrix<double, kCount, 1> cov_weights;
  bool repaired = false;  // covariance needed eigenvalue flooring
};

template <int M>
struct UtMoments {
  Eigen::Matrix<double, M, 1> mean;
  Eigen::Matrix<double, M, M> covariance;
  Eigen::Matrix<double, M, Eigen::Dynamic> deviations;  // residuals of each point from the mean
};

/// Floors the eigenvalues of a symmetric matrix at `floor`.
template <typename Derived>
typename Derived::PlainObject floor_eigenvalues(const Eigen::MatrixBase<Derived>& m, double floor) {
  using Plain = typename Derived::PlainObject;
  const Plain sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Plain> eig(sym);
  auto values = eig.eigenvalues().cwiseMax(floor);
  return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

template <int N>
SigmaPoints<N> make_sigma_points(const Eigen::Matrix<double, N, 1>& mean, const Eigen::Matrix<double, N, N>& cov,
                                 const UnscentedParams& p) {
  SigmaPoints<N> sp;
  const double lambda = p.alpha * p.alpha * (N + p.kappa) - N;
  const double spread = N + lambda;
  if (!(spread > 0.0)) throw std::invalid_argument("unscented parameters give non-positive spread");

  Eigen::LLT<Eigen::Matrix<double, N, N>> llt(cov);
  if (llt.info() != Eigen::Success) {
    llt.compute(floor_eigenvalues(cov, 1e-12));
    sp.repaired = true;
  }
  const Eigen::Matrix<double, N, N> root = std::sqrt(spread) * llt.matrixL().toDenseMatrix();

  sp.points.col(0) = mean;
  for (int i = 0; i < N; ++i) {
    sp.points.col(1 + i) = mean + root.col(i);
    sp.points.col(1 + N + i) = mean - root.col(i);
  }
  sp.mean_weights.setConstant(0.5 / spread);
  sp.cov_weights.setConstant(0.5 / spread);
  sp.mean_weights(0) = lambda / spread;
  sp.cov_weights(0) = lambda / spread + (1.0 - p.alpha * p.alpha + p.beta);
  return sp;
}

/// Plain weighted moments of transformed points.
template <int M, int K>
UtMoments<M> weighted_moments(const Eigen::Matrix<double, M, K>& pts, const Eigen::Matrix<double, K, 1>& wm,
                              const Eigen::Matrix<double, K, 1>& wc) {
  UtMoments<M> out;
  out.mean = pts * wm;
  out.deviations = pts.colwise() - out.mean;
  out.covariance = out.deviations * wc.asDiagonal() * out.deviations.transpose();
  return out;
}

/// Weighted moments where some components need a custom mean and residual
/// (angles, arc length on closed tracks). `mean_fn(pts, wm)` returns the
/// mean vector and `residual_fn(a, b)` returns a - b.
template <int M, int K, typename MeanFn, typename ResidualFn>
UtMoments<M> weighted_moments(const Eigen::Matrix<double, M, K>& pts, const Eigen::Matrix<double, K, 1>& wm,
                              const Eigen::Matrix<double, K, 1>& wc, MeanFn&& mean_fn, ResidualFn&& residual_fn) {
  UtMoments<M> out;
  out.mean = mean_fn(pts, wm);
  out.deviations.resize(M, K);
  for (int i = 0; i < K; ++i) out.deviations.col(i) = residual_fn(pts.col(i), out.mean);
  out.covariance = out.deviations * wc.asDiagonal() * out.deviations.transpose();
  return out;
}

/// Weighted circular mean of angle samples.
template <typename Derived, typename Weights>
double circular_mean(const Eigen::MatrixBase<Derived>& angles, const Eigen::MatrixBase<Weights>& w) {
  double sx = 0.0, sy = 0.0;
  for (Eigen::Index i = 0; i < angles.size(); ++i) {
    sx += w(i) * std::cos(angles(i));
    sy += w(i) * std::sin(angles(i));
  }
  return std::atan2(sy, sx);
}

}  // namespace roadframe
