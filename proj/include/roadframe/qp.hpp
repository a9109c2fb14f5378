#pragma once

#include <Eigen/Core>

namespace roadframe {

/// min 0.5 x'Hx + g'x  subject to  G x <= h.  H symmetric positive
/// semidefinite; the Newton matrix H + G'WG must be positive definite.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
};

enum class QpStatus { solved, max_iter, infeasible };

struct QpSettings {
  int max_iter = 60;
  double tolerance = 1e-9;
};

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd z;  // inequality multipliers
  QpStatus status = QpStatus::max_iter;
  int iterations = 0;
};

/// Primal-dual interior point with Mehrotra predictor-corrector.
QpResult solve_qp(const QpProblem& qp, const QpSettings& settings = {});

}  // namespace roadframe
