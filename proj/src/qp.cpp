#include "roadframe/qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace roadframe {
namespace {

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

}  // namespace

QpResult solve_qp(const QpProblem& qp, const QpSettings& settings) {
  const Eigen::Index n = qp.H.rows();
  const Eigen::Index m = qp.G.rows();
  if (qp.H.cols() != n || qp.g.size() != n) throw std::invalid_argument("solve_qp: H and g disagree");
  if (m > 0 && (qp.G.cols() != n || qp.h.size() != m)) throw std::invalid_argument("solve_qp: G and h disagree");

  QpResult res;
  if (m == 0) {
    res.x = qp.H.ldlt().solve(-qp.g);
    res.z.resize(0);
    res.status = QpStatus::solved;
    return res;
  }

  // Start from the unconstrained minimiser with slacks pushed positive.
  Eigen::LDLT<Eigen::MatrixXd> h_ldlt(qp.H + 1e-8 * Eigen::MatrixXd::Identity(n, n));
  Eigen::VectorXd x = h_ldlt.solve(-qp.g);
  if (!x.allFinite()) x.setZero();
  // Elastic problems carry one mostly empty column per slack.
  const Eigen::SparseMatrix<double> G = qp.G.sparseView();
  const Eigen::SparseMatrix<double> Gt = G.transpose();
  Eigen::VectorXd s = (qp.h - G * x).cwiseMax(1.0);
  Eigen::VectorXd z = Eigen::VectorXd::Ones(m);

  const double scale_d = 1.0 + qp.g.lpNorm<Eigen::Infinity>();
  const double scale_p = 1.0 + qp.h.lpNorm<Eigen::Infinity>();
  const double tol = settings.tolerance;

  Eigen::MatrixXd kkt(n, n);
  for (int it = 0; it < settings.max_iter; ++it) {
    res.iterations = it + 1;
    const Eigen::VectorXd r_d = qp.H * x + qp.g + Gt * z;
    const Eigen::VectorXd r_p = G * x + s - qp.h;
    const double mu = s.dot(z) / static_cast<double>(m);

    if (r_d.lpNorm<Eigen::Infinity>() <= tol * scale_d && r_p.lpNorm<Eigen::Infinity>() <= tol * scale_p &&
        mu <= tol) {
      res.status = QpStatus::solved;
      break;
    }
    // Multipliers growing without bound while the primal residual stays
    // put is the signature of an infeasible constraint set.
    if (z.lpNorm<Eigen::Infinity>() > 1e12 || !x.allFinite()) {
      res.status = QpStatus::infeasible;
      break;
    }

    const Eigen::VectorXd w = z.cwiseQuotient(s);
    const Eigen::SparseMatrix<double> gwg = Gt * w.asDiagonal() * G;
    kkt = qp.H;
    kkt += Eigen::MatrixXd(gwg);
    Eigen::LLT<Eigen::MatrixXd> llt(kkt);
    if (llt.info() != Eigen::Success) {
      kkt.diagonal().array() += 1e-10 * (1.0 + kkt.diagonal().cwiseAbs().maxCoeff());
      llt.compute(kkt);
      if (llt.info() != Eigen::Success) {
        res.status = QpStatus::infeasible;
        break;
      }
    }

    auto direction = [&](const Eigen::VectorXd& r_c, Eigen::VectorXd& dx, Eigen::VectorXd& ds, Eigen::VectorXd& dz) {
      const Eigen::VectorXd rhs = -r_d - Gt * (w.cwiseProduct(r_p) - r_c.cwiseQuotient(s));
      dx = llt.solve(rhs);
      dz = w.cwiseProduct(G * dx + r_p) - r_c.cwiseQuotient(s);
      ds = -(r_c + s.cwiseProduct(dz)).cwiseQuotient(z);
    };

    // Predictor.
    Eigen::VectorXd dx, ds, dz;
    const Eigen::VectorXd r_aff = s.cwiseProduct(z);
    direction(r_aff, dx, ds, dz);
    const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
    const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(m);
    const double sigma = std::pow(mu_aff / mu, 3);

    // Corrector.
    const Eigen::VectorXd r_c = r_aff + ds.cwiseProduct(dz) - Eigen::VectorXd::Constant(m, sigma * mu);
    direction(r_c, dx, ds, dz);
    const double alpha = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));

    x += alpha * dx;
    s += alpha * ds;
    z += alpha * dz;
  }

  if (res.status == QpStatus::max_iter &&
      (G * x - qp.h).cwiseMax(0.0).lpNorm<Eigen::Infinity>() > 1e-6 * scale_p) {
    res.status = QpStatus::infeasible;
  }
  res.x = x;
  res.z = z;
  return res;
}

}  // namespace roadframe
