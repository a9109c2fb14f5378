#pragma once

#include "roadframe/angles.hpp"
#include "roadframe/track.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>

namespace roadframe {

using Vector5d = Eigen::Matrix<double, 5, 1>;
using Matrix5d = Eigen::Matrix<double, 5, 5>;
using Matrix52d = Eigen::Matrix<double, 5, 2>;

/// Road-frame vehicle state. Vector layout is (s, e_y, e_psi, v, delta).
struct EgoState {
  double s = 0.0;
  double e_y = 0.0;
  double e_psi = 0.0;
  double v = 0.0;
  double delta = 0.0;

  enum Index { kS = 0, kEy, kEpsi, kV, kDelta };

  Vector5d vector() const { return (Vector5d() << s, e_y, e_psi, v, delta).finished(); }
  static EgoState from_vector(const Vector5d& x) { return {x(0), x(1), x(2), x(3), x(4)}; }
};

/// (a, omega_delta): longitudinal acceleration and steering rate.
struct ControlInput {
  double a = 0.0;
  double omega_delta = 0.0;

  Eigen::Vector2d vector() const { return {a, omega_delta}; }
  static ControlInput from_vector(const Eigen::Vector2d& u) { return {u(0), u(1)}; }
};

struct VehicleParams {
  double wheelbase = 1.73;
  double delta_max = 0.52;
  double a_max = 1.5;
  double a_min = -3.0;
  double omega_delta_max = 0.8;
  double tau_delta = 0.15;
  double tau_v = 0.4;
  double v_max = 6.0;

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
};

/// Ego state plus the actuator lag filter states.
struct PlantState {
  EgoState ego;
  double delta_cmd_filtered = 0.0;
  double v_cmd_filtered = 0.0;
};

struct PlantStepFlags {
  bool steering_clamped = false;
  bool speed_ref_clamped = false;
  bool accel_clamped = false;
};

struct PlantStepResult {
  PlantState state;
  PlantStepFlags flags;
};

/// Frenet kinematic bicycle. Throws SingularityError when 1 - e_y*kappa <= 0.
template <typename Scalar>
Eigen::Matrix<Scalar, 5, 1> dynamics(const Eigen::Matrix<Scalar, 5, 1>& x, const Eigen::Matrix<Scalar, 2, 1>& u,
                                     double kappa, double wheelbase) {
  using std::cos;
  using std::sin;
  using std::tan;
  const Scalar scale = Scalar(1) - x(1) * kappa;
  if (!(scale > Scalar(0))) {
    throw SingularityError("Frenet singularity: 1 - e_y*kappa <= 0");
  }
  const Scalar s_dot = x(3) * cos(x(2)) / scale;
  Eigen::Matrix<Scalar, 5, 1> dx;
  dx << s_dot, x(3) * sin(x(2)), x(3) * tan(x(4)) / wheelbase - kappa * s_dot, u(0), u(1);
  return dx;
}

Vector5d dynamics(const EgoState& x, const ControlInput& u, double kappa, double wheelbase);

/// Partial derivatives of `dynamics` with respect to state and input.
void dynamics_jacobian(const Vector5d& x, double kappa, double wheelbase, Matrix5d& dfdx, Matrix52d& dfdu);

/// Sensitivities of one integration step.
struct StepJacobian {
  Matrix5d dx = Matrix5d::Identity();
  Matrix52d du = Matrix52d::Zero();
};

/// One classical RK4 step at fixed curvature.
Vector5d rk4_fixed(const Vector5d& x, const Eigen::Vector2d& u, double kappa, double wheelbase, double h);

/// RK4 step with curvature re-evaluated at every stage through `kappa_of_s`.
template <typename KappaFn>
EgoState integrate_rk4(const EgoState& x, const ControlInput& u, KappaFn&& kappa_of_s, double dt,
                       double wheelbase) {
  const Vector5d x0 = x.vector();
  const Eigen::Vector2d uv = u.vector();
  const Vector5d k1 = dynamics<double>(x0, uv, kappa_of_s(x0(0)), wheelbase);
  const Vector5d x2 = x0 + 0.5 * dt * k1;
  const Vector5d k2 = dynamics<double>(x2, uv, kappa_of_s(x2(0)), wheelbase);
  const Vector5d x3 = x0 + 0.5 * dt * k2;
  const Vector5d k3 = dynamics<double>(x3, uv, kappa_of_s(x3(0)), wheelbase);
  const Vector5d x4 = x0 + dt * k3;
  const Vector5d k4 = dynamics<double>(x4, uv, kappa_of_s(x4(0)), wheelbase);
  EgoState out = EgoState::from_vector(x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  out.e_psi = wrap_angle(out.e_psi);
  return out;
}

/// RK4 step along a track. Steps that cross a curvature discontinuity are
/// split exactly at the segment boundary so each sub-step sees constant
/// curvature. s is wrapped on closed tracks; on open tracks the end segments
/// extend indefinitely. When `jac` is given it receives d(out)/dx and
/// d(out)/du, including the dependence of the split times on x and u.
EgoState integrate_rk4(const EgoState& x, const ControlInput& u, const Track& track, double dt,
                       double wheelbase, StepJacobian* jac = nullptr);

/// Actuator-lag plant used as simulation ground truth. The steering angle
/// follows delta_r through a first-order lag; the speed reference is lagged
/// and the resulting acceleration saturated to [a_min, a_max].
PlantStepResult plant_step(const PlantState& p, double delta_r, double v_r, const VehicleParams& params,
                           const Track& track, double dt);

/// h(x, u) <= 0 entries: |e_y| - w, |delta| - delta_max, a - a_max,
/// a_min - a, |omega| - omega_max, -v, v - v_max.
Eigen::Matrix<double, 7, 1> constraint_values(const EgoState& x, const ControlInput& u, double lane_half_width,
                                              const VehicleParams& params);

}  // namespace roadframe
