#include "roadframe/vehicle.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace roadframe {
namespace {

struct Rk4Derivatives {
  Vector5d out;
  Matrix5d dx;
  Matrix52d du;
  Vector5d dh;  // derivative with respect to the step length
};

Rk4Derivatives rk4_with_derivatives(const Vector5d& x, const Eigen::Vector2d& u, double kappa, double wheelbase,
                                    double h) {
  Matrix5d fx;
  Matrix52d fu;
  const Matrix5d eye = Matrix5d::Identity();

  const Vector5d k1 = dynamics<double>(x, u, kappa, wheelbase);
  dynamics_jacobian(x, kappa, wheelbase, fx, fu);
  const Matrix5d k1x = fx;
  const Matrix52d k1u = fu;

  const Vector5d x2 = x + 0.5 * h * k1;
  const Vector5d k2 = dynamics<double>(x2, u, kappa, wheelbase);
  dynamics_jacobian(x2, kappa, wheelbase, fx, fu);
  const Matrix5d k2x = fx * (eye + 0.5 * h * k1x);
  const Matrix52d k2u = fx * (0.5 * h * k1u) + fu;
  const Vector5d k2h = fx * (0.5 * k1);

  const Vector5d x3 = x + 0.5 * h * k2;
  const Vector5d k3 = dynamics<double>(x3, u, kappa, wheelbase);
  dynamics_jacobian(x3, kappa, wheelbase, fx, fu);
  const Matrix5d k3x = fx * (eye + 0.5 * h * k2x);
  const Matrix52d k3u = fx * (0.5 * h * k2u) + fu;
  const Vector5d k3h = fx * (0.5 * k2 + 0.5 * h * k2h);

  const Vector5d x4 = x + h * k3;
  const Vector5d k4 = dynamics<double>(x4, u, kappa, wheelbase);
  dynamics_jacobian(x4, kappa, wheelbase, fx, fu);
  const Matrix5d k4x = fx * (eye + h * k3x);
  const Matrix52d k4u = fx * (h * k3u) + fu;
  const Vector5d k4h = fx * (k3 + h * k3h);

  const Vector5d slope = k1 + 2.0 * k2 + 2.0 * k3 + k4;
  Rk4Derivatives d;
  d.out = x + h / 6.0 * slope;
  d.dx = eye + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  d.du = h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
  d.dh = slope / 6.0 + h / 6.0 * (2.0 * k2h + 2.0 * k3h + k4h);
  return d;
}

}  // namespace

void VehicleParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("vehicle parameter ") + name + " must be positive");
  };
  positive(wheelbase, "wheelbase");
  positive(delta_max, "delta_max");
  positive(a_max, "a_max");
  positive(omega_delta_max, "omega_delta_max");
  positive(tau_delta, "tau_delta");
  positive(tau_v, "tau_v");
  positive(v_max, "v_max");
  if (!(a_min < 0.0)) throw std::invalid_argument("vehicle parameter a_min must be negative");
}

Vector5d dynamics(const EgoState& x, const ControlInput& u, double kappa, double wheelbase) {
  return dynamics<double>(x.vector(), u.vector(), kappa, wheelbase);
}

void dynamics_jacobian(const Vector5d& x, double kappa, double wheelbase, Matrix5d& dfdx, Matrix52d& dfdu) {
  const double e_y = x(1), e_psi = x(2), v = x(3), delta = x(4);
  const double scale = 1.0 - e_y * kappa;
  if (!(scale > 0.0)) throw SingularityError("Frenet singularity: 1 - e_y*kappa <= 0");
  const double c = std::cos(e_psi), sn = std::sin(e_psi), t = std::tan(delta);

  const double ds_dey = v * c * kappa / (scale * scale);
  const double ds_depsi = -v * sn / scale;
  const double ds_dv = c / scale;

  dfdx.setZero();
  dfdx(0, 1) = ds_dey;
  dfdx(0, 2) = ds_depsi;
  dfdx(0, 3) = ds_dv;
  dfdx(1, 2) = v * c;
  dfdx(1, 3) = sn;
  dfdx(2, 1) = -kappa * ds_dey;
  dfdx(2, 2) = -kappa * ds_depsi;
  dfdx(2, 3) = t / wheelbase - kappa * ds_dv;
  dfdx(2, 4) = v * (1.0 + t * t) / wheelbase;

  dfdu.setZero();
  dfdu(3, 0) = 1.0;
  dfdu(4, 1) = 1.0;
}

Vector5d rk4_fixed(const Vector5d& x, const Eigen::Vector2d& u, double kappa, double wheelbase, double h) {
  const Vector5d k1 = dynamics<double>(x, u, kappa, wheelbase);
  const Vector5d k2 = dynamics<double>(Vector5d(x + 0.5 * h * k1), u, kappa, wheelbase);
  const Vector5d k3 = dynamics<double>(Vector5d(x + 0.5 * h * k2), u, kappa, wheelbase);
  const Vector5d k4 = dynamics<double>(Vector5d(x + h * k3), u, kappa, wheelbase);
  return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

EgoState integrate_rk4(const EgoState& x, const ControlInput& u, const Track& track, double dt, double wheelbase,
                       StepJacobian* jac) {
  if (!(dt > 0.0)) throw std::invalid_argument("integration step must be positive");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto& segments = track.segments();
  const std::size_t last = segments.size() - 1;

  Vector5d w = x.vector();
  const Eigen::Vector2d uv = u.vector();
  Matrix5d wx = Matrix5d::Identity();
  Matrix52d wu = Matrix52d::Zero();
  Eigen::RowVector<double, 5> rx = Eigen::RowVector<double, 5>::Zero();
  Eigen::RowVector2d ru = Eigen::RowVector2d::Zero();

  // Segment bookkeeping in unwrapped arc length.
  std::size_t idx;
  double lower, upper;
  if (track.closed()) {
    const double ws = track.wrap_s(w(0));
    idx = track.segment_index(ws);
    lower = w(0) - ws + track.segment_start(idx);
  } else {
    idx = w(0) < 0.0 ? 0 : track.segment_index(std::min(w(0), track.total_length()));
    lower = track.segment_start(idx);
  }
  upper = lower + segments[idx].arc_length();
  auto open_bounds = [&] {
    if (track.closed()) return;
    if (idx == 0) lower = -kInf;
    if (idx == last) upper = kInf;
  };
  open_bounds();

  double remaining = dt;
  for (int pass = 0; pass < 64 && remaining > 0.0; ++pass) {
    const double kappa = segments[idx].curvature();
    const Rk4Derivatives full = rk4_with_derivatives(w, uv, kappa, wheelbase, remaining);
    if (full.out(0) <= upper && full.out(0) >= lower) {
      if (jac) {
        wx = full.dx * wx + full.dh * rx;
        wu = full.dx * wu + full.du + full.dh * ru;
      }
      w = full.out;
      remaining = 0.0;
      break;
    }

    const bool forward = full.out(0) > upper;
    const double boundary = forward ? upper : lower;
    double tau = remaining * (boundary - w(0)) / (full.out(0) - w(0));
    tau = std::clamp(tau, 0.0, remaining);
    Rk4Derivatives part = rk4_with_derivatives(w, uv, kappa, wheelbase, tau);
    for (int it = 0; it < 50; ++it) {
      const double g = part.out(0) - boundary;
      if (std::abs(g) < 1e-13 || part.dh(0) == 0.0) break;
      tau = std::clamp(tau - g / part.dh(0), 0.0, remaining);
      part = rk4_with_derivatives(w, uv, kappa, wheelbase, tau);
    }

    if (jac) {
      const double rate = part.dh(0);
      Eigen::RowVector<double, 5> tx = Eigen::RowVector<double, 5>::Zero();
      Eigen::RowVector2d tu = Eigen::RowVector2d::Zero();
      if (std::abs(rate) > 1e-12) {
        tx = -(part.dx.row(0) * wx) / rate;
        tu = -(part.dx.row(0) * wu + part.du.row(0)) / rate;
      }
      wx = part.dx * wx + part.dh * tx;
      wu = part.dx * wu + part.du + part.dh * tu;
      rx -= tx;
      ru -= tu;
    }
    w = part.out;
    w(0) = boundary;
    remaining -= tau;

    if (forward) {
      if (idx == last) {
        idx = 0;
      } else {
        ++idx;
      }
      lower = boundary;
      upper = boundary + segments[idx].arc_length();
    } else {
      idx = idx == 0 ? last : idx - 1;
      upper = boundary;
      lower = boundary - segments[idx].arc_length();
    }
    open_bounds();
  }

  EgoState out = EgoState::from_vector(w);
  out.e_psi = wrap_angle(out.e_psi);
  if (track.closed()) out.s = track.wrap_s(out.s);
  if (jac) {
    jac->dx = wx;
    jac->du = wu;
  }
  return out;
}

PlantStepResult plant_step(const PlantState& p, double delta_r, double v_r, const VehicleParams& params,
                           const Track& track, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("plant step must be positive");
  PlantStepResult r;
  auto& flags = r.flags;

  const double delta_ref = std::clamp(delta_r, -params.delta_max, params.delta_max);
  flags.steering_clamped = delta_ref != delta_r;
  const double steer_decay = std::exp(-dt / params.tau_delta);
  const double delta_filtered = delta_ref + (p.delta_cmd_filtered - delta_ref) * steer_decay;
  const double delta_next = std::clamp(delta_filtered, -params.delta_max, params.delta_max);

  const double v_ref = std::clamp(v_r, 0.0, params.v_max);
  flags.speed_ref_clamped = v_ref != v_r;
  const double speed_decay = std::exp(-dt / params.tau_v);
  const double v_filtered = v_ref + (p.v_cmd_filtered - v_ref) * speed_decay;
  const double a_wanted = (v_filtered - p.ego.v) / dt;
  double a = std::clamp(a_wanted, params.a_min, params.a_max);
  flags.accel_clamped = a != a_wanted;
  if (p.ego.v + a * dt < 0.0) a = -p.ego.v / dt;

  const ControlInput u{a, (delta_next - p.ego.delta) / dt};
  EgoState ego = integrate_rk4(p.ego, u, track, dt, params.wheelbase);
  ego.v = std::max(0.0, p.ego.v + a * dt);
  ego.delta = delta_next;

  r.state.ego = ego;
  r.state.delta_cmd_filtered = delta_filtered;
  r.state.v_cmd_filtered = v_filtered;
  return r;
}

Eigen::Matrix<double, 7, 1> constraint_values(const EgoState& x, const ControlInput& u, double lane_half_width,
                                              const VehicleParams& params) {
  Eigen::Matrix<double, 7, 1> h;
  h << std::abs(x.e_y) - lane_half_width, std::abs(x.delta) - params.delta_max, u.a - params.a_max,
      params.a_min - u.a, std::abs(u.omega_delta) - params.omega_delta_max, -x.v, x.v - params.v_max;
  return h;
}

}  // namespace roadframe
