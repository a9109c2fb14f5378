#include "roadframe/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace roadframe {
namespace {

// One weighted least-squares term r with its partials.
struct Residual {
  double r = 0.0;
  Vector5d dx = Vector5d::Zero();
  Eigen::Vector2d du = Eigen::Vector2d::Zero();
};

double bump_proximity(double s, const SpeedBump& b, const Track& track, double* d_ds) {
  const double ds = track.s_difference(s, b.s);
  const double q = 1.0 - std::abs(ds) / b.half_length;
  if (q <= 0.0) {
    if (d_ds) *d_ds = 0.0;
    return 0.0;
  }
  if (d_ds) *d_ds = -(ds >= 0.0 ? 1.0 : -1.0) / b.half_length;
  return q;
}

// Appends the residuals whose squares sum to scale * L(x, u).
void stage_residuals(const EgoState& x, const ControlInput& u, double t, double scale, const PlannerConfig& cfg,
                     const std::vector<ObstacleConstraint>& obstacles, const Track& track,
                     std::vector<Residual>& out) {
  auto add_state = [&](double w, double value, int index) {
    if (w <= 0.0) return;
    Residual r;
    const double k = std::sqrt(scale * w);
    r.r = k * value;
    r.dx(index) = k;
    out.push_back(r);
  };
  add_state(cfg.w_ey, x.e_y, EgoState::kEy);
  add_state(cfg.w_epsi, x.e_psi, EgoState::kEpsi);
  add_state(cfg.w_v, x.v - cfg.v_cruise, EgoState::kV);
  for (int i = 0; i < 2; ++i) {
    const double w = i == 0 ? cfg.w_a : cfg.w_omega;
    if (w <= 0.0) continue;
    Residual r;
    const double k = std::sqrt(scale * w);
    r.r = k * u.vector()(i);
    r.du(i) = k;
    out.push_back(r);
  }

  if (cfg.w_obs > 0.0) {
    for (const auto& ob : obstacles) {
      const Eigen::Vector2d p = ob.position_at(t);
      const double ds = track.s_difference(x.s, p(0));
      const double de = x.e_y - p(1);
      const double d = std::hypot(ds, de);
      const double gap = cfg.d_safe + ob.radius - d;
      if (gap <= 0.0) continue;
      Residual r;
      const double k = std::sqrt(scale * cfg.w_obs);
      r.r = k * gap;
      if (d > 1e-12) {
        r.dx(EgoState::kS) = -k * ds / d;
        r.dx(EgoState::kEy) = -k * de / d;
      }
      out.push_back(r);
    }
  }

  if (cfg.w_bump > 0.0) {
    for (const auto& b : cfg.bumps) {
      double dq = 0.0;
      const double q = bump_proximity(x.s, b, track, &dq);
      const double excess = x.v - b.v_limit;
      if (q <= 0.0 || excess <= 0.0) continue;
      // (q * excess)^2 = excess^2 * proximity with proximity = q^2.
      Residual r;
      const double k = std::sqrt(scale * cfg.w_bump);
      r.r = k * q * excess;
      r.dx(EgoState::kS) = k * dq * excess;
      r.dx(EgoState::kV) = k * q;
      out.push_back(r);
    }
  }
}

void terminal_residuals(const EgoState& x, const PlannerConfig& cfg, std::vector<Residual>& out) {
  auto add = [&](double w, double value, int index) {
    if (w <= 0.0) return;
    Residual r;
    const double k = std::sqrt(cfg.terminal_scale * w);
    r.r = k * value;
    r.dx(index) = k;
    out.push_back(r);
  };
  add(cfg.w_ey, x.e_y, EgoState::kEy);
  add(cfg.w_epsi, x.e_psi, EgoState::kEpsi);
  add(cfg.w_v, x.v - cfg.v_cruise, EgoState::kV);
}

double sum_squares(const std::vector<Residual>& rs) {
  double c = 0.0;
  for (const auto& r : rs) c += r.r * r.r;
  return c;
}

// Rollout with state sensitivities S_k = d x_k / d U (5 x 2N).
struct Sensitive {
  std::vector<EgoState> states;
  std::vector<Eigen::Matrix<double, 5, Eigen::Dynamic>> sens;
};

Sensitive rollout_sensitive(const EgoState& x0, const std::vector<ControlInput>& inputs, const PlannerConfig& cfg,
                            const Track& track) {
  const int n = static_cast<int>(inputs.size());
  Sensitive out;
  out.states.reserve(n + 1);
  out.sens.reserve(n + 1);
  out.states.push_back(x0);
  out.sens.emplace_back(Eigen::Matrix<double, 5, Eigen::Dynamic>::Zero(5, 2 * n));
  for (int k = 0; k < n; ++k) {
    StepJacobian jac;
    out.states.push_back(integrate_rk4(out.states.back(), inputs[k], track, cfg.dt, cfg.vehicle.wheelbase, &jac));
    Eigen::Matrix<double, 5, Eigen::Dynamic> s = jac.dx * out.sens.back();
    s.middleCols(2 * k, 2) += jac.du;
    out.sens.push_back(std::move(s));
  }
  return out;
}

// One linearised inequality c(U) <= 0: value and gradient in U.
struct Row {
  double value;
  Eigen::RowVectorXd grad;
  bool soft;
};

struct ObstacleSide {
  const ObstacleConstraint* obstacle;
  double side;  // +1 pass on the left (larger e_y), -1 on the right
};

// Keep-out as a lateral corridor: side * (e_y - e_y_obs) >= sqrt(R^2 - ds^2)
// whenever |ds| < R. Implies Euclidean distance >= R.
bool corridor_value(const EgoState& x, double t, const ObstacleSide& os, const PlannerConfig& cfg, const Track& track,
                    double& value, double& d_ds, double& d_ey) {
  const Eigen::Vector2d p = os.obstacle->position_at(t);
  const double radius = os.obstacle->radius + cfg.r_ego;
  const double ds = track.s_difference(x.s, p(0));
  if (std::abs(ds) >= radius) return false;
  const double g = std::sqrt(radius * radius - ds * ds);
  value = g - os.side * (x.e_y - p(1));
  d_ey = -os.side;
  // Linearised with s frozen at the rollout. The true s slope is unbounded
  // at the corridor ends and makes braking short of the obstacle look like
  // the cheapest way out.
  d_ds = 0.0;
  return true;
}

std::vector<ObstacleSide> choose_sides(const std::vector<EgoState>& states, const std::vector<ObstacleConstraint>& obs,
                                       const PlannerConfig& cfg, const Track& track) {
  std::vector<ObstacleSide> out;
  for (const auto& ob : obs) {
    double best = std::numeric_limits<double>::infinity();
    double de = 0.0;
    for (std::size_t k = 0; k < states.size(); ++k) {
      const Eigen::Vector2d p = ob.position_at(k * cfg.dt);
      const double ds = std::abs(track.s_difference(states[k].s, p(0)));
      if (ds < best) {
        best = ds;
        de = states[k].e_y - p(1);
      }
    }
    double side;
    if (std::abs(de) > 0.1) {
      side = de > 0.0 ? 1.0 : -1.0;
    } else {
      // Nearly head-on: take the side with more room, left on a tie.
      const double radius = ob.radius + cfg.r_ego;
      const double room_left = cfg.lane_half_width - (ob.e_y + radius);
      const double room_right = (ob.e_y - radius) + cfg.lane_half_width;
      side = room_left + 1e-9 >= room_right ? 1.0 : -1.0;
    }
    out.push_back({&ob, side});
  }
  return out;
}

// Nonlinear constraint rows at the rollout, linearised in U.
std::vector<Row> build_rows(const Sensitive& ro, const std::vector<ControlInput>& inputs,
                            const std::vector<ObstacleSide>& sides, const PlannerConfig& cfg, const Track& track) {
  const int n = static_cast<int>(inputs.size());
  const auto& vp = cfg.vehicle;
  std::vector<Row> rows;
  auto input_row = [&](int k, int ch, double sign, double value) {
    Row r{value, Eigen::RowVectorXd::Zero(2 * n), false};
    r.grad(2 * k + ch) = sign;
    rows.push_back(std::move(r));
  };
  auto state_row = [&](int k, int index, double sign, double value) {
    rows.push_back({value, sign * ro.sens[k].row(index), true});
  };
  for (int k = 0; k < n; ++k) {
    const ControlInput& u = inputs[k];
    input_row(k, 0, 1.0, u.a - vp.a_max);
    input_row(k, 0, -1.0, vp.a_min - u.a);
    input_row(k, 1, 1.0, u.omega_delta - vp.omega_delta_max);
    input_row(k, 1, -1.0, -u.omega_delta - vp.omega_delta_max);

    const EgoState& x = ro.states[k + 1];
    state_row(k + 1, EgoState::kEy, 1.0, x.e_y - cfg.lane_half_width);
    state_row(k + 1, EgoState::kEy, -1.0, -x.e_y - cfg.lane_half_width);
    state_row(k + 1, EgoState::kDelta, 1.0, x.delta - vp.delta_max);
    state_row(k + 1, EgoState::kDelta, -1.0, -x.delta - vp.delta_max);
    state_row(k + 1, EgoState::kV, -1.0, -x.v);
    state_row(k + 1, EgoState::kV, 1.0, x.v - vp.v_max);

    for (const auto& os : sides) {
      double value, d_ds, d_ey;
      if (!corridor_value(x, (k + 1) * cfg.dt, os, cfg, track, value, d_ds, d_ey)) continue;
      rows.push_back(
          {value, d_ds * ro.sens[k + 1].row(EgoState::kS) + d_ey * ro.sens[k + 1].row(EgoState::kEy), true});
    }
  }
  const EgoState& xn = ro.states[n];
  state_row(n, EgoState::kEpsi, 1.0, xn.e_psi - cfg.terminal_e_psi_max);
  state_row(n, EgoState::kEpsi, -1.0, -xn.e_psi - cfg.terminal_e_psi_max);
  return rows;
}

// Sum of positive constraint values for the merit function.
double violation(const std::vector<EgoState>& states, const std::vector<ControlInput>& inputs,
                 const std::vector<ObstacleSide>& sides, const PlannerConfig& cfg, const Track& track) {
  double v = 0.0;
  const int n = static_cast<int>(inputs.size());
  for (int k = 0; k < n; ++k) {
    const auto h = constraint_values(states[k + 1], inputs[k], cfg.lane_half_width, cfg.vehicle);
    v += h.cwiseMax(0.0).sum();
    for (const auto& os : sides) {
      double value, d_ds, d_ey;
      if (corridor_value(states[k + 1], (k + 1) * cfg.dt, os, cfg, track, value, d_ds, d_ey)) {
        v += std::max(0.0, value);
      }
    }
  }
  v += std::max(0.0, std::abs(states[n].e_psi) - cfg.terminal_e_psi_max);
  return v;
}

std::vector<ControlInput> unstack(const Eigen::VectorXd& u) {
  std::vector<ControlInput> out(u.size() / 2);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {u(2 * k), u(2 * k + 1)};
  return out;
}

Eigen::VectorXd stack(const std::vector<ControlInput>& inputs) {
  Eigen::VectorXd u(2 * inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) u.segment<2>(2 * k) = inputs[k].vector();
  return u;
}

// Cost residuals of the whole horizon and their Jacobian in U.
void horizon_residuals(const Sensitive& ro, const std::vector<ControlInput>& inputs, const PlannerConfig& cfg,
                       const std::vector<ObstacleConstraint>& obstacles, const Track& track, Eigen::VectorXd& r,
                       Eigen::MatrixXd& jac) {
  const int n = static_cast<int>(inputs.size());
  std::vector<Residual> rs;
  std::vector<int> stage_of;
  for (int k = 0; k < n; ++k) {
    const std::size_t before = rs.size();
    stage_residuals(ro.states[k], inputs[k], k * cfg.dt, cfg.dt, cfg, obstacles, track, rs);
    stage_of.insert(stage_of.end(), rs.size() - before, k);
  }
  const std::size_t before = rs.size();
  terminal_residuals(ro.states[n], cfg, rs);
  stage_of.insert(stage_of.end(), rs.size() - before, n);

  r.resize(rs.size());
  jac.setZero(rs.size(), 2 * n);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const int k = stage_of[i];
    r(i) = rs[i].r;
    jac.row(i) = rs[i].dx.transpose() * ro.sens[k];
    if (k < n) jac.block<1, 2>(i, 2 * k) += rs[i].du.transpose();
  }
}

EgoState clamp_command_state(const EgoState& x, const VehicleParams& vp) {
  EgoState out = x;
  out.delta = std::clamp(x.delta, -vp.delta_max, vp.delta_max);
  out.v = std::clamp(x.v, 0.0, vp.v_max);
  return out;
}

}  // namespace

void PlannerConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("planner config: " + what); };
  if (horizon_steps < 2) fail("horizon_steps must be >= 2");
  if (!(dt > 0.0)) fail("dt must be > 0");
  for (double w : {w_ey, w_epsi, w_v, w_a, w_omega, w_obs, w_bump, terminal_scale})
    if (!(w >= 0.0)) fail("weights must be >= 0");
  if (!(d_safe > 0.0)) fail("d_safe must be > 0");
  if (!(r_ego >= 0.0)) fail("r_ego must be >= 0");
  if (!(lane_half_width > 0.0)) fail("lane_half_width must be > 0");
  if (sqp_iters < 1) fail("sqp_iters must be >= 1");
  for (const auto& b : bumps)
    if (!(b.half_length > 0.0)) fail("bump half_length must be > 0");
  vehicle.validate();
}

Eigen::Vector2d ObstacleConstraint::position_at(double t) const {
  return {s + speed * std::cos(heading) * t, e_y + speed * std::sin(heading) * t};
}

double Trajectory::total_cost() const {
  double c = terminal_cost;
  for (double s : stage_costs) c += s;
  return c;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::max_iter:
      return "max_iter";
    case SolveStatus::infeasible_fallback:
      return "infeasible_fallback";
  }
  return "unknown";
}

double stage_cost(const EgoState& x, const ControlInput& u, const PlannerConfig& cfg,
                  const std::vector<ObstacleConstraint>& obstacles, const Track& track, double t) {
  std::vector<Residual> rs;
  stage_residuals(x, u, t, 1.0, cfg, obstacles, track, rs);
  return sum_squares(rs);
}

double terminal_cost(const EgoState& x, const PlannerConfig& cfg) {
  std::vector<Residual> rs;
  terminal_residuals(x, cfg, rs);
  return sum_squares(rs);
}

Trajectory rollout(const EgoState& x0, const std::vector<ControlInput>& inputs, const PlannerConfig& cfg,
                   const std::vector<ObstacleConstraint>& obstacles, const Track& track) {
  Trajectory tr;
  tr.inputs = inputs;
  tr.states.reserve(inputs.size() + 1);
  tr.states.push_back(x0);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    tr.stage_costs.push_back(cfg.dt * stage_cost(tr.states[k], inputs[k], cfg, obstacles, track, k * cfg.dt));
    tr.states.push_back(integrate_rk4(tr.states[k], inputs[k], track, cfg.dt, cfg.vehicle.wheelbase));
    tr.residuals.push_back(constraint_values(tr.states[k + 1], inputs[k], cfg.lane_half_width, cfg.vehicle).maxCoeff());
  }
  tr.terminal_cost = terminal_cost(tr.states.back(), cfg);
  return tr;
}

double total_cost(const EgoState& x0, const std::vector<ControlInput>& inputs, const PlannerConfig& cfg,
                  const std::vector<ObstacleConstraint>& obstacles, const Track& track) {
  return rollout(x0, inputs, cfg, obstacles, track).total_cost();
}

Eigen::VectorXd cost_gradient(const EgoState& x0, const std::vector<ControlInput>& inputs, const PlannerConfig& cfg,
                              const std::vector<ObstacleConstraint>& obstacles, const Track& track) {
  const Sensitive ro = rollout_sensitive(x0, inputs, cfg, track);
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  horizon_residuals(ro, inputs, cfg, obstacles, track, r, jac);
  return 2.0 * jac.transpose() * r;
}

std::vector<ControlInput> shift_inputs(const std::vector<ControlInput>& inputs) {
  if (inputs.empty()) return {};
  std::vector<ControlInput> out(inputs.begin() + 1, inputs.end());
  out.push_back(inputs.back());
  return out;
}

PlanResult solve(const EgoState& x0, const std::vector<ObstacleConstraint>& obstacles, const Track& track,
                 const PlannerConfig& cfg, const Trajectory* warm_start) {
  const auto t_start = std::chrono::steady_clock::now();
  const int n = cfg.horizon_steps;
  const auto& vp = cfg.vehicle;

  std::vector<ControlInput> inputs(n);
  if (warm_start && static_cast<int>(warm_start->inputs.size()) == n) inputs = shift_inputs(warm_start->inputs);
  for (auto& u : inputs) {
    u.a = std::clamp(u.a, vp.a_min, vp.a_max);
    u.omega_delta = std::clamp(u.omega_delta, -vp.omega_delta_max, vp.omega_delta_max);
  }

  PlanResult out;
  Sensitive ro = rollout_sensitive(x0, inputs, cfg, track);
  const std::vector<ObstacleSide> sides = choose_sides(ro.states, obstacles, cfg, track);

  double mu = -1.0;
  double merit = 0.0;
  bool any_solved = false;
  bool converged = false;

  // Past the budget, keep going only while the iterate is still infeasible.
  auto keep_going = [&](int it) {
    if (it < cfg.sqp_iters) return true;
    return it < 3 * cfg.sqp_iters && violation(ro.states, inputs, sides, cfg, track) > 1e-9;
  };
  for (int it = 0; keep_going(it); ++it) {
    Eigen::VectorXd r;
    Eigen::MatrixXd jr;
    horizon_residuals(ro, inputs, cfg, obstacles, track, r, jr);
    const std::vector<Row> rows = build_rows(ro, inputs, sides, cfg, track);
    const int m = static_cast<int>(rows.size());
    const int nu = 2 * n;

    QpProblem qp;
    qp.H = 2.0 * jr.transpose() * jr;
    qp.H.diagonal().array() += 1e-6;
    qp.g = 2.0 * jr.transpose() * r;
    qp.G.resize(m, nu);
    qp.h.resize(m);
    for (int i = 0; i < m; ++i) {
      qp.G.row(i) = rows[i].grad;
      qp.h(i) = -rows[i].value;
    }

    QpResult qr = solve_qp(qp);
    out.info.qp_iterations += qr.iterations;
    bool relaxed = false;
    if (qr.status != QpStatus::solved) {
      // Elastic pass: every state row gets its own slack priced linearly.
      std::vector<int> soft;
      for (int i = 0; i < m; ++i)
        if (rows[i].soft) soft.push_back(i);
      const int ns = static_cast<int>(soft.size());
      QpProblem el;
      el.H = Eigen::MatrixXd::Zero(nu + ns, nu + ns);
      el.H.topLeftCorner(nu, nu) = qp.H;
      el.H.diagonal().tail(ns).array() = 1e-6;
      el.g = Eigen::VectorXd::Zero(nu + ns);
      el.g.head(nu) = qp.g;
      el.g.tail(ns).setConstant(cfg.slack_weight);
      el.G = Eigen::MatrixXd::Zero(m + ns, nu + ns);
      el.G.topLeftCorner(m, nu) = qp.G;
      el.h = Eigen::VectorXd::Zero(m + ns);
      el.h.head(m) = qp.h;
      for (int j = 0; j < ns; ++j) {
        el.G(soft[j], nu + j) = -1.0;
        el.G(m + j, nu + j) = -1.0;
      }
      QpSettings st;
      st.max_iter = 100;
      qr = solve_qp(el, st);
      out.info.qp_iterations += qr.iterations;
      if (qr.status != QpStatus::solved) break;
      qr.z = qr.z.head(m).eval();
      qr.x = qr.x.head(nu).eval();
      relaxed = true;
      out.info.relaxed = true;
    }
    any_solved = true;

    if (mu < 0.0) {
      mu = relaxed ? cfg.slack_weight : std::max(100.0, 2.0 * (qr.z.size() ? qr.z.maxCoeff() : 0.0));
      merit = r.squaredNorm() + mu * violation(ro.states, inputs, sides, cfg, track);
      out.info.merit.push_back(merit);
    }

    const Eigen::VectorXd u0 = stack(inputs);
    const Eigen::VectorXd step = qr.x;
    bool accepted = false;
    for (double alpha = 1.0; alpha > 1e-3; alpha *= 0.5) {
      const std::vector<ControlInput> trial = unstack(u0 + alpha * step);
      Sensitive tro;
      try {
        tro = rollout_sensitive(x0, trial, cfg, track);
      } catch (const SingularityError&) {
        continue;
      }
      Eigen::VectorXd tr;
      Eigen::MatrixXd tj;
      horizon_residuals(tro, trial, cfg, obstacles, track, tr, tj);
      const double trial_merit = tr.squaredNorm() + mu * violation(tro.states, trial, sides, cfg, track);
      if (trial_merit <= merit) {
        inputs = trial;
        ro = std::move(tro);
        const double decrease = merit - trial_merit;
        merit = trial_merit;
        accepted = true;
        out.info.merit.push_back(merit);
        if (alpha * step.lpNorm<Eigen::Infinity>() < 1e-4 || decrease < 1e-10 * (1.0 + merit)) converged = true;
        break;
      }
    }
    out.info.sqp_iterations = it + 1;
    if (!accepted) {
      converged = step.lpNorm<Eigen::Infinity>() < 1e-4;
      break;
    }
    if (converged) break;
  }

  out.trajectory = rollout(x0, inputs, cfg, obstacles, track);
  out.trajectory.relaxed = out.info.relaxed;
  if (!any_solved) {
    out.command.delta_r = std::clamp(x0.delta, -vp.delta_max, vp.delta_max);
    out.command.v_r = std::max(0.0, x0.v + vp.a_min * cfg.dt);
    out.command.status = SolveStatus::infeasible_fallback;
  } else {
    const EgoState c = clamp_command_state(out.trajectory.states[1], vp);
    out.command.delta_r = c.delta;
    out.command.v_r = c.v;
    out.command.status = converged ? SolveStatus::converged : SolveStatus::max_iter;
  }
  out.command.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

SolutionReport check_solution(const Trajectory& traj, const PlannerConfig& cfg, const Track& track) {
  SolutionReport rep;
  const std::size_t n = traj.inputs.size();
  if (traj.states.size() != n + 1) {
    rep.violations.push_back("state count does not match input count");
    return rep;
  }
  auto note = [&](const std::string& what, std::size_t k, double value) {
    std::ostringstream os;
    os << what << " at stage " << k << ": " << value;
    rep.violations.push_back(os.str());
  };
  for (std::size_t k = 0; k < n; ++k) {
    const EgoState next = integrate_rk4(traj.states[k], traj.inputs[k], track, cfg.dt, cfg.vehicle.wheelbase);
    const Vector5d a = next.vector(), b = traj.states[k + 1].vector();
    Vector5d d = a - b;
    d(0) = track.s_difference(a(0), b(0));
    d(2) = wrap_angle(d(2));
    const double defect = d.lpNorm<Eigen::Infinity>();
    rep.max_defect = std::max(rep.max_defect, defect);
    if (defect > 1e-8) note("dynamics defect", k + 1, defect);

    static const char* names[] = {"road bound", "steering bound", "acceleration bound", "deceleration bound",
                                  "steering rate bound", "negative speed", "speed bound"};
    const auto h = constraint_values(traj.states[k + 1], traj.inputs[k], cfg.lane_half_width, cfg.vehicle);
    for (int i = 0; i < 7; ++i) {
      rep.max_constraint = std::max(rep.max_constraint, h(i));
      if (h(i) > 1e-6) note(names[i], k + 1, h(i));
    }
  }
  const EgoState& xn = traj.states.back();
  if (std::abs(xn.e_y) > cfg.lane_half_width + 1e-6) note("terminal lateral offset", n, xn.e_y);
  if (std::abs(xn.e_psi) > cfg.terminal_e_psi_max + 1e-6) note("terminal heading error", n, xn.e_psi);
  return rep;
}

Planner::Planner(const Track& track, PlannerConfig cfg) : track_(track), cfg_(std::move(cfg)) { cfg_.validate(); }

PlanResult Planner::plan(const EgoState& x0, const std::vector<ObstacleConstraint>& obstacles) {
  PlanResult r = solve(x0, obstacles, track_, cfg_, has_warm_ ? &last_ : nullptr);
  if (r.command.status != SolveStatus::infeasible_fallback) {
    last_ = r.trajectory;
    has_warm_ = true;
  } else {
    has_warm_ = false;
  }
  return r;
}

}  // namespace roadframe
