#pragma once

// Graphical mean curvature flow on a fixed base grid.
//
// The surface moves with normal velocity -H nu. At a fixed base point the
// height changes at the non-parametric rate u_t = -H / Theta; following the
// normal trajectories (material rate) the base point drifts with horizontal
// velocity H Theta h^-2 grad_N u, so D_t w = w_t + H Theta h^-2 <grad_N u, grad_N w>.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wpmcf/barrier.hpp"
#include "wpmcf/base.hpp"
#include "wpmcf/errors.hpp"
#include "wpmcf/geometry.hpp"
#include "wpmcf/warp.hpp"

namespace wpmcf {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ResidualChecks {
  bool cor26 = true;
  bool thm31 = true;
  bool ineq32 = true;
};

struct FlowConfig {
  double dt_safety = 0.25;
  double t_end = 5.0;
  int output_stride = 100;
  double theta_floor = 1e-3;
  double convergence_eps = 1e-4;
  ResidualChecks residual_checks;
  double tol_avoid = 1e-3;
  double tol_angle = 1e-3;
  double barrier_dt = 1e-3;
  /// Distance bound a0 of the initial surface; defaults to sup |u0|.
  std::optional<double> a0;
  /// Keep every state_stride-th step as a sampled state (0: initial and final only).
  int state_stride = 0;

  void validate() const {
    if (!(dt_safety > 0.0 && dt_safety <= 1.0)) throw ConfigError("flow: dt_safety must lie in (0, 1]");
    if (!(t_end > 0.0)) throw ConfigError("flow: t_end must be > 0");
    if (output_stride < 1) throw ConfigError("flow: output_stride must be >= 1");
    if (!(theta_floor > 0.0 && theta_floor < 1.0)) throw ConfigError("flow: theta_floor must lie in (0, 1)");
    if (!(convergence_eps > 0.0)) throw ConfigError("flow: convergence_eps must be > 0");
    if (!(tol_avoid > 0.0) || !(tol_angle > 0.0)) throw ConfigError("flow: tolerances must be > 0");
    if (!(barrier_dt > 0.0)) throw ConfigError("flow: barrier_dt must be > 0");
    if (a0 && !(*a0 >= 0.0)) throw ConfigError("flow: a0 must be >= 0");
    if (state_stride < 0) throw ConfigError("flow: state_stride must be >= 0");
  }
};

/// Non-parametric rate -H/Theta together with the step-size ingredients.
struct GraphRate {
  ScalarField u_dot;
  ScalarField H;
  ScalarField theta;
  double min_theta = 1.0;
  double max_diffusion = 0.0;
  double max_abs_H = 0.0;
  double max_A_sq = 0.0;
};

inline GraphRate graph_rate(const GraphState& s) {
  const BaseManifold& b = s.base();
  detail::require_in_domain(s);
  GraphRate out{ScalarField(s.u.base_ptr()), ScalarField(s.u.base_ptr()), ScalarField(s.u.base_ptr())};
  const auto emit = [&](std::size_t k, const PointGeometry& p) {
    out.u_dot[k] = -p.H / p.theta;
    out.H[k] = p.H;
    out.theta[k] = p.theta;
    out.min_theta = std::min(out.min_theta, p.theta);
    out.max_diffusion = std::max(out.max_diffusion, p.diffusion_norm);
    out.max_abs_H = std::max(out.max_abs_H, std::abs(p.H));
    out.max_A_sq = std::max(out.max_A_sq, p.A_sq);
  };
  if (b.is_torus() && b.dim() == 2) {
    // Row sweep with the same stencils as BaseManifold::jet_at.
    const LocalChart chart = b.chart_at(0);
    const int nx = b.nx();
    const int ny = b.ny();
    const double ix = 1.0 / b.spacing(0);
    const double iy = 1.0 / b.spacing(1);
    const double* u = s.u.values().data();
    for (int j = 0; j < ny; ++j) {
      const double* row = u + static_cast<std::size_t>(j) * nx;
      const double* up = u + static_cast<std::size_t>(j + 1 == ny ? 0 : j + 1) * nx;
      const double* dn = u + static_cast<std::size_t>(j == 0 ? ny - 1 : j - 1) * nx;
      for (int i = 0; i < nx; ++i) {
        const int ip = (i + 1 == nx) ? 0 : i + 1;
        const int im = (i == 0) ? nx - 1 : i - 1;
        NodeJet jet;
        jet.value = row[i];
        jet.d1[0] = 0.5 * (row[ip] - row[im]) * ix;
        jet.d1[1] = 0.5 * (up[i] - dn[i]) * iy;
        jet.d2[0][0] = (row[ip] - 2.0 * row[i] + row[im]) * ix * ix;
        jet.d2[1][1] = (up[i] - 2.0 * row[i] + dn[i]) * iy * iy;
        jet.d2[0][1] = jet.d2[1][0] = 0.25 * (up[ip] - up[im] - dn[ip] + dn[im]) * ix * iy;
        emit(static_cast<std::size_t>(j) * nx + i,
             point_geometry_k<2>(chart, jet, s.warp.eval_unchecked(row[i])));
      }
    }
    return out;
  }
  for (std::size_t k = 0; k < s.u.size(); ++k)
    emit(k, point_geometry(b.chart_at(k), b.jet_at(s.u.values(), k), s.warp.eval_unchecked(s.u[k])));
  return out;
}

/// dt = safety * dx^2 * min Theta^2 / (2 m * max eigenvalue of gamma^-1).
inline double stable_dt(const BaseManifold& b, const GraphRate& rate, double safety) {
  double dx = b.spacing(0);
  for (int a = 1; a < b.axes(); ++a) dx = std::min(dx, b.spacing(a));
  const double diffusion = std::max(rate.max_diffusion, std::numeric_limits<double>::min());
  return safety * dx * dx * rate.min_theta * rate.min_theta / (2.0 * b.dim() * diffusion);
}

namespace detail {

inline GraphRate checked_rate(const GraphState& s, double theta_floor) {
  GraphRate r = [&] {
    try {
      return graph_rate(s);
    } catch (const DomainError& e) {
      throw DomainExit(e.what());
    }
  }();
  if (r.min_theta < theta_floor) {
    std::ostringstream msg;
    msg << "min Theta " << r.min_theta << " below floor " << theta_floor << " at t = " << s.t;
    throw GraphicalityLost(msg.str());
  }
  return r;
}

/// Heun step given the rate already evaluated at s.
inline GraphState heun_step(const GraphState& s, double dt, const GraphRate& k1, double theta_floor) {
  GraphState mid{s.u, s.warp, s.t + dt};
  for (std::size_t k = 0; k < mid.u.size(); ++k) mid.u[k] += dt * k1.u_dot[k];
  const GraphRate k2 = checked_rate(mid, theta_floor);
  GraphState next{s.u, s.warp, s.t + dt};
  for (std::size_t k = 0; k < next.u.size(); ++k) next.u[k] += 0.5 * dt * (k1.u_dot[k] + k2.u_dot[k]);
  if (!next.u.all_finite()) throw DomainExit("non-finite height after step");
  return next;
}

}  // namespace detail

/// One explicit Heun (RK2) step of u_t = -H/Theta. Throws GraphicalityLost
/// when Theta drops below the floor and DomainExit when u leaves the warp domain.
inline GraphState step(const GraphState& s, double dt, double theta_floor = 1e-3) {
  if (!(dt > 0.0)) throw ConfigError("step: dt must be > 0");
  const GraphRate k1 = detail::checked_rate(s, theta_floor);
  GraphState next = detail::heun_step(s, dt, k1, theta_floor);
  try {
    detail::require_in_domain(next);
  } catch (const DomainError& e) {
    throw DomainExit(e.what());
  }
  return next;
}

// ---------------------------------------------------------------------------
// Evolution-equation residuals

/// D_t w = w_t + H Theta h^-2 <grad_N u, grad_N w>.
inline ScalarField material_derivative(const GraphState& s, const ScalarField& H, const ScalarField& w,
                                       const ScalarField& w_dot) {
  require_same_base(s.u, w, "material_derivative");
  require_same_base(s.u, w_dot, "material_derivative");
  const BaseManifold& b = s.base();
  ScalarField out(s.u.base_ptr());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const LocalChart c = b.chart_at(k);
    const auto gu = b.gradient_at(s.u.values(), k);
    const auto gw = b.gradient_at(w.values(), k);
    const double h2 = std::pow(s.warp.eval_unchecked(s.u[k]).h, 2);
    double uu = 0.0, uw = 0.0;
    for (int i = 0; i < c.gridded; ++i) {
      uu += gu[i] * gu[i] / c.metric[i];
      uw += gu[i] * gw[i] / c.metric[i];
    }
    const double theta = std::sqrt(h2 / (h2 + uu));
    out[k] = w_dot[k] + H[k] * theta * uw / h2;
  }
  return out;
}

/// f = Theta^2 as a field.
inline ScalarField theta_squared(const GraphState& s) {
  ScalarField f = compute_theta(s);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] *= f[k];
  return f;
}

/// Fixed-point time derivative of f = h^2 / (h^2 + |grad_N u|^2) given u_t,
/// by the chain rule with central differences of u_t.
inline ScalarField f_time_derivative(const GraphState& s, const ScalarField& u_dot) {
  require_same_base(s.u, u_dot, "f_time_derivative");
  const BaseManifold& b = s.base();
  ScalarField out(s.u.base_ptr());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const LocalChart c = b.chart_at(k);
    const auto gu = b.gradient_at(s.u.values(), k);
    const auto gv = b.gradient_at(u_dot.values(), k);
    const WarpJet w = s.warp.eval_unchecked(s.u[k]);
    const double h2 = w.h * w.h;
    double P = 0.0, Pdot = 0.0;
    for (int i = 0; i < c.gridded; ++i) {
      P += gu[i] * gu[i] / c.metric[i];
      Pdot += 2.0 * gu[i] * gv[i] / c.metric[i];
    }
    const double h2dot = 2.0 * w.h * w.dh * u_dot[k];
    out[k] = (h2dot * P - h2 * Pdot) / ((h2 + P) * (h2 + P));
  }
  return out;
}

/// D_t u - Delta_S u + (h'/h)(n-2+Theta^2), with D_t u reconstructed from u_t.
inline ScalarField residual_cor26(const GraphState& s, const ScalarField& u_dot) {
  const GraphGeometry g = compute_geometry(s);
  const ScalarField Dt_u = material_derivative(s, g.H, s.u, u_dot);
  const int n = s.n();
  ScalarField out(s.u.base_ptr());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const WarpJet w = s.warp.eval_unchecked(s.u[k]);
    const double th = g.theta[k];
    out[k] = Dt_u[k] - g.surf_lap_u[k] + (w.dh / w.h) * (n - 2.0 + th * th);
  }
  return out;
}

/// Terms of the evolution equation of f = Theta^2.
struct ThetaSquaredTerms {
  ScalarField lhs;            // D_t f - Delta_S f
  ScalarField gradient_term;  // <(2h'/h) n - grad f / 2f, grad f>
  ScalarField reaction;       // every other term of the right-hand side
  ScalarField G;              // 2(n-1)(1-f)/h^2 (c f - h'^2)
};

inline ThetaSquaredTerms theta_squared_terms(const GraphState& s, const ScalarField& f_dot, double c,
                                             double f_floor = 0.0) {
  const GraphGeometry g = compute_geometry(s);
  ScalarField f = g.theta;
  for (std::size_t k = 0; k < f.size(); ++k) f[k] *= f[k];
  if (f.min() < f_floor) {
    std::ostringstream msg;
    msg << "theta_squared_terms: min f " << f.min() << " below floor " << f_floor;
    throw NumericalError(msg.str());
  }
  const ScalarField Dt_f = material_derivative(s, g.H, f, f_dot);
  const ScalarField lap_f = surface_laplacian(s, f);
  const ScalarField n_dot_grad_f = normal_pairing(s, f);
  const ScalarField grad_f_sq = induced_gradient_sq(s, f);
  const int n = s.n();
  const double ric = s.base().ric_unit();
  ThetaSquaredTerms t{ScalarField(s.u.base_ptr()), ScalarField(s.u.base_ptr()), ScalarField(s.u.base_ptr()),
                      ScalarField(s.u.base_ptr())};
  for (std::size_t k = 0; k < f.size(); ++k) {
    const WarpJet w = s.warp.eval_unchecked(s.u[k]);
    const double lg = w.dh / w.h;
    const double h2 = w.h * w.h;
    const double fk = f[k];
    t.lhs[k] = Dt_f[k] - lap_f[k];
    t.gradient_term[k] = 2.0 * lg * n_dot_grad_f[k] - grad_f_sq[k] / (2.0 * fk);
    const double A_sq = g.A_sq[k];
    t.reaction[k] = 2.0 * A_sq * fk - 4.0 * lg * std::sqrt(fk) * g.H[k] + 2.0 * (n - 1.0) * lg * lg * fk +
                    2.0 * fk * (1.0 - fk) / h2 * ((n - 1.0) * w.log_concavity() + ric);
    t.G[k] = 2.0 * (n - 1.0) * (1.0 - fk) / h2 * (c * fk - w.dh * w.dh);
  }
  return t;
}

/// (D_t f - Delta_S f) - RHS of the exact evolution equation of f = Theta^2.
inline ScalarField residual_thm31(const GraphState& s, const ScalarField& f_dot, double f_floor = 0.0) {
  const ThetaSquaredTerms t = theta_squared_terms(s, f_dot, 0.0, f_floor);
  ScalarField out(s.u.base_ptr());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = t.lhs[k] - t.gradient_term[k] - t.reaction[k];
  return out;
}

/// (D_t f - Delta_S f) - <(2h'/h) n - grad f/2f, grad f> - G(f, u); nonnegative
/// up to discretization error when the curvature condition holds with constant c.
inline ScalarField inequality_slack(const GraphState& s, const ScalarField& f_dot, double c,
                                    double f_floor = 0.0) {
  const ThetaSquaredTerms t = theta_squared_terms(s, f_dot, c, f_floor);
  ScalarField out(s.u.base_ptr());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = t.lhs[k] - t.gradient_term[k] - t.G[k];
  return out;
}

// ---------------------------------------------------------------------------
// Monitored runs

enum class FlowOutcome { converged, t_end_reached, graphicality_lost, domain_exit };

inline std::string to_string(FlowOutcome o) {
  switch (o) {
    case FlowOutcome::converged: return "converged";
    case FlowOutcome::t_end_reached: return "t_end_reached";
    case FlowOutcome::graphicality_lost: return "graphicality_lost";
    case FlowOutcome::domain_exit: return "domain_exit";
  }
  return "?";
}

struct DiagnosticsRecord {
  std::size_t step = 0;
  double t = 0.0;
  double dt = 0.0;
  double min_theta = 1.0;
  double sup_u = 0.0;
  double max_H = 0.0;
  double max_A_sq = 0.0;
  double res_cor26 = kNaN;
  double res_thm31 = kNaN;
  double ineq_slack_min = kNaN;
  double R = 0.0;
  double f_bar = 0.0;
  /// max over nodes of the distance outside the barrier envelope.
  double containment_excess = 0.0;
  /// min Theta^2 - f_bar(t).
  double angle_gap = 0.0;
};

struct FlowRun {
  std::vector<GraphState> states;
  std::vector<DiagnosticsRecord> diagnostics;
  BarrierSolution barrier;
  FlowOutcome outcome = FlowOutcome::t_end_reached;
  std::string message;
  double a0 = 0.0;
  double initial_min_theta = 1.0;
  double angle_threshold = 0.0;
  bool angle_condition = true;  // min Theta_0 >= threshold(a0)
  std::size_t steps = 0;
  double final_time = 0.0;
  double min_angle_gap = kInf;
  double max_containment_excess = -kInf;
  double min_ineq_slack = kInf;

  const GraphState& final_state() const { return states.back(); }
  bool containment_ok(double tol) const { return max_containment_excess <= tol; }
  bool angle_bound_ok(double tol) const { return min_angle_gap >= -tol; }
};

namespace detail {

inline double containment_excess(const GraphState& s, double R) {
  double e = -kInf;
  for (std::size_t k = 0; k < s.u.size(); ++k) {
    const double u = s.u[k];
    e = std::max(e, s.warp.half_open() ? std::max(u - R, -u) : std::abs(u) - R);
  }
  return e;
}

inline DiagnosticsRecord diagnose(const GraphState& s, const GraphRate& rate, std::size_t step_index,
                                  double dt, const FlowConfig& cfg, const BarrierSolution& barrier,
                                  double c) {
  DiagnosticsRecord d;
  d.step = step_index;
  d.t = s.t;
  d.dt = dt;
  d.min_theta = rate.min_theta;
  d.sup_u = s.u.max_abs();
  d.max_H = rate.max_abs_H;
  d.max_A_sq = rate.max_A_sq;
  d.R = barrier.R_at(std::min(s.t, barrier.t_end()));
  d.f_bar = barrier.f_bar_at(std::min(s.t, barrier.t_end()));
  d.containment_excess = containment_excess(s, d.R);
  d.angle_gap = rate.min_theta * rate.min_theta - d.f_bar;
  const auto& rc = cfg.residual_checks;
  if (rc.cor26) d.res_cor26 = residual_cor26(s, rate.u_dot).max_abs();
  if (rc.thm31 || rc.ineq32) {
    const ScalarField f_dot = f_time_derivative(s, rate.u_dot);
    const ThetaSquaredTerms t = theta_squared_terms(s, f_dot, c);
    if (rc.thm31) {
      double m = 0.0;
      for (std::size_t k = 0; k < f_dot.size(); ++k)
        m = std::max(m, std::abs(t.lhs[k] - t.gradient_term[k] - t.reaction[k]));
      d.res_thm31 = m;
    }
    if (rc.ineq32) {
      double m = kInf;
      for (std::size_t k = 0; k < f_dot.size(); ++k) m = std::min(m, t.lhs[k] - t.gradient_term[k] - t.G[k]);
      d.ineq_slack_min = m;
    }
  }
  return d;
}

}  // namespace detail

/// Runs the flow from u0 until sup|u| < convergence_eps, t_end, or an abort.
/// The barrier is solved with a = max(a0, sup|u0|) and f0 = min Theta_0^2.
inline FlowRun run_flow(const ScalarField& u0, const WarpingFunction& warp, const FlowConfig& cfg) {
  cfg.validate();
  GraphState state{u0, warp, 0.0};
  detail::require_in_domain(state);
  const BaseManifold& b = u0.base();
  const int n = b.ambient_dim();
  const double c = std::max(0.0, b.rho());
  const double sup0 = u0.max_abs();
  const double a0 = cfg.a0.value_or(sup0);
  if (!warp.contains(a0)) throw DomainError("run_flow: a0 outside warp domain");

  GraphRate rate = graph_rate(state);
  const double a = std::max(a0, sup0);
  FlowRun run{{}, {}, solve_barrier(warp, n, a, std::min(1.0, rate.min_theta * rate.min_theta), cfg.t_end,
                                    cfg.barrier_dt),
              FlowOutcome::t_end_reached, {}};
  run.a0 = a0;
  run.initial_min_theta = rate.min_theta;
  run.angle_threshold = angle_threshold(warp, a0);
  run.angle_condition = rate.min_theta >= run.angle_threshold;
  run.states.push_back(state);

  const auto record = [&](const GraphState& s, const GraphRate& r, std::size_t idx, double dt) {
    DiagnosticsRecord d = detail::diagnose(s, r, idx, dt, cfg, run.barrier, c);
    run.min_angle_gap = std::min(run.min_angle_gap, d.angle_gap);
    run.max_containment_excess = std::max(run.max_containment_excess, d.containment_excess);
    if (!std::isnan(d.ineq_slack_min)) run.min_ineq_slack = std::min(run.min_ineq_slack, d.ineq_slack_min);
    run.diagnostics.push_back(d);
  };

  std::size_t steps = 0;
  double last_dt = 0.0;
  bool finished = false;
  if (sup0 < cfg.convergence_eps) {
    record(state, rate, 0, 0.0);
    run.outcome = FlowOutcome::converged;
    finished = true;
  }
  try {
    while (!finished) {
      if (rate.min_theta < cfg.theta_floor) {
        std::ostringstream msg;
        msg << "min Theta " << rate.min_theta << " below floor " << cfg.theta_floor << " at t = " << state.t;
        throw GraphicalityLost(msg.str());
      }
      if (steps % static_cast<std::size_t>(cfg.output_stride) == 0) record(state, rate, steps, last_dt);
      double dt = stable_dt(b, rate, cfg.dt_safety);
      const bool last = state.t + dt >= cfg.t_end;
      if (last) dt = cfg.t_end - state.t;
      GraphState next = detail::heun_step(state, dt, rate, cfg.theta_floor);
      if (last) next.t = cfg.t_end;
      state = std::move(next);
      ++steps;
      last_dt = dt;
      rate = detail::checked_rate(state, cfg.theta_floor);
      if (cfg.state_stride > 0 && steps % static_cast<std::size_t>(cfg.state_stride) == 0)
        run.states.push_back(state);
      const bool converged = state.u.max_abs() < cfg.convergence_eps;
      if (converged || last) {
        run.outcome = converged ? FlowOutcome::converged : FlowOutcome::t_end_reached;
        record(state, rate, steps, last_dt);
        finished = true;
      }
    }
  } catch (const GraphicalityLost& e) {
    run.outcome = FlowOutcome::graphicality_lost;
    run.message = e.what();
  } catch (const DomainExit& e) {
    run.outcome = FlowOutcome::domain_exit;
    run.message = e.what();
  }
  if (run.states.back().t != state.t) run.states.push_back(state);
  run.steps = steps;
  run.final_time = state.t;
  return run;
}

}  // namespace wpmcf
