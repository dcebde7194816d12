#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "wpmcf/flow.hpp"

using namespace wpmcf;
using std::numbers::pi;

namespace {

ScalarField wavy(const BasePtr& base, double offset, double amp) {
  return ScalarField::sample(base, [=](double x, double y) {
    return offset + amp * std::sin(2 * pi * x) * std::cos(2 * pi * y) + 0.5 * amp * std::cos(2 * pi * (x - y));
  });
}

double max_diff(const ScalarField& a, const ScalarField& b) {
  double e = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) e = std::max(e, std::abs(a[k] - b[k]));
  return e;
}

FlowConfig quiet_config() {
  FlowConfig cfg;
  cfg.residual_checks = {false, false, false};
  return cfg;
}

}  // namespace

TEST(Step, SliceStaysSlice) {
  const auto base = make_flat_torus({16, 16});
  const GraphState s{ScalarField(base, 0.5), make_cosh_warp(), 0.0};
  const GraphState next = step(s, 1e-3);
  EXPECT_DOUBLE_EQ(next.t, 1e-3);
  EXPECT_EQ(next.u.max() - next.u.min(), 0.0);
  const double rate = -2.0 * std::tanh(0.5);
  const double mid = 0.5 + 1e-3 * rate;
  EXPECT_NEAR(next.u[0], 0.5 + 0.5e-3 * (rate - 2.0 * std::tanh(mid)), 1e-15);
}

TEST(Step, OriginSliceIsStationary) {
  const auto base = make_flat_torus({16, 16});
  const GraphState s{ScalarField(base, 0.0), make_cosh_warp(), 0.0};
  EXPECT_EQ(step(s, 1e-2).u.max_abs(), 0.0);
}

TEST(Step, SecondOrderLocalError) {
  const auto base = make_flat_torus({16, 16});
  const GraphState s{wavy(base, 0.3, 0.05), make_cosh_warp(), 0.0};
  const auto defect = [&](double dt) {
    const GraphState one = step(s, dt);
    const GraphState two = step(step(s, dt / 2), dt / 2);
    return max_diff(one.u, two.u);
  };
  const double dt = 2e-4;
  const double ratio = defect(dt) / defect(dt / 2);
  EXPECT_GT(ratio, 6.0);
  EXPECT_LT(ratio, 10.0);
}

TEST(Step, Errors) {
  const auto base = make_flat_torus({16});
  const GraphState s{ScalarField(base, 0.9), make_cosh_warp(1.0), 0.0};
  EXPECT_THROW(step(s, 0.0), ConfigError);
  EXPECT_THROW(step(s, 10.0), DomainExit);
  const auto b2 = make_flat_torus({16, 16});
  const GraphState steep{wavy(b2, 0.0, 0.3), make_cosh_warp(), 0.0};
  EXPECT_THROW(step(steep, 1e-5, 0.99), GraphicalityLost);
}

TEST(StableDt, FlatSlice) {
  const auto base = make_flat_torus({16, 16});
  const GraphState s{ScalarField(base, 0.5), make_cosh_warp(), 0.0};
  const GraphRate r = graph_rate(s);
  const double h2 = std::cosh(0.5) * std::cosh(0.5);
  EXPECT_NEAR(stable_dt(*base, r, 0.9), 0.9 * h2 / (16.0 * 16.0) / 4.0, 1e-16);
  EXPECT_EQ(r.min_theta, 1.0);
  EXPECT_NEAR(r.max_abs_H, 2.0 * std::tanh(0.5), 1e-14);
}

TEST(GraphRate, FastPathMatchesGenericPath) {
  const auto base = make_flat_torus({24, 20}, {1.0, 0.8});
  const GraphState s{wavy(base, 0.2, 0.1), make_cosh_warp(), 0.0};
  const GraphRate r = graph_rate(s);
  for (std::size_t k = 0; k < base->size(); ++k) {
    const PointGeometry p = point_geometry_at(s, k, s.warp(s.u[k]));
    EXPECT_NEAR(r.H[k], p.H, 1e-12 * (1 + std::abs(p.H)));
    EXPECT_NEAR(r.theta[k], p.theta, 1e-15);
  }
}

TEST(MaterialDerivative, HeightMovesAlongNormal) {
  const auto base = make_flat_torus({32, 32});
  const GraphState s{wavy(base, 0.2, 0.1), make_cosh_warp(), 0.0};
  const GraphRate r = graph_rate(s);
  const ScalarField Dt = material_derivative(s, r.H, s.u, r.u_dot);
  for (std::size_t k = 0; k < Dt.size(); ++k) EXPECT_NEAR(Dt[k], -r.H[k] * r.theta[k], 1e-12);
}

TEST(Residuals, VanishOnSlices) {
  const auto base = make_flat_torus({16, 16});
  for (double a : {0.25, 0.5, 1.0}) {
    const GraphState s{ScalarField(base, a), make_cosh_warp(), 0.0};
    const GraphRate r = graph_rate(s);
    EXPECT_LE(residual_cor26(s, r.u_dot).max_abs(), 1e-12);
    const ScalarField f_dot = f_time_derivative(s, r.u_dot);
    EXPECT_EQ(f_dot.max_abs(), 0.0);
    EXPECT_LE(residual_thm31(s, f_dot).max_abs(), 1e-12);
    EXPECT_GE(inequality_slack(s, f_dot, 0.0).min(), -1e-12);
  }
}

TEST(Residuals, SecondOrderUnderRefinement) {
  const auto res = [](int n) {
    const auto base = make_flat_torus({n, n});
    const GraphState s{wavy(base, 0.3, 0.1), make_cosh_warp(), 0.0};
    const GraphRate r = graph_rate(s);
    const ScalarField f_dot = f_time_derivative(s, r.u_dot);
    return std::pair{residual_cor26(s, r.u_dot).max_abs(), residual_thm31(s, f_dot).max_abs()};
  };
  const auto [c32, t32] = res(32);
  const auto [c64, t64] = res(64);
  EXPECT_GT(c32 / c64, 3.0);
  EXPECT_LT(c32 / c64, 5.0);
  EXPECT_GT(t32 / t64, 3.0);
  EXPECT_LT(t32 / t64, 5.0);
}

TEST(Residuals, InequalitySlackNonnegative) {
  const auto base = make_flat_torus({64, 64});
  const GraphState s{wavy(base, 0.3, 0.1), make_cosh_warp(), 0.0};
  const GraphRate r = graph_rate(s);
  const ScalarField slack = inequality_slack(s, f_time_derivative(s, r.u_dot), 0.0);
  EXPECT_GE(slack.min(), -1e-3);
}

TEST(Residuals, FloorOnF) {
  const auto base = make_flat_torus({16, 16});
  const GraphState s{wavy(base, 0.0, 0.3), make_cosh_warp(), 0.0};
  EXPECT_THROW(residual_thm31(s, ScalarField(base), 0.99), NumericalError);
}

TEST(RunFlow, FlatOriginConvergesImmediately) {
  const auto base = make_flat_torus({8, 8});
  const FlowRun run = run_flow(ScalarField(base, 0.0), make_cosh_warp(), quiet_config());
  EXPECT_EQ(run.outcome, FlowOutcome::converged);
  EXPECT_EQ(run.steps, 0u);
  EXPECT_EQ(run.final_time, 0.0);
  EXPECT_EQ(run.diagnostics.size(), 1u);
  EXPECT_EQ(run.states.size(), 1u);
}

TEST(RunFlow, ParallelSliceFollowsBarrier) {
  const auto base = make_flat_torus({16, 16});
  FlowConfig cfg = quiet_config();
  cfg.t_end = 0.3;
  cfg.dt_safety = 0.9;
  cfg.output_stride = 10;
  cfg.state_stride = 25;
  cfg.residual_checks = {true, true, true};
  const FlowRun run = run_flow(ScalarField(base, 0.5), make_cosh_warp(), cfg);
  EXPECT_EQ(run.outcome, FlowOutcome::t_end_reached);
  EXPECT_DOUBLE_EQ(run.final_time, 0.3);
  EXPECT_NEAR(run.final_state().u[0], oracle::cosh_slice_radius(0.5, 0.3), 1e-6);
  EXPECT_GT(run.states.size(), 2u);
  for (const GraphState& s : run.states) {
    EXPECT_EQ(s.u.max() - s.u.min(), 0.0);
    EXPECT_NEAR(s.u[0], oracle::cosh_slice_radius(0.5, s.t), 1e-6);
  }
  for (const DiagnosticsRecord& d : run.diagnostics) {
    EXPECT_LE(d.res_cor26, 1e-12);
    EXPECT_LE(d.res_thm31, 1e-12);
    EXPECT_EQ(d.angle_gap, 0.0);
    EXPECT_LE(std::abs(d.containment_excess), 1e-6);
  }
  EXPECT_TRUE(run.angle_condition);
}

TEST(RunFlow, ShortWavyRunIsMonitored) {
  const auto base = make_flat_torus({24, 24});
  FlowConfig cfg;
  cfg.t_end = 0.05;
  cfg.output_stride = 20;
  cfg.a0 = 0.5;
  const FlowRun run = run_flow(wavy(base, 0.3, 0.05), make_cosh_warp(), cfg);
  EXPECT_EQ(run.outcome, FlowOutcome::t_end_reached);
  EXPECT_DOUBLE_EQ(run.a0, 0.5);
  EXPECT_NEAR(run.angle_threshold, std::tanh(0.5), 1e-15);
  EXPECT_TRUE(run.angle_condition);
  EXPECT_TRUE(run.containment_ok(1e-3));
  EXPECT_TRUE(run.angle_bound_ok(1e-3));
  EXPECT_GE(run.min_ineq_slack, -1e-2);
  EXPECT_LT(run.final_state().u.max_abs(), 0.3 + 0.05 * 1.5);
  for (std::size_t k = 1; k < run.diagnostics.size(); ++k)
    EXPECT_GT(run.diagnostics[k].t, run.diagnostics[k - 1].t);
}

TEST(RunFlow, GraphicalityLossIsReported) {
  const auto base = make_flat_torus({16, 16});
  FlowConfig cfg = quiet_config();
  cfg.theta_floor = 0.99;
  const FlowRun run = run_flow(wavy(base, 0.0, 0.3), make_cosh_warp(), cfg);
  EXPECT_EQ(run.outcome, FlowOutcome::graphicality_lost);
  EXPECT_NE(run.message.find("below floor"), std::string::npos);
}

TEST(RunFlow, ConfigValidation) {
  const auto base = make_flat_torus({8, 8});
  const ScalarField u(base, 0.1);
  FlowConfig cfg = quiet_config();
  cfg.theta_floor = 0.0;
  EXPECT_THROW(run_flow(u, make_cosh_warp(), cfg), ConfigError);
  cfg = quiet_config();
  cfg.dt_safety = 1.5;
  EXPECT_THROW(run_flow(u, make_cosh_warp(), cfg), ConfigError);
  cfg = quiet_config();
  cfg.a0 = 5.0;
  EXPECT_THROW(run_flow(u, make_cosh_warp(2.0), cfg), DomainError);
  EXPECT_THROW(run_flow(ScalarField(base, 3.0), make_cosh_warp(2.0), quiet_config()), DomainError);
}

TEST(RunFlow, Outcomes) {
  EXPECT_EQ(to_string(FlowOutcome::converged), "converged");
  EXPECT_EQ(to_string(FlowOutcome::t_end_reached), "t_end_reached");
  EXPECT_EQ(to_string(FlowOutcome::graphicality_lost), "graphicality_lost");
  EXPECT_EQ(to_string(FlowOutcome::domain_exit), "domain_exit");
}

TEST(RunFlow, SphereInDss) {
  const auto [w, rep] = build_dss_warp(make_dss_parameters(3, 1.0, 0.05), 1024);
  const auto base = make_sphere_axisym(2, 33);
  const auto u0 = ScalarField::sample(base, [](double th, double) { return 0.6 + 0.05 * std::cos(th); });
  FlowConfig cfg;
  cfg.t_end = 0.05;
  cfg.output_stride = 50;
  const FlowRun run = run_flow(u0, w, cfg);
  EXPECT_EQ(run.outcome, FlowOutcome::t_end_reached);
  EXPECT_LT(run.final_state().u.max(), u0.max());
  EXPECT_TRUE(run.containment_ok(1e-3));
}
