#pragma once

// Subcommand drivers: each takes a validated config and an output directory,
// writes its CSV/JSON files plus manifest.json, and returns the in-memory result.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "wpmcf/barrier.hpp"
#include "wpmcf/base.hpp"
#include "wpmcf/config.hpp"
#include "wpmcf/errors.hpp"
#include "wpmcf/flow.hpp"
#include "wpmcf/geometry.hpp"
#include "wpmcf/initial_data.hpp"
#include "wpmcf/warp.hpp"

namespace wpmcf {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct RunContext {
  fs::path out_dir;
  bool quiet = false;
  int threads = 1;

  void log(const std::string& msg) const {
    if (!quiet) std::cerr << msg << "\n";
  }
};

// ---------------------------------------------------------------------------
// Output helpers

inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// JSON has no infinities; they are written as null.
inline json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

inline std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  return os;
}

inline void write_json(const fs::path& path, const json& j) {
  auto os = open_out(path);
  os << j.dump(2) << "\n";
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& columns) : os_(open_out(path)) {
    for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
    os_ << "\n";
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << fmt_num(values[i]);
    os_ << "\n";
  }

  std::ostream& stream() { return os_; }

 private:
  std::ofstream os_;
};

inline void write_manifest(const RunContext& ctx, const ExperimentConfig& cfg, const std::string& subcommand,
                           const json& extra = json::object()) {
  json m = manifest_json(cfg, subcommand);
  m["config_text"] = to_config_text(cfg);
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_json(ctx.out_dir / "manifest.json", m);
}

// ---------------------------------------------------------------------------
// check-conditions

inline json conditions_json(const ConditionsReport& r) {
  json j;
  j["rho"] = r.rho;
  j["c"] = r.c;
  j["h0"] = r.h0;
  j["unit_normalized"] = r.unit_normalized;
  j["c1_pass"] = r.c1_pass;
  j["c2_pass"] = r.c2_pass;
  j["c3_pass"] = r.c3_pass;
  j["all_pass"] = r.all_pass();
  j["c3_margin"] = jnum(r.c3_margin);
  j["tolerance"] = r.tolerance;
  json th = json::array();
  for (const auto& [a0, v] : r.angle_threshold) th.push_back({{"a0", a0}, {"threshold", v}});
  j["angle_threshold"] = th;
  json rows = json::array();
  for (const auto& s : r.samples) rows.push_back({s.r, s.h, s.dh, s.d2h, s.c3_value});
  j["sample_columns"] = {"r", "h", "h_prime", "h_double_prime", "c3_value"};
  j["samples"] = rows;
  return j;
}

/// Default probe range: [-2, 2] clipped to 99% of a symmetric domain; for
/// half-open dss domains [0, F(s_star)] when s_star lies below the cap.
inline std::pair<double, double> default_probe_range(const WarpingFunction& w, const DssReport* dss) {
  if (w.half_open()) {
    if (dss && std::isfinite(dss->r_star)) return {0.0, dss->r_star};
    return {0.0, 0.99 * w.r_max()};
  }
  const double hi = std::min(2.0, 0.99 * w.r_max());
  return {-hi, hi};
}

inline ConditionsReport run_check_conditions(const ExperimentConfig& cfg, const RunContext& ctx) {
  ensure_dir(ctx.out_dir);
  DssReport dss;
  const WarpingFunction w = make_warp(cfg, &dss);
  const BasePtr base = make_base(cfg);
  const double rho = cfg.conditions.rho.value_or(base->rho());
  auto [lo, hi] = default_probe_range(w, cfg.warp.family == "dss" ? &dss : nullptr);
  lo = cfg.conditions.r_min.value_or(lo);
  hi = cfg.conditions.r_max.value_or(hi);
  const auto grid = probe_grid(lo, hi, cfg.conditions.points);
  const ConditionsReport rep = check_conditions(w, rho, grid, cfg.conditions.a0);
  json j = conditions_json(rep);
  j["warp"] = w.description();
  j["probe_range"] = {lo, hi};
  write_json(ctx.out_dir / "conditions.json", j);
  write_manifest(ctx, cfg, "check-conditions");
  ctx.log("check-conditions: " + w.description() + (rep.all_pass() ? " all pass" : " FAILED") +
          ", c3_margin = " + fmt_num(rep.c3_margin));
  return rep;
}

// ---------------------------------------------------------------------------
// dss-build

inline json dss_report_json(const DssReport& r) {
  json j;
  j["n"] = r.params.n;
  j["mass"] = r.params.mass;
  j["kappa"] = r.params.kappa;
  j["s_lower"] = r.params.s_lower;
  j["s_upper"] = jnum(r.params.s_upper);
  j["s_star"] = r.params.s_star;
  j["s_star_inside"] = r.params.s_lower < r.params.s_star && r.params.s_star < r.params.s_upper;
  j["omega_at_s_lower"] = r.omega_at_s_lower;
  if (r.params.kappa > 0.0) {
    j["admissibility_lhs"] = r.admissibility_lhs;
    j["admissibility_rhs"] = r.admissibility_rhs;
  }
  j["s_cap"] = r.s_cap;
  j["r_max"] = r.r_max;
  j["r_star"] = jnum(r.r_star);
  j["grid_size"] = r.grid_size;
  j["max_identity_error"] = r.max_identity_error;
  j["max_omega_error"] = r.max_omega_error;
  return j;
}

inline DssReport run_dss_build(const ExperimentConfig& cfg, const RunContext& ctx) {
  ensure_dir(ctx.out_dir);
  auto [w, rep] = build_dss_warp(make_dss_params(cfg), cfg.dss.grid_size, cfg.dss.s_cap);
  {
    CsvWriter csv(ctx.out_dir / "dss_warp.csv", {"r", "h", "h_prime", "h_double_prime"});
    for (const auto& row : rep.table) {
      const WarpJet j = w(row.r);
      csv.row({row.r, j.h, j.dh, j.d2h});
    }
  }
  {
    CsvWriter csv(ctx.out_dir / "dss_identity.csv",
                  {"r", "s", "log_concavity", "identity_value", "identity_error", "omega_error"});
    for (const auto& row : rep.table)
      csv.row({row.r, row.s, row.log_concavity, row.identity_value, row.identity_error, row.omega_error});
  }
  write_json(ctx.out_dir / "dss_report.json", dss_report_json(rep));
  write_manifest(ctx, cfg, "dss-build");
  ctx.log("dss-build: s_lower = " + fmt_num(rep.params.s_lower) + ", s_star = " + fmt_num(rep.params.s_star) +
          ", r_max = " + fmt_num(rep.r_max));
  return rep;
}

// ---------------------------------------------------------------------------
// run-barrier

inline BarrierSolution run_barrier(const ExperimentConfig& cfg, const RunContext& ctx) {
  ensure_dir(ctx.out_dir);
  const WarpingFunction w = make_warp(cfg);
  BarrierSolution sol = solve_barrier(w, cfg.n(), cfg.barrier.a, cfg.barrier.f0_bar, cfg.barrier.t_end,
                                      cfg.barrier.dt);
  {
    CsvWriter csv(ctx.out_dir / "barrier.csv", {"t", "R", "f_bar", "lambda_drift"});
    for (std::size_t k = 0; k < sol.times.size(); ++k)
      csv.row({sol.times[k], sol.R[k], sol.f_bar[k], sol.lambda_drift(k)});
  }
  json j;
  j["warp"] = w.description();
  j["n"] = sol.n;
  j["a"] = sol.a;
  j["f0_bar"] = sol.f0_bar;
  j["dt"] = sol.dt;
  j["t_end"] = sol.t_end();
  j["lambda0"] = sol.lambda0;
  j["f_limit"] = sol.f_limit;
  j["final_R"] = sol.R.back();
  j["final_f_bar"] = sol.f_bar.back();
  j["max_lambda_drift"] = sol.max_lambda_drift();
  write_json(ctx.out_dir / "barrier_summary.json", j);
  write_manifest(ctx, cfg, "run-barrier");
  ctx.log("run-barrier: R(t_end) = " + fmt_num(sol.R.back()) + ", f_limit = " + fmt_num(sol.f_limit));
  return sol;
}

// ---------------------------------------------------------------------------
// run-flow

struct PreparedFlow {
  BasePtr base;
  WarpingFunction warp;
  InitialData initial;
  ScalarField u0;
  FlowConfig flow;
};

/// Builds base, warp and u0; applies the angle_factor calibration when set.
inline PreparedFlow prepare_flow(const ExperimentConfig& cfg) {
  const BasePtr base = make_base(cfg);
  WarpingFunction warp = make_warp(cfg);
  InitialData d = make_initial_data(cfg);
  FlowConfig fc = cfg.flow;
  fc.a0 = cfg.initial.a0;
  fc.barrier_dt = cfg.barrier.dt;
  if (cfg.initial.a0 && !warp.contains(*cfg.initial.a0))
    throw DomainError("initial.a0 = " + fmt_num(*cfg.initial.a0) + " outside warp domain of " + warp.description());
  if (cfg.initial.angle_factor) {
    const double target = *cfg.initial.angle_factor * angle_threshold(warp, *cfg.initial.a0);
    if (!(target > 0.0 && target < 1.0))
      throw ConfigError("initial.angle_factor: target min Theta " + fmt_num(target) + " must lie in (0, 1)");
    d = calibrate_amplitude(base, warp, d, target);
  }
  ScalarField u0 = make_initial_field(base, d);
  return {base, std::move(warp), d, std::move(u0), fc};
}

inline json flow_summary_json(const FlowRun& run, const PreparedFlow& p) {
  json j;
  j["outcome"] = to_string(run.outcome);
  j["message"] = run.message;
  j["warp"] = p.warp.description();
  j["n"] = p.base->ambient_dim();
  j["steps"] = run.steps;
  j["final_time"] = run.final_time;
  j["t_end"] = p.flow.t_end;
  j["amplitude"] = p.initial.amplitude;
  j["sup_u0"] = run.states.front().u.max_abs();
  j["final_sup_u"] = run.final_state().u.max_abs();
  j["a0"] = run.a0;
  j["initial_min_theta"] = run.initial_min_theta;
  j["angle_threshold"] = run.angle_threshold;
  j["angle_condition"] = run.angle_condition;
  j["barrier_a"] = run.barrier.a;
  j["f0_bar"] = run.barrier.f0_bar;
  j["f_limit"] = run.barrier.f_limit;
  j["min_angle_gap"] = jnum(run.min_angle_gap);
  j["max_containment_excess"] = jnum(run.max_containment_excess);
  j["min_ineq_slack"] = jnum(run.min_ineq_slack);
  j["tol_avoid"] = p.flow.tol_avoid;
  j["tol_angle"] = p.flow.tol_angle;
  j["containment_ok"] = run.containment_ok(p.flow.tol_avoid);
  j["angle_bound_ok"] = run.angle_bound_ok(p.flow.tol_angle);
  return j;
}

inline void write_state_csv(const fs::path& path, const GraphState& s) {
  const GraphGeometry g = compute_geometry(s);
  auto os = open_out(path);
  write_fields_csv(os, {{"u", &s.u}, {"theta", &g.theta}, {"H", &g.H}, {"A_sq", &g.A_sq}});
}

inline const std::vector<std::string> kDiagnosticsColumns = {
    "t",         "min_theta",         "sup_u",          "max_H",  "max_Asq",
    "res_cor26", "res_thm31_eq", "ineq_slack_min", "R_of_t", "f_bar_of_t"};

inline void write_diagnostics_csv(const fs::path& path, const FlowRun& run) {
  CsvWriter csv(path, kDiagnosticsColumns);
  for (const auto& d : run.diagnostics)
    csv.row({d.t, d.min_theta, d.sup_u, d.max_H, d.max_A_sq, d.res_cor26, d.res_thm31, d.ineq_slack_min, d.R,
             d.f_bar});
}

struct FlowResult {
  FlowRun run;
  json summary;
};

inline FlowResult run_flow_experiment(const ExperimentConfig& cfg, const RunContext& ctx) {
  ensure_dir(ctx.out_dir);
  const PreparedFlow p = prepare_flow(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  FlowRun run = run_flow(p.u0, p.warp, p.flow);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_diagnostics_csv(ctx.out_dir / "diagnostics.csv", run);
  write_state_csv(ctx.out_dir / "initial_state.csv", run.states.front());
  write_state_csv(ctx.out_dir / "final_state.csv", run.final_state());
  json summary = flow_summary_json(run, p);
  write_json(ctx.out_dir / "summary.json", summary);
  write_manifest(ctx, cfg, "run-flow", json{{"resolved_amplitude", p.initial.amplitude}});
  ctx.log("run-flow: " + to_string(run.outcome) + " at t = " + fmt_num(run.final_time) + " after " +
          std::to_string(run.steps) + " steps (" + fmt_num(std::round(secs * 10) / 10) + " s)");
  return {std::move(run), std::move(summary)};
}

// ---------------------------------------------------------------------------
// validate-identities

struct IdentityNorms {
  double prop_delta_u = 0.0;
  double route_ab = 0.0;
  double duality = 0.0;
  double ricci_nn = 0.0;
};

/// Max-norm static residuals of one state.
inline IdentityNorms identity_norms(const GraphState& s) {
  IdentityNorms r;
  const GraphGeometry g = compute_geometry(s);
  r.prop_delta_u = prop_delta_u_residual(s, g).max_abs();
  const ScalarField hb = mean_curvature_route_B(s);
  const ScalarField grad = induced_gradient_sq(s, s.u);
  for (std::size_t k = 0; k < s.u.size(); ++k) {
    r.route_ab = std::max(r.route_ab, std::abs(g.H[k] - hb[k]));
    r.duality = std::max(r.duality, std::abs(grad[k] + g.theta[k] * g.theta[k] - 1.0));
    r.ricci_nn = std::max(r.ricci_nn, std::abs(ricci_nn_riccati(s.warp, s.n(), s.u[k]) -
                                               ricci_ambient_nn(s.warp, s.n(), s.u[k])));
  }
  return r;
}

/// Base of the validation study at a resolution (the configured variant with
/// every grid axis set to `resolution`).
inline BasePtr validation_base(const ExperimentConfig& cfg, int resolution) {
  ExperimentConfig c = cfg;
  c.base.nx = c.base.ny = resolution;
  c.base.ntheta = resolution + 1;
  return make_base(c);
}

/// Random graph of sample `index`: offset in [-0.3, 0.3], amplitude chosen by
/// bisection on the coarse grid so that min Theta = target_theta.
inline RandomFieldSpec validation_field_spec(const ExperimentConfig& cfg, const WarpingFunction& w, int index) {
  RandomFieldSpec spec;
  spec.seed = cfg.seed + static_cast<std::uint64_t>(index);
  spec.modes = cfg.validate.modes;
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  spec.offset = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
  const BasePtr coarse = validation_base(cfg, cfg.validate.resolution);
  const auto min_theta = [&](double amp) {
    RandomFieldSpec t = spec;
    t.amplitude = amp;
    return compute_theta(GraphState{make_random_field(coarse, t), w, 0.0}).min();
  };
  double lo = 0.0, hi = 0.05;
  while (min_theta(hi) > cfg.validate.target_theta) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e3) throw NumericalError("validate-identities: cannot reach target_theta");
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (min_theta(mid) > cfg.validate.target_theta ? lo : hi) = mid;
  }
  spec.amplitude = 0.5 * (lo + hi);
  return spec;
}

struct IdentityStudy {
  int coarse = 0;
  int fine = 0;
  std::vector<IdentityNorms> coarse_norms;
  std::vector<IdentityNorms> fine_norms;
  std::vector<RandomFieldSpec> specs;
  double min_ratio_prop = kInf, max_ratio_prop = 0.0;
  double min_ratio_route = kInf, max_ratio_route = 0.0;
};

inline IdentityStudy identity_study(const ExperimentConfig& cfg) {
  const WarpingFunction w = make_warp(cfg);
  IdentityStudy st;
  st.coarse = cfg.validate.resolution;
  st.fine = 2 * cfg.validate.resolution;
  const BasePtr bc = validation_base(cfg, st.coarse);
  const BasePtr bf = validation_base(cfg, st.fine);
  const auto upd = [](double c, double f, double& lo, double& hi) {
    const double r = c / f;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  };
  for (int i = 0; i < cfg.validate.samples; ++i) {
    const RandomFieldSpec spec = validation_field_spec(cfg, w, i);
    const IdentityNorms nc = identity_norms(GraphState{make_random_field(bc, spec), w, 0.0});
    const IdentityNorms nf = identity_norms(GraphState{make_random_field(bf, spec), w, 0.0});
    upd(nc.prop_delta_u, nf.prop_delta_u, st.min_ratio_prop, st.max_ratio_prop);
    upd(nc.route_ab, nf.route_ab, st.min_ratio_route, st.max_ratio_route);
    st.specs.push_back(spec);
    st.coarse_norms.push_back(nc);
    st.fine_norms.push_back(nf);
  }
  return st;
}

inline json identity_study_json(const IdentityStudy& st) {
  const auto norms = [](const IdentityNorms& n) {
    return json{{"prop_delta_u", n.prop_delta_u},
                {"route_ab", n.route_ab},
                {"duality", n.duality},
                {"ricci_nn", n.ricci_nn}};
  };
  const auto order = [](double c, double f) { return f > 0.0 ? std::log2(c / f) : kNaN; };
  json j;
  j["resolutions"] = {st.coarse, st.fine};
  json samples = json::array();
  for (std::size_t i = 0; i < st.specs.size(); ++i) {
    const auto& c = st.coarse_norms[i];
    const auto& f = st.fine_norms[i];
    samples.push_back({{"seed", st.specs[i].seed},
                       {"offset", st.specs[i].offset},
                       {"amplitude", st.specs[i].amplitude},
                       {"coarse", norms(c)},
                       {"fine", norms(f)},
                       {"order",
                        {{"prop_delta_u", jnum(order(c.prop_delta_u, f.prop_delta_u))},
                         {"route_ab", jnum(order(c.route_ab, f.route_ab))}}}});
  }
  j["samples"] = samples;
  j["ratio_range"] = {{"prop_delta_u", {jnum(st.min_ratio_prop), jnum(st.max_ratio_prop)}},
                      {"route_ab", {jnum(st.min_ratio_route), jnum(st.max_ratio_route)}}};
  return j;
}

inline IdentityStudy run_validate_identities(const ExperimentConfig& cfg, const RunContext& ctx) {
  ensure_dir(ctx.out_dir);
  IdentityStudy st = identity_study(cfg);
  write_json(ctx.out_dir / "identities.json", identity_study_json(st));
  write_manifest(ctx, cfg, "validate-identities");
  ctx.log("validate-identities: residual ratio " + fmt_num(st.min_ratio_prop) + " .. " +
          fmt_num(st.max_ratio_prop) + " from " + std::to_string(st.coarse) + " to " + std::to_string(st.fine));
  return st;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRow {
  std::size_t index = 0;
  double value = 0.0;
  std::string outcome = "error";
  std::string error;
  double min_angle_gap = kNaN;
  double final_sup_u = kNaN;
  double sup_u0 = kNaN;
  double initial_min_theta = kNaN;
  double angle_threshold = kNaN;
  bool angle_condition = false;
  double f_limit = kNaN;
  double final_time = kNaN;
};

inline std::string sweep_key(const std::string& axis) { return "initial." + axis; }

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const RunContext& ctx) {
  ensure_dir(ctx.out_dir);
  const auto& values = cfg.sweep.values;
  std::vector<SweepRow> rows(values.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      SweepRow& row = rows[i];
      row.index = i;
      row.value = values[i];
      char dir[32];
      std::snprintf(dir, sizeof dir, "run_%03zu", i);
      RunContext child{ctx.out_dir / dir, true, 1};
      try {
        ExperimentConfig c = cfg;
        set_value(c, sweep_key(cfg.sweep.axis), fmt_num(values[i]));
        validate(c);
        FlowResult r = run_flow_experiment(c, child);
        row.outcome = to_string(r.run.outcome);
        row.error = r.run.message;
        row.min_angle_gap = r.run.min_angle_gap;
        row.final_sup_u = r.run.final_state().u.max_abs();
        row.sup_u0 = r.run.states.front().u.max_abs();
        row.initial_min_theta = r.run.initial_min_theta;
        row.angle_threshold = r.run.angle_threshold;
        row.angle_condition = r.run.angle_condition;
        row.f_limit = r.run.barrier.f_limit;
        row.final_time = r.run.final_time;
      } catch (const std::exception& e) {
        row.outcome = "error";
        row.error = e.what();
      }
      std::lock_guard<std::mutex> lock(log_mutex);
      ctx.log("sweep: " + cfg.sweep.axis + " = " + fmt_num(row.value) + " -> " + row.outcome);
    }
  };
  const int nthreads = std::max(1, std::min<int>(ctx.threads, static_cast<int>(values.size())));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  auto os = open_out(ctx.out_dir / "sweep_summary.csv");
  os << "index,axis,value,outcome,min_angle_gap,final_sup_u,sup_u0,initial_min_theta,angle_threshold,"
        "angle_condition,f_limit,final_time,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    for (char& ch : err)
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    os << r.index << "," << cfg.sweep.axis << "," << fmt_num(r.value) << "," << r.outcome << ","
       << fmt_num(r.min_angle_gap) << "," << fmt_num(r.final_sup_u) << "," << fmt_num(r.sup_u0) << ","
       << fmt_num(r.initial_min_theta) << "," << fmt_num(r.angle_threshold) << "," << (r.angle_condition ? 1 : 0)
       << "," << fmt_num(r.f_limit) << "," << fmt_num(r.final_time) << "," << err << "\n";
  }
  write_manifest(ctx, cfg, "sweep");
  return rows;
}

}  // namespace wpmcf
