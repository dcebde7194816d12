#pragma once

// Comparison ODEs for parallel slices:
//   R' = -(n-1) h'(R)/h(R),            R(0) = a
//   f' = -2(n-1) (1-f) h'(R)^2/h(R)^2, f(0) = f0
// with the conserved quantity Lambda = (1-f) h(R)^2.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <vector>

#include "wpmcf/errors.hpp"
#include "wpmcf/warp.hpp"

namespace wpmcf {

class BarrierSolution {
 public:
  double a = 0.0;
  double f0_bar = 0.0;
  int n = 3;
  double dt = 1e-3;
  std::vector<double> times;
  std::vector<double> R;
  std::vector<double> f_bar;
  double lambda0 = 0.0;
  /// lim f_bar = 1 - Lambda0 / h(0)^2.
  double f_limit = 0.0;

  BarrierSolution(WarpingFunction warp) : warp_(std::move(warp)) {}

  const WarpingFunction& warp() const { return warp_; }
  double t_end() const { return times.back(); }

  std::array<double, 2> rhs(double r, double f) const {
    if (r == 0.0) return {0.0, 0.0};
    const WarpJet j = warp_(r);
    const double lg = j.dh / j.h;
    return {-(n - 1.0) * lg, -2.0 * (n - 1.0) * (1.0 - f) * lg * lg};
  }

  /// Conserved quantity along the stored trajectory at sample k.
  double lambda_at_sample(std::size_t k) const {
    const double h = warp_(R[k]).h;
    return (1.0 - f_bar[k]) * h * h;
  }

  /// Relative drift |Lambda(t) - Lambda0| / Lambda0 (absolute when Lambda0 = 0).
  double lambda_drift(std::size_t k) const {
    const double d = std::abs(lambda_at_sample(k) - lambda0);
    return lambda0 > 0.0 ? d / lambda0 : d;
  }

  double max_lambda_drift() const {
    double m = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) m = std::max(m, lambda_drift(k));
    return m;
  }

  double R_at(double t) const { return interpolate(t, 0); }
  double f_bar_at(double t) const { return interpolate(t, 1); }

 private:
  // Cubic Hermite between samples, slopes from the ODE right-hand side.
  double interpolate(double t, int component) const {
    if (t < 0.0 || t > times.back() * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "barrier: time " << t << " outside solved range [0, " << times.back() << "]";
      throw DomainError(msg.str());
    }
    t = std::min(t, times.back());
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t k = static_cast<std::size_t>(std::distance(times.begin(), it));
    k = std::clamp<std::size_t>(k, 1, times.size() - 1) - 1;
    const auto& y = component == 0 ? R : f_bar;
    const double h = times[k + 1] - times[k];
    if (h <= 0.0) return y[k];
    const double s = (t - times[k]) / h;
    const double m0 = rhs(R[k], f_bar[k])[static_cast<std::size_t>(component)];
    const double m1 = rhs(R[k + 1], f_bar[k + 1])[static_cast<std::size_t>(component)];
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y[k] + (s3 - 2 * s2 + s) * h * m0 + (-2 * s3 + 3 * s2) * y[k + 1] +
           (s3 - s2) * h * m1;
  }

  WarpingFunction warp_;
};

/// Fixed-step classical RK4 on [0, t_end]; the last step is shortened to land on t_end.
inline BarrierSolution solve_barrier(const WarpingFunction& warp, int n, double a, double f0_bar,
                                     double t_end, double dt = 1e-3) {
  if (n < 2) throw ConfigError("solve_barrier: n must be >= 2");
  if (a < 0.0) throw ConfigError("solve_barrier: initial height a must be >= 0");
  if (!warp.contains(a)) {
    std::ostringstream msg;
    msg << "solve_barrier: a = " << a << " outside warp domain";
    throw DomainError(msg.str());
  }
  if (!(f0_bar >= 0.0 && f0_bar <= 1.0)) throw ConfigError("solve_barrier: f0_bar must lie in [0, 1]");
  if (!(dt > 0.0)) throw ConfigError("solve_barrier: dt must be > 0");
  if (!(t_end >= 0.0)) throw ConfigError("solve_barrier: t_end must be >= 0");

  BarrierSolution sol(warp);
  sol.a = a;
  sol.f0_bar = f0_bar;
  sol.n = n;
  sol.dt = dt;
  const double ha = warp(a).h;
  const double h0 = warp.h0();
  sol.lambda0 = (1.0 - f0_bar) * ha * ha;
  sol.f_limit = 1.0 - sol.lambda0 / (h0 * h0);

  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  sol.times.reserve(steps + 1);
  sol.R.reserve(steps + 1);
  sol.f_bar.reserve(steps + 1);
  double t = 0.0;
  double r = a;
  double f = f0_bar;
  sol.times.push_back(t);
  sol.R.push_back(r);
  sol.f_bar.push_back(f);
  try {
    for (std::size_t k = 0; k < steps; ++k) {
      const double h = std::min(dt, t_end - t);
      const auto k1 = sol.rhs(r, f);
      const auto k2 = sol.rhs(r + 0.5 * h * k1[0], f + 0.5 * h * k1[1]);
      const auto k3 = sol.rhs(r + 0.5 * h * k2[0], f + 0.5 * h * k2[1]);
      const auto k4 = sol.rhs(r + h * k3[0], f + h * k3[1]);
      r += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
      f += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
      t = (k + 1 == steps) ? t_end : t + h;
      if (!std::isfinite(r) || !std::isfinite(f)) throw NumericalError("solve_barrier: non-finite state");
      sol.times.push_back(t);
      sol.R.push_back(r);
      sol.f_bar.push_back(f);
    }
  } catch (const DomainError& e) {
    throw NumericalError(std::string("solve_barrier: step left the warp domain: ") + e.what());
  }
  if (sol.times.size() == 1) {  // t_end == 0: keep a degenerate but valid interval
    sol.times.push_back(0.0);
    sol.R.push_back(r);
    sol.f_bar.push_back(f);
  }
  return sol;
}

/// f_bar(t) recovered from conservation: 1 - Lambda0 / h(R(t))^2.
inline double f_bar_closed_form(const WarpingFunction& warp, const BarrierSolution& sol, double t) {
  const double h = warp(sol.R_at(t)).h;
  return 1.0 - sol.lambda0 / (h * h);
}

}  // namespace wpmcf
