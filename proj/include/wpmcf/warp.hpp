#pragma once

// Warping functions h(r) for metrics dr^2 + h(r)^2 g_N, certification of the
// structural conditions on h, and the de Sitter-Schwarzschild warp obtained
// from omega(s) = 1 - m s^(2-n) - kappa s^2 by the change of variable
// dr/ds = omega(s)^(-1/2).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "wpmcf/errors.hpp"

namespace wpmcf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Value and first two derivatives of h at one radius.
struct WarpJet {
  double h = 1.0;
  double dh = 0.0;
  double d2h = 0.0;

  /// h h'' - h'^2, the quantity bounded below by the curvature condition.
  double log_concavity() const { return h * d2h - dh * dh; }
};

enum class WarpFamily { cosh, quadratic, dss };
enum class WarpKind { closed_form, tabulated };

inline std::string to_string(WarpFamily f) {
  switch (f) {
    case WarpFamily::cosh: return "cosh";
    case WarpFamily::quadratic: return "quadratic";
    case WarpFamily::dss: return "dss";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// de Sitter-Schwarzschild profile

/// Parameters of omega(s) = 1 - m s^(2-n) - kappa s^2 with its roots.
struct DssParameters {
  int n = 3;
  double mass = 1.0;
  double kappa = 0.0;
  double s_lower = 0.0;
  double s_upper = kInf;  // infinite when kappa <= 0
  double s_star = 0.0;    // (m n / 2)^(1/(n-2))

  double omega(double s) const {
    return 1.0 - mass * std::pow(s, 2.0 - n) - kappa * s * s;
  }
  /// omega(s) - omega(s_lower): zero exactly at the located root, so that
  /// h'(0) vanishes without the root-finding residual.
  double omega_shifted(double s) const { return omega(s) - omega(s_lower); }
  /// omega_shifted(s_lower + tau^2) without cancellation near the root.
  double omega_shifted_tau(double tau) const {
    const double t2 = tau * tau;
    return -mass * std::pow(s_lower, 2.0 - n) * std::expm1((2.0 - n) * std::log1p(t2 / s_lower)) -
           kappa * t2 * (2.0 * s_lower + t2);
  }
  double omega_prime(double s) const {
    return (n - 2.0) * mass * std::pow(s, 1.0 - n) - 2.0 * kappa * s;
  }
  /// Closed form of h h'' - h'^2 = s omega'/2 - omega along the warp.
  double log_concavity(double s) const {
    return 0.5 * mass * n * std::pow(s, 2.0 - n) - 1.0;
  }
};

namespace detail {

/// Bisection on a sign-changing bracket, run until the bracket stops shrinking.
template <class F>
double bisect_root(F&& f, double lo, double hi) {
  double flo = f(lo);
  double fhi = f(hi);
  if (!(flo * fhi <= 0.0)) {
    throw NumericalError("bisect_root: bracket does not change sign");
  }
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// 4-point Gauss-Legendre nodes/weights on [-1, 1].
inline constexpr std::array<double, 4> kGaussNodes = {
    -0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
    0.8611363115940526};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
    0.3478548451374538};

template <class F>
double gauss_cell(F&& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double acc = 0.0;
  for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
    acc += kGaussWeights[q] * f(mid + half * kGaussNodes[q]);
  }
  return acc * half;
}

/// dr/dtau for s = s_lower + tau^2; finite at tau = 0.
inline double dss_radius_rate(const DssParameters& p, double tau) {
  if (tau == 0.0) return 2.0 / std::sqrt(p.omega_prime(p.s_lower));
  const double w = p.omega_shifted_tau(tau);
  return 2.0 * tau / std::sqrt(std::max(w, std::numeric_limits<double>::min()));
}

struct CoshWarp {
  WarpJet operator()(double r) const {
    const double em1 = std::expm1(r);
    const double ei = 1.0 / (1.0 + em1);
    const double c = 0.5 * (1.0 + em1 + ei);
    return {c, 0.5 * em1 * (1.0 + ei), c};
  }
};

struct QuadraticWarp {
  double alpha;
  WarpJet operator()(double r) const {
    return {1.0 + alpha * r * r, 2.0 * alpha * r, 2.0 * alpha};
  }
};

/// Tabulated dSS warp. Nodes are uniform in tau with s = s_lower + tau^2;
/// r(tau) is a monotone cubic Hermite interpolant with exact slopes, inverted
/// per cell by safeguarded Newton iteration.
struct DssTable {
  DssParameters params;
  std::vector<double> tau;
  std::vector<double> r;
  std::vector<double> slope;  // dr/dtau at nodes

  std::pair<double, double> cell_slopes(std::size_t k) const {
    const double dt = tau[k + 1] - tau[k];
    const double secant = (r[k + 1] - r[k]) / dt;
    double m0 = slope[k];
    double m1 = slope[k + 1];
    const double a = m0 / secant;
    const double b = m1 / secant;
    const double norm2 = a * a + b * b;
    if (norm2 > 9.0) {  // Fritsch-Carlson limiter
      const double scale = 3.0 / std::sqrt(norm2);
      m0 = scale * a * secant;
      m1 = scale * b * secant;
    }
    return {m0, m1};
  }

  double radius_at(std::size_t k, double t) const {
    const double dt = tau[k + 1] - tau[k];
    const auto [m0, m1] = cell_slopes(k);
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * r[k] + (t3 - 2 * t2 + t) * dt * m0 +
           (-2 * t3 + 3 * t2) * r[k + 1] + (t3 - t2) * dt * m1;
  }

  double radius_rate_at(std::size_t k, double t) const {
    const double dt = tau[k + 1] - tau[k];
    const auto [m0, m1] = cell_slopes(k);
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * r[k] + (3 * t2 - 4 * t + 1) * dt * m0 +
            (-6 * t2 + 6 * t) * r[k + 1] + (3 * t2 - 2 * t) * dt * m1) /
           dt;
  }

  /// Inverse of the interpolant: tau at radius r in [0, r.back()].
  double tau_of_r(double radius) const {
    auto it = std::upper_bound(r.begin(), r.end(), radius);
    std::size_t k = static_cast<std::size_t>(std::distance(r.begin(), it));
    k = std::clamp<std::size_t>(k, 1, r.size() - 1) - 1;
    double lo = 0.0;
    double hi = 1.0;
    double t = (radius - r[k]) / (r[k + 1] - r[k]);
    t = std::clamp(t, 0.0, 1.0);
    for (int it2 = 0; it2 < 100; ++it2) {
      const double g = radius_at(k, t) - radius;
      if (g == 0.0) break;
      if (g > 0.0) hi = t; else lo = t;
      const double dg = radius_rate_at(k, t) * (tau[k + 1] - tau[k]);
      double next = (dg > 0.0) ? t - g / dg : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - t) <= 1e-16) {
        t = next;
        break;
      }
      t = next;
    }
    return tau[k] + t * (tau[k + 1] - tau[k]);
  }

  WarpJet operator()(double radius) const {
    const double tt = tau_of_r(radius);
    const double s = params.s_lower + tt * tt;
    return {s, std::sqrt(std::max(0.0, params.omega_shifted_tau(tt))),
            0.5 * params.omega_prime(s)};
  }
};

}  // namespace detail

/// Positive warping function on (-r_max, r_max) or, for half-open warps,
/// on [0, r_max). Immutable; copies share any tabulated data.
class WarpingFunction {
 public:
  using Impl = std::variant<detail::CoshWarp, detail::QuadraticWarp,
                            std::shared_ptr<const detail::DssTable>>;

  WarpingFunction(Impl impl, WarpFamily family, double r_max, bool half_open)
      : impl_(std::move(impl)), family_(family), r_max_(r_max),
        half_open_(half_open) {}

  WarpFamily family() const { return family_; }
  WarpKind kind() const {
    return family_ == WarpFamily::dss ? WarpKind::tabulated
                                      : WarpKind::closed_form;
  }
  double r_max() const { return r_max_; }
  double r_min() const { return half_open_ ? 0.0 : -r_max_; }
  bool half_open() const { return half_open_; }

  bool contains(double r) const {
    if (!std::isfinite(r)) return false;
    return half_open_ ? (r >= 0.0 && r < r_max_) : (std::abs(r) < r_max_);
  }

  /// Evaluates (h, h', h''); throws DomainError outside the domain.
  WarpJet operator()(double r) const {
    if (!contains(r)) {
      std::ostringstream msg;
      msg << "warp " << description() << ": radius " << r
          << " outside domain";
      throw DomainError(msg.str());
    }
    return eval_unchecked(r);
  }

  WarpJet eval_unchecked(double r) const {
    if (const auto* c = std::get_if<detail::CoshWarp>(&impl_)) return (*c)(r);
    if (const auto* q = std::get_if<detail::QuadraticWarp>(&impl_)) return (*q)(r);
    return (*std::get<2>(impl_))(r);
  }

  /// Normalization constant h(0).
  double h0() const { return eval_unchecked(0.0).h; }

  /// Tabulated dSS data, or nullptr for closed-form warps.
  const detail::DssTable* dss_table() const {
    if (const auto* t = std::get_if<2>(&impl_)) return t->get();
    return nullptr;
  }

  std::string description() const {
    std::ostringstream os;
    os << to_string(family_);
    if (const auto* q = std::get_if<detail::QuadraticWarp>(&impl_)) {
      os << "(alpha=" << q->alpha << ")";
    } else if (const auto* t = dss_table()) {
      os << "(n=" << t->params.n << ",m=" << t->params.mass
         << ",kappa=" << t->params.kappa << ")";
    }
    return os.str();
  }

 private:
  Impl impl_;
  WarpFamily family_;
  double r_max_;
  bool half_open_;
};

/// Closed-form warps: cosh(r) (no parameters) or 1 + alpha r^2 (params = {alpha}).
inline WarpingFunction make_builtin_warp(WarpFamily family,
                                         std::span<const double> params,
                                         double r_max = kInf) {
  if (!(r_max > 0.0)) throw ConfigError("make_builtin_warp: r_max must be > 0");
  switch (family) {
    case WarpFamily::cosh:
      if (!params.empty()) throw ConfigError("cosh warp takes no parameters");
      return {detail::CoshWarp{}, family, r_max, false};
    case WarpFamily::quadratic:
      if (params.size() != 1) throw ConfigError("quadratic warp takes one parameter alpha");
      if (!(params[0] > 0.0)) throw ConfigError("quadratic warp: alpha must be > 0");
      return {detail::QuadraticWarp{params[0]}, family, r_max, false};
    case WarpFamily::dss:
      break;
  }
  throw ConfigError("make_builtin_warp: dss warps are built by build_dss_warp");
}

inline WarpingFunction make_cosh_warp(double r_max = kInf) {
  return make_builtin_warp(WarpFamily::cosh, {}, r_max);
}

// ---------------------------------------------------------------------------
// Condition certification

struct ConditionsSample {
  double r, h, dh, d2h;
  double c3_value;  // h h'' - h'^2 + rho
};

struct ConditionsReport {
  double rho = 0.0;
  double c = 0.0;       // max{0, rho}
  double h0 = 1.0;      // normalization constant h(0)
  bool unit_normalized = true;
  bool c1_pass = false;
  bool c2_pass = false;
  bool c3_pass = false;
  double c3_margin = kInf;
  double tolerance = 1e-9;
  std::vector<ConditionsSample> samples;
  std::vector<std::pair<double, double>> angle_threshold;  // (a0, threshold)

  bool all_pass() const { return c1_pass && c2_pass && c3_pass; }
};

/// sqrt(1 - h0^2 / h(a0)^2), clamped at 0.
inline double angle_threshold(const WarpingFunction& w, double a0) {
  const double h = w(a0).h;
  const double h0 = w.h0();
  return std::sqrt(std::max(0.0, 1.0 - (h0 * h0) / (h * h)));
}

inline ConditionsReport check_conditions(const WarpingFunction& w, double rho,
                                         std::span<const double> r_probe,
                                         std::span<const double> a0_values = {},
                                         double tolerance = 1e-9) {
  if (r_probe.empty()) throw ConfigError("check_conditions: empty probe grid");
  for (double r : r_probe) {
    if (!w.contains(r)) {
      std::ostringstream msg;
      msg << "check_conditions: probe radius " << r << " outside warp domain";
      throw DomainError(msg.str());
    }
  }
  ConditionsReport rep;
  rep.rho = rho;
  rep.c = std::max(0.0, rho);
  rep.tolerance = tolerance;

  const WarpJet at0 = w(0.0);
  rep.h0 = at0.h;
  rep.unit_normalized = std::abs(at0.h - 1.0) <= 1e-9;
  rep.c1_pass = at0.h > 0.0 && std::abs(at0.dh) <= 1e-9;

  rep.c2_pass = true;
  rep.samples.reserve(r_probe.size());
  for (double r : r_probe) {
    const WarpJet j = w(r);
    const double value = j.log_concavity() + rho;
    rep.samples.push_back({r, j.h, j.dh, j.d2h, value});
    rep.c3_margin = std::min(rep.c3_margin, value - rep.c);
    if (!(j.h > 0.0)) rep.c2_pass = false;
    if (r > 0.0 && !(j.dh > 0.0)) rep.c2_pass = false;
    if (r < 0.0 && !(j.dh < 0.0)) rep.c2_pass = false;
  }
  rep.c3_pass = rep.c3_margin >= -tolerance;
  for (double a0 : a0_values) rep.angle_threshold.emplace_back(a0, angle_threshold(w, a0));
  return rep;
}

/// Uniform probe grid of `points` radii covering [lo, hi].
inline std::vector<double> probe_grid(double lo, double hi, int points) {
  if (points < 2 || !(hi > lo)) throw ConfigError("probe_grid: need >= 2 points and hi > lo");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) g[i] = lo + (hi - lo) * i / (points - 1);
  return g;
}

// ---------------------------------------------------------------------------
// de Sitter-Schwarzschild construction

/// Validates (n, m, kappa) and locates the roots of omega.
inline DssParameters make_dss_parameters(int n, double mass, double kappa) {
  if (n < 3) throw ConfigError("dss: ambient dimension n must be >= 3");
  if (!(mass > 0.0)) throw ConfigError("dss: mass must be > 0");
  DssParameters p;
  p.n = n;
  p.mass = mass;
  p.kappa = kappa;
  p.s_star = std::pow(0.5 * mass * n, 1.0 / (n - 2.0));
  const auto omega = [&p](double s) { return p.omega(s); };

  // Below s_lower omega -> -inf; find a left bracket point.
  double lo = std::min(1.0, std::pow(mass, 1.0 / (n - 2.0))) * 0.5;
  while (omega(lo) >= 0.0) lo *= 0.5;

  if (kappa > 0.0) {
    const double lhs = std::pow(n, n) * mass * mass * std::pow(kappa, n - 2.0);
    const double rhs = 4.0 * std::pow(n - 2.0, n - 2.0);
    if (!(lhs < rhs)) {
      std::ostringstream msg;
      msg << "dss: kappa > 0 requires n^n m^2 kappa^(n-2) < 4 (n-2)^(n-2); got "
          << lhs << " >= " << rhs;
      throw ConfigError(msg.str());
    }
    // omega peaks where omega' = 0.
    const double s_peak = std::pow((n - 2.0) * mass / (2.0 * kappa), 1.0 / n);
    if (!(omega(s_peak) > 0.0)) throw NumericalError("dss: omega has no positive region");
    p.s_lower = detail::bisect_root(omega, lo, s_peak);
    double hi = 2.0 * s_peak;
    while (omega(hi) >= 0.0) hi *= 2.0;
    p.s_upper = detail::bisect_root(omega, s_peak, hi);
  } else {
    double hi = 2.0 * lo;
    while (omega(hi) <= 0.0) {
      hi *= 2.0;
      if (hi > 1e300) throw NumericalError("dss: could not bracket s_lower");
    }
    p.s_lower = detail::bisect_root(omega, lo, hi);
    p.s_upper = kInf;
  }
  return p;
}

/// r = F(s) = integral of omega^(-1/2) from s_lower to s, by Gauss quadrature
/// in tau = sqrt(s - s_lower) over `cells` uniform cells.
inline double dss_radius(const DssParameters& p, double s, int cells = 4096) {
  if (s < p.s_lower || s >= p.s_upper) throw DomainError("dss_radius: s outside [s_lower, s_upper)");
  const double tau_end = std::sqrt(s - p.s_lower);
  double acc = 0.0;
  for (int c = 0; c < cells; ++c) {
    acc += detail::gauss_cell([&](double t) { return detail::dss_radius_rate(p, t); },
                              tau_end * c / cells, tau_end * (c + 1) / cells);
  }
  return acc;
}

struct DssTableRow {
  double r, s;
  double log_concavity;   // h h'' - h'^2 of the constructed warp
  double identity_value;  // (1/2) m n s^(2-n) - 1
  double identity_error;
  double omega_error;     // h'^2 - omega(h)
};

struct DssReport {
  DssParameters params;
  double omega_at_s_lower = 0.0;
  double admissibility_lhs = 0.0;  // n^n m^2 kappa^(n-2), kappa > 0 only
  double admissibility_rhs = 0.0;  // 4 (n-2)^(n-2)
  double s_cap = 0.0;
  double r_max = 0.0;              // F(s_cap)
  double r_star = kInf;            // F(s_star), when s_star <= s_cap
  int grid_size = 0;
  double max_identity_error = 0.0;
  double max_omega_error = 0.0;
  std::vector<DssTableRow> table;
};

/// Default cap: 2 s_star when the upper root is infinite, otherwise 90% of the
/// way from s_lower to s_upper.
inline double default_dss_cap(const DssParameters& p) {
  if (std::isinf(p.s_upper)) return 2.0 * p.s_star;
  return p.s_lower + 0.9 * (p.s_upper - p.s_lower);
}

inline std::pair<WarpingFunction, DssReport> build_dss_warp(const DssParameters& p,
                                                            int grid_size = 1024,
                                                            double s_cap = 0.0) {
  if (grid_size < 64) throw ConfigError("build_dss_warp: grid_size must be >= 64");
  if (s_cap == 0.0) s_cap = default_dss_cap(p);
  if (!(s_cap > p.s_lower)) throw ConfigError("build_dss_warp: s_cap must exceed s_lower");
  if (!(s_cap < p.s_upper)) throw ConfigError("build_dss_warp: s_cap must be below s_upper");

  auto table = std::make_shared<detail::DssTable>();
  table->params = p;
  const double tau_cap = std::sqrt(s_cap - p.s_lower);
  const auto n_nodes = static_cast<std::size_t>(grid_size);
  table->tau.resize(n_nodes);
  table->r.resize(n_nodes);
  table->slope.resize(n_nodes);
  const auto rate = [&p](double t) { return detail::dss_radius_rate(p, t); };
  for (std::size_t k = 0; k < n_nodes; ++k) {
    table->tau[k] = tau_cap * static_cast<double>(k) / static_cast<double>(n_nodes - 1);
    table->slope[k] = rate(table->tau[k]);
    table->r[k] = (k == 0) ? 0.0
                           : table->r[k - 1] +
                                 detail::gauss_cell(rate, table->tau[k - 1], table->tau[k]);
  }
  for (std::size_t k = 1; k < n_nodes; ++k) {
    if (!(table->r[k] > table->r[k - 1])) throw NumericalError("build_dss_warp: radius table not increasing");
  }

  DssReport rep;
  rep.params = p;
  rep.omega_at_s_lower = p.omega(p.s_lower);
  if (p.kappa > 0.0) {
    rep.admissibility_lhs = std::pow(p.n, p.n) * p.mass * p.mass * std::pow(p.kappa, p.n - 2.0);
    rep.admissibility_rhs = 4.0 * std::pow(p.n - 2.0, p.n - 2.0);
  }
  rep.s_cap = s_cap;
  rep.r_max = table->r.back();
  rep.grid_size = grid_size;
  if (p.s_star <= s_cap) rep.r_star = dss_radius(p, p.s_star);

  WarpingFunction w(std::shared_ptr<const detail::DssTable>(table), WarpFamily::dss,
                    rep.r_max, true);
  // Verification on the nodes strictly inside the half-open domain.
  for (std::size_t k = 0; k + 1 < n_nodes; ++k) {
    const WarpJet j = w(table->r[k]);
    DssTableRow row;
    row.r = table->r[k];
    row.s = j.h;
    row.log_concavity = j.log_concavity();
    row.identity_value = p.log_concavity(j.h);
    row.identity_error = std::abs(row.log_concavity - row.identity_value);
    row.omega_error = j.dh * j.dh - p.omega(j.h);
    rep.max_identity_error = std::max(rep.max_identity_error, row.identity_error);
    rep.max_omega_error = std::max(rep.max_omega_error, std::abs(row.omega_error));
    rep.table.push_back(row);
  }
  return {std::move(w), std::move(rep)};
}

}  // namespace wpmcf
