#pragma once

// Geometry of the geodesic graph S = {(x, u(x))} in the warped product
// M = N x I with metric g = dr^2 + h(r)^2 g_N.
//
// Conventions: e_i = d_i + u_i d_r, induced metric gamma_ij = h^2 (g_N)_ij + u_i u_j,
// unit normal nu = Theta (d_r - h^-2 grad_N u) with Theta = <d_r, nu> > 0, and
// a_ij = -<Dbar_{e_i} e_j, nu>. With this orientation a slice r = a > 0 has
// H = (n-1) h'(a)/h(a) > 0 and the flow moves it toward r = 0.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <vector>

#include "wpmcf/base.hpp"
#include "wpmcf/errors.hpp"
#include "wpmcf/warp.hpp"

namespace wpmcf {

/// Height field u over the base grid at time t, inside the warp domain.
struct GraphState {
  ScalarField u;
  WarpingFunction warp;
  double t = 0.0;

  const BaseManifold& base() const { return u.base(); }
  /// Ambient dimension n.
  int n() const { return u.base().ambient_dim(); }
};

/// Pointwise extrinsic quantities at one node.
struct PointGeometry {
  double theta = 1.0;
  double H = 0.0;
  double A_sq = 0.0;
  double grad_sq = 0.0;        // |grad_N u|^2 in g_N
  double diffusion_norm = 0.0; // largest eigenvalue of gamma^-1 on the gridded coordinates
};

/// Christoffel symbols of dr^2 + h^2 g_N in the chart (x^0, .., x^{K-1}, r):
///   Gamma^r_ij = -h h' (g_N)_ij,  Gamma^i_rj = Gamma^i_jr = (h'/h) delta^i_j,
///   Gamma^k_ij = Christoffel symbols of g_N, every other symbol zero.
struct AmbientChristoffel {
  std::array<std::array<std::array<double, 3>, 3>, 3> gamma{};  // [A][B][C]

  AmbientChristoffel(const LocalChart& chart, const WarpJet& w) {
    const int K = chart.dim;
    const double hh = w.h * w.dh;
    const double lg = w.dh / w.h;
    for (int i = 0; i < K; ++i) {
      gamma[K][i][i] = -hh * chart.metric[i];
      gamma[i][K][i] = lg;
      gamma[i][i][K] = lg;
      for (int j = 0; j < K; ++j)
        for (int k = 0; k < K; ++k) gamma[k][i][j] = chart.christoffel[k][i][j];
    }
  }
};

namespace detail {

template <int K>
inline void finish_point_geometry(PointGeometry& out, const LocalChart& chart,
                                  const std::array<std::array<double, 2>, 2>& a,
                                  const std::array<std::array<double, 2>, 2>& gam) {
  std::array<std::array<double, 2>, 2> inv{};
  if constexpr (K == 1) {
    if (!(gam[0][0] > 0.0)) throw NumericalError("point_geometry: degenerate induced metric");
    inv[0][0] = 1.0 / gam[0][0];
  } else {
    const double det = gam[0][0] * gam[1][1] - gam[0][1] * gam[1][0];
    if (!(det > 0.0)) throw NumericalError("point_geometry: degenerate induced metric");
    const double idet = 1.0 / det;
    inv[0][0] = gam[1][1] * idet;
    inv[1][1] = gam[0][0] * idet;
    inv[0][1] = inv[1][0] = -gam[0][1] * idet;
  }

  // Shape operator S^i_j = gamma^ik a_kj, traced with the chart multiplicities.
  std::array<std::array<double, 2>, 2> S{};
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      for (int k = 0; k < K; ++k) S[i][j] += inv[i][k] * a[k][j];
  out.H = 0.0;
  out.A_sq = 0.0;
  for (int i = 0; i < K; ++i) {
    out.H += chart.weight[i] * S[i][i];
    out.A_sq += chart.weight[i] * S[i][i] * S[i][i];
    for (int j = 0; j < K; ++j)
      if (j != i) out.A_sq += S[i][j] * S[j][i];
  }

  if (chart.gridded == 1) {
    out.diffusion_norm = inv[0][0];
  } else {
    const double tr = inv[0][0] + inv[1][1];
    const double dt = inv[0][0] * inv[1][1] - inv[0][1] * inv[1][0];
    out.diffusion_norm = 0.5 * tr + std::sqrt(std::max(0.0, 0.25 * tr * tr - dt));
  }
}

}  // namespace detail

/// a_ij = -<Dbar_{e_i} e_j, nu> with the covariant derivative expanded through
/// the nonzero ambient Christoffel symbols only:
///   (Dbar_{e_i} e_j)^r = u_ij + Gamma^r_ij
///   (Dbar_{e_i} e_j)^k = Gamma^k_ij + Gamma^k_rj u_i + Gamma^k_ir u_j
template <int K>
inline PointGeometry point_geometry_k(const LocalChart& chart, const NodeJet& u, const WarpJet& w) {
  const double h2 = w.h * w.h;
  const double ih = 1.0 / w.h;
  const double lg = w.dh * ih;
  const double hh = w.h * w.dh;
  PointGeometry out;
  for (int i = 0; i < K; ++i) out.grad_sq += u.d1[i] * u.d1[i] / chart.metric[i];
  out.theta = 1.0 / std::sqrt(1.0 + out.grad_sq * ih * ih);
  // <d_k, nu> = -Theta u_k and <d_r, nu> = Theta.
  std::array<std::array<double, 2>, 2> a{};
  std::array<std::array<double, 2>, 2> gam{};
  for (int i = 0; i < K; ++i) {
    for (int j = i; j < K; ++j) {
      const double cov_r = u.d2[i][j] - (i == j ? hh * chart.metric[i] : 0.0);
      double pair = cov_r;
      for (int k = 0; k < K; ++k) {
        const double cov_k = chart.christoffel[k][i][j] + lg * ((k == j ? u.d1[i] : 0.0) + (k == i ? u.d1[j] : 0.0));
        pair -= cov_k * u.d1[k];
      }
      a[i][j] = a[j][i] = -out.theta * pair;
      gam[i][j] = gam[j][i] = (i == j ? h2 * chart.metric[i] : 0.0) + u.d1[i] * u.d1[j];
    }
  }
  detail::finish_point_geometry<K>(out, chart, a, gam);
  return out;
}

inline PointGeometry point_geometry(const LocalChart& chart, const NodeJet& u, const WarpJet& w) {
  return chart.dim == 1 ? point_geometry_k<1>(chart, u, w) : point_geometry_k<2>(chart, u, w);
}

/// Same quantities with a_ij from the full contraction
/// Dbar_{e_i} e_j = d_i e_j + Gamma^A_BC e_i^B e_j^C over every ambient index.
inline PointGeometry point_geometry_full_contraction(const LocalChart& chart, const NodeJet& u,
                                                     const WarpJet& w) {
  const int K = chart.dim;
  const double h2 = w.h * w.h;
  PointGeometry out;
  for (int i = 0; i < K; ++i) out.grad_sq += u.d1[i] * u.d1[i] / chart.metric[i];
  out.theta = 1.0 / std::sqrt(1.0 + out.grad_sq / h2);

  std::array<double, 3> g_amb{1.0, 1.0, 1.0};
  std::array<double, 3> nu{};
  for (int i = 0; i < K; ++i) {
    g_amb[i] = h2 * chart.metric[i];
    nu[i] = -out.theta * u.d1[i] / g_amb[i];
  }
  nu[K] = out.theta;

  const AmbientChristoffel chr(chart, w);
  std::array<std::array<double, 2>, 2> a{};
  std::array<std::array<double, 2>, 2> gam{};
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      std::array<double, 3> ei{};
      std::array<double, 3> ej{};
      ei[i] = 1.0;
      ei[K] = u.d1[i];
      ej[j] = 1.0;
      ej[K] = u.d1[j];
      double pair = 0.0;
      for (int A = 0; A <= K; ++A) {
        double cov = (A == K) ? u.d2[i][j] : 0.0;
        for (int B = 0; B <= K; ++B)
          for (int C = 0; C <= K; ++C) cov += chr.gamma[A][B][C] * ei[B] * ej[C];
        pair += g_amb[A] * cov * nu[A];
      }
      a[i][j] = -pair;
      gam[i][j] = (i == j ? g_amb[i] : 0.0) + u.d1[i] * u.d1[j];
    }
  }
  if (K == 1)
    detail::finish_point_geometry<1>(out, chart, a, gam);
  else
    detail::finish_point_geometry<2>(out, chart, a, gam);
  return out;
}

namespace detail {

inline void require_in_domain(const GraphState& s) {
  for (std::size_t k = 0; k < s.u.size(); ++k) {
    if (!s.warp.contains(s.u[k])) {
      std::ostringstream msg;
      msg << "graph height " << s.u[k] << " at node " << k << " outside warp domain of "
          << s.warp.description();
      throw DomainError(msg.str());
    }
  }
}

inline std::vector<WarpJet> warp_jets(const GraphState& s) {
  require_in_domain(s);
  std::vector<WarpJet> jets(s.u.size());
  for (std::size_t k = 0; k < s.u.size(); ++k) jets[k] = s.warp.eval_unchecked(s.u[k]);
  return jets;
}

}  // namespace detail

inline PointGeometry point_geometry_at(const GraphState& s, std::size_t k, const WarpJet& w) {
  const BaseManifold& b = s.base();
  return point_geometry(b.chart_at(k), b.jet_at(s.u.values(), k), w);
}

/// Theta = (1 + h(u)^-2 |grad_N u|^2)^(-1/2).
inline ScalarField compute_theta(const GraphState& s) {
  detail::require_in_domain(s);
  ScalarField out(s.u.base_ptr());
  const BaseManifold& b = s.base();
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto g = b.gradient_at(s.u.values(), k);
    const LocalChart c = b.chart_at(k);
    double gsq = 0.0;
    for (int i = 0; i < c.gridded; ++i) gsq += g[i] * g[i] / c.metric[i];
    const double h = s.warp.eval_unchecked(s.u[k]).h;
    out[k] = 1.0 / std::sqrt(1.0 + gsq / (h * h));
  }
  return out;
}

struct SecondFundamentalForm {
  ScalarField A_sq;
  ScalarField H;
};

/// |A|^2 and H (route A: from a_ij built with the ambient Christoffel symbols).
inline SecondFundamentalForm compute_second_fundamental_form(const GraphState& s) {
  const auto jets = detail::warp_jets(s);
  SecondFundamentalForm out{ScalarField(s.u.base_ptr()), ScalarField(s.u.base_ptr())};
  for (std::size_t k = 0; k < s.u.size(); ++k) {
    const PointGeometry p = point_geometry_at(s, k, jets[k]);
    out.A_sq[k] = p.A_sq;
    out.H[k] = p.H;
  }
  return out;
}

/// Laplace-Beltrami operator of the induced metric applied to w, in divergence
/// form (1/sqrt(gamma)) d_i (sqrt(gamma) gamma^ij d_j w) with fluxes on half-nodes.
inline ScalarField surface_laplacian(const GraphState& s, const ScalarField& w) {
  require_same_base(s.u, w, "surface_laplacian");
  const auto jets = detail::warp_jets(s);
  const BaseManifold& b = s.base();
  const std::size_t N = b.size();
  ScalarField out(s.u.base_ptr());

  if (b.is_torus()) {
    const int nx = b.nx();
    const int ny = b.ny();
    const bool two = b.dim() == 2;
    const double hx = b.spacing(0);
    const double hy = two ? b.spacing(1) : 1.0;
    // Node coefficients P^ij = sqrt(det gamma) gamma^ij and sqrt(det gamma).
    std::vector<double> sq(N), p00(N), p01(N), p11(N), wy(N);
    for (std::size_t k = 0; k < N; ++k) {
      const auto g = b.gradient_at(s.u.values(), k);
      const double h2 = jets[k].h * jets[k].h;
      if (!two) {
        const double gxx = h2 + g[0] * g[0];
        if (!(gxx > 0.0)) throw NumericalError("surface_laplacian: degenerate induced metric");
        sq[k] = std::sqrt(gxx);
        p00[k] = 1.0 / sq[k];
      } else {
        const double P = g[0] * g[0] + g[1] * g[1];
        const double root = std::sqrt(h2 + P);
        sq[k] = jets[k].h * root;
        const double scale = sq[k] / h2;
        p00[k] = scale * (1.0 - g[0] * g[0] / (h2 + P));
        p11[k] = scale * (1.0 - g[1] * g[1] / (h2 + P));
        p01[k] = -scale * g[0] * g[1] / (h2 + P);
        wy[k] = b.gradient_at(w.values(), k)[1];
      }
    }
    std::vector<double> wx(N);
    if (two)
      for (std::size_t k = 0; k < N; ++k) wx[k] = b.gradient_at(w.values(), k)[0];
    // fx[k]: flux through (i+1/2, j); fy[k]: flux through (i, j+1/2).
    std::vector<double> fx(N), fy(N);
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t k = static_cast<std::size_t>(j) * nx + i;
        const std::size_t kx = static_cast<std::size_t>(j) * nx + (i + 1 == nx ? 0 : i + 1);
        fx[k] = 0.5 * (p00[k] + p00[kx]) * (w[kx] - w[k]) / hx;
        if (two) {
          const std::size_t ky = static_cast<std::size_t>(j + 1 == ny ? 0 : j + 1) * nx + i;
          fx[k] += 0.5 * (p01[k] + p01[kx]) * 0.5 * (wy[k] + wy[kx]);
          fy[k] = 0.5 * (p11[k] + p11[ky]) * (w[ky] - w[k]) / hy +
                  0.5 * (p01[k] + p01[ky]) * 0.5 * (wx[k] + wx[ky]);
        }
      }
    }
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t k = static_cast<std::size_t>(j) * nx + i;
        const std::size_t kxm = static_cast<std::size_t>(j) * nx + (i == 0 ? nx - 1 : i - 1);
        double div = (fx[k] - fx[kxm]) / hx;
        if (two) {
          const std::size_t kym = static_cast<std::size_t>(j == 0 ? ny - 1 : j - 1) * nx + i;
          div += (fy[k] - fy[kym]) / hy;
        }
        out[k] = div / sq[k];
      }
    }
    return out;
  }

  // Axisymmetric sphere: J = sqrt(gamma_tt) (h sin(theta))^(m-1), gamma_tt = h^2 + u_t^2.
  const int m = b.dim();
  const double dth = b.spacing(0);
  std::vector<double> gtt(N), Q(N);
  for (std::size_t k = 0; k < N; ++k) {
    const double ut = b.gradient_at(s.u.values(), k)[0];
    gtt[k] = jets[k].h * jets[k].h + ut * ut;
    Q[k] = std::pow(jets[k].h, m - 1) / std::sqrt(gtt[k]);
  }
  std::vector<double> flux(N - 1);
  for (std::size_t k = 0; k + 1 < N; ++k) {
    const double th = (static_cast<double>(k) + 0.5) * dth;
    flux[k] = std::pow(std::sin(th), m - 1) * 0.5 * (Q[k] + Q[k + 1]) * (w[k + 1] - w[k]) / dth;
  }
  for (std::size_t k = 1; k + 1 < N; ++k) {
    const double J = std::sqrt(gtt[k]) * std::pow(jets[k].h * std::sin(b.theta(k)), m - 1);
    out[k] = (flux[k] - flux[k - 1]) / (dth * J);
  }
  out[0] = m * 2.0 * (w[1] - w[0]) / (dth * dth * 0.5 * (gtt[0] + gtt[1]));
  out[N - 1] = m * 2.0 * (w[N - 2] - w[N - 1]) / (dth * dth * 0.5 * (gtt[N - 1] + gtt[N - 2]));
  return out;
}

/// |grad_S w|^2 = gamma^ij w_i w_j with central differences.
inline ScalarField induced_gradient_sq(const GraphState& s, const ScalarField& w) {
  require_same_base(s.u, w, "induced_gradient_sq");
  const auto jets = detail::warp_jets(s);
  const BaseManifold& b = s.base();
  ScalarField out(s.u.base_ptr());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const LocalChart c = b.chart_at(k);
    const auto gu = b.gradient_at(s.u.values(), k);
    const auto gw = b.gradient_at(w.values(), k);
    const double h2 = jets[k].h * jets[k].h;
    // gamma^-1 = h^-2 (g_N^-1 - du du^T / (h^2 + |du|^2)) in the gridded block.
    double uu = 0.0, uw = 0.0, ww = 0.0;
    for (int i = 0; i < c.gridded; ++i) {
      uu += gu[i] * gu[i] / c.metric[i];
      uw += gu[i] * gw[i] / c.metric[i];
      ww += gw[i] * gw[i] / c.metric[i];
    }
    out[k] = (ww - uw * uw / (h2 + uu)) / h2;
  }
  return out;
}

/// <n, grad_S w> where n = d_r: the tangential part of d_r is Theta^2 h^-2 grad_N u.
inline ScalarField normal_pairing(const GraphState& s, const ScalarField& w) {
  require_same_base(s.u, w, "normal_pairing");
  const auto jets = detail::warp_jets(s);
  const BaseManifold& b = s.base();
  ScalarField out(s.u.base_ptr());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const LocalChart c = b.chart_at(k);
    const auto gu = b.gradient_at(s.u.values(), k);
    const auto gw = b.gradient_at(w.values(), k);
    const double h2 = jets[k].h * jets[k].h;
    double uu = 0.0, uw = 0.0;
    for (int i = 0; i < c.gridded; ++i) {
      uu += gu[i] * gu[i] / c.metric[i];
      uw += gu[i] * gw[i] / c.metric[i];
    }
    const double theta_sq = h2 / (h2 + uu);
    out[k] = theta_sq * uw / h2;
  }
  return out;
}

/// Default floor on Theta below which route B refuses to divide.
inline constexpr double kRouteBThetaMin = 1e-3;

/// H = [(h'/h)(n-2+Theta^2) - Delta_S u] / Theta, independent of route A.
inline ScalarField mean_curvature_route_B(const GraphState& s, double theta_min = kRouteBThetaMin) {
  const ScalarField theta = compute_theta(s);
  if (theta.min() < theta_min) {
    std::ostringstream msg;
    msg << "mean_curvature_route_B: min Theta " << theta.min() << " below " << theta_min;
    throw NumericalError(msg.str());
  }
  const ScalarField lap = surface_laplacian(s, s.u);
  const int n = s.n();
  ScalarField out(s.u.base_ptr());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const WarpJet w = s.warp.eval_unchecked(s.u[k]);
    const double th = theta[k];
    out[k] = ((w.dh / w.h) * (n - 2.0 + th * th) - lap[k]) / th;
  }
  return out;
}

/// Ric_M(d_r, d_r) = -(n-1) h''(r)/h(r).
inline double ricci_ambient_nn(const WarpingFunction& w, int n, double r) {
  const WarpJet j = w(r);
  return -(n - 1.0) * j.d2h / j.h;
}

struct GraphGeometry {
  ScalarField theta;
  ScalarField H;
  ScalarField A_sq;
  ScalarField surf_lap_u;
};

inline GraphGeometry compute_geometry(const GraphState& s) {
  const auto jets = detail::warp_jets(s);
  GraphGeometry g{ScalarField(s.u.base_ptr()), ScalarField(s.u.base_ptr()),
                  ScalarField(s.u.base_ptr()), surface_laplacian(s, s.u)};
  for (std::size_t k = 0; k < s.u.size(); ++k) {
    const PointGeometry p = point_geometry_at(s, k, jets[k]);
    g.theta[k] = p.theta;
    g.H[k] = p.H;
    g.A_sq[k] = p.A_sq;
  }
  return g;
}

/// Delta_S u - (h'/h)(n-2+Theta^2) + H Theta, with H from route A.
inline ScalarField prop_delta_u_residual(const GraphState& s, const GraphGeometry& g) {
  const int n = s.n();
  ScalarField out(s.u.base_ptr());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const WarpJet w = s.warp.eval_unchecked(s.u[k]);
    const double th = g.theta[k];
    out[k] = g.surf_lap_u[k] - (w.dh / w.h) * (n - 2.0 + th * th) + g.H[k] * th;
  }
  return out;
}

inline ScalarField prop_delta_u_residual(const GraphState& s) {
  return prop_delta_u_residual(s, compute_geometry(s));
}

struct IdentityResiduals {
  ScalarField prop_delta_u;
  ScalarField ricci_nn;
  std::optional<ScalarField> theta_sq_evolution;
  std::optional<ScalarField> inequality_slack;
};

/// Ric_M(d_r, d_r) from the Riccati equation of the slices, whose shape
/// operator is (h'/h) Id: -(n-1) [(h'/h)' + (h'/h)^2], with (h'/h)' taken by a
/// second-order finite difference in r (one-sided at the edge of the domain).
inline double ricci_nn_riccati(const WarpingFunction& w, int n, double r) {
  const auto lg = [&](double x) {
    const WarpJet j = w(x);
    return j.dh / j.h;
  };
  const double d = 1e-4 * std::max(1.0, std::abs(r));
  double dlg = 0.0;
  if (w.contains(r - d) && w.contains(r + d)) {
    dlg = (lg(r + d) - lg(r - d)) / (2.0 * d);
  } else if (w.contains(r + 2.0 * d)) {
    dlg = (-3.0 * lg(r) + 4.0 * lg(r + d) - lg(r + 2.0 * d)) / (2.0 * d);
  } else {
    dlg = (3.0 * lg(r) - 4.0 * lg(r - d) + lg(r - 2.0 * d)) / (2.0 * d);
  }
  const double l = lg(r);
  return -(n - 1.0) * (dlg + l * l);
}

/// Static residuals of a state; the evolution fields are filled by the flow.
inline IdentityResiduals compute_identity_residuals(const GraphState& s) {
  IdentityResiduals r{prop_delta_u_residual(s), ScalarField(s.u.base_ptr()), std::nullopt,
                      std::nullopt};
  for (std::size_t k = 0; k < s.u.size(); ++k)
    r.ricci_nn[k] = ricci_nn_riccati(s.warp, s.n(), s.u[k]) - ricci_ambient_nn(s.warp, s.n(), s.u[k]);
  return r;
}

}  // namespace wpmcf
