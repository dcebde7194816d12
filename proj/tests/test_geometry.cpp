#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "wpmcf/geometry.hpp"
#include "wpmcf/initial_data.hpp"

using namespace wpmcf;
using std::numbers::pi;

namespace {

WarpingFunction dss_warp() { return build_dss_warp(make_dss_parameters(3, 1.0, 0.05), 1024).first; }

GraphState smooth_torus_state(int n, double amp = 0.2) {
  const auto base = make_flat_torus({n, n});
  auto u = ScalarField::sample(base, [amp](double x, double y) {
    return 0.1 + amp * std::sin(2 * pi * x) * std::cos(2 * pi * y) + 0.5 * amp * std::cos(2 * pi * (x - y));
  });
  return {std::move(u), make_cosh_warp(), 0.0};
}

}  // namespace

TEST(Theta, ClosedFormAtNode) {
  LocalChart chart;
  chart.dim = 2;
  chart.gridded = 2;
  NodeJet jet;
  jet.value = 1.0;
  jet.d1 = {0.6, 0.8};
  const WarpJet w{std::cosh(1.0), std::sinh(1.0), std::cosh(1.0)};
  const PointGeometry p = point_geometry(chart, jet, w);
  EXPECT_NEAR(p.theta, std::cosh(1.0) / std::sqrt(std::cosh(1.0) * std::cosh(1.0) + 1.0), 1e-15);
  EXPECT_NEAR(p.theta, 0.83919, 1e-5);
  EXPECT_NEAR(p.grad_sq, 1.0, 1e-15);
}

TEST(Theta, GridFieldMatchesAnalyticGradient) {
  const auto base = make_flat_torus({256});
  const auto u = ScalarField::sample(base, [](double x, double) { return 0.3 * std::sin(2 * pi * x); });
  const ScalarField th = compute_theta({u, make_cosh_warp(), 0.0});
  for (std::size_t k = 0; k < th.size(); k += 17) {
    const double x = base->coordinates(k)[0];
    const double g = 0.6 * pi * std::cos(2 * pi * x);
    const double h = std::cosh(0.3 * std::sin(2 * pi * x));
    EXPECT_NEAR(th[k], 1.0 / std::sqrt(1.0 + g * g / (h * h)), 1e-3);
  }
}

TEST(Slices, UmbilicOnTorus) {
  const auto base = make_flat_torus({16, 16});
  for (double a : {-0.7, 0.1, 0.5, 1.0}) {
    const GraphState s{ScalarField(base, a), make_cosh_warp(), 0.0};
    const auto sff = compute_second_fundamental_form(s);
    for (std::size_t k = 0; k < base->size(); ++k) {
      EXPECT_NEAR(sff.H[k], 2.0 * std::tanh(a), 1e-12);
      EXPECT_NEAR(sff.A_sq[k], 2.0 * std::tanh(a) * std::tanh(a), 1e-12);
    }
    EXPECT_EQ(compute_theta(s).min(), 1.0);
  }
}

TEST(Slices, UmbilicOnSphereInDss) {
  const WarpingFunction w = dss_warp();
  for (int dim : {2, 3}) {
    const auto base = make_sphere_axisym(dim, 33);
    for (double a : {0.1, 0.5, 1.0}) {
      const GraphState s{ScalarField(base, a), w, 0.0};
      const WarpJet j = w(a);
      const double lg = j.dh / j.h;
      const auto sff = compute_second_fundamental_form(s);
      for (std::size_t k = 0; k < base->size(); ++k) {
        EXPECT_NEAR(sff.H[k], dim * lg, 1e-12) << "k = " << k;
        EXPECT_NEAR(sff.A_sq[k], dim * lg * lg, 1e-12);
      }
      const ScalarField hb = mean_curvature_route_B(s);
      EXPECT_NEAR(hb.min(), dim * lg, 1e-12);
      EXPECT_NEAR(hb.max(), dim * lg, 1e-12);
    }
  }
}

TEST(Slices, OriginSliceIsMinimal) {
  const auto base = make_flat_torus({8, 8});
  const GraphState s{ScalarField(base, 0.0), make_cosh_warp(), 0.0};
  EXPECT_EQ(compute_second_fundamental_form(s).H.max_abs(), 0.0);
}

TEST(Contraction, SparseEqualsFull) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const auto torus = make_flat_torus({16, 16});
  const auto torus1 = make_flat_torus({16});
  const auto sphere = make_sphere_axisym(3, 17);
  std::vector<LocalChart> charts = {torus->chart_at(3), torus1->chart_at(2), sphere->chart_at(0),
                                    sphere->chart_at(5), sphere->chart_at(11)};
  for (const LocalChart& c : charts) {
    for (int trial = 0; trial < 20; ++trial) {
      NodeJet jet;
      jet.value = U(rng);
      for (int i = 0; i < c.gridded; ++i) jet.d1[i] = U(rng);
      for (int i = 0; i < c.dim; ++i)
        for (int j = i; j < c.dim; ++j) jet.d2[i][j] = jet.d2[j][i] = 3.0 * U(rng);
      const WarpJet w{std::cosh(jet.value), std::sinh(jet.value), std::cosh(jet.value)};
      const PointGeometry a = point_geometry(c, jet, w);
      const PointGeometry b = point_geometry_full_contraction(c, jet, w);
      EXPECT_NEAR(a.H, b.H, 1e-12 * (1 + std::abs(b.H)));
      EXPECT_NEAR(a.A_sq, b.A_sq, 1e-12 * (1 + b.A_sq));
      EXPECT_NEAR(a.theta, b.theta, 1e-15);
      EXPECT_NEAR(a.diffusion_norm, b.diffusion_norm, 1e-14);
    }
  }
}

TEST(MeanCurvature, LinearizationAboutOriginSlice) {
  // For h = cosh and n = 2: H = u - u'' + O(u^2).
  const auto base = make_flat_torus({512});
  const double eps = 1e-4;
  const auto u = ScalarField::sample(base, [eps](double x, double) { return eps * std::sin(2 * pi * x); });
  const auto H = compute_second_fundamental_form({u, make_cosh_warp(), 0.0}).H;
  const double lin = eps * (1 + 4 * pi * pi);
  for (std::size_t k = 0; k < base->size(); k += 31) {
    const double x = base->coordinates(k)[0];
    EXPECT_NEAR(H[k], lin * std::sin(2 * pi * x), 1e-3 * lin);
  }
}

TEST(MeanCurvature, RouteAAgreesWithRouteB) {
  const auto err = [](int n) {
    const GraphState s = smooth_torus_state(n);
    const auto a = compute_second_fundamental_form(s).H;
    const auto b = mean_curvature_route_B(s);
    double e = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) e = std::max(e, std::abs(a[k] - b[k]));
    return e;
  };
  const double coarse = err(32);
  const double fine = err(64);
  EXPECT_LT(fine, 0.2);
  EXPECT_GT(coarse / fine, 3.5);
  EXPECT_LT(coarse / fine, 4.5);
}

TEST(MeanCurvature, RouteBRefusesSteepGraphs) {
  const auto base = make_flat_torus({32});
  const auto u = ScalarField::sample(base, [](double x, double) { return 0.2 * std::sin(2 * pi * x); });
  EXPECT_NO_THROW(mean_curvature_route_B({u, make_cosh_warp(), 0.0}));
  EXPECT_THROW(mean_curvature_route_B({u, make_cosh_warp(), 0.0}, 0.99), NumericalError);
}

TEST(MeanCurvature, TranslationInvariance) {
  const int n = 32;
  const GraphState s = smooth_torus_state(n);
  const auto base = s.u.base_ptr();
  ScalarField shifted(base);
  const int di = 5, dj = 11;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      shifted[static_cast<std::size_t>(j * n + i)] = s.u[static_cast<std::size_t>(((j + dj) % n) * n + (i + di) % n)];
  const auto a = compute_second_fundamental_form(s);
  const auto b = compute_second_fundamental_form({shifted, s.warp, 0.0});
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const auto k0 = static_cast<std::size_t>(((j + dj) % n) * n + (i + di) % n);
      const auto k1 = static_cast<std::size_t>(j * n + i);
      EXPECT_NEAR(b.H[k1], a.H[k0], 1e-12);
      EXPECT_NEAR(b.A_sq[k1], a.A_sq[k0], 1e-12);
    }
  }
}

TEST(MeanCurvature, NormSquaredDominatesTraceSquared) {
  const GraphState s = smooth_torus_state(48, 0.4);
  const auto sff = compute_second_fundamental_form(s);
  for (std::size_t k = 0; k < sff.H.size(); ++k) EXPECT_GE(sff.A_sq[k] * 2.0 + 1e-12, sff.H[k] * sff.H[k]);
}

TEST(SurfaceLaplacian, ConstantsAreHarmonic) {
  const GraphState torus = smooth_torus_state(32);
  EXPECT_EQ(surface_laplacian(torus, ScalarField(torus.u.base_ptr(), 2.5)).max_abs(), 0.0);
  const auto sphere = make_sphere_axisym(2, 33);
  const auto u = ScalarField::sample(sphere, [](double th, double) { return 0.3 + 0.1 * std::cos(th); });
  const GraphState s{u, dss_warp(), 0.0};
  EXPECT_EQ(surface_laplacian(s, ScalarField(sphere, -1.0)).max_abs(), 0.0);
}

TEST(SurfaceLaplacian, FlatGraphReducesToScaledBaseLaplacian) {
  const auto base = make_flat_torus({64, 64});
  const double a = 0.4;
  const GraphState s{ScalarField(base, a), make_cosh_warp(), 0.0};
  const auto w = ScalarField::sample(base, [](double x, double y) { return std::sin(2 * pi * x) * std::sin(4 * pi * y); });
  const auto lhs = surface_laplacian(s, w);
  const auto rhs = laplace_beltrami_N(*base, w);
  const double h2 = std::cosh(a) * std::cosh(a);
  for (std::size_t k = 0; k < base->size(); ++k) EXPECT_NEAR(lhs[k], rhs[k] / h2, 1e-9);
}

TEST(SurfaceLaplacian, SelfAdjointOnTorus1D) {
  const auto base = make_flat_torus({64});
  const auto u = ScalarField::sample(base, [](double x, double) { return 0.3 * std::sin(2 * pi * x); });
  const GraphState s{u, make_cosh_warp(), 0.0};
  const auto v = ScalarField::sample(base, [](double x, double) { return std::cos(2 * pi * x) + x * x; });
  const auto w = ScalarField::sample(base, [](double x, double) { return std::exp(std::sin(4 * pi * x)); });
  const auto lv = surface_laplacian(s, v);
  const auto lw = surface_laplacian(s, w);
  double a = 0.0, b = 0.0;
  for (std::size_t k = 0; k < base->size(); ++k) {
    const double g = base->gradient_at(u.values(), k)[0];
    const double vol = std::sqrt(std::cosh(u[k]) * std::cosh(u[k]) + g * g);
    a += w[k] * lv[k] * vol;
    b += v[k] * lw[k] * vol;
  }
  EXPECT_NEAR(a, b, 1e-9 * (std::abs(a) + 1));
}

TEST(Pairings, GradientAndNormalPairingOfHeight) {
  for (const GraphState& s : {smooth_torus_state(32, 0.4)}) {
    const auto theta = compute_theta(s);
    const auto grad = induced_gradient_sq(s, s.u);
    const auto pair = normal_pairing(s, s.u);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      EXPECT_NEAR(grad[k], 1.0 - theta[k] * theta[k], 1e-14);
      EXPECT_NEAR(pair[k], 1.0 - theta[k] * theta[k], 1e-14);
    }
  }
  const auto sphere = make_sphere_axisym(2, 65);
  const auto u = ScalarField::sample(sphere, [](double th, double) { return 0.4 + 0.2 * std::cos(th); });
  const GraphState s{u, dss_warp(), 0.0};
  const auto theta = compute_theta(s);
  const auto grad = induced_gradient_sq(s, s.u);
  for (std::size_t k = 0; k < theta.size(); ++k) EXPECT_NEAR(grad[k], 1.0 - theta[k] * theta[k], 1e-14);
}

TEST(Identities, DeltaUResidualIsSecondOrder) {
  const auto err = [](int n) { return prop_delta_u_residual(smooth_torus_state(n)).max_abs(); };
  const double ratio = err(32) / err(64);
  EXPECT_GT(ratio, 3.5);
  EXPECT_LT(ratio, 4.5);
}

TEST(Identities, DeltaUResidualOnSphere) {
  const auto err = [](int n) {
    const auto base = make_sphere_axisym(2, n + 1);
    const auto u = ScalarField::sample(base, [](double th, double) { return 0.5 + 0.15 * std::cos(th) + 0.05 * std::cos(2 * th); });
    return prop_delta_u_residual({u, dss_warp(), 0.0}).max_abs();
  };
  const double ratio = err(64) / err(128);
  EXPECT_GT(ratio, 3.0);
  EXPECT_LT(ratio, 5.0);
}

TEST(Identities, RicciFromRiccati) {
  const GraphState s = smooth_torus_state(16, 0.5);
  EXPECT_LT(compute_identity_residuals(s).ricci_nn.max_abs(), 1e-6);
  const WarpingFunction w = dss_warp();
  for (double r : {0.0, 1e-3, 0.5, 1.2}) EXPECT_NEAR(ricci_nn_riccati(w, 3, r), ricci_ambient_nn(w, 3, r), 1e-6);
  EXPECT_NEAR(ricci_ambient_nn(make_cosh_warp(), 3, 0.7), -2.0, 1e-15);
}

TEST(Geometry, RejectsHeightsOutsideDomain) {
  const auto base = make_flat_torus({8});
  const GraphState s{ScalarField(base, -0.1), dss_warp(), 0.0};
  EXPECT_THROW(compute_second_fundamental_form(s), DomainError);
  EXPECT_THROW(compute_theta(s), DomainError);
}
