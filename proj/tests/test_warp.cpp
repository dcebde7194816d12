#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "wpmcf/geometry.hpp"
#include "wpmcf/warp.hpp"

using namespace wpmcf;

TEST(CoshWarp, ValuesAtOrigin) {
  const WarpingFunction w = make_cosh_warp();
  const WarpJet j = w(0.0);
  EXPECT_DOUBLE_EQ(j.h, 1.0);
  EXPECT_DOUBLE_EQ(j.dh, 0.0);
  EXPECT_DOUBLE_EQ(j.d2h, 1.0);
}

TEST(CoshWarp, HyperbolicIdentity) {
  const WarpingFunction w = make_cosh_warp();
  for (double r : probe_grid(-3.0, 3.0, 121)) {
    const WarpJet j = w(r);
    EXPECT_NEAR(j.log_concavity(), 1.0, 1e-13 * j.h * j.h) << "r = " << r;
  }
}

TEST(CoshWarp, MatchesLibmNearZero) {
  const WarpingFunction w = make_cosh_warp();
  for (double r : {1e-12, 1e-8, 1e-3, 0.2, -0.7, 4.0}) {
    const WarpJet j = w(r);
    EXPECT_NEAR(j.h, std::cosh(r), 4e-16 * std::cosh(r));
    EXPECT_NEAR(j.dh, std::sinh(r), 4e-16 * std::cosh(r));
  }
}

TEST(QuadraticWarp, PolynomialValues) {
  const double alpha[] = {0.5};
  const WarpingFunction w = make_builtin_warp(WarpFamily::quadratic, alpha, 2.0);
  const WarpJet j = w(1.0);
  EXPECT_DOUBLE_EQ(j.h, 1.5);
  EXPECT_DOUBLE_EQ(j.dh, 1.0);
  EXPECT_DOUBLE_EQ(j.d2h, 1.0);
  EXPECT_THROW(w(2.0), DomainError);
  EXPECT_THROW(w(-2.5), DomainError);
}

TEST(BuiltinWarp, DerivativesMatchFiniteDifferences) {
  const double alpha[] = {0.3};
  for (const WarpingFunction& w : {make_cosh_warp(), make_builtin_warp(WarpFamily::quadratic, alpha, 5.0)}) {
    for (double r : probe_grid(-2.0, 2.0, 17)) {
      const double d = 1e-4;
      const double fd1 = (w(r + d).h - w(r - d).h) / (2 * d);
      const double fd2 = (w(r + d).dh - w(r - d).dh) / (2 * d);
      EXPECT_NEAR(w(r).dh, fd1, 1e-6 * std::max(1.0, std::abs(fd1)));
      EXPECT_NEAR(w(r).d2h, fd2, 1e-6 * std::max(1.0, std::abs(fd2)));
    }
  }
}

TEST(BuiltinWarp, RejectsBadParameters) {
  const double bad[] = {0.0};
  const double good[] = {1.0};
  EXPECT_THROW(make_builtin_warp(WarpFamily::quadratic, bad, 1.0), ConfigError);
  EXPECT_THROW(make_builtin_warp(WarpFamily::quadratic, good, 0.0), ConfigError);
  EXPECT_THROW(make_builtin_warp(WarpFamily::cosh, {}, -1.0), ConfigError);
  EXPECT_THROW(make_builtin_warp(WarpFamily::dss, {}, 1.0), ConfigError);
}

TEST(Conditions, CoshFlatBase) {
  const WarpingFunction w = make_cosh_warp();
  const auto grid = probe_grid(-2.0, 2.0, 401);
  const ConditionsReport rep = check_conditions(w, 0.0, grid);
  EXPECT_TRUE(rep.all_pass());
  EXPECT_EQ(rep.c, 0.0);
  EXPECT_NEAR(rep.c3_margin, 1.0, 1e-12);
  ASSERT_EQ(rep.samples.size(), grid.size());
  for (const auto& s : rep.samples) {
    const double direct = std::cosh(s.r) * std::cosh(s.r) - std::sinh(s.r) * std::sinh(s.r);
    EXPECT_NEAR(s.c3_value, direct, 1e-12);
  }
}

TEST(Conditions, NegativeRhoKeepsCZero) {
  const WarpingFunction w = make_cosh_warp();
  const ConditionsReport rep = check_conditions(w, -0.5, probe_grid(-2.0, 2.0, 401));
  EXPECT_EQ(rep.c, 0.0);
  EXPECT_NEAR(rep.c3_margin, 0.5, 1e-12);
  EXPECT_TRUE(rep.all_pass());
}

TEST(Conditions, QuadraticBruteForce) {
  const double alpha = 0.5;
  const double params[] = {alpha};
  const WarpingFunction w = make_builtin_warp(WarpFamily::quadratic, params, 2.0);
  const auto grid = probe_grid(0.0, 1.0, 101);
  const ConditionsReport rep = check_conditions(w, 0.0, grid);
  double brute = kInf;
  for (double r : grid) brute = std::min(brute, (1 + alpha * r * r) * 2 * alpha - (2 * alpha * r) * (2 * alpha * r));
  EXPECT_NEAR(rep.c3_margin, brute, 1e-14);
  EXPECT_NEAR(rep.c3_margin, 0.5, 1e-14);
  EXPECT_TRUE(rep.c3_pass);
}

TEST(Conditions, QuadraticFailsC3ForLargeRadius) {
  const double params[] = {0.5};
  const WarpingFunction w = make_builtin_warp(WarpFamily::quadratic, params, 3.0);
  const ConditionsReport rep = check_conditions(w, 0.0, probe_grid(0.0, 2.0, 101));
  EXPECT_FALSE(rep.c3_pass);
  EXPECT_NEAR(rep.c3_margin, 3.0 - 4.0, 1e-14);
}

TEST(Conditions, MarginShiftsWithRho) {
  const WarpingFunction w = make_cosh_warp();
  const auto grid = probe_grid(-1.0, 1.0, 51);
  const double m1 = check_conditions(w, -0.5, grid).c3_margin;
  const double m2 = check_conditions(w, -0.2, grid).c3_margin;
  EXPECT_NEAR(m2 - m1, 0.3, 1e-14);
}

TEST(Conditions, ProbeErrors) {
  const double params[] = {0.5};
  const WarpingFunction w = make_builtin_warp(WarpFamily::quadratic, params, 1.0);
  EXPECT_THROW(check_conditions(w, 0.0, std::vector<double>{}), ConfigError);
  const std::vector<double> outside = {0.0, 1.5};
  EXPECT_THROW(check_conditions(w, 0.0, outside), DomainError);
}

TEST(AngleThreshold, CoshIsTanh) {
  const WarpingFunction w = make_cosh_warp();
  EXPECT_EQ(angle_threshold(w, 0.0), 0.0);
  EXPECT_NEAR(angle_threshold(w, 0.5), 0.46211715726000974, 1e-15);
  EXPECT_NEAR(angle_threshold(w, 0.5), std::sqrt(1.0 - 1.0 / std::pow(std::cosh(0.5), 2)), 1e-15);
  double prev = -1.0;
  for (double a : probe_grid(0.0, 3.0, 61)) {
    const double th = angle_threshold(w, a);
    EXPECT_NEAR(th, std::tanh(a), 1e-14);
    EXPECT_GE(th, prev);
    EXPECT_LT(th, 1.0);
    prev = th;
  }
  const double params[] = {0.5};
  EXPECT_THROW(angle_threshold(make_builtin_warp(WarpFamily::quadratic, params, 1.0), 1.5), DomainError);
}

TEST(CoshWarp, LogDerivativeMonotoneInAbsRadius) {
  const WarpingFunction w = make_cosh_warp();
  double prev = 0.0;
  for (double r : probe_grid(0.0, 4.0, 81)) {
    const double v = std::abs(w(r).dh / w(r).h);
    const double v_neg = std::abs(w(-r).dh / w(-r).h);
    EXPECT_GE(v, prev);
    EXPECT_DOUBLE_EQ(v, v_neg);
    prev = v;
  }
}

TEST(Dss, KappaZeroRootsAndStar) {
  const DssParameters p = make_dss_parameters(3, 1.0, 0.0);
  EXPECT_NEAR(p.s_lower, 1.0, 1e-12);
  EXPECT_TRUE(std::isinf(p.s_upper));
  EXPECT_DOUBLE_EQ(p.s_star, 1.5);
}

TEST(Dss, KappaPositiveRootsMatchCubicFormula) {
  const DssParameters p = make_dss_parameters(3, 1.0, 0.05);
  const auto [lo, hi] = oracle::dss_roots_n3(1.0, 0.05);
  EXPECT_NEAR(p.s_lower, lo, 1e-10);
  EXPECT_NEAR(p.s_upper, hi, 1e-9);
  EXPECT_LT(p.s_lower, p.s_star);
  EXPECT_LT(p.s_star, p.s_upper);
  EXPECT_NEAR(p.omega(p.s_lower), 0.0, 1e-13);
}

TEST(Dss, AdmissibilityInequality) {
  EXPECT_NO_THROW(make_dss_parameters(3, 1.0, 0.14));   // 27 * 0.14 = 3.78 < 4
  EXPECT_THROW(make_dss_parameters(3, 1.0, 0.15), ConfigError);  // 4.05 > 4
  EXPECT_THROW(make_dss_parameters(2, 1.0, 0.0), ConfigError);
  EXPECT_THROW(make_dss_parameters(3, -1.0, 0.0), ConfigError);
  const auto [w, rep] = build_dss_warp(make_dss_parameters(3, 1.0, 0.05), 256);
  EXPECT_NEAR(rep.admissibility_lhs, 1.35, 1e-12);
  EXPECT_NEAR(rep.admissibility_rhs, 4.0, 1e-12);
}

TEST(Dss, RadiusMatchesClosedForm) {
  const DssParameters p = make_dss_parameters(3, 1.0, 0.0);
  EXPECT_EQ(dss_radius(p, p.s_lower), 0.0);
  for (double s : {1.000001, 1.001, 1.2, 1.5, 2.0, 2.9}) EXPECT_NEAR(dss_radius(p, s), oracle::dss_radius_kappa0(s), 1e-12);
}

TEST(Dss, TabulatedWarpInvertsClosedForm) {
  const auto [w, rep] = build_dss_warp(make_dss_parameters(3, 1.0, 0.0), 1024);
  EXPECT_NEAR(w.h0(), 1.0, 1e-12);
  EXPECT_TRUE(w.half_open());
  EXPECT_THROW(w(-0.1), DomainError);
  for (double s : {1.01, 1.3, 1.5, 2.2, 2.9}) {
    const double r = oracle::dss_radius_kappa0(s);
    const WarpJet j = w(r);
    EXPECT_NEAR(j.h, s, 1e-8) << "s = " << s;
    EXPECT_NEAR(j.dh, std::sqrt(1.0 - 1.0 / s), 1e-8);
    EXPECT_NEAR(j.d2h, 0.5 / (s * s), 1e-8);
  }
}

TEST(Dss, VerificationTable) {
  for (double kappa : {0.0, 0.05}) {
    const auto [w, rep] = build_dss_warp(make_dss_parameters(3, 1.0, kappa), 1024);
    EXPECT_LE(rep.max_identity_error, 1e-6);
    EXPECT_LE(rep.max_omega_error, 1e-6);
    EXPECT_EQ(rep.table.size(), 1023u);
    for (std::size_t k = 1; k < rep.table.size(); ++k) {
      EXPECT_GT(rep.table[k].r, rep.table[k - 1].r);
      EXPECT_GT(rep.table[k].s, rep.table[k - 1].s);
    }
    EXPECT_NEAR(w(rep.r_star).h, 1.5, 1e-9);
  }
}

TEST(Dss, ConditionsHoldUpToStar) {
  const DssParameters p = make_dss_parameters(3, 1.0, 0.05);
  const auto [w, rep] = build_dss_warp(p, 1024);
  const double rho = 0.5;
  const ConditionsReport ok = check_conditions(w, rho, probe_grid(0.0, rep.r_star, 512));
  EXPECT_TRUE(ok.all_pass());
  EXPECT_FALSE(ok.unit_normalized);
  EXPECT_NEAR(ok.h0, p.s_lower, 1e-12);
  const ConditionsReport beyond = check_conditions(w, rho, probe_grid(0.0, 0.95 * rep.r_max, 512));
  EXPECT_FALSE(beyond.c3_pass);
}

TEST(Dss, CapValidation) {
  const DssParameters p = make_dss_parameters(3, 1.0, 0.05);
  EXPECT_THROW(build_dss_warp(p, 1024, p.s_upper + 1.0), ConfigError);
  EXPECT_THROW(build_dss_warp(p, 32), ConfigError);
}

TEST(Dss, AmbientRicciMatchesOmega) {
  const DssParameters p = make_dss_parameters(3, 1.0, 0.05);
  const auto [w, rep] = build_dss_warp(p, 1024);
  for (double r : probe_grid(0.0, 0.9 * rep.r_max, 9)) {
    const double s = w(r).h;
    EXPECT_NEAR(ricci_ambient_nn(w, 3, r), -2.0 * p.omega_prime(s) / (2.0 * s), 1e-12);
  }
}

TEST(Dss, HigherDimension) {
  const DssParameters p = make_dss_parameters(4, 1.0, 0.0);
  EXPECT_NEAR(p.s_lower, 1.0, 1e-12);
  EXPECT_NEAR(p.s_star, std::sqrt(2.0), 1e-14);
  const auto [w, rep] = build_dss_warp(p, 1024);
  EXPECT_LE(rep.max_identity_error, 1e-6);
}
