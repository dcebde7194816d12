#pragma once

// Catalog of initial height fields: constant, sine-product, gaussian-bump.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "wpmcf/base.hpp"
#include "wpmcf/errors.hpp"
#include "wpmcf/geometry.hpp"
#include "wpmcf/warp.hpp"

namespace wpmcf {

enum class InitialKind { constant, sine_product, gaussian_bump };

inline std::string to_string(InitialKind k) {
  switch (k) {
    case InitialKind::constant: return "constant";
    case InitialKind::sine_product: return "sine-product";
    case InitialKind::gaussian_bump: return "gaussian-bump";
  }
  return "?";
}

inline InitialKind parse_initial_kind(const std::string& s) {
  if (s == "constant") return InitialKind::constant;
  if (s == "sine-product") return InitialKind::sine_product;
  if (s == "gaussian-bump") return InitialKind::gaussian_bump;
  throw ConfigError("unknown initial data kind '" + s + "'");
}

struct InitialData {
  InitialKind kind = InitialKind::constant;
  double offset = 0.0;
  double amplitude = 0.0;
  int wavenumber = 1;
  double width = 0.1;
};

/// Torus: offset + A sin(2 pi k x/Lx) cos(2 pi k y/Ly) or a bump at the cell
/// centre in the periodic distance. Sphere: offset + A cos(k theta) or a bump
/// exp(-theta^2 / 2w^2) at the north pole.
inline ScalarField make_initial_field(const BasePtr& base, const InitialData& d) {
  if (d.wavenumber < 1) throw ConfigError("initial data: wavenumber must be >= 1");
  if (!(d.width > 0.0)) throw ConfigError("initial data: width must be > 0");
  const double two_pi = 2.0 * std::numbers::pi;
  const BaseManifold& b = *base;
  return ScalarField::sample(base, [&](double x, double y) {
    switch (d.kind) {
      case InitialKind::constant:
        return d.offset;
      case InitialKind::sine_product:
        if (!b.is_torus()) return d.offset + d.amplitude * std::cos(d.wavenumber * x);
        if (b.dim() == 1) return d.offset + d.amplitude * std::sin(two_pi * d.wavenumber * x / b.period(0));
        return d.offset + d.amplitude * std::sin(two_pi * d.wavenumber * x / b.period(0)) *
                              std::cos(two_pi * d.wavenumber * y / b.period(1));
      case InitialKind::gaussian_bump: {
        double r2 = 0.0;
        if (!b.is_torus()) {
          r2 = x * x;
        } else {
          for (int a = 0; a < b.dim(); ++a) {
            const double c = (a == 0 ? x : y) - 0.5 * b.period(a);
            r2 += c * c;
          }
        }
        return d.offset + d.amplitude * std::exp(-r2 / (2.0 * d.width * d.width));
      }
    }
    return d.offset;
  });
}

/// Smooth random field: offset + amplitude * sum over wavevectors |k|_inf <= modes
/// of (a_k cos + b_k sin)(2 pi (k1 x/Lx + k2 y/Ly)) with a_k, b_k uniform in
/// [-1, 1] / (1 + |k|^2), scaled by 1 / sum(|a_k| + |b_k|) so that
/// |u - offset| <= amplitude. The coefficients depend only on (seed, modes), so
/// refining the grid samples the same continuum function. On the sphere the
/// field is offset + amplitude * sum_{l=1..modes} a_l cos(l theta) (same scaling).
struct RandomFieldSpec {
  std::uint64_t seed = 0;
  int modes = 3;
  double offset = 0.0;
  double amplitude = 0.1;
};

inline ScalarField make_random_field(const BasePtr& base, const RandomFieldSpec& spec) {
  if (spec.modes < 1) throw ConfigError("make_random_field: modes must be >= 1");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  struct Mode {
    int k1, k2;
    double a, b;
  };
  std::vector<Mode> modes;
  double l1 = 0.0;
  const int K = spec.modes;
  const bool torus = base->is_torus();
  const int k2max = torus && base->dim() == 2 ? K : 0;
  for (int k1 = torus ? -K : 1; k1 <= K; ++k1) {
    for (int k2 = -k2max; k2 <= k2max; ++k2) {
      if (k1 == 0 && k2 == 0) continue;
      const double damp = 1.0 / (1.0 + k1 * k1 + k2 * k2);
      const double a = coef(rng) * damp;
      const double b = coef(rng) * damp;
      modes.push_back({k1, k2, a, b});
      l1 += std::abs(a) + std::abs(b);
    }
  }
  const double two_pi = 2.0 * std::numbers::pi;
  const BaseManifold& b = *base;
  const double Ly = b.dim() == 2 ? b.period(1) : 1.0;
  ScalarField raw = ScalarField::sample(base, [&](double x, double y) {
    double v = 0.0;
    for (const Mode& m : modes) {
      if (!torus) {
        v += m.a * std::cos(m.k1 * x);
        continue;
      }
      const double ph = two_pi * (m.k1 * x / b.period(0) + m.k2 * y / Ly);
      v += m.a * std::cos(ph) + m.b * std::sin(ph);
    }
    return v;
  });
  const double scale = spec.amplitude / l1;
  for (std::size_t k = 0; k < raw.size(); ++k) raw[k] = spec.offset + scale * raw[k];
  return raw;
}

/// Rescales the amplitude so that the discrete min Theta of the initial graph
/// equals `target` (bisection; min Theta decreases with the amplitude).
inline InitialData calibrate_amplitude(const BasePtr& base, const WarpingFunction& warp, InitialData d,
                                       double target) {
  if (d.kind == InitialKind::constant) throw ConfigError("calibrate_amplitude: constant data has no amplitude");
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("calibrate_amplitude: target must lie in (0, 1)");
  const auto min_theta = [&](double amp) {
    InitialData trial = d;
    trial.amplitude = amp;
    return compute_theta(GraphState{make_initial_field(base, trial), warp, 0.0}).min();
  };
  double lo = 0.0;
  double hi = d.amplitude > 0.0 ? d.amplitude : 0.1;
  while (min_theta(hi) > target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw NumericalError("calibrate_amplitude: could not reach target angle");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (min_theta(mid) > target) lo = mid; else hi = mid;
  }
  d.amplitude = 0.5 * (lo + hi);
  return d;
}

}  // namespace wpmcf
