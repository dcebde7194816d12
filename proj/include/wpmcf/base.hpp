#pragma once

// Discretized closed base manifolds N: the flat torus T^1 / T^2 on uniform
// periodic grids and the round unit sphere S^m restricted to axisymmetric
// fields f(theta), with the intrinsic Laplacian and squared gradient.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <memory>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wpmcf/errors.hpp"

namespace wpmcf {

enum class BaseVariant { FlatTorus, SphereAxisym };

inline std::string to_string(BaseVariant v) {
  return v == BaseVariant::FlatTorus ? "torus" : "sphere";
}

/// Coordinates, metric and Christoffel symbols of N at one grid node, in at
/// most two representative coordinates.
///
/// Torus: Cartesian axes. Sphere interior: (theta, phi) where phi stands for
/// each of the m-1 directions of the S^(m-1) orbit, carried with weight m-1.
/// Sphere poles: two Cartesian directions of a normal chart, weights 1, m-1.
struct LocalChart {
  int dim = 1;
  int gridded = 1;                                           // coordinates resolved by the grid
  std::array<double, 2> metric{1.0, 1.0};                    // diagonal of g_N
  std::array<double, 2> weight{1.0, 1.0};                    // multiplicity in traces
  std::array<std::array<std::array<double, 2>, 2>, 2> christoffel{};  // [k][i][j] = Gamma^k_ij
};

/// Discrete value, first and second coordinate derivatives at a node.
struct NodeJet {
  double value = 0.0;
  std::array<double, 2> d1{};
  std::array<std::array<double, 2>, 2> d2{};
};

class BaseManifold {
 public:
  /// Uniform periodic grid with `counts` points per axis (1 or 2 axes).
  static BaseManifold flat_torus(std::vector<int> counts, std::vector<double> periods = {}) {
    if (counts.empty() || counts.size() > 2) throw ConfigError("flat torus: dimension must be 1 or 2");
    if (periods.empty()) periods.assign(counts.size(), 1.0);
    if (periods.size() != counts.size()) throw ConfigError("flat torus: one period per axis");
    BaseManifold b;
    b.variant_ = BaseVariant::FlatTorus;
    b.dim_ = static_cast<int>(counts.size());
    for (std::size_t a = 0; a < counts.size(); ++a) {
      if (counts[a] < 4) throw ConfigError("flat torus: need at least 4 points per axis");
      if (!(periods[a] > 0.0)) throw ConfigError("flat torus: periods must be > 0");
      b.counts_[a] = counts[a];
      b.periods_[a] = periods[a];
      b.spacing_[a] = periods[a] / counts[a];
    }
    return b;
  }

  /// Unit sphere S^m, axisymmetric fields on theta in [0, pi], poles included.
  static BaseManifold sphere_axisym(int dim, int n_theta) {
    if (dim < 2) throw ConfigError("axisymmetric sphere: dimension must be >= 2");
    if (n_theta < 5) throw ConfigError("axisymmetric sphere: need at least 5 theta nodes");
    BaseManifold b;
    b.variant_ = BaseVariant::SphereAxisym;
    b.dim_ = dim;
    b.counts_ = {n_theta, 1};
    b.periods_ = {std::numbers::pi, 0.0};
    b.spacing_ = {std::numbers::pi / (n_theta - 1), 0.0};
    return b;
  }

  BaseVariant variant() const { return variant_; }
  bool is_torus() const { return variant_ == BaseVariant::FlatTorus; }
  /// Dimension m = n - 1 of N.
  int dim() const { return dim_; }
  /// Dimension n of the ambient warped product.
  int ambient_dim() const { return dim_ + 1; }
  /// Number of grid axes (torus: dim, sphere: 1).
  int axes() const { return is_torus() ? dim_ : 1; }
  int count(int axis) const { return counts_[static_cast<std::size_t>(axis)]; }
  int nx() const { return counts_[0]; }
  int ny() const { return counts_[1]; }
  double spacing(int axis = 0) const { return spacing_[static_cast<std::size_t>(axis)]; }
  double period(int axis = 0) const { return periods_[static_cast<std::size_t>(axis)]; }
  std::size_t size() const { return static_cast<std::size_t>(counts_[0]) * counts_[1]; }

  /// Ricci lower bound rho in Ric_N >= (n-1) rho g_N.
  double rho() const { return is_torus() ? 0.0 : (dim_ - 1.0) / dim_; }
  /// Ric_N(v, v) for unit v.
  double ric_unit() const { return is_torus() ? 0.0 : dim_ - 1.0; }

  double theta(std::size_t k) const { return static_cast<double>(k) * spacing_[0]; }

  /// Coordinates of node k: (x, y) on the torus, (theta, 0) on the sphere.
  std::array<double, 2> coordinates(std::size_t k) const {
    const auto i = k % static_cast<std::size_t>(counts_[0]);
    const auto j = k / static_cast<std::size_t>(counts_[0]);
    return {static_cast<double>(i) * spacing_[0], static_cast<double>(j) * spacing_[1]};
  }

  /// Quadrature weight of node k (torus dx^m; sphere |S^(m-1)| sin^(m-1) dtheta).
  double volume_weight(std::size_t k) const {
    if (is_torus()) return dim_ == 1 ? spacing_[0] : spacing_[0] * spacing_[1];
    if (k == 0 || k + 1 == size()) return 0.0;
    const double orbit = 2.0 * std::pow(std::numbers::pi, 0.5 * dim_) / std::tgamma(0.5 * dim_);
    return orbit * std::pow(std::sin(theta(k)), dim_ - 1) * spacing_[0];
  }

  bool is_pole(std::size_t k) const { return !is_torus() && (k == 0 || k + 1 == size()); }

  LocalChart chart_at(std::size_t k) const {
    LocalChart c;
    if (is_torus()) {
      c.dim = dim_;
      c.gridded = dim_;
      return c;
    }
    c.dim = 2;
    c.gridded = 1;
    c.weight = {1.0, dim_ - 1.0};
    if (is_pole(k)) return c;
    const double th = theta(k);
    const double s = std::sin(th);
    const double co = std::cos(th);
    c.metric = {1.0, s * s};
    c.christoffel[0][1][1] = -s * co;
    c.christoffel[1][0][1] = co / s;
    c.christoffel[1][1][0] = co / s;
    return c;
  }

  /// Central-difference jet of `values` at node k (periodic wrap on the
  /// torus, even reflection across the poles on the sphere).
  NodeJet jet_at(std::span<const double> values, std::size_t k) const {
    NodeJet jet;
    jet.value = values[k];
    if (is_torus()) {
      const int nx = counts_[0];
      const int i = static_cast<int>(k % static_cast<std::size_t>(nx));
      const int j = static_cast<int>(k / static_cast<std::size_t>(nx));
      const int ip = (i + 1 == nx) ? 0 : i + 1;
      const int im = (i == 0) ? nx - 1 : i - 1;
      const double hx = spacing_[0];
      const double* row = values.data() + static_cast<std::size_t>(j) * nx;
      jet.d1[0] = (row[ip] - row[im]) / (2.0 * hx);
      jet.d2[0][0] = (row[ip] - 2.0 * row[i] + row[im]) / (hx * hx);
      if (dim_ == 2) {
        const int ny = counts_[1];
        const int jp = (j + 1 == ny) ? 0 : j + 1;
        const int jm = (j == 0) ? ny - 1 : j - 1;
        const double hy = spacing_[1];
        const double* up = values.data() + static_cast<std::size_t>(jp) * nx;
        const double* dn = values.data() + static_cast<std::size_t>(jm) * nx;
        jet.d1[1] = (up[i] - dn[i]) / (2.0 * hy);
        jet.d2[1][1] = (up[i] - 2.0 * row[i] + dn[i]) / (hy * hy);
        jet.d2[0][1] = jet.d2[1][0] = (up[ip] - up[im] - dn[ip] + dn[im]) / (4.0 * hx * hy);
      }
      return jet;
    }
    const std::size_t last = size() - 1;
    const double h = spacing_[0];
    if (k == 0 || k == last) {
      const double nb = values[k == 0 ? 1 : last - 1];
      const double uu = 2.0 * (nb - values[k]) / (h * h);
      jet.d2[0][0] = uu;
      jet.d2[1][1] = uu;
      return jet;
    }
    jet.d1[0] = (values[k + 1] - values[k - 1]) / (2.0 * h);
    jet.d2[0][0] = (values[k + 1] - 2.0 * values[k] + values[k - 1]) / (h * h);
    return jet;
  }

  /// Central first derivatives along the grid axes.
  std::array<double, 2> gradient_at(std::span<const double> values, std::size_t k) const {
    std::array<double, 2> g{};
    if (is_torus()) {
      const int nx = counts_[0];
      const int i = static_cast<int>(k % static_cast<std::size_t>(nx));
      const int j = static_cast<int>(k / static_cast<std::size_t>(nx));
      const std::size_t row = static_cast<std::size_t>(j) * nx;
      g[0] = (values[row + (i + 1 == nx ? 0 : i + 1)] - values[row + (i == 0 ? nx - 1 : i - 1)]) /
             (2.0 * spacing_[0]);
      if (dim_ == 2) {
        const int ny = counts_[1];
        const std::size_t up = static_cast<std::size_t>(j + 1 == ny ? 0 : j + 1) * nx + i;
        const std::size_t dn = static_cast<std::size_t>(j == 0 ? ny - 1 : j - 1) * nx + i;
        g[1] = (values[up] - values[dn]) / (2.0 * spacing_[1]);
      }
      return g;
    }
    if (is_pole(k)) return g;
    g[0] = (values[k + 1] - values[k - 1]) / (2.0 * spacing_[0]);
    return g;
  }

  bool operator==(const BaseManifold& o) const {
    return variant_ == o.variant_ && dim_ == o.dim_ && counts_ == o.counts_ && periods_ == o.periods_;
  }

  /// Header line describing the grid, used by the CSV writers.
  std::string shape_header() const {
    std::ostringstream os;
    os << "# base=" << to_string(variant_) << " dim=" << dim_ << " shape=" << counts_[0];
    if (is_torus() && dim_ == 2) os << "x" << counts_[1];
    if (is_torus()) {
      os << " periods=" << periods_[0];
      if (dim_ == 2) os << "," << periods_[1];
    }
    return os.str();
  }

 private:
  BaseManifold() = default;

  BaseVariant variant_ = BaseVariant::FlatTorus;
  int dim_ = 1;
  std::array<int, 2> counts_{1, 1};
  std::array<double, 2> periods_{1.0, 1.0};
  std::array<double, 2> spacing_{1.0, 1.0};
};

using BasePtr = std::shared_ptr<const BaseManifold>;

inline BasePtr make_flat_torus(std::vector<int> counts, std::vector<double> periods = {}) {
  return std::make_shared<const BaseManifold>(BaseManifold::flat_torus(std::move(counts), std::move(periods)));
}

inline BasePtr make_sphere_axisym(int dim, int n_theta) {
  return std::make_shared<const BaseManifold>(BaseManifold::sphere_axisym(dim, n_theta));
}

/// Real values on the nodes of a base grid.
class ScalarField {
 public:
  explicit ScalarField(BasePtr base, double fill = 0.0)
      : base_(std::move(base)), values_(base_->size(), fill) {}

  ScalarField(BasePtr base, std::vector<double> values)
      : base_(std::move(base)), values_(std::move(values)) {
    if (values_.size() != base_->size()) throw ConfigError("ScalarField: shape does not match grid");
  }

  /// Samples f(coordinates) on every node.
  template <class F>
  static ScalarField sample(BasePtr base, F&& f) {
    ScalarField out(base);
    for (std::size_t k = 0; k < out.size(); ++k) {
      const auto c = base->coordinates(k);
      out.values_[k] = f(c[0], c[1]);
    }
    return out;
  }

  const BaseManifold& base() const { return *base_; }
  const BasePtr& base_ptr() const { return base_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }

  bool all_finite() const {
    for (double v : values_) if (!std::isfinite(v)) return false;
    return true;
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }
  double min() const {
    double m = values_.front();
    for (double v : values_) m = std::min(m, v);
    return m;
  }
  double max() const {
    double m = values_.front();
    for (double v : values_) m = std::max(m, v);
    return m;
  }
  /// Quadrature of the field with the base volume weights.
  double integrate() const {
    double acc = 0.0;
    for (std::size_t k = 0; k < size(); ++k) acc += values_[k] * base_->volume_weight(k);
    return acc;
  }

 private:
  BasePtr base_;
  std::vector<double> values_;
};

inline void require_same_base(const BaseManifold& base, const ScalarField& f, const char* where) {
  if (!(f.base() == base)) throw ConfigError(std::string(where) + ": field defined on a different base");
}

inline void require_same_base(const ScalarField& a, const ScalarField& b, const char* where) {
  require_same_base(a.base(), b, where);
}

/// Laplace-Beltrami operator of g_N. Torus: compact central stencil per axis.
/// Sphere: u'' + (m-1) cot(theta) u', equal to m u'' at the poles.
inline ScalarField laplace_beltrami_N(const BaseManifold& base, const ScalarField& u) {
  require_same_base(base, u, "laplace_beltrami_N");
  ScalarField out(u.base_ptr());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const LocalChart c = base.chart_at(k);
    const NodeJet j = base.jet_at(u.values(), k);
    double acc = 0.0;
    for (int i = 0; i < c.dim; ++i) {
      double hess = j.d2[i][i];
      for (int q = 0; q < c.dim; ++q) hess -= c.christoffel[q][i][i] * j.d1[q];
      acc += c.weight[i] * hess / c.metric[i];
    }
    out[k] = acc;
  }
  return out;
}

/// |grad_N u|^2 in the metric g_N, central differences.
inline ScalarField gradient_sq_N(const BaseManifold& base, const ScalarField& u) {
  require_same_base(base, u, "gradient_sq_N");
  ScalarField out(u.base_ptr());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const auto g = base.gradient_at(u.values(), k);
    const LocalChart c = base.chart_at(k);
    double acc = 0.0;
    for (int i = 0; i < c.gridded; ++i) acc += g[i] * g[i] / c.metric[i];
    out[k] = acc;
  }
  return out;
}

/// Writes named fields as CSV: a '#' grid header, then index, coordinates, fields.
inline void write_fields_csv(std::ostream& os,
                             const std::vector<std::pair<std::string, const ScalarField*>>& fields) {
  if (fields.empty()) throw ConfigError("write_fields_csv: no fields");
  const BaseManifold& base = fields.front().second->base();
  for (const auto& [name, f] : fields) require_same_base(base, *f, "write_fields_csv");
  os << base.shape_header() << "\n";
  os << "index";
  if (base.is_torus()) {
    os << ",x";
    if (base.dim() == 2) os << ",y";
  } else {
    os << ",theta";
  }
  for (const auto& [name, f] : fields) os << "," << name;
  os << "\n";
  char buf[40];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << "," << buf;
  };
  for (std::size_t k = 0; k < base.size(); ++k) {
    os << k;
    const auto c = base.coordinates(k);
    put(c[0]);
    if (base.is_torus() && base.dim() == 2) put(c[1]);
    for (const auto& [name, f] : fields) put((*f)[k]);
    os << "\n";
  }
}

}  // namespace wpmcf
