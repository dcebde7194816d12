#pragma once

// Flat key = value experiment configuration.
//
//   # comment
//   warp.family = cosh
//   base.nx = 64
//   conditions.a0 = 0.25, 0.5, 1.0
//
// Keys are dotted "section.field". Unknown and repeated keys are rejected;
// every field not set in the file takes its documented default. A manifest.json
// written by a run can be read back in place of the text file.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wpmcf/base.hpp"
#include "wpmcf/errors.hpp"
#include "wpmcf/flow.hpp"
#include "wpmcf/initial_data.hpp"
#include "wpmcf/warp.hpp"

namespace wpmcf {

inline constexpr const char* kVersion = "1.0.0";

struct WarpSection {
  std::string family = "cosh";
  double alpha = 0.5;
  double r_max = kInf;
};

struct DssSection {
  double mass = 1.0;
  double kappa = 0.0;
  int grid_size = 1024;
  double s_cap = 0.0;  // 0: default cap
};

struct BaseSection {
  std::string variant = "torus";
  int dim = 2;
  int nx = 64;
  int ny = 64;
  double period_x = 1.0;
  double period_y = 1.0;
  int ntheta = 129;
};

struct InitialSection {
  std::string kind = "constant";
  double offset = 0.0;
  double amplitude = 0.0;
  int wavenumber = 1;
  double width = 0.1;
  std::optional<double> a0;
  /// Rescale the amplitude so that min Theta_0 = angle_factor * threshold(a0).
  std::optional<double> angle_factor;
};

struct BarrierSection {
  double a = 0.5;
  double f0_bar = 1.0;
  double dt = 1e-3;
  double t_end = 10.0;
};

struct ConditionsSection {
  std::optional<double> rho;  // defaults to the base Ricci bound
  std::optional<double> r_min;
  std::optional<double> r_max;
  int points = 1024;
  std::vector<double> a0;
};

struct ValidateSection {
  int resolution = 64;
  int samples = 10;
  int modes = 2;
  double target_theta = 0.8;
};

struct SweepSection {
  std::string axis = "a0";
  std::vector<double> values;
};

struct ExperimentConfig {
  WarpSection warp;
  DssSection dss;
  BaseSection base;
  InitialSection initial;
  FlowConfig flow;
  BarrierSection barrier;
  ConditionsSection conditions;
  ValidateSection validate;
  SweepSection sweep;
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  int n() const { return base.dim + 1; }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

inline std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& key, const std::string& text) {
  std::string t = trim(text);
  if (t == "inf" || t == "+inf") return kInf;
  if (t == "-inf") return -kInf;
  double v = 0.0;
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || ptr != end || t.empty() || !std::isfinite(v))
    throw ConfigError("key '" + key + "': expected a decimal number, got '" + t + "'");
  return v;
}

inline long long parse_integer(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || ptr != end || t.empty())
    throw ConfigError("key '" + key + "': expected an integer, got '" + t + "'");
  return v;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
  return out;
}

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_double(v[i]);
  return s;
}

inline int to_int(const std::string& key, long long v) {
  if (v < -2147483647LL || v > 2147483647LL) throw ConfigError("key '" + key + "': integer out of range");
  return static_cast<int>(v);
}

struct FieldSpec {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
FieldSpec real_field(std::string key, T ExperimentConfig::*section, double T::*member) {
  return {key,
          [=](ExperimentConfig& c, const std::string& v) { (c.*section).*member = parse_double(key, v); },
          [=](const ExperimentConfig& c) { return fmt_double((c.*section).*member); }};
}

template <class T>
FieldSpec opt_real_field(std::string key, T ExperimentConfig::*section, std::optional<double> T::*member) {
  return {key,
          [=](ExperimentConfig& c, const std::string& v) { (c.*section).*member = parse_double(key, v); },
          [=](const ExperimentConfig& c) {
            const auto& o = (c.*section).*member;
            return o ? fmt_double(*o) : std::string("auto");
          }};
}

template <class T>
FieldSpec int_field(std::string key, T ExperimentConfig::*section, int T::*member) {
  return {key,
          [=](ExperimentConfig& c, const std::string& v) {
            (c.*section).*member = to_int(key, parse_integer(key, v));
          },
          [=](const ExperimentConfig& c) { return std::to_string((c.*section).*member); }};
}

template <class T>
FieldSpec string_field(std::string key, T ExperimentConfig::*section, std::string T::*member) {
  return {key, [=](ExperimentConfig& c, const std::string& v) { (c.*section).*member = trim(v); },
          [=](const ExperimentConfig& c) { return (c.*section).*member; }};
}

template <class T>
FieldSpec list_field(std::string key, T ExperimentConfig::*section, std::vector<double> T::*member) {
  return {key,
          [=](ExperimentConfig& c, const std::string& v) { (c.*section).*member = parse_list(key, v); },
          [=](const ExperimentConfig& c) { return fmt_list((c.*section).*member); }};
}

inline std::string fmt_checks(const ResidualChecks& r) {
  std::string s;
  const auto add = [&](bool on, const char* name) {
    if (on) s += (s.empty() ? "" : ", ") + std::string(name);
  };
  add(r.cor26, "cor26");
  add(r.thm31, "thm31");
  add(r.ineq32, "ineq32");
  return s.empty() ? "none" : s;
}

inline ResidualChecks parse_checks(const std::string& key, const std::string& text) {
  ResidualChecks r{false, false, false};
  if (trim(text) == "none") return r;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item == "cor26") r.cor26 = true;
    else if (item == "thm31") r.thm31 = true;
    else if (item == "ineq32") r.ineq32 = true;
    else throw ConfigError("key '" + key + "': unknown residual check '" + item + "'");
  }
  return r;
}

inline const std::vector<FieldSpec>& field_specs() {
  using C = ExperimentConfig;
  static const std::vector<FieldSpec> specs = [] {
    std::vector<FieldSpec> f;
    f.push_back({"seed",
                 [](C& c, const std::string& v) {
                   const long long s = parse_integer("seed", v);
                   if (s < 0) throw ConfigError("key 'seed': must be >= 0");
                   c.seed = static_cast<std::uint64_t>(s);
                 },
                 [](const C& c) { return std::to_string(c.seed); }});
    f.push_back({"output_dir", [](C& c, const std::string& v) { c.output_dir = trim(v); },
                 [](const C& c) { return c.output_dir; }});
    f.push_back(string_field("warp.family", &C::warp, &WarpSection::family));
    f.push_back(real_field("warp.alpha", &C::warp, &WarpSection::alpha));
    f.push_back(real_field("warp.r_max", &C::warp, &WarpSection::r_max));
    f.push_back(real_field("dss.mass", &C::dss, &DssSection::mass));
    f.push_back(real_field("dss.kappa", &C::dss, &DssSection::kappa));
    f.push_back(int_field("dss.grid_size", &C::dss, &DssSection::grid_size));
    f.push_back(real_field("dss.s_cap", &C::dss, &DssSection::s_cap));
    f.push_back(string_field("base.variant", &C::base, &BaseSection::variant));
    f.push_back(int_field("base.dim", &C::base, &BaseSection::dim));
    f.push_back(int_field("base.nx", &C::base, &BaseSection::nx));
    f.push_back(int_field("base.ny", &C::base, &BaseSection::ny));
    f.push_back(real_field("base.period_x", &C::base, &BaseSection::period_x));
    f.push_back(real_field("base.period_y", &C::base, &BaseSection::period_y));
    f.push_back(int_field("base.ntheta", &C::base, &BaseSection::ntheta));
    f.push_back(string_field("initial.kind", &C::initial, &InitialSection::kind));
    f.push_back(real_field("initial.offset", &C::initial, &InitialSection::offset));
    f.push_back(real_field("initial.amplitude", &C::initial, &InitialSection::amplitude));
    f.push_back(int_field("initial.wavenumber", &C::initial, &InitialSection::wavenumber));
    f.push_back(real_field("initial.width", &C::initial, &InitialSection::width));
    f.push_back(opt_real_field("initial.a0", &C::initial, &InitialSection::a0));
    f.push_back(opt_real_field("initial.angle_factor", &C::initial, &InitialSection::angle_factor));
    f.push_back(real_field("flow.dt_safety", &C::flow, &FlowConfig::dt_safety));
    f.push_back(real_field("flow.t_end", &C::flow, &FlowConfig::t_end));
    f.push_back(int_field("flow.output_stride", &C::flow, &FlowConfig::output_stride));
    f.push_back(real_field("flow.theta_floor", &C::flow, &FlowConfig::theta_floor));
    f.push_back(real_field("flow.convergence_eps", &C::flow, &FlowConfig::convergence_eps));
    f.push_back({"flow.residual_checks",
                 [](C& c, const std::string& v) { c.flow.residual_checks = parse_checks("flow.residual_checks", v); },
                 [](const C& c) { return fmt_checks(c.flow.residual_checks); }});
    f.push_back(real_field("flow.tol_avoid", &C::flow, &FlowConfig::tol_avoid));
    f.push_back(real_field("flow.tol_angle", &C::flow, &FlowConfig::tol_angle));
    f.push_back(int_field("flow.state_stride", &C::flow, &FlowConfig::state_stride));
    f.push_back(real_field("barrier.a", &C::barrier, &BarrierSection::a));
    f.push_back(real_field("barrier.f0_bar", &C::barrier, &BarrierSection::f0_bar));
    f.push_back(real_field("barrier.dt", &C::barrier, &BarrierSection::dt));
    f.push_back(real_field("barrier.t_end", &C::barrier, &BarrierSection::t_end));
    f.push_back(opt_real_field("conditions.rho", &C::conditions, &ConditionsSection::rho));
    f.push_back(opt_real_field("conditions.r_min", &C::conditions, &ConditionsSection::r_min));
    f.push_back(opt_real_field("conditions.r_max", &C::conditions, &ConditionsSection::r_max));
    f.push_back(int_field("conditions.points", &C::conditions, &ConditionsSection::points));
    f.push_back(list_field("conditions.a0", &C::conditions, &ConditionsSection::a0));
    f.push_back(int_field("validate.resolution", &C::validate, &ValidateSection::resolution));
    f.push_back(int_field("validate.samples", &C::validate, &ValidateSection::samples));
    f.push_back(int_field("validate.modes", &C::validate, &ValidateSection::modes));
    f.push_back(real_field("validate.target_theta", &C::validate, &ValidateSection::target_theta));
    f.push_back(string_field("sweep.axis", &C::sweep, &SweepSection::axis));
    f.push_back(list_field("sweep.values", &C::sweep, &SweepSection::values));
    return f;
  }();
  return specs;
}

inline const FieldSpec* find_field(const std::string& key) {
  for (const auto& f : field_specs())
    if (f.key == key) return &f;
  return nullptr;
}

inline void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("key '" + key + "': " + what);
}

}  // namespace detail

inline constexpr const char* kRequiredKeys[] = {"warp.family"};

inline const std::vector<std::string> kSweepAxes = {"a0", "angle_factor", "amplitude", "offset", "wavenumber"};

/// Range checks across sections. Messages name the offending key.
inline void validate(const ExperimentConfig& c) {
  using detail::require;
  require(c.warp.family == "cosh" || c.warp.family == "quadratic" || c.warp.family == "dss", "warp.family",
          "must be one of cosh, quadratic, dss");
  require(c.warp.alpha > 0.0, "warp.alpha", "must be > 0");
  require(c.warp.r_max > 0.0, "warp.r_max", "must be > 0");
  require(c.dss.mass > 0.0, "dss.mass", "must be > 0");
  require(c.dss.grid_size >= 64, "dss.grid_size", "must be >= 64");
  require(c.dss.s_cap >= 0.0, "dss.s_cap", "must be >= 0 (0 selects the default cap)");
  require(c.base.variant == "torus" || c.base.variant == "sphere", "base.variant", "must be torus or sphere");
  if (c.base.variant == "torus") {
    require(c.base.dim == 1 || c.base.dim == 2, "base.dim", "torus dimension must be 1 or 2");
    require(c.base.nx >= 4, "base.nx", "must be >= 4");
    require(c.base.dim == 1 || c.base.ny >= 4, "base.ny", "must be >= 4");
    require(c.base.period_x > 0.0, "base.period_x", "must be > 0");
    require(c.base.period_y > 0.0, "base.period_y", "must be > 0");
  } else {
    require(c.base.dim >= 2, "base.dim", "sphere dimension must be >= 2");
    require(c.base.ntheta >= 5, "base.ntheta", "must be >= 5");
  }
  if (c.warp.family == "dss") require(c.n() >= 3, "base.dim", "dss warp needs n = base.dim + 1 >= 3");
  try {
    (void)parse_initial_kind(c.initial.kind);
  } catch (const ConfigError&) {
    require(false, "initial.kind", "must be one of constant, sine-product, gaussian-bump");
  }
  require(c.initial.wavenumber >= 1, "initial.wavenumber", "must be >= 1");
  require(c.initial.width > 0.0, "initial.width", "must be > 0");
  require(!c.initial.a0 || *c.initial.a0 >= 0.0, "initial.a0", "must be >= 0");
  require(!c.initial.angle_factor || *c.initial.angle_factor > 0.0, "initial.angle_factor", "must be > 0");
  require(!c.initial.angle_factor || c.initial.a0, "initial.angle_factor", "requires initial.a0");
  require(c.flow.dt_safety > 0.0 && c.flow.dt_safety <= 1.0, "flow.dt_safety", "must lie in (0, 1]");
  require(c.flow.t_end > 0.0, "flow.t_end", "must be > 0");
  require(c.flow.output_stride >= 1, "flow.output_stride", "must be >= 1");
  require(c.flow.theta_floor > 0.0 && c.flow.theta_floor < 1.0, "flow.theta_floor", "must be > 0 and < 1");
  require(c.flow.convergence_eps > 0.0, "flow.convergence_eps", "must be > 0");
  require(c.flow.tol_avoid > 0.0, "flow.tol_avoid", "must be > 0");
  require(c.flow.tol_angle > 0.0, "flow.tol_angle", "must be > 0");
  require(c.flow.state_stride >= 0, "flow.state_stride", "must be >= 0");
  require(c.barrier.a >= 0.0, "barrier.a", "must be >= 0");
  require(c.barrier.f0_bar >= 0.0 && c.barrier.f0_bar <= 1.0, "barrier.f0_bar", "must lie in [0, 1]");
  require(c.barrier.dt > 0.0, "barrier.dt", "must be > 0");
  require(c.barrier.t_end >= 0.0, "barrier.t_end", "must be >= 0");
  require(c.conditions.points >= 2, "conditions.points", "must be >= 2");
  require(c.validate.resolution >= 8, "validate.resolution", "must be >= 8");
  require(c.validate.samples >= 1, "validate.samples", "must be >= 1");
  require(c.validate.modes >= 1, "validate.modes", "must be >= 1");
  require(c.validate.target_theta > 0.0 && c.validate.target_theta < 1.0, "validate.target_theta",
          "must lie in (0, 1)");
  require(std::find(kSweepAxes.begin(), kSweepAxes.end(), c.sweep.axis) != kSweepAxes.end(), "sweep.axis",
          "must be one of a0, angle_factor, amplitude, offset, wavenumber");
}

/// Applies one key = value assignment (used for sweep rows and overrides).
inline void set_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  const detail::FieldSpec* f = detail::find_field(key);
  if (!f) throw ConfigError("unknown key '" + key + "'");
  f->set(c, value);
}

/// Parses the flat text format; `origin` prefixes error messages.
inline ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<config>") {
  ExperimentConfig c;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const detail::FieldSpec* f = detail::find_field(key);
    if (!f) throw ConfigError(where + "unknown key '" + key + "'");
    if (auto it = seen.find(key); it != seen.end())
      throw ConfigError(where + "duplicate key '" + key + "' (first set on line " + std::to_string(it->second) +
                        ")");
    seen[key] = lineno;
    try {
      f->set(c, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  for (const char* key : kRequiredKeys)
    if (!seen.count(key)) throw ConfigError(origin + ": missing required key '" + key + "'");
  try {
    validate(c);
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return c;
}

/// Every key with its resolved value, in declaration order.
inline std::vector<std::pair<std::string, std::string>> resolved_entries(const ExperimentConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : detail::field_specs()) out.emplace_back(f.key, f.get(c));
  return out;
}

/// Round-trippable flat text of the resolved config.
inline std::string to_config_text(const ExperimentConfig& c) {
  std::string s;
  for (const auto& [k, v] : resolved_entries(c)) {
    if (v == "auto") continue;
    s += k + " = " + v + "\n";
  }
  return s;
}

inline nlohmann::ordered_json manifest_json(const ExperimentConfig& c, const std::string& subcommand) {
  nlohmann::ordered_json j;
  j["artifact"] = "wpmcf";
  j["version"] = kVersion;
  j["subcommand"] = subcommand;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : resolved_entries(c)) cfg[k] = v;
  j["config"] = cfg;
  return j;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object()) throw ConfigError(path + ": no 'config' object");
    std::string flat;
    for (const auto& [k, v] : j["config"].items()) {
      if (!v.is_string()) throw ConfigError(path + ": value of '" + k + "' must be a string");
      if (v.get<std::string>() == "auto") continue;
      flat += k + " = " + v.get<std::string>() + "\n";
    }
    return parse_config_text(flat, path);
  }
  return parse_config_text(text, path);
}

// ---------------------------------------------------------------------------
// Builders from a validated config

inline BasePtr make_base(const ExperimentConfig& c) {
  if (c.base.variant == "torus") {
    if (c.base.dim == 1) return make_flat_torus({c.base.nx}, {c.base.period_x});
    return make_flat_torus({c.base.nx, c.base.ny}, {c.base.period_x, c.base.period_y});
  }
  return make_sphere_axisym(c.base.dim, c.base.ntheta);
}

inline DssParameters make_dss_params(const ExperimentConfig& c) {
  return make_dss_parameters(c.n(), c.dss.mass, c.dss.kappa);
}

/// The configured warp; the dss report is filled for the dss family.
inline WarpingFunction make_warp(const ExperimentConfig& c, DssReport* report = nullptr) {
  if (c.warp.family == "cosh") return make_builtin_warp(WarpFamily::cosh, {}, c.warp.r_max);
  if (c.warp.family == "quadratic") {
    const double params[] = {c.warp.alpha};
    return make_builtin_warp(WarpFamily::quadratic, params, c.warp.r_max);
  }
  auto [w, rep] = build_dss_warp(make_dss_params(c), c.dss.grid_size, c.dss.s_cap);
  if (report) *report = std::move(rep);
  return w;
}

inline InitialData make_initial_data(const ExperimentConfig& c) {
  InitialData d;
  d.kind = parse_initial_kind(c.initial.kind);
  d.offset = c.initial.offset;
  d.amplitude = c.initial.amplitude;
  d.wavenumber = c.initial.wavenumber;
  d.width = c.initial.width;
  return d;
}

}  // namespace wpmcf
