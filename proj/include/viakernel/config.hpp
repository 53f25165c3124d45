#pragma once

// JSON experiment configuration. See docs/config.md for the schema.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "viakernel/cone.hpp"
#include "viakernel/dynamics.hpp"
#include "viakernel/flow.hpp"
#include "viakernel/linalg.hpp"
#include "viakernel/sampling.hpp"
#include "viakernel/viability.hpp"
#include "viakernel/wolbachia.hpp"

namespace viakernel {

using json = nlohmann::json;

/// Malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimulateSpec {
  Vec x0;
  Vec y0;
  double dt = 0.01;
  ControlPath path;
};

struct ExperimentConfig {
  std::string system_name;
  ControlledSystem system;
  std::optional<CaseStudy> case_study;  // set for the wolbachia system
  ConvexCone cone = ConvexCone::orthant({1});
  Reduction reduction = Reduction::identity();
  std::optional<DesirableSet> desirable;
  std::optional<GridSpec> grid;
  KernelOptions kernel;
  std::vector<Vec> kernel_controls;
  SamplingPlan plan;
  std::string check_method = "auto";
  CheckOptions check;
  std::optional<SimulateSpec> simulate;
  std::uint64_t seed = 0;
  std::string out = "out";
};

namespace detail {

[[noreturn]] inline void config_fail(const std::string& where, const std::string& what) {
  throw ConfigError("config: " + where + ": " + what);
}

inline double as_bound(const json& v, double missing, const std::string& where) {
  if (v.is_null()) return missing;
  if (!v.is_number()) config_fail(where, "expected a number or null");
  return v.get<double>();
}

inline Vec as_vec(const json& v, const std::string& where, double null_value = kInf) {
  if (!v.is_array()) config_fail(where, "expected an array");
  Vec out;
  for (const auto& e : v) out.push_back(as_bound(e, null_value, where));
  return out;
}

inline std::vector<Vec> as_vec_list(const json& v, const std::string& where) {
  if (!v.is_array()) config_fail(where, "expected an array of arrays");
  std::vector<Vec> out;
  for (const auto& e : v) out.push_back(as_vec(e, where));
  return out;
}

inline std::vector<bool> as_bools(const json& v, std::size_t n, const std::string& where) {
  if (v.is_null()) return std::vector<bool>(n, false);
  if (!v.is_array() || v.size() != n) config_fail(where, "expected " + std::to_string(n) + " booleans");
  std::vector<bool> out;
  for (const auto& e : v) {
    if (!e.is_boolean()) config_fail(where, "expected booleans");
    out.push_back(e.get<bool>());
  }
  return out;
}

inline void expect_dim(std::size_t got, std::size_t n, const std::string& where) {
  if (got != n)
    config_fail(where, "dimension " + std::to_string(got) + ", expected " + std::to_string(n));
}

inline ControlSet parse_control_set(const json& j, std::size_t m, const std::string& where) {
  if (j.contains("box")) {
    Vec lo = as_vec(j["box"].at("lo"), where + ".box.lo");
    Vec hi = as_vec(j["box"].at("hi"), where + ".box.hi");
    expect_dim(lo.size(), m, where + ".box.lo");
    expect_dim(hi.size(), m, where + ".box.hi");
    return ControlSet::box(std::move(lo), std::move(hi));
  }
  if (j.contains("finite")) {
    auto pts = as_vec_list(j["finite"], where + ".finite");
    for (const auto& p : pts) expect_dim(p.size(), m, where + ".finite");
    return ControlSet::finite(std::move(pts));
  }
  config_fail(where, "expected 'box' or 'finite'");
}

}  // namespace detail

/// Locates a preset: an existing file path, else <dir>/wolbachia_<name>.json
/// with dir from $VIAKERNEL_PRESET_DIR or the build-time preset directory.
inline std::filesystem::path resolve_preset(const std::string& name_or_path) {
  if (std::filesystem::exists(name_or_path)) return name_or_path;
  std::vector<std::filesystem::path> dirs;
  if (const char* env = std::getenv("VIAKERNEL_PRESET_DIR")) dirs.emplace_back(env);
#ifdef VIAKERNEL_PRESET_DIR
  dirs.emplace_back(VIAKERNEL_PRESET_DIR);
#endif
  for (const auto& d : dirs) {
    const auto p = d / ("wolbachia_" + name_or_path + ".json");
    if (std::filesystem::exists(p)) return p;
  }
  throw ConfigError("unknown wolbachia preset '" + name_or_path + "'");
}

inline WolbachiaParams params_from_json(const json& j, WolbachiaParams p = {}) {
  if (!j.is_object()) throw ConfigError("config: wolbachia params must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number())
      throw ConfigError("config: wolbachia param '" + it.key() + "' must be a number");
    const double v = it.value().get<double>();
    const std::string& k = it.key();
    if (k == "alpha_U") p.alpha_U = v;
    else if (k == "alpha_W") p.alpha_W = v;
    else if (k == "nu") p.nu = v;
    else if (k == "mu") p.mu = v;
    else if (k == "k") p.k = v;
    else if (k == "mu_U") p.mu_U = v;
    else if (k == "mu_W") p.mu_W = v;
    else if (k == "u_sharp") p.u_sharp = v;
    else throw ConfigError("config: unknown wolbachia param '" + k + "'");
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return p;
}

inline WolbachiaParams load_preset(const std::string& name_or_path) {
  const auto path = resolve_preset(name_or_path);
  std::ifstream is(path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("preset " + path.string() + ": " + e.what());
  }
  if (!j.contains("params")) throw ConfigError("preset " + path.string() + " has no params");
  return params_from_json(j["params"]);
}

inline ConvexCone cone_from_json(const json& j) {
  if (j.contains("orthant")) {
    std::vector<int> signs;
    for (const auto& s : j["orthant"]) {
      if (!s.is_number_integer()) throw ConfigError("config: cone.orthant entries must be ±1");
      signs.push_back(s.get<int>());
    }
    return ConvexCone::orthant(std::move(signs));
  }
  if (j.contains("polyhedral")) {
    const auto& p = j["polyhedral"];
    std::vector<Vec> normals = detail::as_vec_list(p.at("normals"), "cone.polyhedral.normals");
    std::vector<Vec> gens = detail::as_vec_list(p.at("generators"), "cone.polyhedral.generators");
    std::vector<Vec> duals;
    if (p.contains("dual_generators"))
      duals = detail::as_vec_list(p["dual_generators"], "cone.polyhedral.dual_generators");
    return ConvexCone::polyhedral(std::move(normals), std::move(gens), std::move(duals));
  }
  throw ConfigError("config: cone must have 'orthant' or 'polyhedral'");
}

inline Reduction reduction_from_json(const json& j, std::size_t m) {
  const std::string type = j.value("type", "identity");
  if (type == "identity") return Reduction::identity();
  if (type == "constant") {
    Vec v = detail::as_vec(j.at("value"), "reduction.value");
    detail::expect_dim(v.size(), m, "reduction.value");
    return Reduction::constant(std::move(v));
  }
  throw ConfigError("config: unknown reduction type '" + type + "'");
}

/// Linear system x' = A x + B u + c.
inline ControlledSystem linear_system(const json& j) {
  const auto A = detail::as_vec_list(j.at("A"), "system.A");
  const std::size_t n = A.size();
  if (n == 0) throw ConfigError("config: system.A is empty");
  for (const auto& r : A) detail::expect_dim(r.size(), n, "system.A row");
  std::vector<Vec> B;
  if (j.contains("B")) B = detail::as_vec_list(j["B"], "system.B");
  const std::size_t m = B.empty() ? 1 : B.front().size();
  if (!B.empty()) {
    detail::expect_dim(B.size(), n, "system.B rows");
    for (const auto& r : B) detail::expect_dim(r.size(), m, "system.B row");
  } else {
    B.assign(n, Vec(m, 0.0));
  }
  Vec c(n, 0.0);
  if (j.contains("c")) c = detail::as_vec(j["c"], "system.c");
  detail::expect_dim(c.size(), n, "system.c");

  ControlledSystem sys;
  sys.name = "linear";
  sys.n = n;
  sys.m = m;
  sys.f = [A, B, c, n, m](VecView x, VecView u, std::span<double> dx) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = c[i];
      for (std::size_t k = 0; k < n; ++k) s += A[i][k] * x[k];
      for (std::size_t k = 0; k < m; ++k) s += B[i][k] * u[k];
      dx[i] = s;
    }
  };
  sys.controls = j.contains("controls")
                     ? detail::parse_control_set(j["controls"], m, "system.controls")
                     : ControlSet::box(Vec(m, -1.0), Vec(m, 1.0));
  const std::string domain = j.value("domain", "all");
  if (domain == "all")
    sys.state_domain = nullptr;
  else if (domain == "nonnegative")
    sys.state_domain = in_nonnegative_orthant;
  else
    throw ConfigError("config: system.domain must be 'all' or 'nonnegative'");
  return sys;
}

inline ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  ExperimentConfig cfg;
  try {
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.out = j.value("out", std::string("out"));
    const json& js = j.at("system");
    cfg.system_name = js.at("name").get<std::string>();

    if (cfg.system_name == "wolbachia") {
      WolbachiaParams p = load_preset(js.value("preset", std::string("default")));
      if (js.contains("params")) p = params_from_json(js["params"], p);
      WolbachiaThresholds thr = default_thresholds(p);
      if (js.contains("thresholds")) {
        const auto& t = js["thresholds"];
        thr.L_U_max = t.value("L_U_max", thr.L_U_max);
        thr.A_U_max = t.value("A_U_max", thr.A_U_max);
        thr.L_W_min = t.value("L_W_min", thr.L_W_min);
        thr.A_W_min = t.value("A_W_min", thr.A_W_min);
      }
      cfg.case_study = build_case_study(p, thr);
      cfg.system = cfg.case_study->system;
      cfg.cone = cfg.case_study->cone;
      cfg.reduction = cfg.case_study->reduction;
      cfg.desirable = cfg.case_study->desirable;
      cfg.grid = default_wolbachia_grid(p);
      cfg.kernel_controls = default_wolbachia_controls(p);
    } else if (cfg.system_name == "linear") {
      cfg.system = linear_system(js);
    } else {
      throw ConfigError("config: unknown system '" + cfg.system_name + "'");
    }
    const std::size_t n = cfg.system.n;
    const std::size_t m = cfg.system.m;

    if (j.contains("cone")) cfg.cone = cone_from_json(j["cone"]);
    else if (!cfg.case_study) cfg.cone = ConvexCone::orthant(std::vector<int>(n, 1));
    detail::expect_dim(cfg.cone.dim(), n, "cone");

    if (j.contains("reduction")) cfg.reduction = reduction_from_json(j["reduction"], m);

    if (j.contains("desirable")) {
      const auto& d = j["desirable"];
      Vec lo = detail::as_vec(d.at("lo"), "desirable.lo", -kInf);
      Vec hi = detail::as_vec(d.at("hi"), "desirable.hi", kInf);
      detail::expect_dim(lo.size(), n, "desirable.lo");
      detail::expect_dim(hi.size(), n, "desirable.hi");
      Box control = cfg.system.controls.is_box() ? cfg.system.controls.bounds()
                                                 : Box{Vec(m, -kInf), Vec(m, kInf)};
      if (d.contains("control_lo")) control.lo = detail::as_vec(d["control_lo"], "desirable.control_lo", -kInf);
      if (d.contains("control_hi")) control.hi = detail::as_vec(d["control_hi"], "desirable.control_hi", kInf);
      detail::expect_dim(control.dim(), m, "desirable control bounds");
      cfg.desirable = DesirableSet::from_box(Box{std::move(lo), std::move(hi)}, std::move(control));
    }

    if (j.contains("grid")) {
      const auto& g = j["grid"];
      GridSpec spec;
      spec.window.lo = detail::as_vec(g.at("lo"), "grid.lo");
      spec.window.hi = detail::as_vec(g.at("hi"), "grid.hi");
      spec.shape = g.at("shape").get<std::vector<std::size_t>>();
      detail::expect_dim(spec.shape.size(), n, "grid.shape");
      spec.absorbing_lo = detail::as_bools(g.value("absorbing_lo", json()), n, "grid.absorbing_lo");
      spec.absorbing_hi = detail::as_bools(g.value("absorbing_hi", json()), n, "grid.absorbing_hi");
      spec.validate();
      cfg.grid = std::move(spec);
    }

    if (j.contains("kernel")) {
      const auto& k = j["kernel"];
      cfg.kernel.dt = k.value("dt", cfg.kernel.dt);
      cfg.kernel.substeps = k.value("substeps", cfg.kernel.substeps);
      cfg.kernel.max_iter = k.value("max_iter", cfg.kernel.max_iter);
      if (k.contains("dilation_radius") && !k["dilation_radius"].is_null())
        cfg.kernel.dilation_radius = k["dilation_radius"].get<double>();
      if (k.contains("controls")) cfg.kernel_controls = detail::as_vec_list(k["controls"], "kernel.controls");
    }
    for (const auto& u : cfg.kernel_controls) detail::expect_dim(u.size(), m, "kernel.controls");

    // Sampling plan defaults to the grid window, else the unit box.
    if (cfg.grid) cfg.plan.state = cfg.grid->window;
    else cfg.plan.state = Box{Vec(n, 0.0), Vec(n, 1.0)};
    if (j.contains("sampling")) {
      const auto& s = j["sampling"];
      cfg.plan.count = s.value("count", cfg.plan.count);
      if (s.contains("state_lo")) cfg.plan.state.lo = detail::as_vec(s["state_lo"], "sampling.state_lo");
      if (s.contains("state_hi")) cfg.plan.state.hi = detail::as_vec(s["state_hi"], "sampling.state_hi");
      if (s.contains("control_lo") || s.contains("control_hi")) {
        cfg.plan.control.lo = detail::as_vec(s.at("control_lo"), "sampling.control_lo");
        cfg.plan.control.hi = detail::as_vec(s.at("control_hi"), "sampling.control_hi");
        detail::expect_dim(cfg.plan.control.dim(), m, "sampling control box");
      }
    }
    detail::expect_dim(cfg.plan.state.dim(), n, "sampling state box");
    cfg.plan.state.validate("sampling state box");
    cfg.plan.seed = cfg.seed;

    if (j.contains("check")) {
      const auto& c = j["check"];
      cfg.check_method = c.value("method", cfg.check_method);
      cfg.check.tol_grad = c.value("tol_grad", cfg.check.tol_grad);
      if (cfg.check_method != "auto" && cfg.check_method != "orthant" && cfg.check_method != "general")
        throw ConfigError("config: check.method must be auto, orthant or general");
    }

    if (j.contains("simulate")) {
      const auto& s = j["simulate"];
      SimulateSpec sim;
      sim.x0 = detail::as_vec(s.at("x0"), "simulate.x0");
      detail::expect_dim(sim.x0.size(), n, "simulate.x0");
      sim.y0 = s.contains("y0") ? detail::as_vec(s["y0"], "simulate.y0") : sim.x0;
      detail::expect_dim(sim.y0.size(), n, "simulate.y0");
      sim.dt = s.value("dt", sim.dt);
      sim.path.spacing = s.value("spacing", 1.0);
      sim.path.values = detail::as_vec_list(s.at("controls"), "simulate.controls");
      for (const auto& u : sim.path.values) detail::expect_dim(u.size(), m, "simulate.controls");
      cfg.simulate = std::move(sim);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace viakernel
