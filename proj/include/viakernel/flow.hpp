#pragma once

// Fixed-step RK4 integration of x' = f(x, u(t)) under piecewise-constant
// control paths.

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "viakernel/dynamics.hpp"
#include "viakernel/linalg.hpp"

namespace viakernel {

/// values[k] is applied on [k * spacing, (k + 1) * spacing).
struct ControlPath {
  double spacing = 1.0;
  std::vector<Vec> values;

  std::size_t intervals() const { return values.size(); }
  double horizon() const { return spacing * static_cast<double>(values.size()); }

  static ControlPath constant(Vec value, double spacing, std::size_t intervals) {
    return ControlPath{spacing, std::vector<Vec>(intervals, std::move(value))};
  }

  void validate(const ControlSet& controls) const {
    if (!(spacing > 0.0)) throw std::invalid_argument("ControlPath: spacing must be positive");
    if (values.empty()) throw std::invalid_argument("ControlPath: at least one interval");
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (!controls.contains(values[k]))
        throw std::invalid_argument("ControlPath: value " + std::to_string(k) +
                                    " lies outside the control set");
    }
  }

  /// First `T / spacing` intervals; T must be a whole number of intervals.
  ControlPath truncated(double T) const {
    const double ratio = T / spacing;
    const double whole = std::round(ratio);
    if (!(T > 0.0) || std::abs(ratio - whole) > 1e-9 * std::max(1.0, ratio) ||
        whole > static_cast<double>(values.size()))
      throw std::invalid_argument("ControlPath::truncated: T must be a whole number of "
                                  "control intervals within the path horizon");
    return ControlPath{spacing, std::vector<Vec>(values.begin(),
                                                 values.begin() + static_cast<long>(whole))};
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  bool blew_up = false;
  double blowup_time = std::numeric_limits<double>::quiet_NaN();

  const Vec& final_state() const { return states.back(); }

  /// CSV with header `t,x1,...,xn`, one row per integration step.
  void write_csv(std::ostream& os) const {
    const std::size_t n = states.empty() ? 0 : states.front().size();
    os << "t";
    for (std::size_t j = 0; j < n; ++j) os << ",x" << (j + 1);
    os << "\n";
    const auto old = os.precision(17);
    for (std::size_t k = 0; k < states.size(); ++k) {
      os << times[k];
      for (double v : states[k]) os << "," << v;
      os << "\n";
    }
    os.precision(old);
  }
};

struct IntegrateOptions {
  double overflow_guard = 1e12;
};

/// Scratch buffers for rk4_step, reusable across calls on one thread.
struct Rk4Workspace {
  explicit Rk4Workspace(std::size_t n) : k1(n), k2(n), k3(n), k4(n), tmp(n) {}
  Vec k1, k2, k3, k4, tmp;
};

inline void rk4_step(const ControlledSystem& sys, VecView x, VecView u, double dt,
                     std::span<double> out, Rk4Workspace& w) {
  const std::size_t n = x.size();
  sys.eval(x, u, w.k1);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + 0.5 * dt * w.k1[i];
  sys.eval(w.tmp, u, w.k2);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + 0.5 * dt * w.k2[i];
  sys.eval(w.tmp, u, w.k3);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + dt * w.k3[i];
  sys.eval(w.tmp, u, w.k4);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = x[i] + dt / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
}

inline std::size_t substeps_per_interval(double spacing, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
  const double ratio = spacing / dt;
  const double whole = std::round(ratio);
  if (whole < 1.0 || std::abs(ratio - whole) > 1e-9 * ratio)
    throw std::invalid_argument("integrate: dt must divide the control spacing");
  return static_cast<std::size_t>(whole);
}

/// States at every RK4 step; stops early and sets blew_up when a state is
/// non-finite or exceeds the overflow guard.
inline Trajectory integrate(const ControlledSystem& sys, VecView x0, const ControlPath& path,
                            double dt, const IntegrateOptions& opts = {}) {
  require_dim(x0.size(), sys.n, "integrate x0");
  path.validate(sys.controls);
  const std::size_t sub = substeps_per_interval(path.spacing, dt);
  if (!sys.in_domain(x0)) throw std::domain_error("integrate: x0 lies outside the state domain");

  const double h = path.spacing / static_cast<double>(sub);
  Trajectory traj;
  traj.times.reserve(path.intervals() * sub + 1);
  traj.states.reserve(path.intervals() * sub + 1);
  traj.times.push_back(0.0);
  traj.states.emplace_back(x0.begin(), x0.end());

  Rk4Workspace ws(sys.n);
  Vec x(x0.begin(), x0.end());
  Vec next(sys.n);
  for (std::size_t k = 0; k < path.intervals(); ++k) {
    for (std::size_t s = 0; s < sub; ++s) {
      rk4_step(sys, x, path.values[k], h, next, ws);
      const double t = (static_cast<double>(k * sub + s) + 1.0) * h;
      if (!all_finite(next) || norm_inf(next) > opts.overflow_guard) {
        traj.blew_up = true;
        traj.blowup_time = t;
        return traj;
      }
      x.swap(next);
      traj.times.push_back(t);
      traj.states.push_back(x);
    }
  }
  return traj;
}

/// u_φ(t) = φ(u(t)) on the same grid.
inline ControlPath reduce_path(const ControlPath& path, const Reduction& red,
                               const ControlSet& controls) {
  ControlPath out{path.spacing, {}};
  out.values.reserve(path.values.size());
  for (const auto& v : path.values) {
    Vec w = red(v);
    if (!controls.contains(w))
      throw std::domain_error("reduce_path: phi(u) lies outside the control set");
    out.values.push_back(std::move(w));
  }
  return out;
}

}  // namespace viakernel
