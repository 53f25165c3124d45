#pragma once

// Numerical validation of conic flow comparison: two trajectories sampled
// on the same grid are checked for Ψ_g(t, x0) ⪯_K Ψ_h(t, y0) at every step.

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "viakernel/cone.hpp"
#include "viakernel/dynamics.hpp"
#include "viakernel/flow.hpp"

namespace viakernel {

struct Defect {
  double t = 0.0;
  Vec delta;
  double magnitude = 0.0;
};

struct ComparisonReport {
  std::size_t checked_times = 0;
  std::vector<Defect> violations;
  double max_defect = 0.0;
  double traj_tol = 0.0;
  bool blew_up = false;
  double blowup_time = 0.0;
  std::vector<double> times;
  std::vector<double> defects;

  bool passed() const { return violations.empty() && !blew_up; }

  void write_text(std::ostream& os) const {
    os << "checked_times = " << checked_times << "\n"
       << "max_defect = " << max_defect << "\n"
       << "traj_tol = " << traj_tol << "\n"
       << "violations = " << violations.size() << "\n"
       << "blew_up = " << (blew_up ? 1 : 0) << "\n";
    if (blew_up) os << "blowup_time = " << blowup_time << "\n";
    if (!violations.empty()) {
      const auto& v = *std::max_element(
          violations.begin(), violations.end(),
          [](const Defect& a, const Defect& b) { return a.magnitude < b.magnitude; });
      os << "worst_violation_t = " << v.t << "\n";
    }
    os << "verdict = " << (passed() ? "PASS" : "FAIL") << "\n";
  }

  void write_defect_csv(std::ostream& os) const {
    os << "t,defect\n";
    const auto old = os.precision(17);
    for (std::size_t k = 0; k < times.size(); ++k) os << times[k] << "," << defects[k] << "\n";
    os.precision(old);
  }
};

struct ComparisonOptions {
  /// traj_tol = rel_tol * (1 + max |x|∞ over both trajectories)
  double rel_tol = 1e-6;
  IntegrateOptions integrate;
};

/// Checks lower(t) ⪯_K upper(t) step by step on the common prefix.
inline ComparisonReport compare_trajectories(const ConvexCone& cone, const Trajectory& lower,
                                             const Trajectory& upper,
                                             const ComparisonOptions& opts = {}) {
  ComparisonReport rep;
  const std::size_t steps = std::min(lower.states.size(), upper.states.size());
  rep.blew_up = lower.blew_up || upper.blew_up;
  if (rep.blew_up) {
    rep.blowup_time = std::min(lower.blew_up ? lower.blowup_time : kInf,
                               upper.blew_up ? upper.blowup_time : kInf);
  }
  double scale = 0.0;
  for (std::size_t k = 0; k < steps; ++k)
    scale = std::max({scale, norm_inf(lower.states[k]), norm_inf(upper.states[k])});
  rep.traj_tol = opts.rel_tol * (1.0 + scale);
  rep.times.reserve(steps);
  rep.defects.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    Vec delta = sub(upper.states[k], lower.states[k]);
    const double d = cone.defect(delta);
    ++rep.checked_times;
    rep.times.push_back(lower.times[k]);
    rep.defects.push_back(d);
    rep.max_defect = std::max(rep.max_defect, d);
    if (d > rep.traj_tol) rep.violations.push_back(Defect{lower.times[k], std::move(delta), d});
  }
  return rep;
}

namespace detail {

inline void require_ordered(const ConvexCone& cone, VecView x0, VecView y0, const char* what) {
  if (!cone.leq(x0, y0))
    throw std::invalid_argument(std::string(what) + ": initial states are not ordered (x0 ⪯_K y0 fails)");
}

inline ControlPath horizon_path(const ControlPath& u, double T) {
  return T > 0.0 ? u.truncated(T) : u;
}

}  // namespace detail

/// Uncontrolled-pair comparison: g and h are driven by the same path u.
inline ComparisonReport compare_flows(const ControlledSystem& sys_g,
                                      const ControlledSystem& sys_h, const ConvexCone& cone,
                                      VecView x0, VecView y0, const ControlPath& u, double dt,
                                      double T, const ComparisonOptions& opts = {}) {
  require_dim(cone.dim(), sys_g.n, "compare_flows cone");
  require_dim(sys_h.n, sys_g.n, "compare_flows systems");
  detail::require_ordered(cone, x0, y0, "compare_flows");
  const ControlPath path = detail::horizon_path(u, T);
  const Trajectory tg = integrate(sys_g, x0, path, dt, opts.integrate);
  const Trajectory th = integrate(sys_h, y0, path, dt, opts.integrate);
  return compare_trajectories(cone, tg, th, opts);
}

/// Ψ(t; f, x0, u) ⪯_K Ψ(t; f, y0, u_φ) with u_φ = φ ∘ u.
inline ComparisonReport compare_controlled(const ControlledSystem& sys, const ConvexCone& cone,
                                           const Reduction& red, VecView x0, VecView y0,
                                           const ControlPath& u, double dt, double T,
                                           const ComparisonOptions& opts = {}) {
  require_dim(cone.dim(), sys.n, "compare_controlled cone");
  detail::require_ordered(cone, x0, y0, "compare_controlled");
  const ControlPath path = detail::horizon_path(u, T);
  const ControlPath reduced = reduce_path(path, red, sys.controls);
  const Trajectory tx = integrate(sys, x0, path, dt, opts.integrate);
  const Trajectory ty = integrate(sys, y0, reduced, dt, opts.integrate);
  return compare_trajectories(cone, tx, ty, opts);
}

struct EpsilonDiagnostic {
  Trajectory base;
  std::vector<double> eps;
  std::vector<Trajectory> perturbed;
  /// sup over t of |x_ε(t) - x(t)|∞, one entry per ε
  std::vector<double> sup_gap;
  /// x(t) ≪_K x_ε(t) at every sampled t, one entry per ε
  std::vector<bool> strictly_ordered;
  bool gaps_nonincreasing = true;
};

/// Integrates x' = h(x, u(t)) + ε v, x(0) = x0 + ε v for each ε and
/// measures how the perturbed flows approach the unperturbed one.
inline EpsilonDiagnostic epsilon_diagnostic(const ControlledSystem& sys_h, const ConvexCone& cone,
                                            VecView v, const std::vector<double>& eps_list,
                                            VecView x0, const ControlPath& u, double dt, double T,
                                            const IntegrateOptions& iopts = {}) {
  require_dim(v.size(), sys_h.n, "epsilon_diagnostic v");
  require_dim(cone.dim(), sys_h.n, "epsilon_diagnostic cone");
  const Vec zero(sys_h.n, 0.0);
  if (!cone.strictly_less(zero, v))
    throw std::invalid_argument("epsilon_diagnostic: v must lie in the interior of K");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] >= 0.0)) throw std::invalid_argument("epsilon_diagnostic: eps must be >= 0");
    if (i > 0 && eps_list[i] > eps_list[i - 1])
      throw std::invalid_argument("epsilon_diagnostic: eps list must be decreasing");
  }

  const ControlPath path = detail::horizon_path(u, T);
  EpsilonDiagnostic diag;
  diag.base = integrate(sys_h, x0, path, dt, iopts);
  diag.eps = eps_list;
  const Vec vv(v.begin(), v.end());
  for (double eps : eps_list) {
    ControlledSystem pert = sys_h;
    pert.name = sys_h.name + "+eps*v";
    pert.f = [f = sys_h.f, vv, eps](VecView x, VecView uu, std::span<double> dx) {
      f(x, uu, dx);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += eps * vv[i];
    };
    Trajectory tr = integrate(pert, axpy(x0, eps, vv), path, dt, iopts);
    double gap = 0.0;
    bool strict = eps > 0.0;
    const std::size_t steps = std::min(tr.states.size(), diag.base.states.size());
    for (std::size_t k = 0; k < steps; ++k) {
      gap = std::max(gap, norm_inf(sub(tr.states[k], diag.base.states[k])));
      if (strict && !cone.strictly_less(diag.base.states[k], tr.states[k])) strict = false;
    }
    if (!diag.sup_gap.empty() && gap > diag.sup_gap.back()) diag.gaps_nonincreasing = false;
    diag.sup_gap.push_back(gap);
    diag.strictly_ordered.push_back(strict);
    diag.perturbed.push_back(std::move(tr));
  }
  return diag;
}

}  // namespace viakernel
