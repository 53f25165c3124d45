#pragma once

// Mosquito population with a Wolbachia-infected subpopulation, state
// x = (L_U, A_U, L_W, A_W) (uninfected/infected larvae and adults) and
// scalar control u = introduction rate of infected larvae, u ∈ [0, u♯].
//
//   L_U' = α_U A_U²/(A_U + A_W) - ν L_U - μ(1 + k(L_U + L_W)) L_U
//   A_U' = ν L_U - μ_U A_U
//   L_W' = α_W A_W - ν L_W - μ(1 + k(L_U + L_W)) L_W + u
//   A_W' = ν L_W - μ_W A_W
//
// The ratio A_U²/(A_U + A_W) is extended by 0 at A_U = A_W = 0.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "viakernel/cone.hpp"
#include "viakernel/dynamics.hpp"
#include "viakernel/flow.hpp"
#include "viakernel/linalg.hpp"
#include "viakernel/viability.hpp"

namespace viakernel {

struct WolbachiaParams {
  double alpha_U = 4.0;
  double alpha_W = 3.5;
  double nu = 2.0;
  double mu = 0.5;
  double k = 0.5;
  double mu_U = 1.0;
  double mu_W = 1.1;
  double u_sharp = 2.0;

  void validate() const {
    const std::pair<const char*, double> fields[] = {
        {"alpha_U", alpha_U}, {"alpha_W", alpha_W}, {"nu", nu},     {"mu", mu},
        {"k", k},             {"mu_U", mu_U},       {"mu_W", mu_W}, {"u_sharp", u_sharp}};
    for (const auto& [name, v] : fields)
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument(std::string("WolbachiaParams: ") + name +
                                    " must be positive and finite");
  }
};

struct WolbachiaThresholds {
  double L_U_max = 0.0;
  double A_U_max = 0.0;
  double L_W_min = 0.0;
  double A_W_min = 0.0;

  void validate() const {
    for (double v : {L_U_max, A_U_max, L_W_min, A_W_min})
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument("WolbachiaThresholds: all thresholds must be positive");
  }

  /// Corner of D's state part.
  Vec corner() const { return {L_U_max, A_U_max, L_W_min, A_W_min}; }
};

/// The shipped "default" preset (presets/wolbachia_default.json).
inline WolbachiaParams default_preset() { return WolbachiaParams{}; }

inline void wolbachia_rhs(const WolbachiaParams& p, VecView x, double u, std::span<double> dx) {
  require_dim(x.size(), 4, "wolbachia state");
  require_dim(dx.size(), 4, "wolbachia derivative");
  for (std::size_t i = 0; i < 4; ++i)
    if (!(x[i] >= 0.0))
      throw std::domain_error("wolbachia_f: state component " + std::to_string(i) +
                              " is negative");
  if (!(u >= 0.0) || u > p.u_sharp * (1.0 + 1e-12))
    throw std::domain_error("wolbachia_f: control outside [0, u_sharp]");
  const double LU = x[0], AU = x[1], LW = x[2], AW = x[3];
  const double total = AU + AW;
  const double ratio = total > 0.0 ? AU * AU / total : 0.0;
  const double crowd = p.mu * (1.0 + p.k * (LU + LW));
  dx[0] = p.alpha_U * ratio - p.nu * LU - crowd * LU;
  dx[1] = p.nu * LU - p.mu_U * AU;
  dx[2] = p.alpha_W * AW - p.nu * LW - crowd * LW + u;
  dx[3] = p.nu * LW - p.mu_W * AW;
}

inline Vec wolbachia_f(const WolbachiaParams& p, VecView x, double u) {
  Vec dx(4);
  wolbachia_rhs(p, x, u, dx);
  return dx;
}

inline ControlledSystem wolbachia_system(const WolbachiaParams& p) {
  p.validate();
  ControlledSystem sys;
  sys.name = "wolbachia";
  sys.n = 4;
  sys.m = 1;
  sys.f = [p](VecView x, VecView u, std::span<double> dx) { wolbachia_rhs(p, x, u[0], dx); };
  sys.controls = ControlSet::box({0.0}, {p.u_sharp});
  sys.state_domain = in_nonnegative_orthant;
  return sys;
}

/// Uninfected equilibrium with A_W = L_W = 0:
///   L = (α_U ν/μ_U - ν - μ) / (μ k),  A = ν L / μ_U.
inline Vec wolbachia_free_equilibrium(const WolbachiaParams& p) {
  p.validate();
  const double growth = p.alpha_U * p.nu / p.mu_U - p.nu - p.mu;
  if (!(growth > 0.0)) return Vec(4, 0.0);
  const double L = growth / (p.mu * p.k);
  return {L, p.nu * L / p.mu_U, 0.0, 0.0};
}

/// Equilibrium reached from the uninfected equilibrium under constant u = u♯,
/// found by integrating until the vector field is negligible.
inline Vec wolbachia_forced_equilibrium(const WolbachiaParams& p, double dt = 0.01,
                                        double max_time = 2000.0) {
  const ControlledSystem sys = wolbachia_system(p);
  Vec x = wolbachia_free_equilibrium(p);
  const Vec u{p.u_sharp};
  Rk4Workspace ws(4);
  Vec next(4);
  const auto steps = static_cast<std::size_t>(max_time / dt);
  for (std::size_t s = 0; s < steps; ++s) {
    rk4_step(sys, x, u, dt, next, ws);
    for (double& v : next) v = std::max(v, 0.0);
    x.swap(next);
    if (s % 100 == 0 && norm_inf(sys(x, u)) < 1e-12 * (1.0 + norm_inf(x))) break;
  }
  return x;
}

/// W lower bounds at 80% of the forced equilibrium. The forced equilibrium
/// has no uninfected population, so the U upper bounds use 25% of the
/// uninfected equilibrium instead (120% of zero would be an empty bound).
inline WolbachiaThresholds default_thresholds(const WolbachiaParams& p) {
  const Vec free = wolbachia_free_equilibrium(p);
  const Vec forced = wolbachia_forced_equilibrium(p);
  WolbachiaThresholds t;
  t.L_U_max = std::max(1.2 * forced[0], 0.25 * free[0]);
  t.A_U_max = std::max(1.2 * forced[1], 0.25 * free[1]);
  t.L_W_min = 0.8 * forced[2];
  t.A_W_min = 0.8 * forced[3];
  t.validate();
  return t;
}

/// Window [0, 1.25 max(equilibria)] per axis; the W upper faces are
/// absorbing because the kernel is unbounded in those directions.
inline GridSpec default_wolbachia_grid(const WolbachiaParams& p, std::size_t cells_per_axis = 15) {
  const Vec free = wolbachia_free_equilibrium(p);
  const Vec forced = wolbachia_forced_equilibrium(p);
  GridSpec g;
  g.window.lo.assign(4, 0.0);
  g.window.hi.resize(4);
  for (std::size_t j = 0; j < 4; ++j) g.window.hi[j] = 1.25 * std::max(free[j], forced[j]);
  g.shape.assign(4, cells_per_axis);
  g.absorbing_lo.assign(4, false);
  g.absorbing_hi = {false, false, true, true};
  g.validate();
  return g;
}

inline std::vector<Vec> default_wolbachia_controls(const WolbachiaParams& p) {
  return {{0.0}, {0.5 * p.u_sharp}, {p.u_sharp}};
}

struct CaseStudy {
  WolbachiaParams params;
  WolbachiaThresholds thresholds;
  ControlledSystem system;
  DesirableSet desirable;
  ConvexCone cone;
  Reduction reduction;
};

inline CaseStudy build_case_study(const WolbachiaParams& p, const WolbachiaThresholds& thr) {
  p.validate();
  thr.validate();
  // D = {x ≥ 0 : L_U ≤ L_U_max, A_U ≤ A_U_max, L_W ≥ L_W_min, A_W ≥ A_W_min} × [0, u♯];
  // the box form is (corner + K) × [0, u♯] with K = R₋ × R₋ × R₊ × R₊.
  auto pred = [thr, us = p.u_sharp](VecView x, VecView u) {
    return in_nonnegative_orthant(x) && x[0] <= thr.L_U_max && x[1] <= thr.A_U_max &&
           x[2] >= thr.L_W_min && x[3] >= thr.A_W_min && u[0] >= 0.0 && u[0] <= us;
  };
  Box state{{-kInf, -kInf, thr.L_W_min, thr.A_W_min}, {thr.L_U_max, thr.A_U_max, kInf, kInf}};
  Box control{{0.0}, {p.u_sharp}};
  Reduction red = Reduction::constant({p.u_sharp});
  red.name = "u_sharp";
  return CaseStudy{p,
                   thr,
                   wolbachia_system(p),
                   DesirableSet::structured(pred, std::move(state), std::move(control)),
                   ConvexCone::orthant({-1, -1, 1, 1}),
                   std::move(red)};
}

inline bool same_box_form(const DesirableSet& a, const DesirableSet& b) {
  if (!a.box() || !b.box()) return false;
  return a.box()->state.lo == b.box()->state.lo && a.box()->state.hi == b.box()->state.hi &&
         a.box()->control.lo == b.box()->control.lo && a.box()->control.hi == b.box()->control.hi;
}

struct CaseStudyReport {
  KernelGrid full;      // V(f, D) with the sampled control family
  KernelGrid sharp;     // V(f♯, D) with a single control
  KernelGrid reduced;   // V(f_φ, D_K)
  bool dk_equals_d = false;
  InclusionResult full_in_sharp;
  InclusionResult sharp_in_full;
  InclusionResult full_in_reduced;
  SymmetricDifference difference;
  double seconds = 0.0;

  /// |A △ B| relative to the member cells of A ∪ B.
  double difference_fraction() const { return difference.fraction(); }

  void write_text(std::ostream& os) const {
    os << "cells = " << full.grid.cell_count() << "\n"
       << "members_full = " << full.member_count() << "\n"
       << "members_sharp = " << sharp.member_count() << "\n"
       << "members_reduced = " << reduced.member_count() << "\n"
       << "iterations_full = " << full.meta.iterations << "\n"
       << "iterations_sharp = " << sharp.meta.iterations << "\n"
       << "converged = " << (full.meta.converged && sharp.meta.converged ? 1 : 0) << "\n"
       << "dk_equals_d = " << (dk_equals_d ? 1 : 0) << "\n"
       << "full_subset_of_reduced = " << (full_in_reduced.included ? 1 : 0) << " (witnesses "
       << full_in_reduced.witnesses.size() << ")\n"
       << "full_subset_of_sharp = " << (full_in_sharp.included ? 1 : 0) << " (witnesses "
       << full_in_sharp.witnesses.size() << ")\n"
       << "sharp_subset_of_full = " << (sharp_in_full.included ? 1 : 0) << " (witnesses "
       << sharp_in_full.witnesses.size() << ")\n"
       << "symmetric_difference = " << difference.count() << "\n"
       << "symmetric_difference_fraction = " << difference_fraction() << "\n"
       << "seconds = " << seconds << "\n"
       << "note = equality is certified only up to grid and horizon truncation\n";
  }
};

inline CaseStudyReport compare_case_kernels(const CaseStudy& cs, const GridSpec& grid,
                                        const std::vector<Vec>& controls,
                                        const KernelOptions& opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  CaseStudyReport r;
  const ControlledSystem sharp_sys = reduced_dynamics(cs.system, cs.reduction);
  const std::vector<Vec> single{{cs.params.u_sharp}};
  const DesirableSet dk = extend_desirable(cs.desirable, cs.cone);
  r.dk_equals_d = same_box_form(dk, cs.desirable);

  r.full = compute_kernel(cs.system, cs.desirable, grid, controls, opts);
  r.sharp = compute_kernel(sharp_sys, cs.desirable, grid, single, opts);
  r.reduced = compute_kernel(sharp_sys, dk, grid, single, opts);

  r.full_in_reduced = kernel_inclusion(r.full, r.reduced);
  r.full_in_sharp = kernel_inclusion(r.full, r.sharp);
  r.sharp_in_full = kernel_inclusion(r.sharp, r.full);
  r.difference = symmetric_difference(r.full, r.sharp);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace viakernel
