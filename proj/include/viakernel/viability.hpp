#pragma once

// Grid approximation of viability kernels and the constructions used to
// compare kernels of a system and of its reduced dynamics.
//
// compute_kernel runs a discrete viability fixpoint: V0 holds the cells
// whose center is desirable for some sampled control, and
//   V_{k+1} = { c ∈ V0 : ∃u, (center(c), u) ∈ D and step(center(c), u)
//               lies within the dilation radius of some center in V_k }
// where step is `substeps` RK4 steps of length dt (one by default). With a
// short step the image of a cell never leaves the dilation ball of its own
// center, so nothing erodes; raising substeps lengthens the map horizon
// without changing the integrator step. The candidate target cells of
// every (cell, control) pair never change, so they are computed once.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "viakernel/cone.hpp"
#include "viakernel/dynamics.hpp"
#include "viakernel/flow.hpp"
#include "viakernel/linalg.hpp"
#include "viakernel/parallel.hpp"
#include "viakernel/sampling.hpp"

namespace viakernel {

struct BoxForm {
  Box state;
  Box control;

  bool contains(VecView x, VecView u) const { return state.contains(x) && control.contains(u); }
};

class DesirableSet {
 public:
  using Predicate = std::function<bool(VecView x, VecView u)>;

  static DesirableSet from_box(Box state, Box control) {
    state.validate("DesirableSet state box");
    control.validate("DesirableSet control box");
    DesirableSet d;
    d.box_ = BoxForm{std::move(state), std::move(control)};
    d.predicate_ = [b = *d.box_](VecView x, VecView u) { return b.contains(x, u); };
    return d;
  }

  static DesirableSet from_predicate(Predicate p) {
    DesirableSet d;
    d.predicate_ = std::move(p);
    return d;
  }

  /// Predicate plus the equivalent structured form.
  static DesirableSet structured(Predicate p, Box state, Box control) {
    DesirableSet d = from_box(std::move(state), std::move(control));
    d.predicate_ = std::move(p);
    return d;
  }

  bool contains(VecView x, VecView u) const { return predicate_(x, u); }
  const std::optional<BoxForm>& box() const { return box_; }

 private:
  Predicate predicate_;
  std::optional<BoxForm> box_;
};

/// Uniform cell grid over a bounded window; cells are numbered row-major
/// (last dimension fastest) in the declared dimension order.
struct GridSpec {
  Box window;
  std::vector<std::size_t> shape;
  /// Faces through which a one-step image may leave the window; such images
  /// are projected back onto the face instead of being discarded.
  std::vector<bool> absorbing_lo;
  std::vector<bool> absorbing_hi;

  std::size_t dim() const { return shape.size(); }

  void validate() const {
    window.validate("GridSpec window");
    require_dim(shape.size(), window.dim(), "GridSpec shape");
    for (std::size_t j = 0; j < shape.size(); ++j) {
      if (shape[j] == 0) throw std::invalid_argument("GridSpec: zero cells along an axis");
      if (!std::isfinite(window.lo[j]) || !std::isfinite(window.hi[j]) ||
          !(window.hi[j] > window.lo[j]))
        throw std::invalid_argument("GridSpec: window must be bounded with positive width");
    }
    if (!absorbing_lo.empty()) require_dim(absorbing_lo.size(), dim(), "GridSpec absorbing_lo");
    if (!absorbing_hi.empty()) require_dim(absorbing_hi.size(), dim(), "GridSpec absorbing_hi");
    if (cell_count() > std::numeric_limits<std::uint32_t>::max())
      throw std::invalid_argument("GridSpec: too many cells");
  }

  std::size_t cell_count() const {
    std::size_t c = 1;
    for (auto s : shape) c *= s;
    return c;
  }

  double cell_width(std::size_t j) const {
    return (window.hi[j] - window.lo[j]) / static_cast<double>(shape[j]);
  }

  double half_diagonal() const {
    double s = 0.0;
    for (std::size_t j = 0; j < dim(); ++j) s += cell_width(j) * cell_width(j);
    return 0.5 * std::sqrt(s);
  }

  bool absorbing_low(std::size_t j) const { return !absorbing_lo.empty() && absorbing_lo[j]; }
  bool absorbing_high(std::size_t j) const { return !absorbing_hi.empty() && absorbing_hi[j]; }

  std::vector<std::size_t> unravel(std::size_t index) const {
    std::vector<std::size_t> idx(dim());
    for (std::size_t j = dim(); j-- > 0;) {
      idx[j] = index % shape[j];
      index /= shape[j];
    }
    return idx;
  }

  std::size_t ravel(const std::vector<std::size_t>& idx) const {
    std::size_t r = 0;
    for (std::size_t j = 0; j < dim(); ++j) r = r * shape[j] + idx[j];
    return r;
  }

  Vec center(std::size_t index) const {
    const auto idx = unravel(index);
    Vec c(dim());
    for (std::size_t j = 0; j < dim(); ++j)
      c[j] = window.lo[j] + (static_cast<double>(idx[j]) + 0.5) * cell_width(j);
    return c;
  }

  bool same_grid(const GridSpec& other) const {
    return shape == other.shape && window.lo == other.window.lo && window.hi == other.window.hi;
  }
};

struct KernelMeta {
  double dt = 0.0;
  std::size_t substeps = 1;
  std::size_t max_iter = 0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<Vec> controls;
  double dilation_radius = 0.0;
  /// member count of V0, V1, ... up to the returned mask
  std::vector<std::size_t> member_history;
};

struct KernelGrid {
  GridSpec grid;
  std::vector<std::uint8_t> mask;
  KernelMeta meta;

  std::size_t member_count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  }
  bool member(std::size_t cell) const { return mask.at(cell) != 0; }
};

struct KernelOptions {
  double dt = 0.05;
  /// RK4 steps composed into one map step
  std::size_t substeps = 1;
  std::size_t max_iter = 500;
  /// defaults to half the cell diagonal
  std::optional<double> dilation_radius;
  unsigned threads = 1;
};

namespace detail {

struct TargetTable {
  std::vector<std::uint8_t> initial;           // V0
  std::vector<std::uint32_t> cell_options;     // size cells + 1, offsets into option_ranges
  std::vector<std::uint32_t> option_ranges;    // size options + 1, offsets into targets
  std::vector<std::uint32_t> targets;
};

/// Cells whose centers lie within `radius` of p, after applying the window
/// policy. Returns false when p leaves the window through a non-absorbing face.
inline bool collect_targets(const GridSpec& g, Vec& p, double radius,
                            std::vector<std::uint32_t>& out) {
  const std::size_t n = g.dim();
  if (!all_finite(p)) return false;
  for (std::size_t j = 0; j < n; ++j) {
    if (p[j] < g.window.lo[j]) {
      if (!g.absorbing_low(j)) return false;
      p[j] = g.window.lo[j];
    } else if (p[j] > g.window.hi[j]) {
      if (!g.absorbing_high(j)) return false;
      p[j] = g.window.hi[j];
    }
  }
  std::vector<std::size_t> first(n), last(n), idx(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double h = g.cell_width(j);
    const double a = std::ceil((p[j] - radius - g.window.lo[j]) / h - 0.5);
    const double b = std::floor((p[j] + radius - g.window.lo[j]) / h - 0.5);
    const double top = static_cast<double>(g.shape[j] - 1);
    const double lo = std::max(0.0, a);
    const double hi = std::min(top, b);
    if (lo > hi) return true;
    first[j] = static_cast<std::size_t>(lo);
    last[j] = static_cast<std::size_t>(hi);
  }
  const double r2 = radius * radius * (1.0 + 1e-12);
  idx = first;
  while (true) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = g.window.lo[j] + (static_cast<double>(idx[j]) + 0.5) * g.cell_width(j);
      d2 += (c - p[j]) * (c - p[j]);
    }
    if (d2 <= r2) out.push_back(static_cast<std::uint32_t>(g.ravel(idx)));
    std::size_t j = n;
    while (j-- > 0) {
      if (idx[j] < last[j]) {
        ++idx[j];
        break;
      }
      idx[j] = first[j];
    }
    if (j == static_cast<std::size_t>(-1)) break;
  }
  return true;
}

inline TargetTable build_targets(const ControlledSystem& sys, const DesirableSet& D,
                                 const GridSpec& g, const std::vector<Vec>& controls,
                                 double dt, std::size_t substeps, double radius,
                                 unsigned threads) {
  const std::size_t cells = g.cell_count();
  struct Part {
    std::vector<std::uint8_t> initial;
    std::vector<std::uint32_t> options_per_cell;
    std::vector<std::uint32_t> range_sizes;
    std::vector<std::uint32_t> targets;
  };
  std::vector<Part> parts(chunk_count(cells, threads));
  parallel_chunks(cells, threads, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    Part& part = parts[chunk];
    Rk4Workspace ws(sys.n);
    Vec image(sys.n), mid(sys.n);
    std::vector<std::uint32_t> local;
    for (std::size_t c = begin; c < end; ++c) {
      const Vec x = g.center(c);
      std::uint32_t options = 0;
      bool desirable = false;
      for (const auto& u : controls) {
        if (!D.contains(x, u)) continue;
        desirable = true;
        rk4_step(sys, x, u, dt, image, ws);
        for (std::size_t s = 1; s < substeps && all_finite(image); ++s) {
          mid.swap(image);
          rk4_step(sys, mid, u, dt, image, ws);
        }
        local.clear();
        if (!collect_targets(g, image, radius, local) || local.empty()) continue;
        ++options;
        part.range_sizes.push_back(static_cast<std::uint32_t>(local.size()));
        part.targets.insert(part.targets.end(), local.begin(), local.end());
      }
      part.initial.push_back(desirable ? 1 : 0);
      part.options_per_cell.push_back(options);
    }
  });

  TargetTable t;
  t.initial.reserve(cells);
  t.cell_options.reserve(cells + 1);
  t.cell_options.push_back(0);
  t.option_ranges.push_back(0);
  for (const auto& part : parts) {
    t.initial.insert(t.initial.end(), part.initial.begin(), part.initial.end());
    for (auto k : part.options_per_cell) t.cell_options.push_back(t.cell_options.back() + k);
    for (auto s : part.range_sizes) t.option_ranges.push_back(t.option_ranges.back() + s);
    t.targets.insert(t.targets.end(), part.targets.begin(), part.targets.end());
  }
  return t;
}

}  // namespace detail

inline KernelGrid compute_kernel(const ControlledSystem& sys, const DesirableSet& D,
                                 const GridSpec& grid, const std::vector<Vec>& controls,
                                 const KernelOptions& opts = {}) {
  if (controls.empty()) throw std::invalid_argument("compute_kernel: empty control list");
  if (!(opts.dt > 0.0)) throw std::invalid_argument("compute_kernel: dt must be positive");
  if (opts.substeps == 0) throw std::invalid_argument("compute_kernel: substeps must be >= 1");
  grid.validate();
  require_dim(grid.dim(), sys.n, "compute_kernel grid");
  for (const auto& u : controls) require_dim(u.size(), sys.m, "compute_kernel control");
  const double radius = opts.dilation_radius.value_or(grid.half_diagonal());
  if (!(radius >= 0.0)) throw std::invalid_argument("compute_kernel: negative dilation radius");

  const auto table = detail::build_targets(sys, D, grid, controls, opts.dt, opts.substeps,
                                           radius, opts.threads);
  const std::size_t cells = grid.cell_count();

  KernelGrid out;
  out.grid = grid;
  out.meta.dt = opts.dt;
  out.meta.substeps = opts.substeps;
  out.meta.max_iter = opts.max_iter;
  out.meta.controls = controls;
  out.meta.dilation_radius = radius;
  out.mask = table.initial;
  out.meta.member_history.push_back(out.member_count());

  std::vector<std::uint8_t> next(cells);
  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    const auto& prev = out.mask;
    parallel_chunks(cells, opts.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
      for (std::size_t c = begin; c < end; ++c) {
        std::uint8_t keep = 0;
        if (table.initial[c]) {
          for (auto o = table.cell_options[c]; o < table.cell_options[c + 1] && !keep; ++o) {
            for (auto k = table.option_ranges[o]; k < table.option_ranges[o + 1]; ++k) {
              if (prev[table.targets[k]]) {
                keep = 1;
                break;
              }
            }
          }
        }
        next[c] = keep;
      }
    });
    for (std::size_t c = 0; c < cells; ++c)
      if (next[c] && !prev[c])
        throw std::logic_error("compute_kernel: iteration is not monotone");
    const bool fixpoint = next == out.mask;
    out.mask.swap(next);
    if (fixpoint) {
      out.meta.converged = true;
      break;
    }
    ++out.meta.iterations;
    out.meta.member_history.push_back(out.member_count());
  }
  return out;
}

struct InclusionResult {
  bool included = true;
  std::vector<std::size_t> witnesses;  // cells of A \ B
};

inline void require_same_grid(const KernelGrid& a, const KernelGrid& b) {
  if (!a.grid.same_grid(b.grid) || a.mask.size() != b.mask.size())
    throw std::invalid_argument("kernel grids differ in window or shape");
}

/// A ⊆ B cell by cell.
inline InclusionResult kernel_inclusion(const KernelGrid& a, const KernelGrid& b) {
  require_same_grid(a, b);
  InclusionResult r;
  for (std::size_t c = 0; c < a.mask.size(); ++c) {
    if (a.mask[c] && !b.mask[c]) {
      r.included = false;
      r.witnesses.push_back(c);
    }
  }
  return r;
}

struct SymmetricDifference {
  std::size_t only_a = 0;
  std::size_t only_b = 0;
  std::size_t union_size = 0;

  std::size_t count() const { return only_a + only_b; }
  /// |A △ B| / |A ∪ B| (0 when both are empty)
  double fraction() const {
    return union_size == 0 ? 0.0
                           : static_cast<double>(count()) / static_cast<double>(union_size);
  }
};

inline SymmetricDifference symmetric_difference(const KernelGrid& a, const KernelGrid& b) {
  require_same_grid(a, b);
  SymmetricDifference s;
  for (std::size_t c = 0; c < a.mask.size(); ++c) {
    const bool ia = a.mask[c] != 0;
    const bool ib = b.mask[c] != 0;
    s.only_a += ia && !ib;
    s.only_b += ib && !ia;
    s.union_size += ia || ib;
  }
  return s;
}

/// Member cells of `k` with at least one face neighbour outside the kernel.
inline bool is_boundary_cell(const KernelGrid& k, std::size_t cell) {
  const auto idx = k.grid.unravel(cell);
  for (std::size_t j = 0; j < k.grid.dim(); ++j) {
    for (int step : {-1, 1}) {
      if ((step < 0 && idx[j] == 0) || (step > 0 && idx[j] + 1 == k.grid.shape[j])) continue;
      auto nb = idx;
      nb[j] = static_cast<std::size_t>(static_cast<long>(nb[j]) + step);
      if (k.mask[k.grid.ravel(nb)] != k.mask[cell]) return true;
    }
  }
  return false;
}

/// f_φ(x, u) = f(x, φ(u)); same domains.
inline ControlledSystem reduced_dynamics(const ControlledSystem& sys, const Reduction& red) {
  ControlledSystem out = sys;
  out.name = sys.name + "_" + red.name;
  out.f = [f = sys.f, phi = red.phi](VecView x, VecView u, std::span<double> dx) {
    const Vec pu = phi(u);
    f(x, pu, dx);
  };
  return out;
}

/// D_K = D + (K × {0}) for box-shaped D and cones generated by signed axis
/// vectors (orthants, partial orthants, {0}): each generator +e_j removes
/// the upper bound on x_j, each -e_j removes the lower bound.
inline DesirableSet extend_desirable(const DesirableSet& D, const ConvexCone& cone) {
  if (!D.box())
    throw std::invalid_argument("extend_desirable: desirable set has no structured box form");
  BoxForm b = *D.box();
  require_dim(cone.dim(), b.state.dim(), "extend_desirable cone");
  for (const auto& g : cone.generators()) {
    std::size_t nonzero = 0;
    std::size_t axis = 0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (g[j] != 0.0) {
        ++nonzero;
        axis = j;
      }
    }
    if (nonzero == 0) continue;
    if (nonzero != 1)
      throw std::invalid_argument(
          "extend_desirable: only cones generated by signed axis vectors are supported");
    if (g[axis] > 0.0)
      b.state.hi[axis] = kInf;
    else
      b.state.lo[axis] = -kInf;
  }
  return DesirableSet::from_box(std::move(b.state), std::move(b.control));
}

/// Sampled check of ⋃_{(x,u)∈D} (x + K) × {φ(u)} ⊂ D on the box form of D.
/// (x, u) is drawn from the intersection of the plan boxes with D (control
/// box defaults to D's); k ∈ K is a random generator combination with
/// coefficients up to the plan's largest state-box width.
inline CheckReport check_equality_condition(const DesirableSet& D, const ConvexCone& cone,
                                            const Reduction& red, const SamplingPlan& plan) {
  if (!D.box()) throw std::invalid_argument("check_equality_condition: D has no box form");
  const BoxForm& b = *D.box();
  plan.state.validate("check_equality_condition state box");
  require_dim(plan.state.dim(), cone.dim(), "check_equality_condition state box");
  require_dim(b.state.dim(), cone.dim(), "check_equality_condition D");
  auto clip = [](const Box& outer, const Box& d, const char* what) {
    Box r{Vec(outer.dim()), Vec(outer.dim())};
    for (std::size_t j = 0; j < outer.dim(); ++j) {
      r.lo[j] = std::max(outer.lo[j], d.lo[j]);
      r.hi[j] = std::min(outer.hi[j], d.hi[j]);
      if (!(r.lo[j] <= r.hi[j]) || !std::isfinite(r.lo[j]) || !std::isfinite(r.hi[j]))
        throw std::invalid_argument(std::string("check_equality_condition: ") + what +
                                    " box does not meet D in a bounded set");
    }
    return r;
  };
  const Box sbox = clip(plan.state, b.state, "state");
  const Box cbox = clip(plan.control.dim() != 0 ? plan.control : b.control, b.control, "control");
  HaltonSequence seq(sbox.dim() + cbox.dim(), plan.seed);
  double scale = 0.0;
  for (std::size_t j = 0; j < plan.state.dim(); ++j)
    scale = std::max(scale, plan.state.hi[j] - plan.state.lo[j]);

  CheckReport r;
  r.check = "equality-condition";
  for (std::size_t s = 0; s < plan.count; ++s) {
    const Vec p = seq.point(s);
    const Vec x = map_to_box(p, sbox);
    const Vec u = map_to_box(p, cbox, sbox.dim());
    if (!b.contains(x, u)) {
      ++r.skipped;
      continue;
    }
    auto rng = sample_rng(plan.seed, s);
    const Vec xk = add(x, cone.sample_member(rng, scale));
    const Vec pu = red(u);
    ++r.checked;
    if (!b.contains(xk, pu)) {
      double excess = 0.0;
      for (std::size_t j = 0; j < xk.size(); ++j)
        excess = std::max({excess, b.state.lo[j] - xk[j], xk[j] - b.state.hi[j]});
      for (std::size_t j = 0; j < pu.size(); ++j)
        excess = std::max({excess, b.control.lo[j] - pu[j], pu[j] - b.control.hi[j]});
      r.record_failure(Witness{s, xk, pu, std::numeric_limits<std::size_t>::max(),
                               std::numeric_limits<std::size_t>::max(), -excess});
    }
  }
  return r;
}

}  // namespace viakernel
