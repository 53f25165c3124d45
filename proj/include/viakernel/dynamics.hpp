#pragma once

// Controlled dynamics x' = f(x, u), finite-difference Jacobians and the
// sampled falsification checks for K-quasimonotonicity and K-reductions.
//
// Every check is a ∀-statement verified on a deterministic sample plan; a
// passing report means "no counterexample found", never a proof.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "viakernel/cone.hpp"
#include "viakernel/linalg.hpp"
#include "viakernel/parallel.hpp"
#include "viakernel/sampling.hpp"

namespace viakernel {

/// Evaluator writing f(x, u) into `dx`. Must be safe to call concurrently.
using DynamicsFn = std::function<void(VecView x, VecView u, std::span<double> dx)>;
using StatePredicate = std::function<bool(VecView x)>;

inline bool in_nonnegative_orthant(VecView x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return v >= 0.0; });
}

class ControlSet {
 public:
  static ControlSet box(Vec lo, Vec hi) {
    ControlSet c;
    c.box_ = Box{std::move(lo), std::move(hi)};
    c.box_.validate("ControlSet::box");
    c.m_ = c.box_.dim();
    c.is_box_ = true;
    return c;
  }

  static ControlSet finite(std::vector<Vec> points) {
    if (points.empty()) throw std::invalid_argument("ControlSet::finite: no points");
    ControlSet c;
    c.m_ = points.front().size();
    for (const auto& p : points) require_dim(p.size(), c.m_, "ControlSet::finite");
    c.points_ = std::move(points);
    c.is_box_ = false;
    return c;
  }

  std::size_t dim() const { return m_; }
  bool is_box() const { return is_box_; }
  const Box& bounds() const { return box_; }
  const std::vector<Vec>& points() const { return points_; }

  bool contains(VecView u, double tol = 1e-12) const {
    if (u.size() != m_) return false;
    if (is_box_) return box_.contains(u, tol);
    return std::any_of(points_.begin(), points_.end(), [&](const Vec& p) {
      for (std::size_t j = 0; j < m_; ++j)
        if (std::abs(p[j] - u[j]) > tol) return false;
      return true;
    });
  }

 private:
  std::size_t m_ = 0;
  bool is_box_ = true;
  Box box_;
  std::vector<Vec> points_;
};

struct ControlledSystem {
  std::string name;
  std::size_t n = 0;
  std::size_t m = 0;
  DynamicsFn f;
  ControlSet controls;
  StatePredicate state_domain = in_nonnegative_orthant;

  void eval(VecView x, VecView u, std::span<double> dx) const { f(x, u, dx); }

  Vec operator()(VecView x, VecView u) const {
    require_dim(x.size(), n, "ControlledSystem state");
    require_dim(u.size(), m, "ControlledSystem control");
    Vec dx(n);
    f(x, u, dx);
    return dx;
  }

  bool in_domain(VecView x) const { return !state_domain || state_domain(x); }
};

/// K-reduction candidate φ : U → U.
struct Reduction {
  std::string name;
  std::function<Vec(VecView u)> phi;

  Vec operator()(VecView u) const { return phi(u); }

  static Reduction identity() {
    return {"identity", [](VecView u) { return Vec(u.begin(), u.end()); }};
  }

  static Reduction constant(Vec value) {
    return {"constant", [value = std::move(value)](VecView) { return value; }};
  }
};

/// Raised when f cannot be evaluated at a Jacobian probe point.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(std::size_t coordinate, const std::string& what)
      : std::runtime_error("evaluation failed while perturbing coordinate " +
                           std::to_string(coordinate) + ": " + what),
        coordinate_(coordinate) {}
  std::size_t coordinate() const { return coordinate_; }

 private:
  std::size_t coordinate_;
};

inline double default_fd_step(VecView x) { return 1e-5 * (1.0 + norm_inf(x)); }

/// Central differences: J(i,j) = (f_i(x + h e_j, u) - f_i(x - h e_j, u)) / 2h.
/// One-sided when one of the probes leaves the state domain.
inline Matrix jacobian_fd(const ControlledSystem& sys, VecView x, VecView u, double h) {
  require_dim(x.size(), sys.n, "jacobian_fd state");
  require_dim(u.size(), sys.m, "jacobian_fd control");
  if (!(h > 0.0)) throw std::invalid_argument("jacobian_fd: step must be positive");
  Matrix jac(sys.n, sys.n);
  Vec xp(x.begin(), x.end());
  Vec fp(sys.n), fm(sys.n);
  for (std::size_t j = 0; j < sys.n; ++j) {
    const double xj = xp[j];
    double hi = xj + h;
    double lo = xj - h;
    xp[j] = lo;
    if (!sys.in_domain(xp)) lo = xj;
    xp[j] = hi;
    if (!sys.in_domain(xp)) hi = xj;
    if (hi == lo) throw EvaluationError(j, "no probe inside the state domain");
    try {
      xp[j] = hi;
      sys.eval(xp, u, fp);
      xp[j] = lo;
      sys.eval(xp, u, fm);
    } catch (const std::exception& e) {
      xp[j] = xj;
      throw EvaluationError(j, e.what());
    }
    xp[j] = xj;
    if (!all_finite(fp) || !all_finite(fm)) throw EvaluationError(j, "non-finite value");
    for (std::size_t i = 0; i < sys.n; ++i) jac(i, j) = (fp[i] - fm[i]) / (hi - lo);
  }
  return jac;
}

inline Matrix jacobian_fd(const ControlledSystem& sys, VecView x, VecView u) {
  return jacobian_fd(sys, x, u, default_fd_step(x));
}

/// Counterexample data. `i`/`j` meaning depends on the check: Jacobian
/// entry for the orthant test, (dual generator, face generator) for the
/// general test, violated normal for the reduction test.
struct Witness {
  std::size_t sample = 0;
  Vec x;
  Vec u;
  std::size_t i = std::numeric_limits<std::size_t>::max();
  std::size_t j = std::numeric_limits<std::size_t>::max();
  double value = 0.0;
};

struct CheckReport {
  std::string check;
  std::size_t checked = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
  std::optional<Witness> worst;

  bool passed() const { return failed == 0; }
  std::size_t passed_count() const { return checked - failed; }

  void record_failure(Witness w) {
    ++failed;
    if (!worst || w.value < worst->value ||
        (w.value == worst->value && w.sample < worst->sample))
      worst = std::move(w);
  }

  void merge(const CheckReport& other) {
    checked += other.checked;
    skipped += other.skipped;
    const std::size_t before = failed;
    if (other.worst) record_failure(*other.worst);
    failed = before + other.failed;
  }

  std::string summary() const {
    std::ostringstream os;
    os << check << ": " << (passed() ? "PASS" : "FAIL") << " (" << passed_count() << "/"
       << checked << " samples passed";
    if (skipped) os << ", " << skipped << " skipped";
    os << ")";
    if (worst) {
      os << "\n  worst value " << worst->value << " at sample " << worst->sample << ", x = [";
      for (std::size_t k = 0; k < worst->x.size(); ++k) os << (k ? ", " : "") << worst->x[k];
      os << "], u = [";
      for (std::size_t k = 0; k < worst->u.size(); ++k) os << (k ? ", " : "") << worst->u[k];
      os << "]";
      if (worst->i != std::numeric_limits<std::size_t>::max()) os << ", i = " << worst->i;
      if (worst->j != std::numeric_limits<std::size_t>::max()) os << ", j = " << worst->j;
    }
    return os.str();
  }
};

struct CheckOptions {
  double tol_grad = 1e-7;
  /// Pair spacing for the dual-cone test, relative to (1 + |x|∞).
  double pair_step = 1e-2;
  unsigned threads = 1;
};

struct SamplePoint {
  Vec x;
  Vec u;
};

/// Sample `index` of `plan` for `sys`: state from the plan's state box,
/// control from the plan's control box or, if that is empty, from the
/// system's control set.
class SampleSource {
 public:
  SampleSource(const ControlledSystem& sys, const SamplingPlan& plan)
      : sys_(sys), plan_(plan), seq_(sys.n + control_dims(sys, plan), plan.seed) {
    plan.state.validate("SamplingPlan state box");
    require_dim(plan.state.dim(), sys.n, "SamplingPlan state box");
    if (plan.control.dim() != 0) {
      plan.control.validate("SamplingPlan control box");
      require_dim(plan.control.dim(), sys.m, "SamplingPlan control box");
    }
  }

  SamplePoint operator()(std::size_t index) const {
    const Vec p = seq_.point(index);
    SamplePoint s;
    s.x = map_to_box(p, plan_.state);
    if (plan_.control.dim() != 0) {
      s.u = map_to_box(p, plan_.control, sys_.n);
    } else if (sys_.controls.is_box()) {
      s.u = map_to_box(p, sys_.controls.bounds(), sys_.n);
    } else {
      const auto& pts = sys_.controls.points();
      auto k = static_cast<std::size_t>(p[sys_.n] * static_cast<double>(pts.size()));
      s.u = pts[std::min(k, pts.size() - 1)];
    }
    return s;
  }

 private:
  static std::size_t control_dims(const ControlledSystem& sys, const SamplingPlan& plan) {
    if (plan.control.dim() != 0 || sys.controls.is_box()) return sys.m;
    return 1;
  }

  const ControlledSystem& sys_;
  const SamplingPlan& plan_;
  HaltonSequence seq_;
};

namespace detail {

template <class PerSample>
CheckReport run_sampled(const std::string& name, const ControlledSystem& sys,
                        const SamplingPlan& plan, unsigned threads, PerSample&& per_sample) {
  SampleSource source(sys, plan);
  std::vector<CheckReport> parts(chunk_count(plan.count, threads));
  parallel_chunks(plan.count, threads, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    CheckReport& r = parts[chunk];
    for (std::size_t s = begin; s < end; ++s) per_sample(s, source(s), r);
  });
  CheckReport total;
  total.check = name;
  for (const auto& p : parts) total.merge(p);
  return total;
}

}  // namespace detail

/// Orthant test: s_i s_j ∂f_i/∂x_j >= 0 for all i != j at each sample.
inline CheckReport check_orthant_quasimonotone(const ControlledSystem& sys,
                                               const ConvexCone& cone,
                                               const SamplingPlan& plan,
                                               const CheckOptions& opts = {}) {
  if (!cone.is_orthant())
    throw std::invalid_argument("check_orthant_quasimonotone: cone is not an orthant");
  require_dim(cone.dim(), sys.n, "check_orthant_quasimonotone cone");
  const auto& s = cone.signs();
  return detail::run_sampled(
      "orthant-quasimonotone", sys, plan, opts.threads,
      [&](std::size_t index, const SamplePoint& p, CheckReport& r) {
        const Matrix jac = jacobian_fd(sys, p.x, p.u);
        ++r.checked;
        std::optional<Witness> local;
        for (std::size_t i = 0; i < sys.n; ++i) {
          for (std::size_t j = 0; j < sys.n; ++j) {
            if (i == j) continue;
            const double v = s[i] * s[j] * jac(i, j);
            if (v < -opts.tol_grad * (1.0 + std::abs(jac(i, j))) &&
                (!local || v < local->value))
              local = Witness{index, p.x, p.u, i, j, v};
          }
        }
        if (local) {
          r.record_failure(*local);
        }
      });
}

/// Dual-cone test of the definition itself: for every dual generator y and
/// every face direction d ∈ K ∩ {y}⊥, <f(x + t d, u) - f(x, u), y> >= 0.
inline CheckReport check_general_quasimonotone(const ControlledSystem& sys,
                                               const ConvexCone& cone,
                                               const SamplingPlan& plan,
                                               const CheckOptions& opts = {}) {
  require_dim(cone.dim(), sys.n, "check_general_quasimonotone cone");
  const auto& duals = cone.dual_generators();
  if (duals.empty())
    throw std::invalid_argument("check_general_quasimonotone: cone has no dual generators");
  std::vector<std::vector<Vec>> faces;
  faces.reserve(duals.size());
  for (const auto& y : duals) faces.push_back(cone.face_generators(y));

  return detail::run_sampled(
      "general-quasimonotone", sys, plan, opts.threads,
      [&](std::size_t index, const SamplePoint& p, CheckReport& r) {
        auto rng = sample_rng(plan.seed, index);
        std::uniform_real_distribution<double> unit(0.1, 1.0);
        const double step = opts.pair_step * (1.0 + norm_inf(p.x));
        const Vec fx = sys(p.x, p.u);
        ++r.checked;
        std::optional<Witness> local;
        bool any_pair = false;
        for (std::size_t yi = 0; yi < duals.size(); ++yi) {
          const Vec& y = duals[yi];
          const auto& face = faces[yi];
          std::vector<Vec> directions = face;
          if (face.size() >= 2) {
            Vec mix(sys.n, 0.0);
            for (const auto& g : face) {
              const double c = unit(rng);
              for (std::size_t k = 0; k < sys.n; ++k) mix[k] += c * g[k];
            }
            directions.push_back(std::move(mix));
          }
          for (std::size_t di = 0; di < directions.size(); ++di) {
            const Vec& d = directions[di];
            double t = step * unit(rng) / std::max(1.0, norm_inf(d));
            // Prefer (x, x + t d); fall back to (x - t d, x) near the domain edge.
            std::optional<std::pair<Vec, Vec>> pair;
            for (int attempt = 0; attempt < 4 && !pair; ++attempt, t *= 0.5) {
              Vec hi = axpy(p.x, t, d);
              if (sys.in_domain(hi)) {
                pair.emplace(p.x, std::move(hi));
                break;
              }
              Vec lo = axpy(p.x, -t, d);
              if (sys.in_domain(lo)) pair.emplace(std::move(lo), p.x);
            }
            if (!pair) continue;
            any_pair = true;
            const Vec f_lo = (pair->first == p.x) ? fx : sys(pair->first, p.u);
            const Vec f_hi = (pair->second == p.x) ? fx : sys(pair->second, p.u);
            const double lo_y = dot(f_lo, y);
            const double hi_y = dot(f_hi, y);
            const double v = hi_y - lo_y;
            if (v < -opts.tol_grad * (1.0 + std::abs(lo_y) + std::abs(hi_y)) &&
                (!local || v < local->value))
              local = Witness{index, p.x, p.u, yi, di, v};
          }
        }
        if (!any_pair) {
          --r.checked;
          ++r.skipped;
          return;
        }
        if (local) r.record_failure(*local);
      });
}

/// f(x, u) ⪯_K f(x, φ(u)) at each sample. φ leaving the control set is a
/// hard error: the reduction premise itself is broken.
inline CheckReport check_reduction(const ControlledSystem& sys, const ConvexCone& cone,
                                   const Reduction& red, const SamplingPlan& plan,
                                   const CheckOptions& opts = {}) {
  require_dim(cone.dim(), sys.n, "check_reduction cone");
  return detail::run_sampled(
      "reduction", sys, plan, opts.threads,
      [&](std::size_t index, const SamplePoint& p, CheckReport& r) {
        const Vec pu = red(p.u);
        if (!sys.controls.contains(pu))
          throw std::domain_error("check_reduction: phi(u) leaves the control set");
        const Vec f0 = sys(p.x, p.u);
        const Vec f1 = sys(p.x, pu);
        const Vec diff = sub(f1, f0);
        ++r.checked;
        const double tol = cone.tol() * (1.0 + norm_inf(f0) + norm_inf(f1));
        if (!cone.contains(diff, tol)) {
          std::size_t worst_i = 0;
          double worst_v = kInf;
          for (std::size_t i = 0; i < cone.normals().size(); ++i) {
            const double v = dot(cone.normals()[i], diff);
            if (v < worst_v) {
              worst_v = v;
              worst_i = i;
            }
          }
          Witness w{index, p.x, p.u, worst_i, std::numeric_limits<std::size_t>::max(), worst_v};
          r.record_failure(std::move(w));
        }
      });
}

/// Diagnostic only: largest observed |f(x,u) - f(x',u)| / |x - x'| for x'
/// drawn within `radius` (relative to 1 + |x|∞) of each sample.
inline double estimate_lipschitz(const ControlledSystem& sys, const SamplingPlan& plan,
                                 double radius = 1e-3) {
  SampleSource source(sys, plan);
  double best = 0.0;
  for (std::size_t s = 0; s < plan.count; ++s) {
    const SamplePoint p = source(s);
    auto rng = sample_rng(plan.seed ^ 0x9e3779b97f4a7c15ULL, s);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Vec xp = p.x;
    const double r = radius * (1.0 + norm_inf(p.x));
    for (double& v : xp) v += r * unit(rng);
    if (!sys.in_domain(xp)) continue;
    const double dx = norm2(sub(xp, p.x));
    if (dx == 0.0) continue;
    best = std::max(best, norm2(sub(sys(xp, p.u), sys(p.x, p.u))) / dx);
  }
  return best;
}

}  // namespace viakernel
