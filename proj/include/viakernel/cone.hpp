#pragma once

// Closed convex cones and the preorders they induce.
//
// Two representations are supported. An orthant is described by a sign
// pattern s in {+1,-1}^n, K = {x : s_j x_j >= 0}. A polyhedral cone is
// described redundantly by generators (K = cone(generators)) and by
// inward normals (K = {x : <a_i, x> >= 0}); the two descriptions must
// agree. The dual cone of {x : <a_i, x> >= 0} is cone(a_i), so the
// normals double as dual generators unless the caller supplies another
// generating set, which is then validated against the primal generators.

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "viakernel/linalg.hpp"

namespace viakernel {

enum class ConeKind { Orthant, Polyhedral };

class ConvexCone {
 public:
  static constexpr double kDefaultTol = 1e-9;

  static ConvexCone orthant(std::vector<int> signs, double tol = kDefaultTol) {
    if (signs.empty()) throw std::invalid_argument("orthant cone: empty sign pattern");
    for (int s : signs)
      if (s != 1 && s != -1)
        throw std::invalid_argument("orthant cone: signs must be +1 or -1");
    ConvexCone c;
    c.kind_ = ConeKind::Orthant;
    c.n_ = signs.size();
    c.tol_ = check_tol(tol);
    for (std::size_t j = 0; j < c.n_; ++j) {
      c.normals_.push_back(unit_vector(c.n_, j, signs[j]));
    }
    c.generators_ = c.normals_;
    c.dual_generators_ = c.normals_;
    c.signs_ = std::move(signs);
    return c;
  }

  /// `dual_generators` may be empty, in which case the normals are used.
  static ConvexCone polyhedral(std::vector<Vec> normals, std::vector<Vec> generators,
                               std::vector<Vec> dual_generators = {},
                               double tol = kDefaultTol) {
    if (normals.empty())
      throw std::invalid_argument("polyhedral cone: at least one normal is required");
    ConvexCone c;
    c.kind_ = ConeKind::Polyhedral;
    c.n_ = normals.front().size();
    c.tol_ = check_tol(tol);
    if (c.n_ == 0) throw std::invalid_argument("polyhedral cone: zero dimension");
    for (const auto& a : normals) {
      require_dim(a.size(), c.n_, "polyhedral cone normal");
      if (norm2(a) == 0.0) throw std::invalid_argument("polyhedral cone: zero normal");
    }
    for (const auto& g : generators) {
      require_dim(g.size(), c.n_, "polyhedral cone generator");
      for (std::size_t i = 0; i < normals.size(); ++i) {
        if (dot(normals[i], g) < -c.tol_ * (1.0 + norm2(g)))
          throw std::invalid_argument("polyhedral cone: generator violates normal " +
                                      std::to_string(i));
      }
    }
    if (dual_generators.empty()) {
      dual_generators = normals;
    } else {
      for (const auto& y : dual_generators) {
        require_dim(y.size(), c.n_, "polyhedral cone dual generator");
        for (const auto& g : generators) {
          if (dot(y, g) < -c.tol_ * (1.0 + norm2(y) * norm2(g)))
            throw std::invalid_argument(
                "polyhedral cone: supplied dual generator is not in the dual cone");
        }
      }
    }
    c.normals_ = std::move(normals);
    c.generators_ = std::move(generators);
    c.dual_generators_ = std::move(dual_generators);
    return c;
  }

  ConeKind kind() const { return kind_; }
  bool is_orthant() const { return kind_ == ConeKind::Orthant; }
  std::size_t dim() const { return n_; }
  double tol() const { return tol_; }
  const std::vector<int>& signs() const { return signs_; }
  const std::vector<Vec>& normals() const { return normals_; }
  const std::vector<Vec>& generators() const { return generators_; }

  /// Finite generating set of the dual cone K*.
  const std::vector<Vec>& dual_generators() const { return dual_generators_; }

  bool contains(VecView x) const { return contains(x, tol_); }

  bool contains(VecView x, double tol) const {
    require_dim(x.size(), n_, "ConvexCone::contains");
    if (kind_ == ConeKind::Orthant) {
      for (std::size_t j = 0; j < n_; ++j)
        if (signs_[j] * x[j] < -tol) return false;
      return true;
    }
    for (const auto& a : normals_)
      if (dot(a, x) < -tol) return false;
    return true;
  }

  /// x ⪯_K y  iff  y - x ∈ K
  bool leq(VecView x, VecView y) const { return leq(x, y, tol_); }

  bool leq(VecView x, VecView y, double tol) const {
    require_dim(x.size(), n_, "ConvexCone::leq");
    require_dim(y.size(), n_, "ConvexCone::leq");
    return contains(sub(y, x), tol);
  }

  /// A cone has nonempty interior iff the sum of its generators lies
  /// strictly inside every normal halfspace.
  bool has_interior() const {
    if (kind_ == ConeKind::Orthant) return true;
    if (generators_.empty()) return false;
    Vec w(n_, 0.0);
    for (const auto& g : generators_)
      for (std::size_t j = 0; j < n_; ++j) w[j] += g[j];
    for (const auto& a : normals_)
      if (dot(a, w) <= tol_ * (1.0 + norm2(w))) return false;
    return true;
  }

  /// x ≪_K y  iff  y - x ∈ int K
  bool strictly_less(VecView x, VecView y) const {
    require_dim(x.size(), n_, "ConvexCone::strictly_less");
    require_dim(y.size(), n_, "ConvexCone::strictly_less");
    if (!has_interior())
      throw std::domain_error("strictly_less: cone has empty interior");
    const Vec d = sub(y, x);
    for (const auto& a : normals_)
      if (!(dot(a, d) > tol_)) return false;
    return true;
  }

  /// d ∈ K ∩ {y}⊥, i.e. x ⪯_{K∩{y}⊥} x + d.
  bool in_face(VecView y, VecView d) const {
    require_dim(y.size(), n_, "ConvexCone::in_face");
    require_dim(d.size(), n_, "ConvexCone::in_face");
    return contains(d) && std::abs(dot(d, y)) <= tol_;
  }

  /// Generators g with <g, y> = 0 (within tol); they span the face K ∩ {y}⊥
  /// when y is an extreme ray of K*.
  std::vector<Vec> face_generators(VecView y) const {
    std::vector<Vec> face;
    for (const auto& g : generators_)
      if (std::abs(dot(g, y)) <= tol_ * (1.0 + norm2(g) * norm2(y))) face.push_back(g);
    return face;
  }

  /// Random nonnegative combination of generators with coefficients in [0, scale].
  template <class Rng>
  Vec sample_member(Rng& rng, double scale = 1.0) const {
    std::uniform_real_distribution<double> coeff(0.0, scale);
    Vec x(n_, 0.0);
    for (const auto& g : generators_) {
      const double c = coeff(rng);
      for (std::size_t j = 0; j < n_; ++j) x[j] += c * g[j];
    }
    return x;
  }

  /// Polyhedral distance surrogate into K: max over dual generators y of
  /// max(0, -<d, y>) / |y|. Zero iff d ∈ K (up to rounding).
  double defect(VecView d) const {
    require_dim(d.size(), n_, "ConvexCone::defect");
    double worst = 0.0;
    for (const auto& y : dual_generators_) {
      const double ny = norm2(y);
      if (ny == 0.0) continue;
      worst = std::max(worst, -dot(d, y) / ny);
    }
    return worst;
  }

 private:
  static double check_tol(double tol) {
    if (!(tol >= 0.0)) throw std::invalid_argument("cone tolerance must be nonnegative");
    return tol;
  }

  ConeKind kind_ = ConeKind::Orthant;
  std::size_t n_ = 0;
  double tol_ = kDefaultTol;
  std::vector<int> signs_;
  std::vector<Vec> normals_;
  std::vector<Vec> generators_;
  std::vector<Vec> dual_generators_;
};

}  // namespace viakernel
