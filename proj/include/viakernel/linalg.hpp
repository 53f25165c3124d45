#pragma once

// Small dense vector/matrix helpers shared by every module. States and
// controls are plain std::vector<double>; read-only arguments are spans.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace viakernel {

using Vec = std::vector<double>;
using VecView = std::span<const double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline void require_dim(std::size_t got, std::size_t expected, const char* what) {
  if (got != expected) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " +
                                std::to_string(got) + ", expected " +
                                std::to_string(expected) + ")");
  }
}

inline double dot(VecView a, VecView b) {
  require_dim(b.size(), a.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(VecView a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(VecView a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline Vec sub(VecView a, VecView b) {
  require_dim(b.size(), a.size(), "sub");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vec add(VecView a, VecView b) {
  require_dim(b.size(), a.size(), "add");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

/// a + s * b
inline Vec axpy(VecView a, double s, VecView b) {
  require_dim(b.size(), a.size(), "axpy");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + s * b[i];
  return r;
}

inline Vec scaled(VecView a, double s) {
  Vec r(a.begin(), a.end());
  for (double& v : r) v *= s;
  return r;
}

inline bool all_finite(VecView a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

inline Vec unit_vector(std::size_t n, std::size_t j, double sign = 1.0) {
  Vec e(n, 0.0);
  e.at(j) = sign;
  return e;
}

/// Row-major dense matrix; only what the finite-difference Jacobian needs.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  Vec apply(VecView x) const {
    require_dim(x.size(), cols_, "Matrix::apply");
    Vec r(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) r[i] += (*this)(i, j) * x[j];
    return r;
  }

  double max_abs_diff(const Matrix& other) const {
    if (other.rows_ != rows_ || other.cols_ != cols_)
      throw std::invalid_argument("Matrix::max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t k = 0; k < data_.size(); ++k)
      m = std::max(m, std::abs(data_[k] - other.data_[k]));
    return m;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Axis-aligned box; infinite bounds are allowed.
struct Box {
  Vec lo;
  Vec hi;

  std::size_t dim() const { return lo.size(); }

  void validate(const char* what) const {
    require_dim(hi.size(), lo.size(), what);
    for (std::size_t j = 0; j < lo.size(); ++j) {
      if (!(lo[j] <= hi[j]))
        throw std::invalid_argument(std::string(what) + ": empty box in coordinate " +
                                    std::to_string(j));
    }
  }

  bool contains(VecView x, double tol = 0.0) const {
    require_dim(x.size(), lo.size(), "Box::contains");
    for (std::size_t j = 0; j < x.size(); ++j)
      if (x[j] < lo[j] - tol || x[j] > hi[j] + tol) return false;
    return true;
  }
};

}  // namespace viakernel
