#pragma once

// Deterministic low-discrepancy sampling over state × control boxes.
// Points come from a Halton sequence with a seeded Cranley–Patterson
// rotation, so a (plan, seed) pair always yields the same sample set.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "viakernel/linalg.hpp"

namespace viakernel {

class HaltonSequence {
 public:
  HaltonSequence(std::size_t dim, std::uint64_t seed) : dim_(dim), shift_(dim) {
    if (dim > kPrimes.size())
      throw std::invalid_argument("HaltonSequence: dimension above " +
                                  std::to_string(kPrimes.size()));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& s : shift_) s = u(rng);
  }

  std::size_t dim() const { return dim_; }

  /// Point number `index` of the rotated sequence, in [0,1)^dim.
  Vec point(std::uint64_t index) const {
    Vec p(dim_);
    for (std::size_t d = 0; d < dim_; ++d) {
      double v = radical_inverse(index + 1, kPrimes[d]) + shift_[d];
      p[d] = v - std::floor(v);
    }
    return p;
  }

 private:
  static double radical_inverse(std::uint64_t i, std::uint64_t base) {
    double inv = 1.0 / static_cast<double>(base);
    double f = inv;
    double r = 0.0;
    while (i > 0) {
      r += f * static_cast<double>(i % base);
      i /= base;
      f *= inv;
    }
    return r;
  }

  static constexpr std::array<std::uint64_t, 16> kPrimes{2,  3,  5,  7,  11, 13, 17, 19,
                                                         23, 29, 31, 37, 41, 43, 47, 53};
  std::size_t dim_;
  Vec shift_;
};

/// Where sampled checks draw their (x, u) points. An empty control box
/// means "use the system's control set".
struct SamplingPlan {
  Box state;
  Box control;
  std::size_t count = 10000;
  std::uint64_t seed = 0;
};

/// Maps a unit-cube point onto a finite box, coordinate by coordinate.
inline Vec map_to_box(VecView unit, const Box& box, std::size_t offset = 0) {
  Vec x(box.dim());
  for (std::size_t j = 0; j < box.dim(); ++j) {
    if (!std::isfinite(box.lo[j]) || !std::isfinite(box.hi[j]))
      throw std::invalid_argument("sampling box must be bounded");
    x[j] = box.lo[j] + unit[offset + j] * (box.hi[j] - box.lo[j]);
  }
  return x;
}

/// Per-sample auxiliary RNG, independent of how samples are split across threads.
inline std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x5eedu};
  return std::mt19937_64(seq);
}

}  // namespace viakernel
