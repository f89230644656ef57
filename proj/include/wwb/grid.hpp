#pragma once

// b-adic grids on [0,1], paths sampled on them, and exact integer maps for
// fractional parts {b^n t}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wwb {

using index_t = std::uint64_t;

/// b^n, throwing if the result does not fit below 2^62.
inline index_t checked_pow(index_t b, unsigned n) {
  constexpr index_t limit = index_t{1} << 62;
  index_t r = 1;
  for (unsigned i = 0; i < n; ++i) {
    if (r > limit / b) throw std::overflow_error("b^n exceeds the supported index range");
    r *= b;
  }
  return r;
}

/// (a * c) mod m without overflow.
inline index_t mulmod(index_t a, index_t c, index_t m) {
  return static_cast<index_t>((static_cast<unsigned __int128>(a) * c) % m);
}

/// b^n mod m by square-and-multiply.
inline index_t powmod(index_t b, std::uint64_t n, index_t m) {
  if (m == 1) return 0;
  index_t result = 1;
  index_t base = b % m;
  while (n > 0) {
    if (n & 1U) result = mulmod(result, base, m);
    base = mulmod(base, base, m);
    n >>= 1U;
  }
  return result;
}

/// Partition points k * b^-N, k = 0..b^N, of the unit interval.
class BadicGrid {
 public:
  BadicGrid(unsigned base, unsigned depth) : base_(base), depth_(depth) {
    if (base < 2) throw std::invalid_argument("grid base must be >= 2");
    cells_ = checked_pow(base, depth);
    if (cells_ >= std::numeric_limits<std::size_t>::max())
      throw std::overflow_error("grid too large for the platform index type");
  }

  unsigned base() const noexcept { return base_; }
  unsigned depth() const noexcept { return depth_; }
  /// Number of cells b^N.
  index_t cells() const noexcept { return cells_; }
  /// Number of points b^N + 1; t = 0 and t = 1 are both stored.
  std::size_t point_count() const noexcept { return static_cast<std::size_t>(cells_) + 1; }

  double point(index_t k) const { return static_cast<double>(k) / static_cast<double>(cells_); }

  /// Number of grid cells between two consecutive level-n points.
  index_t stride(unsigned level) const {
    if (level > depth_) throw std::out_of_range("level exceeds grid depth");
    return checked_pow(base_, depth_ - level);
  }

  friend bool operator==(const BadicGrid&, const BadicGrid&) = default;

 private:
  unsigned base_;
  unsigned depth_;
  index_t cells_ = 1;
};

/// The exact b-adic rational index / b^depth.
struct BadicPoint {
  unsigned base = 2;
  unsigned depth = 0;
  index_t index = 0;

  static BadicPoint make(unsigned base, unsigned depth, index_t index) {
    if (base < 2) throw std::invalid_argument("base must be >= 2");
    if (index > checked_pow(base, depth)) throw std::out_of_range("b-adic point outside [0,1]");
    return BadicPoint{base, depth, index};
  }

  static BadicPoint on_grid(const BadicGrid& g, index_t k) { return make(g.base(), g.depth(), k); }

  double value() const {
    return static_cast<double>(index) / static_cast<double>(checked_pow(base, depth));
  }

  /// Same point at the smallest depth that represents it.
  BadicPoint reduced() const {
    BadicPoint p = *this;
    if (p.index == 0) return BadicPoint{base, 0, 0};
    while (p.depth > 0 && p.index % p.base == 0) {
      p.index /= p.base;
      --p.depth;
    }
    return p;
  }

  /// The fractional part {b^n t}, exactly.
  BadicPoint shifted(unsigned n) const {
    const index_t m = checked_pow(base, depth);
    if (m == 1) return BadicPoint{base, depth, 0};
    return BadicPoint{base, depth, mulmod(index % m, powmod(base, n, m), m)};
  }
};

/// Grid index j with j / b^N = {b^n * k / b^N}, i.e. (k * b^n) mod b^N.
inline index_t frac_index(index_t k, std::uint64_t n, const BadicGrid& grid) {
  if (k > grid.cells()) throw std::out_of_range("frac_index: k exceeds b^N");
  const index_t m = grid.cells();
  if (m == 1) return 0;
  if (n >= grid.depth()) return 0;
  return mulmod(k % m, powmod(grid.base(), n, m), m);
}

/// Real-valued sample path on all b^N + 1 points of a grid.
class GridPath {
 public:
  GridPath(BadicGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.point_count())
      throw std::invalid_argument("path length " + std::to_string(values_.size()) +
                                  " does not match grid point count " +
                                  std::to_string(grid_.point_count()));
    for (double v : values_)
      if (!std::isfinite(v)) throw std::invalid_argument("path values must be finite");
  }

  static GridPath zeros(const BadicGrid& grid) {
    return GridPath(grid, std::vector<double>(grid.point_count(), 0.0));
  }

  template <class F>
  static GridPath from_function(const BadicGrid& grid, F&& f) {
    std::vector<double> v(grid.point_count());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(grid.point(k));
    return GridPath(grid, std::move(v));
  }

  const BadicGrid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }
  std::size_t size() const noexcept { return values_.size(); }

  /// Moves the storage out; the path is left empty.
  std::vector<double> release() && { return std::move(values_); }

 private:
  BadicGrid grid_;
  std::vector<double> values_;
};

/// Restriction of a path to the coarser grid of depth `target_depth`.
inline GridPath dyadic_refine(const GridPath& path, unsigned target_depth) {
  const BadicGrid& g = path.grid();
  if (target_depth > g.depth())
    throw std::invalid_argument("dyadic_refine: target depth exceeds path depth");
  BadicGrid coarse(g.base(), target_depth);
  const index_t stride = g.stride(target_depth);
  std::vector<double> v(coarse.point_count());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = path[static_cast<std::size_t>(j * stride)];
  return GridPath(coarse, std::move(v));
}

enum class Regime { HurstWins, ConvolutionWins, Critical };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::HurstWins: return "HurstWins";
    case Regime::ConvolutionWins: return "ConvolutionWins";
    case Regime::Critical: return "Critical";
  }
  return "?";
}

/// Parameters (alpha, b, H) of a Wiener-Weierstrass bridge.
class WWParams {
 public:
  static constexpr double critical_tolerance = 1e-12;

  WWParams(double alpha, unsigned b, double hurst) : alpha_(alpha), b_(b), hurst_(hurst) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
    if (b < 2) throw std::invalid_argument("b must be >= 2");
    if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("H must lie in (0,1)");
    roughness_ = std::min(1.0, -std::log(alpha) / std::log(static_cast<double>(b)));
  }

  /// alpha = b^-H, classified as Critical regardless of round-off in K.
  static WWParams exact_critical(unsigned b, double hurst) {
    WWParams p(std::pow(static_cast<double>(b), -hurst), b, hurst);
    p.exact_critical_ = true;
    return p;
  }

  /// alpha chosen so that K = 1 ^ (-log_b alpha) equals `roughness` (< 1).
  static WWParams from_roughness(double roughness, unsigned b, double hurst) {
    if (!(roughness > 0.0 && roughness < 1.0))
      throw std::invalid_argument("roughness must lie in (0,1)");
    return WWParams(std::pow(static_cast<double>(b), -roughness), b, hurst);
  }

  double alpha() const noexcept { return alpha_; }
  unsigned b() const noexcept { return b_; }
  double hurst() const noexcept { return hurst_; }
  /// K = min(1, -log_b alpha).
  double roughness() const noexcept { return exact_critical_ ? hurst_ : roughness_; }
  /// p = 1 / min(H, K).
  double p() const noexcept { return 1.0 / std::min(hurst_, roughness()); }
  bool is_exact_critical() const noexcept { return exact_critical_; }

  Regime regime() const noexcept {
    if (exact_critical_ || std::abs(hurst_ - roughness_) < critical_tolerance) return Regime::Critical;
    return hurst_ < roughness_ ? Regime::HurstWins : Regime::ConvolutionWins;
  }

 private:
  double alpha_;
  unsigned b_;
  double hurst_;
  double roughness_ = 1.0;
  bool exact_critical_ = false;
};

}  // namespace wwb
