#pragma once

// The Weierstrass convolution f(t) = sum_n alpha^n phi({b^n t}): on sampled
// bridge paths, on deterministic base functions, and on base functions that
// are themselves Weierstrass convolutions (kernel of a kernel).

#include "wwb/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wwb {

enum class BaseKind { Tent, WeierstrassCos, WeierstrassSin, Table };

inline const char* to_string(BaseKind k) {
  switch (k) {
    case BaseKind::Tent: return "tent";
    case BaseKind::WeierstrassCos: return "cos";
    case BaseKind::WeierstrassSin: return "sin";
    case BaseKind::Table: return "table";
  }
  return "?";
}

/// A continuous phi on [0,1] with phi(0) = phi(1), plus the regularity
/// metadata the tail bounds need: |phi(x) - phi(y)| <= C |x - y|^gamma on
/// b-adic cells, and sup |phi|.
class BaseFunction {
 public:
  static BaseFunction tent() { return BaseFunction(BaseKind::Tent, 1.0, 1.0, 0.5); }
  static BaseFunction weierstrass_cos() {
    return BaseFunction(BaseKind::WeierstrassCos, 1.0, 2.0 * std::numbers::pi, 2.0);
  }
  static BaseFunction weierstrass_sin() {
    return BaseFunction(BaseKind::WeierstrassSin, 1.0, 2.0 * std::numbers::pi, 1.0);
  }

  /// phi tabulated on every point of `grid`, linearly interpolated between
  /// points. The Hoelder constant is the largest |increment| * b^(j gamma)
  /// over all cells of levels j <= depth.
  static BaseFunction table(const BadicGrid& grid, std::vector<double> values, double gamma = 1.0) {
    if (values.size() != grid.point_count())
      throw std::invalid_argument("base table needs one value per grid point");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("Hoelder exponent must lie in (0,1]");
    for (double v : values)
      if (!std::isfinite(v)) throw std::invalid_argument("base table values must be finite");
    if (std::abs(values.front() - values.back()) > 1e-12)
      throw std::invalid_argument("base table must satisfy phi(0) = phi(1)");
    double sup = 0.0;
    for (double v : values) sup = std::max(sup, std::abs(v));
    double constant = 0.0;
    for (unsigned j = 0; j <= grid.depth(); ++j) {
      const index_t stride = grid.stride(j);
      const double scale = std::pow(static_cast<double>(grid.base()), j * gamma);
      for (index_t k = 0; k + stride < values.size(); k += stride)
        constant = std::max(constant, std::abs(values[k + stride] - values[k]) * scale);
    }
    BaseFunction f(BaseKind::Table, gamma, constant, sup);
    f.grid_ = grid;
    f.values_ = std::move(values);
    return f;
  }

  BaseKind kind() const noexcept { return kind_; }
  double holder_exponent() const noexcept { return gamma_; }
  double holder_constant() const noexcept { return constant_; }
  double sup_norm() const noexcept { return sup_; }
  const std::optional<BadicGrid>& table_grid() const noexcept { return grid_; }
  const std::vector<double>& table_values() const noexcept { return values_; }

  double operator()(double x) const {
    switch (kind_) {
      case BaseKind::Tent: return std::min(x, 1.0 - x);
      case BaseKind::WeierstrassCos: {
        const double s = std::sin(std::numbers::pi * x);
        return -2.0 * s * s;
      }
      case BaseKind::WeierstrassSin: return std::sin(2.0 * std::numbers::pi * x);
      case BaseKind::Table: {
        const double pos = x * static_cast<double>(grid_->cells());
        const double k = std::round(pos);
        if (std::abs(pos - k) <= 1e-9 * std::max(1.0, pos)) return values_[static_cast<std::size_t>(k)];
        const auto lo = std::min(static_cast<std::size_t>(std::floor(pos)), values_.size() - 2);
        const double w = pos - static_cast<double>(lo);
        return values_[lo] + w * (values_[lo + 1] - values_[lo]);
      }
    }
    return 0.0;
  }

  /// phi(left + width) - phi(left), evaluated without cancellation for the
  /// analytic kinds.
  double increment(double left, double width) const {
    switch (kind_) {
      case BaseKind::Tent: {
        const double right = left + width;
        if (right <= 0.5) return width;
        if (left >= 0.5) return -width;
        return (0.5 - left) - (right - 0.5);
      }
      case BaseKind::WeierstrassCos:
        return -2.0 * std::sin(2.0 * std::numbers::pi * left + std::numbers::pi * width) *
               std::sin(std::numbers::pi * width);
      case BaseKind::WeierstrassSin:
        return 2.0 * std::cos(2.0 * std::numbers::pi * left + std::numbers::pi * width) *
               std::sin(std::numbers::pi * width);
      case BaseKind::Table: return (*this)(left + width) - (*this)(left);
    }
    return 0.0;
  }

 private:
  BaseFunction(BaseKind kind, double gamma, double constant, double sup)
      : kind_(kind), gamma_(gamma), constant_(constant), sup_(sup) {}

  BaseKind kind_;
  double gamma_;
  double constant_;
  double sup_;
  std::optional<BadicGrid> grid_;
  std::vector<double> values_;
};

/// f(t) = sum_{n >= 0} alpha^n phi({b^n t}).
struct DeterministicFractal {
  BaseFunction base;
  double alpha;
  unsigned b;

  DeterministicFractal(BaseFunction base_, double alpha_, unsigned b_)
      : base(std::move(base_)), alpha(alpha_), b(b_) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
    if (b < 2) throw std::invalid_argument("b must be >= 2");
  }

  /// K = min(1, -log_b alpha).
  double roughness() const { return std::min(1.0, -std::log(alpha) / std::log(static_cast<double>(b))); }
  /// alpha * b^gamma, which must exceed 1 for the digit representation.
  double z_ratio() const { return alpha * std::pow(static_cast<double>(b), base.holder_exponent()); }
  /// p = -log_alpha b, the exponent of the nontrivial variation.
  double critical_p() const { return -std::log(static_cast<double>(b)) / std::log(alpha); }
};

namespace detail {

/// t in [0,1) as num / 2^bits with exact multiplication by b modulo 1.
class FixedFraction {
 public:
  FixedFraction(double t, unsigned b) : b_(b) {
    bits_ = 124U - static_cast<unsigned>(std::bit_width(static_cast<unsigned>(b)));
    mask_ = (static_cast<unsigned __int128>(1) << bits_) - 1;
    if (t <= 0.0) return;
    int exp = 0;
    const double mant = std::frexp(t, &exp);  // t = mant * 2^exp, mant in [0.5, 1)
    const auto m53 = static_cast<unsigned __int128>(std::ldexp(mant, 53));
    const int shift = static_cast<int>(bits_) - 53 + exp;  // num = m53 * 2^shift
    if (shift >= 0)
      num_ = (m53 << shift) & mask_;
    else if (shift > -64)
      num_ = (m53 + (static_cast<unsigned __int128>(1) << (-shift - 1))) >> (-shift);
  }

  double value() const { return std::ldexp(static_cast<double>(num_), -static_cast<int>(bits_)); }
  void shift() { num_ = (num_ * b_) & mask_; }

 private:
  unsigned b_;
  unsigned bits_ = 0;
  unsigned __int128 mask_ = 0;
  unsigned __int128 num_ = 0;
};

}  // namespace detail

/// Weierstrass convolution of grid values phi(t_k) with phi(0) = phi(1):
/// X(t_k) = sum_n alpha^n phi({b^n t_k}), summed in full (the terms with
/// n >= N all equal alpha^n phi(0)). Uses X(t) = phi(t) + alpha X({b t}),
/// visiting points in order of increasing b-adic level, O(b^N) in total.
inline std::vector<double> weierstrass_convolve(std::span<const double> phi, const BadicGrid& grid,
                                                double alpha) {
  if (phi.size() != grid.point_count()) throw std::invalid_argument("values do not match grid");
  std::vector<double> x(phi.size());
  const double edge = phi.front() == 0.0 ? 0.0 : phi.front() / (1.0 - alpha);
  x.front() = edge;
  x.back() = edge;
  const index_t cells = grid.cells();
  const unsigned b = grid.base();
  for (unsigned level = 1; level <= grid.depth(); ++level) {
    const index_t stride = grid.stride(level);
    const index_t level_cells = cells / stride;
    for (index_t j = 1; j < level_cells; ++j) {
      if (j % b == 0) continue;
      const index_t k = j * stride;
      const index_t next = ((j * b) % level_cells) * stride;
      x[k] = phi[k] + alpha * x[next];
    }
  }
  return x;
}

/// X(t_k) = sum_n alpha^n B({b^n t_k}) for a bridge path with B(0) = B(1) = 0;
/// exact on the grid since every term with n >= N is alpha^n B(0) = 0.
inline GridPath convolve_bridge(const GridPath& bridge, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  if (bridge.values().front() != 0.0 || bridge.values().back() != 0.0)
    throw std::invalid_argument("convolve_bridge: bridge must vanish exactly at t = 0 and t = 1");
  return GridPath(bridge.grid(), weierstrass_convolve(bridge.values(), bridge.grid(), alpha));
}

/// Number of terms M with alpha^M sup|phi| / (1 - alpha) <= tol.
inline unsigned truncation_level(double alpha, double sup_norm, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (sup_norm == 0.0) return 0;
  const double needed = std::log(tol * (1.0 - alpha) / sup_norm) / std::log(alpha);
  return needed <= 0.0 ? 0U : static_cast<unsigned>(std::ceil(needed));
}

/// Partial sum to the level whose tail bound alpha^M sup|phi| / (1-alpha)
/// is within `tol`. Fractional parts {b^n t} are computed in 124-bit fixed point.
inline double eval_deterministic(const DeterministicFractal& f, double t, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("t must lie in [0,1]");
  const unsigned levels = truncation_level(f.alpha, f.base.sup_norm(), tol);
  detail::FixedFraction x(t >= 1.0 ? 0.0 : t, f.b);
  double sum = 0.0;
  double weight = 1.0;
  for (unsigned n = 0; n < levels; ++n) {
    sum += weight * f.base(x.value());
    weight *= f.alpha;
    x.shift();
  }
  return sum;
}

/// Exact value at a b-adic point: finitely many nonconstant terms plus the
/// geometric tail phi(0) alpha^M / (1 - alpha).
inline double eval_deterministic(const DeterministicFractal& f, const BadicPoint& t) {
  if (t.base != f.b) throw std::invalid_argument("point base differs from fractal base");
  const BadicPoint p = t.reduced();
  const double phi0 = f.base(0.0);
  double acc = phi0 == 0.0 ? 0.0 : phi0 / (1.0 - f.alpha);
  for (unsigned n = p.depth; n-- > 0;) acc = f.base(p.shifted(n).value()) + f.alpha * acc;
  return acc;
}

/// f on every point of a grid with the same base.
inline GridPath eval_deterministic_on_grid(const DeterministicFractal& f, const BadicGrid& grid) {
  if (grid.base() != f.b) throw std::invalid_argument("grid base differs from fractal base");
  std::vector<double> phi(grid.point_count());
  for (std::size_t k = 0; k < phi.size(); ++k) phi[k] = f.base(grid.point(k));
  phi.back() = phi.front();
  return GridPath(grid, weierstrass_convolve(phi, grid, f.alpha));
}

/// Empirical Hoelder constant max |f(t_k) - f(t_j)| / (t_k - t_j)^gamma over
/// grid pairs with lag at most b^ceil(N/2) cells, or all pairs when
/// `all_pairs` is set (N <= 8 only).
inline double holder_scan(const GridPath& path, double gamma, bool all_pairs = false) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0,1]");
  const BadicGrid& g = path.grid();
  if (all_pairs && g.depth() > 8) throw std::invalid_argument("full-pair Hoelder scan is limited to depth <= 8");
  const index_t cells = g.cells();
  const index_t max_lag =
      all_pairs ? cells : std::min<index_t>(cells, checked_pow(g.base(), (g.depth() + 1) / 2));
  std::vector<double> inv_denominator(max_lag + 1);
  const double h = 1.0 / static_cast<double>(cells);
  for (index_t d = 1; d <= max_lag; ++d) inv_denominator[d] = 1.0 / std::pow(static_cast<double>(d) * h, gamma);
  const auto v = path.values();
  double best = 0.0;
  for (index_t k = 0; k < cells; ++k) {
    const index_t top = std::min<index_t>(max_lag, cells - k);
    for (index_t d = 1; d <= top; ++d) best = std::max(best, std::abs(v[k + d] - v[k]) * inv_denominator[d]);
  }
  return best;
}

/// psi(t) = sum_m beta^m phi({b^m t}) with 0 < beta < b^-gamma, itself a
/// valid base function for the outer convolution.
class KernelPsi {
 public:
  KernelPsi(BaseFunction phi, double beta, unsigned b) : phi_(std::move(phi)), beta_(beta), b_(b) {
    const double bound = std::pow(static_cast<double>(b), -phi_.holder_exponent());
    if (!(beta > 0.0 && beta < bound))
      throw std::invalid_argument("kernel_psi: beta must lie in (0, b^-gamma) = (0, " + std::to_string(bound) + ")");
  }

  const BaseFunction& phi() const noexcept { return phi_; }
  double beta() const noexcept { return beta_; }
  unsigned b() const noexcept { return b_; }

  DeterministicFractal as_fractal() const { return DeterministicFractal(phi_, beta_, b_); }

 private:
  BaseFunction phi_;
  double beta_;
  unsigned b_;
};

/// psi sampled on `grid`; psi(0) = psi(1).
inline GridPath kernel_psi(const BaseFunction& phi, double beta, unsigned b, const BadicGrid& grid) {
  if (grid.base() != b) throw std::invalid_argument("grid base differs from b");
  const KernelPsi psi(phi, beta, b);
  return eval_deterministic_on_grid(psi.as_fractal(), grid);
}

}  // namespace wwb
