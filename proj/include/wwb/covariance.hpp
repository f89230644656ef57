#pragma once

// Exact covariance c(s,t) = cov(X(s), X(t)) of the Wiener-Weierstrass bridge
// at b-adic points, where the double series has finitely many nonzero terms.

#include "wwb/fractal.hpp"
#include "wwb/gaussian_paths.hpp"
#include "wwb/grid.hpp"
#include "wwb/parallel.hpp"
#include "wwb/variation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wwb {

namespace detail {
inline void require_base(const WWParams& params, const BadicPoint& x) {
  if (x.base != params.b())
    throw std::invalid_argument("point base " + std::to_string(x.base) + " differs from b = " +
                                std::to_string(params.b()));
}
}  // namespace detail

/// sum_{m < M_s} sum_{n < N_t} alpha^{m+n} cov(B({b^m s}), B({b^n t})).
/// The arguments are put in a canonical order first, so c(s,t) and c(t,s)
/// agree bit for bit.
inline double ww_covariance(const WWParams& params, const KappaSpec& kappa, const BadicPoint& s_in,
                            const BadicPoint& t_in) {
  detail::require_base(params, s_in);
  detail::require_base(params, t_in);
  BadicPoint s = s_in.reduced();
  BadicPoint t = t_in.reduced();
  if (std::pair(s.depth, s.index) > std::pair(t.depth, t.index)) std::swap(s, t);
  if (s.index == 0 || t.index == 0) return 0.0;
  const double alpha = params.alpha();
  const double h = params.hurst();
  std::vector<double> t_shift(t.depth);
  for (unsigned n = 0; n < t.depth; ++n) t_shift[n] = t.shifted(n).value();
  std::vector<double> weight(s.depth + t.depth, 1.0);
  for (std::size_t i = 1; i < weight.size(); ++i) weight[i] = weight[i - 1] * alpha;
  double acc = 0.0;
  for (unsigned m = 0; m < s.depth; ++m) {
    const double sm = s.shifted(m).value();
    for (unsigned n = 0; n < t.depth; ++n) acc += weight[m + n] * bridge_covariance(h, kappa, sm, t_shift[n]);
  }
  return acc;
}

struct CovCurve {
  WWParams params;
  KappaSpec kappa;
  BadicPoint anchor;
  GridPath curve;

  const BadicGrid& grid() const noexcept { return curve.grid(); }
  std::span<const double> values() const noexcept { return curve.values(); }
};

/// c(s, t_k) for all grid points: first g(u) = sum_m alpha^m cov(B({b^m s}), B(u))
/// on the grid, then the Weierstrass convolution of g.
inline CovCurve covariance_curve(const WWParams& params, const KappaSpec& kappa, const BadicPoint& s,
                                 const BadicGrid& grid, unsigned threads = 1) {
  detail::require_base(params, s);
  if (grid.base() != params.b()) throw std::invalid_argument("grid base differs from b");
  const BadicPoint anchor = s.reduced();
  std::vector<double> anchor_shift(anchor.index == 0 ? 0 : anchor.depth);
  for (unsigned m = 0; m < anchor_shift.size(); ++m) anchor_shift[m] = anchor.shifted(m).value();
  std::vector<double> g(grid.point_count(), 0.0);
  parallel_for(g.size(), threads, [&](std::size_t k) {
    const double u = grid.point(k);
    double acc = 0.0;
    double w = 1.0;
    for (double sm : anchor_shift) {
      acc += w * bridge_covariance(params.hurst(), kappa, sm, u);
      w *= params.alpha();
    }
    g[k] = acc;
  });
  g.front() = 0.0;
  g.back() = 0.0;
  return CovCurve{params, kappa, anchor, GridPath(grid, weierstrass_convolve(g, grid, params.alpha()))};
}

struct CovVariation {
  VariationCurve curve;
  /// (max - min) / mean of V_n over the top three levels.
  double top_spread = 0.0;
};

inline constexpr unsigned covariance_variation_min_depth = 8;

/// V_n(1/K) of t -> c(s,t) with a stabilization diagnostic.
inline CovVariation covariance_variation(const CovCurve& c, double t_cap = 1.0) {
  if (c.grid().depth() < covariance_variation_min_depth)
    throw std::invalid_argument("covariance_variation needs depth >= 8");
  CovVariation out{pth_variation_curve(c.curve, 1.0 / c.params.roughness(), t_cap), 0.0};
  const auto& lv = out.curve.levels;
  double lo = lv.back().v, hi = lv.back().v, sum = 0.0;
  for (std::size_t i = lv.size() - 3; i < lv.size(); ++i) {
    lo = std::min(lo, lv[i].v);
    hi = std::max(hi, lv[i].v);
    sum += lv[i].v;
  }
  out.top_spread = sum > 0.0 ? (hi - lo) / (sum / 3.0) : 0.0;
  return out;
}

inline constexpr double second_moment_tolerance = 1e-12;

/// E[(X(t) - X(s))^2] = c(s,s) + c(t,t) - 2 c(s,t).
inline double increment_second_moment(const WWParams& params, const KappaSpec& kappa, const BadicPoint& s,
                                      const BadicPoint& t) {
  const double v =
      ww_covariance(params, kappa, s, s) + ww_covariance(params, kappa, t, t) - 2.0 * ww_covariance(params, kappa, s, t);
  if (v < -second_moment_tolerance)
    throw std::runtime_error("increment second moment is negative (" + std::to_string(v) + ")");
  return std::max(v, 0.0);
}

struct HelixBracket {
  unsigned depth = 0;
  double lower = 0.0;  // min over adjacent pairs of E[(dX)^2] / dt
  double upper = 0.0;  // max of the same ratio
};

/// Ratio E[(X(t_{k+1}) - X(t_k))^2] / b^-N over all adjacent pairs of a depth-N grid.
inline HelixBracket quasi_helix_bracket(const WWParams& params, const KappaSpec& kappa, unsigned depth,
                                        unsigned threads = 1) {
  const BadicGrid grid(params.b(), depth);
  std::vector<double> var(grid.point_count());
  parallel_for(var.size(), threads, [&](std::size_t k) {
    const auto p = BadicPoint::on_grid(grid, k);
    var[k] = ww_covariance(params, kappa, p, p);
  });
  std::vector<double> ratio(grid.cells());
  parallel_for(ratio.size(), threads, [&](std::size_t k) {
    const auto s = BadicPoint::on_grid(grid, k);
    const auto t = BadicPoint::on_grid(grid, k + 1);
    const double v = var[k] + var[k + 1] - 2.0 * ww_covariance(params, kappa, s, t);
    if (v < -second_moment_tolerance)
      throw std::runtime_error("increment second moment is negative (" + std::to_string(v) + ")");
    ratio[k] = std::max(v, 0.0) * static_cast<double>(grid.cells());
  });
  const auto [lo, hi] = std::minmax_element(ratio.begin(), ratio.end());
  return HelixBracket{depth, *lo, *hi};
}

/// The Takagi-van der Waerden function sum_n alpha^n tent({b^n t}) on a grid.
inline GridPath takagi_van_der_waerden(double alpha, const BadicGrid& grid) {
  return eval_deterministic_on_grid(DeterministicFractal(BaseFunction::tent(), alpha, grid.base()), grid);
}

/// The largest b-adic point of depth M not exceeding 1/2.
inline BadicPoint half_anchor(unsigned b, unsigned depth) {
  const index_t cells = checked_pow(b, depth);
  return BadicPoint::make(b, depth, cells / 2);
}

}  // namespace wwb
