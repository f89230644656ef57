#pragma once

#include "wwb/fractal.hpp"
#include "wwb/grid.hpp"
#include "wwb/parallel.hpp"
#include "wwb/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace wwb {

struct VariationLevel {
  unsigned n = 0;
  double v = 0.0;
  std::optional<double> v_over_n;
  /// V_n / n^{1/(2H)}, an exploratory normalization.
  std::optional<double> v_over_n_power;
  /// Increments left out of the sum (Phi-variation only).
  std::size_t excluded = 0;
};

struct VariationCurve {
  double p = 2.0;
  double t_cap = 1.0;
  std::vector<VariationLevel> levels;

  const VariationLevel& top() const { return levels.back(); }
  const VariationLevel& at(unsigned n) const {
    for (const auto& l : levels)
      if (l.n == n) return l;
    throw std::out_of_range("variation level " + std::to_string(n) + " not present");
  }
};

/// Index of the last increment summed at level n: min(floor(t b^n), b^n - 1).
inline index_t last_increment_index(double t_cap, index_t level_cells) {
  const double x = t_cap * static_cast<double>(level_cells);
  const auto k = static_cast<index_t>(std::floor(x * (1.0 + 1e-12)));
  return std::min(k, level_cells - 1);
}

inline void validate_t_cap(double t_cap) {
  if (!(t_cap > 0.0 && t_cap <= 1.0)) throw std::invalid_argument("t_cap must lie in (0,1]");
}

/// sum_{k <= floor(t b^n)} |f((k+1) b^-n) - f(k b^-n)|^p using the level-n
/// restriction of `path`.
template <class Fn>
double level_sum(const GridPath& path, unsigned n, double t_cap, Fn&& term) {
  const BadicGrid& g = path.grid();
  const index_t stride = g.stride(n);
  const index_t level_cells = g.cells() / stride;
  const index_t last = last_increment_index(t_cap, level_cells);
  const auto v = path.values();
  double sum = 0.0;
  for (index_t k = 0; k <= last; ++k) sum += term(v[(k + 1) * stride] - v[k * stride]);
  return sum;
}

inline double level_variation(const GridPath& path, unsigned n, double p, double t_cap = 1.0) {
  if (p == 2.0) return level_sum(path, n, t_cap, [](double d) { return d * d; });
  return level_sum(path, n, t_cap, [p](double d) { return std::pow(std::abs(d), p); });
}

/// V_n(p) for n = 1..depth from the single path. When `hurst` is given the
/// exploratory column V_n / n^{1/(2H)} is filled in.
inline VariationCurve pth_variation_curve(const GridPath& path, double p, double t_cap = 1.0,
                                          std::optional<double> hurst = std::nullopt) {
  if (!(p >= 1.0)) throw std::invalid_argument("p-th variation requires p >= 1");
  validate_t_cap(t_cap);
  VariationCurve c{p, t_cap, {}};
  for (unsigned n = 1; n <= path.grid().depth(); ++n) {
    VariationLevel l;
    l.n = n;
    l.v = level_variation(path, n, p, t_cap);
    l.v_over_n = l.v / n;
    if (hurst) l.v_over_n_power = l.v / std::pow(static_cast<double>(n), 1.0 / (2.0 * *hurst));
    c.levels.push_back(l);
  }
  return c;
}

struct CriticalDiagnostics {
  VariationCurve quadratic;  // carries V_n(2) / n
  VariationCurve below;      // q = 1.8
  VariationCurve above;      // q = 2.2
  std::optional<std::string> warning;
};

inline constexpr double critical_q_below = 1.8;
inline constexpr double critical_q_above = 2.2;

/// V_n(2)/n with the companion curves V_n(1.8) and V_n(2.2). A warning is
/// attached when `params` is given and is not the critical H = 1/2,
/// alpha^2 b = 1 configuration.
inline CriticalDiagnostics normalized_qv(const GridPath& path, double t_cap = 1.0,
                                         std::optional<WWParams> params = std::nullopt) {
  CriticalDiagnostics d{pth_variation_curve(path, 2.0, t_cap), pth_variation_curve(path, critical_q_below, t_cap),
                        pth_variation_curve(path, critical_q_above, t_cap), std::nullopt};
  if (params) {
    const double a2b = params->alpha() * params->alpha() * params->b();
    if (std::abs(params->hurst() - 0.5) > 1e-12 || std::abs(a2b - 1.0) > 1e-12)
      d.warning = "normalized quadratic variation is only meaningful for H = 1/2 and alpha^2 b = 1";
  }
  return d;
}

/// Phi(x) = x^{1/H} (-log x)^{-1/(2H)} for 0 < x < 1/e.
inline double phi_function(double x, double hurst) {
  if (x <= 0.0) return 0.0;
  return std::pow(x, 1.0 / hurst) * std::pow(-std::log(x), -1.0 / (2.0 * hurst));
}

inline constexpr double phi_variation_cutoff = 0.36787944117144233;  // e^-1

/// sum_k Phi(|Delta_k|) per level over [0, t_cap]; increments with
/// |Delta| >= 1/e are left out and counted in `excluded`.
inline VariationCurve phi_variation(const GridPath& path, double hurst, double t_cap = 1.0) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("H must lie in (0,1)");
  validate_t_cap(t_cap);
  VariationCurve c{1.0 / hurst, t_cap, {}};
  for (unsigned n = 1; n <= path.grid().depth(); ++n) {
    VariationLevel l;
    l.n = n;
    std::size_t excluded = 0;
    l.v = level_sum(path, n, t_cap, [&](double d) {
      const double a = std::abs(d);
      if (a >= phi_variation_cutoff) {
        ++excluded;
        return 0.0;
      }
      return phi_function(a, hurst);
    });
    l.excluded = excluded;
    c.levels.push_back(l);
  }
  return c;
}

struct RoughnessEstimate {
  double value = 1.0;
  double slope = 0.0;
  bool smooth = false;  // some V_n(2) vanished
  unsigned first_level = 0;
  unsigned last_level = 0;
};

inline constexpr unsigned roughness_min_depth = 6;

/// R = (1 - slope) / 2 with `slope` the least-squares slope of log_b V_n(2)
/// against n over the top half of the levels.
inline RoughnessEstimate roughness_estimate(const GridPath& path) {
  const unsigned depth = path.grid().depth();
  if (depth < roughness_min_depth) throw std::invalid_argument("roughness_estimate needs depth >= 6");
  RoughnessEstimate r;
  r.first_level = depth - depth / 2 + 1;
  r.last_level = depth;
  const double log_b = std::log(static_cast<double>(path.grid().base()));
  std::vector<double> xs, ys;
  for (unsigned n = r.first_level; n <= depth; ++n) {
    const double v = level_variation(path, n, 2.0);
    if (!(v > 0.0)) {
      r.smooth = true;
      r.value = 1.0;
      return r;
    }
    xs.push_back(n);
    ys.push_back(std::log(v) / log_b);
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  r.slope = sxy / sxx;
  r.value = 0.5 * (1.0 - r.slope);
  return r;
}

/// Base-b digits U_1..U_m and the cells [R_j b^-j, (R_j + 1) b^-j) with
/// R_j = sum_{i <= j} U_i b^{i-1}.
class DigitSequence {
 public:
  DigitSequence(unsigned b, std::vector<unsigned> digits) : b_(b), digits_(std::move(digits)) {
    if (b < 2) throw std::invalid_argument("b must be >= 2");
    for (unsigned u : digits_)
      if (u >= b) throw std::invalid_argument("digit out of range");
  }

  static DigitSequence sample(unsigned b, unsigned m, std::uint64_t seed, std::uint64_t replicate) {
    RandomStream rng(seed, StreamKind::Digits, replicate);
    std::vector<unsigned> d(m);
    for (auto& u : d) u = rng.digit(b);
    return DigitSequence(b, std::move(d));
  }

  unsigned base() const noexcept { return b_; }
  unsigned length() const noexcept { return static_cast<unsigned>(digits_.size()); }
  const std::vector<unsigned>& digits() const noexcept { return digits_; }

  /// R_j as an exact integer; requires b^j < 2^62.
  index_t r(unsigned j) const {
    if (j > length()) throw std::out_of_range("digit index beyond sequence length");
    (void)checked_pow(b_, j);
    index_t acc = 0;
    for (unsigned i = j; i >= 1; --i) acc = acc * b_ + digits_[i - 1];
    return acc;
  }

  /// Left endpoints x_j = R_j / b^j for j = 1..m (entry j - 1), through
  /// x_j = (x_{j-1} + U_j) / b.
  std::vector<double> left_points() const {
    std::vector<double> x(digits_.size());
    double prev = 0.0;
    for (std::size_t j = 0; j < digits_.size(); ++j) {
      prev = (prev + digits_[j]) / b_;
      x[j] = prev;
    }
    return x;
  }

 private:
  unsigned b_;
  std::vector<unsigned> digits_;
};

/// phi((R_j + 1) b^-j) - phi(R_j b^-j) for j = 1..m (entry j - 1).
inline std::vector<double> cell_increments(const BaseFunction& phi, const DigitSequence& d) {
  std::vector<double> out(d.length());
  if (phi.kind() == BaseKind::Table) {
    const BadicGrid& g = *phi.table_grid();
    if (g.base() != d.base()) throw std::invalid_argument("table base differs from digit base");
    if (d.length() > g.depth()) throw std::invalid_argument("Z truncation exceeds the base table depth");
    const auto& v = phi.table_values();
    index_t r = 0;
    index_t weight = 1;
    for (unsigned j = 1; j <= d.length(); ++j) {
      r += d.digits()[j - 1] * weight;
      weight *= d.base();
      const index_t s = g.stride(j);
      out[j - 1] = v[(r + 1) * s] - v[r * s];
    }
    return out;
  }
  const std::vector<double> x = d.left_points();
  double width = 1.0;
  for (unsigned j = 0; j < d.length(); ++j) {
    width /= d.base();
    out[j] = phi.increment(x[j], width);
  }
  return out;
}

/// Z_m = sum_{j <= m} alpha^-j Delta_j.
inline double z_from_increments(const std::vector<double>& increments, double alpha) {
  double z = 0.0;
  double w = 1.0;
  for (double d : increments) {
    w /= alpha;
    z += w * d;
  }
  return z;
}

/// Z_m for psi = sum_n beta^n phi({b^n .}): the level-j increment of psi is
/// sum_{n < j} beta^n Delta_{j - n} of phi.
inline double z_kernel_from_increments(const std::vector<double>& phi_increments, double alpha, double beta) {
  double z = 0.0;
  double w = 1.0;
  for (std::size_t j = 1; j <= phi_increments.size(); ++j) {
    w /= alpha;
    double dpsi = 0.0;
    double bn = 1.0;
    for (std::size_t n = 0; n < j; ++n) {
      dpsi += bn * phi_increments[j - n - 1];
      bn *= beta;
    }
    z += w * dpsi;
  }
  return z;
}

/// Bridge-path version: the cell increments of B along R at levels 1..m.
inline std::vector<double> path_cell_increments(const GridPath& bridge, const DigitSequence& d) {
  const BadicGrid& g = bridge.grid();
  if (g.base() != d.base()) throw std::invalid_argument("path base differs from digit base");
  if (d.length() > g.depth())
    throw std::invalid_argument("Z truncation m = " + std::to_string(d.length()) + " exceeds the path depth " +
                                std::to_string(g.depth()));
  std::vector<double> out(d.length());
  const auto v = bridge.values();
  index_t r = 0;
  index_t weight = 1;
  for (unsigned j = 1; j <= d.length(); ++j) {
    r += d.digits()[j - 1] * weight;
    weight *= d.base();
    const index_t s = g.stride(j);
    out[j - 1] = v[(r + 1) * s] - v[r * s];
  }
  return out;
}

struct ZMomentEstimate {
  double p = 0.0;
  unsigned m = 0;
  std::size_t reps = 0;
  double estimate = 0.0;
  double se = 0.0;
  double tail_bound = 0.0;  // bound on |Z - Z_m|; 0 for path input at m = depth
  double max_abs_z = 0.0;
};

/// C sum_{j > m} (alpha b^gamma)^-j.
inline double z_tail_bound(const DeterministicFractal& f, unsigned m) {
  const double r = f.z_ratio();
  if (!(r > 1.0)) return std::numeric_limits<double>::infinity();
  return f.base.holder_constant() * std::pow(r, -static_cast<double>(m)) / (r - 1.0);
}

inline void require_z_hypothesis(const DeterministicFractal& f) {
  if (!(f.z_ratio() > 1.0))
    throw std::invalid_argument("Z representation needs alpha * b^gamma > 1, got " + std::to_string(f.z_ratio()));
}

/// Z_m for each replicate's digit sequence (seed, replicate = i).
inline std::vector<double> z_samples(const DeterministicFractal& f, unsigned m, std::size_t reps, std::uint64_t seed,
                                     unsigned threads = 1) {
  require_z_hypothesis(f);
  std::vector<double> z(reps);
  parallel_for(reps, threads, [&](std::size_t i) {
    const DigitSequence d = DigitSequence::sample(f.b, m, seed, i);
    z[i] = z_from_increments(cell_increments(f.base, d), f.alpha);
  });
  return z;
}

inline std::vector<double> z_samples(const GridPath& bridge, double alpha, unsigned m, std::size_t reps,
                                     std::uint64_t seed, unsigned threads = 1) {
  if (m > bridge.grid().depth())
    throw std::invalid_argument("Z truncation m exceeds the path depth");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  std::vector<double> z(reps);
  parallel_for(reps, threads, [&](std::size_t i) {
    const DigitSequence d = DigitSequence::sample(bridge.grid().base(), m, seed, i);
    z[i] = z_from_increments(path_cell_increments(bridge, d), alpha);
  });
  return z;
}

namespace detail {
inline ZMomentEstimate summarize_z(const std::vector<double>& z, double p, unsigned m) {
  std::vector<double> powers(z.size());
  double max_abs = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    powers[i] = std::pow(std::abs(z[i]), p);
    max_abs = std::max(max_abs, std::abs(z[i]));
  }
  const SampleSummary s = summarize(powers);
  ZMomentEstimate e;
  e.p = p;
  e.m = m;
  e.reps = z.size();
  e.estimate = s.mean;
  e.se = s.se;
  e.max_abs_z = max_abs;
  return e;
}
}  // namespace detail

/// Monte Carlo E_R[|Z_m|^p] for a deterministic fractal.
inline ZMomentEstimate z_moment(const DeterministicFractal& f, double p, unsigned m, std::size_t reps,
                                std::uint64_t seed, unsigned threads = 1) {
  if (reps == 0) throw std::invalid_argument("z_moment needs at least one replication");
  ZMomentEstimate e = detail::summarize_z(z_samples(f, m, reps, seed, threads), p, m);
  e.tail_bound = z_tail_bound(f, m);
  return e;
}

/// Monte Carlo E_R[|Z_m|^p] for the convolution of a sampled bridge path;
/// at m = depth the grid-level variation is (alpha^p b)^m E_R[|Z_m|^p] exactly.
inline ZMomentEstimate z_moment(const GridPath& bridge, double alpha, double p, unsigned m, std::size_t reps,
                                std::uint64_t seed, unsigned threads = 1) {
  if (reps == 0) throw std::invalid_argument("z_moment needs at least one replication");
  ZMomentEstimate e = detail::summarize_z(z_samples(bridge, alpha, m, reps, seed, threads), p, m);
  e.tail_bound = m == bridge.grid().depth() ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  return e;
}

enum class ValidityVariant { None, Direct, Negated, Reflected, NegatedReflected };

inline const char* to_string(ValidityVariant v) {
  switch (v) {
    case ValidityVariant::None: return "none";
    case ValidityVariant::Direct: return "phi";
    case ValidityVariant::Negated: return "-phi";
    case ValidityVariant::Reflected: return "phi(1-.)";
    case ValidityVariant::NegatedReflected: return "-phi(1-.)";
  }
  return "?";
}

inline constexpr unsigned validity_max_k = 60;

/// First variant g of phi for which {g(b^-k) : 1 <= k <= 60} is a subset of
/// [0, inf) other than {0}. This is a sufficient condition only.
inline ValidityVariant validity_variant(const BaseFunction& phi, unsigned b) {
  if (b < 2) throw std::invalid_argument("b must be >= 2");
  auto holds = [&](double sign, bool reflect) {
    bool nonzero = false;
    for (unsigned k = 1; k <= validity_max_k; ++k) {
      const double x = std::pow(static_cast<double>(b), -static_cast<double>(k));
      const double v = sign * (reflect ? phi(1.0 - x) : phi(x));
      if (v < 0.0) return false;
      if (v > 0.0) nonzero = true;
    }
    return nonzero;
  };
  if (holds(1.0, false)) return ValidityVariant::Direct;
  if (holds(-1.0, false)) return ValidityVariant::Negated;
  if (holds(1.0, true)) return ValidityVariant::Reflected;
  if (holds(-1.0, true)) return ValidityVariant::NegatedReflected;
  return ValidityVariant::None;
}

inline bool validity_check(const BaseFunction& phi, unsigned b) {
  return validity_variant(phi, b) != ValidityVariant::None;
}

}  // namespace wwb
