#pragma once

// Exact fractional Brownian motion on b-adic grids, the bridge transform
// B(t) = W(t) - kappa(t) W(1), and closed-form bridge covariances.

#include "wwb/fft.hpp"
#include "wwb/grid.hpp"
#include "wwb/linalg.hpp"
#include "wwb/random.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wwb {

/// Autocovariance of unit-spaced fractional Gaussian noise,
/// gamma(k) = (|k+1|^2H + |k-1|^2H - 2|k|^2H) / 2.
inline double fgn_autocovariance(double hurst, std::uint64_t lag) {
  if (lag == 0) return 1.0;
  const double k = static_cast<double>(lag);
  const double h2 = 2.0 * hurst;
  return 0.5 * (std::pow(k + 1.0, h2) + std::pow(k - 1.0, h2) - 2.0 * std::pow(k, h2));
}

/// Covariance of fractional Brownian motion, (u^2H + v^2H - |u-v|^2H) / 2.
inline double fbm_covariance(double hurst, double u, double v) {
  if (hurst == 0.5) return std::min(u, v);
  const double h2 = 2.0 * hurst;
  return 0.5 * (std::pow(u, h2) + std::pow(v, h2) - std::pow(std::abs(u - v), h2));
}

enum class KappaKind { StandardFractional, Linear, IntegratedDensity, Table };

/// The deterministic function kappa with kappa(0) = 0 and kappa(1) = 1 that
/// turns a motion W into the bridge W(t) - kappa(t) W(1).
class KappaSpec {
 public:
  static KappaSpec standard() { return KappaSpec(KappaKind::StandardFractional); }
  static KappaSpec linear() {
    KappaSpec k(KappaKind::Linear);
    k.tau_ = 1.0;
    return k;
  }

  /// kappa(t) = <M>_t / <M>_1 for <M>_t = int_0^t phi, phi constant on the
  /// cells of `cells`. The density is normalized to unit integral.
  static KappaSpec integrated_density(const BadicGrid& cells, std::vector<double> density) {
    if (density.size() != cells.cells())
      throw std::invalid_argument("density needs one value per grid cell");
    double total = 0.0;
    for (double v : density) {
      if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("density must be finite and >= 0");
      total += v;
    }
    if (!(total > 0.0)) throw std::invalid_argument("density must have positive integral");
    KappaSpec k(KappaKind::IntegratedDensity);
    k.grid_ = cells;
    const double h = 1.0 / static_cast<double>(cells.cells());
    k.raw_integral_ = total * h;
    k.values_.assign(cells.point_count(), 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) {
      density[i] /= total / static_cast<double>(cells.cells());
      acc += density[i];
      k.values_[i + 1] = acc / static_cast<double>(cells.cells());
    }
    k.values_.back() = 1.0;
    k.density_ = std::move(density);
    k.tau_ = 1.0;
    return k;
  }

  /// Explicit kappa values on every point of `grid`. `tau` is recorded, never
  /// verified.
  static KappaSpec table(const BadicGrid& grid, std::vector<double> values,
                         std::optional<double> tau = std::nullopt) {
    if (values.size() != grid.point_count())
      throw std::invalid_argument("kappa table needs one value per grid point");
    if (std::abs(values.front()) > 1e-12 || std::abs(values.back() - 1.0) > 1e-12)
      throw std::invalid_argument("kappa table must satisfy kappa(0) = 0 and kappa(1) = 1");
    for (double v : values)
      if (!std::isfinite(v)) throw std::invalid_argument("kappa table values must be finite");
    KappaSpec k(KappaKind::Table);
    k.grid_ = grid;
    k.values_ = std::move(values);
    k.tau_ = tau;
    return k;
  }

  KappaKind kind() const noexcept { return kind_; }
  std::optional<double> tau() const noexcept { return tau_; }
  const std::optional<BadicGrid>& grid() const noexcept { return grid_; }
  /// Normalized step density (IntegratedDensity only).
  const std::vector<double>& density() const noexcept { return density_; }
  double raw_integral() const noexcept { return raw_integral_; }
  const std::vector<double>& table_values() const noexcept { return values_; }

  /// True when kappa is known to be Hoelder with some exponent tau > H.
  bool holder_certified(double hurst) const {
    switch (kind_) {
      case KappaKind::StandardFractional:
      case KappaKind::Linear:
      case KappaKind::IntegratedDensity: return true;
      case KappaKind::Table: return false;
    }
    (void)hurst;
    return false;
  }

  /// Warning text when the Hoelder requirement tau > H is not certified.
  std::optional<std::string> holder_warning(double hurst) const {
    if (holder_certified(hurst)) return std::nullopt;
    if (tau_ && *tau_ > hurst)
      return "kappa table: declared Hoelder exponent " + std::to_string(*tau_) +
             " > H is recorded but not verified";
    return "kappa table: Hoelder exponent tau > H is required but not verified";
  }

 private:
  explicit KappaSpec(KappaKind kind) : kind_(kind) {}

  KappaKind kind_;
  std::optional<double> tau_;
  std::optional<BadicGrid> grid_;
  std::vector<double> values_;   // kappa on grid points (Table, IntegratedDensity)
  std::vector<double> density_;  // IntegratedDensity only
  double raw_integral_ = 1.0;
};

inline const char* to_string(KappaKind k) {
  switch (k) {
    case KappaKind::StandardFractional: return "standard";
    case KappaKind::Linear: return "linear";
    case KappaKind::IntegratedDensity: return "integrated-density";
    case KappaKind::Table: return "table";
  }
  return "?";
}

inline double kappa_eval(const KappaSpec& spec, double hurst, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("kappa_eval: t must lie in [0,1]");
  switch (spec.kind()) {
    case KappaKind::StandardFractional: {
      if (t == 0.0) return 0.0;
      if (t == 1.0) return 1.0;
      if (hurst == 0.5) return t;
      const double h2 = 2.0 * hurst;
      return 0.5 * (1.0 + std::pow(t, h2) - std::pow(1.0 - t, h2));
    }
    case KappaKind::Linear: return t;
    case KappaKind::IntegratedDensity: {
      const BadicGrid& g = *spec.grid();
      const double x = t * static_cast<double>(g.cells());
      auto cell = static_cast<std::size_t>(std::floor(x));
      if (cell >= g.cells()) return 1.0;
      const double frac = x - static_cast<double>(cell);
      return spec.table_values()[cell] + frac * spec.density()[cell] / static_cast<double>(g.cells());
    }
    case KappaKind::Table: {
      const BadicGrid& g = *spec.grid();
      const double x = t * static_cast<double>(g.cells());
      const double k = std::round(x);
      if (std::abs(x - k) > 1e-9) throw std::domain_error("kappa_eval: t is not a point of the kappa table grid");
      return spec.table_values()[static_cast<std::size_t>(k)];
    }
  }
  return 0.0;
}

/// kappa on every point of `grid`, using exact index maps for table-based kinds.
inline std::vector<double> kappa_on_grid(const KappaSpec& spec, double hurst, const BadicGrid& grid) {
  std::vector<double> out(grid.point_count());
  if (spec.kind() == KappaKind::Table || spec.kind() == KappaKind::IntegratedDensity) {
    const BadicGrid& g = *spec.grid();
    if (g.base() != grid.base()) throw std::invalid_argument("kappa grid base differs from path grid base");
    if (g.depth() >= grid.depth()) {
      const index_t stride = g.stride(grid.depth());
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = spec.table_values()[k * stride];
      return out;
    }
    if (spec.kind() == KappaKind::Table)
      throw std::invalid_argument("kappa table is coarser than the path grid");
    // Piecewise-linear prefix sums refined to the finer grid.
    const index_t stride = grid.stride(g.depth());
    for (std::size_t k = 0; k < out.size(); ++k) {
      const std::size_t cell = k / stride;
      const std::size_t offset = k % stride;
      if (cell >= g.cells()) {
        out[k] = 1.0;
        continue;
      }
      out[k] = spec.table_values()[cell] + static_cast<double>(offset) / static_cast<double>(stride) *
                                               spec.density()[cell] / static_cast<double>(g.cells());
    }
    out.back() = 1.0;
    return out;
  }
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = kappa_eval(spec, hurst, grid.point(k));
  return out;
}

enum class SamplerMethod { Cholesky, CirculantEmbedding };

inline const char* to_string(SamplerMethod m) {
  return m == SamplerMethod::Cholesky ? "cholesky" : "circulant";
}

struct SamplerConfig {
  SamplerMethod method = SamplerMethod::CirculantEmbedding;
  std::uint64_t seed = 0;
  std::uint64_t replicate_id = 0;
};

/// Exact sampler of fractional Brownian motion on a fixed grid. Construction
/// does the O(n^3) factorization or the eigenvalue FFT once; sample() is
/// const and safe to call concurrently.
class FbmSampler {
 public:
  static constexpr index_t cholesky_max_cells = 4096;
  static constexpr double eigen_clip_relative = 1e-8;

  FbmSampler(double hurst, BadicGrid grid, SamplerMethod method)
      : hurst_(hurst), grid_(grid), method_(method) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("H must lie in (0,1)");
    scale_ = std::pow(static_cast<double>(grid.cells()), -hurst);
    if (method == SamplerMethod::Cholesky)
      init_cholesky();
    else
      init_circulant();
  }

  double hurst() const noexcept { return hurst_; }
  const BadicGrid& grid() const noexcept { return grid_; }
  SamplerMethod method() const noexcept { return method_; }
  /// Number of circulant eigenvalues clipped from [-1e-8 lambda_max, 0) to 0.
  std::size_t clipped_eigenvalues() const noexcept { return clipped_; }

  GridPath sample(std::uint64_t seed, std::uint64_t replicate_id) const {
    RandomStream rng(seed, StreamKind::Gaussian, replicate_id);
    const std::size_t n = static_cast<std::size_t>(grid_.cells());
    std::vector<double> inc(n);
    if (method_ == SamplerMethod::Cholesky) {
      Eigen::VectorXd z(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) z[static_cast<Eigen::Index>(i)] = rng.normal();
      Eigen::VectorXd x = factor_.triangularView<Eigen::Lower>() * z;
      for (std::size_t i = 0; i < n; ++i) inc[i] = x[static_cast<Eigen::Index>(i)];
    } else {
      const std::size_t m = 2 * n;
      FftBuffer in = make_fft_buffer(m);
      FftBuffer out = make_fft_buffer(m);
      for (std::size_t j = 0; j < m; ++j) {
        const double re = rng.normal();
        const double im = rng.normal();
        in[j][0] = sqrt_eigen_[j] * re;
        in[j][1] = sqrt_eigen_[j] * im;
      }
      plan_->execute(in.get(), out.get());
      for (std::size_t i = 0; i < n; ++i) inc[i] = out[i][0];
    }
    std::vector<double> w(n + 1);
    w[0] = 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += scale_ * inc[i];
      w[i + 1] = acc;
    }
    return GridPath(grid_, std::move(w));
  }

  GridPath sample(const SamplerConfig& config) const { return sample(config.seed, config.replicate_id); }

 private:
  void init_cholesky() {
    const index_t n = grid_.cells();
    if (n > cholesky_max_cells)
      throw std::invalid_argument("Cholesky sampling is limited to grids with b^N <= 4096 cells");
    const auto dim = static_cast<Eigen::Index>(n);
    Matrix cov(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = 0; j < dim; ++j)
        cov(i, j) = fgn_autocovariance(hurst_, static_cast<std::uint64_t>(std::abs(i - j)));
    auto l = cholesky_factor(cov);
    if (!l)
      throw std::runtime_error(
          "Cholesky factorization of the fGn covariance failed (not numerically PSD); "
          "add diagonal jitter or use circulant embedding");
    factor_ = std::move(*l);
  }

  void init_circulant() {
    const std::size_t n = static_cast<std::size_t>(grid_.cells());
    const std::size_t m = 2 * n;
    plan_ = std::make_shared<FftPlan>(m);
    FftBuffer row = make_fft_buffer(m);
    FftBuffer eig = make_fft_buffer(m);
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t lag = j <= n ? j : m - j;
      row[j][0] = fgn_autocovariance(hurst_, lag);
      row[j][1] = 0.0;
    }
    plan_->execute(row.get(), eig.get());
    double lambda_max = 0.0;
    for (std::size_t j = 0; j < m; ++j) lambda_max = std::max(lambda_max, eig[j][0]);
    sqrt_eigen_.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      double lambda = eig[j][0];
      if (lambda < 0.0) {
        if (lambda < -eigen_clip_relative * lambda_max)
          throw std::runtime_error("circulant embedding produced a negative eigenvalue " +
                                   std::to_string(lambda) + "; the fGn embedding should be PSD");
        lambda = 0.0;
        ++clipped_;
      }
      sqrt_eigen_[j] = std::sqrt(lambda / static_cast<double>(m));
    }
  }

  double hurst_;
  BadicGrid grid_;
  SamplerMethod method_;
  double scale_ = 1.0;
  Matrix factor_;
  std::shared_ptr<FftPlan> plan_;
  std::vector<double> sqrt_eigen_;
  std::size_t clipped_ = 0;
};

inline GridPath sample_fbm(double hurst, const BadicGrid& grid, const SamplerConfig& config) {
  return FbmSampler(hurst, grid, config.method).sample(config);
}

/// Continuous Gaussian martingale with <M>_t = int_0^t phi, phi the normalized
/// step density of an IntegratedDensity kappa: independent increments with
/// variance equal to the cell integral of phi.
inline GridPath sample_time_changed_bm(const KappaSpec& density_kappa, const BadicGrid& grid,
                                       std::uint64_t seed, std::uint64_t replicate_id) {
  if (density_kappa.kind() != KappaKind::IntegratedDensity)
    throw std::invalid_argument("time-changed sampling needs an IntegratedDensity kappa");
  const std::vector<double> qv = kappa_on_grid(density_kappa, 0.5, grid);
  RandomStream rng(seed, StreamKind::Gaussian, replicate_id);
  std::vector<double> m(grid.point_count(), 0.0);
  for (std::size_t k = 0; k + 1 < m.size(); ++k) {
    const double var = std::max(0.0, qv[k + 1] - qv[k]);
    m[k + 1] = m[k] + std::sqrt(var) * rng.normal();
  }
  return GridPath(grid, std::move(m));
}

/// B(t) = W(t) - kappa(t) W(1); B(0) and B(1) are set to exactly zero.
inline GridPath to_bridge(const GridPath& w, const KappaSpec& spec, double hurst) {
  const std::vector<double> kappa = kappa_on_grid(spec, hurst, w.grid());
  const double w1 = w.values().back();
  std::vector<double> b(w.size());
  for (std::size_t k = 0; k < b.size(); ++k) b[k] = w[k] - kappa[k] * w1;
  b.front() = 0.0;
  b.back() = 0.0;
  return GridPath(w.grid(), std::move(b));
}

/// cov(B(s), B(t)) for the fBM bridge with the given kappa. Symmetric in
/// (s, t) bit for bit.
inline double bridge_covariance(double hurst, const KappaSpec& spec, double s, double t) {
  if (s <= 0.0 || t <= 0.0 || s >= 1.0 || t >= 1.0) return 0.0;
  const double ks = kappa_eval(spec, hurst, s);
  const double kt = kappa_eval(spec, hurst, t);
  if (spec.kind() == KappaKind::StandardFractional) return fbm_covariance(hurst, s, t) - ks * kt;
  const double cross = ks * fbm_covariance(hurst, t, 1.0) + kt * fbm_covariance(hurst, s, 1.0);
  return fbm_covariance(hurst, s, t) - cross + ks * kt;
}

/// General form rho(s,t) - kappa(s) rho(t,1) - kappa(t) rho(s,1) + kappa(s) kappa(t),
/// without the standard-kappa simplification.
inline double bridge_covariance_general(double hurst, const KappaSpec& spec, double s, double t) {
  const double ks = kappa_eval(spec, hurst, s);
  const double kt = kappa_eval(spec, hurst, t);
  return fbm_covariance(hurst, s, t) - ks * fbm_covariance(hurst, t, 1.0) -
         kt * fbm_covariance(hurst, s, 1.0) + ks * kt;
}

}  // namespace wwb
