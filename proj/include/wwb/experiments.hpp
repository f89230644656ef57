#pragma once

// Reproducible experiment drivers. Each run is a pure function of its
// resolved configuration: it returns every output file's content plus the
// list of in-run checks, and never touches the clock or global state.

#include "wwb/covariance.hpp"
#include "wwb/fractal.hpp"
#include "wwb/gaussian_paths.hpp"
#include "wwb/grid.hpp"
#include "wwb/io.hpp"
#include "wwb/parallel.hpp"
#include "wwb/variation.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wwb {

using json = nlohmann::json;

struct ExperimentConfig {
  std::string experiment = "regime-b";
  double alpha = 0.5;
  std::optional<double> roughness;  // when set, alpha = b^-roughness
  unsigned b = 2;
  double hurst = 0.5;
  bool exact_critical = false;
  std::string kappa = "standard";  // standard | linear | table:<csv>
  std::string density;             // martingale-bridge: values:<v0,v1,...> | file:<csv>
  unsigned depth = 14;
  std::size_t reps = 200;
  std::uint64_t seed = 1;
  std::string sampler = "circulant";  // circulant | cholesky
  std::vector<double> t_caps{1.0};
  unsigned threads = 1;
  bool full_scale = false;
  double tolerance = 0.05;
  // covariance
  std::vector<unsigned> bases{2, 3};
  // deterministic-eval and z-moment
  std::string base = "tent";  // tent | cos | sin | table:<csv>
  double gamma = 1.0;
  std::vector<double> points;
  std::vector<double> holder_gammas;
  double eval_tol = 1e-12;
  unsigned truncation = 60;
  std::optional<double> p;
  std::optional<double> beta;
  bool compare_direct = true;
  bool compare_standard = false;

  WWParams params() const {
    if (exact_critical) return WWParams::exact_critical(b, hurst);
    if (roughness) return WWParams::from_roughness(*roughness, b, hurst);
    return WWParams(alpha, b, hurst);
  }

  /// Applies the full-scale switch (depth 16, 5000 replications).
  ExperimentConfig resolved() const {
    ExperimentConfig c = *this;
    if (c.full_scale) {
      c.depth = 16;
      c.reps = 5000;
    }
    if (c.roughness) c.alpha = std::pow(static_cast<double>(c.b), -*c.roughness);
    if (c.exact_critical) c.alpha = std::pow(static_cast<double>(c.b), -c.hurst);
    return c;
  }

  void validate() const {
    if (reps < 1) throw std::invalid_argument("replications must be >= 1");
    if (t_caps.empty()) throw std::invalid_argument("t_caps must not be empty");
    for (double t : t_caps) validate_t_cap(t);
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (sampler != "circulant" && sampler != "cholesky") throw std::invalid_argument("sampler must be circulant or cholesky");
    (void)params();
  }
};

/// The thread count is left out: it is an execution setting that never
/// changes a result, so outputs stay byte-identical across thread counts.
inline void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"experiment", c.experiment},
           {"alpha", c.alpha},
           {"b", c.b},
           {"hurst", c.hurst},
           {"exact_critical", c.exact_critical},
           {"kappa", c.kappa},
           {"density", c.density},
           {"depth", c.depth},
           {"reps", c.reps},
           {"seed", c.seed},
           {"sampler", c.sampler},
           {"t_caps", c.t_caps},
           {"full_scale", c.full_scale},
           {"tolerance", c.tolerance},
           {"bases", c.bases},
           {"base", c.base},
           {"gamma", c.gamma},
           {"points", c.points},
           {"holder_gammas", c.holder_gammas},
           {"eval_tol", c.eval_tol},
           {"truncation", c.truncation},
           {"compare_direct", c.compare_direct},
           {"compare_standard", c.compare_standard}};
  j["roughness"] = c.roughness ? json(*c.roughness) : json(nullptr);
  j["p"] = c.p ? json(*c.p) : json(nullptr);
  j["beta"] = c.beta ? json(*c.beta) : json(nullptr);
}

inline void from_json(const json& j, ExperimentConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key) && !j.at(key).is_null()) j.at(key).get_to(field);
  };
  auto get_opt = [&](const char* key, std::optional<double>& field) {
    if (j.contains(key)) field = j.at(key).is_null() ? std::nullopt : std::optional<double>(j.at(key).get<double>());
  };
  static const std::vector<std::string> known{
      "experiment", "alpha",  "roughness", "b",         "hurst",         "exact_critical", "kappa",
      "density",    "depth",  "reps",      "seed",      "sampler",       "t_caps",         "threads",
      "full_scale", "tolerance", "bases", "base",      "gamma",         "points",         "holder_gammas",
      "eval_tol",   "truncation", "p",     "beta",      "compare_direct", "compare_standard"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("unknown configuration key '" + key + "'");
  }
  get("experiment", c.experiment);
  get("alpha", c.alpha);
  get_opt("roughness", c.roughness);
  get("b", c.b);
  get("hurst", c.hurst);
  get("exact_critical", c.exact_critical);
  get("kappa", c.kappa);
  get("density", c.density);
  get("depth", c.depth);
  get("reps", c.reps);
  get("seed", c.seed);
  get("sampler", c.sampler);
  get("t_caps", c.t_caps);
  get("threads", c.threads);
  get("full_scale", c.full_scale);
  get("tolerance", c.tolerance);
  get("bases", c.bases);
  get("base", c.base);
  get("gamma", c.gamma);
  get("points", c.points);
  get("holder_gammas", c.holder_gammas);
  get("eval_tol", c.eval_tol);
  get("truncation", c.truncation);
  get_opt("p", c.p);
  get_opt("beta", c.beta);
  get("compare_direct", c.compare_direct);
  get("compare_standard", c.compare_standard);
}

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  std::string name;
  json summary;
  std::vector<Check> checks;
  std::map<std::string, std::string> files;  // file name -> content

  bool ok() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Six significant digits, for check messages.
inline std::string brief(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

/// CSV with the resolved configuration echoed as a leading comment line.
class CsvBuilder {
 public:
  CsvBuilder(const json& config, const std::string& header) {
    os_ << "# config: " << config.dump() << '\n' << header << '\n';
  }
  template <class... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((os_ << (first ? "" : ",") << cell(cells), first = false), ...);
    os_ << '\n';
  }
  std::string str() const { return os_.str(); }

 private:
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I v) {
    return std::to_string(v);
  }
  std::ostringstream os_;
};

inline void add_check(ExperimentResult& r, std::string name, bool passed, std::string detail) {
  r.checks.push_back(Check{std::move(name), passed, std::move(detail)});
}

inline json checks_json(const std::vector<Check>& checks) {
  json a = json::array();
  for (const auto& c : checks) a.push_back(json{{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return a;
}

inline void finish(ExperimentResult& r, const json& config) {
  json out;
  out["config"] = config;
  out["summary"] = r.summary;
  out["checks"] = checks_json(r.checks);
  out["ok"] = r.ok();
  r.files[r.name + "_summary.json"] = out.dump(2) + "\n";
}

inline KappaSpec parse_kappa(const std::string& spec, unsigned b) {
  if (spec == "standard") return KappaSpec::standard();
  if (spec == "linear") return KappaSpec::linear();
  if (spec.rfind("table:", 0) == 0) {
    const auto rows = read_two_column_csv(spec.substr(6));
    const BadicGrid g(b, depth_for_point_count(b, rows.size()));
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.second);
    return KappaSpec::table(g, std::move(v));
  }
  throw std::invalid_argument("unknown kappa '" + spec + "'");
}

inline std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  return out;
}

/// Step density on b^M cells from `values:<v0,...>` or `file:<csv>` (second column).
inline KappaSpec parse_density(const std::string& spec, unsigned b) {
  std::vector<double> values;
  if (spec.rfind("values:", 0) == 0)
    values = parse_number_list(spec.substr(7));
  else if (spec.rfind("file:", 0) == 0)
    for (const auto& r : read_two_column_csv(spec.substr(5))) values.push_back(r.second);
  else
    throw std::invalid_argument("density must be values:<list> or file:<csv>");
  const unsigned depth = depth_for_point_count(b, values.size() + 1);
  return KappaSpec::integrated_density(BadicGrid(b, depth), std::move(values));
}

inline BaseFunction parse_base(const std::string& spec, unsigned b, double gamma) {
  if (spec == "tent") return BaseFunction::tent();
  if (spec == "cos") return BaseFunction::weierstrass_cos();
  if (spec == "sin") return BaseFunction::weierstrass_sin();
  if (spec.rfind("table:", 0) == 0) {
    const auto rows = read_two_column_csv(spec.substr(6));
    const BadicGrid g(b, depth_for_point_count(b, rows.size()));
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.second);
    return BaseFunction::table(g, std::move(v), gamma);
  }
  throw std::invalid_argument("unknown base function '" + spec + "'");
}

inline SamplerMethod parse_sampler(const std::string& s) {
  return s == "cholesky" ? SamplerMethod::Cholesky : SamplerMethod::CirculantEmbedding;
}

/// X paths for every replicate, handed to `f(replicate, path)` in parallel.
template <class F>
void for_each_ww_path(const ExperimentConfig& c, const KappaSpec& kappa, F&& f) {
  const WWParams params = c.params();
  const BadicGrid grid(c.b, c.depth);
  const FbmSampler sampler(params.hurst(), grid, parse_sampler(c.sampler));
  parallel_for(c.reps, c.threads, [&](std::size_t r) {
    const GridPath w = sampler.sample(c.seed, r);
    f(r, convolve_bridge(to_bridge(w, kappa, params.hurst()), params.alpha()));
  });
}

struct LevelStats {
  std::vector<double> mean, se;
};

/// Per-level mean and standard error of values[rep][level - 1].
inline LevelStats level_stats(const std::vector<std::vector<double>>& values, unsigned depth) {
  LevelStats s{std::vector<double>(depth + 1, 0.0), std::vector<double>(depth + 1, 0.0)};
  std::vector<double> col(values.size());
  for (unsigned n = 1; n <= depth; ++n) {
    for (std::size_t r = 0; r < values.size(); ++r) col[r] = values[r][n - 1];
    const SampleSummary sm = summarize(col);
    s.mean[n] = sm.mean;
    s.se[n] = sm.se;
  }
  return s;
}

inline json summary_json(const SampleSummary& s) {
  return json{{"count", s.count}, {"mean", s.mean}, {"sd", s.sd}, {"se", s.se}, {"min", s.min}, {"max", s.max}};
}

/// Relative spread of per-t means divided by t: (max - min) / max.
inline double linearity_spread(const std::vector<double>& normalized) {
  const auto [lo, hi] = std::minmax_element(normalized.begin(), normalized.end());
  return *hi > 0.0 ? (*hi - *lo) / *hi : 0.0;
}

inline constexpr double linearity_tolerance = 0.10;

}  // namespace detail

/// E|N(0,1)|^q.
inline double gaussian_abs_moment(double q) {
  return std::pow(2.0, q / 2.0) * std::tgamma((q + 1.0) / 2.0) / std::sqrt(std::numbers::pi);
}

/// c_H / (1 - alpha^2 b^{2H})^{1/(2H)}, the limit of V_n(1/H) on [0,1] for H < K.
inline double hurst_regime_constant(const WWParams& p) {
  const double h = p.hurst();
  const double q = 1.0 / h;
  const double ratio = p.alpha() * p.alpha() * std::pow(static_cast<double>(p.b()), 2.0 * h);
  if (!(ratio < 1.0)) throw std::invalid_argument("alpha^2 b^{2H} must be < 1");
  return gaussian_abs_moment(q) / std::pow(1.0 - ratio, q / 2.0);
}

/// One V_n(1/K) sample per replication at the top level; requires H > K.
inline ExperimentResult run_histogram_v(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = cfg_in.resolved();
  cfg.validate();
  const WWParams params = cfg.params();
  if (params.regime() != Regime::ConvolutionWins)
    throw std::invalid_argument("histogram-v needs H > K (regime ConvolutionWins), got " +
                                std::string(to_string(params.regime())));
  const json config = cfg;
  const KappaSpec kappa = detail::parse_kappa(cfg.kappa, cfg.b);
  const double p = params.p();
  std::vector<std::vector<double>> v(cfg.reps, std::vector<double>(cfg.t_caps.size()));
  detail::for_each_ww_path(cfg, kappa, [&](std::size_t r, const GridPath& x) {
    for (std::size_t i = 0; i < cfg.t_caps.size(); ++i) v[r][i] = level_variation(x, cfg.depth, p, cfg.t_caps[i]);
  });
  ExperimentResult res{"histogram_v", {}, {}, {}};
  detail::CsvBuilder csv(config, "replicate,t_cap,n,p,V");
  json per_t = json::array();
  bool all_positive = true;
  for (std::size_t i = 0; i < cfg.t_caps.size(); ++i) {
    std::vector<double> col(cfg.reps);
    for (std::size_t r = 0; r < cfg.reps; ++r) {
      col[r] = v[r][i];
      csv.row(r, cfg.t_caps[i], cfg.depth, p, col[r]);
      if (!(col[r] > 0.0 && std::isfinite(col[r]))) all_positive = false;
    }
    const SampleSummary s = summarize(col);
    per_t.push_back(json{{"t_cap", cfg.t_caps[i]}, {"stats", detail::summary_json(s)}});
  }
  res.summary = json{{"p", p}, {"K", params.roughness()}, {"regime", to_string(params.regime())}, {"per_t_cap", per_t}};
  res.summary["sd_positive"] = per_t[0]["stats"]["sd"].get<double>() > 0.0;
  detail::add_check(res, "all_samples_positive_finite", all_positive,
                    "min V = " + detail::brief(per_t[0]["stats"]["min"].get<double>()));
  res.files["histogram_v_samples.csv"] = csv.str();
  detail::finish(res, config);
  return res;
}

/// Per-level means of V_n(1/H) against the limit constant; requires H < K.
inline ExperimentResult run_regime_b(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = cfg_in.resolved();
  cfg.validate();
  const WWParams params = cfg.params();
  if (params.regime() != Regime::HurstWins)
    throw std::invalid_argument("regime-b needs H < K (regime HurstWins), got " + std::string(to_string(params.regime())));
  const json config = cfg;
  const KappaSpec kappa = detail::parse_kappa(cfg.kappa, cfg.b);
  const double p = 1.0 / params.hurst();
  const double limit = hurst_regime_constant(params);
  const std::size_t nt = cfg.t_caps.size();
  std::vector<std::vector<std::vector<double>>> v(nt, std::vector<std::vector<double>>(cfg.reps));
  detail::for_each_ww_path(cfg, kappa, [&](std::size_t r, const GridPath& x) {
    for (std::size_t i = 0; i < nt; ++i) {
      const auto curve = pth_variation_curve(x, p, cfg.t_caps[i]);
      for (const auto& l : curve.levels) v[i][r].push_back(l.v);
    }
  });
  ExperimentResult res{"regime_b", {}, {}, {}};
  detail::CsvBuilder csv(config, "t_cap,n,p,mean_V,se_V,mean_V_over_t");
  json per_t = json::array();
  std::vector<double> normalized;
  for (std::size_t i = 0; i < nt; ++i) {
    const auto st = detail::level_stats(v[i], cfg.depth);
    for (unsigned n = 1; n <= cfg.depth; ++n) csv.row(cfg.t_caps[i], n, p, st.mean[n], st.se[n], st.mean[n] / cfg.t_caps[i]);
    const double top = st.mean[cfg.depth] / cfg.t_caps[i];
    normalized.push_back(top);
    const double rel = std::abs(top - limit) / limit;
    per_t.push_back(json{{"t_cap", cfg.t_caps[i]}, {"mean_top", st.mean[cfg.depth]}, {"se_top", st.se[cfg.depth]},
                         {"mean_top_over_t", top}, {"relative_error", rel}});
    detail::add_check(res, "limit_constant_t=" + detail::brief(cfg.t_caps[i]), rel <= cfg.tolerance,
                      "mean V/t = " + detail::brief(top) + " vs C = " + detail::brief(limit) + " (rel " + detail::brief(rel) +
                          ", tol " + detail::brief(cfg.tolerance) + ")");
  }
  if (nt > 1) {
    const double spread = detail::linearity_spread(normalized);
    res.summary["linearity_spread"] = spread;
    detail::add_check(res, "linear_in_t", spread <= detail::linearity_tolerance, "spread " + detail::brief(spread));
  }
  res.summary["p"] = p;
  res.summary["limit_constant"] = limit;
  res.summary["c_H"] = gaussian_abs_moment(p);
  res.summary["per_t_cap"] = per_t;
  res.files["regime_b_levels.csv"] = csv.str();
  detail::finish(res, config);
  return res;
}

inline constexpr unsigned dichotomy_window = 4;
inline constexpr double dichotomy_required_fraction = 0.9;

/// V_n(2)/n, the q = 1.8 / 2.2 dichotomy and roughness for H = 1/2, alpha^2 b = 1.
inline ExperimentResult run_critical(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in.resolved();
  cfg.validate();
  const WWParams params = cfg.params();
  const double a2b = params.alpha() * params.alpha() * params.b();
  if (std::abs(params.hurst() - 0.5) > 1e-12 || std::abs(a2b - 1.0) > 1e-12)
    throw std::invalid_argument("critical needs H = 1/2 and alpha^2 b = 1");
  if (cfg.depth < roughness_min_depth || cfg.depth < dichotomy_window)
    throw std::invalid_argument("critical needs depth >= 6");
  const json config = cfg;
  const KappaSpec kappa = detail::parse_kappa(cfg.kappa, cfg.b);
  const std::size_t nt = cfg.t_caps.size();
  std::vector<std::vector<std::vector<double>>> qv(nt, std::vector<std::vector<double>>(cfg.reps));
  std::vector<std::vector<double>> above(cfg.reps), below(cfg.reps);
  std::vector<double> rough(cfg.reps);
  detail::for_each_ww_path(cfg, kappa, [&](std::size_t r, const GridPath& x) {
    for (std::size_t i = 0; i < nt; ++i) {
      const auto d = normalized_qv(x, cfg.t_caps[i]);
      for (const auto& l : d.quadratic.levels) qv[i][r].push_back(*l.v_over_n);
      if (i == 0) {
        for (const auto& l : d.above.levels) above[r].push_back(l.v);
        for (const auto& l : d.below.levels) below[r].push_back(l.v);
      }
    }
    rough[r] = roughness_estimate(x).value;
  });
  ExperimentResult res{"critical", {}, {}, {}};
  detail::CsvBuilder levels(config, "t_cap,n,mean_V_over_n,se_V_over_n");
  json per_t = json::array();
  for (std::size_t i = 0; i < nt; ++i) {
    const auto st = detail::level_stats(qv[i], cfg.depth);
    for (unsigned n = 1; n <= cfg.depth; ++n) levels.row(cfg.t_caps[i], n, st.mean[n], st.se[n]);
    const double t = cfg.t_caps[i];
    const double top = st.mean[cfg.depth];
    const double rel = std::abs(top - t) / t;
    per_t.push_back(json{{"t_cap", t}, {"mean_top_V_over_n", top}, {"se", st.se[cfg.depth]}, {"relative_error", rel}});
    detail::add_check(res, "V_n_over_n_limit_t=" + detail::brief(t), rel <= 0.10,
                      "mean V_" + std::to_string(cfg.depth) + "/" + std::to_string(cfg.depth) + " = " + detail::brief(top) +
                          " vs " + detail::brief(t));
  }
  std::size_t decreasing = 0, increasing = 0;
  detail::CsvBuilder dich(config, "replicate,q_above_decreasing,q_below_increasing");
  for (std::size_t r = 0; r < cfg.reps; ++r) {
    bool dec = true, inc = true;
    for (unsigned n = cfg.depth - dichotomy_window + 2; n <= cfg.depth; ++n) {
      if (!(above[r][n - 1] < above[r][n - 2])) dec = false;
      if (!(below[r][n - 1] > below[r][n - 2])) inc = false;
    }
    decreasing += dec;
    increasing += inc;
    dich.row(r, static_cast<int>(dec), static_cast<int>(inc));
  }
  const double frac_dec = static_cast<double>(decreasing) / cfg.reps;
  const double frac_inc = static_cast<double>(increasing) / cfg.reps;
  detail::add_check(res, "q2.2_decreasing_top4", frac_dec >= dichotomy_required_fraction,
                    "fraction " + detail::brief(frac_dec) + " (required " + detail::brief(dichotomy_required_fraction) + ")");
  const auto above_stats = detail::level_stats(above, cfg.depth);
  const auto below_stats = detail::level_stats(below, cfg.depth);
  json q_means = json::array();
  for (unsigned n = 1; n <= cfg.depth; ++n)
    q_means.push_back(json{{"n", n}, {"mean_V_1.8", below_stats.mean[n]}, {"mean_V_2.2", above_stats.mean[n]}});
  const SampleSummary rs = summarize(rough);
  detail::add_check(res, "roughness_near_half", std::abs(rs.mean - 0.5) <= 0.05, "mean R = " + detail::brief(rs.mean));
  detail::CsvBuilder rcsv(config, "replicate,roughness");
  for (std::size_t r = 0; r < cfg.reps; ++r) rcsv.row(r, rough[r]);
  res.summary = json{{"per_t_cap", per_t},
                     {"q2.2_decreasing_fraction", frac_dec},
                     {"q1.8_increasing_fraction", frac_inc},
                     {"q_variation_means", q_means},
                     {"roughness", detail::summary_json(rs)}};
  res.files["critical_levels.csv"] = levels.str();
  res.files["critical_dichotomy.csv"] = dich.str();
  res.files["critical_roughness.csv"] = rcsv.str();
  detail::finish(res, config);
  return res;
}

struct CovarianceFigureCurve {
  unsigned b = 2;
  unsigned depth = 0;
  BadicPoint anchor;
  CovCurve curve;
  std::optional<double> takagi_residual;
};

/// Depth for base b giving about as many cells as b = 2 at `depth2`.
inline unsigned matched_depth(unsigned b, unsigned depth2) {
  return std::max(1U, static_cast<unsigned>(std::floor(depth2 * std::log(2.0) / std::log(static_cast<double>(b)) + 1e-9)));
}

/// c(s, .) curves for each base, with the Takagi residual max |2c(s,t) - T(t)|.
inline ExperimentResult run_covariance_fig(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = cfg_in.resolved();
  cfg.validate();
  const json config = cfg;
  ExperimentResult res{"covariance", {}, {}, {}};
  json curves = json::array();
  for (unsigned b : cfg.bases) {
    ExperimentConfig local = cfg;
    local.b = b;
    const WWParams params = local.params();
    const KappaSpec kappa = detail::parse_kappa(cfg.kappa, b);
    const unsigned depth = b == cfg.b ? cfg.depth : matched_depth(b, cfg.depth);
    const BadicGrid grid(b, depth);
    const BadicPoint anchor = b % 2 == 0 ? BadicPoint::make(b, 1, b / 2) : half_anchor(b, depth);
    const CovCurve c = covariance_curve(params, kappa, anchor, grid, cfg.threads);
    const GridPath tvdw = takagi_van_der_waerden(params.alpha(), grid);
    double residual = 0.0;
    for (std::size_t k = 0; k < grid.point_count(); ++k)
      residual = std::max(residual, std::abs(2.0 * c.values()[k] - tvdw[k]));
    const std::string tag = "b" + std::to_string(b);
    detail::CsvBuilder csv(config, "t,c,takagi");
    for (std::size_t k = 0; k < grid.point_count(); ++k) csv.row(grid.point(k), c.values()[k], tvdw[k]);
    res.files["covariance_" + tag + ".csv"] = csv.str();
    const bool endpoints = c.values().front() == 0.0 && c.values().back() == 0.0;
    detail::add_check(res, "endpoints_zero_" + tag, endpoints, endpoints ? "c(s,0) = c(s,1) = 0" : "nonzero endpoint");
    const bool identity_applies = b % 2 == 0 && params.hurst() == 0.5 && kappa.kind() == KappaKind::StandardFractional;
    json entry{{"b", b},
               {"depth", depth},
               {"alpha", params.alpha()},
               {"K", params.roughness()},
               {"anchor", json{{"index", anchor.index}, {"depth", anchor.depth}, {"value", anchor.value()}}},
               {"takagi_residual", residual}};
    if (identity_applies)
      detail::add_check(res, "takagi_identity_" + tag, residual <= 1e-10, "max residual " + detail::brief(residual));
    else if (b % 2 == 1 && params.hurst() == 0.5)
      detail::add_check(res, "odd_base_negative_control_" + tag, residual > 1e-3,
                        "max residual " + detail::brief(residual) + " (identity not expected)");
    if (depth >= covariance_variation_min_depth && params.roughness() < 1.0) {
      const CovVariation cv = covariance_variation(c);
      entry["variation_p"] = cv.curve.p;
      entry["variation_top"] = cv.curve.top().v;
      entry["variation_top3_spread"] = cv.top_spread;
    }
    curves.push_back(entry);
  }
  res.summary = json{{"curves", curves}};
  detail::finish(res, config);
  return res;
}

/// Bridge of a Gaussian martingale with step density phi, kappa = <M>_t / <M>_1.
inline ExperimentResult run_martingale_bridge(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in.resolved();
  cfg.hurst = 0.5;
  cfg.validate();
  const json config = cfg;
  const WWParams params = cfg.params();
  if (!(params.roughness() < 0.5)) throw std::invalid_argument("martingale-bridge needs K < 1/2");
  if (cfg.density.empty()) throw std::invalid_argument("martingale-bridge needs a density");
  const KappaSpec density = detail::parse_density(cfg.density, cfg.b);
  if (density.grid()->depth() > cfg.depth) throw std::invalid_argument("density grid is finer than the sampling grid");
  const BadicGrid grid(cfg.b, cfg.depth);
  const double p = 1.0 / params.roughness();
  const std::size_t nt = cfg.t_caps.size();
  std::vector<std::vector<double>> v(cfg.reps, std::vector<double>(nt));
  parallel_for(cfg.reps, cfg.threads, [&](std::size_t r) {
    const GridPath m = sample_time_changed_bm(density, grid, cfg.seed, r);
    const GridPath x = convolve_bridge(to_bridge(m, density, 0.5), params.alpha());
    for (std::size_t i = 0; i < nt; ++i) v[r][i] = level_variation(x, cfg.depth, p, cfg.t_caps[i]);
  });
  ExperimentResult res{"martingale_bridge", {}, {}, {}};
  detail::CsvBuilder csv(config, "replicate,t_cap,V");
  json per_t = json::array();
  std::vector<double> normalized;
  bool positive = true;
  SampleSummary top;
  for (std::size_t i = 0; i < nt; ++i) {
    std::vector<double> col(cfg.reps);
    for (std::size_t r = 0; r < cfg.reps; ++r) {
      col[r] = v[r][i];
      csv.row(r, cfg.t_caps[i], col[r]);
      if (!(col[r] > 0.0 && std::isfinite(col[r]))) positive = false;
    }
    const SampleSummary s = summarize(col);
    if (i == 0) top = s;
    normalized.push_back(s.mean / cfg.t_caps[i]);
    per_t.push_back(json{{"t_cap", cfg.t_caps[i]}, {"stats", detail::summary_json(s)}, {"mean_over_t", s.mean / cfg.t_caps[i]}});
  }
  detail::add_check(res, "variation_positive_finite", positive, "all V_n(1/K) samples > 0");
  if (nt > 1) {
    const double spread = detail::linearity_spread(normalized);
    res.summary["linearity_spread"] = spread;
    detail::add_check(res, "linear_in_t", spread <= detail::linearity_tolerance, "spread " + detail::brief(spread));
  }
  if (cfg.compare_standard) {
    ExperimentConfig std_cfg = cfg;
    std_cfg.seed = cfg.seed ^ 0x5a5a5a5aULL;
    const KappaSpec linear = KappaSpec::linear();
    std::vector<double> ref(cfg.reps);
    detail::for_each_ww_path(std_cfg, linear, [&](std::size_t r, const GridPath& x) {
      ref[r] = level_variation(x, cfg.depth, p, cfg.t_caps[0]);
    });
    const SampleSummary rs = summarize(ref);
    const double z = std::abs(rs.mean - top.mean) / std::sqrt(rs.se * rs.se + top.se * top.se);
    res.summary["standard_pipeline"] = detail::summary_json(rs);
    detail::add_check(res, "matches_standard_pipeline", z <= 3.0, "difference " + detail::brief(z) + " combined se");
  }
  res.summary["p"] = p;
  res.summary["density_raw_integral"] = density.raw_integral();
  res.summary["per_t_cap"] = per_t;
  res.files["martingale_bridge_samples.csv"] = csv.str();
  detail::finish(res, config);
  return res;
}

/// f = sum alpha^n phi({b^n t}) on the grid and at the requested points, with
/// Hoelder scans and, when alpha b^gamma > 1, the variation at p = -log_alpha b.
inline ExperimentResult run_deterministic_eval(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = cfg_in.resolved();
  cfg.validate();
  const json config = cfg;
  const DeterministicFractal f(detail::parse_base(cfg.base, cfg.b, cfg.gamma), cfg.alpha, cfg.b);
  const BadicGrid grid(cfg.b, cfg.depth);
  const GridPath path = eval_deterministic_on_grid(f, grid);
  ExperimentResult res{"deterministic_eval", {}, {}, {}};
  detail::CsvBuilder csv(config, "t,f");
  for (std::size_t k = 0; k < path.size(); ++k) csv.row(grid.point(k), path[k]);
  res.files["deterministic_grid.csv"] = csv.str();
  detail::CsvBuilder pts(config, "t,f,levels,tail_bound");
  const unsigned levels = truncation_level(f.alpha, f.base.sup_norm(), cfg.eval_tol);
  const double tail = std::pow(f.alpha, levels) * f.base.sup_norm() / (1.0 - f.alpha);
  bool finite = true;
  for (double t : cfg.points) {
    const double v = eval_deterministic(f, t, cfg.eval_tol);
    finite = finite && std::isfinite(v);
    pts.row(t, v, levels, tail);
  }
  res.files["deterministic_points.csv"] = pts.str();
  detail::add_check(res, "tail_bound_within_tolerance", tail <= cfg.eval_tol,
                    "tail " + detail::brief(tail) + " with " + std::to_string(levels) + " levels");
  detail::add_check(res, "values_finite", finite, "point evaluations finite");
  json holder = json::array();
  for (double g : cfg.holder_gammas) holder.push_back(json{{"gamma", g}, {"scan", holder_scan(path, g)}});
  res.summary["holder_scan"] = holder;
  res.summary["roughness_K"] = f.roughness();
  if (f.z_ratio() > 1.0) {
    const auto curve = pth_variation_curve(path, std::max(1.0, f.critical_p()));
    detail::CsvBuilder var(config, "n,p,V");
    for (const auto& l : curve.levels) var.row(l.n, curve.p, l.v);
    res.files["deterministic_variation.csv"] = var.str();
    res.summary["variation_p"] = curve.p;
    res.summary["variation_top"] = curve.top().v;
  }
  res.summary["levels"] = levels;
  detail::finish(res, config);
  return res;
}

/// Monte Carlo E_R|Z_m|^p with its bound checks, the direct-variation
/// comparison and, when beta is set, the kernel-of-kernel identity.
inline ExperimentResult run_z_moment(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = cfg_in.resolved();
  cfg.validate();
  const json config = cfg;
  const DeterministicFractal f(detail::parse_base(cfg.base, cfg.b, cfg.gamma), cfg.alpha, cfg.b);
  require_z_hypothesis(f);
  const double p = cfg.p.value_or(f.critical_p());
  const unsigned m = cfg.truncation;
  std::vector<double> z = z_samples(f, m, cfg.reps, cfg.seed, cfg.threads);
  ZMomentEstimate est = z_moment(f, p, m, cfg.reps, cfg.seed, cfg.threads);
  ExperimentResult res{"z_moment", {}, {}, {}};
  const double z_bound = f.base.holder_constant() / (f.z_ratio() - 1.0);
  detail::add_check(res, "abs_Z_within_bound", est.max_abs_z <= z_bound,
                    "max |Z| = " + detail::brief(est.max_abs_z) + " vs " + detail::brief(z_bound));
  res.summary = json{{"p", p},
                     {"m", m},
                     {"reps", cfg.reps},
                     {"estimate", est.estimate},
                     {"se", est.se},
                     {"tail_bound", est.tail_bound},
                     {"max_abs_z", est.max_abs_z},
                     {"z_bound", z_bound},
                     {"validity_variant", to_string(validity_variant(f.base, f.b))}};
  if (cfg.compare_direct) {
    const GridPath path = eval_deterministic_on_grid(f, BadicGrid(cfg.b, cfg.depth));
    json direct = json::array();
    for (double t : cfg.t_caps) {
      const double v = level_variation(path, cfg.depth, p, t);
      const double predicted = t * est.estimate;
      const double se = t * est.se;
      const double dev = std::abs(v - predicted);
      direct.push_back(json{{"t_cap", t}, {"direct_V", v}, {"t_times_moment", predicted}, {"deviation_in_se", dev / se}});
      detail::add_check(res, "direct_variation_t=" + detail::brief(t), dev <= 3.0 * se,
                        "V_" + std::to_string(cfg.depth) + " = " + detail::brief(v) + " vs t E|Z|^p = " +
                            detail::brief(predicted) + " (se " + detail::brief(se) + ")");
    }
    res.summary["direct"] = direct;
  }
  detail::CsvBuilder csv(config, "replicate,Z,Z_psi_scaled");
  if (cfg.beta) {
    const KernelPsi psi(f.base, *cfg.beta, f.b);
    const double scale = 1.0 - *cfg.beta / f.alpha;
    std::vector<double> rel(cfg.reps), zpsi(cfg.reps);
    parallel_for(cfg.reps, cfg.threads, [&](std::size_t r) {
      const auto inc = cell_increments(f.base, DigitSequence::sample(f.b, m, cfg.seed, r));
      zpsi[r] = z_kernel_from_increments(inc, f.alpha, psi.beta()) * scale;
      rel[r] = std::abs(zpsi[r] - z[r]) / std::abs(z[r]);
    });
    const double worst = *std::max_element(rel.begin(), rel.end());
    res.summary["kernel_beta"] = *cfg.beta;
    res.summary["kernel_max_relative_error"] = worst;
    detail::add_check(res, "kernel_identity", worst <= 1e-10, "max relative error " + detail::brief(worst));
    for (std::size_t r = 0; r < cfg.reps; ++r) csv.row(r, z[r], zpsi[r]);
  } else {
    for (std::size_t r = 0; r < cfg.reps; ++r) csv.row(r, z[r], "");
  }
  res.files["z_samples.csv"] = csv.str();
  detail::finish(res, config);
  return res;
}

/// Roughness estimates per replication against H ^ K.
inline ExperimentResult run_roughness(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = cfg_in.resolved();
  cfg.validate();
  const json config = cfg;
  const WWParams params = cfg.params();
  const KappaSpec kappa = detail::parse_kappa(cfg.kappa, cfg.b);
  std::vector<double> est(cfg.reps);
  std::vector<int> smooth(cfg.reps);
  detail::for_each_ww_path(cfg, kappa, [&](std::size_t r, const GridPath& x) {
    const auto e = roughness_estimate(x);
    est[r] = e.value;
    smooth[r] = e.smooth;
  });
  ExperimentResult res{"roughness", {}, {}, {}};
  detail::CsvBuilder csv(config, "replicate,roughness,smooth_flag");
  for (std::size_t r = 0; r < cfg.reps; ++r) csv.row(r, est[r], smooth[r]);
  const SampleSummary s = summarize(est);
  const double target = std::min(params.hurst(), params.roughness());
  detail::add_check(res, "roughness_recovered", std::abs(s.mean - target) <= cfg.tolerance,
                    "mean R = " + detail::brief(s.mean) + " vs H^K = " + detail::brief(target) + " (tol " +
                        detail::brief(cfg.tolerance) + ")");
  res.summary = json{{"target", target}, {"regime", to_string(params.regime())}, {"stats", detail::summary_json(s)}};
  res.files["roughness_samples.csv"] = csv.str();
  detail::finish(res, config);
  return res;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const std::string& e = cfg.experiment;
  if (e == "histogram-v") return run_histogram_v(cfg);
  if (e == "regime-b") return run_regime_b(cfg);
  if (e == "critical") return run_critical(cfg);
  if (e == "covariance") return run_covariance_fig(cfg);
  if (e == "martingale-bridge") return run_martingale_bridge(cfg);
  if (e == "deterministic-eval") return run_deterministic_eval(cfg);
  if (e == "z-moment") return run_z_moment(cfg);
  if (e == "roughness") return run_roughness(cfg);
  throw std::invalid_argument("unknown experiment '" + e + "'");
}

/// Writes every file of a result below `dir`, in name order.
inline std::vector<std::filesystem::path> write_result(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [name, content] : r.files) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    written.push_back(path);
  }
  return written;
}

}  // namespace wwb
