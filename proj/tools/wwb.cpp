// Command-line front end for the experiment drivers.
//
//   wwb <subcommand> [--config run.json] [overrides...] [--out DIR]
//
// The JSON config supplies any subset of the experiment fields; flags given on
// the command line replace the corresponding field. Exit status is 0 when
// every in-run check passes, 1 when a check fails and 2 on invalid input.

#include "wwb/experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>

namespace {

using wwb::ExperimentConfig;

struct Overrides {
  std::string config_file;
  std::string out = "wwb_out";
  std::vector<std::function<void(ExperimentConfig&)>> setters;
};

template <class T>
void bind_value(CLI::App* app, Overrides& o, const std::string& flag, const std::string& help, T ExperimentConfig::*field) {
  auto value = std::make_shared<T>();
  CLI::Option* opt = app->add_option(flag, *value, help);
  o.setters.push_back([opt, value, field](ExperimentConfig& c) {
    if (opt->count() > 0) c.*field = *value;
  });
}

void bind_optional(CLI::App* app, Overrides& o, const std::string& flag, const std::string& help,
                   std::optional<double> ExperimentConfig::*field) {
  auto value = std::make_shared<double>();
  CLI::Option* opt = app->add_option(flag, *value, help);
  o.setters.push_back([opt, value, field](ExperimentConfig& c) {
    if (opt->count() > 0) c.*field = *value;
  });
}

void bind_flag(CLI::App* app, Overrides& o, const std::string& flag, const std::string& help,
               bool ExperimentConfig::*field) {
  auto value = std::make_shared<bool>();
  CLI::Option* opt = app->add_flag(flag, *value, help);
  o.setters.push_back([opt, value, field](ExperimentConfig& c) {
    if (opt->count() > 0) c.*field = *value;
  });
}

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_file, "JSON configuration file")->check(CLI::ExistingFile);
  app->add_option("--out", o.out, "output directory");
  bind_value(app, o, "--alpha", "convolution weight alpha in (0,1)", &ExperimentConfig::alpha);
  bind_optional(app, o, "--roughness", "set alpha = b^-K from the roughness K", &ExperimentConfig::roughness);
  bind_value(app, o, "--b", "integer base b >= 2", &ExperimentConfig::b);
  bind_value(app, o, "--hurst", "Hurst index H in (0,1)", &ExperimentConfig::hurst);
  bind_flag(app, o, "--exact-critical,!--no-exact-critical", "use alpha = b^-H exactly",
            &ExperimentConfig::exact_critical);
  bind_value(app, o, "--kappa", "standard | linear | table:<csv>", &ExperimentConfig::kappa);
  bind_value(app, o, "--density", "values:<v0,v1,...> | file:<csv>", &ExperimentConfig::density);
  bind_value(app, o, "--depth", "grid depth N", &ExperimentConfig::depth);
  bind_value(app, o, "--reps", "number of replications", &ExperimentConfig::reps);
  bind_value(app, o, "--seed", "master seed", &ExperimentConfig::seed);
  bind_value(app, o, "--sampler", "circulant | cholesky", &ExperimentConfig::sampler);
  bind_value(app, o, "--t-caps", "time caps t in (0,1]", &ExperimentConfig::t_caps);
  bind_value(app, o, "--threads", "worker threads (results do not depend on it)", &ExperimentConfig::threads);
  bind_flag(app, o, "--full-scale,!--no-full-scale", "depth 16 with 5000 replications",
            &ExperimentConfig::full_scale);
  bind_value(app, o, "--tolerance", "relative tolerance for limit checks", &ExperimentConfig::tolerance);
  bind_value(app, o, "--bases", "bases for the covariance figure", &ExperimentConfig::bases);
  bind_value(app, o, "--base", "tent | cos | sin | table:<csv>", &ExperimentConfig::base);
  bind_value(app, o, "--gamma", "Hoelder exponent of a tabulated base", &ExperimentConfig::gamma);
  bind_value(app, o, "--points", "evaluation points in [0,1]", &ExperimentConfig::points);
  bind_value(app, o, "--holder-gammas", "exponents for the Hoelder scan", &ExperimentConfig::holder_gammas);
  bind_value(app, o, "--eval-tol", "series truncation tolerance", &ExperimentConfig::eval_tol);
  bind_value(app, o, "--m", "digit truncation m for Z", &ExperimentConfig::truncation);
  bind_optional(app, o, "--p", "moment exponent p (default -log_alpha b)", &ExperimentConfig::p);
  bind_optional(app, o, "--beta", "kernel parameter beta", &ExperimentConfig::beta);
  bind_flag(app, o, "--compare-direct,!--no-compare-direct", "compare with the direct variation",
            &ExperimentConfig::compare_direct);
  bind_flag(app, o, "--compare-standard,!--no-compare-standard", "compare with the H = 1/2 pipeline",
            &ExperimentConfig::compare_standard);
}

ExperimentConfig load_config(const Overrides& o, const std::string& experiment) {
  ExperimentConfig c;
  if (!o.config_file.empty()) {
    std::ifstream in(o.config_file);
    wwb::json::parse(in).get_to(c);
  }
  for (const auto& set : o.setters) set(c);
  c.experiment = experiment;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weierstrass-type convolutions of Gaussian bridges: experiments"};
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"histogram-v", "V_N(1/K) samples across replications (H > K)"},
      {"regime-b", "per-level means of V_n(1/H) against the limit constant (H < K)"},
      {"critical", "V_n(2)/n, the 1.8/2.2 dichotomy and roughness at alpha^2 b = 1"},
      {"covariance", "covariance curves c(s,.) and the Takagi residual"},
      {"martingale-bridge", "bridges of Gaussian martingales with a step density"},
      {"deterministic-eval", "deterministic fractal values, Hoelder scans and variation"},
      {"z-moment", "Monte Carlo E|Z|^p and the kernel identity"},
      {"roughness", "roughness estimates across replications"}};
  std::map<std::string, Overrides> overrides;
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), overrides[name]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const Overrides& o = overrides.at(sub->get_name());
  try {
    const ExperimentConfig cfg = load_config(o, sub->get_name());
    const wwb::ExperimentResult result = wwb::run_experiment(cfg);
    for (const auto& path : wwb::write_result(result, o.out)) std::cout << "wrote " << path.string() << '\n';
    for (const auto& c : result.checks)
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    return result.ok() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
