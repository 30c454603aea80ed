#include "lpspde/cli.hpp"

#include "lpspde/coercivity.hpp"
#include "lpspde/format.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace lpspde {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

json number(double x) {
  if (std::isfinite(x)) return x;
  return std::isnan(x) ? json("nan") : json(x > 0 ? "inf" : "-inf");
}

json optional_number(const std::optional<double>& x) { return x ? number(*x) : json(nullptr); }

json config_json(const ExperimentConfig& c, const SpaceConfig& space) {
  const EquationConfig& e = c.equation;
  json eq{{"name", e.name},   {"gamma", e.gamma},   {"viscosity", e.viscosity}, {"nu", e.nu},
          {"a", e.a},         {"b", e.b},           {"sigma", e.sigma},         {"lambda", optional_number(e.lambda)},
          {"noise_dim", e.noise_dim}, {"order", e.order}, {"A", e.A}, {"B", e.B},
          {"alpha", e.alpha}, {"gammas", e.gammas}, {"c", e.c},                 {"audit", e.audit},
          {"a_file", e.a_file}, {"b_file", e.b_file}, {"sigma_file", e.sigma_file},
          {"lambda_file", e.lambda_file}, {"A_file", e.A_file}, {"B_file", e.B_file}};
  json sp{{"kind", to_string(space.kind)},
          {"n", space.n},
          {"lengths", space.lengths},
          {"dim", space.dim},
          {"components", space.components},
          {"alpha", space.alpha},
          {"v_norm", space.v_norm == VNormConvention::full ? "full" : "seminorm"}};
  json sc{{"method", to_string(c.scheme.method)},
          {"dt", c.scheme.dt},
          {"T", c.scheme.T},
          {"record_stride", c.scheme.record_stride}};
  const StudyConfig& s = c.study;
  json st{{"p", s.p},
          {"n_paths", s.n_paths},
          {"seed", s.seed},
          {"K_trunc", s.K_trunc},
          {"functional", s.functional},
          {"coefficient", s.coefficient},
          {"u0", s.u0},
          {"u0_mode", s.u0_mode},
          {"u0_amplitude", s.u0_amplitude},
          {"u0_decay", s.u0_decay},
          {"t", s.t},
          {"conditions", s.conditions},
          {"n_samples", s.n_samples},
          {"theta", optional_number(s.theta)},
          {"K_c", optional_number(s.K_c)},
          {"C", optional_number(s.C)},
          {"sweep", s.sweep},
          {"values", s.values},
          {"sweep_mode", s.sweep_mode},
          {"tail_fraction", s.divergence.tail_fraction},
          {"doubling_factor", s.divergence.doubling_factor},
          {"doublings", s.divergence.doublings}};
  json out{{"trajectory", c.output.trajectory}, {"paths_csv", c.output.paths_csv}};
  return json{{"equation", eq}, {"space", sp}, {"scheme", sc}, {"study", st}, {"output", out}};
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << content;
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

// Long-format CSV builder with fixed number formatting.
class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }
  template <typename... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << "\n";
  }
  std::string str() const { return out_.str(); }

 private:
  static std::string cell(double x) { return format_number(x); }
  static std::string cell(Index x) { return std::to_string(x); }
  static std::string cell(int x) { return std::to_string(x); }
  static std::string cell(bool x) { return x ? "true" : "false"; }
  static std::string cell(const std::string& x) { return x; }
  std::ostringstream out_;
};

struct Context {
  const ExperimentConfig& config;
  SpaceConfig space_config;
  GalerkinSpace space;
  RunOptions options;
  fs::path dir;
  std::ostream& log;

  Context(const ExperimentConfig& c, const RunOptions& o, std::ostream& l)
      : config(c), space_config(resolved_space(c)), space(space_config), options(o), log(l) {
    dir = o.out_dir.empty() ? fs::path(c.output.dir) : fs::path(o.out_dir);
    fs::create_directories(dir);
  }

  json header(const std::string& command) const {
    return json{{"command", command}, {"seed", config.study.seed}, {"config", config_json(config, space_config)}};
  }
};

double functional_exponent(const std::string& functional, double p) { return functional == "v" ? 0.5 * p : p; }

std::vector<double> functional_values(const std::vector<PathSummary>& paths, const std::string& functional) {
  std::vector<double> x;
  for (const PathSummary& s : paths) {
    if (functional == "sup") x.push_back(s.sup_h);
    if (functional == "v") x.push_back(s.int_v_alpha);
    if (functional == "terminal") x.push_back(s.terminal_h);
    if (functional == "coefficient") x.push_back(s.terminal_coefficient);
  }
  return x;
}

std::vector<PathSummary> monte_carlo(const ExperimentConfig& c, const OperatorPair& pair, const Vector& u0,
                                     int workers) {
  MonteCarloOptions o;
  o.n_paths = c.study.n_paths;
  o.master_seed = c.study.seed;
  o.workers = workers;
  o.v_integral = c.study.functional == "v" || c.output.paths_csv;
  o.coefficient = c.study.functional == "coefficient" ? c.study.coefficient : 0;
  return run_paths(pair, c.scheme, u0, o);
}

json moment_json(const ExperimentConfig& c, const OperatorPair& pair, const Vector& u0, const MomentEstimate& e) {
  json j{{"equation", c.equation.name},
         {"functional", c.study.functional},
         {"p", e.p},
         {"gamma", c.equation.gamma},
         {"dt", c.scheme.dt},
         {"T", c.scheme.T},
         {"n_paths", e.n_paths},
         {"estimate", number(e.value)},
         {"ci", number(e.ci_half_width)},
         {"tail_index", optional_number(e.tail_index_est)},
         {"diagnostic_available", e.diagnostic_available},
         {"diverged", e.divergence_flag},
         {"n_diverged", e.n_diverged},
         {"seed", c.study.seed}};
  if (c.equation.name == "spectral-example" && c.study.functional == "coefficient") {
    const double k = std::sqrt(pair.sp().wavenumber_squared()(c.study.coefficient % pair.sp().scalar_size()));
    j["exact"] = number(exact_spectral_moment(c.equation.gamma, e.p, c.scheme.T, k, u0(c.study.coefficient)));
  }
  if (c.study.C) {
    const double u0p = std::pow(h_norm(pair.sp(), u0), e.p);
    j["apriori_rhs"] = number(apriori_rhs(*c.study.C, c.scheme.T, u0p, 0.0));
  }
  return j;
}

int cmd_simulate(Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  const OperatorPair pair = build_pair(c, ctx.space);
  const Vector u0 = initial_condition(c, pair);
  const WienerStream noise(pair.noise_dim, c.scheme.dt, c.study.seed, 0);
  PathOptions o;
  o.keep_snapshots = c.output.trajectory;
  const PathFunctionals f = simulate_path(pair, c.scheme, u0, noise, o);
  json j = ctx.header("simulate");
  j["result"] = json{{"equation", c.equation.name},
                     {"sup_h", number(f.sup_h)},
                     {"int_v_alpha", number(f.int_v_alpha)},
                     {"terminal_h", number(h_norm(pair.sp(), f.terminal))},
                     {"diverged", f.diverged},
                     {"last_finite_time", f.last_finite_time}};
  write_json(ctx.dir / "simulate.json", j);
  if (c.output.trajectory) {
    std::ostringstream csv;
    write_trajectory_csv(csv, f.snapshots);
    write_file(ctx.dir / "trajectory.csv", csv.str());
  }
  ctx.log << "simulate: sup_h = " << format_number(f.sup_h) << (f.diverged ? " (diverged)" : "") << "\n";
  return exit_ok;
}

int cmd_moments(Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  const OperatorPair pair = build_pair(c, ctx.space);
  const Vector u0 = initial_condition(c, pair);
  const auto paths = monte_carlo(c, pair, u0, ctx.options.workers);
  const std::vector<double> x = functional_values(paths, c.study.functional);
  std::vector<bool> div;
  for (const auto& s : paths) div.push_back(s.diverged);
  json results = json::array();
  for (double p : c.study.p) {
    MomentEstimate e = moment_from_samples(x, div, functional_exponent(c.study.functional, p), c.study.divergence);
    e.p = p;
    results.push_back(moment_json(c, pair, u0, e));
    ctx.log << "moments: p = " << format_number(p) << " estimate = " << format_number(e.value) << " +- "
            << format_number(e.ci_half_width) << "\n";
  }
  json j = ctx.header("moments");
  j["results"] = results;
  write_json(ctx.dir / "moments.json", j);
  if (c.output.paths_csv) {
    Csv csv({"path_id", "sup_h", "int_v_alpha", "diverged"});
    for (std::size_t i = 0; i < paths.size(); ++i)
      csv.row(static_cast<Index>(i), paths[i].sup_h, paths[i].int_v_alpha, static_cast<bool>(paths[i].diverged));
    write_file(ctx.dir / "paths.csv", csv.str());
  }
  return exit_ok;
}

json coercivity_json(const CoercivityReport& r) {
  json w = json::array();
  for (const Witness& v : r.violations) w.push_back(json{{"margin", number(v.margin)}, {"v", std::vector<double>(v.v.data(), v.v.data() + v.v.size())}});
  return json{{"condition", r.condition}, {"p", r.p},
              {"theta", number(r.theta)}, {"theta_fit", number(r.theta_fit)},
              {"K_c", number(r.K_c)},     {"n_samples", r.n_samples},
              {"worst_margin", number(r.worst_margin)}, {"passed", r.passed},
              {"witnesses", w}};
}

struct CheckOutcome {
  json reports = json::array();
  bool passed = true;
};

CheckOutcome run_checks(const ExperimentConfig& c, const GalerkinSpace& space, Csv* csv, double sweep_value = 0.0,
                        bool sweep_row = false) {
  const OperatorPair pair = build_pair(c, space);
  const VectorSampler sampler(pair, c.study.seed);
  CheckOutcome out;
  for (const std::string& cond : c.study.conditions) {
    if (cond == "H3" || cond == "H3-pminus1") {
      for (double p : c.study.p) {
        const DeclaredConstants d = declared_constants(pair, p);
        const double theta = c.study.theta ? *c.study.theta : d.theta.value_or(0.0);
        const double K_c = c.study.K_c ? *c.study.K_c : d.K_c.value_or(0.0);
        const CoercivityReport r = cond == "H3"
                                       ? check_coercivity(pair, p, theta, K_c, sampler, c.study.n_samples)
                                       : check_coercivity_pminus1(pair, p, theta, K_c, sampler, c.study.n_samples);
        out.reports.push_back(coercivity_json(r));
        out.passed = out.passed && r.passed;
        if (csv && sweep_row) {
          csv->row(sweep_value, cond, p, theta, r.theta_fit, K_c, r.worst_margin, r.passed);
        } else if (csv) {
          csv->row(cond, p, theta, r.theta_fit, K_c, r.worst_margin, r.passed);
        }
      }
    } else if (cond == "monotonicity") {
      const MonotonicityReport r = check_monotonicity(pair, sampler, c.study.n_samples);
      out.reports.push_back(json{{"condition", "H2"}, {"K_fit", number(r.K_fit)}, {"n_samples", r.n_samples}});
    } else if (cond == "growth") {
      const GrowthReport r = check_growth(pair, sampler, c.study.n_samples);
      out.reports.push_back(json{{"condition", "H4-H5"},
                                 {"K_A_fit", number(r.K_A_fit)},
                                 {"K_B_fit", number(r.K_B_fit)},
                                 {"K_alpha_fit", number(r.K_alpha_fit)},
                                 {"n_samples", r.n_samples},
                                 {"passed", r.passed}});
      out.passed = out.passed && r.passed;
    }
  }
  return out;
}

int cmd_check(Context& ctx) {
  Csv csv({"condition", "p", "theta", "theta_fit", "K_c", "worst_margin", "passed"});
  const CheckOutcome o = run_checks(ctx.config, ctx.space, &csv);
  json j = ctx.header("check");
  j["reports"] = o.reports;
  j["passed"] = o.passed;
  write_json(ctx.dir / "check.json", j);
  write_file(ctx.dir / "check.csv", csv.str());
  ctx.log << "check: " << (o.passed ? "passed" : "FAILED") << "\n";
  return !o.passed && ctx.options.strict ? exit_audit_failure : exit_ok;
}

std::function<double(int)> oracle_u0(const StudyConfig& s) {
  return [a = s.u0_amplitude, r = s.u0_decay](int k) { return a * std::exp(-r * std::abs(k)); };
}

struct Stabilization {
  double at_K, at_2K, change;
  bool stabilized;
};

Stabilization stabilization(double gamma, const StudyConfig& s, int K) {
  const auto u0 = oracle_u0(s);
  Stabilization r{};
  r.at_K = truncated_second_moment(gamma, s.t, u0, K);
  r.at_2K = truncated_second_moment(gamma, s.t, u0, 2 * K);
  r.change = std::abs(r.at_2K - r.at_K) / r.at_K;
  r.stabilized = r.change < 1e-6;
  return r;
}

int cmd_sweep(Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  const std::string& param = c.study.sweep;
  const std::string& mode = c.study.sweep_mode;
  std::vector<double> values = c.study.values;
  if (values.empty()) {
    if (param == "gamma") values = {0.3, 0.5, 0.7, 0.71, 0.8};
    if (param == "p") values = {2.0, 3.0, 4.0};
    if (param == "dt") values = {c.scheme.dt, c.scheme.dt / 2, c.scheme.dt / 4};
    if (param == "K") values = {4, 8, 16, 32, 64};
  }
  json rows = json::array();
  bool passed = true;
  std::string csv_text;
  if (mode == "oracle") {
    if (param == "dt") throw ConfigError({"study.sweep: dt cannot be swept in oracle mode"});
    const double gamma = c.equation.gamma;
    if (param == "gamma") {
      Csv csv({"gamma", "K", "moment_K", "moment_2K", "rel_change", "stabilized"});
      for (double g : values) {
        const Stabilization s = stabilization(g, c.study, static_cast<int>(c.study.K_trunc));
        csv.row(g, c.study.K_trunc, s.at_K, s.at_2K, s.change, s.stabilized);
        rows.push_back(json{{"gamma", g}, {"K", c.study.K_trunc}, {"moment_K", number(s.at_K)},
                            {"moment_2K", number(s.at_2K)}, {"rel_change", number(s.change)},
                            {"stabilized", s.stabilized}});
      }
      csv_text = csv.str();
    } else if (param == "K") {
      Csv csv({"K", "gamma", "moment"});
      for (double k : values) {
        const double m = truncated_second_moment(gamma, c.study.t, oracle_u0(c.study), static_cast<int>(k));
        csv.row(k, gamma, m);
        rows.push_back(json{{"K", k}, {"gamma", gamma}, {"moment", number(m)}});
      }
      csv_text = csv.str();
    } else {
      Csv csv({"p", "gamma", "k", "moment", "admissible"});
      const int k = static_cast<int>(c.study.u0_mode);
      for (double p : values) {
        const double m = exact_spectral_moment(gamma, p, c.study.t, k, oracle_u0(c.study)(k));
        const bool admissible = 2.0 * gamma * gamma * (p - 1.0) < 1.0;
        csv.row(p, gamma, k, m, admissible);
        rows.push_back(json{{"p", p}, {"gamma", gamma}, {"k", k}, {"moment", number(m)}, {"admissible", admissible}});
      }
      csv_text = csv.str();
    }
  } else if (mode == "moments") {
    if (param == "K") throw ConfigError({"study.sweep: K can only be swept in oracle mode"});
    Csv csv({param, "p", "estimate", "ci", "tail_index", "diverged"});
    for (double v : values) {
      ExperimentConfig cv = c;
      if (param == "gamma") cv.equation.gamma = v;
      if (param == "p") cv.study.p = {v};
      if (param == "dt") cv.scheme.dt = v;
      cv.scheme.validate();
      const GalerkinSpace space(resolved_space(cv));
      const OperatorPair pair = build_pair(cv, space);
      const Vector u0 = initial_condition(cv, pair);
      const auto paths = monte_carlo(cv, pair, u0, ctx.options.workers);
      const auto x = functional_values(paths, cv.study.functional);
      std::vector<bool> div;
      for (const auto& s : paths) div.push_back(s.diverged);
      for (double p : cv.study.p) {
        MomentEstimate e = moment_from_samples(x, div, functional_exponent(cv.study.functional, p), cv.study.divergence);
        e.p = p;
        json r = moment_json(cv, pair, u0, e);
        r[param] = v;
        rows.push_back(r);
        csv.row(v, p, e.value, e.ci_half_width, e.tail_index_est.value_or(std::nan("")), e.divergence_flag);
      }
    }
    csv_text = csv.str();
  } else {
    if (param == "K" || param == "dt") throw ConfigError({"study.sweep: check mode sweeps gamma or p"});
    Csv csv({param, "condition", "p", "theta", "theta_fit", "K_c", "worst_margin", "passed"});
    for (double v : values) {
      ExperimentConfig cv = c;
      if (param == "gamma") cv.equation.gamma = v;
      if (param == "p") cv.study.p = {v};
      const GalerkinSpace space(resolved_space(cv));
      CheckOutcome o = run_checks(cv, space, &csv, v, true);
      for (auto& r : o.reports) {
        r[param] = v;
        rows.push_back(r);
      }
      passed = passed && o.passed;
    }
    csv_text = csv.str();
  }
  json j = ctx.header("sweep");
  j["sweep"] = param;
  j["mode"] = mode;
  j["rows"] = rows;
  write_json(ctx.dir / "sweep.json", j);
  write_file(ctx.dir / "sweep.csv", csv_text);
  ctx.log << "sweep: " << rows.size() << " rows over " << param << "\n";
  return !passed && ctx.options.strict ? exit_audit_failure : exit_ok;
}

int cmd_oracle(Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  const double gamma = c.equation.gamma;
  const int K = static_cast<int>(c.study.K_trunc);
  const auto u0 = oracle_u0(c.study);
  Csv csv({"k", "q", "u0_k", "moment"});
  for (double q : c.study.p)
    for (int k = 0; k <= K; ++k) csv.row(k, q, u0(k), exact_spectral_moment(gamma, q, c.study.t, k, u0(k)));
  const Stabilization s = stabilization(gamma, c.study, K);
  json j = ctx.header("oracle");
  j["result"] = json{{"gamma", gamma},
                     {"t", c.study.t},
                     {"K", K},
                     {"truncated_second_moment_K", number(s.at_K)},
                     {"truncated_second_moment_2K", number(s.at_2K)},
                     {"rel_change", number(s.change)},
                     {"stabilized", s.stabilized},
                     {"p_threshold", number(gamma == 0.0 ? INFINITY : 1.0 + 1.0 / (2.0 * gamma * gamma))}};
  write_json(ctx.dir / "oracle.json", j);
  write_file(ctx.dir / "oracle.csv", csv.str());
  ctx.log << "oracle: truncated second moment " << format_number(s.at_K) << (s.stabilized ? " (stable)" : " (growing)")
          << "\n";
  return exit_ok;
}

}  // namespace

int run(const std::string& subcommand, const ExperimentConfig& config, const RunOptions& options, std::ostream& log) {
  Context ctx(config, options, log);
  if (subcommand == "simulate") return cmd_simulate(ctx);
  if (subcommand == "moments") return cmd_moments(ctx);
  if (subcommand == "check") return cmd_check(ctx);
  if (subcommand == "sweep") return cmd_sweep(ctx);
  if (subcommand == "oracle") return cmd_oracle(ctx);
  throw ConfigError({"unknown subcommand '" + subcommand + "'"});
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variational SPDE audits, simulation and moment estimation", "lpspde"};
  std::string subcommand, config_path;
  std::optional<std::uint64_t> seed;
  RunOptions options;
  app.add_option("subcommand", subcommand, "simulate, moments, check, sweep or oracle")
      ->required()
      ->check(CLI::IsMember({"simulate", "moments", "check", "sweep", "oracle"}));
  app.add_option("--config", config_path, "Experiment configuration file")->required();
  app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--workers", options.workers, "Worker threads for path simulation")->check(CLI::PositiveNumber);
  app.add_flag("--strict", options.strict, "Exit with status 1 when an audit fails");
  app.add_option("--out", options.out_dir, "Output directory (overrides the config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_config_error;
  }
  try {
    std::ifstream f(config_path);
    if (!f) throw ConfigError({"cannot read config file '" + config_path + "'"});
    std::stringstream buf;
    buf << f.rdbuf();
    const fs::path base = fs::path(config_path).parent_path();
    ExperimentConfig config = parse_config(buf.str(), base.empty() ? "." : base.string());
    if (seed) config.study.seed = *seed;
    return run(subcommand, config, options, out);
  } catch (const ConfigError& e) {
    for (const auto& msg : e.errors()) err << "config error: " << msg << "\n";
    return exit_config_error;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config_error;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return exit_runtime_error;
  }
}

}  // namespace lpspde
