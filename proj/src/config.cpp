#include "lpspde/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

namespace lpspde {

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(errors.empty() ? "configuration error" : errors.front()), errors_(std::move(errors)) {}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

namespace {

const std::vector<std::string> equation_names{"spectral-example", "heat-dirichlet", "heat-neumann", "burgers",
                                              "navier-stokes-2d", "system", "higher-order", "p-laplace"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

// Each setter parses the raw value or returns an error message.
using Setter = std::function<std::string(const std::string&)>;

template <typename T>
bool parse_value(const std::string& text, T& out) {
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

Setter real(double& target) {
  return [&target](const std::string& v) -> std::string {
    double x;
    if (!parse_value(v, x)) return "expected a number, got '" + v + "'";
    target = x;
    return {};
  };
}

Setter real_opt(std::optional<double>& target) {
  return [&target](const std::string& v) -> std::string {
    double x;
    if (!parse_value(v, x)) return "expected a number, got '" + v + "'";
    target = x;
    return {};
  };
}

template <typename I>
Setter integer(I& target) {
  return [&target](const std::string& v) -> std::string {
    I x;
    if (!parse_value(v, x)) return "expected an integer, got '" + v + "'";
    target = x;
    return {};
  };
}

Setter text(std::string& target) {
  return [&target](const std::string& v) -> std::string {
    target = v;
    return {};
  };
}

Setter boolean(bool& target) {
  return [&target](const std::string& v) -> std::string {
    if (v == "true" || v == "1" || v == "yes") {
      target = true;
    } else if (v == "false" || v == "0" || v == "no") {
      target = false;
    } else {
      return "expected true or false, got '" + v + "'";
    }
    return {};
  };
}

Setter real_list(std::vector<double>& target) {
  return [&target](const std::string& v) -> std::string {
    std::vector<double> out;
    for (const std::string& item : split_list(v)) {
      double x;
      if (!parse_value(item, x)) return "expected a comma-separated list of numbers, got '" + v + "'";
      out.push_back(x);
    }
    target = out;
    return {};
  };
}

Setter index_list(std::vector<Index>& target) {
  return [&target](const std::string& v) -> std::string {
    std::vector<Index> out;
    for (const std::string& item : split_list(v)) {
      Index x;
      if (!parse_value(item, x)) return "expected a comma-separated list of integers, got '" + v + "'";
      out.push_back(x);
    }
    target = out;
    return {};
  };
}

Setter text_list(std::vector<std::string>& target) {
  return [&target](const std::string& v) -> std::string {
    target = split_list(v);
    return {};
  };
}

struct Schema {
  std::map<std::string, std::map<std::string, Setter>> sections;
};

Schema make_schema(ExperimentConfig& c, std::string& space_kind, std::string& v_norm, std::string& method) {
  Schema s;
  auto& eq = s.sections["equation"];
  EquationConfig& e = c.equation;
  eq["name"] = text(e.name);
  eq["gamma"] = real(e.gamma);
  eq["viscosity"] = real(e.viscosity);
  eq["nu"] = real(e.nu);
  eq["a"] = real(e.a);
  eq["b"] = real(e.b);
  eq["sigma"] = real(e.sigma);
  eq["lambda"] = real_opt(e.lambda);
  eq["noise_dim"] = integer(e.noise_dim);
  eq["order"] = integer(e.order);
  eq["A"] = real(e.A);
  eq["B"] = real(e.B);
  eq["alpha"] = real(e.alpha);
  eq["gammas"] = real_list(e.gammas);
  eq["c"] = real_list(e.c);
  eq["audit"] = boolean(e.audit);
  eq["a_file"] = text(e.a_file);
  eq["b_file"] = text(e.b_file);
  eq["sigma_file"] = text(e.sigma_file);
  eq["lambda_file"] = text(e.lambda_file);
  eq["A_file"] = text(e.A_file);
  eq["B_file"] = text(e.B_file);

  auto& sp = s.sections["space"];
  sp["kind"] = text(space_kind);
  sp["n"] = index_list(c.space.n);
  sp["lengths"] = real_list(c.space.lengths);
  sp["dim"] = integer(c.space.dim);
  sp["components"] = integer(c.space.components);
  sp["alpha"] = real(c.space.alpha);
  sp["v_norm"] = text(v_norm);

  auto& sc = s.sections["scheme"];
  sc["method"] = text(method);
  sc["dt"] = real(c.scheme.dt);
  sc["T"] = real(c.scheme.T);
  sc["record_stride"] = integer(c.scheme.record_stride);

  auto& st = s.sections["study"];
  StudyConfig& y = c.study;
  st["p"] = real_list(y.p);
  st["n_paths"] = integer(y.n_paths);
  st["seed"] = integer(y.seed);
  st["K_trunc"] = integer(y.K_trunc);
  st["functional"] = text(y.functional);
  st["coefficient"] = integer(y.coefficient);
  st["u0"] = text(y.u0);
  st["u0_mode"] = integer(y.u0_mode);
  st["u0_amplitude"] = real(y.u0_amplitude);
  st["u0_decay"] = real(y.u0_decay);
  st["t"] = real(y.t);
  st["conditions"] = text_list(y.conditions);
  st["n_samples"] = integer(y.n_samples);
  st["theta"] = real_opt(y.theta);
  st["K_c"] = real_opt(y.K_c);
  st["C"] = real_opt(y.C);
  st["sweep"] = text(y.sweep);
  st["values"] = real_list(y.values);
  st["sweep_mode"] = text(y.sweep_mode);
  st["tail_fraction"] = real(y.divergence.tail_fraction);
  st["doubling_factor"] = real(y.divergence.doubling_factor);
  st["doublings"] = integer(y.divergence.doublings);

  auto& out = s.sections["output"];
  out["dir"] = text(c.output.dir);
  out["trajectory"] = boolean(c.output.trajectory);
  out["paths_csv"] = boolean(c.output.paths_csv);
  return s;
}

std::string suggestion(const std::string& key, const std::map<std::string, Setter>& known) {
  std::string best;
  std::size_t best_d = 3;
  for (const auto& [name, setter] : known) {
    const std::size_t d = edit_distance(key, name);
    if (d < best_d) best_d = d, best = name;
  }
  return best.empty() ? std::string() : " (did you mean '" + best + "'?)";
}

bool contains(const std::vector<std::string>& list, const std::string& s) {
  return std::find(list.begin(), list.end(), s) != list.end();
}

}  // namespace

ExperimentConfig parse_config(const std::string& document, const std::string& base_dir) {
  ExperimentConfig c;
  std::string space_kind, v_norm = "full", method = "semi-implicit-em";
  Schema schema = make_schema(c, space_kind, v_norm, method);
  std::vector<std::string> errors;
  std::istringstream in(document);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(where + "unterminated section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (!schema.sections.count(section)) {
        std::string hint;
        for (const auto& [name, keys] : schema.sections)
          if (edit_distance(section, name) <= 2) hint = " (did you mean '" + name + "'?)";
        errors.push_back(where + "unknown section [" + section + "]" + hint);
        section = "\x01";
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + "expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      errors.push_back(where + "key '" + key + "' outside any section");
      continue;
    }
    if (section == "\x01") continue;
    auto& keys = schema.sections[section];
    auto it = keys.find(key);
    if (it == keys.end()) {
      errors.push_back(where + "unknown key '" + key + "' in [" + section + "]" + suggestion(key, keys));
      continue;
    }
    const std::string full = section + "." + key;
    if (c.given.count(full)) {
      errors.push_back(where + "duplicate key '" + full + "'");
      continue;
    }
    c.given.insert(full);
    if (value.empty()) {
      errors.push_back(where + full + ": empty value");
      continue;
    }
    const std::string err = it->second(value);
    if (!err.empty()) errors.push_back(where + full + ": " + err);
  }

  // Semantic checks, all collected.
  auto fail = [&](const std::string& key, const std::string& msg) { errors.push_back(key + ": " + msg); };
  if (c.equation.name.empty()) {
    fail("equation.name", "required");
  } else if (!contains(equation_names, c.equation.name)) {
    std::string hint;
    for (const auto& n : equation_names)
      if (edit_distance(c.equation.name, n) <= 2) hint = " (did you mean '" + n + "'?)";
    fail("equation.name", "unknown equation '" + c.equation.name + "'" + hint);
  }
  if (!space_kind.empty()) {
    try {
      c.space.kind = space_kind_from_string(space_kind);
    } catch (const std::exception& ex) {
      fail("space.kind", ex.what());
    }
  }
  if (v_norm == "full") {
    c.space.v_norm = VNormConvention::full;
  } else if (v_norm == "seminorm") {
    c.space.v_norm = VNormConvention::seminorm;
  } else {
    fail("space.v_norm", "expected full or seminorm");
  }
  try {
    c.scheme.method = method_from_string(method);
  } catch (const std::exception& ex) {
    fail("scheme.method", ex.what());
  }
  if (!(c.scheme.dt > 0.0)) fail("scheme.dt", "must be positive");
  if (!(c.scheme.T > 0.0)) fail("scheme.T", "must be positive");
  if (c.scheme.dt > 0.0 && c.scheme.T > 0.0) {
    try {
      c.scheme.validate();
    } catch (const std::exception& ex) {
      fail("scheme", ex.what());
    }
  }
  if (c.scheme.record_stride < 1) fail("scheme.record_stride", "must be positive");
  if (c.study.p.empty()) fail("study.p", "needs at least one value");
  for (double p : c.study.p)
    if (!(p >= 2.0)) fail("study.p", "every p must be at least 2");
  if (c.study.n_paths < 16) fail("study.n_paths", "must be at least 16");
  if (c.study.n_samples < 1) fail("study.n_samples", "must be positive");
  if (c.study.K_trunc < 0) fail("study.K_trunc", "must be nonnegative");
  if (!(c.study.t > 0.0)) fail("study.t", "must be positive");
  if (!contains({"sup", "v", "terminal", "coefficient"}, c.study.functional))
    fail("study.functional", "expected sup, v, terminal or coefficient");
  if (!contains({"mode", "sine", "zero"}, c.study.u0)) fail("study.u0", "expected mode, sine or zero");
  if (!contains({"gamma", "p", "dt", "K"}, c.study.sweep)) fail("study.sweep", "expected gamma, p, dt or K");
  if (!contains({"oracle", "moments", "check"}, c.study.sweep_mode))
    fail("study.sweep_mode", "expected oracle, moments or check");
  for (const auto& cond : c.study.conditions)
    if (!contains({"H3", "H3-pminus1", "monotonicity", "growth"}, cond))
      fail("study.conditions", "unknown condition '" + cond + "'");
  if (!(c.study.divergence.tail_fraction > 0.0 && c.study.divergence.tail_fraction < 1.0))
    fail("study.tail_fraction", "must lie in (0, 1)");
  if (!(c.study.divergence.doubling_factor > 1.0)) fail("study.doubling_factor", "must exceed 1");
  if (c.study.divergence.doublings < 1) fail("study.doublings", "must be positive");
  if (c.equation.noise_dim < 1) fail("equation.noise_dim", "must be positive");
  if (c.given.count("space.alpha") && !(c.space.alpha > 1.0)) fail("space.alpha", "must exceed 1");
  if (!(c.equation.alpha > 1.0)) fail("equation.alpha", "must exceed 1");
  if (c.equation.order < 1) fail("equation.order", "must be positive");
  for (auto* file : {&c.equation.a_file, &c.equation.b_file, &c.equation.sigma_file, &c.equation.lambda_file,
                     &c.equation.A_file, &c.equation.B_file}) {
    if (file->empty()) continue;
    std::filesystem::path p(*file);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    if (!std::filesystem::exists(p)) {
      fail("equation", "file '" + p.string() + "' does not exist");
    } else {
      *file = p.string();
    }
  }
  if (!errors.empty()) throw ConfigError(errors);
  return c;
}

SpaceConfig resolved_space(const ExperimentConfig& config) {
  SpaceConfig s = config.space;
  const std::string& eq = config.equation.name;
  const auto& given = config.given;
  if (!given.count("space.kind")) {
    if (eq == "heat-dirichlet" || eq == "system" || eq == "p-laplace") {
      s.kind = SpaceKind::fd_dirichlet_interval;
    } else if (eq == "heat-neumann") {
      s.kind = SpaceKind::fd_neumann_interval;
    } else if (eq == "navier-stokes-2d") {
      s.kind = SpaceKind::fourier_torus_2d_vector;
    } else {
      s.kind = SpaceKind::fourier_torus;
    }
  }
  const bool fourier = s.kind == SpaceKind::fourier_torus || s.kind == SpaceKind::fourier_torus_2d_vector;
  if (!given.count("space.n")) s.n = {eq == "spectral-example" ? 3 : 17};
  if (!given.count("space.lengths")) s.lengths = {fourier ? 2.0 * std::numbers::pi : 1.0};
  if (!given.count("space.alpha") && eq == "p-laplace") s.alpha = config.equation.alpha;
  if (s.kind == SpaceKind::fourier_torus_2d_vector && !given.count("space.dim")) s.dim = 2;
  return s;
}

namespace {

using CF = CoefficientField;

CoefficientField field(const std::string& file, Index nodes, const CF::Extents& extents,
                       const std::function<double(const std::array<Index, 5>&)>& value) {
  if (!file.empty()) return load_coefficient_csv(file, nodes);
  CoefficientField f(extents);
  for (Index i = 0; i < extents[0]; ++i)
    for (Index j = 0; j < extents[1]; ++j)
      for (Index a = 0; a < extents[2]; ++a)
        for (Index b = 0; b < extents[3]; ++b)
          for (Index k = 0; k < extents[4]; ++k) f.set_everywhere(i, j, a, b, k, value({i, j, a, b, k}));
  return f;
}

}  // namespace

OperatorPair build_pair(const ExperimentConfig& config, const GalerkinSpace& space) {
  const EquationConfig& e = config.equation;
  const Index d = space.dim();
  const Index K = e.noise_dim;
  const Index nodes = space.scalar_size();
  if (e.name == "spectral-example") return spectral_example_make(e.gamma, space);
  if (e.name == "heat-dirichlet" || e.name == "heat-neumann") {
    const CoefficientField a = field(e.a_file, nodes, {d, d, 1, 1, 1},
                                     [&](const auto& idx) { return idx[0] == idx[1] ? e.a : 0.0; });
    const CoefficientField b = field(e.b_file, nodes, {d, 1, 1, 1, K}, [&](const auto&) { return e.b; });
    return e.name == "heat-dirichlet" ? heat_dirichlet_make(a, b, {}, space) : heat_neumann_make(a, b, {}, space);
  }
  if (e.name == "burgers") {
    BurgersOptions o;
    o.viscosity = e.viscosity;
    o.audit = e.audit;
    return burgers_make(e.gamma, space, o);
  }
  if (e.name == "navier-stokes-2d") {
    const CoefficientField b = field(e.b_file, nodes, {2, 1, 2, 1, K},
                                     [&](const auto& idx) { return idx[0] == idx[2] ? e.b : 0.0; });
    return navier_stokes_2d_make(e.nu, b, space);
  }
  if (e.name == "system") {
    const Index N = space.components();
    const CoefficientField a = field(e.a_file, nodes, {d, d, N, N, 1}, [&](const auto& idx) {
      return idx[0] == idx[1] && idx[2] == idx[3] ? e.a : 0.0;
    });
    const CoefficientField sigma = field(e.sigma_file, nodes, {d, 1, N, N, K},
                                         [&](const auto& idx) { return idx[2] == idx[3] ? e.sigma : 0.0; });
    const double lam = e.lambda.value_or(e.sigma);
    const CoefficientField lambda =
        e.lambda_file.empty() && !e.lambda && !e.sigma_file.empty()
            ? sigma
            : field(e.lambda_file, nodes, {d, 1, N, N, K},
                    [&](const auto& idx) { return idx[2] == idx[3] ? lam : 0.0; });
    return system_make(a, sigma, lambda, space);
  }
  if (e.name == "higher-order") {
    const auto nm = static_cast<Index>(multi_indices(static_cast<int>(d), e.order).size());
    const CoefficientField A = field(e.A_file, 0, {1, 1, nm, nm, 1},
                                     [&](const auto& idx) { return idx[2] == idx[3] ? e.A : 0.0; });
    const CoefficientField B = field(e.B_file, 0, {1, 1, nm, 1, K}, [&](const auto&) { return e.B; });
    return higher_order_make(e.order, A, B, space);
  }
  if (e.name == "p-laplace") {
    PLaplaceOptions o;
    o.audit = e.audit;
    const std::vector<double> gammas = e.gammas.empty() ? std::vector<double>{e.gamma} : e.gammas;
    return p_laplace_make(e.alpha, gammas, e.c, space, o);
  }
  throw std::invalid_argument("unknown equation '" + e.name + "'");
}

Vector initial_condition(const ExperimentConfig& config, const OperatorPair& pair) {
  const GalerkinSpace& sp = pair.sp();
  const StudyConfig& s = config.study;
  Vector u0 = Vector::Zero(sp.size());
  if (s.u0 == "zero") return u0;
  if (s.u0 == "mode") {
    if (s.u0_mode < 0 || s.u0_mode >= sp.size()) throw std::invalid_argument("study.u0_mode out of range");
    u0(s.u0_mode) = s.u0_amplitude;
  } else {
    if (sp.is_fourier()) throw std::invalid_argument("study.u0 = sine needs a finite-difference space");
    const Matrix x = sp.node_coordinates();
    for (Index p = 0; p < sp.scalar_size(); ++p) {
      double v = s.u0_amplitude;
      for (int a = 0; a < sp.dim(); ++a)
        v *= std::sin(std::numbers::pi * static_cast<double>(s.u0_mode) * x(p, a) /
                      sp.lengths()[static_cast<std::size_t>(a)]);
      u0(p) = v;
    }
  }
  if (pair.project_to_V) pair.project_to_V(u0);
  return u0;
}

}  // namespace lpspde
