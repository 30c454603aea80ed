#pragma once

#include "lpspde/moments.hpp"
#include "lpspde/operators.hpp"
#include "lpspde/simulate.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpspde {

struct EquationConfig {
  /// spectral-example, heat-dirichlet, heat-neumann, burgers, navier-stokes-2d,
  /// system, higher-order or p-laplace.
  std::string name;
  double gamma = 0.5;
  double viscosity = 1.0;
  double nu = 1.0;
  /// Constant coefficients: a^{ij} = a delta_ij, b^i_k = b, and so on.
  double a = 1.0;
  double b = 0.0;
  double sigma = 0.0;
  std::optional<double> lambda;
  Index noise_dim = 1;
  int order = 1;
  double A = 1.0;
  double B = 0.0;
  double alpha = 3.0;
  std::vector<double> gammas;
  std::vector<double> c;
  bool audit = false;
  /// CSV coefficient fields; resolved relative to the config file.
  std::string a_file, b_file, sigma_file, lambda_file, A_file, B_file;
};

struct StudyConfig {
  std::vector<double> p{2.0};
  Index n_paths = 1000;
  std::uint64_t seed = 0;
  Index K_trunc = 32;
  /// sup, v, terminal or coefficient.
  std::string functional = "sup";
  Index coefficient = 1;
  /// mode, sine or zero.
  std::string u0 = "mode";
  Index u0_mode = 1;
  double u0_amplitude = 1.0;
  /// u0_k = u0_amplitude exp(-u0_decay |k|) for the oracle.
  double u0_decay = 1.0;
  double t = 1.0;
  std::vector<std::string> conditions{"H3", "H3-pminus1", "monotonicity", "growth"};
  Index n_samples = 1000;
  std::optional<double> theta;
  std::optional<double> K_c;
  std::optional<double> C;
  /// gamma, p, dt or K.
  std::string sweep = "gamma";
  std::vector<double> values;
  /// oracle, moments or check.
  std::string sweep_mode = "oracle";
  DivergenceOptions divergence;
};

struct OutputConfig {
  std::string dir = ".";
  bool trajectory = true;
  bool paths_csv = true;
};

struct ExperimentConfig {
  EquationConfig equation;
  SpaceConfig space;
  SchemeConfig scheme;
  StudyConfig study;
  OutputConfig output;
  /// Keys given explicitly, as "section.key".
  std::set<std::string> given;
};

/// Every problem found while parsing, one message per entry.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

/// Parses an INI-style document ([section] headers, key = value lines, '#'
/// comments) and validates it. Relative file paths resolve against base_dir.
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".");

/// Applies the equation-dependent defaults for the space block.
SpaceConfig resolved_space(const ExperimentConfig& config);

OperatorPair build_pair(const ExperimentConfig& config, const GalerkinSpace& space);
Vector initial_condition(const ExperimentConfig& config, const OperatorPair& pair);

/// Levenshtein distance.
std::size_t edit_distance(const std::string& a, const std::string& b);

}  // namespace lpspde
