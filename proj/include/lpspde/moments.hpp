#pragma once

#include "lpspde/simulate.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace lpspde {

/// Student t quantile t_{0.975, 15} for the 16-batch confidence interval.
inline constexpr double batch_t_quantile = 2.131449546;
inline constexpr int n_batches = 16;

struct DivergenceOptions {
  double tail_fraction = 0.05;
  double doubling_factor = 1.5;
  int doublings = 3;
  /// Below this many samples the diagnostic is unavailable.
  Index min_samples = 100;
};

struct DivergenceDiagnostic {
  bool available = false;
  bool flag = false;
  /// Hill estimate; +inf when the top order statistics are all equal.
  std::optional<double> tail_index;
};

/// Hill estimator over the top tail_fraction order statistics, plus the
/// doubling test on running means of x^p over n0, 2 n0, ..., 2^doublings n0.
DivergenceDiagnostic divergence_diagnostic(const std::vector<double>& samples, double p,
                                           const DivergenceOptions& options = {});

struct MomentEstimate {
  double p = 2.0;
  double value = 0.0;
  double ci_half_width = 0.0;
  Index n_paths = 0;
  Index n_diverged = 0;
  std::optional<double> tail_index_est;
  bool diagnostic_available = false;
  bool divergence_flag = false;
};

/// Mean of x^p over the finite samples with a 16-batch-means interval.
/// Batches are contiguous in sample order.
MomentEstimate moment_from_samples(const std::vector<double>& samples, const std::vector<bool>& diverged, double p,
                                   const DivergenceOptions& options = {});

/// Per-path functionals shared by every moment of one Monte Carlo run.
struct PathSummary {
  double sup_h = 0.0;
  double int_v_alpha = 0.0;
  double terminal_h = 0.0;
  /// |u_j(T)| for the coefficient selected in MonteCarloOptions.
  double terminal_coefficient = 0.0;
  bool diverged = false;
};

struct MonteCarloOptions {
  Index n_paths = 1000;
  std::uint64_t master_seed = 0;
  int workers = 1;
  bool v_integral = true;
  Index coefficient = 0;
};

/// Simulates n_paths independent paths; path i uses stream id i. The result
/// is independent of the worker count.
std::vector<PathSummary> run_paths(const OperatorPair& pair, const SchemeConfig& scheme, const Vector& u0,
                                   const MonteCarloOptions& options);

/// E sup_t ‖u(t)‖_H^p over the recording grid.
MomentEstimate estimate_sup_moment(const OperatorPair& pair, const SchemeConfig& scheme, const Vector& u0, double p,
                                   Index n_paths, std::uint64_t master_seed, int workers = 1);
/// E (∫ ‖u‖_V^alpha dt)^{p/2}; alpha is the pair's.
MomentEstimate estimate_v_moment(const OperatorPair& pair, const SchemeConfig& scheme, const Vector& u0, double p,
                                 Index n_paths, std::uint64_t master_seed, int workers = 1);
/// E ‖u(T)‖_H^q.
MomentEstimate estimate_terminal_moment(const OperatorPair& pair, const SchemeConfig& scheme, const Vector& u0,
                                        double q, Index n_paths, std::uint64_t master_seed, int workers = 1);
/// E |u_j(T)|^q for one basis coefficient j.
MomentEstimate estimate_coefficient_moment(const OperatorPair& pair, const SchemeConfig& scheme, const Vector& u0,
                                           Index j, double q, Index n_paths, std::uint64_t master_seed,
                                           int workers = 1);

/// E|u_k(t)|^q for du = -k^2 u dt + 2 gamma |k| u dW, u(0) = u0_k.
double exact_spectral_moment(double gamma, double q, double t, double k, double u0_k);

/// Sum over k = -K..K of E|u_k(t)|^2 with u(0) coefficients u0(k).
double truncated_second_moment(double gamma, double t, const std::function<double(int)>& u0, int K_modes);

/// C e^{C T} (E‖u0‖^p + E(∫ f)^{p/2}).
double apriori_rhs(double C, double T, double u0_p_moment, double f_integral_p2_moment);

/// Runs body(i) for i in [0, n) on `workers` threads over contiguous blocks.
void parallel_for(Index n, int workers, const std::function<void(Index)>& body);

}  // namespace lpspde
