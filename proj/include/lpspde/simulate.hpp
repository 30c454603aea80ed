#pragma once

#include "lpspde/noise.hpp"
#include "lpspde/operators.hpp"

#include <Eigen/SparseLU>

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lpspde {

enum class Method { semi_implicit_em, explicit_em, tamed_em };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

struct SchemeConfig {
  Method method = Method::semi_implicit_em;
  double dt = 1e-3;
  double T = 1.0;
  Index record_stride = 1;

  /// round(T / dt); throws unless T is a multiple of dt to 1e-9 relative.
  Index n_steps() const;
  void validate() const;
};

/// One time step of the scheme, reusable across steps and paths.
///
/// Semi-implicit: (M - dt L) v' = M v + dt N(t, v) + M B(t, v) dW.
/// Explicit:      v' = v + dt M^{-1} A(t, v) + B(t, v) dW.
/// Tamed:         v' = v + dt M^{-1} A(t, v) / (1 + dt ||M^{-1} A(t, v)||_H) + B(t, v) dW.
class Stepper {
 public:
  Stepper(const OperatorPair& pair, const SchemeConfig& scheme);

  /// Writes the next state into `out` (which must not alias `v`).
  void advance(double t, const Vector& v, const Vector& dW, Vector& out);
  /// B(t, v) dW of the last advance, H coordinates.
  const Vector& last_noise() const { return noise_; }

 private:
  const OperatorPair* pair_;
  SchemeConfig scheme_;
  bool diagonal_ = false;
  Vector inv_diag_;  // (M - dt L)^{-1} on the diagonal path
  std::shared_ptr<Eigen::SparseLU<SparseMatrix>> lu_;
  Vector drift_, scratch_, rhs_, noise_;
  Matrix b_;
};

StateVector step(const OperatorPair& pair, const SchemeConfig& scheme, double t, const Vector& v, const Vector& dW);

struct Snapshot {
  double t = 0.0;
  Vector v;
};

struct PathFunctionals {
  /// Max of ||u||_H over the recording grid (t = 0, every record_stride steps, and T).
  double sup_h = 0.0;
  /// Left-Riemann sum of ||u||_V^alpha.
  double int_v_alpha = 0.0;
  Vector terminal;
  bool diverged = false;
  /// Time of the last finite state (T unless diverged).
  double last_finite_time = 0.0;
  std::vector<Snapshot> snapshots;
};

struct PathOptions {
  bool keep_snapshots = false;
  /// Skip the V-norm quadrature when only H functionals are needed.
  bool v_integral = true;
};

PathFunctionals simulate_path(const OperatorPair& pair, const SchemeConfig& scheme, const Vector& u0,
                              const WienerStream& noise, const PathOptions& options = {});

/// CSV with columns t, coeff_0, ..., coeff_{n-1}.
void write_trajectory_csv(std::ostream& out, const std::vector<Snapshot>& snapshots);

/// |‖u(T)‖_H^p - R| where R is the discrete Ito expansion of ‖·‖_H^p along the
/// simulated path: drift pairing, stochastic integral and both quadratic
/// variation terms evaluated on the realized increments, with ‖X‖^{p-4} := 0
/// at X = 0.
double ito_residual(const OperatorPair& pair, const SchemeConfig& scheme, const Vector& u0,
                    const WienerStream& noise, double p);

struct StrongOrder {
  double order = 0.0;
  std::vector<double> dts;
  std::vector<double> errors;
};

/// Mean terminal H-error at dt = base_dt / 2^l, l = 0..levels-1, on coupled
/// (bridge-refined) noise, against the pair's exact solution when it has one
/// and otherwise against a run two levels finer. Returns the least-squares
/// slope of log error on log dt, or nothing when all errors vanish.
std::optional<StrongOrder> strong_convergence_order(const OperatorPair& pair, const Vector& u0, double base_dt,
                                                    double T, int levels, Index n_paths,
                                                    std::uint64_t seed = 0);

}  // namespace lpspde
