#pragma once

#include "lpspde/coefficients.hpp"
#include "lpspde/gelfand.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lpspde {

/// Constants an equation is claimed to satisfy, for auditing.
struct DeclaredConstants {
  std::optional<double> theta;
  std::optional<double> K_c;
  std::optional<double> K_A;
  std::optional<double> K_B;
  std::optional<double> K_alpha;
};

/// Writes the explicit drift N(t, v) (V* coordinates) into `out`.
using DriftFn = std::function<void(double t, const Vector& v, Vector& out)>;
/// Writes B(t, v) into the n x K matrix `out` (columns in H coordinates).
using DiffusionFn = std::function<void(double t, const Vector& v, Matrix& out)>;

/// Discretized pair (A, B) with A(t, v) = L v + N(t, v).
///
/// L is the part a semi-implicit scheme treats implicitly; N collects
/// convection, nonlinear diffusion and forcing. All callables are pure and
/// the struct is immutable once a factory returns it.
struct OperatorPair {
  std::string equation;
  std::shared_ptr<const GalerkinSpace> space;
  double alpha = 2.0;
  double beta = 0.0;
  Index noise_dim = 1;

  SparseMatrix linear_part;
  DriftFn nonlinear_part;
  DiffusionFn diffusion;

  /// f(t) of the coercivity and growth conditions.
  std::function<double(double t)> forcing_budget;
  std::function<DeclaredConstants(double p)> declared;

  /// V norm used by the audits; defaults to the space's norm when empty.
  std::function<double(const Vector& v)> v_norm;
  /// Projection onto the discrete V (Leray projection for Navier-Stokes).
  std::function<void(Vector& v)> project_to_V;

  /// Closed-form u(t) given u(0) and the driving W(t), when one exists.
  std::function<Vector(double t, const Vector& u0, const Vector& w)> exact_solution;

  /// A and B are linear in v (no forcing, no nonlinearity).
  bool linear = true;

  const GalerkinSpace& sp() const { return *space; }
  Index size() const { return space->size(); }
};

Vector apply_A(const OperatorPair& pair, double t, const Vector& v);
/// Allocation-free variant; `out` must have the space's size.
void apply_A_into(const OperatorPair& pair, double t, const Vector& v, Vector& out, Vector& scratch);
Matrix apply_B(const OperatorPair& pair, double t, const Vector& v);
/// (B_k(t, v), v)_H for each k.
Vector b_adjoint_v(const OperatorPair& pair, double t, const Vector& v);
/// Sum over k of ||B_k||_H^2 for an n x K matrix of H coordinates.
double hs_norm_squared(const GalerkinSpace& space, const Matrix& b);
double pair_v_norm(const OperatorPair& pair, const Vector& v);
double forcing_budget(const OperatorPair& pair, double t);
DeclaredConstants declared_constants(const OperatorPair& pair, double p);

/// Forcings phi(t) (V* coordinates) and psi(t) (n x K, H coordinates).
struct Forcing {
  std::function<Vector(double)> phi;
  std::function<Matrix(double)> psi;
};

// Example with A = Laplacian and B = 2 gamma (-Laplacian)^{1/2}, scalar noise.
OperatorPair spectral_example_make(double gamma, const GalerkinSpace& space);

/// a: slots (i, j); b: slots (i, k). Divergence-form differencing.
OperatorPair heat_dirichlet_make(const CoefficientField& a, const CoefficientField& b,
                                 const Forcing& forcing, const GalerkinSpace& space);
OperatorPair heat_neumann_make(const CoefficientField& a, const CoefficientField& b,
                               const Forcing& forcing, const GalerkinSpace& space);

struct BurgersOptions {
  double viscosity = 1.0;
  /// Reject gamma outside (-sqrt 2, sqrt 2), where theta = 2 - gamma^2 fails.
  bool audit = false;
};
OperatorPair burgers_make(double gamma, const GalerkinSpace& space, const BurgersOptions& options = {});

/// b: slots (i, alpha = velocity component, k), constant or sampled at the
/// n1 x n2 collocation points x = (i L1 / n1, j L2 / n2).
OperatorPair navier_stokes_2d_make(double nu, const CoefficientField& b, const GalerkinSpace& space);

/// a: slots (i, j, alpha, beta); sigma and lambda: slots (i, alpha, beta, k).
OperatorPair system_make(const CoefficientField& a, const CoefficientField& sigma,
                         const CoefficientField& lambda, const GalerkinSpace& space,
                         const Forcing& forcing = {});

/// Order-m multi-indices in d dimensions, lexicographically ordered.
std::vector<std::vector<int>> multi_indices(int d, int m);

/// A_coef: slots (alpha, beta) over multi_indices(d, m); B_coef: slots (alpha, k).
OperatorPair higher_order_make(int m, const CoefficientField& A_coef, const CoefficientField& B_coef,
                               const GalerkinSpace& space);

struct PLaplaceOptions {
  /// Reject sum gamma_k^2 > 8 (alpha - 1) / alpha^2.
  bool audit = false;
};
OperatorPair p_laplace_make(double alpha, const std::vector<double>& gamma_k,
                            const std::vector<double>& C_k, const GalerkinSpace& space,
                            const PLaplaceOptions& options = {});

/// Discrete Leray projection I - grad Lap^+ div on fourier_torus_2d_vector.
Vector leray_project(const GalerkinSpace& space, const Vector& v);
/// Spectral divergence (scalar Fourier coefficients).
Vector divergence(const GalerkinSpace& space, const Vector& v);

/// Nonlinear part of Burgers or Navier-Stokes alone, in V* coordinates.
Vector convection_term(const OperatorPair& pair, const Vector& v);

/// Ingredients of the Neumann trace inequality
/// ||B*v||^2 / ||v||^2 <= (1 + eps) C_b^2 ||grad v||^2 + C_eps (C_b^2 + D_b^2) ||v||^2.
struct NeumannTraceAudit {
  double C_b = 0.0;
  double D_b = 0.0;
  double eps = 0.0;
  double C_eps_fit = 0.0;
  Index n_samples = 0;
};
NeumannTraceAudit neumann_trace_audit(const CoefficientField& b, const GalerkinSpace& space, double eps,
                                      const std::vector<Vector>& samples);

}  // namespace lpspde
