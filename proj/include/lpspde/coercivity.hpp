#pragma once

#include "lpspde/coefficients.hpp"
#include "lpspde/operators.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lpspde {

/// Deterministic probe vectors for the audits. Sample i cycles through four
/// families: isotropic Gaussian coefficients, single modes, highest-frequency
/// modes and smooth random fields, each rescaled to a random H norm in
/// [0.1, 10] and projected onto the discrete V when the pair requires it.
class VectorSampler {
 public:
  VectorSampler(const OperatorPair& pair, std::uint64_t seed);
  Vector draw(Index i) const;
  std::uint64_t seed() const { return seed_; }

 private:
  Vector raw(Index i) const;
  double normal(Index i, std::uint64_t sub, Index counter) const;
  double uniform(Index i, std::uint64_t sub, Index counter) const;

  std::shared_ptr<const GalerkinSpace> space_;
  std::function<void(Vector&)> project_;
  std::uint64_t seed_;
};

/// 2<A(t,v),v> + ||B(t,v)||_HS^2 + (p-2) ||B(t,v)* (v/||v||_H)||^2.
double coercivity_lhs(const OperatorPair& pair, double t, const Vector& v, double p);
/// 2<A(t,v),v> + ||B(t,v)||_HS^2.
double classical_lhs(const OperatorPair& pair, double t, const Vector& v);
/// 2<A(t,v),v> + (p-1) ||B(t,v)||_HS^2.
double pminus1_lhs(const OperatorPair& pair, double t, const Vector& v, double p);

struct Witness {
  Vector v;
  double margin = 0.0;
};

struct CoercivityReport {
  std::string condition;
  double p = 2.0;
  double alpha = 2.0;
  double theta = 0.0;
  double K_c = 0.0;
  /// Largest theta with no sampled violation at the given K_c.
  double theta_fit = 0.0;
  Index n_samples = 0;
  /// Smallest (rhs - lhs) over the samples; negative means a violation.
  double worst_margin = 0.0;
  std::vector<Witness> violations;
  bool passed = false;
};

inline constexpr std::size_t max_witnesses = 8;

CoercivityReport check_coercivity(const OperatorPair& pair, double p, double theta, double K_c,
                                  const VectorSampler& sampler, Index n, double t = 0.0);
CoercivityReport check_coercivity_pminus1(const OperatorPair& pair, double p, double theta, double K_c,
                                          const VectorSampler& sampler, Index n, double t = 0.0);

struct MonotonicityReport {
  double K_fit = 0.0;
  Index n_samples = 0;
  /// Per sampled pair: lhs / ||u - v||_H^2 and the growth factor
  /// (1 + ||v||_V^alpha)(1 + ||v||_H^beta).
  std::vector<double> ratio;
  std::vector<double> growth;
};

MonotonicityReport check_monotonicity(const OperatorPair& pair, const VectorSampler& sampler, Index n,
                                      double t = 0.0);

struct GrowthReport {
  double K_A_fit = 0.0;
  double K_B_fit = 0.0;
  double K_alpha_fit = 0.0;
  Index n_samples = 0;
  bool passed = true;
};

/// Fits K_A of ||A||_{V*}^{alpha/(alpha-1)} <= K_A (f + ||v||_V^alpha)(1 + ||v||_H^beta),
/// K_alpha of ||B||_HS^2 <= f + K_B ||v||_H^2 + K_alpha ||v||_V^alpha at the declared
/// K_B (zero if undeclared), and K_B at the declared K_alpha.
GrowthReport check_growth(const OperatorPair& pair, const VectorSampler& sampler, Index n, double t = 0.0,
                          double tolerance = 1e-9);

struct HemicontinuityReport {
  double max_second_difference = 0.0;
  double max_third_difference = 0.0;
  /// Max midpoint interpolation error of lambda -> <A(u + lambda v), w> on
  /// successively halved grids.
  std::vector<double> refinement_errors;
  bool continuous = false;
};

HemicontinuityReport check_hemicontinuity(const OperatorPair& pair, const Vector& u, const Vector& v,
                                          const Vector& w, const std::vector<double>& lambdas, double t = 0.0);

/// min over points of the smallest eigenvalue of sym(2a - sigma),
/// sigma^{ij} = sum_k b_k^i b_k^j. a: slots (i, j); b: slots (i, k).
double ellipticity_min(const CoefficientField& a, const CoefficientField& b);

/// Minimum of A^{ij}_{ab} xi_i xi_j eta^a eta^b over unit xi, eta. a: slots
/// (i, j, alpha, beta); sigma and lambda: slots (i, alpha, beta, k).
double msp_check(const CoefficientField& a, const CoefficientField& sigma, const CoefficientField& lambda,
                 double p, int resolution = 64);

/// Minimum over unit xi (indexed by order-m multi-indices) of
/// 2 A xi.xi - (p + (-1)^m (p-2))/2 sum_k |B_k . xi|^2.
double higher_order_check(const CoefficientField& A_coef, const CoefficientField& B_coef, int m, int d, double p);

struct GammaBoundResult {
  bool passed = false;
  double worst_margin = 0.0;
  double worst_x = 0.0;
  double worst_y = 0.0;
  Index n_samples = 0;
};

/// Brute-force check of 2(x^{a-1} - y^{a-1})(x - y) - g^2 (x^{a/2} - y^{a/2})^2 >= -tol
/// on [0, x_max]^2.
GammaBoundResult p_laplace_gamma_bound(double alpha, double gamma_sq, Index n_samples, double x_max = 10.0,
                                       std::uint64_t seed = 0, double tolerance = 1e-10);

}  // namespace lpspde
