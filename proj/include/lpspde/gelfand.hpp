#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string>
#include <vector>

namespace lpspde {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Coefficient vector of an element of H (or V). Coordinates refer to the
/// basis of the owning GalerkinSpace.
using StateVector = Vector;

/// Coefficient vector of an element of V*. The pairing with a StateVector is
/// the plain Euclidean dot product, so the H-representation of w is
/// `weights .* w`.
using DualVector = Vector;

enum class SpaceKind {
  fourier_torus,
  fd_dirichlet_interval,
  fd_neumann_interval,
  fd_grid_rd,
  fourier_torus_2d_vector,
};

std::string to_string(SpaceKind kind);
SpaceKind space_kind_from_string(const std::string& name);

enum class VNormConvention {
  full,      // ||v||_V^2 = ||v||_H^2 + ||grad v||_H^2
  seminorm,  // ||v||_V = ||grad v||_{L^alpha}
};

struct SpaceConfig {
  SpaceKind kind = SpaceKind::fourier_torus;
  /// Degrees of freedom per axis. A single entry is broadcast to every axis.
  std::vector<Index> n{8};
  /// Domain length per axis. A single entry is broadcast to every axis.
  std::vector<double> lengths{6.283185307179586};
  /// Spatial dimension; only read for fd_grid_rd and fourier_torus.
  int dim = 1;
  /// Number of solution components (systems); fourier_torus_2d_vector forces 2.
  int components = 1;
  double alpha = 2.0;
  VNormConvention v_norm = VNormConvention::full;
};

/// Finite-dimensional realization of a Gelfand triple (V, H, V*).
///
/// Every supported discretization has a diagonal H Gram matrix (lumped mass
/// for finite differences, Parseval weights for Fourier bases). Gradients are
/// stored as one stacked sparse operator together with the quadrature weight
/// of each row, so that ||grad v||_{L^a}^a = sum_r w_r |(G v)_r|^a.
class GalerkinSpace {
 public:
  explicit GalerkinSpace(const SpaceConfig& config);

  SpaceKind kind() const { return config_.kind; }
  const SpaceConfig& config() const { return config_; }
  int dim() const { return dim_; }
  int components() const { return components_; }
  double alpha() const { return config_.alpha; }
  VNormConvention v_norm_convention() const { return config_.v_norm; }

  /// Total number of degrees of freedom.
  Index size() const { return weights_.size(); }
  /// Degrees of freedom of one scalar component.
  Index scalar_size() const { return scalar_size_; }
  const std::vector<Index>& axis_sizes() const { return axis_n_; }
  const std::vector<double>& lengths() const { return lengths_; }
  /// Grid spacing per axis (finite-difference kinds only).
  const std::vector<double>& spacing() const { return spacing_; }

  /// Diagonal of the H Gram matrix.
  const Vector& weights() const { return weights_; }
  Eigen::DiagonalWrapper<const Vector> h_gram() const { return weights_.asDiagonal(); }

  /// Stacked gradient operator and per-row quadrature weights.
  const SparseMatrix& gradient() const { return grad_; }
  const Vector& gradient_weights() const { return grad_weights_; }

  bool is_fourier() const;
  bool is_finite_difference() const { return !is_fourier(); }

  /// Per-axis Fourier wavenumbers of each scalar basis function (Fourier kinds).
  const Matrix& wavevectors() const { return wavevectors_; }
  /// Sum of squared wavenumbers per scalar basis function (Fourier kinds).
  Vector wavenumber_squared() const;

  /// Node coordinates of a scalar component (finite-difference kinds), one
  /// row per node.
  Matrix node_coordinates() const;

  void check(const Eigen::Ref<const Vector>& v) const;

 private:
  void build_fourier();
  void build_finite_difference();

  SpaceConfig config_;
  int dim_ = 1;
  int components_ = 1;
  std::vector<Index> axis_n_;
  std::vector<double> lengths_;
  std::vector<double> spacing_;
  Index scalar_size_ = 0;
  Vector weights_;
  SparseMatrix grad_;
  Vector grad_weights_;
  Matrix wavevectors_;
};

GalerkinSpace build_space(const SpaceConfig& config);

double h_inner(const GalerkinSpace& space, const Eigen::Ref<const Vector>& u,
               const Eigen::Ref<const Vector>& v);
double h_norm(const GalerkinSpace& space, const Eigen::Ref<const Vector>& v);
double h_norm_squared(const GalerkinSpace& space, const Eigen::Ref<const Vector>& v);

/// ||grad v||_{L^a}^a with the space's gradient quadrature.
double gradient_power_sum(const GalerkinSpace& space, const Eigen::Ref<const Vector>& v,
                          double a);

/// Discrete V norm. For alpha = 2 the convention flag of the space picks the
/// full H^1 norm or the gradient seminorm; alpha != 2 always uses the
/// W^{1,alpha} seminorm.
double v_norm(const GalerkinSpace& space, const Eigen::Ref<const Vector>& v);

double duality_pair(const GalerkinSpace& space, const Eigen::Ref<const Vector>& f,
                    const Eigen::Ref<const Vector>& v);

/// H-representation of w in V* coordinates.
DualVector riesz_dual(const GalerkinSpace& space, const Eigen::Ref<const Vector>& w);

/// Inverse of riesz_dual: H coordinates of an H-representable functional.
StateVector riesz_primal(const GalerkinSpace& space, const Eigen::Ref<const Vector>& f);

/// Dual norm sup_w <f, w> / ||w||_V. Returns +inf when f does not vanish on
/// the kernel of a seminorm.
double dual_norm(const GalerkinSpace& space, const Eigen::Ref<const Vector>& f);

/// Matrix of the V inner product (alpha = 2 only).
SparseMatrix v_gram(const GalerkinSpace& space);

}  // namespace lpspde
