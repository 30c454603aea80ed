#include "lpspde/gelfand.hpp"

#include "lpspde/fourier.hpp"
#include "lpspde/grid.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lpspde {

std::string to_string(SpaceKind kind) {
  switch (kind) {
    case SpaceKind::fourier_torus: return "fourier-torus";
    case SpaceKind::fd_dirichlet_interval: return "fd-dirichlet-interval";
    case SpaceKind::fd_neumann_interval: return "fd-neumann-interval";
    case SpaceKind::fd_grid_rd: return "fd-grid-rd";
    case SpaceKind::fourier_torus_2d_vector: return "fourier-torus-2d-vector";
  }
  return "unknown";
}

SpaceKind space_kind_from_string(const std::string& name) {
  for (auto k : {SpaceKind::fourier_torus, SpaceKind::fd_dirichlet_interval,
                 SpaceKind::fd_neumann_interval, SpaceKind::fd_grid_rd,
                 SpaceKind::fourier_torus_2d_vector})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown space kind '" + name + "'");
}

namespace {

template <typename T>
std::vector<T> broadcast(const std::vector<T>& values, int dim, const char* what) {
  if (values.size() == 1) return std::vector<T>(static_cast<std::size_t>(dim), values.front());
  if (static_cast<int>(values.size()) != dim)
    throw std::invalid_argument(std::string(what) + ": expected 1 or " + std::to_string(dim) +
                                " entries");
  return values;
}

}  // namespace

GalerkinSpace::GalerkinSpace(const SpaceConfig& config) : config_(config) {
  switch (config.kind) {
    case SpaceKind::fd_dirichlet_interval:
    case SpaceKind::fd_neumann_interval: dim_ = 1; break;
    case SpaceKind::fourier_torus_2d_vector: dim_ = 2; break;
    default: dim_ = config.dim; break;
  }
  if (dim_ < 1 || dim_ > 3) throw std::invalid_argument("dimension must be 1, 2 or 3");
  components_ = config.kind == SpaceKind::fourier_torus_2d_vector ? 2 : config.components;
  config_.dim = dim_;
  config_.components = components_;
  if (components_ < 1) throw std::invalid_argument("components must be positive");
  if (!(config.alpha > 1.0)) throw std::invalid_argument("alpha must exceed 1");
  axis_n_ = broadcast(config.n, dim_, "n");
  lengths_ = broadcast(config.lengths, dim_, "lengths");
  for (Index n : axis_n_)
    if (n < 2) throw std::invalid_argument("n must be at least 2 per axis");
  for (double l : lengths_)
    if (!(l > 0.0) || !std::isfinite(l)) throw std::invalid_argument("domain lengths must be positive");
  scalar_size_ = 1;
  for (Index n : axis_n_) scalar_size_ *= n;
  if (is_fourier()) {
    if (config.alpha != 2.0) throw std::invalid_argument("Fourier spaces support alpha = 2 only");
    build_fourier();
  } else {
    if (config.alpha != 2.0 && dim_ != 1)
      throw std::invalid_argument("W^{1,alpha} spaces with alpha != 2 are one-dimensional only");
    build_finite_difference();
  }
}

bool GalerkinSpace::is_fourier() const {
  return config_.kind == SpaceKind::fourier_torus ||
         config_.kind == SpaceKind::fourier_torus_2d_vector;
}

void GalerkinSpace::build_fourier() {
  grid::Layout layout{axis_n_};
  Vector scalar_w(scalar_size_);
  wavevectors_.resize(scalar_size_, dim_);
  for (Index i = 0; i < scalar_size_; ++i) {
    const auto idx = layout.multi(i);
    double w = 1.0;
    for (int a = 0; a < dim_; ++a) {
      const auto j = idx[static_cast<std::size_t>(a)];
      w *= fourier::weight(j, lengths_[static_cast<std::size_t>(a)]);
      wavevectors_(i, a) = fourier::wavenumber(j, axis_n_[static_cast<std::size_t>(a)],
                                               lengths_[static_cast<std::size_t>(a)]);
    }
    scalar_w(i) = w;
  }
  weights_ = scalar_w.replicate(components_, 1);

  std::vector<Eigen::Triplet<double>> t;
  Index row = 0;
  grad_weights_.resize(static_cast<Index>(dim_) * size());
  for (int a = 0; a < dim_; ++a) {
    std::vector<int> mi(static_cast<std::size_t>(dim_), 0);
    mi[static_cast<std::size_t>(a)] = 1;
    const SparseMatrix d = fourier::per_component(fourier::partial(*this, mi), components_);
    for (Index k = 0; k < d.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(d, k); it; ++it)
        t.emplace_back(row + it.row(), it.col(), it.value());
    grad_weights_.segment(row, size()) = weights_;
    row += size();
  }
  grad_.resize(row, size());
  grad_.setFromTriplets(t.begin(), t.end());
}

void GalerkinSpace::build_finite_difference() {
  const bool neumann = config_.kind == SpaceKind::fd_neumann_interval;
  if (neumann && dim_ != 1) throw std::invalid_argument("Neumann grids are one-dimensional");
  spacing_.resize(static_cast<std::size_t>(dim_));
  for (int a = 0; a < dim_; ++a) {
    const auto n = static_cast<double>(axis_n_[static_cast<std::size_t>(a)]);
    spacing_[static_cast<std::size_t>(a)] = lengths_[static_cast<std::size_t>(a)] / (neumann ? n - 1.0 : n + 1.0);
  }
  const double vol = grid::cell_volume(*this);
  Vector scalar_w = Vector::Constant(scalar_size_, vol);
  if (neumann) {
    // Trapezoid weights keep the ghost-mirror Laplacian symmetric.
    scalar_w(0) *= 0.5;
    scalar_w(scalar_size_ - 1) *= 0.5;
  }
  weights_ = scalar_w.replicate(components_, 1);

  std::vector<Eigen::Triplet<double>> t;
  Index row = 0;
  std::vector<double> gw;
  for (int a = 0; a < dim_; ++a) {
    const SparseMatrix d = fourier::per_component(grid::edge_difference(*this, a), components_);
    for (Index k = 0; k < d.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(d, k); it; ++it)
        t.emplace_back(row + it.row(), it.col(), it.value());
    gw.insert(gw.end(), static_cast<std::size_t>(d.rows()), vol);
    row += d.rows();
  }
  grad_.resize(row, size());
  grad_.setFromTriplets(t.begin(), t.end());
  grad_weights_ = Eigen::Map<Vector>(gw.data(), static_cast<Index>(gw.size()));
}

Vector GalerkinSpace::wavenumber_squared() const {
  if (!is_fourier()) throw std::logic_error("wavenumbers exist for Fourier spaces only");
  return wavevectors_.rowwise().squaredNorm();
}

Matrix GalerkinSpace::node_coordinates() const {
  if (!is_finite_difference()) throw std::logic_error("node coordinates exist for grids only");
  const grid::Layout nodes{axis_n_};
  const bool neumann = config_.kind == SpaceKind::fd_neumann_interval;
  Matrix x(scalar_size_, dim_);
  for (Index i = 0; i < scalar_size_; ++i) {
    const auto idx = nodes.multi(i);
    for (int a = 0; a < dim_; ++a)
      x(i, a) = spacing_[static_cast<std::size_t>(a)] *
                static_cast<double>(idx[static_cast<std::size_t>(a)] + (neumann ? 0 : 1));
  }
  return x;
}

void GalerkinSpace::check(const Eigen::Ref<const Vector>& v) const {
  if (v.size() != size())
    throw std::invalid_argument("dimension mismatch: vector of size " + std::to_string(v.size()) +
                                " in a space of size " + std::to_string(size()));
}

GalerkinSpace build_space(const SpaceConfig& config) { return GalerkinSpace(config); }

double h_inner(const GalerkinSpace& space, const Eigen::Ref<const Vector>& u,
               const Eigen::Ref<const Vector>& v) {
  space.check(u);
  space.check(v);
  const Vector& w = space.weights();
  double s = 0.0;
  for (Index i = 0; i < w.size(); ++i) s += w(i) * u(i) * v(i);
  return s;
}

double h_norm_squared(const GalerkinSpace& space, const Eigen::Ref<const Vector>& v) {
  return h_inner(space, v, v);
}

double h_norm(const GalerkinSpace& space, const Eigen::Ref<const Vector>& v) {
  return std::sqrt(h_norm_squared(space, v));
}

double gradient_power_sum(const GalerkinSpace& space, const Eigen::Ref<const Vector>& v, double a) {
  space.check(v);
  const Vector g = space.gradient() * v;
  const Vector& w = space.gradient_weights();
  double s = 0.0;
  if (a == 2.0) {
    for (Index i = 0; i < g.size(); ++i) s += w(i) * g(i) * g(i);
  } else {
    for (Index i = 0; i < g.size(); ++i) s += w(i) * std::pow(std::abs(g(i)), a);
  }
  return s;
}

double v_norm(const GalerkinSpace& space, const Eigen::Ref<const Vector>& v) {
  const double alpha = space.alpha();
  if (alpha != 2.0) return std::pow(gradient_power_sum(space, v, alpha), 1.0 / alpha);
  double s = gradient_power_sum(space, v, 2.0);
  if (space.v_norm_convention() == VNormConvention::full) s += h_norm_squared(space, v);
  return std::sqrt(s);
}

double duality_pair(const GalerkinSpace& space, const Eigen::Ref<const Vector>& f,
                    const Eigen::Ref<const Vector>& v) {
  space.check(f);
  space.check(v);
  double s = 0.0;
  for (Index i = 0; i < f.size(); ++i) s += f(i) * v(i);
  return s;
}

DualVector riesz_dual(const GalerkinSpace& space, const Eigen::Ref<const Vector>& w) {
  space.check(w);
  return space.weights().cwiseProduct(w);
}

StateVector riesz_primal(const GalerkinSpace& space, const Eigen::Ref<const Vector>& f) {
  space.check(f);
  return f.cwiseQuotient(space.weights());
}

SparseMatrix v_gram(const GalerkinSpace& space) {
  if (space.alpha() != 2.0) throw std::domain_error("V Gram matrix requires alpha = 2");
  SparseMatrix s = SparseMatrix(space.gradient().transpose()) *
                   space.gradient_weights().asDiagonal() * space.gradient();
  if (space.v_norm_convention() == VNormConvention::full) {
    SparseMatrix m(space.size(), space.size());
    m.setIdentity();
    m = space.weights().asDiagonal() * m;
    s += m;
  }
  s.prune(0.0);
  return s;
}

namespace {

bool is_diagonal(const SparseMatrix& s) {
  for (Index k = 0; k < s.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(s, k); it; ++it)
      if (it.row() != it.col() && it.value() != 0.0) return false;
  return true;
}

// Dual of the W_0^{1,a} seminorm on a Dirichlet interval: every f has the form
// f_i = g_{i-1} - g_i for a cell field g unique up to a constant, and
// ||f||_* = min_c ||g + c||_{L^{a'}}.
double dirichlet_w1a_dual_norm(const GalerkinSpace& space, const Eigen::Ref<const Vector>& f) {
  const double a = space.alpha();
  const double conj = a / (a - 1.0);
  const double h = space.spacing().front();
  const Index n = f.size();
  Vector g(n + 1);
  g(0) = 0.0;
  for (Index i = 0; i < n; ++i) g(i + 1) = g(i) - f(i);
  auto slope = [&](double c) {
    double s = 0.0;
    for (Index j = 0; j <= n; ++j) {
      const double x = g(j) + c;
      s += (x >= 0.0 ? 1.0 : -1.0) * std::pow(std::abs(x), conj - 1.0);
    }
    return s;
  };
  double lo = -g.maxCoeff();
  double hi = -g.minCoeff();
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (slope(mid) > 0.0 ? hi : lo) = mid;
  }
  const double c = 0.5 * (lo + hi);
  double s = 0.0;
  for (Index j = 0; j <= n; ++j) s += h * std::pow(std::abs(g(j) + c), conj);
  return std::pow(s, 1.0 / conj);
}

}  // namespace

double dual_norm(const GalerkinSpace& space, const Eigen::Ref<const Vector>& f) {
  space.check(f);
  if (space.alpha() != 2.0) {
    if (space.kind() != SpaceKind::fd_dirichlet_interval)
      throw std::domain_error("W^{1,alpha} dual norm is implemented on Dirichlet intervals only");
    return dirichlet_w1a_dual_norm(space, f);
  }
  const SparseMatrix s = v_gram(space);
  if (is_diagonal(s)) {
    double acc = 0.0;
    const Vector d = s.diagonal();
    for (Index i = 0; i < f.size(); ++i) {
      if (d(i) > 0.0) {
        acc += f(i) * f(i) / d(i);
      } else if (std::abs(f(i)) > 1e-14 * (f.cwiseAbs().maxCoeff() + 1e-300)) {
        return std::numeric_limits<double>::infinity();
      }
    }
    return std::sqrt(acc);
  }
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(s);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("V Gram factorization failed");
  const Vector x = ldlt.solve(f);
  return std::sqrt(std::max(0.0, f.dot(x)));
}

}  // namespace lpspde
