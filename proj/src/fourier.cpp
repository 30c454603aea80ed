#include "lpspde/fourier.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lpspde::fourier {

namespace {

// Wave index k of basis function j, and whether it is a sine.
std::pair<Index, bool> mode_of(Index j) {
  if (j == 0) return {0, false};
  return {(j + 1) / 2, j % 2 == 0};
}

bool is_nyquist(Index j, Index n) { return n % 2 == 0 && j == n - 1; }

}  // namespace

double wavenumber(Index j, Index n, double length) {
  (void)n;
  return 2.0 * std::numbers::pi * static_cast<double>(mode_of(j).first) / length;
}

double weight(Index j, double length) { return j == 0 ? length : 0.5 * length; }

Matrix derivative_1d(Index n, double length, int order) {
  if (order < 0) throw std::invalid_argument("derivative order must be nonnegative");
  Matrix d = Matrix::Zero(n, n);
  d(0, 0) = order == 0 ? 1.0 : 0.0;
  for (Index j = 1; j < n; ++j) {
    const double kappa = wavenumber(j, n, length);
    const double scale = std::pow(kappa, order);
    const bool sine = mode_of(j).second;
    const int phase = order % 4;
    if (is_nyquist(j, n)) {
      if (order % 2 == 0) d(j, j) = (order % 4 == 0 ? 1.0 : -1.0) * scale;
      continue;
    }
    // cos^(r) = kappa^r cos(x + r pi/2); sin^(r) = kappa^r sin(x + r pi/2).
    const Index c = sine ? j - 1 : j;
    const Index s = sine ? j : j + 1;
    if (!sine) {
      switch (phase) {
        case 0: d(c, j) = scale; break;
        case 1: d(s, j) = -scale; break;
        case 2: d(c, j) = -scale; break;
        default: d(s, j) = scale; break;
      }
    } else {
      switch (phase) {
        case 0: d(s, j) = scale; break;
        case 1: d(c, j) = scale; break;
        case 2: d(s, j) = -scale; break;
        default: d(c, j) = -scale; break;
      }
    }
  }
  return d;
}

Matrix evaluation_1d(Index n, double length, Index q) {
  Matrix e(q, n);
  for (Index i = 0; i < q; ++i) {
    const double x = length * static_cast<double>(i) / static_cast<double>(q);
    for (Index j = 0; j < n; ++j) {
      const auto [k, sine] = mode_of(j);
      const double phase = 2.0 * std::numbers::pi * static_cast<double>(k) * x / length;
      e(i, j) = j == 0 ? 1.0 : (sine ? std::sin(phase) : std::cos(phase));
    }
  }
  return e;
}

SparseMatrix kron(const std::vector<Matrix>& factors) {
  if (factors.empty()) throw std::invalid_argument("kron of zero factors");
  Matrix acc = factors.front();
  for (std::size_t f = 1; f < factors.size(); ++f) {
    const Matrix& b = factors[f];
    Matrix next(acc.rows() * b.rows(), acc.cols() * b.cols());
    for (Index i = 0; i < acc.rows(); ++i)
      for (Index j = 0; j < acc.cols(); ++j)
        next.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = acc(i, j) * b;
    acc = std::move(next);
  }
  return acc.sparseView();
}

SparseMatrix partial(const GalerkinSpace& space, const std::vector<int>& multi_index) {
  if (!space.is_fourier()) throw std::invalid_argument("partial: Fourier space required");
  if (static_cast<int>(multi_index.size()) != space.dim())
    throw std::invalid_argument("partial: multi-index length differs from dimension");
  std::vector<Matrix> factors;
  for (int a = 0; a < space.dim(); ++a)
    factors.push_back(derivative_1d(space.axis_sizes()[a], space.lengths()[a], multi_index[a]));
  return kron(factors);
}

SparseMatrix per_component(const SparseMatrix& scalar_op, int components) {
  const Index r = scalar_op.rows();
  const Index c = scalar_op.cols();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(scalar_op.nonZeros() * components));
  for (int comp = 0; comp < components; ++comp)
    for (Index k = 0; k < scalar_op.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(scalar_op, k); it; ++it)
        t.emplace_back(comp * r + it.row(), comp * c + it.col(), it.value());
  SparseMatrix out(r * components, c * components);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

ExactQuadrature exact_quadrature(const GalerkinSpace& space) {
  if (!space.is_fourier()) throw std::invalid_argument("exact_quadrature: Fourier space required");
  Index m = 0;
  for (Index n : space.axis_sizes()) m = std::max(m, n / 2);
  ExactQuadrature quad;
  quad.points_per_axis = 3 * m + 1;
  std::vector<Matrix> eval;
  double w = 1.0;
  for (int a = 0; a < space.dim(); ++a) {
    eval.push_back(evaluation_1d(space.axis_sizes()[a], space.lengths()[a], quad.points_per_axis));
    w *= space.lengths()[a] / static_cast<double>(quad.points_per_axis);
  }
  quad.node_weight = w;
  quad.values = Matrix(kron(eval));
  for (int a = 0; a < space.dim(); ++a) {
    std::vector<int> mi(static_cast<std::size_t>(space.dim()), 0);
    mi[static_cast<std::size_t>(a)] = 1;
    quad.derivatives.push_back(quad.values * Matrix(partial(space, mi)));
  }
  return quad;
}

}  // namespace lpspde::fourier
