#pragma once

#include "lpspde/gelfand.hpp"

#include <vector>

namespace lpspde::fourier {

// Real Fourier basis on [0, L): index 0 is the constant, 2k-1 is cos(kappa_k x),
// 2k is sin(kappa_k x) with kappa_k = 2 pi k / L. For even n the last index is
// the Nyquist cosine; odd derivatives annihilate it.

double wavenumber(Index j, Index n, double length);

/// Parseval weight of basis function j: L for the constant, L/2 otherwise.
double weight(Index j, double length);

/// Dense n x n matrix of d^order/dx^order in coefficient space.
Matrix derivative_1d(Index n, double length, int order);

/// Values of the n basis functions at the q uniform points x_i = i L / q.
Matrix evaluation_1d(Index n, double length, Index q);

/// Kronecker product A_0 (x) A_1 (x) ... with the first axis slowest.
SparseMatrix kron(const std::vector<Matrix>& factors);

/// d^multi_index applied to one scalar component of a Fourier space.
SparseMatrix partial(const GalerkinSpace& space, const std::vector<int>& multi_index);

/// Block-diagonal copy of a scalar operator for each component.
SparseMatrix per_component(const SparseMatrix& scalar_op, int components);

/// Quadrature grid that integrates products of three basis functions
/// exactly: q = 3 M + 1 points per axis where M is the highest wavenumber
/// index. Rows of `values` are quadrature nodes, columns basis functions.
struct ExactQuadrature {
  Index points_per_axis = 0;
  double node_weight = 0.0;
  Matrix values;
  std::vector<Matrix> derivatives;  // one per axis
};

ExactQuadrature exact_quadrature(const GalerkinSpace& space);

}  // namespace lpspde::fourier
