#pragma once

#include "lpspde/gelfand.hpp"

#include <vector>

// Finite-difference stencils on the tensor grids of the fd_* space kinds.
// Nodes are ordered lexicographically with the first axis slowest. Dirichlet
// grids store interior nodes only; boundary values are zero.
namespace lpspde::grid {

struct Layout {
  std::vector<Index> extents;
  Index size() const;
  Index linear(const std::vector<Index>& idx) const;
  std::vector<Index> multi(Index linear_index) const;
};

Layout node_layout(const GalerkinSpace& space);
/// Edges parallel to `axis`, including the edges touching the boundary.
Layout edge_layout(const GalerkinSpace& space, int axis);
Layout cell_layout(const GalerkinSpace& space);

/// Forward difference of nodal values onto the edges along `axis`.
SparseMatrix edge_difference(const GalerkinSpace& space, int axis);
/// Cell-centred gradient component (average of the parallel edge differences).
SparseMatrix cell_gradient(const GalerkinSpace& space, int axis);
/// Centred nodal difference; skew-symmetric for Dirichlet grids. On Neumann
/// grids the ghost-mirror makes it vanish at the two end nodes.
SparseMatrix centered_difference(const GalerkinSpace& space, int axis);

/// Averages nodal values onto edges / cells using the adjacent grid nodes.
SparseMatrix edge_average(const GalerkinSpace& space, int axis);
SparseMatrix cell_average(const GalerkinSpace& space);

/// Volume of one grid cell (product of spacings).
double cell_volume(const GalerkinSpace& space);

}  // namespace lpspde::grid
