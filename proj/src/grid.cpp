#include "lpspde/grid.hpp"

#include <stdexcept>

namespace lpspde::grid {

using Triplet = Eigen::Triplet<double>;

Index Layout::size() const {
  Index s = 1;
  for (Index e : extents) s *= e;
  return s;
}

Index Layout::linear(const std::vector<Index>& idx) const {
  Index lin = 0;
  for (std::size_t a = 0; a < extents.size(); ++a) lin = lin * extents[a] + idx[a];
  return lin;
}

std::vector<Index> Layout::multi(Index linear_index) const {
  std::vector<Index> idx(extents.size());
  for (std::size_t a = extents.size(); a-- > 0;) {
    idx[a] = linear_index % extents[a];
    linear_index /= extents[a];
  }
  return idx;
}

namespace {

void require_fd(const GalerkinSpace& space) {
  if (!space.is_finite_difference())
    throw std::invalid_argument("finite-difference stencil requested on a Fourier space");
}

bool neumann(const GalerkinSpace& space) { return space.kind() == SpaceKind::fd_neumann_interval; }

// Node index along one axis for an edge/cell position and offset in {0, 1};
// -1 when the node lies on the Dirichlet boundary.
Index node_of(const GalerkinSpace& space, Index position, int offset, int axis) {
  if (neumann(space)) return position + offset;
  const Index node = position - 1 + offset;
  return (node < 0 || node >= space.axis_sizes()[static_cast<std::size_t>(axis)]) ? -1 : node;
}

}  // namespace

Layout node_layout(const GalerkinSpace& space) {
  require_fd(space);
  return Layout{space.axis_sizes()};
}

Layout edge_layout(const GalerkinSpace& space, int axis) {
  require_fd(space);
  Layout l{space.axis_sizes()};
  l.extents[static_cast<std::size_t>(axis)] += neumann(space) ? -1 : 1;
  return l;
}

Layout cell_layout(const GalerkinSpace& space) {
  require_fd(space);
  Layout l{space.axis_sizes()};
  for (auto& e : l.extents) e += neumann(space) ? -1 : 1;
  return l;
}

double cell_volume(const GalerkinSpace& space) {
  double v = 1.0;
  for (double h : space.spacing()) v *= h;
  return v;
}

SparseMatrix edge_difference(const GalerkinSpace& space, int axis) {
  const Layout nodes = node_layout(space);
  const Layout edges = edge_layout(space, axis);
  const double inv_h = 1.0 / space.spacing()[static_cast<std::size_t>(axis)];
  std::vector<Triplet> t;
  for (Index e = 0; e < edges.size(); ++e) {
    auto idx = edges.multi(e);
    const Index pos = idx[static_cast<std::size_t>(axis)];
    for (int off = 0; off < 2; ++off) {
      const Index node = node_of(space, pos, off, axis);
      if (node < 0) continue;
      idx[static_cast<std::size_t>(axis)] = node;
      t.emplace_back(e, nodes.linear(idx), off == 1 ? inv_h : -inv_h);
    }
  }
  SparseMatrix d(edges.size(), nodes.size());
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

SparseMatrix edge_average(const GalerkinSpace& space, int axis) {
  const Layout nodes = node_layout(space);
  const Layout edges = edge_layout(space, axis);
  std::vector<Triplet> t;
  for (Index e = 0; e < edges.size(); ++e) {
    auto idx = edges.multi(e);
    const Index pos = idx[static_cast<std::size_t>(axis)];
    std::vector<Index> adjacent;
    for (int off = 0; off < 2; ++off) {
      const Index node = node_of(space, pos, off, axis);
      if (node < 0) continue;
      idx[static_cast<std::size_t>(axis)] = node;
      adjacent.push_back(nodes.linear(idx));
    }
    for (Index a : adjacent) t.emplace_back(e, a, 1.0 / static_cast<double>(adjacent.size()));
  }
  SparseMatrix m(edges.size(), nodes.size());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

namespace {

template <typename Visit>
void for_each_corner(const GalerkinSpace& space, const std::vector<Index>& cell, Visit&& visit) {
  const int d = space.dim();
  const Layout nodes = node_layout(space);
  for (int mask = 0; mask < (1 << d); ++mask) {
    std::vector<Index> idx(static_cast<std::size_t>(d));
    bool inside = true;
    for (int a = 0; a < d; ++a) {
      const Index node = node_of(space, cell[static_cast<std::size_t>(a)], (mask >> a) & 1, a);
      if (node < 0) inside = false;
      idx[static_cast<std::size_t>(a)] = node;
    }
    visit(mask, inside ? nodes.linear(idx) : Index{-1});
  }
}

}  // namespace

SparseMatrix cell_gradient(const GalerkinSpace& space, int axis) {
  const Layout cells = cell_layout(space);
  const int d = space.dim();
  const double scale = 1.0 / (space.spacing()[static_cast<std::size_t>(axis)] *
                              static_cast<double>(1 << (d - 1)));
  std::vector<Triplet> t;
  for (Index c = 0; c < cells.size(); ++c) {
    for_each_corner(space, cells.multi(c), [&](int mask, Index node) {
      if (node < 0) return;
      t.emplace_back(c, node, ((mask >> axis) & 1) ? scale : -scale);
    });
  }
  SparseMatrix g(cells.size(), node_layout(space).size());
  g.setFromTriplets(t.begin(), t.end());
  return g;
}

SparseMatrix cell_average(const GalerkinSpace& space) {
  const Layout cells = cell_layout(space);
  std::vector<Triplet> t;
  for (Index c = 0; c < cells.size(); ++c) {
    std::vector<Index> inside;
    for_each_corner(space, cells.multi(c), [&](int, Index node) {
      if (node >= 0) inside.push_back(node);
    });
    for (Index n : inside) t.emplace_back(c, n, 1.0 / static_cast<double>(inside.size()));
  }
  SparseMatrix m(cells.size(), node_layout(space).size());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

SparseMatrix centered_difference(const GalerkinSpace& space, int axis) {
  const Layout nodes = node_layout(space);
  const Index n_axis = space.axis_sizes()[static_cast<std::size_t>(axis)];
  const double half_inv_h = 0.5 / space.spacing()[static_cast<std::size_t>(axis)];
  std::vector<Triplet> t;
  for (Index i = 0; i < nodes.size(); ++i) {
    auto idx = nodes.multi(i);
    const Index pos = idx[static_cast<std::size_t>(axis)];
    if (neumann(space) && (pos == 0 || pos == n_axis - 1)) continue;
    if (pos + 1 < n_axis) {
      idx[static_cast<std::size_t>(axis)] = pos + 1;
      t.emplace_back(i, nodes.linear(idx), half_inv_h);
    }
    if (pos > 0) {
      idx[static_cast<std::size_t>(axis)] = pos - 1;
      t.emplace_back(i, nodes.linear(idx), -half_inv_h);
    }
  }
  SparseMatrix c(nodes.size(), nodes.size());
  c.setFromTriplets(t.begin(), t.end());
  return c;
}

}  // namespace lpspde::grid
