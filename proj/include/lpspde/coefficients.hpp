#pragma once

#include "lpspde/gelfand.hpp"

#include <array>
#include <string>
#include <vector>

namespace lpspde {

/// Coefficient array over grid points and the index slots (i, j, alpha, beta, k).
/// A constant field stores a single point that is broadcast to every node.
class CoefficientField {
 public:
  enum Slot { i_slot = 0, j_slot, alpha_slot, beta_slot, k_slot };
  using Extents = std::array<Index, 5>;

  CoefficientField() = default;
  /// Constant field, all entries zero.
  explicit CoefficientField(const Extents& extents);
  /// Space-dependent field over `n_points` nodes, all entries zero.
  CoefficientField(const Extents& extents, Index n_points);

  static CoefficientField constant(const Extents& extents, double value);

  const Extents& extents() const { return extents_; }
  Index extent(Slot s) const { return extents_[s]; }
  Index n_points() const { return n_points_; }
  bool is_constant() const { return constant_; }

  double operator()(Index point, Index i, Index j, Index a, Index b, Index k) const;
  double& at(Index point, Index i, Index j, Index a, Index b, Index k);
  /// Sets the entry at every point.
  void set_everywhere(Index i, Index j, Index a, Index b, Index k, double value);

  /// Values of one slot combination at each of `n_nodes` nodes.
  Vector nodal(Index n_nodes, Index i, Index j, Index a, Index b, Index k) const;

  /// Throws on non-finite entries or a point count different from `n_nodes`.
  void validate(Index n_nodes, const std::string& name) const;

 private:
  Index offset(Index point, Index i, Index j, Index a, Index b, Index k) const;

  Extents extents_{1, 1, 1, 1, 1};
  Index n_points_ = 1;
  bool constant_ = true;
  std::vector<double> values_ = std::vector<double>(1, 0.0);
};

/// Reads a field from CSV with header `point,i,j,alpha,beta,k,value`. A point
/// entry of `*` applies to every point; a file whose rows all use `*` yields a
/// constant field. Extents are inferred from the largest indices unless given.
CoefficientField load_coefficient_csv(const std::string& path, Index n_points = 0);

}  // namespace lpspde
