#pragma once

#include "lpspde/gelfand.hpp"

#include <cstdint>

namespace lpspde {

/// Counter-based generator: a pure function of (seed, stream, substream, counter).
/// Returns a standard normal deviate through the inverse normal CDF.
double counter_normal(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t substream,
                      std::uint64_t counter);

/// Uniform deviate in (0, 1) from the same counter construction.
double counter_uniform(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t substream,
                       std::uint64_t counter);

/// Inverse of the standard normal CDF, accurate to a few ulps on (0, 1).
double normal_quantile(double u);

/// Truncated cylindrical Wiener process: K independent scalar Brownian
/// motions sampled on a uniform time grid.
///
/// Increments are rounded to a dyadic quantum tied to the coarsest step, so
/// that Brownian-bridge bisection is exact in floating point: the two halves
/// of a refined increment always sum to the coarse increment bit for bit.
class WienerStream {
 public:
  WienerStream(Index k_trunc, double dt, std::uint64_t seed, std::uint64_t stream_id);

  Index k_trunc() const { return k_trunc_; }
  double dt() const { return dt_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  /// Number of bisections applied since construction.
  int level() const { return level_; }

  /// Increment of coordinate k over step [step dt, (step+1) dt).
  double increment(std::uint64_t step, Index k) const;

  /// Writes the increments of one step into `out` (length K).
  void increments(std::uint64_t step, Eigen::Ref<Vector> out) const;

  /// The same Brownian path viewed on the grid with step dt/2.
  WienerStream refined() const;

  /// Stream with a different path index and the same seed and grid.
  WienerStream with_stream_id(std::uint64_t stream_id) const;

 private:
  double quantum(int level) const;

  Index k_trunc_;
  double dt_;
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  int level_ = 0;
  double base_scale_ = 0.0;
};

/// n_steps x K matrix of increments, rows indexed by step.
Matrix sample_increments(const WienerStream& stream, Index n_steps);

/// Brownian-bridge bisection of `increments` (sampled from `stream`): each
/// coarse increment dW becomes dW/2 + xi and dW/2 - xi with xi ~ N(0, dt/4)
/// drawn from the refinement substream. Returns a 2 n_steps x K matrix.
Matrix refine(const Eigen::Ref<const Matrix>& increments, const WienerStream& stream);

/// Sums consecutive row pairs; the inverse of refine.
Matrix coarsen(const Eigen::Ref<const Matrix>& increments);

}  // namespace lpspde
