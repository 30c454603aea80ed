#include "lpspde/noise.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lpspde {

namespace {

constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t counter_bits(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t substream,
                           std::uint64_t counter) {
  std::uint64_t key = mix64(seed + golden);
  key = mix64(key ^ (stream_id * 0xD1B54A32D192ED03ULL + 1));
  key = mix64(key ^ (substream * 0xAEF17502108EF2D9ULL + 2));
  return mix64(key + (counter + 1) * golden);
}

}  // namespace

double counter_uniform(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t substream,
                       std::uint64_t counter) {
  const std::uint64_t bits = counter_bits(seed, stream_id, substream, counter);
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("normal_quantile: argument outside (0, 1)");
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x;
  if (u < low) {
    const double q = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= 1.0 - low) {
    const double q = u - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-u));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - u;
  const double g = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - g / (1.0 + 0.5 * x * g);
}

double counter_normal(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t substream,
                      std::uint64_t counter) {
  return normal_quantile(counter_uniform(seed, stream_id, substream, counter));
}

WienerStream::WienerStream(Index k_trunc, double dt, std::uint64_t seed, std::uint64_t stream_id)
    : k_trunc_(k_trunc), dt_(dt), seed_(seed), stream_id_(stream_id) {
  if (k_trunc < 1) throw std::invalid_argument("WienerStream: K must be at least 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("WienerStream: dt must be positive");
  base_scale_ = std::exp2(std::floor(std::log2(std::sqrt(dt))));
}

double WienerStream::quantum(int level) const { return std::ldexp(base_scale_, -32 - level); }

double WienerStream::increment(std::uint64_t step, Index k) const {
  const auto kk = static_cast<std::uint64_t>(k);
  const auto K = static_cast<std::uint64_t>(k_trunc_);
  if (level_ == 0) {
    const double q = quantum(0);
    const double z = counter_normal(seed_, stream_id_, 0, step * K + kk);
    return std::nearbyint(std::sqrt(dt_) * z / q) * q;
  }
  WienerStream parent = *this;
  parent.level_ = level_ - 1;
  parent.dt_ = 2.0 * dt_;
  const std::uint64_t coarse = step / 2;
  const double half = 0.5 * parent.increment(coarse, k);
  const double q = quantum(level_);
  const double z = counter_normal(seed_, stream_id_, static_cast<std::uint64_t>(level_), coarse * K + kk);
  const double xi = std::nearbyint(0.5 * std::sqrt(parent.dt_) * z / q) * q;
  return step % 2 == 0 ? half + xi : half - xi;
}

void WienerStream::increments(std::uint64_t step, Eigen::Ref<Vector> out) const {
  if (out.size() != k_trunc_) throw std::invalid_argument("increments: output length differs from K");
  for (Index k = 0; k < k_trunc_; ++k) out(k) = increment(step, k);
}

WienerStream WienerStream::refined() const {
  WienerStream r = *this;
  r.level_ = level_ + 1;
  r.dt_ = 0.5 * dt_;
  return r;
}

WienerStream WienerStream::with_stream_id(std::uint64_t stream_id) const {
  WienerStream r = *this;
  r.stream_id_ = stream_id;
  return r;
}

Matrix sample_increments(const WienerStream& stream, Index n_steps) {
  if (n_steps < 1) throw std::invalid_argument("sample_increments: n_steps must be positive");
  Matrix out(n_steps, stream.k_trunc());
  for (Index s = 0; s < n_steps; ++s)
    for (Index k = 0; k < stream.k_trunc(); ++k)
      out(s, k) = stream.increment(static_cast<std::uint64_t>(s), k);
  return out;
}

Matrix refine(const Eigen::Ref<const Matrix>& increments, const WienerStream& stream) {
  if (increments.cols() != stream.k_trunc())
    throw std::invalid_argument("refine: increment matrix has " + std::to_string(increments.cols()) +
                                " columns, stream has K = " + std::to_string(stream.k_trunc()));
  const WienerStream fine = stream.refined();
  Matrix out(2 * increments.rows(), increments.cols());
  for (Index s = 0; s < increments.rows(); ++s) {
    for (Index k = 0; k < increments.cols(); ++k) {
      // The fine stream derives its halves from its own parent path; re-deriving
      // xi from it keeps refine consistent with fine.increment().
      const double half = 0.5 * increments(s, k);
      const double xi = fine.increment(2 * static_cast<std::uint64_t>(s), k) -
                        0.5 * stream.increment(static_cast<std::uint64_t>(s), k);
      out(2 * s, k) = half + xi;
      out(2 * s + 1, k) = half - xi;
    }
  }
  return out;
}

Matrix coarsen(const Eigen::Ref<const Matrix>& increments) {
  if (increments.rows() % 2 != 0) throw std::invalid_argument("coarsen: odd number of steps");
  Matrix out(increments.rows() / 2, increments.cols());
  for (Index s = 0; s < out.rows(); ++s) out.row(s) = increments.row(2 * s) + increments.row(2 * s + 1);
  return out;
}

}  // namespace lpspde
