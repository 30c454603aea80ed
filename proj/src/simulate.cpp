#include "lpspde/simulate.hpp"

#include "lpspde/format.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace lpspde {

std::string to_string(Method method) {
  switch (method) {
    case Method::semi_implicit_em: return "semi-implicit-em";
    case Method::explicit_em: return "explicit-em";
    case Method::tamed_em: return "tamed-em";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  if (name == "semi-implicit-em") return Method::semi_implicit_em;
  if (name == "explicit-em") return Method::explicit_em;
  if (name == "tamed-em") return Method::tamed_em;
  throw std::invalid_argument("unknown scheme method '" + name + "'");
}

Index SchemeConfig::n_steps() const {
  validate();
  return static_cast<Index>(std::llround(T / dt));
}

void SchemeConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("scheme: dt must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("scheme: T must be positive");
  if (dt > T * (1.0 + 1e-12)) throw std::invalid_argument("scheme: dt exceeds T");
  if (record_stride < 1) throw std::invalid_argument("scheme: record_stride must be positive");
  const double ratio = T / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
    throw std::invalid_argument("scheme: T must be an integer multiple of dt");
}

Stepper::Stepper(const OperatorPair& pair, const SchemeConfig& scheme) : pair_(&pair), scheme_(scheme) {
  scheme_.validate();
  const Index n = pair.size();
  const Vector& w = pair.sp().weights();
  drift_.resize(n);
  scratch_.resize(n);
  rhs_.resize(n);
  noise_.setZero(n);
  if (scheme_.method != Method::semi_implicit_em) return;
  const SparseMatrix& L = pair.linear_part;
  const bool empty = L.rows() == 0 || L.nonZeros() == 0;
  diagonal_ = true;
  if (!empty) {
    for (Index c = 0; c < L.outerSize() && diagonal_; ++c)
      for (SparseMatrix::InnerIterator it(L, c); it; ++it)
        if (it.row() != it.col() && it.value() != 0.0) {
          diagonal_ = false;
          break;
        }
  }
  if (diagonal_) {
    inv_diag_.resize(n);
    for (Index i = 0; i < n; ++i) {
      const double d = w(i) - scheme_.dt * (empty ? 0.0 : L.coeff(i, i));
      if (!(d > 0.0)) throw std::runtime_error("semi-implicit system is not positive definite");
      inv_diag_(i) = 1.0 / d;
    }
    return;
  }
  SparseMatrix system = -scheme_.dt * L;
  for (Index i = 0; i < n; ++i) system.coeffRef(i, i) += w(i);
  system.makeCompressed();
  lu_ = std::make_shared<Eigen::SparseLU<SparseMatrix>>();
  lu_->compute(system);
  if (lu_->info() != Eigen::Success) throw std::runtime_error("semi-implicit system factorization failed");
}

void Stepper::advance(double t, const Vector& v, const Vector& dW, Vector& out) {
  const OperatorPair& pair = *pair_;
  const Vector& w = pair.sp().weights();
  const double dt = scheme_.dt;
  const Index n = v.size();
  if (pair.diffusion) {
    pair.diffusion(t, v, b_);
    noise_.noalias() = b_ * dW;
  } else {
    noise_.setZero(n);
  }
  if (scheme_.method == Method::semi_implicit_em) {
    if (pair.nonlinear_part) {
      pair.nonlinear_part(t, v, drift_);
      rhs_ = w.cwiseProduct(v + noise_) + dt * drift_;
    } else {
      rhs_ = w.cwiseProduct(v + noise_);
    }
    if (diagonal_) {
      out = inv_diag_.cwiseProduct(rhs_);
    } else {
      out = lu_->solve(rhs_);
    }
    return;
  }
  if (pair.linear_part.nonZeros() > 0) {
    drift_.noalias() = pair.linear_part * v;
  } else {
    drift_.setZero(n);
  }
  if (pair.nonlinear_part) {
    pair.nonlinear_part(t, v, scratch_);
    drift_ += scratch_;
  }
  drift_.array() /= w.array();
  double factor = dt;
  if (scheme_.method == Method::tamed_em) factor = dt / (1.0 + dt * h_norm(pair.sp(), drift_));
  out = v + factor * drift_ + noise_;
}

StateVector step(const OperatorPair& pair, const SchemeConfig& scheme, double t, const Vector& v, const Vector& dW) {
  if (dW.size() != pair.noise_dim) throw std::invalid_argument("step: dW has the wrong length");
  Stepper stepper(pair, scheme);
  Vector out(v.size());
  stepper.advance(t, v, dW, out);
  return out;
}

namespace {

void check_noise(const OperatorPair& pair, const SchemeConfig& scheme, const Vector& u0, const WienerStream& noise) {
  pair.sp().check(u0);
  if (noise.k_trunc() != pair.noise_dim) throw std::invalid_argument("noise dimension differs from the pair's");
  if (std::abs(noise.dt() - scheme.dt) > 1e-12 * scheme.dt)
    throw std::invalid_argument("noise stream was sampled at a different dt");
}

}  // namespace

PathFunctionals simulate_path(const OperatorPair& pair, const SchemeConfig& scheme, const Vector& u0,
                              const WienerStream& noise, const PathOptions& options) {
  check_noise(pair, scheme, u0, noise);
  const Index N = scheme.n_steps();
  const double dt = scheme.dt;
  Stepper stepper(pair, scheme);
  PathFunctionals f;
  Vector v = u0, next(u0.size()), dW(pair.noise_dim);
  auto record = [&](Index n) {
    f.sup_h = std::max(f.sup_h, h_norm(pair.sp(), v));
    if (options.keep_snapshots) f.snapshots.push_back({static_cast<double>(n) * dt, v});
  };
  record(0);
  for (Index n = 0; n < N; ++n) {
    const double t = static_cast<double>(n) * dt;
    if (options.v_integral) f.int_v_alpha += dt * std::pow(pair_v_norm(pair, v), pair.alpha);
    noise.increments(static_cast<std::uint64_t>(n), dW);
    stepper.advance(t, v, dW, next);
    if (!next.allFinite()) {
      f.diverged = true;
      f.last_finite_time = t;
      f.terminal = v;
      return f;
    }
    v.swap(next);
    if ((n + 1) % scheme.record_stride == 0 || n + 1 == N) record(n + 1);
  }
  f.last_finite_time = static_cast<double>(N) * dt;
  f.terminal = v;
  return f;
}

void write_trajectory_csv(std::ostream& out, const std::vector<Snapshot>& snapshots) {
  out << "t";
  const Index n = snapshots.empty() ? 0 : snapshots.front().v.size();
  for (Index i = 0; i < n; ++i) out << ",coeff_" << i;
  out << "\n";
  for (const Snapshot& s : snapshots) {
    out << format_number(s.t);
    for (Index i = 0; i < s.v.size(); ++i) out << ',' << format_number(s.v(i));
    out << "\n";
  }
}

double ito_residual(const OperatorPair& pair, const SchemeConfig& scheme, const Vector& u0,
                    const WienerStream& noise, double p) {
  if (!(p >= 2.0)) throw std::invalid_argument("ito_residual needs p >= 2");
  check_noise(pair, scheme, u0, noise);
  const GalerkinSpace& sp = pair.sp();
  const Index N = scheme.n_steps();
  const double dt = scheme.dt;
  Stepper stepper(pair, scheme);
  Vector x = u0, next(u0.size()), dW(pair.noise_dim), drift(u0.size());
  double rhs = std::pow(h_norm(sp, x), p);
  for (Index n = 0; n < N; ++n) {
    noise.increments(static_cast<std::uint64_t>(n), dW);
    stepper.advance(static_cast<double>(n) * dt, x, dW, next);
    if (!next.allFinite()) throw std::runtime_error("ito_residual: path diverged");
    const Vector& dz = stepper.last_noise();
    drift = next - x - dz;  // realized drift increment Y dt
    const double x2 = h_norm_squared(sp, x);
    if (x2 > 0.0) {
      const double pow2 = std::pow(x2, 0.5 * p - 1.0);
      const double xz = h_inner(sp, x, dz);
      rhs += p * pow2 * (h_inner(sp, x, drift) + xz) + 0.5 * p * pow2 * h_norm_squared(sp, dz) +
             0.5 * p * (p - 2.0) * (pow2 / x2) * xz * xz;
    } else if (p == 2.0) {
      // ‖X‖^{p-2} = 1 at p = 2; the (p-2) term carries the zero convention.
      rhs += h_norm_squared(sp, dz);
    }
    x.swap(next);
  }
  return std::abs(std::pow(h_norm(sp, x), p) - rhs);
}

std::optional<StrongOrder> strong_convergence_order(const OperatorPair& pair, const Vector& u0, double base_dt,
                                                    double T, int levels, Index n_paths, std::uint64_t seed) {
  if (levels < 2) throw std::invalid_argument("strong_convergence_order needs at least two levels");
  if (n_paths < 1) throw std::invalid_argument("strong_convergence_order needs at least one path");
  const bool exact = static_cast<bool>(pair.exact_solution);
  const int finest = exact ? levels - 1 : levels + 1;
  StrongOrder result;
  std::vector<double> sum(static_cast<std::size_t>(levels), 0.0);
  PathOptions opts;
  opts.v_integral = false;
  for (Index path = 0; path < n_paths; ++path) {
    WienerStream stream(pair.noise_dim, base_dt, seed, static_cast<std::uint64_t>(path));
    std::vector<Vector> terminal;
    for (int l = 0; l <= finest; ++l) {
      SchemeConfig scheme;
      scheme.dt = stream.dt();
      scheme.T = T;
      scheme.record_stride = std::numeric_limits<Index>::max() / 2;
      terminal.push_back(simulate_path(pair, scheme, u0, stream, opts).terminal);
      if (l < finest) stream = stream.refined();
    }
    Vector reference;
    if (exact) {
      WienerStream base(pair.noise_dim, base_dt, seed, static_cast<std::uint64_t>(path));
      SchemeConfig coarse;
      coarse.dt = base_dt;
      coarse.T = T;
      const Matrix inc = sample_increments(base, coarse.n_steps());
      const Vector w = inc.colwise().sum().transpose();
      reference = pair.exact_solution(T, u0, w);
    } else {
      reference = terminal.back();
    }
    for (int l = 0; l < levels; ++l)
      sum[static_cast<std::size_t>(l)] += h_norm(pair.sp(), terminal[static_cast<std::size_t>(l)] - reference);
  }
  for (int l = 0; l < levels; ++l) {
    result.dts.push_back(base_dt / std::ldexp(1.0, l));
    result.errors.push_back(sum[static_cast<std::size_t>(l)] / static_cast<double>(n_paths));
  }
  for (double e : result.errors)
    if (!(e > 0.0)) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (int l = 0; l < levels; ++l) {
    mx += std::log(result.dts[static_cast<std::size_t>(l)]);
    my += std::log(result.errors[static_cast<std::size_t>(l)]);
  }
  mx /= levels;
  my /= levels;
  double sxy = 0.0, sxx = 0.0;
  for (int l = 0; l < levels; ++l) {
    const double dx = std::log(result.dts[static_cast<std::size_t>(l)]) - mx;
    sxy += dx * (std::log(result.errors[static_cast<std::size_t>(l)]) - my);
    sxx += dx * dx;
  }
  result.order = sxy / sxx;
  return result;
}

}  // namespace lpspde
