#include "lpspde/moments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <thread>

namespace lpspde {

DivergenceDiagnostic divergence_diagnostic(const std::vector<double>& samples, double p,
                                           const DivergenceOptions& options) {
  DivergenceDiagnostic d;
  const auto n = static_cast<Index>(samples.size());
  if (n < options.min_samples) return d;
  d.available = true;

  std::vector<double> sorted(samples);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto k = std::max<Index>(1, static_cast<Index>(options.tail_fraction * static_cast<double>(n)));
  const double threshold = sorted[static_cast<std::size_t>(std::min(k, n - 1))];
  if (threshold > 0.0) {
    double xi = 0.0;
    for (Index i = 0; i < k; ++i) xi += std::log(sorted[static_cast<std::size_t>(i)] / threshold);
    xi /= static_cast<double>(k);
    d.tail_index = xi > 0.0 ? 1.0 / xi : std::numeric_limits<double>::infinity();
    if (*d.tail_index <= p) d.flag = true;
  }

  const Index n0 = n >> options.doublings;
  if (n0 >= 1) {
    double sum = 0.0;
    Index used = 0;
    double previous = 0.0;
    for (int j = 0; j <= options.doublings; ++j) {
      const Index upto = n0 << j;
      for (; used < upto; ++used) sum += std::pow(samples[static_cast<std::size_t>(used)], p);
      const double mean = sum / static_cast<double>(upto);
      if (j > 0 && previous > 0.0 && mean > options.doubling_factor * previous) d.flag = true;
      previous = mean;
    }
  }
  return d;
}

MomentEstimate moment_from_samples(const std::vector<double>& samples, const std::vector<bool>& diverged, double p,
                                   const DivergenceOptions& options) {
  if (samples.size() != diverged.size()) throw std::invalid_argument("samples and divergence flags differ in length");
  const auto n = static_cast<Index>(samples.size());
  if (n < n_batches) throw std::invalid_argument("moment estimates need at least 16 paths");
  MomentEstimate e;
  e.p = p;
  e.n_paths = n;
  std::vector<double> finite;
  double total = 0.0;
  Index count = 0;
  std::vector<double> batch_means;
  for (int b = 0; b < n_batches; ++b) {
    const Index lo = b * n / n_batches, hi = (b + 1) * n / n_batches;
    double bs = 0.0;
    Index bc = 0;
    for (Index i = lo; i < hi; ++i) {
      if (diverged[static_cast<std::size_t>(i)]) {
        ++e.n_diverged;
        continue;
      }
      const double x = samples[static_cast<std::size_t>(i)];
      const double xp = std::pow(x, p);
      bs += xp;
      ++bc;
      finite.push_back(x);
    }
    total += bs;
    count += bc;
    if (bc > 0) batch_means.push_back(bs / static_cast<double>(bc));
  }
  if (count == 0) {
    e.value = std::numeric_limits<double>::infinity();
    e.ci_half_width = std::numeric_limits<double>::infinity();
    e.divergence_flag = true;
    return e;
  }
  e.value = total / static_cast<double>(count);
  if (batch_means.size() >= 2) {
    const auto m = static_cast<double>(batch_means.size());
    double mean = 0.0;
    for (double x : batch_means) mean += x;
    mean /= m;
    double var = 0.0;
    for (double x : batch_means) var += (x - mean) * (x - mean);
    var /= m - 1.0;
    e.ci_half_width = batch_t_quantile * std::sqrt(var / m);
  }
  const DivergenceDiagnostic diag = divergence_diagnostic(finite, p, options);
  e.diagnostic_available = diag.available;
  e.tail_index_est = diag.tail_index;
  e.divergence_flag = e.n_diverged > 0 || diag.flag;
  return e;
}

void parallel_for(Index n, int workers, const std::function<void(Index)>& body) {
  if (workers < 1) throw std::invalid_argument("worker count must be positive");
  const Index w = std::min<Index>(workers, std::max<Index>(n, 1));
  if (w <= 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(w));
  for (Index t = 0; t < w; ++t) {
    threads.emplace_back([&, t] {
      try {
        for (Index i = t * n / w; i < (t + 1) * n / w; ++i) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

std::vector<PathSummary> run_paths(const OperatorPair& pair, const SchemeConfig& scheme, const Vector& u0,
                                   const MonteCarloOptions& options) {
  if (options.n_paths < 1) throw std::invalid_argument("n_paths must be positive");
  if (options.coefficient < 0 || options.coefficient >= pair.size())
    throw std::invalid_argument("coefficient index out of range");
  scheme.validate();
  std::vector<PathSummary> out(static_cast<std::size_t>(options.n_paths));
  PathOptions path_options;
  path_options.v_integral = options.v_integral;
  parallel_for(options.n_paths, options.workers, [&](Index i) {
    const WienerStream stream(pair.noise_dim, scheme.dt, options.master_seed, static_cast<std::uint64_t>(i));
    const PathFunctionals f = simulate_path(pair, scheme, u0, stream, path_options);
    PathSummary& s = out[static_cast<std::size_t>(i)];
    s.sup_h = f.sup_h;
    s.int_v_alpha = f.int_v_alpha;
    s.terminal_h = h_norm(pair.sp(), f.terminal);
    s.terminal_coefficient = std::abs(f.terminal(options.coefficient));
    s.diverged = f.diverged;
  });
  return out;
}

namespace {

template <typename Get>
MomentEstimate summarize(const std::vector<PathSummary>& paths, double p, Get get) {
  std::vector<double> x;
  std::vector<bool> div;
  for (const PathSummary& s : paths) {
    x.push_back(get(s));
    div.push_back(s.diverged);
  }
  return moment_from_samples(x, div, p);
}

MonteCarloOptions mc(Index n_paths, std::uint64_t seed, int workers, bool v_integral, Index coefficient = 0) {
  MonteCarloOptions o;
  o.n_paths = n_paths;
  o.master_seed = seed;
  o.workers = workers;
  o.v_integral = v_integral;
  o.coefficient = coefficient;
  return o;
}

}  // namespace

MomentEstimate estimate_sup_moment(const OperatorPair& pair, const SchemeConfig& scheme, const Vector& u0, double p,
                                   Index n_paths, std::uint64_t master_seed, int workers) {
  const auto paths = run_paths(pair, scheme, u0, mc(n_paths, master_seed, workers, false));
  return summarize(paths, p, [](const PathSummary& s) { return s.sup_h; });
}

MomentEstimate estimate_v_moment(const OperatorPair& pair, const SchemeConfig& scheme, const Vector& u0, double p,
                                 Index n_paths, std::uint64_t master_seed, int workers) {
  const auto paths = run_paths(pair, scheme, u0, mc(n_paths, master_seed, workers, true));
  MomentEstimate e = summarize(paths, 0.5 * p, [](const PathSummary& s) { return s.int_v_alpha; });
  e.p = p;
  return e;
}

MomentEstimate estimate_terminal_moment(const OperatorPair& pair, const SchemeConfig& scheme, const Vector& u0,
                                        double q, Index n_paths, std::uint64_t master_seed, int workers) {
  const auto paths = run_paths(pair, scheme, u0, mc(n_paths, master_seed, workers, false));
  return summarize(paths, q, [](const PathSummary& s) { return s.terminal_h; });
}

MomentEstimate estimate_coefficient_moment(const OperatorPair& pair, const SchemeConfig& scheme, const Vector& u0,
                                           Index j, double q, Index n_paths, std::uint64_t master_seed,
                                           int workers) {
  const auto paths = run_paths(pair, scheme, u0, mc(n_paths, master_seed, workers, false, j));
  return summarize(paths, q, [](const PathSummary& s) { return s.terminal_coefficient; });
}

double exact_spectral_moment(double gamma, double q, double t, double k, double u0_k) {
  if (!(q >= 0.0)) throw std::invalid_argument("exact_spectral_moment needs q >= 0");
  if (q == 0.0) return 1.0;
  const double k2 = k * k;
  return std::pow(std::abs(u0_k), q) * std::exp(q * k2 * t * (2.0 * gamma * gamma * (q - 1.0) - 1.0));
}

double truncated_second_moment(double gamma, double t, const std::function<double(int)>& u0, int K_modes) {
  if (K_modes < 0) throw std::invalid_argument("K_modes must be nonnegative");
  double s = exact_spectral_moment(gamma, 2.0, t, 0.0, u0(0));
  for (int k = 1; k <= K_modes; ++k)
    s += exact_spectral_moment(gamma, 2.0, t, k, u0(k)) + exact_spectral_moment(gamma, 2.0, t, k, u0(-k));
  return s;
}

double apriori_rhs(double C, double T, double u0_p_moment, double f_integral_p2_moment) {
  return C * std::exp(C * T) * (u0_p_moment + f_integral_p2_moment);
}

}  // namespace lpspde
