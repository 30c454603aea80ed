#include "lpspde/coercivity.hpp"

#include "lpspde/fourier.hpp"
#include "lpspde/grid.hpp"
#include "lpspde/noise.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace lpspde {

namespace {

constexpr std::uint64_t sub_family = 1;
constexpr std::uint64_t sub_scale = 2;
constexpr std::uint64_t sub_mode = 3;
constexpr std::uint64_t sub_coeff = 4;

}  // namespace

VectorSampler::VectorSampler(const OperatorPair& pair, std::uint64_t seed)
    : space_(pair.space), project_(pair.project_to_V), seed_(seed) {}

double VectorSampler::normal(Index i, std::uint64_t sub, Index counter) const {
  return counter_normal(seed_, static_cast<std::uint64_t>(i), sub, static_cast<std::uint64_t>(counter));
}

double VectorSampler::uniform(Index i, std::uint64_t sub, Index counter) const {
  return counter_uniform(seed_, static_cast<std::uint64_t>(i), sub, static_cast<std::uint64_t>(counter));
}

Vector VectorSampler::raw(Index i) const {
  const GalerkinSpace& sp = *space_;
  const Index n = sp.size();
  const Index S = sp.scalar_size();
  const int d = sp.dim();
  const int family = static_cast<int>(i % 4);
  Vector v = Vector::Zero(n);
  auto pick = [&](Index counter, Index range) {
    return std::min<Index>(range - 1, static_cast<Index>(uniform(i, sub_mode, counter) * static_cast<double>(range)));
  };
  if (family == 0) {
    for (Index j = 0; j < n; ++j) v(j) = normal(i, sub_coeff, j);
    return v;
  }
  if (family == 3) {
    // Smooth field: Gaussian coefficients damped by wavenumber (Fourier) or a
    // few low discrete modes (grids).
    if (sp.is_fourier()) {
      const Vector k2 = sp.wavenumber_squared();
      for (Index j = 0; j < n; ++j) v(j) = normal(i, sub_coeff, j) / (1.0 + k2(j % S));
      return v;
    }
  }
  const int comp = static_cast<int>(pick(0, sp.components()));
  if (sp.is_fourier()) {
    Index j = 0;
    if (family == 1) {
      j = pick(1, S);
    } else if (family == 2) {
      // Highest index along each axis, sine or cosine partner.
      const grid::Layout layout{sp.axis_sizes()};
      std::vector<Index> idx(static_cast<std::size_t>(d));
      for (int a = 0; a < d; ++a) {
        const Index na = sp.axis_sizes()[static_cast<std::size_t>(a)];
        idx[static_cast<std::size_t>(a)] = na - 1 - pick(2 + a, std::min<Index>(2, na));
      }
      j = layout.linear(idx);
    }
    if (family == 3) j = pick(1, S);
    v(comp * S + j) = 1.0;
    return v;
  }
  // Grids: products of discrete eigenmodes per axis.
  const bool neumann = sp.kind() == SpaceKind::fd_neumann_interval;
  const Matrix x = sp.node_coordinates();
  std::vector<Index> modes(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    const Index na = sp.axis_sizes()[static_cast<std::size_t>(a)];
    const Index top = neumann ? na - 1 : na;
    Index k = 1;
    if (family == 1) k = 1 + pick(1 + a, top);
    if (family == 2) k = top - pick(1 + a, std::min<Index>(2, top));
    if (family == 3) k = 1 + pick(1 + a, std::min<Index>(3, top));
    modes[static_cast<std::size_t>(a)] = neumann && family == 1 ? k - 1 : k;
  }
  for (Index p = 0; p < S; ++p) {
    double val = 1.0;
    for (int a = 0; a < d; ++a) {
      const double L = sp.lengths()[static_cast<std::size_t>(a)];
      const double arg = std::numbers::pi * static_cast<double>(modes[static_cast<std::size_t>(a)]) * x(p, a) / L;
      val *= neumann ? std::cos(arg) : std::sin(arg);
    }
    v(comp * S + p) = val;
  }
  if (family == 3) {
    for (Index p = 0; p < S; ++p) v(comp * S + p) *= 1.0 + 0.5 * normal(i, sub_coeff, p);
  }
  return v;
}

Vector VectorSampler::draw(Index i) const {
  Vector v = raw(i);
  if (project_) project_(v);
  double h = h_norm(*space_, v);
  if (!(h > 1e-12)) {
    // Projection removed everything (e.g. a pure gradient mode); fall back to
    // a Gaussian draw.
    for (Index j = 0; j < v.size(); ++j) v(j) = normal(i, sub_coeff + 1, j);
    if (project_) project_(v);
    h = h_norm(*space_, v);
  }
  const double scale = std::pow(10.0, 2.0 * uniform(i, sub_scale, 0) - 1.0);
  (void)sub_family;
  return (scale / h) * v;
}

namespace {

struct Parts {
  double two_av_v;
  double hs;
  double adj;  // ||B* (v / ||v||)||^2
};

Parts evaluate_parts(const OperatorPair& pair, double t, const Vector& v) {
  const double h2 = h_norm_squared(pair.sp(), v);
  if (!(h2 > 0.0)) throw std::invalid_argument("coercivity: v = 0 is excluded");
  const Vector a = apply_A(pair, t, v);
  const Matrix b = apply_B(pair, t, v);
  const double hn = std::sqrt(h2);
  const Vector unit = v / hn;
  const Vector mv = riesz_dual(pair.sp(), unit);
  double adj = 0.0;
  for (Index k = 0; k < b.cols(); ++k) {
    double s = 0.0;
    for (Index i = 0; i < b.rows(); ++i) s += b(i, k) * mv(i);
    adj += s * s;
  }
  return {2.0 * duality_pair(pair.sp(), a, v), hs_norm_squared(pair.sp(), b), adj};
}

CoercivityReport run_coercivity(const OperatorPair& pair, double p, double theta, double K_c,
                                const VectorSampler& sampler, Index n, double t, bool pminus1) {
  if (n < 1) throw std::invalid_argument("coercivity audit needs at least one sample");
  if (!(p >= 2.0)) throw std::invalid_argument("coercivity audit needs p >= 2");
  CoercivityReport r;
  r.condition = pminus1 ? "H3-pminus1" : "H3";
  r.p = p;
  r.alpha = pair.alpha;
  r.theta = theta;
  r.K_c = K_c;
  r.n_samples = n;
  r.theta_fit = std::numeric_limits<double>::infinity();
  r.worst_margin = std::numeric_limits<double>::infinity();
  const double f = forcing_budget(pair, t);
  for (Index i = 0; i < n; ++i) {
    const Vector v = sampler.draw(i);
    const Parts parts = evaluate_parts(pair, t, v);
    const double lhs = pminus1 ? parts.two_av_v + (p - 1.0) * parts.hs
                               : parts.two_av_v + parts.hs + (p - 2.0) * parts.adj;
    const double vn = std::pow(pair_v_norm(pair, v), pair.alpha);
    const double h2 = h_norm_squared(pair.sp(), v);
    const double slack = f + K_c * h2 - lhs;
    const double margin = slack - theta * vn;
    const double scale = std::abs(lhs) + std::abs(theta) * vn + f + std::abs(K_c) * h2;
    r.worst_margin = std::min(r.worst_margin, margin);
    if (margin < -1e-9 * scale && r.violations.size() < max_witnesses) r.violations.push_back({v, margin});
    if (margin < -1e-9 * scale) r.passed = false;
    if (vn > 0.0) {
      r.theta_fit = std::min(r.theta_fit, slack / vn);
    } else if (slack < -1e-9 * scale) {
      r.theta_fit = -std::numeric_limits<double>::infinity();
    }
  }
  r.passed = r.violations.empty();
  return r;
}

}  // namespace

double coercivity_lhs(const OperatorPair& pair, double t, const Vector& v, double p) {
  if (!(p >= 2.0)) throw std::invalid_argument("coercivity_lhs needs p >= 2");
  const Parts parts = evaluate_parts(pair, t, v);
  return parts.two_av_v + parts.hs + (p - 2.0) * parts.adj;
}

double classical_lhs(const OperatorPair& pair, double t, const Vector& v) {
  const Parts parts = evaluate_parts(pair, t, v);
  return parts.two_av_v + parts.hs;
}

double pminus1_lhs(const OperatorPair& pair, double t, const Vector& v, double p) {
  const Parts parts = evaluate_parts(pair, t, v);
  return parts.two_av_v + (p - 1.0) * parts.hs;
}

CoercivityReport check_coercivity(const OperatorPair& pair, double p, double theta, double K_c,
                                  const VectorSampler& sampler, Index n, double t) {
  return run_coercivity(pair, p, theta, K_c, sampler, n, t, false);
}

CoercivityReport check_coercivity_pminus1(const OperatorPair& pair, double p, double theta, double K_c,
                                          const VectorSampler& sampler, Index n, double t) {
  return run_coercivity(pair, p, theta, K_c, sampler, n, t, true);
}

MonotonicityReport check_monotonicity(const OperatorPair& pair, const VectorSampler& sampler, Index n, double t) {
  MonotonicityReport r;
  r.n_samples = n;
  for (Index i = 0; i < n; ++i) {
    const Vector u = sampler.draw(2 * i);
    const Vector v = sampler.draw(2 * i + 1);
    const Vector w = u - v;
    const double w2 = h_norm_squared(pair.sp(), w);
    if (!(w2 > 0.0)) {
      r.ratio.push_back(0.0);
      r.growth.push_back(1.0);
      continue;
    }
    const Vector da = apply_A(pair, t, u) - apply_A(pair, t, v);
    const Matrix db = apply_B(pair, t, u) - apply_B(pair, t, v);
    const double lhs = 2.0 * duality_pair(pair.sp(), da, w) + hs_norm_squared(pair.sp(), db);
    const double growth = (1.0 + std::pow(pair_v_norm(pair, v), pair.alpha)) *
                          (1.0 + std::pow(h_norm(pair.sp(), v), pair.beta));
    r.ratio.push_back(lhs / w2);
    r.growth.push_back(growth);
    r.K_fit = std::max(r.K_fit, lhs / (growth * w2));
  }
  return r;
}

GrowthReport check_growth(const OperatorPair& pair, const VectorSampler& sampler, Index n, double t,
                          double tolerance) {
  GrowthReport r;
  r.n_samples = n;
  const DeclaredConstants dc = declared_constants(pair, 2.0);
  const double K_B_decl = dc.K_B.value_or(0.0);
  const double K_alpha_decl = dc.K_alpha.value_or(0.0);
  const double f = forcing_budget(pair, t);
  const double conj = pair.alpha / (pair.alpha - 1.0);
  for (Index i = 0; i < n; ++i) {
    const Vector v = sampler.draw(i);
    const double vn = std::pow(pair_v_norm(pair, v), pair.alpha);
    const double h2 = h_norm_squared(pair.sp(), v);
    const double hb = std::pow(std::sqrt(h2), pair.beta);
    const Vector a = apply_A(pair, t, v);
    const double an = std::pow(dual_norm(pair.sp(), a), conj);
    const double denom_a = (f + vn) * (1.0 + hb);
    if (denom_a > 0.0) r.K_A_fit = std::max(r.K_A_fit, an / denom_a);
    const double bn = hs_norm_squared(pair.sp(), apply_B(pair, t, v));
    if (vn > 0.0) r.K_alpha_fit = std::max(r.K_alpha_fit, (bn - f - K_B_decl * h2) / vn);
    if (h2 > 0.0) r.K_B_fit = std::max(r.K_B_fit, (bn - f - K_alpha_decl * vn) / h2);
  }
  if (dc.K_A && r.K_A_fit > *dc.K_A + tolerance) r.passed = false;
  if (dc.K_alpha && r.K_alpha_fit > *dc.K_alpha + tolerance) r.passed = false;
  if (dc.K_B && r.K_B_fit > *dc.K_B + tolerance) r.passed = false;
  return r;
}

HemicontinuityReport check_hemicontinuity(const OperatorPair& pair, const Vector& u, const Vector& v,
                                          const Vector& w, const std::vector<double>& lambdas, double t) {
  if (lambdas.size() < 4) throw std::invalid_argument("hemicontinuity needs at least four lambda values");
  auto g = [&](double lam) { return duality_pair(pair.sp(), apply_A(pair, t, u + lam * v), w); };
  HemicontinuityReport r;
  std::vector<double> vals;
  double scale = 0.0;
  for (double l : lambdas) {
    vals.push_back(g(l));
    scale = std::max(scale, std::abs(vals.back()));
  }
  scale = std::max(scale, 1e-300);
  // Divided differences, normalised by the value scale.
  std::vector<double> dd(vals);
  std::vector<double> xs(lambdas);
  for (int order = 1; order <= 3; ++order) {
    std::vector<double> next;
    for (std::size_t i = 0; i + 1 < dd.size(); ++i)
      next.push_back((dd[i + 1] - dd[i]) / (xs[i + static_cast<std::size_t>(order)] - xs[i]));
    dd = next;
    double span = 1.0;
    span = std::pow(lambdas.back() - lambdas.front(), order);
    double m = 0.0;
    for (double x : dd) m = std::max(m, std::abs(x) * span / scale);
    if (order == 2) r.max_second_difference = m;
    if (order == 3) r.max_third_difference = m;
  }
  double lo = *std::min_element(lambdas.begin(), lambdas.end());
  double hi = *std::max_element(lambdas.begin(), lambdas.end());
  for (int level = 0; level < 5; ++level) {
    const int cells = 4 << level;
    const double step = (hi - lo) / cells;
    double err = 0.0;
    double prev = g(lo);
    for (int c = 0; c < cells; ++c) {
      const double a = lo + c * step;
      const double next = g(a + step);
      const double mid = g(a + 0.5 * step);
      err = std::max(err, std::abs(mid - 0.5 * (prev + next)) / scale);
      prev = next;
    }
    r.refinement_errors.push_back(err);
  }
  r.continuous = true;
  for (std::size_t i = 1; i < r.refinement_errors.size(); ++i)
    if (r.refinement_errors[i] > r.refinement_errors[i - 1] * 1.01 + 1e-14) r.continuous = false;
  return r;
}

namespace {

Index field_points(std::initializer_list<const CoefficientField*> fields) {
  Index points = 1;
  for (const auto* f : fields) {
    if (f->is_constant()) continue;
    if (points != 1 && f->n_points() != points) throw std::invalid_argument("coefficient fields on different grids");
    points = f->n_points();
  }
  return points;
}

double value(const CoefficientField& f, Index point, Index i, Index j, Index a, Index b, Index k) {
  return f(f.is_constant() ? 0 : point, i, j, a, b, k);
}

double min_eig(const Matrix& m) {
  const Matrix s = 0.5 * (m + m.transpose());
  if (s.rows() == 1) return s(0, 0);
  return Eigen::SelfAdjointEigenSolver<Matrix>(s, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

}  // namespace

double ellipticity_min(const CoefficientField& a, const CoefficientField& b) {
  const Index d = a.extent(CoefficientField::i_slot);
  if (a.extent(CoefficientField::j_slot) != d || b.extent(CoefficientField::i_slot) != d)
    throw std::invalid_argument("ellipticity_min: a must be d x d and b must carry d entries");
  const Index K = b.extent(CoefficientField::k_slot);
  const Index points = field_points({&a, &b});
  double best = std::numeric_limits<double>::infinity();
  for (Index p = 0; p < points; ++p) {
    Matrix m(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) {
        double s = 2.0 * value(a, p, i, j, 0, 0, 0);
        for (Index k = 0; k < K; ++k) s -= value(b, p, i, 0, 0, 0, k) * value(b, p, j, 0, 0, 0, k);
        m(i, j) = s;
      }
    best = std::min(best, min_eig(m));
  }
  return best;
}

double msp_check(const CoefficientField& a, const CoefficientField& sigma, const CoefficientField& lambda,
                 double p, int resolution) {
  using CF = CoefficientField;
  const Index d = a.extent(CF::i_slot);
  const Index N = a.extent(CF::alpha_slot);
  if (sigma.extent(CF::i_slot) != d || sigma.extent(CF::alpha_slot) != N || sigma.extent(CF::beta_slot) != N)
    throw std::invalid_argument("msp_check: sigma shape differs from a");
  if (lambda.extents() != sigma.extents()) throw std::invalid_argument("msp_check: lambda shape differs from sigma");
  if (resolution < 2) throw std::invalid_argument("msp_check: resolution must be at least 2");
  const Index K = sigma.extent(CF::k_slot);
  const Index points = field_points({&a, &sigma, &lambda});
  for (Index pt = 0; pt < points; ++pt)
    for (Index i = 0; i < d; ++i)
      for (Index al = 0; al < N; ++al)
        for (Index be = 0; be < N; ++be)
          for (Index k = 0; k < K; ++k)
            if (value(lambda, pt, i, 0, al, be, k) != value(lambda, pt, i, 0, be, al, k))
              throw std::invalid_argument("msp_check: lambda must be symmetric in (alpha, beta)");

  double best = std::numeric_limits<double>::infinity();
  for (Index pt = 0; pt < points; ++pt) {
    // Minimum over eta for fixed xi is an exact eigenvalue problem.
    auto form = [&](const Vector& xi) {
      Matrix q = Matrix::Zero(N, N);
      for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j)
          for (Index al = 0; al < N; ++al)
            for (Index be = 0; be < N; ++be) q(al, be) += 2.0 * xi(i) * xi(j) * value(a, pt, i, j, al, be, 0);
      for (Index k = 0; k < K; ++k) {
        Matrix s = Matrix::Zero(N, N), r = Matrix::Zero(N, N);  // (gamma, alpha)
        for (Index i = 0; i < d; ++i)
          for (Index g = 0; g < N; ++g)
            for (Index al = 0; al < N; ++al) {
              const double sv = value(sigma, pt, i, 0, g, al, k);
              s(g, al) += xi(i) * sv;
              r(g, al) += xi(i) * (sv - value(lambda, pt, i, 0, g, al, k));
            }
        q -= s.transpose() * s;
        q -= (p - 2.0) * (r.transpose() * r);
      }
      return min_eig(q);
    };
    auto direction = [&](const std::vector<double>& ang) {
      Vector xi(d);
      if (d == 1) {
        xi(0) = 1.0;
      } else if (d == 2) {
        xi << std::cos(ang[0]), std::sin(ang[0]);
      } else {
        xi << std::sin(ang[0]) * std::cos(ang[1]), std::sin(ang[0]) * std::sin(ang[1]), std::cos(ang[0]);
      }
      return xi;
    };
    if (d > 3) throw std::invalid_argument("msp_check supports d <= 3");
    const int n_ang = d == 1 ? 0 : static_cast<int>(d - 1);
    std::vector<double> best_ang(static_cast<std::size_t>(n_ang), 0.0);
    double local = form(direction(best_ang));
    const double pi = std::numbers::pi;
    if (n_ang == 1) {
      for (int j = 0; j < resolution; ++j) {
        const std::vector<double> ang{pi * j / resolution};
        const double v = form(direction(ang));
        if (v < local) local = v, best_ang = ang;
      }
    } else if (n_ang == 2) {
      for (int j = 0; j <= resolution; ++j)
        for (int l = 0; l < 2 * resolution; ++l) {
          const std::vector<double> ang{pi * j / resolution, pi * l / resolution};
          const double v = form(direction(ang));
          if (v < local) local = v, best_ang = ang;
        }
    }
    // Local pattern search around the grid minimiser.
    double step = pi / resolution;
    while (n_ang > 0 && step > 1e-10) {
      bool improved = false;
      for (int c = 0; c < n_ang; ++c)
        for (double sgn : {-1.0, 1.0}) {
          auto ang = best_ang;
          ang[static_cast<std::size_t>(c)] += sgn * step;
          const double v = form(direction(ang));
          if (v < local) local = v, best_ang = ang, improved = true;
        }
      if (!improved) step *= 0.5;
    }
    best = std::min(best, local);
  }
  return best;
}

double higher_order_check(const CoefficientField& A_coef, const CoefficientField& B_coef, int m, int d, double p) {
  using CF = CoefficientField;
  const auto nm = static_cast<Index>(multi_indices(d, m).size());
  if (A_coef.extent(CF::alpha_slot) != nm || A_coef.extent(CF::beta_slot) != nm || B_coef.extent(CF::alpha_slot) != nm)
    throw std::invalid_argument("higher_order_check: coefficient extents differ from the number of multi-indices");
  const Index K = B_coef.extent(CF::k_slot);
  const double factor = 0.5 * (p + (m % 2 == 0 ? 1.0 : -1.0) * (p - 2.0));
  const Index points = field_points({&A_coef, &B_coef});
  double best = std::numeric_limits<double>::infinity();
  for (Index pt = 0; pt < points; ++pt) {
    Matrix q(nm, nm);
    for (Index a = 0; a < nm; ++a)
      for (Index b = 0; b < nm; ++b) q(a, b) = 2.0 * value(A_coef, pt, 0, 0, a, b, 0);
    for (Index k = 0; k < K; ++k) {
      Vector bk(nm);
      for (Index a = 0; a < nm; ++a) bk(a) = value(B_coef, pt, 0, 0, a, 0, k);
      q -= factor * bk * bk.transpose();
    }
    best = std::min(best, min_eig(q));
  }
  return best;
}

GammaBoundResult p_laplace_gamma_bound(double alpha, double gamma_sq, Index n_samples, double x_max,
                                       std::uint64_t seed, double tolerance) {
  if (!(alpha > 2.0)) throw std::invalid_argument("p_laplace_gamma_bound needs alpha > 2");
  GammaBoundResult r;
  r.worst_margin = std::numeric_limits<double>::infinity();
  auto margin = [&](double x, double y) {
    const double a = 2.0 * (std::pow(x, alpha - 1.0) - std::pow(y, alpha - 1.0)) * (x - y);
    const double b = std::pow(x, 0.5 * alpha) - std::pow(y, 0.5 * alpha);
    return a - gamma_sq * b * b;
  };
  auto visit = [&](double x, double y) {
    const double m = margin(x, y);
    ++r.n_samples;
    if (m < r.worst_margin) {
      r.worst_margin = m;
      r.worst_x = x;
      r.worst_y = y;
    }
  };
  for (Index i = 0; i < n_samples; ++i)
    visit(x_max * counter_uniform(seed, 7, 0, static_cast<std::uint64_t>(i)),
          x_max * counter_uniform(seed, 7, 1, static_cast<std::uint64_t>(i)));
  // Boundary, diagonal and near-diagonal probes.
  const int probes = 1000;
  for (int i = 0; i <= probes; ++i) {
    const double x = x_max * i / probes;
    visit(x, 0.0);
    visit(0.0, x);
    visit(x, x);
    visit(x, x * 0.5);
    visit(x, x * 0.9);
    visit(x, x * 0.99);
  }
  r.passed = r.worst_margin >= -tolerance;
  return r;
}

}  // namespace lpspde
