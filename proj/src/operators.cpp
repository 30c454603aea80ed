#include "lpspde/operators.hpp"

#include "lpspde/coercivity.hpp"
#include "lpspde/fourier.hpp"
#include "lpspde/grid.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lpspde {

using Triplet = Eigen::Triplet<double>;

Vector apply_A(const OperatorPair& pair, double t, const Vector& v) {
  Vector out(pair.size());
  Vector scratch(pair.size());
  apply_A_into(pair, t, v, out, scratch);
  return out;
}

void apply_A_into(const OperatorPair& pair, double t, const Vector& v, Vector& out, Vector& scratch) {
  pair.sp().check(v);
  if (!v.allFinite()) throw std::domain_error("apply_A: non-finite state");
  if (pair.linear_part.nonZeros() > 0) {
    out.noalias() = pair.linear_part * v;
  } else {
    out.setZero(pair.size());
  }
  if (pair.nonlinear_part) {
    pair.nonlinear_part(t, v, scratch);
    out += scratch;
  }
}

Matrix apply_B(const OperatorPair& pair, double t, const Vector& v) {
  pair.sp().check(v);
  if (!v.allFinite()) throw std::domain_error("apply_B: non-finite state");
  Matrix out = Matrix::Zero(pair.size(), pair.noise_dim);
  if (pair.diffusion) pair.diffusion(t, v, out);
  return out;
}

Vector b_adjoint_v(const OperatorPair& pair, double t, const Vector& v) {
  const Matrix b = apply_B(pair, t, v);
  const Vector mv = riesz_dual(pair.sp(), v);
  Vector out(b.cols());
  for (Index k = 0; k < b.cols(); ++k) {
    double s = 0.0;
    for (Index i = 0; i < b.rows(); ++i) s += b(i, k) * mv(i);
    out(k) = s;
  }
#ifndef NDEBUG
  const double lhs = out.squaredNorm();
  const double rhs = hs_norm_squared(pair.sp(), b) * h_norm_squared(pair.sp(), v);
  if (lhs > rhs * (1.0 + 1e-10) + 1e-300) throw std::logic_error("b_adjoint_v: Cauchy-Schwarz violated");
#endif
  return out;
}

double hs_norm_squared(const GalerkinSpace& space, const Matrix& b) {
  const Vector& w = space.weights();
  double s = 0.0;
  for (Index k = 0; k < b.cols(); ++k)
    for (Index i = 0; i < b.rows(); ++i) s += w(i) * b(i, k) * b(i, k);
  return s;
}

double pair_v_norm(const OperatorPair& pair, const Vector& v) {
  return pair.v_norm ? pair.v_norm(v) : lpspde::v_norm(pair.sp(), v);
}

double forcing_budget(const OperatorPair& pair, double t) {
  return pair.forcing_budget ? pair.forcing_budget(t) : 0.0;
}

DeclaredConstants declared_constants(const OperatorPair& pair, double p) {
  return pair.declared ? pair.declared(p) : DeclaredConstants{};
}

namespace {

std::shared_ptr<const GalerkinSpace> share(const GalerkinSpace& space) {
  return std::make_shared<const GalerkinSpace>(space);
}

// A bound -theta ||grad v||^2 becomes -theta ||v||_V^2 + max(theta, 0) ||v||_H^2
// under the full-norm convention.
DeclaredConstants gradient_bound(const GalerkinSpace& space, double theta) {
  DeclaredConstants c;
  c.theta = theta;
  c.K_c = space.v_norm_convention() == VNormConvention::full ? std::max(theta, 0.0) : 0.0;
  return c;
}

SparseMatrix diagonal(const Vector& d) {
  SparseMatrix m(d.size(), d.size());
  std::vector<Triplet> t;
  for (Index i = 0; i < d.size(); ++i)
    if (d(i) != 0.0) t.emplace_back(i, i, d(i));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

void add_block(std::vector<Triplet>& t, const SparseMatrix& block, Index row0, Index col0) {
  for (Index k = 0; k < block.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(block, k); it; ++it)
      t.emplace_back(row0 + it.row(), col0 + it.col(), it.value());
}

std::function<double(double)> make_budget(std::shared_ptr<const GalerkinSpace> space, const Forcing& forcing,
                                          double alpha) {
  if (!forcing.phi && !forcing.psi) return {};
  return [space, forcing, alpha](double t) {
    double f = 0.0;
    if (forcing.phi) f += std::pow(dual_norm(*space, forcing.phi(t)), alpha / (alpha - 1.0));
    if (forcing.psi) f += hs_norm_squared(*space, forcing.psi(t));
    return f;
  };
}

// Derivative of a nodal coefficient along `axis`: centred inside, one-sided
// at the ends of the stored grid.
Vector coefficient_derivative(const GalerkinSpace& space, const Vector& c, int axis) {
  const grid::Layout nodes = grid::node_layout(space);
  const Index n_axis = space.axis_sizes()[static_cast<std::size_t>(axis)];
  const double h = space.spacing()[static_cast<std::size_t>(axis)];
  Vector d(c.size());
  for (Index i = 0; i < nodes.size(); ++i) {
    auto idx = nodes.multi(i);
    const Index pos = idx[static_cast<std::size_t>(axis)];
    auto at = [&](Index p) {
      idx[static_cast<std::size_t>(axis)] = p;
      return c(nodes.linear(idx));
    };
    if (n_axis == 1) {
      d(i) = 0.0;
    } else if (pos == 0) {
      d(i) = (at(1) - at(0)) / h;
    } else if (pos == n_axis - 1) {
      d(i) = (at(pos) - at(pos - 1)) / h;
    } else {
      d(i) = (at(pos + 1) - at(pos - 1)) / (2.0 * h);
    }
  }
  return d;
}

struct DivergenceForm {
  SparseMatrix stiffness;           // A = -stiffness
  std::vector<SparseMatrix> noise;  // B_k as H-coordinate maps
};

// <A u, v> = -sum int a^{ij}_{ab} d_i u^b d_j v^a and B_{k,a} u = sum sigma^i_{k,ab} C_i u^b.
// a(i, j, alpha, beta) and sigma(i, alpha, beta, k) return nodal values.
template <typename AFn, typename SigmaFn>
DivergenceForm divergence_form(const GalerkinSpace& space, Index K, AFn&& a, SigmaFn&& sigma) {
  const int d = space.dim();
  const int N = space.components();
  const Index S = space.scalar_size();
  const double vol = grid::cell_volume(space);
  std::vector<SparseMatrix> dedge, eavg, cgrad, cdiff;
  for (int i = 0; i < d; ++i) {
    dedge.push_back(grid::edge_difference(space, i));
    eavg.push_back(grid::edge_average(space, i));
    cdiff.push_back(grid::centered_difference(space, i));
    if (d > 1) cgrad.push_back(grid::cell_gradient(space, i));
  }
  const SparseMatrix cavg = d > 1 ? grid::cell_average(space) : SparseMatrix();

  std::vector<Triplet> t;
  for (int al = 0; al < N; ++al) {
    for (int be = 0; be < N; ++be) {
      SparseMatrix block(S, S);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          const Vector nodal = a(i, j, al, be);
          if (nodal.isZero(0.0)) continue;
          if (i == j) {
            const Vector ae = vol * (eavg[i] * nodal);
            block += SparseMatrix(dedge[i].transpose()) * diagonal(ae) * dedge[i];
          } else {
            const Vector ac = vol * (cavg * nodal);
            block += SparseMatrix(cgrad[j].transpose()) * diagonal(ac) * cgrad[i];
          }
        }
      }
      add_block(t, block, al * S, be * S);
    }
  }
  DivergenceForm out;
  out.stiffness.resize(space.size(), space.size());
  out.stiffness.setFromTriplets(t.begin(), t.end());
  out.stiffness.prune(0.0);

  for (Index k = 0; k < K; ++k) {
    std::vector<Triplet> tb;
    for (int al = 0; al < N; ++al) {
      for (int be = 0; be < N; ++be) {
        SparseMatrix block(S, S);
        for (int i = 0; i < d; ++i) {
          const Vector s = sigma(i, al, be, k);
          if (s.isZero(0.0)) continue;
          block += diagonal(s) * cdiff[i];
        }
        add_block(tb, block, al * S, be * S);
      }
    }
    SparseMatrix bk(space.size(), space.size());
    bk.setFromTriplets(tb.begin(), tb.end());
    out.noise.push_back(std::move(bk));
  }
  return out;
}

void attach_linear_noise(OperatorPair& pair, std::vector<SparseMatrix> noise, const Forcing& forcing) {
  pair.noise_dim = std::max<Index>(1, static_cast<Index>(noise.size()));
  bool any = forcing.psi != nullptr;
  for (const auto& b : noise) any = any || b.nonZeros() > 0;
  if (!any) return;
  const auto psi = forcing.psi;
  const Index K = pair.noise_dim;
  pair.diffusion = [noise = std::move(noise), psi, K](double t, const Vector& v, Matrix& out) {
    out.resize(v.size(), K);
    for (Index k = 0; k < K; ++k) {
      if (k < static_cast<Index>(noise.size()))
        out.col(k).noalias() = noise[static_cast<std::size_t>(k)] * v;
      else
        out.col(k).setZero();
    }
    if (psi) {
      const Matrix p = psi(t);
      if (p.rows() != out.rows() || p.cols() != K) throw std::invalid_argument("psi has the wrong shape");
      out += p;
    }
  };
}

void attach_phi(OperatorPair& pair, const Forcing& forcing) {
  if (!forcing.phi) return;
  const auto phi = forcing.phi;
  pair.nonlinear_part = [phi](double t, const Vector& v, Vector& out) {
    out = phi(t);
    if (out.size() != v.size()) throw std::invalid_argument("phi has the wrong size");
  };
}

OperatorPair heat_make(const char* name, const CoefficientField& a, const CoefficientField& b,
                       const Forcing& forcing, const GalerkinSpace& space) {
  const Index S = space.scalar_size();
  a.validate(S, "a");
  b.validate(S, "b");
  if (a.extent(CoefficientField::i_slot) != space.dim() || a.extent(CoefficientField::j_slot) != space.dim())
    throw std::invalid_argument("a must carry d x d entries");
  if (b.extent(CoefficientField::i_slot) != space.dim())
    throw std::invalid_argument("b must carry d entries per noise index");
  if (space.components() != 1) throw std::invalid_argument("heat equations are scalar");
  const Index K = b.extent(CoefficientField::k_slot);
  DivergenceForm form = divergence_form(
      space, K, [&](int i, int j, int, int) { return a.nodal(S, i, j, 0, 0, 0); },
      [&](int i, int, int, Index k) { return b.nodal(S, i, 0, 0, 0, k); });

  OperatorPair pair;
  pair.equation = name;
  pair.space = share(space);
  pair.alpha = 2.0;
  pair.beta = 0.0;
  pair.linear_part = -form.stiffness;
  attach_linear_noise(pair, std::move(form.noise), forcing);
  attach_phi(pair, forcing);
  pair.forcing_budget = make_budget(pair.space, forcing, 2.0);
  pair.linear = !forcing.phi && !forcing.psi;

  const double theta = ellipticity_min(a, b);
  const bool neumann = space.kind() == SpaceKind::fd_neumann_interval;
  double div_b = 0.0;
  for (Index p = 0; p < S; ++p) {
    double s = 0.0;
    for (Index k = 0; k < K; ++k) {
      double dv = 0.0;
      for (int i = 0; i < space.dim(); ++i) dv += coefficient_derivative(space, b.nodal(S, i, 0, 0, 0, k), i)(p);
      s += dv * dv;
    }
    div_b = std::max(div_b, std::sqrt(s));
  }
  auto sp = pair.space;
  pair.declared = [sp, theta, div_b, neumann](double p) {
    DeclaredConstants c = gradient_bound(*sp, theta);
    // B*v = -1/2 int div(b) v^2 on Dirichlet domains.
    if (neumann)
      c.K_c.reset();
    else
      c.K_c = *c.K_c + (p - 2.0) * 0.25 * div_b * div_b;
    return c;
  };
  return pair;
}

}  // namespace

OperatorPair spectral_example_make(double gamma, const GalerkinSpace& space) {
  if (space.kind() != SpaceKind::fourier_torus) throw std::invalid_argument("spectral example needs a Fourier torus");
  const Vector k2 = space.wavenumber_squared();
  const Vector w = space.weights();
  OperatorPair pair;
  pair.equation = "spectral";
  pair.space = share(space);
  pair.alpha = 2.0;
  pair.beta = 0.0;
  pair.noise_dim = 1;
  pair.linear_part = diagonal(-(k2.array() * w.array()).matrix());
  const Vector mult = 2.0 * gamma * k2.array().sqrt();
  if (gamma != 0.0) {
    pair.diffusion = [mult](double, const Vector& v, Matrix& out) {
      out.resize(v.size(), 1);
      for (Index i = 0; i < v.size(); ++i) out(i, 0) = mult(i) * v(i);
    };
  }
  // Each mode is geometric Brownian motion driven by the same W.
  pair.exact_solution = [k2, mult, gamma](double t, const Vector& u0, const Vector& w) {
    Vector u(u0.size());
    for (Index i = 0; i < u0.size(); ++i)
      u(i) = u0(i) * std::exp(-(1.0 + 2.0 * gamma * gamma) * k2(i) * t + mult(i) * w(0));
    return u;
  };
  auto sp = pair.space;
  pair.declared = [sp, gamma](double p) {
    DeclaredConstants c;
    c.theta = 2.0 - 4.0 * gamma * gamma * (p - 1.0);
    c.K_c = sp->v_norm_convention() == VNormConvention::full ? 2.0 : 0.0;
    c.K_B = 0.0;
    c.K_alpha = 4.0 * gamma * gamma;
    return c;
  };
  return pair;
}

OperatorPair heat_dirichlet_make(const CoefficientField& a, const CoefficientField& b, const Forcing& forcing,
                                 const GalerkinSpace& space) {
  if (space.kind() != SpaceKind::fd_dirichlet_interval && space.kind() != SpaceKind::fd_grid_rd)
    throw std::invalid_argument("heat_dirichlet_make needs a Dirichlet grid");
  return heat_make("heat-dirichlet", a, b, forcing, space);
}

OperatorPair heat_neumann_make(const CoefficientField& a, const CoefficientField& b, const Forcing& forcing,
                               const GalerkinSpace& space) {
  if (space.kind() != SpaceKind::fd_neumann_interval)
    throw std::invalid_argument("heat_neumann_make needs a Neumann interval");
  return heat_make("heat-neumann", a, b, forcing, space);
}

OperatorPair burgers_make(double gamma, const GalerkinSpace& space, const BurgersOptions& options) {
  if (space.dim() != 1 || space.components() != 1) throw std::invalid_argument("Burgers is one-dimensional");
  if (options.audit && !(gamma * gamma < 2.0))
    throw std::invalid_argument("Burgers: gamma must lie in (-sqrt 2, sqrt 2) for theta = 2 - gamma^2 > 0");
  if (!(options.viscosity >= 0.0)) throw std::invalid_argument("Burgers: viscosity must be nonnegative");
  OperatorPair pair;
  pair.equation = "burgers";
  pair.space = share(space);
  pair.alpha = 2.0;
  pair.beta = 2.0;
  pair.noise_dim = 1;
  pair.linear = false;
  const SparseMatrix stiff =
      SparseMatrix(space.gradient().transpose()) * space.gradient_weights().asDiagonal() * space.gradient();
  pair.linear_part = -options.viscosity * stiff;

  SparseMatrix deriv;
  if (space.kind() == SpaceKind::fd_dirichlet_interval) {
    deriv = grid::centered_difference(space, 0);
    const double h = space.spacing().front();
    pair.nonlinear_part = [deriv, h](double, const Vector& u, Vector& out) {
      const Vector u2 = u.cwiseProduct(u);
      const Vector du = deriv * u;
      out.noalias() = deriv * u2;
      out = (h / 3.0) * (out + u.cwiseProduct(du));
    };
  } else if (space.kind() == SpaceKind::fourier_torus) {
    if (space.axis_sizes().front() % 2 == 0) throw std::invalid_argument("Fourier Burgers needs odd n");
    deriv = fourier::partial(space, {1});
    const auto quad = std::make_shared<const fourier::ExactQuadrature>(fourier::exact_quadrature(space));
    pair.nonlinear_part = [quad](double, const Vector& u, Vector& out) {
      const Vector uq = quad->values * u;
      const Vector dq = quad->derivatives[0] * u;
      out.noalias() = quad->values.transpose() * (quad->node_weight * uq.cwiseProduct(dq));
    };
  } else {
    throw std::invalid_argument("Burgers needs a Dirichlet interval or a Fourier torus");
  }
  if (gamma != 0.0) {
    pair.diffusion = [deriv, gamma](double, const Vector& v, Matrix& out) {
      out.resize(v.size(), 1);
      out.col(0).noalias() = gamma * (deriv * v);
    };
  }
  auto sp = pair.space;
  const double nu = options.viscosity;
  pair.declared = [sp, gamma, nu](double) {
    DeclaredConstants c = gradient_bound(*sp, 2.0 * nu - gamma * gamma);
    c.K_B = 0.0;
    c.K_alpha = gamma * gamma;
    return c;
  };
  return pair;
}

Vector divergence(const GalerkinSpace& space, const Vector& v) {
  if (space.kind() != SpaceKind::fourier_torus_2d_vector) throw std::invalid_argument("divergence needs a 2D vector torus");
  space.check(v);
  const Index S = space.scalar_size();
  return fourier::partial(space, {1, 0}) * v.head(S) + fourier::partial(space, {0, 1}) * v.tail(S);
}

namespace {

SparseMatrix leray_matrix(const GalerkinSpace& space) {
  const Index S = space.scalar_size();
  const SparseMatrix dx = fourier::partial(space, {1, 0});
  const SparseMatrix dy = fourier::partial(space, {0, 1});
  const Vector k2 = space.wavenumber_squared();
  Vector inv(S);
  for (Index i = 0; i < S; ++i) inv(i) = k2(i) > 0.0 ? -1.0 / k2(i) : 0.0;  // Laplacian pseudo-inverse
  std::vector<Triplet> t;
  add_block(t, dx, 0, 0);
  add_block(t, dy, S, 0);
  SparseMatrix grad(2 * S, S);
  grad.setFromTriplets(t.begin(), t.end());
  t.clear();
  add_block(t, dx, 0, 0);
  add_block(t, dy, 0, S);
  SparseMatrix div(S, 2 * S);
  div.setFromTriplets(t.begin(), t.end());
  SparseMatrix id(2 * S, 2 * S);
  id.setIdentity();
  SparseMatrix p = id - grad * diagonal(inv) * div;
  p.prune(1e-300, 1.0);
  return p;
}

}  // namespace

Vector leray_project(const GalerkinSpace& space, const Vector& v) {
  if (space.kind() != SpaceKind::fourier_torus_2d_vector) throw std::invalid_argument("leray_project needs a 2D vector torus");
  space.check(v);
  return leray_matrix(space) * v;
}

OperatorPair navier_stokes_2d_make(double nu, const CoefficientField& b, const GalerkinSpace& space) {
  if (space.kind() != SpaceKind::fourier_torus_2d_vector)
    throw std::invalid_argument("Navier-Stokes needs a fourier-torus-2d-vector space");
  for (Index n : space.axis_sizes())
    if (n % 2 == 0) throw std::invalid_argument("Navier-Stokes needs odd n per axis");
  if (!(nu > 0.0)) throw std::invalid_argument("Navier-Stokes: nu must be positive");
  const Index S = space.scalar_size();
  if (b.extent(CoefficientField::i_slot) != 2 || b.extent(CoefficientField::alpha_slot) != 2)
    throw std::invalid_argument("Navier-Stokes: b must have 2 x 2 blocks (slots i, alpha)");
  b.validate(S, "b");
  const Index K = b.extent(CoefficientField::k_slot);

  OperatorPair pair;
  pair.equation = "navier-stokes-2d";
  pair.space = share(space);
  pair.alpha = 2.0;
  pair.beta = 2.0;
  pair.noise_dim = K;
  pair.linear = false;

  const SparseMatrix P = leray_matrix(space);
  const SparseMatrix PT = P.transpose();
  const SparseMatrix stiff =
      SparseMatrix(space.gradient().transpose()) * space.gradient_weights().asDiagonal() * space.gradient();
  pair.linear_part = -nu * (PT * stiff * P);
  pair.linear_part.prune(1e-300, 1.0);

  const auto quad = std::make_shared<const fourier::ExactQuadrature>(fourier::exact_quadrature(space));
  pair.nonlinear_part = [quad, PT, S](double, const Vector& u, Vector& out) {
    const Matrix& E = quad->values;
    const Vector u1 = E * u.head(S);
    const Vector u2 = E * u.tail(S);
    Vector f(2 * S);
    for (int g = 0; g < 2; ++g) {
      const auto ug = u.segment(g * S, S);
      const Vector conv = u1.cwiseProduct(quad->derivatives[0] * ug) + u2.cwiseProduct(quad->derivatives[1] * ug);
      f.segment(g * S, S).noalias() = -quad->node_weight * (E.transpose() * conv);
    }
    out.noalias() = PT * f;
  };

  // Noise coefficients at the quadrature nodes, via trigonometric interpolation.
  const SparseMatrix dx = fourier::partial(space, {1, 0});
  const SparseMatrix dy = fourier::partial(space, {0, 1});
  double bmax = 0.0;
  std::vector<std::array<Vector, 4>> bq(static_cast<std::size_t>(K));  // index i * 2 + gamma
  bool constant = b.is_constant();
  if (!constant) {
    std::vector<Matrix> eval;
    for (int a = 0; a < 2; ++a)
      eval.push_back(fourier::evaluation_1d(space.axis_sizes()[a], space.lengths()[a], space.axis_sizes()[a]));
    const Matrix En = Matrix(fourier::kron(eval));
    const Eigen::PartialPivLU<Matrix> lu(En);
    double kmax = 0.0;
    for (int a = 0; a < 2; ++a)
      kmax = std::max(kmax, fourier::wavenumber(space.axis_sizes()[a] - 1, space.axis_sizes()[a], space.lengths()[a]));
    for (Index k = 0; k < K; ++k) {
      Vector div[2] = {Vector::Zero(S), Vector::Zero(S)};
      for (int i = 0; i < 2; ++i) {
        for (int g = 0; g < 2; ++g) {
          const Vector samples = b.nodal(S, i, 0, g, 0, k);
          bmax = std::max(bmax, samples.cwiseAbs().maxCoeff());
          const Vector c = lu.solve(samples);
          div[g] += (i == 0 ? dx : dy) * c;
          bq[static_cast<std::size_t>(k)][static_cast<std::size_t>(i * 2 + g)] = quad->values * c;
        }
      }
      const double scale = std::max(1.0, bmax * kmax);
      for (int g = 0; g < 2; ++g) {
        const double err = (quad->values * div[g]).cwiseAbs().maxCoeff();
        if (err > 1e-10 * scale)
          throw std::invalid_argument("Navier-Stokes: noise field b_" + std::to_string(k) +
                                      " is not divergence-free (max |div| = " + std::to_string(err) + ")");
      }
    }
  }
  const Vector inv_w = space.weights().head(S).cwiseInverse();
  bool any_b = false;
  for (Index k = 0; k < K; ++k)
    for (int i = 0; i < 2; ++i)
      for (int g = 0; g < 2; ++g) any_b = any_b || b(0, i, 0, g, 0, k) != 0.0 || !constant;
  if (any_b) {
    std::vector<double> bc(static_cast<std::size_t>(4 * K), 0.0);
    if (constant)
      for (Index k = 0; k < K; ++k)
        for (int i = 0; i < 2; ++i)
          for (int g = 0; g < 2; ++g) bc[static_cast<std::size_t>(4 * k + 2 * i + g)] = b(0, i, 0, g, 0, k);
    pair.diffusion = [P, dx, dy, quad, bq, bc, constant, inv_w, S, K](double, const Vector& u, Matrix& out) {
      out.resize(2 * S, K);
      Vector raw(2 * S);
      for (Index k = 0; k < K; ++k) {
        for (int g = 0; g < 2; ++g) {
          const auto ug = u.segment(g * S, S);
          if (constant) {
            const double b0 = bc[static_cast<std::size_t>(4 * k + g)];
            const double b1 = bc[static_cast<std::size_t>(4 * k + 2 + g)];
            raw.segment(g * S, S) = b0 * (dx * ug) + b1 * (dy * ug);
          } else {
            const auto& f = bq[static_cast<std::size_t>(k)];
            const Vector prod = f[static_cast<std::size_t>(g)].cwiseProduct(quad->derivatives[0] * ug) +
                                f[static_cast<std::size_t>(2 + g)].cwiseProduct(quad->derivatives[1] * ug);
            raw.segment(g * S, S) = quad->node_weight * inv_w.cwiseProduct(quad->values.transpose() * prod);
          }
        }
        out.col(k).noalias() = P * raw;
      }
    };
  }
  pair.project_to_V = [P](Vector& v) { v = P * v; };

  // kappa of the form 2 nu |xi|^2 - sum_k sum_gamma (sum_i b^{i gamma} xi^{i gamma})^2.
  double kappa = std::numeric_limits<double>::infinity();
  const Index points = constant ? 1 : S;
  for (Index p = 0; p < points; ++p) {
    for (int g = 0; g < 2; ++g) {
      Eigen::Matrix2d q = 2.0 * nu * Eigen::Matrix2d::Identity();
      for (Index k = 0; k < K; ++k) {
        const Eigen::Vector2d bk(b(p, 0, 0, g, 0, k), b(p, 1, 0, g, 0, k));
        q -= bk * bk.transpose();
      }
      kappa = std::min(kappa, Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(q).eigenvalues()(0));
    }
  }
  auto sp = pair.space;
  pair.declared = [sp, kappa](double) { return gradient_bound(*sp, kappa); };
  return pair;
}

OperatorPair system_make(const CoefficientField& a, const CoefficientField& sigma, const CoefficientField& lambda,
                         const GalerkinSpace& space, const Forcing& forcing) {
  if (!space.is_finite_difference() || space.kind() == SpaceKind::fd_neumann_interval)
    throw std::invalid_argument("system_make needs a Dirichlet grid");
  const Index S = space.scalar_size();
  const int d = space.dim();
  const int N = space.components();
  using CF = CoefficientField;
  a.validate(S, "a");
  sigma.validate(S, "sigma");
  lambda.validate(S, "lambda");
  if (a.extent(CF::i_slot) != d || a.extent(CF::j_slot) != d || a.extent(CF::alpha_slot) != N ||
      a.extent(CF::beta_slot) != N)
    throw std::invalid_argument("a must have slots (i, j, alpha, beta) of size (d, d, N, N)");
  if (sigma.extent(CF::i_slot) != d || sigma.extent(CF::alpha_slot) != N || sigma.extent(CF::beta_slot) != N)
    throw std::invalid_argument("sigma must have slots (i, alpha, beta, k) of size (d, N, N, K)");
  if (lambda.extents() != sigma.extents()) throw std::invalid_argument("lambda must have the shape of sigma");
  const Index K = sigma.extent(CF::k_slot);
  const Index lp = lambda.is_constant() ? 1 : lambda.n_points();
  for (Index p = 0; p < lp; ++p)
    for (Index i = 0; i < d; ++i)
      for (Index al = 0; al < N; ++al)
        for (Index be = al + 1; be < N; ++be)
          for (Index k = 0; k < K; ++k)
            if (lambda(p, i, 0, al, be, k) != lambda(p, i, 0, be, al, k))
              throw std::invalid_argument("lambda must be symmetric in (alpha, beta)");

  DivergenceForm form = divergence_form(
      space, K, [&](int i, int j, int al, int be) { return a.nodal(S, i, j, al, be, 0); },
      [&](int i, int al, int be, Index k) { return sigma.nodal(S, i, 0, al, be, k); });
  OperatorPair pair;
  pair.equation = "system";
  pair.space = share(space);
  pair.alpha = 2.0;
  pair.beta = 0.0;
  pair.linear_part = -form.stiffness;
  attach_linear_noise(pair, std::move(form.noise), forcing);
  attach_phi(pair, forcing);
  pair.forcing_budget = make_budget(pair.space, forcing, 2.0);
  pair.linear = !forcing.phi && !forcing.psi;
  auto sp = pair.space;
  pair.declared = [sp, a, sigma, lambda](double p) {
    return gradient_bound(*sp, msp_check(a, sigma, lambda, p, 64));
  };
  return pair;
}

std::vector<std::vector<int>> multi_indices(int d, int m) {
  if (d < 1 || m < 0) throw std::invalid_argument("multi_indices: need d >= 1 and m >= 0");
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(d), 0);
  auto rec = [&](auto&& self, int axis, int left) -> void {
    if (axis == d - 1) {
      cur[static_cast<std::size_t>(axis)] = left;
      out.push_back(cur);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      cur[static_cast<std::size_t>(axis)] = v;
      self(self, axis + 1, left - v);
    }
  };
  rec(rec, 0, m);
  return out;
}

OperatorPair higher_order_make(int m, const CoefficientField& A_coef, const CoefficientField& B_coef,
                               const GalerkinSpace& space) {
  if (m < 1) throw std::invalid_argument("higher_order_make: m must be at least 1");
  if (space.kind() != SpaceKind::fourier_torus || space.components() != 1)
    throw std::invalid_argument("higher_order_make needs a scalar Fourier torus");
  for (Index n : space.axis_sizes())
    if (n < 2 * m + 1)
      throw std::invalid_argument("higher_order_make: n = " + std::to_string(n) + " cannot resolve order " +
                                  std::to_string(2 * m) + " derivatives (need n >= 2m + 1)");
  const int d = space.dim();
  const auto mi = multi_indices(d, m);
  const auto nm = static_cast<Index>(mi.size());
  using CF = CoefficientField;
  if (!A_coef.is_constant() || !B_coef.is_constant())
    throw std::invalid_argument("higher_order_make supports constant coefficients");
  if (A_coef.extent(CF::alpha_slot) != nm || A_coef.extent(CF::beta_slot) != nm || B_coef.extent(CF::alpha_slot) != nm)
    throw std::invalid_argument("higher_order_make: coefficient extents differ from the number of multi-indices");
  A_coef.validate(1, "A");
  B_coef.validate(1, "B");
  const Index K = B_coef.extent(CF::k_slot);

  std::vector<SparseMatrix> partials;
  for (const auto& a : mi) partials.push_back(fourier::partial(space, a));
  const auto M = space.weights().asDiagonal();
  SparseMatrix A(space.size(), space.size());
  for (Index a = 0; a < nm; ++a)
    for (Index b = 0; b < nm; ++b) {
      const double c = A_coef(0, 0, 0, a, b, 0);
      if (c != 0.0) A -= c * (SparseMatrix(partials[b].transpose()) * M * partials[a]);
    }
  A.prune(0.0);
  std::vector<SparseMatrix> noise;
  for (Index k = 0; k < K; ++k) {
    SparseMatrix bk(space.size(), space.size());
    for (Index a = 0; a < nm; ++a) {
      const double c = B_coef(0, 0, 0, a, 0, k);
      if (c != 0.0) bk += c * partials[a];
    }
    noise.push_back(bk);
  }
  OperatorPair pair;
  pair.equation = "higher-order";
  pair.space = share(space);
  pair.alpha = 2.0;
  pair.beta = 0.0;
  pair.linear_part = A;
  attach_linear_noise(pair, std::move(noise), {});
  auto sp = pair.space;
  pair.v_norm = [sp, partials](const Vector& v) {
    double s = sp->v_norm_convention() == VNormConvention::full ? h_norm_squared(*sp, v) : 0.0;
    for (const auto& p : partials) s += h_norm_squared(*sp, p * v);
    return std::sqrt(s);
  };
  pair.declared = [sp, A_coef, B_coef, m, d](double p) {
    return gradient_bound(*sp, higher_order_check(A_coef, B_coef, m, d, p));
  };
  return pair;
}

OperatorPair p_laplace_make(double alpha, const std::vector<double>& gamma_k, const std::vector<double>& C_k,
                            const GalerkinSpace& space, const PLaplaceOptions& options) {
  if (!(alpha > 2.0)) throw std::invalid_argument("p-Laplace needs alpha > 2");
  if (space.kind() != SpaceKind::fd_dirichlet_interval) throw std::invalid_argument("p-Laplace needs a Dirichlet interval");
  if (space.alpha() != alpha) throw std::invalid_argument("p-Laplace: space alpha differs from operator alpha");
  if (gamma_k.empty()) throw std::invalid_argument("p-Laplace needs at least one gamma_k");
  if (!C_k.empty() && C_k.size() != gamma_k.size()) throw std::invalid_argument("p-Laplace: C_k and gamma_k differ in length");
  double gamma_sq = 0.0;
  for (double g : gamma_k) gamma_sq += g * g;
  const double bound = 8.0 * (alpha - 1.0) / (alpha * alpha);
  if (options.audit && gamma_sq > bound)
    throw std::invalid_argument("p-Laplace: sum gamma_k^2 = " + std::to_string(gamma_sq) + " exceeds 8(alpha-1)/alpha^2 = " +
                                std::to_string(bound));
  const SparseMatrix D = space.gradient();
  const SparseMatrix DT = D.transpose();
  const double h = space.spacing().front();
  const Index n = space.size();
  OperatorPair pair;
  pair.equation = "p-laplace";
  pair.space = share(space);
  pair.alpha = alpha;
  pair.beta = 0.0;
  pair.linear = false;
  pair.noise_dim = static_cast<Index>(gamma_k.size());
  pair.linear_part = SparseMatrix(n, n);
  pair.nonlinear_part = [D, DT, h, alpha](double, const Vector& u, Vector& out) {
    Vector g = D * u;
    for (Index e = 0; e < g.size(); ++e) g(e) = std::pow(std::abs(g(e)), alpha - 2.0) * g(e);
    out.noalias() = -h * (DT * g);
  };
  std::vector<double> c = C_k;
  c.resize(gamma_k.size(), 0.0);
  pair.diffusion = [D, gamma_k, c, alpha](double, const Vector& u, Matrix& out) {
    const Index n = u.size();
    const Index K = static_cast<Index>(gamma_k.size());
    out.resize(n, K);
    Vector g = D * u;
    for (Index e = 0; e < g.size(); ++e) g(e) = std::pow(std::abs(g(e)), 0.5 * alpha);
    for (Index k = 0; k < K; ++k)
      for (Index i = 0; i < n; ++i)
        out(i, k) = gamma_k[static_cast<std::size_t>(k)] * 0.5 * (g(i) + g(i + 1)) + c[static_cast<std::size_t>(k)] * u(i);
  };
  bool has_c = false;
  for (double v : c) has_c = has_c || v != 0.0;
  pair.declared = [gamma_sq, has_c](double p) {
    DeclaredConstants d;
    if (!has_c) {
      d.theta = 2.0 - (p - 1.0) * gamma_sq;
      d.K_c = 0.0;
      d.K_B = 0.0;
      d.K_alpha = gamma_sq;
    }
    d.K_A = 0.5;
    return d;
  };
  return pair;
}

Vector convection_term(const OperatorPair& pair, const Vector& v) {
  if (pair.equation != "burgers" && pair.equation != "navier-stokes-2d")
    throw std::invalid_argument("convection_term: no convection in '" + pair.equation + "'");
  Vector out(v.size());
  pair.nonlinear_part(0.0, v, out);
  return out;
}

NeumannTraceAudit neumann_trace_audit(const CoefficientField& b, const GalerkinSpace& space, double eps,
                                      const std::vector<Vector>& samples) {
  if (space.kind() != SpaceKind::fd_neumann_interval) throw std::invalid_argument("trace audit needs a Neumann interval");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("trace audit: eps must lie in (0, 1)");
  const Index S = space.scalar_size();
  b.validate(S, "b");
  const Index K = b.extent(CoefficientField::k_slot);
  const SparseMatrix C = grid::centered_difference(space, 0);
  NeumannTraceAudit r;
  r.eps = eps;
  std::vector<Vector> bk;
  for (Index k = 0; k < K; ++k) bk.push_back(b.nodal(S, 0, 0, 0, 0, k));
  double c0 = 0.0, c1 = 0.0, dmax = 0.0;
  std::vector<Vector> db;
  for (Index k = 0; k < K; ++k) {
    c0 += bk[k](0) * bk[k](0);
    c1 += bk[k](S - 1) * bk[k](S - 1);
    db.push_back(coefficient_derivative(space, bk[k], 0));
  }
  for (Index i = 0; i < S; ++i) {
    double s = 0.0;
    for (Index k = 0; k < K; ++k) s += db[k](i) * db[k](i);
    dmax = std::max(dmax, s);
  }
  r.C_b = std::sqrt(std::max(c0, c1));
  r.D_b = std::sqrt(dmax);
  const double denom_c = r.C_b * r.C_b + r.D_b * r.D_b;
  for (const Vector& v : samples) {
    space.check(v);
    const double h2 = h_norm_squared(space, v);
    if (h2 == 0.0) continue;
    const Vector cv = C * v;
    const Vector mv = riesz_dual(space, v);
    double lhs = 0.0;
    for (Index k = 0; k < K; ++k) {
      const double a = mv.dot(bk[k].cwiseProduct(cv));
      lhs += a * a;
    }
    lhs /= h2;
    const double excess = lhs - (1.0 + eps) * r.C_b * r.C_b * gradient_power_sum(space, v, 2.0);
    if (excess <= 0.0) continue;
    const double need = denom_c > 0.0 ? excess / (denom_c * h2) : std::numeric_limits<double>::infinity();
    r.C_eps_fit = std::max(r.C_eps_fit, need);
  }
  r.n_samples = static_cast<Index>(samples.size());
  return r;
}

}  // namespace lpspde
