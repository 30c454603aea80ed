#include <doctest.h>

#include "lpspde/fourier.hpp"
#include "lpspde/gelfand.hpp"
#include "lpspde/operators.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace lpspde;

namespace {

constexpr double pi = std::numbers::pi;

GalerkinSpace make(SpaceKind kind, Index n, double length = 1.0, double alpha = 2.0,
                   VNormConvention conv = VNormConvention::full, int dim = 1) {
  SpaceConfig c;
  c.kind = kind;
  c.n = {n};
  c.lengths = {length};
  c.alpha = alpha;
  c.v_norm = conv;
  c.dim = dim;
  return GalerkinSpace(c);
}

Vector random_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

// Real Fourier basis on [0, L): 1, cos, sin, cos, sin, ...
double basis(Index j, double x, double L) {
  if (j == 0) return 1.0;
  const double k = 2.0 * pi * static_cast<double>((j + 1) / 2) / L;
  return j % 2 == 1 ? std::cos(k * x) : std::sin(k * x);
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace

TEST_CASE("space construction") {
  const GalerkinSpace f = make(SpaceKind::fourier_torus, 8, 2.0 * pi);
  CHECK(f.size() == 8);
  CHECK(f.weights()(0) == doctest::Approx(2.0 * pi));
  for (Index j = 1; j < 8; ++j) CHECK(f.weights()(j) == doctest::Approx(pi));

  const GalerkinSpace d = make(SpaceKind::fd_dirichlet_interval, 3, 1.0);
  CHECK(d.spacing()[0] == 0.25);
  for (Index i = 0; i < 3; ++i) CHECK(d.weights()(i) == 0.25);

  SpaceConfig g;
  g.kind = SpaceKind::fd_grid_rd;
  g.dim = 2;
  g.n = {4};
  g.lengths = {1.0};
  CHECK(GalerkinSpace(g).size() == 16);

  CHECK_THROWS(make(SpaceKind::fd_dirichlet_interval, 1));
  CHECK_THROWS(make(SpaceKind::fd_dirichlet_interval, 8, 1.0, 1.0));
  CHECK_THROWS(make(SpaceKind::fd_dirichlet_interval, 8, -1.0));
}

TEST_CASE("H gram is positive and Fourier modes are orthogonal under quadrature") {
  const double L = 2.0 * pi;
  const GalerkinSpace f = make(SpaceKind::fourier_torus, 7, L);
  CHECK(f.weights().minCoeff() > 0.0);
  const int M = 64;
  for (Index a = 0; a < 7; ++a)
    for (Index b = 0; b < 7; ++b) {
      double s = 0.0;
      for (int q = 0; q < M; ++q) s += basis(a, L * q / M, L) * basis(b, L * q / M, L) * L / M;
      CHECK(std::abs(s - (a == b ? f.weights()(a) : 0.0)) < 1e-12);
    }
}

TEST_CASE("h_norm") {
  const double L = 2.0 * pi;
  const GalerkinSpace f = make(SpaceKind::fourier_torus, 8, L);
  CHECK(h_norm(f, Vector::Zero(8)) == 0.0);
  Vector cosx = Vector::Zero(8);
  cosx(1) = 1.0;
  // Midpoint quadrature of cos^2 on a fine grid.
  double q = 0.0;
  const int M = 10000;
  for (int i = 0; i < M; ++i) q += std::pow(std::cos(L * (i + 0.5) / M), 2) * L / M;
  CHECK(h_norm(f, cosx) == doctest::Approx(std::sqrt(q)).epsilon(1e-12));

  std::mt19937_64 rng(3);
  const GalerkinSpace d = make(SpaceKind::fd_dirichlet_interval, 20, 1.0);
  const Vector v = random_vector(20, rng);
  // Trapezoid rule for the square of the piecewise-linear interpolant's nodal
  // values, boundary zeros included.
  const double h = 1.0 / 21.0;
  double trap = 0.0;
  for (int i = 0; i <= 20; ++i) {
    const double left = i == 0 ? 0.0 : v(i - 1);
    const double right = i == 20 ? 0.0 : v(i);
    trap += 0.5 * h * (left * left + right * right);
  }
  CHECK(rel(h_norm_squared(d, v), trap) < 1e-12);
  CHECK_THROWS(h_norm(d, Vector::Zero(5)));
}

TEST_CASE("v_norm") {
  const double L = 2.0 * pi;
  const GalerkinSpace f = make(SpaceKind::fourier_torus, 9, L);
  CHECK(v_norm(f, Vector::Zero(9)) == 0.0);
  for (int k = 1; k <= 4; ++k) {
    Vector v = Vector::Zero(9);
    v(2 * k - 1) = 1.0;
    double q = 0.0;
    const int M = 4096;
    for (int i = 0; i < M; ++i) {
      const double x = L * i / M;
      q += (std::pow(std::cos(k * x), 2) + std::pow(k * std::sin(k * x), 2)) * L / M;
    }
    CHECK(v_norm(f, v) == doctest::Approx(std::sqrt(q)).epsilon(1e-12));
    CHECK(v_norm(f, v) == doctest::Approx(std::sqrt(pi * (1.0 + k * k))).epsilon(1e-12));
  }

  // Hat function at alpha = 3.
  const Index n = 9;
  const GalerkinSpace d = make(SpaceKind::fd_dirichlet_interval, n, 1.0, 3.0);
  const double h = 1.0 / (n + 1);
  Vector hat(n);
  for (Index i = 0; i < n; ++i) hat(i) = std::min<double>(i + 1, n - i) * h;
  double s = 0.0;
  for (Index e = 0; e <= n; ++e) {
    const double left = e == 0 ? 0.0 : hat(e - 1);
    const double right = e == n ? 0.0 : hat(e);
    s += h * std::pow(std::abs((right - left) / h), 3);
  }
  CHECK(v_norm(d, hat) == doctest::Approx(std::cbrt(s)).epsilon(1e-13));
}

TEST_CASE("v_norm vanishes only on the kernel") {
  std::mt19937_64 rng(5);
  const GalerkinSpace d = make(SpaceKind::fd_dirichlet_interval, 12, 1.0, 2.0, VNormConvention::seminorm);
  for (int s = 0; s < 50; ++s) CHECK(v_norm(d, random_vector(12, rng)) > 0.0);
  const GalerkinSpace nm = make(SpaceKind::fd_neumann_interval, 12, 1.0, 2.0, VNormConvention::seminorm);
  CHECK(v_norm(nm, Vector::Ones(12)) == 0.0);
  const GalerkinSpace f = make(SpaceKind::fourier_torus, 9, 2.0 * pi, 2.0, VNormConvention::seminorm);
  Vector c = Vector::Zero(9);
  c(0) = 3.0;
  CHECK(v_norm(f, c) == 0.0);
}

TEST_CASE("V embeds into H with a discrete Poincare constant") {
  // For the Dirichlet seminorm the sharp constant is 1 / sqrt(lambda_min) of
  // the discrete Laplacian, below L / pi.
  std::mt19937_64 rng(11);
  const GalerkinSpace d = make(SpaceKind::fd_dirichlet_interval, 30, 1.0, 2.0, VNormConvention::seminorm);
  for (int s = 0; s < 200; ++s) {
    const Vector v = random_vector(30, rng);
    CHECK(h_norm(d, v) <= (1.0 / pi) * v_norm(d, v) * (1.0 + 1e-12));
  }
}

TEST_CASE("duality pairing") {
  std::mt19937_64 rng(7);
  const GalerkinSpace d = make(SpaceKind::fd_dirichlet_interval, 15, 1.0);
  const Vector v = random_vector(15, rng), w = random_vector(15, rng);
  CHECK(duality_pair(d, Vector::Zero(15), v) == 0.0);
  CHECK(rel(duality_pair(d, riesz_dual(d, w), v), h_inner(d, w, v)) < 1e-14);

  // Discrete Laplacian of w: -sum_edges h (Dw)(Dv).
  CoefficientField a = CoefficientField::constant({1, 1, 1, 1, 1}, 1.0);
  CoefficientField b = CoefficientField::constant({1, 1, 1, 1, 1}, 0.0);
  const OperatorPair heat = heat_dirichlet_make(a, b, {}, d);
  const double h = 1.0 / 16.0;
  double oracle = 0.0;
  for (Index e = 0; e <= 15; ++e) {
    const double dw = ((e == 15 ? 0.0 : w(e)) - (e == 0 ? 0.0 : w(e - 1))) / h;
    const double dv = ((e == 15 ? 0.0 : v(e)) - (e == 0 ? 0.0 : v(e - 1))) / h;
    oracle -= h * dw * dv;
  }
  CHECK(rel(duality_pair(d, apply_A(heat, 0.0, w), v), oracle) < 1e-12);
}

TEST_CASE("inner product invariants on sampled vectors") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  for (SpaceKind kind : {SpaceKind::fourier_torus, SpaceKind::fd_dirichlet_interval, SpaceKind::fd_neumann_interval}) {
    const GalerkinSpace s = make(kind, 11, kind == SpaceKind::fourier_torus ? 2.0 * pi : 1.0);
    for (int t = 0; t < 200; ++t) {
      const Vector u = random_vector(11, rng), v = random_vector(11, rng), f = random_vector(11, rng),
                   g = random_vector(11, rng);
      CHECK(std::abs(h_inner(s, u, v)) <= h_norm(s, u) * h_norm(s, v) * (1.0 + 1e-12));
      const double a = U(rng), b = U(rng);
      const double lhs = duality_pair(s, a * f + b * g, v);
      const double rhs = a * duality_pair(s, f, v) + b * duality_pair(s, g, v);
      CHECK(std::abs(lhs - rhs) <= 1e-12 * (std::abs(a * duality_pair(s, f, v)) + std::abs(b * duality_pair(s, g, v))));
      CHECK(h_norm_squared(s, v) == doctest::Approx(duality_pair(s, s.h_gram() * v, v)).epsilon(1e-15));
    }
  }
}

TEST_CASE("Parseval against quadrature of the reconstructed function") {
  std::mt19937_64 rng(17);
  const double L = 3.0;
  const GalerkinSpace f = make(SpaceKind::fourier_torus, 9, L);
  for (int t = 0; t < 20; ++t) {
    const Vector c = random_vector(9, rng);
    const int M = 64;
    double q = 0.0;
    for (int i = 0; i < M; ++i) {
      double u = 0.0;
      for (Index j = 0; j < 9; ++j) u += c(j) * basis(j, L * i / M, L);
      q += u * u * L / M;
    }
    CHECK(rel(h_norm(f, c), std::sqrt(q)) < 1e-12);
  }
}

TEST_CASE("dual norm") {
  std::mt19937_64 rng(19);
  const GalerkinSpace d = make(SpaceKind::fd_dirichlet_interval, 10, 1.0);
  const SparseMatrix S = v_gram(d);
  const Eigen::MatrixXd Sd(S);
  for (int t = 0; t < 20; ++t) {
    const Vector f = random_vector(10, rng);
    const double dn = dual_norm(d, f);
    // The supremum is attained at S^{-1} f.
    const Vector vstar = Sd.ldlt().solve(f);
    CHECK(rel(dn, std::abs(f.dot(vstar)) / v_norm(d, vstar)) < 1e-10);
    for (int s = 0; s < 20; ++s) {
      const Vector v = random_vector(10, rng);
      CHECK(std::abs(f.dot(v)) <= dn * v_norm(d, v) * (1.0 + 1e-12));
    }
  }
  // W^{1,3} dual norm dominates sampled ratios.
  const GalerkinSpace p = make(SpaceKind::fd_dirichlet_interval, 10, 1.0, 3.0);
  for (int t = 0; t < 20; ++t) {
    const Vector f = random_vector(10, rng);
    const double dn = dual_norm(p, f);
    for (int s = 0; s < 50; ++s) {
      const Vector v = random_vector(10, rng);
      CHECK(std::abs(f.dot(v)) <= dn * v_norm(p, v) * (1.0 + 1e-9));
    }
  }
}
