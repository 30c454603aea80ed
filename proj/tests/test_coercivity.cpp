#include <doctest.h>

#include "lpspde/coercivity.hpp"
#include "pairs.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace lpspde;
using namespace lpspde::test;

namespace {

constexpr double pi = std::numbers::pi;

Vector unit(Index n, Index i) {
  Vector v = Vector::Zero(n);
  v(i) = 1.0;
  return v;
}

OperatorPair heat_identity(Index n, double b, VNormConvention conv = VNormConvention::seminorm) {
  return heat_dirichlet_make(scalar_field(1.0), scalar_field(b), {}, dirichlet_space(n, conv));
}

}  // namespace

TEST_CASE("coercivity lhs at p = 2 is the classical form") {
  for (const OperatorPair& pair : all_pairs()) {
    CAPTURE(pair.equation);
    const VectorSampler s(pair, 5);
    for (Index i = 0; i < 8; ++i) {
      const Vector v = s.draw(i);
      CHECK(coercivity_lhs(pair, 0.0, v, 2.0) == classical_lhs(pair, 0.0, v));
      CHECK(pminus1_lhs(pair, 0.0, v, 2.0) == classical_lhs(pair, 0.0, v));
    }
    CHECK_THROWS(coercivity_lhs(pair, 0.0, Vector::Zero(pair.size()), 4.0));
  }
}

TEST_CASE("spectral example on single modes") {
  const double gamma = 0.5;
  const OperatorPair pair = spectral_pair(gamma, 9);
  for (Index k = 1; k <= 4; ++k) {
    const Vector e = unit(9, 2 * k - 1);
    for (double p : {2.0, 3.0, 4.0, 8.0}) {
      const double expect = static_cast<double>(k * k) * (-2.0 + 4.0 * gamma * gamma * (p - 1.0)) * pi;
      CHECK(coercivity_lhs(pair, 0.0, e, p) == doctest::Approx(expect).epsilon(1e-13));
    }
  }
}

TEST_CASE("heat with B = 0 gives -2 ||grad v||^2 for all p") {
  const OperatorPair pair = heat_identity(20, 0.0);
  const VectorSampler s(pair, 11);
  for (Index i = 0; i < 12; ++i) {
    const Vector v = s.draw(i);
    const double g = gradient_power_sum(pair.sp(), v, 2.0);
    for (double p : {2.0, 4.0, 8.0}) CHECK(coercivity_lhs(pair, 0.0, v, p) == doctest::Approx(-2.0 * g).epsilon(1e-12));
  }
}

TEST_CASE("audits of the worked examples") {
  SUBCASE("heat a = I, b = 0, p = 8") {
    const OperatorPair pair = heat_identity(20, 0.0);
    const CoercivityReport r = check_coercivity(pair, 8.0, 2.0, 0.0, VectorSampler(pair, 1), 400);
    CHECK(r.passed);
    CHECK(r.violations.empty());
    CHECK(r.theta_fit == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("Burgers gamma = 1") {
    const OperatorPair pair = burgers_make(1.0, fourier_space(17, VNormConvention::seminorm));
    for (double p : {2.0, 4.0, 8.0}) {
      const CoercivityReport r = check_coercivity(pair, p, 1.0, 0.0, VectorSampler(pair, 2), 400);
      CHECK(r.passed);
      CHECK(r.theta_fit >= 1.0 - 1e-9);
    }
  }
  SUBCASE("spectral gamma = 0.5 at p = 4 fails") {
    const OperatorPair pair = spectral_example_make(0.5, fourier_space(9, VNormConvention::seminorm));
    const CoercivityReport r = check_coercivity(pair, 4.0, 0.1, 0.0, VectorSampler(pair, 3), 400);
    CHECK_FALSE(r.passed);
    CHECK_FALSE(r.violations.empty());
    CHECK(r.violations.size() <= max_witnesses);
    CHECK(r.theta_fit == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(r.worst_margin < 0.0);
  }
}

TEST_CASE("theta_fit is nonincreasing in p and dominated by the (p-1) variant") {
  for (const OperatorPair& pair : all_pairs()) {
    CAPTURE(pair.equation);
    const VectorSampler s(pair, 21);
    for (Index i = 0; i < 40; ++i) {
      const Vector v = s.draw(i);
      const double l2 = coercivity_lhs(pair, 0.0, v, 2.0);
      const double l4 = coercivity_lhs(pair, 0.0, v, 4.0);
      const double l8 = coercivity_lhs(pair, 0.0, v, 8.0);
      const double scale = 1e-12 * (std::abs(l2) + std::abs(l8) + 1e-300);
      CHECK(l2 <= l4 + scale);
      CHECK(l4 <= l8 + scale);
      for (double p : {2.0, 4.0, 8.0})
        CHECK(coercivity_lhs(pair, 0.0, v, p) <= pminus1_lhs(pair, 0.0, v, p) + 1e-12 * std::abs(pminus1_lhs(pair, 0.0, v, p)) + 1e-300);
    }
    double prev = std::numeric_limits<double>::infinity();
    for (double p : {2.0, 4.0, 8.0}) {
      const double fit = check_coercivity(pair, p, 0.0, 0.0, s, 60).theta_fit;
      CHECK(fit <= prev + 1e-9 * std::abs(prev == std::numeric_limits<double>::infinity() ? 1.0 : prev));
      prev = fit;
    }
  }
}

TEST_CASE("(p-1) variant with constant b is strictly more restrictive") {
  const OperatorPair pair = heat_identity(20, 0.5);
  const VectorSampler s(pair, 4);
  const double h3 = check_coercivity(pair, 4.0, 0.0, 0.0, s, 200).theta_fit;
  const double pm = check_coercivity_pminus1(pair, 4.0, 0.0, 0.0, s, 200).theta_fit;
  CHECK(pm < h3 - 1e-3);
  const double h3_2 = check_coercivity(pair, 2.0, 0.0, 0.0, s, 200).theta_fit;
  const double pm_2 = check_coercivity_pminus1(pair, 2.0, 0.0, 0.0, s, 200).theta_fit;
  CHECK(h3_2 == pm_2);
  // B*v = 0, so H3 does not depend on p.
  CHECK(h3 == doctest::Approx(h3_2).epsilon(1e-12));
}

TEST_CASE("scale degree two for linear pairs") {
  for (const OperatorPair& pair : all_pairs()) {
    if (!pair.linear) continue;
    CAPTURE(pair.equation);
    const VectorSampler s(pair, 8);
    for (Index i = 0; i < 8; ++i) {
      const Vector v = s.draw(i);
      for (double c : {0.01, 3.0, -7.5}) {
        const double base = coercivity_lhs(pair, 0.0, v, 4.0);
        CHECK(coercivity_lhs(pair, 0.0, c * v, 4.0) == doctest::Approx(c * c * base).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("reduction chain: system, heat and higher order agree") {
  const double a = 1.5;
  const OperatorPair heat =
      heat_dirichlet_make(scalar_field(a), scalar_field(0.0), {}, dirichlet_space(16, VNormConvention::seminorm));
  const OperatorPair sys = system_make(scalar_field(a), scalar_field(0.0), scalar_field(0.0),
                                       dirichlet_space(16, VNormConvention::seminorm));
  const OperatorPair ho = higher_order_make(1, scalar_field(a), scalar_field(0.0), fourier_space(11, VNormConvention::seminorm));
  for (double p : {2.0, 4.0}) {
    const double t1 = check_coercivity(heat, p, 0.0, 0.0, VectorSampler(heat, 1), 200).theta_fit;
    const double t2 = check_coercivity(sys, p, 0.0, 0.0, VectorSampler(sys, 1), 200).theta_fit;
    const double t3 = check_coercivity(ho, p, 0.0, 0.0, VectorSampler(ho, 1), 200).theta_fit;
    CHECK(std::abs(t1 - t2) <= 1e-6);
    CHECK(std::abs(t1 - t3) <= 1e-6);
    CHECK(t1 == doctest::Approx(2.0 * a).epsilon(1e-9));
  }
}

TEST_CASE("monotonicity") {
  SUBCASE("heat with b = 0 is monotone") {
    const OperatorPair pair = heat_identity(16, 0.0);
    const MonotonicityReport r = check_monotonicity(pair, VectorSampler(pair, 2), 100);
    CHECK(r.K_fit <= 0.0);
    CHECK(r.n_samples == 100);
  }
  SUBCASE("Burgers fits a finite constant") {
    const OperatorPair pair = burgers_pair(1.0, 17);
    const MonotonicityReport r = check_monotonicity(pair, VectorSampler(pair, 2), 100);
    CHECK(std::isfinite(r.K_fit));
    REQUIRE(r.ratio.size() == r.growth.size());
    for (std::size_t i = 0; i < r.ratio.size(); ++i) CHECK(r.ratio[i] <= r.K_fit * r.growth[i] + 1e-9 * r.growth[i]);
  }
  SUBCASE("u = v gives zero") {
    const OperatorPair pair = burgers_pair(1.0, 17);
    const Vector u = VectorSampler(pair, 3).draw(0);
    const Vector dA = apply_A(pair, 0.0, u) - apply_A(pair, 0.0, u);
    const Matrix dB = apply_B(pair, 0.0, u) - apply_B(pair, 0.0, u);
    CHECK(2.0 * duality_pair(pair.sp(), dA, u - u) + hs_norm_squared(pair.sp(), dB) == 0.0);
  }
}

TEST_CASE("growth constants") {
  SUBCASE("p-Laplace K_A") {
    const OperatorPair pair = p_laplace_pair(16);
    const GrowthReport r = check_growth(pair, VectorSampler(pair, 4), 300);
    CHECK(r.K_A_fit <= 0.5 + 1e-3);
    CHECK(r.K_A_fit > 0.0);
  }
  SUBCASE("Burgers K_alpha = gamma^2") {
    const double gamma = 0.8;
    const OperatorPair pair = burgers_make(gamma, fourier_space(17, VNormConvention::seminorm));
    const GrowthReport r = check_growth(pair, VectorSampler(pair, 4), 300);
    CHECK(r.K_alpha_fit == doctest::Approx(gamma * gamma).epsilon(1e-9));
    CHECK(r.passed);
  }
  SUBCASE("B = 0") {
    const OperatorPair pair = heat_identity(16, 0.0);
    const GrowthReport r = check_growth(pair, VectorSampler(pair, 4), 100);
    CHECK(r.K_B_fit == 0.0);
    CHECK(r.K_alpha_fit == 0.0);
  }
}

TEST_CASE("hemicontinuity") {
  const std::vector<double> lambdas{-1.0, -0.5, 0.0, 0.3, 0.9, 1.4, 2.0};
  SUBCASE("linear A is affine in lambda") {
    const OperatorPair pair = heat_dirichlet_pair(16);
    const VectorSampler s(pair, 6);
    const auto r = check_hemicontinuity(pair, s.draw(0), s.draw(1), s.draw(2), lambdas);
    CHECK(r.max_second_difference <= 1e-12);
    CHECK(r.continuous);
  }
  SUBCASE("Burgers is quadratic in lambda") {
    const OperatorPair pair = burgers_pair(1.0, 17);
    const VectorSampler s(pair, 6);
    // Gaussian-family draws; single modes can make the quadratic term vanish.
    const auto r = check_hemicontinuity(pair, s.draw(0), s.draw(4), s.draw(8), lambdas);
    CHECK(r.max_second_difference > 1e-6);
    CHECK(r.max_third_difference <= 1e-11);
  }
  SUBCASE("p-Laplace refinement errors decrease") {
    const OperatorPair pair = p_laplace_pair(16);
    const VectorSampler s(pair, 6);
    const auto r = check_hemicontinuity(pair, s.draw(0), s.draw(1), s.draw(2), lambdas);
    CHECK(r.continuous);
    REQUIRE(r.refinement_errors.size() >= 2);
    CHECK(r.refinement_errors.back() < r.refinement_errors.front());
  }
}

TEST_CASE("ellipticity_min") {
  CHECK(ellipticity_min(CoefficientField::constant({2, 2, 1, 1, 1}, 0.0), CoefficientField({2, 1, 1, 1, 1})) == 0.0);
  CoefficientField id({2, 2, 1, 1, 1});
  id.set_everywhere(0, 0, 0, 0, 0, 1.0);
  id.set_everywhere(1, 1, 0, 0, 0, 1.0);
  CHECK(ellipticity_min(id, CoefficientField({2, 1, 1, 1, 1})) == doctest::Approx(2.0));
  CHECK(ellipticity_min(scalar_field(1.0), scalar_field(1.0)) == doctest::Approx(1.0));

  // Random SPD a and two noise vectors in d = 2 against a Rayleigh brute force.
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::Matrix2d m;
    m << g(rng), g(rng), g(rng), g(rng);
    const Eigen::Matrix2d spd = m * m.transpose() + Eigen::Matrix2d::Identity();
    CoefficientField a({2, 2, 1, 1, 1});
    CoefficientField b({2, 1, 1, 1, 2});
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) a.set_everywhere(i, j, 0, 0, 0, spd(i, j));
    Eigen::Matrix2d sig = Eigen::Matrix2d::Zero();
    for (int k = 0; k < 2; ++k) {
      const Eigen::Vector2d bk(0.5 * g(rng), 0.5 * g(rng));
      b.set_everywhere(0, 0, 0, 0, k, bk(0));
      b.set_everywhere(1, 0, 0, 0, k, bk(1));
      sig += bk * bk.transpose();
    }
    const Eigen::Matrix2d form = 2.0 * spd - sig;
    double brute = std::numeric_limits<double>::infinity();
    std::uniform_real_distribution<double> u(0.0, 2.0 * pi);
    for (int s = 0; s < 10000; ++s) {
      const double t = u(rng);
      const Eigen::Vector2d xi(std::cos(t), std::sin(t));
      brute = std::min(brute, xi.dot(form * xi));
    }
    const double est = ellipticity_min(a, b);
    CHECK(est <= brute + 1e-12);
    CHECK(brute - est <= 1e-6 * std::max(1.0, std::abs(est)) * 10.0);
  }
}

TEST_CASE("msp_check") {
  // N = 1 with lambda = sigma reduces to 2a - sigma.
  CoefficientField a({2, 2, 1, 1, 1});
  a.set_everywhere(0, 0, 0, 0, 0, 1.3);
  a.set_everywhere(1, 1, 0, 0, 0, 0.9);
  a.set_everywhere(0, 1, 0, 0, 0, 0.2);
  a.set_everywhere(1, 0, 0, 0, 0, 0.2);
  CoefficientField sigma({2, 1, 1, 1, 1});
  sigma.set_everywhere(0, 0, 0, 0, 0, 0.6);
  sigma.set_everywhere(1, 0, 0, 0, 0, -0.3);
  for (double p : {2.0, 4.0, 8.0})
    CHECK(std::abs(msp_check(a, sigma, sigma, p) - ellipticity_min(a, sigma)) <= 1e-4);

  // sigma = 0: twice the smallest eigenvalue of a, independent of p.
  const CoefficientField zero({2, 1, 1, 1, 1});
  Eigen::Matrix2d am;
  am << 1.3, 0.2, 0.2, 0.9;
  const double e = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(am).eigenvalues()(0);
  CHECK(msp_check(a, zero, zero, 2.0) == doctest::Approx(2.0 * e).epsilon(1e-6));
  CHECK(msp_check(a, zero, zero, 8.0) == doctest::Approx(2.0 * e).epsilon(1e-6));

  // p = 2 drops the (sigma - lambda) term.
  CHECK(msp_check(a, sigma, zero, 2.0) == doctest::Approx(msp_check(a, sigma, sigma, 2.0)).epsilon(1e-9));
  CHECK(msp_check(a, sigma, zero, 4.0) < msp_check(a, sigma, sigma, 4.0));

  // Coupled system, N = 2: the minimum is never above the sampled form.
  const OperatorPair sys = system_pair(8);
  CHECK(std::isfinite(*declared_constants(sys, 4.0).theta));
}

TEST_CASE("higher_order_check") {
  const double b = 0.5;
  for (double p : {2.0, 4.0, 8.0})
    CHECK(higher_order_check(scalar_field(1.0), scalar_field(b), 1, 1, p) == doctest::Approx(2.0 - b * b));
  CHECK(higher_order_check(scalar_field(1.0), scalar_field(b), 2, 1, 4.0) == doctest::Approx(2.0 - 3.0 * b * b));
  // d = 2, m = 1, B = 0: twice the smallest eigenvalue of A.
  CoefficientField A({1, 1, 2, 2, 1});
  A.set_everywhere(0, 0, 0, 0, 0, 2.0);
  A.set_everywhere(0, 0, 1, 1, 0, 1.0);
  A.set_everywhere(0, 0, 0, 1, 0, 0.5);
  A.set_everywhere(0, 0, 1, 0, 0, 0.5);
  Eigen::Matrix2d am;
  am << 2.0, 0.5, 0.5, 1.0;
  const double e = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(am).eigenvalues()(0);
  CHECK(higher_order_check(A, CoefficientField({1, 1, 2, 1, 1}), 1, 2, 4.0) == doctest::Approx(2.0 * e));
}

TEST_CASE("p-Laplace gamma bound") {
  const GammaBoundResult at = p_laplace_gamma_bound(3.0, 16.0 / 9.0, 100000);
  CHECK(at.passed);
  CHECK(at.worst_margin >= -1e-10);
  CHECK(at.n_samples >= 100000);
  CHECK(p_laplace_gamma_bound(3.0, 0.0, 20000).passed);
  const GammaBoundResult over = p_laplace_gamma_bound(3.0, 2.0, 100000);
  CHECK_FALSE(over.passed);
  CHECK(over.worst_margin < 0.0);
  // The reported witness really violates the inequality.
  const double x = over.worst_x, y = over.worst_y;
  const double m = 2.0 * (x * x - y * y) * (x - y) - 2.0 * std::pow(std::pow(x, 1.5) - std::pow(y, 1.5), 2.0);
  CHECK(m < 0.0);
}
