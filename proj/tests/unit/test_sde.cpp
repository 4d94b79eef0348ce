#include <cmath>
#include <random>

#include "doctest.h"
#include "psld/error.hpp"
#include "psld/sde.hpp"

#ifdef PSLD_HAVE_EIGEN
#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#endif

using namespace psld;

namespace {

ProcessSpec random_psld(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ProcessSpec s;
  s.beta = 0.5 + 15.0 * u(g);
  s.gamma_fric = 0.001 + 2.0 * u(g);
  s.nu = 0.1 + 8.0 * u(g);
  s.mass_inv = 0.2 + 8.0 * u(g);
  s.gamma0 = 0.01 + u(g);
  return s;
}

double cov_diff(const SPD2& a, const SPD2& b) {
  return std::max({std::abs(a.xx - b.xx), std::abs(a.xm - b.xm), std::abs(a.mm - b.mm)});
}

}  // namespace

TEST_CASE("stationary covariance solves the Lyapunov equation") {
  std::mt19937_64 g(5);
  for (int k = 0; k < 100; ++k) {
    const ProcessSpec s = random_psld(g);
    const BlockMat2 F = drift_matrix(s), S = stationary_cov(s).full();
    const BlockMat2 R = F * S + S * F.transpose() + diffusion_gram(s);
    CHECK(R.max_abs() < 1e-12);
  }
}

TEST_CASE("closed-form kernel covariance matches RK4 on the Lyapunov ODE") {
  std::mt19937_64 g(6);
  for (int k = 0; k < 10; ++k) {
    const ProcessSpec s = random_psld(g);
    for (double t : {0.01, 0.3, 1.0}) {
      const SPD2 a = kernel_cov(s, t, conditional_initial_cov(s));
      const SPD2 b = kernel_cov_rk4(s, t, conditional_initial_cov(s), 1e-4);
      CHECK(cov_diff(a, b) < 1e-9);
    }
  }
  // time-varying VP
  const ProcessSpec vp = ProcessSpec::vp(0.1, 19.9);
  const SPD2 init{0.3, 0.0, 1.0};
  for (double t : {0.05, 0.5, 1.0}) CHECK(cov_diff(kernel_cov(vp, t, init), kernel_cov_rk4(vp, t, init, 1e-4)) < 1e-9);
}

#ifdef PSLD_HAVE_EIGEN
TEST_CASE("closed-form kernel covariance matches the vectorised Lyapunov exponential") {
  // vec(S)' = (I (x) F + F (x) I) vec(S) + vec(Q), solved exactly through a 5x5 augmented exponential
  std::mt19937_64 g(7);
  for (int k = 0; k < 20; ++k) {
    const ProcessSpec s = random_psld(g);
    const BlockMat2 F = drift_matrix(s), Q = diffusion_gram(s);
    const SPD2 init{0.4, 0.01, 0.2};
    const double t = 0.7;
    Eigen::Matrix2d Fe;
    Fe << F.a, F.b, F.c, F.dd;
    const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
    Eigen::Matrix4d K;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        K.block<2, 2>(2 * i, 2 * j) = I(i, j) * Fe + Fe(i, j) * I;
      }
    Eigen::Matrix<double, 5, 5> A = Eigen::Matrix<double, 5, 5>::Zero();
    A.block<4, 4>(0, 0) = K;
    A.block<4, 1>(0, 4) << Q.a, Q.c, Q.b, Q.dd;  // column-major vec
    const Eigen::Matrix<double, 5, 5> E = (A * t).exp();
    Eigen::Matrix<double, 5, 1> v0;
    v0 << init.xx, init.xm, init.xm, init.mm, 1.0;
    const Eigen::Matrix<double, 5, 1> v = E * v0;
    const SPD2 c = kernel_cov(s, t, init);
    CHECK(std::abs(c.xx - v(0)) < 1e-10 * std::max(1.0, std::abs(v(0))));
    CHECK(std::abs(c.xm - v(1)) < 1e-10 * std::max(1.0, std::abs(v(1))));
    CHECK(std::abs(c.mm - v(3)) < 1e-10 * std::max(1.0, std::abs(v(3))));
    CHECK(std::abs(v(1) - v(2)) < 1e-12);
  }
}
#endif

TEST_CASE("kernel started at the stationary law stays stationary") {
  std::mt19937_64 g(8);
  for (int k = 0; k < 20; ++k) {
    const ProcessSpec s = random_psld(g);
    const SPD2 inf = stationary_cov(s);
    for (int i = 0; i <= 20; ++i) CHECK(cov_diff(kernel_cov(s, s.T * i / 20.0, inf), inf) < 1e-8);
  }
}

TEST_CASE("mean map") {
  const ProcessSpec s;
  const BlockMat2 d = mean_map(s, 0.4) - mat_exp(drift_matrix(s), 0.4);
  CHECK(d.max_abs() < 1e-14);
  const ProcessSpec vp = ProcessSpec::vp(0.1, 19.9);
  CHECK(mean_map(vp, 1.0).a == doctest::Approx(std::exp(-0.5 * (0.1 + 0.5 * 19.9))));
  CHECK(mean_map(vp, 1.0).dd == 1.0);
}

TEST_CASE("PSLD drift and diffusion entries") {
  const ProcessSpec s;
  const BlockMat2 F = drift_matrix(s);
  CHECK(F.a == doctest::Approx(-0.5 * 8.0 * 0.01));
  CHECK(F.b == doctest::Approx(0.5 * 8.0 * 4.0));
  CHECK(F.c == doctest::Approx(-0.5 * 8.0));
  CHECK(F.dd == doctest::Approx(-0.5 * 8.0 * 4.01));
  const BlockMat2 GG = diffusion_gram(s);
  CHECK(GG.a == doctest::Approx(8.0 * 0.01));
  CHECK(GG.dd == doctest::Approx(8.0 * 4.01 * 0.25));
  CHECK(GG.b == 0.0);
}

TEST_CASE("probability-flow field") {
  const ProcessSpec s;
  const State z({1.0}, {2.0}), sc({-0.5}, {0.25});
  const State f = prob_flow_field(s, sc, z, 0.3);
  CHECK(f.x[0] == doctest::Approx(4.0 * (-0.01 * 1.0 + 4.0 * 2.0) - 0.5 * 0.08 * -0.5));
  CHECK(f.m[0] == doctest::Approx(4.0 * (-1.0 - 4.01 * 2.0) - 0.5 * 8.0 * 4.01 * 0.25 * 0.25));
  const State r = reverse_sde_drift(s, sc, z, 0.3);
  CHECK(r.x[0] == doctest::Approx(4.0 * (-0.01 * 1.0 + 4.0 * 2.0) - 0.08 * -0.5));
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(kernel_at(ProcessSpec{}, -0.1, SPD2::diag(1.0, 1.0)), Error);
  ProcessSpec bad;
  bad.beta = -1.0;
  try {
    bad.validate();
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidConfig);
  }
  ProcessSpec a, b;
  CHECK(a == b);
  b.nu = 2.0;
  CHECK_FALSE(a == b);
}
