#include <cmath>

#include "doctest.h"
#include "psld/error.hpp"
#include "psld/harness.hpp"
#include "psld/score.hpp"

using namespace psld;

TEST_CASE("mixture score is the gradient of the log-density") {
  const ProcessSpec s;
  const MixtureSpec mix = benchmark_mixture(s);
  const State z({0.3, -0.8}, {0.2, 0.5});
  const double h = 1e-5;
  for (double t : {0.05, 0.4, 1.0}) {
    const State sc = marginal_score(mix, s, z, t);
    for (std::size_t i = 0; i < 2; ++i) {
      State p = z, q = z;
      p.x[i] += h;
      q.x[i] -= h;
      const double fd = (marginal_log_density(mix, s, p, t) - marginal_log_density(mix, s, q, t)) / (2 * h);
      CHECK(sc.x[i] == doctest::Approx(fd).epsilon(1e-6));
      p = z;
      q = z;
      p.m[i] += h;
      q.m[i] -= h;
      const double fdm = (marginal_log_density(mix, s, p, t) - marginal_log_density(mix, s, q, t)) / (2 * h);
      CHECK(sc.m[i] == doctest::Approx(fdm).epsilon(1e-6));
    }
  }
}

TEST_CASE("single Gaussian score is linear") {
  const ProcessSpec s;
  const SPD2 c0{0.25, 0.0, 0.01};
  const MixtureSpec mix = MixtureSpec::single(1, c0.xx, c0.mm);
  const State z({0.7}, {-0.3});
  const BlockMat2 Pinv = inverse2(kernel_cov(s, 0.3, c0).full());
  const State sc = marginal_score(mix, s, z, 0.3);
  CHECK(sc.x[0] == doctest::Approx(-(Pinv.a * 0.7 + Pinv.b * -0.3)));
  CHECK(sc.m[0] == doctest::Approx(-(Pinv.c * 0.7 + Pinv.dd * -0.3)));
}

TEST_CASE("responsibilities and log-density normalisation") {
  const ProcessSpec s;
  const MixtureSpec mix = benchmark_mixture(s);
  const auto w = responsibilities(mix, s, State({0.1, 0.2}, {0.0, 0.0}), 0.2);
  double sum = 0.0;
  for (double v : w) sum += v;
  CHECK(sum == doctest::Approx(1.0));
  // standard normal in one position and one momentum coordinate
  const ProcessSpec vp = ProcessSpec::vp(8.0);
  const MixtureSpec one = MixtureSpec::single(1, 1.0, 1.0);
  CHECK(marginal_log_density(one, vp, State({0.0}, {0.0}), 0.5) == doctest::Approx(-std::log(2 * M_PI)));
}

TEST_CASE("default C_out factors the inverse kernel covariance") {
  const ProcessSpec s;
  const Parameterization p(s);
  for (double t : {0.01, 0.2, 1.0}) {
    const BlockMat2 C = p.c_out(t);
    const BlockMat2 Sinv = inverse2(kernel_cov(s, t, conditional_initial_cov(s)).full() + 1e-9 * BlockMat2::identity());
    CHECK(((C * C.transpose()) - Sinv).max_abs() / Sinv.max_abs() < 1e-10);
    CHECK(C.c == 0.0);  // inverse transpose of a lower-triangular factor
    CHECK(p.c_skip(t) == BlockMat2::zero());
  }
}

TEST_CASE("VP parameterization is the usual eps form") {
  const ProcessSpec vp = ProcessSpec::vp(8.0);
  const Parameterization p(vp);
  const double sig = std::sqrt(1.0 - std::exp(-8.0 * 0.3));
  CHECK(p.c_out(0.3).a == doctest::Approx(-1.0 / sig));
  CHECK(p.c_noise(0.3) == 0.3);
  try {
    (void)p.c_out(0.0);
    FAIL("expected SingularCOut");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularCOut);
  }
  CHECK_THROWS_AS(Parameterization(vp, ParamKind::Preconditioned), Error);
}

TEST_CASE("preconditioned skip term uses the blockwise data-scaled kernel") {
  const ProcessSpec s;
  const Parameterization p(s, ParamKind::Preconditioned, 0.25);
  const SPD2 bar = kernel_cov(s, 0.4, SPD2::diag(0.25, s.mass() * s.gamma0));
  const BlockMat2 cs = p.c_skip(0.4);
  CHECK(cs.a == doctest::Approx(bar.xx));
  CHECK(cs.dd == doctest::Approx(bar.mm));
  CHECK(cs.b == 0.0);
}

TEST_CASE("eps and score round trip") {
  const ProcessSpec s;
  for (auto kind : {ParamKind::Default, ParamKind::Preconditioned}) {
    const Parameterization p(s, kind);
    const State z({0.4, -1.0}, {0.3, 0.1}), sc({1.5, -2.0}, {0.7, -0.2});
    const State e = eps_from_score(p, z, 0.3, sc);
    CHECK(max_abs_diff(score_from_eps(p, z, 0.3, e), sc) < 1e-11);
  }
}

TEST_CASE("provider counts evaluations") {
  const ProcessSpec s;
  const AnalyticScore sc(benchmark_mixture(s), Parameterization(s));
  CHECK(sc.nfe() == 0);
  const State z({0.0, 0.0}, {0.0, 0.0});
  for (int k = 0; k < 7; ++k) (void)sc.evaluate(z, 0.5);
  CHECK(sc.nfe() == 7);
  sc.reset_nfe();
  CHECK(sc.nfe() == 0);
  const EpsFunctionScore f(Parameterization(s), [](const State& zz, double) { return zz; });
  const ScoreEval e = f.evaluate(z, 0.2);
  CHECK(e.eps.max_abs() == 0.0);
  CHECK(f.nfe() == 1);
}

TEST_CASE("degenerate data covariance is reported") {
  const ProcessSpec vp = ProcessSpec::vp(8.0);
  MixtureSpec mix = MixtureSpec::single(1, 0.0, 0.0);
  try {
    (void)marginal_score(mix, vp, State({0.1}, {0.0}), 0.0);
    FAIL("expected DegenerateCovariance");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateCovariance);
  }
  MixtureSpec bad = MixtureSpec::single(1, 1.0, 1.0);
  bad.components[0].weight = 0.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}
