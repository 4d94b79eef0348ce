#include <cmath>
#include <random>

#include "doctest.h"
#include "psld/error.hpp"
#include "psld/linalg2.hpp"

using namespace psld;

namespace {

// scaling and squaring around a 20-term Taylor series
BlockMat2 taylor_exp(const BlockMat2& M) {
  int k = 0;
  double nrm = M.max_abs();
  while (nrm > 0.1) {
    nrm *= 0.5;
    ++k;
  }
  const BlockMat2 S = std::ldexp(1.0, -k) * M;
  BlockMat2 term = BlockMat2::identity(), acc = BlockMat2::identity();
  for (int n = 1; n <= 20; ++n) {
    term = (1.0 / n) * (term * S);
    acc += term;
  }
  for (int i = 0; i < k; ++i) acc = acc * acc;
  return acc;
}

double rel_diff(const BlockMat2& a, const BlockMat2& b) { return (a - b).max_abs() / std::max(1.0, b.max_abs()); }

}  // namespace

TEST_CASE("mat_exp agrees with a Taylor oracle across eigen-structures") {
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 200; ++k) {
    const BlockMat2 M{u(g), u(g), u(g), u(g)};
    for (double t : {0.0, 0.3, 1.0, -0.7}) CHECK(rel_diff(mat_exp(M, t), taylor_exp(t * M)) < 1e-12);
  }
  // critically damped PSLD drift: repeated eigenvalue, not diagonalizable
  const BlockMat2 F{-0.04, 16.0, -4.0, -16.04};
  CHECK(rel_diff(mat_exp(F, 1.0), taylor_exp(F)) < 1e-12);
  // rotation
  const BlockMat2 R{0.0, -1.0, 1.0, 0.0};
  const BlockMat2 e = mat_exp(R, M_PI / 2);
  CHECK(e.a == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(e.c == doctest::Approx(1.0));
}

TEST_CASE("mat_exp semigroup and trivial cases") {
  const BlockMat2 M{0.3, -1.2, 2.0, -0.5};
  CHECK(rel_diff(mat_exp(M, 0.7) * mat_exp(M, 0.4), mat_exp(M, 1.1)) < 1e-13);
  CHECK(mat_exp(M, 0.0) == BlockMat2::identity());
  const BlockMat2 d = mat_exp(BlockMat2::diag(1.0, -2.0), 1.5);
  CHECK(d.a == doctest::Approx(std::exp(1.5)));
  CHECK(d.dd == doctest::Approx(std::exp(-3.0)));
  CHECK(d.b == 0.0);
}

TEST_CASE("cholesky2 reproduces S plus jitter") {
  const SPD2 S{2.0, 0.6, 0.5};
  const BlockMat2 L = cholesky2(S);
  CHECK(L.b == 0.0);
  const BlockMat2 R = L * L.transpose() - (S.full() + 1e-9 * BlockMat2::identity());
  CHECK(R.max_abs() < 1e-14);
  CHECK_THROWS_AS(cholesky2(SPD2{1.0, 2.0, 1.0}), Error);
  try {
    cholesky2(SPD2{-1.0, 0.0, 1.0});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotSPD);
  }
}

TEST_CASE("inverse and solve") {
  const BlockMat2 A{3.0, 1.0, -2.0, 0.5};
  CHECK((A * inverse2(A) - BlockMat2::identity()).max_abs() < 1e-15);
  const auto x = solve2(A, {1.0, 2.0});
  CHECK(3.0 * x[0] + 1.0 * x[1] == doctest::Approx(1.0));
  CHECK(-2.0 * x[0] + 0.5 * x[1] == doctest::Approx(2.0));
  try {
    inverse2(BlockMat2{1.0, 2.0, 2.0, 4.0});
    FAIL("expected Singular");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Singular);
  }
}

TEST_CASE("eigenvalues match trace and determinant") {
  const BlockMat2 M{1.0, -5.0, 2.0, 0.5};
  const auto ev = eigenvalues(M);
  CHECK(std::abs(ev[0] + ev[1] - M.trace()) < 1e-13);
  CHECK(std::abs(ev[0] * ev[1] - M.det()) < 1e-12);
  const auto rot = eigenvalues(BlockMat2{0.0, -1.0, 1.0, 0.0});
  CHECK(std::abs(std::abs(rot[0].imag()) - 1.0) < 1e-15);
}

TEST_CASE("block matrices act coordinate-wise on states") {
  const State z({1.0, 2.0}, {3.0, 4.0});
  const BlockMat2 M{1.0, 2.0, -1.0, 0.5};
  const State w = apply_to_state(M, z);
  CHECK(w.x[1] == doctest::Approx(2.0 + 8.0));
  CHECK(w.m[0] == doctest::Approx(-1.0 + 1.5));
  State acc(2);
  add_applied(acc, M, z);
  CHECK(max_abs_diff(acc, w) == 0.0);
  CHECK(hadamard(M, BlockMat2::diag(1.0, 0.0)) == BlockMat2::diag(1.0, 0.0));
}
