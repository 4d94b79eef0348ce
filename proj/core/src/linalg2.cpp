#include "psld/linalg2.hpp"

#include <algorithm>
#include <cmath>

#include "psld/error.hpp"

namespace psld {

double BlockMat2::max_abs() const {
  return std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(dd)});
}

bool BlockMat2::finite() const {
  return std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && std::isfinite(dd);
}

BlockMat2& BlockMat2::operator+=(const BlockMat2& o) {
  a += o.a; b += o.b; c += o.c; dd += o.dd;
  return *this;
}

BlockMat2& BlockMat2::operator-=(const BlockMat2& o) {
  a -= o.a; b -= o.b; c -= o.c; dd -= o.dd;
  return *this;
}

BlockMat2& BlockMat2::operator*=(double s) {
  a *= s; b *= s; c *= s; dd *= s;
  return *this;
}

BlockMat2 operator+(BlockMat2 l, const BlockMat2& r) { return l += r; }
BlockMat2 operator-(BlockMat2 l, const BlockMat2& r) { return l -= r; }
BlockMat2 operator-(const BlockMat2& m) { return {-m.a, -m.b, -m.c, -m.dd}; }
BlockMat2 operator*(double s, BlockMat2 m) { return m *= s; }
BlockMat2 operator*(BlockMat2 m, double s) { return m *= s; }

BlockMat2 operator*(const BlockMat2& l, const BlockMat2& r) {
  return {l.a * r.a + l.b * r.c, l.a * r.b + l.b * r.dd,
          l.c * r.a + l.dd * r.c, l.c * r.b + l.dd * r.dd};
}

bool operator==(const BlockMat2& l, const BlockMat2& r) {
  return l.a == r.a && l.b == r.b && l.c == r.c && l.dd == r.dd;
}

BlockMat2 hadamard(const BlockMat2& l, const BlockMat2& r) {
  return {l.a * r.a, l.b * r.b, l.c * r.c, l.dd * r.dd};
}

SPD2 SPD2::from(const BlockMat2& m) { return {m.a, 0.5 * (m.b + m.c), m.dd}; }

bool operator==(const SPD2& l, const SPD2& r) {
  return l.xx == r.xx && l.xm == r.xm && l.mm == r.mm;
}

bool State::finite() const {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  for (double v : m)
    if (!std::isfinite(v)) return false;
  return true;
}

double State::max_abs() const {
  double r = 0.0;
  for (double v : x) r = std::max(r, std::abs(v));
  for (double v : m) r = std::max(r, std::abs(v));
  return r;
}

State operator+(const State& l, const State& r) {
  State o = l;
  for (std::size_t i = 0; i < o.x.size(); ++i) {
    o.x[i] += r.x[i];
    o.m[i] += r.m[i];
  }
  return o;
}

State operator-(const State& l, const State& r) {
  State o = l;
  for (std::size_t i = 0; i < o.x.size(); ++i) {
    o.x[i] -= r.x[i];
    o.m[i] -= r.m[i];
  }
  return o;
}

State operator*(double s, const State& z) {
  State o = z;
  for (auto& v : o.x) v *= s;
  for (auto& v : o.m) v *= s;
  return o;
}

double max_abs_diff(const State& l, const State& r) {
  double out = 0.0;
  for (std::size_t i = 0; i < l.x.size(); ++i) {
    out = std::max(out, std::abs(l.x[i] - r.x[i]));
    out = std::max(out, std::abs(l.m[i] - r.m[i]));
  }
  return out;
}

BlockMat2 mat_exp(const BlockMat2& M, double t) {
  if (t == 0.0) return BlockMat2::identity();
  const double q = 0.5 * M.trace();
  const double r2 = q * q - M.det();
  const BlockMat2 N = M - q * BlockMat2::identity();  // N^2 = r2 I
  double f0, f1;  // exp(Mt) = e^{qt} (f0 I + f1 N)
  if (std::abs(r2) <= 1e-12 * q * q) {
    // near-defective: series in r2 t^2
    const double u = r2 * t * t;
    f0 = 1.0 + u / 2.0 + u * u / 24.0;
    f1 = t * (1.0 + u / 6.0 + u * u / 120.0);
  } else if (r2 > 0.0) {
    const double r = std::sqrt(r2);
    f0 = std::cosh(r * t);
    f1 = std::sinh(r * t) / r;
  } else {
    const double w = std::sqrt(-r2);
    f0 = std::cos(w * t);
    f1 = std::sin(w * t) / w;
  }
  const double e = std::exp(q * t);
  return e * (f0 * BlockMat2::identity() + f1 * N);
}

BlockMat2 cholesky2(const SPD2& S, double jitter) {
  const SPD2 s{S.xx + jitter, S.xm, S.mm + jitter};
  if (!(s.xx > 0.0) || !(s.det() > 0.0) || !(s.trace() > 0.0))
    throw Error(ErrorKind::NotSPD, "cholesky2: matrix is not positive definite");
  const double l11 = std::sqrt(s.xx);
  const double l21 = s.xm / l11;
  const double l22 = std::sqrt(s.det() / s.xx);
  return {l11, 0.0, l21, l22};
}

BlockMat2 inverse2(const BlockMat2& M) {
  const double det = M.det();
  if (!(std::abs(det) >= 1e-300)) throw Error(ErrorKind::Singular, "inverse2: singular matrix");
  return {M.dd / det, -M.b / det, -M.c / det, M.a / det};
}

std::array<double, 2> solve2(const BlockMat2& M, const std::array<double, 2>& v) {
  const double det = M.det();
  if (!(std::abs(det) >= 1e-300)) throw Error(ErrorKind::Singular, "solve2: singular matrix");
  return {(M.dd * v[0] - M.b * v[1]) / det, (M.a * v[1] - M.c * v[0]) / det};
}

std::array<double, 2> apply(const BlockMat2& M, const std::array<double, 2>& v) {
  return {M.a * v[0] + M.b * v[1], M.c * v[0] + M.dd * v[1]};
}

State apply_to_state(const BlockMat2& M, const State& z) {
  State o(z.dim());
  for (std::size_t i = 0; i < z.dim(); ++i) {
    o.x[i] = M.a * z.x[i] + M.b * z.m[i];
    o.m[i] = M.c * z.x[i] + M.dd * z.m[i];
  }
  return o;
}

void add_applied(State& z, const BlockMat2& M, const State& w) {
  for (std::size_t i = 0; i < z.dim(); ++i) {
    const double wx = w.x[i], wm = w.m[i];
    z.x[i] += M.a * wx + M.b * wm;
    z.m[i] += M.c * wx + M.dd * wm;
  }
}

std::array<std::complex<double>, 2> eigenvalues(const BlockMat2& M) {
  const double q = 0.5 * M.trace();
  const std::complex<double> r = std::sqrt(std::complex<double>(q * q - M.det(), 0.0));
  return {q + r, q - r};
}

}  // namespace psld
