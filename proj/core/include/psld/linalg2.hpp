#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

namespace psld {

// A 2x2 matrix acting on (x, m) pairs as M2 (x) I_d.
struct BlockMat2 {
  double a = 0.0, b = 0.0, c = 0.0, dd = 0.0;

  static constexpr BlockMat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static constexpr BlockMat2 zero() { return {0.0, 0.0, 0.0, 0.0}; }
  static constexpr BlockMat2 diag(double p, double q) { return {p, 0.0, 0.0, q}; }
  static constexpr BlockMat2 ones() { return {1.0, 1.0, 1.0, 1.0}; }

  double trace() const { return a + dd; }
  double det() const { return a * dd - b * c; }
  BlockMat2 transpose() const { return {a, c, b, dd}; }
  double max_abs() const;
  bool finite() const;

  BlockMat2& operator+=(const BlockMat2& o);
  BlockMat2& operator-=(const BlockMat2& o);
  BlockMat2& operator*=(double s);
};

BlockMat2 operator+(BlockMat2 l, const BlockMat2& r);
BlockMat2 operator-(BlockMat2 l, const BlockMat2& r);
BlockMat2 operator-(const BlockMat2& m);
BlockMat2 operator*(const BlockMat2& l, const BlockMat2& r);
BlockMat2 operator*(double s, BlockMat2 m);
BlockMat2 operator*(BlockMat2 m, double s);
bool operator==(const BlockMat2& l, const BlockMat2& r);

// Elementwise product, used for the position-only masks.
BlockMat2 hadamard(const BlockMat2& l, const BlockMat2& r);

// Symmetric 2x2 matrix stored by its three free entries.
struct SPD2 {
  double xx = 1.0, xm = 0.0, mm = 1.0;

  static constexpr SPD2 diag(double p, double q) { return {p, 0.0, q}; }
  BlockMat2 full() const { return {xx, xm, xm, mm}; }
  double det() const { return xx * mm - xm * xm; }
  double trace() const { return xx + mm; }
  bool is_spd() const { return trace() > 0.0 && det() > 0.0; }
  static SPD2 from(const BlockMat2& m);  // symmetrized
};

bool operator==(const SPD2& l, const SPD2& r);

// Joint sample z = (x, m), both of length d.
struct State {
  std::vector<double> x, m;

  State() = default;
  explicit State(std::size_t d) : x(d, 0.0), m(d, 0.0) {}
  State(std::vector<double> xs, std::vector<double> ms) : x(std::move(xs)), m(std::move(ms)) {}

  std::size_t dim() const { return x.size(); }
  bool finite() const;
  double max_abs() const;
};

State operator+(const State& l, const State& r);
State operator-(const State& l, const State& r);
State operator*(double s, const State& z);
double max_abs_diff(const State& l, const State& r);

BlockMat2 mat_exp(const BlockMat2& M, double t);

// Lower-triangular L with L L^T = S + jitter I. Throws NotSPD.
BlockMat2 cholesky2(const SPD2& S, double jitter = 1e-9);

BlockMat2 inverse2(const BlockMat2& M);
std::array<double, 2> solve2(const BlockMat2& M, const std::array<double, 2>& v);
std::array<double, 2> apply(const BlockMat2& M, const std::array<double, 2>& v);

State apply_to_state(const BlockMat2& M, const State& z);
// z += M w, coordinatewise over the d data dimensions
void add_applied(State& z, const BlockMat2& M, const State& w);

std::array<std::complex<double>, 2> eigenvalues(const BlockMat2& M);

}  // namespace psld
