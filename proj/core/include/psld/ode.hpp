#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "psld/error.hpp"

namespace psld {

// Dormand-Prince 5(4) with FSAL and the classic step controller. The error
// norm is the max over components so padding slots do not dilute it.
// The step size survives across integrate() calls so a caller can march
// node by node without restarting the controller.
template <class V>
class BasicDopri5 {
 public:
  using Vec = V;

  BasicDopri5(double atol, double rtol) : atol_(atol), rtol_(rtol) {}

  std::size_t steps() const { return steps_; }
  std::size_t rejected() const { return rejected_; }
  void set_max_steps(std::size_t n) { max_steps_ = n; }

  template <class Rhs>
  void integrate(Rhs&& f, double t0, double t1, Vec& y) {
    if (t0 == t1) return;
    const std::size_t N = y.size();
    const double dir = t1 > t0 ? 1.0 : -1.0;
    double t = t0;
    Vec k1 = f(t, y);
    double h = h_ > 0.0 ? h_ : initial_step(f, t, y, k1, dir, std::abs(t1 - t0));
    std::size_t local = 0;
    while (dir * (t1 - t) > 0.0) {
      if (++local > max_steps_)
        throw Error(ErrorKind::QuadratureFailure, "dopri5: step budget exhausted");
      bool last = false;
      if (h >= std::abs(t1 - t)) {
        h = std::abs(t1 - t);
        last = true;
      }
      const double hs = dir * h;
      Vec y2 = y, k2, k3, k4, k5, k6, k7, ynew = y;
      for (std::size_t i = 0; i < N; ++i) y2[i] = y[i] + hs * (a21 * k1[i]);
      k2 = f(t + c2 * hs, y2);
      for (std::size_t i = 0; i < N; ++i) y2[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
      k3 = f(t + c3 * hs, y2);
      for (std::size_t i = 0; i < N; ++i)
        y2[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      k4 = f(t + c4 * hs, y2);
      for (std::size_t i = 0; i < N; ++i)
        y2[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      k5 = f(t + c5 * hs, y2);
      for (std::size_t i = 0; i < N; ++i)
        y2[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      k6 = f(t + hs, y2);
      for (std::size_t i = 0; i < N; ++i)
        ynew[i] = y[i] + hs * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
      const double tnew = last ? t1 : t + hs;
      k7 = f(tnew, ynew);
      double en = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double err = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double sc = atol_ + rtol_ * std::max(std::abs(y[i]), std::abs(ynew[i]));
        en = std::max(en, std::abs(err) / sc);
      }
      if (!std::isfinite(en))
        throw Error(ErrorKind::QuadratureFailure, "dopri5: non-finite integrand");
      const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      if (en <= 1.0) {
        t = tnew;
        y = ynew;
        k1 = k7;
        ++steps_;
        if (!last) {
          h *= fac;
          h_ = h;
        } else if (h_ == 0.0) {
          h_ = h * fac;
        }
      } else {
        ++rejected_;
        h *= std::max(fac, 0.2);
        if (h < 1e-15 * std::max(1.0, std::abs(t)))
          throw Error(ErrorKind::QuadratureFailure, "dopri5: step size underflow");
      }
    }
  }

 private:
  template <class Rhs>
  double initial_step(Rhs& f, double t, const Vec& y, const Vec& k1, double dir, double span) {
    const std::size_t N = y.size();
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = atol_ + rtol_ * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / N);
    d1 = std::sqrt(d1 / N);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    Vec y1 = y;
    for (std::size_t i = 0; i < N; ++i) y1[i] = y[i] + dir * h0 * k1[i];
    const Vec k2 = f(t + dir * h0, y1);
    double d2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = atol_ + rtol_ * std::abs(y[i]);
      d2 += ((k2[i] - k1[i]) / sc) * ((k2[i] - k1[i]) / sc);
    }
    d2 = std::sqrt(d2 / N) / h0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                  : std::pow(0.01 / std::max(d1, d2), 0.2);
    return std::min({100.0 * h0, h1, span});
  }

  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  // difference between the 5th and embedded 4th order weights
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  double atol_, rtol_;
  double h_ = 0.0;
  std::size_t steps_ = 0, rejected_ = 0;
  std::size_t max_steps_ = 2000000;
};

template <std::size_t N>
using Dopri5 = BasicDopri5<std::array<double, N>>;
using DynDopri5 = BasicDopri5<std::vector<double>>;

}  // namespace psld
