#include "psld/sde.hpp"

#include <cmath>
#include <string>

#include "psld/error.hpp"

namespace psld {

ProcessSpec ProcessSpec::vp(double beta, double beta_slope, double T) {
  ProcessSpec s;
  s.kind = ProcessKind::VP;
  s.beta = beta;
  s.beta_slope = beta_slope;
  s.T = T;
  return s;
}

double ProcessSpec::beta_at(double t) const {
  return kind == ProcessKind::VP ? beta + beta_slope * t : beta;
}

double ProcessSpec::beta_integral(double t) const {
  return kind == ProcessKind::VP ? beta * t + 0.5 * beta_slope * t * t : beta * t;
}

void ProcessSpec::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
  if (!(beta > 0.0) || !std::isfinite(beta)) bad("beta must be > 0");
  if (!(T > 0.0) || !std::isfinite(T)) bad("T must be > 0");
  if (kind == ProcessKind::PSLD) {
    if (!(gamma_fric >= 0.0)) bad("gamma_fric must be >= 0");
    if (!(nu >= 0.0)) bad("nu must be >= 0");
    if (!(mass_inv > 0.0) || !std::isfinite(mass_inv)) bad("mass_inv must be > 0");
    if (!(gamma0 > 0.0)) bad("gamma0 must be > 0");
  } else {
    if (!std::isfinite(beta_slope) || !(beta + beta_slope * T > 0.0))
      bad("beta_t must stay positive on [0, T]");
  }
}

bool operator==(const ProcessSpec& l, const ProcessSpec& r) {
  return l.kind == r.kind && l.beta == r.beta && l.beta_slope == r.beta_slope &&
         l.gamma_fric == r.gamma_fric && l.nu == r.nu && l.mass_inv == r.mass_inv &&
         l.gamma0 == r.gamma0 && l.T == r.T;
}

BlockMat2 drift_matrix(const ProcessSpec& spec, double t) {
  const double hb = 0.5 * spec.beta_at(t);
  if (spec.kind == ProcessKind::VP) return BlockMat2::diag(-hb, 0.0);
  return hb * BlockMat2{-spec.gamma_fric, spec.mass_inv, -1.0, -spec.nu};
}

BlockMat2 diffusion_matrix(const ProcessSpec& spec, double t) {
  const double b = spec.beta_at(t);
  if (spec.kind == ProcessKind::VP) return BlockMat2::diag(std::sqrt(b), 0.0);
  return BlockMat2::diag(std::sqrt(spec.gamma_fric * b), std::sqrt(spec.mass() * spec.nu * b));
}

BlockMat2 diffusion_gram(const ProcessSpec& spec, double t) {
  const double b = spec.beta_at(t);
  if (spec.kind == ProcessKind::VP) return BlockMat2::diag(b, 0.0);
  return BlockMat2::diag(spec.gamma_fric * b, spec.mass() * spec.nu * b);
}

BlockMat2 mean_map(const ProcessSpec& spec, double t) {
  if (spec.kind == ProcessKind::VP) return BlockMat2::diag(std::exp(-0.5 * spec.beta_integral(t)), 1.0);
  return mat_exp(drift_matrix(spec), t);
}

SPD2 stationary_cov(const ProcessSpec& spec) {
  if (spec.kind == ProcessKind::VP) return SPD2::diag(1.0, 1.0);
  return SPD2::diag(1.0, spec.mass());
}

SPD2 conditional_initial_cov(const ProcessSpec& spec) {
  if (spec.kind == ProcessKind::VP) return SPD2::diag(0.0, 1.0);
  return SPD2::diag(0.0, spec.mass() * spec.gamma0);
}

SPD2 kernel_cov(const ProcessSpec& spec, double t, const SPD2& initial_cov) {
  const SPD2 sinf = stationary_cov(spec);
  if (spec.kind == ProcessKind::VP) {
    // -expm1 keeps 1 - e^{-B} accurate for small t
    const double B = spec.beta_integral(t);
    const double e = std::exp(-B);
    const double e_half = std::exp(-0.5 * B);
    return {initial_cov.xx * e - std::expm1(-B), initial_cov.xm * e_half, initial_cov.mm};
  }
  const BlockMat2 E = mean_map(spec, t);
  const BlockMat2 D = initial_cov.full() - sinf.full();
  return SPD2::from(sinf.full() + E * D * E.transpose());
}

PerturbationKernel kernel_at(const ProcessSpec& spec, double t, const SPD2& initial_cov) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorKind::BadRange, "kernel_at: t must be >= 0");
  PerturbationKernel k;
  k.mean_map = mean_map(spec, t);
  k.cov = kernel_cov(spec, t, initial_cov);
  try {
    k.chol = cholesky2(k.cov);
  } catch (const Error&) {
    throw Error(ErrorKind::QuadratureFailure, "kernel_at: covariance lost positive definiteness");
  }
  return k;
}

BlockMat2 lyapunov_rhs(const ProcessSpec& spec, const SPD2& S, double t) {
  const BlockMat2 F = drift_matrix(spec, t);
  const BlockMat2 Sf = S.full();
  return F * Sf + Sf * F.transpose() + diffusion_gram(spec, t);
}

SPD2 kernel_cov_rk4(const ProcessSpec& spec, double t, const SPD2& initial_cov, double max_step) {
  if (t == 0.0) return initial_cov;
  const int n = static_cast<int>(std::ceil(t / max_step));
  const double h = t / n;
  auto rhs = [&](double s, const SPD2& S) { return SPD2::from(lyapunov_rhs(spec, S, s)); };
  auto axpy = [](const SPD2& a, double c, const SPD2& b) {
    return SPD2{a.xx + c * b.xx, a.xm + c * b.xm, a.mm + c * b.mm};
  };
  SPD2 S = initial_cov;
  for (int i = 0; i < n; ++i) {
    const double s = i * h;
    const SPD2 k1 = rhs(s, S);
    const SPD2 k2 = rhs(s + 0.5 * h, axpy(S, 0.5 * h, k1));
    const SPD2 k3 = rhs(s + 0.5 * h, axpy(S, 0.5 * h, k2));
    const SPD2 k4 = rhs(s + h, axpy(S, h, k3));
    S.xx += h / 6.0 * (k1.xx + 2 * k2.xx + 2 * k3.xx + k4.xx);
    S.xm += h / 6.0 * (k1.xm + 2 * k2.xm + 2 * k3.xm + k4.xm);
    S.mm += h / 6.0 * (k1.mm + 2 * k2.mm + 2 * k3.mm + k4.mm);
    if (!(S.xx >= 0.0 && S.mm >= 0.0 && S.det() >= -1e-12))
      throw Error(ErrorKind::QuadratureFailure, "kernel_cov_rk4: covariance left the SPD cone");
  }
  return S;
}

State prob_flow_field(const ProcessSpec& spec, const State& score, const State& z, double t) {
  State out = apply_to_state(drift_matrix(spec, t), z);
  add_applied(out, -0.5 * diffusion_gram(spec, t), score);
  return out;
}

State reverse_sde_drift(const ProcessSpec& spec, const State& score, const State& z, double t) {
  State out = apply_to_state(drift_matrix(spec, t), z);
  add_applied(out, -1.0 * diffusion_gram(spec, t), score);
  return out;
}

}  // namespace psld
