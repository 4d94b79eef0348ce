#pragma once

#include "psld/linalg2.hpp"

namespace psld {

enum class ProcessKind { PSLD, VP };

struct ProcessSpec {
  ProcessKind kind = ProcessKind::PSLD;
  double beta = 8.0;
  double beta_slope = 0.0;  // VP only: beta_t = beta + beta_slope * t
  double gamma_fric = 0.01;
  double nu = 4.01;
  double mass_inv = 4.0;
  double gamma0 = 0.04;
  double T = 1.0;

  static ProcessSpec psld_default() { return {}; }
  static ProcessSpec vp(double beta, double beta_slope = 0.0, double T = 1.0);

  double mass() const { return 1.0 / mass_inv; }
  double beta_at(double t) const;
  double beta_integral(double t) const;  // int_0^t beta_s ds
  bool time_constant() const { return kind == ProcessKind::PSLD || beta_slope == 0.0; }
  void validate() const;  // throws InvalidConfig
};

bool operator==(const ProcessSpec& l, const ProcessSpec& r);

// F_t and G_t. VP keeps an inert momentum row so both processes share one code path.
BlockMat2 drift_matrix(const ProcessSpec& spec, double t = 0.0);
BlockMat2 diffusion_matrix(const ProcessSpec& spec, double t = 0.0);
BlockMat2 diffusion_gram(const ProcessSpec& spec, double t = 0.0);  // G G^T

// exp(int_0^t F_s ds)
BlockMat2 mean_map(const ProcessSpec& spec, double t);

SPD2 stationary_cov(const ProcessSpec& spec);
// Initial covariance used for the network parameterization: x fixed, m ~ N(0, M gamma).
SPD2 conditional_initial_cov(const ProcessSpec& spec);

struct PerturbationKernel {
  BlockMat2 mean_map;
  SPD2 cov;
  BlockMat2 chol;
};

// Closed form: Sigma_t = Sigma_inf + E_t (Sigma_0 - Sigma_inf) E_t^T, exact for both processes.
PerturbationKernel kernel_at(const ProcessSpec& spec, double t, const SPD2& initial_cov);
SPD2 kernel_cov(const ProcessSpec& spec, double t, const SPD2& initial_cov);

// Fixed-step RK4 on the Lyapunov ODE for the three free entries.
SPD2 kernel_cov_rk4(const ProcessSpec& spec, double t, const SPD2& initial_cov,
                    double max_step = 1e-3);

BlockMat2 lyapunov_rhs(const ProcessSpec& spec, const SPD2& S, double t = 0.0);

// Forward-time vector fields evaluated with a precomputed score s at (z, t).
State prob_flow_field(const ProcessSpec& spec, const State& score, const State& z, double t);
State reverse_sde_drift(const ProcessSpec& spec, const State& score, const State& z, double t);

}  // namespace psld
