#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "psld/conjugate.hpp"
#include "psld/score.hpp"
#include "psld/sde.hpp"
#include "psld/splitting.hpp"

namespace psld {

// ---- schedules

enum class ScheduleKind { QuadraticStriding, Uniform };

const char* to_string(ScheduleKind k);
ScheduleKind parse_schedule_kind(const std::string& s);

struct Schedule {
  ScheduleKind kind = ScheduleKind::QuadraticStriding;
  std::size_t N = 0;
  double T = 1.0;
  double eps = 1e-3;
  std::vector<double> t;  // t[0] = T > ... > t[N] = eps
};

Schedule make_schedule(ScheduleKind kind, std::size_t N, double T, double eps = 1e-3);
std::string schedule_formula(ScheduleKind kind);

// ---- references

// Adaptive solve of the probability-flow ODE through every node. out[k] is the state at nodes[k].
std::vector<State> reference_solution(const ProcessSpec& spec, const ScoreProvider& score, const State& z_start,
                                      const std::vector<double>& nodes, double tol = 1e-10);

// Time-ordered product of fourth-order Magnus steps for dz/dt = L(t) z from t0 to t1.
BlockMat2 linear_flow_map(const std::function<BlockMat2(double)>& L, double t0, double t1, std::size_t substeps);

// Probability-flow matrix when the score is that of zero-mean Gaussian data with
// covariance data_cov pushed through score_spec.
BlockMat2 gaussian_flow_matrix(const ProcessSpec& spec, const ProcessSpec& score_spec, const SPD2& data_cov,
                               double t);

// ---- metrics

struct SampleMetrics {
  double mean_err = 0.0;
  double cov_err = 0.0;
  double sliced_w1 = 0.0;
};

// Position marginal of the data, the mixture at t = 0.
std::vector<double> mixture_mean_x(const MixtureSpec& mix);
std::vector<std::vector<double>> mixture_cov_x(const MixtureSpec& mix);

std::vector<std::vector<double>> projection_directions(std::size_t d, std::size_t n, std::uint64_t seed);

SampleMetrics sample_error_metrics(const std::vector<State>& samples, const MixtureSpec& mix,
                                   std::size_t n_projections = 64, std::uint64_t projection_seed = 1234);
double sliced_w1_samples(const std::vector<State>& a, const std::vector<State>& b, std::size_t n_projections = 64,
                         std::uint64_t projection_seed = 1234);

// ---- convergence

struct ConvergenceSetup {
  SamplerKind kind = SamplerKind::RVV;
  ProcessSpec spec;        // process the integrator runs
  ProcessSpec score_spec;  // process the (fixed) score was diffused with
  SPD2 data_cov = SPD2::diag(0.25, 0.01);
  double t0 = 0.2;
  State z0;
  std::vector<double> h_grid;
};

struct ConvergenceResult {
  std::vector<double> h, err_x, err_m;
  double slope_x = 0.0, slope_m = 0.0;
  // exp of the mean of log(err / h^2): the second-order error coefficient
  double coef_x = 0.0, coef_m = 0.0;
};

double loglog_slope(const std::vector<double>& h, const std::vector<double>& err);
std::vector<double> log_grid(double lo, double hi, std::size_t n);
// Momentum that zeroes m + M s^m for the given position under the Gaussian score.
double equilibrium_momentum(const ProcessSpec& score_spec, const SPD2& data_cov, double t, double x);
ConvergenceResult convergence_order(const ConvergenceSetup& setup);

// ---- configuration and runs

enum class PriorKind { Marginal, Stationary };

// The fixed 2-D Gaussian mixture used by the benchmarks.
MixtureSpec benchmark_mixture(const ProcessSpec& spec);

struct RunConfig {
  ProcessSpec process;
  MixtureSpec mixture = benchmark_mixture(ProcessSpec{});
  ParamKind param = ParamKind::Default;
  double sigma0_sq = 0.25;
  SamplerKind sampler = SamplerKind::ConjEuler;
  ScheduleKind schedule = ScheduleKind::QuadraticStriding;
  double eps = 1e-3;
  std::vector<std::size_t> steps{50};
  std::vector<double> lambdas{0.0};
  BTKind bt = BTKind::LambdaI;
  double lambda_s = 0.0;
  bool churn = false;
  bool denoise = false;
  std::size_t chains = 2000;
  std::uint64_t seed = 0;
  int ab_order = 0;
  double quad_tol = 1e-5;
  PriorKind prior = PriorKind::Marginal;
  unsigned threads = 0;  // 0 picks the hardware concurrency
  bool timing = false;

  void validate() const;  // throws InvalidConfig
};

bool operator==(const RunConfig& l, const RunConfig& r);

RunConfig parse_config(std::istream& is);
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_string(const std::string& text);
std::string serialize_config(const RunConfig& c);

struct CellResult {
  SamplerKind sampler = SamplerKind::Euler;
  std::size_t n_steps = 0;
  std::uint64_t nfe = 0;  // per chain
  double lambda = 0.0;
  double lambda_s = 0.0;
  std::uint64_t seed = 0;
  SampleMetrics metrics;
  double wall_ms = 0.0;
};

struct RunReport {
  RunConfig config;
  std::string schedule_formula;
  std::vector<CellResult> cells;
};

std::vector<State> draw_prior(const RunConfig& c, std::size_t chains);
// Runs one sampler cell and returns the terminal states, in chain order.
std::vector<State> run_cell_samples(const RunConfig& c, std::size_t n_steps, double lambda, std::uint64_t* nfe = nullptr);
RunReport run(const RunConfig& c);

void write_csv(std::ostream& os, const RunReport& r);

// ---- equivalence checks

struct EquivalenceReport {
  double ddim_max_diff = 0.0;         // conjugate Euler vs DDIM on VP
  double exp_integrator_max_diff = 0.0;  // conjugate Euler vs original-space exponential integrator
  double ab_max_diff = 0.0;           // AB(1) vs polynomial-extrapolation form
  bool pass = false;
};

// Plain DDIM update on VP with a constant or linear beta.
State ddim_step(const ProcessSpec& vp, const State& z, double t, double t_next, const State& eps);

EquivalenceReport check_equivalence(double quad_tol = 1e-12);

}  // namespace psld
