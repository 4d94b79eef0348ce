#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psld/conjugate.hpp"
#include "psld/rng.hpp"
#include "psld/score.hpp"
#include "psld/sde.hpp"

namespace psld {

enum class SamplerKind {
  Euler, EM, ConjEuler, ConjAB,
  NSE, NVV, RSE, RVV,
  NaiveOBA, ROBA, RBAO, ROBAB,
  CSE, CVV, COBA,
};

const std::vector<SamplerKind>& all_sampler_kinds();
const char* to_string(SamplerKind k);
SamplerKind parse_sampler(const std::string& name);  // case-insensitive, throws InvalidConfig

int npu(SamplerKind k);  // score evaluations per update
bool is_stochastic(SamplerKind k);
bool needs_table(SamplerKind k);
bool psld_only(SamplerKind k);
TableMask table_mask(SamplerKind k);

struct ChurnConfig {
  double lambda_s = 0.0;
  bool enabled = false;
};

// Analytic OU piece. xi holds standard normals for (x, m).
State ou_substep(const ProcessSpec& spec, const State& z, double h, double t_bar, const ChurnConfig& churn,
                 const State& xi);
double ou_position_noise_std(const ProcessSpec& spec, double h, double t_bar, const ChurnConfig& churn);

// Euler updates of the position (A) and momentum (B) splits, stepping from t to t - h.
// The stochastic variants double the friction and score terms.
State split_substep_A(const ProcessSpec& spec, const State& z, double h, const State& score, bool stochastic);
State split_substep_B(const ProcessSpec& spec, const State& z, double h, const State& score, bool stochastic);

struct SamplerSetup {
  SamplerKind kind = SamplerKind::Euler;
  const ProcessSpec* spec = nullptr;
  const ScoreProvider* score = nullptr;
  const CoefficientTable* table = nullptr;  // conjugate kinds only
  std::vector<double> schedule;             // strictly decreasing, T ... eps
  ChurnConfig churn;
  bool denoise = false;
  const NoiseStream* noise = nullptr;  // stochastic kinds only
};

void validate_setup(const SamplerSetup& s);

// One update t_i -> t_{i+1}. eps_history is only used by ConjAB and may be null otherwise.
State step(const SamplerSetup& s, std::size_t i, const State& z, std::uint64_t chain,
           std::vector<State>* eps_history = nullptr);

// One Euler step of the reverse SDE drift from eps_cut to 0.
State last_step_denoise(const ProcessSpec& spec, const State& z, double eps_cut, const ScoreProvider& score);

// Full chain from z at schedule[0] to schedule.back(), plus optional denoising.
State sample_chain(const SamplerSetup& s, State z, std::uint64_t chain);

}  // namespace psld
