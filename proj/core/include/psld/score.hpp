#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <vector>

#include "psld/linalg2.hpp"
#include "psld/sde.hpp"

namespace psld {

struct MixtureComponent {
  double weight = 1.0;
  State mean;
  SPD2 cov;  // applied as cov (x) I_d
};

struct MixtureSpec {
  std::size_t d = 1;
  std::vector<MixtureComponent> components;

  void validate() const;  // throws InvalidConfig
  // one isotropic Gaussian, zero mean, x-variance sxx and momentum variance smm
  static MixtureSpec single(std::size_t d, double sxx, double smm, double sxm = 0.0);
};

bool operator==(const MixtureSpec& l, const MixtureSpec& r);

// Exact grad log p_t for Gaussian-mixture data pushed through the linear process.
State marginal_score(const MixtureSpec& mix, const ProcessSpec& spec, const State& z, double t);
double marginal_log_density(const MixtureSpec& mix, const ProcessSpec& spec, const State& z, double t);
// responsibilities w_k(z) at time t
std::vector<double> responsibilities(const MixtureSpec& mix, const ProcessSpec& spec, const State& z,
                                     double t);

enum class ParamKind { Default, Preconditioned };

// s = C_skip z + C_out eps(C_in z, c_noise)
class Parameterization {
 public:
  Parameterization(const ProcessSpec& spec, ParamKind kind = ParamKind::Default,
                   double sigma0_sq = 0.25);

  const ProcessSpec& spec() const { return spec_; }
  ParamKind kind() const { return kind_; }
  double sigma0_sq() const { return sigma0_sq_; }

  BlockMat2 c_skip(double t) const;
  BlockMat2 c_out(double t) const;
  BlockMat2 c_in(double) const { return BlockMat2::identity(); }
  double c_noise(double t) const { return t; }

 private:
  ProcessSpec spec_;
  ParamKind kind_;
  double sigma0_sq_;
};

State eps_from_score(const Parameterization& p, const State& z, double t, const State& s);
State score_from_eps(const Parameterization& p, const State& z, double t, const State& eps);

struct ScoreEval {
  State s;
  State eps;
};

// Every integrator talks to the score through this interface. Each evaluate()
// call is one network function evaluation.
class ScoreProvider {
 public:
  explicit ScoreProvider(Parameterization param) : param_(std::move(param)) {}
  virtual ~ScoreProvider() = default;
  ScoreProvider(const ScoreProvider&) = delete;
  ScoreProvider& operator=(const ScoreProvider&) = delete;

  ScoreEval evaluate(const State& z, double t) const {
    nfe_.fetch_add(1, std::memory_order_relaxed);
    return do_evaluate(z, t);
  }
  std::uint64_t nfe() const { return nfe_.load(std::memory_order_relaxed); }
  void reset_nfe() const { nfe_.store(0, std::memory_order_relaxed); }
  const Parameterization& param() const { return param_; }

 protected:
  virtual ScoreEval do_evaluate(const State& z, double t) const = 0;

 private:
  Parameterization param_;
  mutable std::atomic<std::uint64_t> nfe_{0};
};

class AnalyticScore : public ScoreProvider {
 public:
  // score_spec is the process the data was diffused with; usually param.spec()
  AnalyticScore(MixtureSpec mix, const ProcessSpec& score_spec, Parameterization param);
  AnalyticScore(MixtureSpec mix, Parameterization param);

  const MixtureSpec& mixture() const { return mix_; }
  const ProcessSpec& score_spec() const { return score_spec_; }

 protected:
  ScoreEval do_evaluate(const State& z, double t) const override;

 private:
  MixtureSpec mix_;
  ProcessSpec score_spec_;
};

// Adapter for synthetic eps fields in tests and for future learned models.
class EpsFunctionScore : public ScoreProvider {
 public:
  using Fn = std::function<State(const State&, double)>;
  EpsFunctionScore(Parameterization param, Fn eps) : ScoreProvider(std::move(param)), eps_(std::move(eps)) {}

 protected:
  ScoreEval do_evaluate(const State& z, double t) const override;

 private:
  Fn eps_;
};

// Marginal covariance of a single zero-mean component at time t and the
// constant-in-z eps Jacobian it induces under the given parameterization.
BlockMat2 single_gaussian_eps_jacobian(const Parameterization& p, const SPD2& data_cov,
                                       const ProcessSpec& score_spec, double t);

}  // namespace psld
