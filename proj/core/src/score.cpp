#include "psld/score.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "psld/error.hpp"

namespace psld {

void MixtureSpec::validate() const {
  if (d == 0) throw Error(ErrorKind::InvalidConfig, "mixture dimension must be >= 1");
  if (components.empty()) throw Error(ErrorKind::InvalidConfig, "mixture has no components");
  double sum = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0)) throw Error(ErrorKind::InvalidConfig, "mixture weights must be > 0");
    if (c.mean.x.size() != d || c.mean.m.size() != d)
      throw Error(ErrorKind::InvalidConfig, "mixture mean has wrong dimension");
    // semidefinite is allowed for data, e.g. point masses in x
    if (c.cov.xx < 0.0 || c.cov.mm < 0.0 || c.cov.det() < 0.0)
      throw Error(ErrorKind::InvalidConfig, "mixture covariance must be positive semidefinite");
    sum += c.weight;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::InvalidConfig, "mixture weights must sum to 1");
}

MixtureSpec MixtureSpec::single(std::size_t d, double sxx, double smm, double sxm) {
  MixtureSpec m;
  m.d = d;
  m.components.push_back({1.0, State(d), SPD2{sxx, sxm, smm}});
  return m;
}

bool operator==(const MixtureSpec& l, const MixtureSpec& r) {
  if (l.d != r.d || l.components.size() != r.components.size()) return false;
  for (std::size_t k = 0; k < l.components.size(); ++k) {
    const auto& a = l.components[k];
    const auto& b = r.components[k];
    if (a.weight != b.weight || !(a.cov == b.cov) || a.mean.x != b.mean.x || a.mean.m != b.mean.m)
      return false;
  }
  return true;
}

namespace {

struct ComponentAtT {
  double log_w;
  BlockMat2 Pinv;
  State mean;
};

std::vector<ComponentAtT> components_at(const MixtureSpec& mix, const ProcessSpec& spec,
                                        const State& z, double t, std::vector<double>& logp) {
  const BlockMat2 E = mean_map(spec, t);
  const std::size_t d = z.dim();
  std::vector<ComponentAtT> out;
  out.reserve(mix.components.size());
  logp.clear();
  for (const auto& c : mix.components) {
    const SPD2 P = kernel_cov(spec, t, c.cov);
    if (!P.is_spd()) throw Error(ErrorKind::DegenerateCovariance, "marginal covariance is not SPD");
    const BlockMat2 Pinv = inverse2(P.full());
    State mu = apply_to_state(E, c.mean);
    double q = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double dx = z.x[i] - mu.x[i], dm = z.m[i] - mu.m[i];
      q += dx * (Pinv.a * dx + Pinv.b * dm) + dm * (Pinv.c * dx + Pinv.dd * dm);
    }
    const double lp = std::log(c.weight) - 0.5 * q - 0.5 * static_cast<double>(d) * std::log(P.det()) -
                      static_cast<double>(d) * std::log(2.0 * std::numbers::pi);
    logp.push_back(lp);
    out.push_back({std::log(c.weight), Pinv, std::move(mu)});
  }
  return out;
}

double log_sum_exp(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

std::vector<double> responsibilities(const MixtureSpec& mix, const ProcessSpec& spec, const State& z,
                                     double t) {
  std::vector<double> logp;
  components_at(mix, spec, z, t, logp);
  const double lse = log_sum_exp(logp);
  for (auto& v : logp) v = std::exp(v - lse);
  return logp;
}

double marginal_log_density(const MixtureSpec& mix, const ProcessSpec& spec, const State& z, double t) {
  std::vector<double> logp;
  components_at(mix, spec, z, t, logp);
  return log_sum_exp(logp);
}

State marginal_score(const MixtureSpec& mix, const ProcessSpec& spec, const State& z, double t) {
  std::vector<double> logp;
  const auto comps = components_at(mix, spec, z, t, logp);
  const double lse = log_sum_exp(logp);
  State s(z.dim());
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const double w = std::exp(logp[k] - lse);
    if (w == 0.0) continue;
    const State diff = z - comps[k].mean;
    add_applied(s, -w * comps[k].Pinv, diff);
  }
  return s;
}

Parameterization::Parameterization(const ProcessSpec& spec, ParamKind kind, double sigma0_sq)
    : spec_(spec), kind_(kind), sigma0_sq_(sigma0_sq) {
  if (kind == ParamKind::Preconditioned) {
    if (spec.kind == ProcessKind::VP)
      throw Error(ErrorKind::InvalidConfig, "preconditioned parameterization is defined for PSLD only");
    if (!(sigma0_sq > 0.0)) throw Error(ErrorKind::InvalidConfig, "sigma0_sq must be > 0");
  }
}

BlockMat2 Parameterization::c_skip(double t) const {
  if (kind_ == ParamKind::Default) return BlockMat2::zero();
  const SPD2 S = kernel_cov(spec_, t, SPD2::diag(sigma0_sq_, spec_.mass() * spec_.gamma0));
  // literal diag(): the xm block is dropped
  return BlockMat2::diag(S.xx, S.mm);
}

BlockMat2 Parameterization::c_out(double t) const {
  if (spec_.kind == ProcessKind::VP) {
    const double var = -std::expm1(-spec_.beta_integral(t));
    if (!(var > 0.0)) throw Error(ErrorKind::SingularCOut, "VP sigma_t is zero at t = 0");
    return BlockMat2::diag(-1.0 / std::sqrt(var), -1.0);
  }
  const SPD2 init = kind_ == ParamKind::Default ? conditional_initial_cov(spec_) : SPD2::diag(0.0, 0.0);
  const BlockMat2 L = cholesky2(kernel_cov(spec_, t, init));
  // -L^{-T}
  return -1.0 * inverse2(L).transpose();
}

State eps_from_score(const Parameterization& p, const State& z, double t, const State& s) {
  State r = s;
  add_applied(r, -1.0 * p.c_skip(t), z);
  return apply_to_state(inverse2(p.c_out(t)), r);
}

State score_from_eps(const Parameterization& p, const State& z, double t, const State& eps) {
  State s = apply_to_state(p.c_out(t), eps);
  add_applied(s, p.c_skip(t), z);
  return s;
}

AnalyticScore::AnalyticScore(MixtureSpec mix, const ProcessSpec& score_spec, Parameterization param)
    : ScoreProvider(std::move(param)), mix_(std::move(mix)), score_spec_(score_spec) {
  mix_.validate();
}

AnalyticScore::AnalyticScore(MixtureSpec mix, Parameterization param)
    : AnalyticScore(std::move(mix), param.spec(), param) {}

ScoreEval AnalyticScore::do_evaluate(const State& z, double t) const {
  ScoreEval e;
  e.s = marginal_score(mix_, score_spec_, z, t);
  e.eps = eps_from_score(param(), z, t, e.s);
  return e;
}

ScoreEval EpsFunctionScore::do_evaluate(const State& z, double t) const {
  ScoreEval e;
  e.eps = eps_(z, t);
  e.s = score_from_eps(param(), z, t, e.eps);
  return e;
}

BlockMat2 single_gaussian_eps_jacobian(const Parameterization& p, const SPD2& data_cov,
                                       const ProcessSpec& score_spec, double t) {
  const SPD2 P = kernel_cov(score_spec, t, data_cov);
  return inverse2(p.c_out(t)) * (-1.0 * inverse2(P.full()) - p.c_skip(t));
}

}  // namespace psld
