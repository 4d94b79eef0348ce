#include "psld/splitting.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "psld/error.hpp"

namespace psld {

namespace {

struct KindInfo {
  SamplerKind kind;
  const char* name;
  int npu;
  bool stochastic;
  TableMask mask;
  bool table;
  bool psld_only;
};

constexpr KindInfo kInfo[] = {
    {SamplerKind::Euler, "euler", 1, false, TableMask::None, false, false},
    {SamplerKind::EM, "em", 1, true, TableMask::None, false, false},
    {SamplerKind::ConjEuler, "conj-euler", 1, false, TableMask::None, true, false},
    {SamplerKind::ConjAB, "conj-ab", 1, false, TableMask::None, true, false},
    {SamplerKind::NSE, "nse", 2, false, TableMask::None, false, true},
    {SamplerKind::NVV, "nvv", 3, false, TableMask::None, false, true},
    {SamplerKind::RSE, "rse", 1, false, TableMask::None, false, true},
    {SamplerKind::RVV, "rvv", 2, false, TableMask::None, false, true},
    {SamplerKind::NaiveOBA, "naive-oba", 2, true, TableMask::None, false, true},
    {SamplerKind::ROBA, "roba", 1, true, TableMask::None, false, true},
    {SamplerKind::RBAO, "rbao", 1, true, TableMask::None, false, true},
    {SamplerKind::ROBAB, "robab", 2, true, TableMask::None, false, true},
    {SamplerKind::CSE, "cse", 1, false, TableMask::PositionSplit, true, true},
    {SamplerKind::CVV, "cvv", 2, false, TableMask::PositionSplit, true, true},
    {SamplerKind::COBA, "coba", 1, true, TableMask::StochasticPositionSplit, true, true},
};

const KindInfo& info(SamplerKind k) {
  for (const auto& i : kInfo)
    if (i.kind == k) return i;
  throw Error(ErrorKind::InvalidConfig, "unknown sampler kind");
}

State with_m(const State& z, const std::vector<double>& m) { return State(z.x, m); }
State with_x(const State& z, const std::vector<double>& x) { return State(x, z.m); }

}  // namespace

const std::vector<SamplerKind>& all_sampler_kinds() {
  static const std::vector<SamplerKind> v = [] {
    std::vector<SamplerKind> out;
    for (const auto& i : kInfo) out.push_back(i.kind);
    return out;
  }();
  return v;
}

const char* to_string(SamplerKind k) { return info(k).name; }

SamplerKind parse_sampler(const std::string& name) {
  std::string n;
  for (char c : name) n += c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (const auto& i : kInfo)
    if (n == i.name) return i.kind;
  // a few spellings people reach for
  if (n == "ddim" || n == "conjeuler" || n == "lambda-ddim") return SamplerKind::ConjEuler;
  if (n == "conjab") return SamplerKind::ConjAB;
  if (n == "noba" || n == "naiveoba") return SamplerKind::NaiveOBA;
  throw Error(ErrorKind::InvalidConfig, "unknown sampler '" + name + "'");
}

int npu(SamplerKind k) { return info(k).npu; }
bool is_stochastic(SamplerKind k) { return info(k).stochastic; }
bool needs_table(SamplerKind k) { return info(k).table; }
bool psld_only(SamplerKind k) { return info(k).psld_only; }
TableMask table_mask(SamplerKind k) { return info(k).mask; }

double ou_position_noise_std(const ProcessSpec& spec, double h, double t_bar, const ChurnConfig& churn) {
  const double expo = churn.enabled ? t_bar * churn.lambda_s * spec.beta * spec.gamma_fric
                                    : h * spec.beta * spec.gamma_fric;
  return std::sqrt(-std::expm1(-expo));
}

State ou_substep(const ProcessSpec& spec, const State& z, double h, double t_bar, const ChurnConfig& churn,
                 const State& xi) {
  const double cx = std::exp(-0.5 * h * spec.beta * spec.gamma_fric);
  const double cm = std::exp(-0.5 * h * spec.beta * spec.nu);
  const double sx = ou_position_noise_std(spec, h, t_bar, churn);
  const double sm = std::sqrt(spec.mass()) * std::sqrt(-std::expm1(-h * spec.beta * spec.nu));
  State out(z.dim());
  for (std::size_t i = 0; i < z.dim(); ++i) {
    out.x[i] = cx * z.x[i] + sx * xi.x[i];
    out.m[i] = cm * z.m[i] + sm * xi.m[i];
  }
  return out;
}

State split_substep_A(const ProcessSpec& spec, const State& z, double h, const State& score, bool stochastic) {
  const double k = stochastic ? 2.0 : 1.0;
  const double c = 0.5 * h * spec.beta;
  State out = z;
  for (std::size_t i = 0; i < z.dim(); ++i)
    out.x[i] += c * (k * spec.gamma_fric * z.x[i] - spec.mass_inv * z.m[i] + k * spec.gamma_fric * score.x[i]);
  return out;
}

State split_substep_B(const ProcessSpec& spec, const State& z, double h, const State& score, bool stochastic) {
  const double k = stochastic ? 2.0 : 1.0;
  const double c = 0.5 * h * spec.beta;
  State out = z;
  for (std::size_t i = 0; i < z.dim(); ++i)
    out.m[i] += c * (z.x[i] + k * spec.nu * z.m[i] + k * spec.mass() * spec.nu * score.m[i]);
  return out;
}

void validate_setup(const SamplerSetup& s) {
  if (!s.spec || !s.score) throw Error(ErrorKind::InvalidConfig, "sampler needs a process and a score provider");
  if (s.schedule.size() < 2) throw Error(ErrorKind::BadRange, "schedule needs at least two nodes");
  if (psld_only(s.kind) && s.spec->kind != ProcessKind::PSLD)
    throw Error(ErrorKind::InvalidConfig, std::string(to_string(s.kind)) + " needs a PSLD process");
  if (needs_table(s.kind)) {
    if (!s.table) throw Error(ErrorKind::MissingTable, std::string(to_string(s.kind)) + " needs a coefficient table");
    if (s.table->mask != table_mask(s.kind))
      throw Error(ErrorKind::MissingTable, "coefficient table has the wrong mask for this sampler");
    if (s.table->t != s.schedule) throw Error(ErrorKind::MissingTable, "coefficient table schedule mismatch");
  }
  if (is_stochastic(s.kind) && !s.noise) throw Error(ErrorKind::InvalidConfig, "stochastic sampler needs a noise stream");
}

State step(const SamplerSetup& s, std::size_t i, const State& z, std::uint64_t chain,
           std::vector<State>* eps_history) {
  const ProcessSpec& spec = *s.spec;
  const ScoreProvider& score = *s.score;
  const double t = s.schedule.at(i);
  const double tn = s.schedule.at(i + 1);
  const double h = t - tn;
  const double t_bar = 0.5 * (t + tn);
  auto noise = [&](std::uint64_t sub) { return s.noise->normal_state(chain, i, sub, z.dim()); };

  switch (s.kind) {
    case SamplerKind::Euler: {
      const ScoreEval e = score.evaluate(z, t);
      return z - h * prob_flow_field(spec, e.s, z, t);
    }
    case SamplerKind::EM: {
      const ScoreEval e = score.evaluate(z, t);
      State out = z - h * reverse_sde_drift(spec, e.s, z, t);
      add_applied(out, std::sqrt(h) * diffusion_matrix(spec, t), noise(0));
      return out;
    }
    case SamplerKind::ConjEuler: {
      const ScoreEval e = score.evaluate(z, t);
      return conjugate_euler_step(*s.table, i, z, e.eps);
    }
    case SamplerKind::ConjAB: {
      const ScoreEval e = score.evaluate(z, t);
      std::vector<State> local;
      std::vector<State>& hist = eps_history ? *eps_history : local;
      hist.insert(hist.begin(), e.eps);
      const std::size_t keep = static_cast<std::size_t>(s.table->ab_order) + 1;
      if (hist.size() > keep) hist.resize(keep);
      return conjugate_ab_step(*s.table, i, z, hist);
    }
    case SamplerKind::NSE: {
      const ScoreEval e1 = score.evaluate(z, t);
      const State zb = split_substep_B(spec, z, h, e1.s, false);
      const ScoreEval e2 = score.evaluate(zb, t);
      return split_substep_A(spec, zb, h, e2.s, false);
    }
    case SamplerKind::NVV: {
      const ScoreEval e1 = score.evaluate(z, t);
      const State z1 = split_substep_B(spec, z, 0.5 * h, e1.s, false);
      const ScoreEval e2 = score.evaluate(z1, t);
      const State z2 = split_substep_A(spec, z1, h, e2.s, false);
      // the naive scheme keeps the unshifted time for its last evaluation
      const ScoreEval e3 = score.evaluate(z2, t);
      return split_substep_B(spec, z2, 0.5 * h, e3.s, false);
    }
    case SamplerKind::RSE: {
      const ScoreEval e1 = score.evaluate(z, t);
      const State zb = split_substep_B(spec, z, h, e1.s, false);
      return split_substep_A(spec, zb, h, e1.s, false);
    }
    case SamplerKind::RVV: {
      const ScoreEval e1 = score.evaluate(z, t);
      const State z1 = split_substep_B(spec, z, 0.5 * h, e1.s, false);
      const State z2 = split_substep_A(spec, z1, h, e1.s, false);
      const ScoreEval e2 = score.evaluate(z2, tn);
      return split_substep_B(spec, z2, 0.5 * h, e2.s, false);
    }
    case SamplerKind::NaiveOBA: {
      const State zo = ou_substep(spec, z, h, t_bar, s.churn, noise(0));
      const ScoreEval e1 = score.evaluate(zo, t);
      const State zb = split_substep_B(spec, zo, h, e1.s, true);
      const ScoreEval e2 = score.evaluate(zb, t);
      return split_substep_A(spec, zb, h, e2.s, true);
    }
    case SamplerKind::ROBA: {
      const State zo = ou_substep(spec, z, h, t_bar, s.churn, noise(0));
      const ScoreEval e1 = score.evaluate(zo, t);
      const State zb = split_substep_B(spec, zo, h, e1.s, true);
      return split_substep_A(spec, zb, h, e1.s, true);
    }
    case SamplerKind::RBAO: {
      const ScoreEval e1 = score.evaluate(z, t);
      const State zb = split_substep_B(spec, z, h, e1.s, true);
      const State za = split_substep_A(spec, zb, h, e1.s, true);
      return ou_substep(spec, za, h, t_bar, s.churn, noise(0));
    }
    case SamplerKind::ROBAB: {
      const State zo = ou_substep(spec, z, h, t_bar, s.churn, noise(0));
      const ScoreEval e1 = score.evaluate(zo, t);
      const State z1 = split_substep_B(spec, zo, 0.5 * h, e1.s, true);
      const State z2 = split_substep_A(spec, z1, h, e1.s, true);
      const ScoreEval e2 = score.evaluate(z2, tn);
      return split_substep_B(spec, z2, 0.5 * h, e2.s, true);
    }
    case SamplerKind::CSE: {
      const ScoreEval e1 = score.evaluate(z, t);
      const State zb = split_substep_B(spec, z, h, e1.s, false);
      const State zc = conjugate_euler_step(*s.table, i, zb, e1.eps);
      return with_x(zb, zc.x);
    }
    case SamplerKind::CVV: {
      const ScoreEval e1 = score.evaluate(z, t);
      const State z1 = split_substep_B(spec, z, 0.5 * h, e1.s, false);
      const State z2 = with_x(z1, conjugate_euler_step(*s.table, i, z1, e1.eps).x);
      const ScoreEval e2 = score.evaluate(z2, tn);
      return split_substep_B(spec, z2, 0.5 * h, e2.s, false);
    }
    case SamplerKind::COBA: {
      const State zo = ou_substep(spec, z, h, t_bar, s.churn, noise(0));
      const ScoreEval e1 = score.evaluate(zo, t);
      const State zb = split_substep_B(spec, zo, h, e1.s, true);
      const State zc = conjugate_euler_step(*s.table, i, zb, e1.eps);
      return with_m(zc, zb.m);
    }
  }
  throw Error(ErrorKind::InvalidConfig, "unhandled sampler kind");
}

State last_step_denoise(const ProcessSpec& spec, const State& z, double eps_cut, const ScoreProvider& score) {
  const ScoreEval e = score.evaluate(z, eps_cut);
  return z - eps_cut * reverse_sde_drift(spec, e.s, z, eps_cut);
}

State sample_chain(const SamplerSetup& s, State z, std::uint64_t chain) {
  std::vector<State> hist;
  for (std::size_t i = 0; i + 1 < s.schedule.size(); ++i) z = step(s, i, z, chain, &hist);
  if (s.denoise && is_stochastic(s.kind)) z = last_step_denoise(*s.spec, z, s.schedule.back(), *s.score);
  return z;
}

}  // namespace psld
