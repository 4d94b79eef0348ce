#include "psld/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "psld/error.hpp"
#include "psld/ode.hpp"
#include "psld/rng.hpp"

namespace psld {

namespace {

constexpr std::uint64_t kPriorStep = std::numeric_limits<std::uint64_t>::max();

std::vector<double> flatten(const State& z) {
  std::vector<double> y(z.x);
  y.insert(y.end(), z.m.begin(), z.m.end());
  return y;
}

State unflatten(const std::vector<double>& y) {
  const std::size_t d = y.size() / 2;
  return State(std::vector<double>(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(d)),
               std::vector<double>(y.begin() + static_cast<std::ptrdiff_t>(d), y.end()));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

struct Projected1D {
  std::vector<double> w, mu, sd;

  double cdf(double q) const {
    double c = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k)
      c += w[k] * (sd[k] > 0.0 ? normal_cdf((q - mu[k]) / sd[k]) : (q >= mu[k] ? 1.0 : 0.0));
    return c;
  }
  double pdf(double q) const {
    double p = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k)
      if (sd[k] > 0.0) p += w[k] * normal_pdf((q - mu[k]) / sd[k]) / sd[k];
    return p;
  }
};

// Safeguarded Newton inside a shrinking bracket.
double mixture_quantile(const Projected1D& f, double p, double lo, double hi, double guess) {
  double q = std::clamp(guess, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double c = f.cdf(q) - p;
    if (c == 0.0) return q;
    if (c < 0.0) lo = q; else hi = q;
    if (hi - lo <= 1e-14 * std::max(1.0, std::abs(q))) break;
    const double d = f.pdf(q);
    double next = d > 0.0 ? q - c / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - q) <= 1e-15 * std::max(1.0, std::abs(q))) return next;
    q = next;
  }
  return 0.5 * (lo + hi);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// 8-point Gauss-Legendre on [-1, 1]
constexpr double kGLx[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                            0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr double kGLw[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                            0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

// int_{a}^{b} g(s) ds for a, b >= 0 in the variable u = sqrt(s), composite over panels
template <class G>
BlockMat2 integrate_sqrt(G&& g, double a, double b, int panels) {
  const double ua = std::sqrt(a), ub = std::sqrt(b);
  BlockMat2 acc = BlockMat2::zero();
  const double w = (ub - ua) / panels;
  for (int p = 0; p < panels; ++p) {
    const double c = ua + (p + 0.5) * w;
    for (int k = 0; k < 8; ++k) {
      const double u = c + 0.5 * w * kGLx[k];
      acc += (0.5 * w * kGLw[k] * 2.0 * u) * g(u * u);
    }
  }
  return acc;
}

}  // namespace

// ---------------------------------------------------------------- schedules

const char* to_string(ScheduleKind k) { return k == ScheduleKind::Uniform ? "uniform" : "quadratic"; }

ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "quadratic" || s == "quadratic_striding" || s == "quadratic-striding") return ScheduleKind::QuadraticStriding;
  if (s == "uniform") return ScheduleKind::Uniform;
  throw Error(ErrorKind::InvalidConfig, "unknown schedule '" + s + "'");
}

Schedule make_schedule(ScheduleKind kind, std::size_t N, double T, double eps) {
  if (N < 1) throw Error(ErrorKind::BadRange, "schedule needs N >= 1");
  if (!(eps > 0.0) || !(eps < T) || !std::isfinite(T)) throw Error(ErrorKind::BadRange, "schedule needs 0 < eps < T");
  Schedule s{kind, N, T, eps, std::vector<double>(N + 1)};
  for (std::size_t i = 0; i <= N; ++i) {
    const double r = static_cast<double>(N - i) / static_cast<double>(N);
    s.t[i] = eps + (T - eps) * (kind == ScheduleKind::QuadraticStriding ? r * r : r);
  }
  s.t.front() = T;
  s.t.back() = eps;
  return s;
}

std::string schedule_formula(ScheduleKind kind) {
  return kind == ScheduleKind::QuadraticStriding ? "t_i = eps + (T - eps) * ((N - i) / N)^2"
                                                 : "t_i = eps + (T - eps) * (N - i) / N";
}

// ---------------------------------------------------------------- references

std::vector<State> reference_solution(const ProcessSpec& spec, const ScoreProvider& score, const State& z_start,
                                      const std::vector<double>& nodes, double tol) {
  if (nodes.empty()) throw Error(ErrorKind::BadRange, "reference needs at least one node");
  std::vector<State> out{z_start};
  std::vector<double> y = flatten(z_start);
  DynDopri5 ode(tol, tol);
  auto f = [&](double t, const std::vector<double>& v) {
    const State z = unflatten(v);
    return flatten(prob_flow_field(spec, score.evaluate(z, t).s, z, t));
  };
  try {
    for (std::size_t k = 1; k < nodes.size(); ++k) {
      ode.integrate(f, nodes[k - 1], nodes[k], y);
      out.push_back(unflatten(y));
    }
  } catch (const Error& e) {
    throw Error(ErrorKind::SolverFailure, std::string("reference solve failed: ") + e.what());
  }
  return out;
}

BlockMat2 linear_flow_map(const std::function<BlockMat2(double)>& L, double t0, double t1, std::size_t substeps) {
  if (substeps == 0) throw Error(ErrorKind::BadRange, "linear_flow_map needs substeps >= 1");
  const double h = (t1 - t0) / static_cast<double>(substeps);
  const double c1 = 0.5 - std::sqrt(3.0) / 6.0, c2 = 0.5 + std::sqrt(3.0) / 6.0;
  BlockMat2 Phi = BlockMat2::identity();
  for (std::size_t k = 0; k < substeps; ++k) {
    const double t = t0 + static_cast<double>(k) * h;
    const BlockMat2 A1 = L(t + c1 * h), A2 = L(t + c2 * h);
    const BlockMat2 omega = (0.5 * h) * (A1 + A2) + (std::sqrt(3.0) / 12.0 * h * h) * (A2 * A1 - A1 * A2);
    Phi = mat_exp(omega, 1.0) * Phi;
  }
  return Phi;
}

BlockMat2 gaussian_flow_matrix(const ProcessSpec& spec, const ProcessSpec& score_spec, const SPD2& data_cov,
                               double t) {
  const SPD2 P = kernel_cov(score_spec, t, data_cov);
  return drift_matrix(spec, t) + 0.5 * (diffusion_gram(spec, t) * inverse2(P.full()));
}

// ---------------------------------------------------------------- metrics

std::vector<double> mixture_mean_x(const MixtureSpec& mix) {
  std::vector<double> mu(mix.d, 0.0);
  for (const auto& c : mix.components)
    for (std::size_t i = 0; i < mix.d; ++i) mu[i] += c.weight * c.mean.x[i];
  return mu;
}

std::vector<std::vector<double>> mixture_cov_x(const MixtureSpec& mix) {
  const std::size_t d = mix.d;
  const auto mu = mixture_mean_x(mix);
  std::vector<std::vector<double>> S(d, std::vector<double>(d, 0.0));
  for (const auto& c : mix.components)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        S[i][j] += c.weight * ((i == j ? c.cov.xx : 0.0) + c.mean.x[i] * c.mean.x[j]);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) S[i][j] -= mu[i] * mu[j];
  return S;
}

std::vector<std::vector<double>> projection_directions(std::size_t d, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<std::vector<double>> dirs;
  while (dirs.size() < n) {
    std::vector<double> v(d);
    for (auto& x : v) x = nd(gen);
    const double nrm = std::sqrt(dot(v, v));
    if (nrm < 1e-12) continue;
    for (auto& x : v) x /= nrm;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

SampleMetrics sample_error_metrics(const std::vector<State>& samples, const MixtureSpec& mix,
                                   std::size_t n_projections, std::uint64_t projection_seed) {
  if (samples.empty()) throw Error(ErrorKind::BadRange, "no samples");
  const std::size_t d = mix.d, n = samples.size();
  SampleMetrics out;

  std::vector<double> mean(d, 0.0);
  for (const auto& z : samples)
    for (std::size_t i = 0; i < d; ++i) mean[i] += z.x[i];
  for (auto& v : mean) v /= static_cast<double>(n);
  const auto mu = mixture_mean_x(mix);
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) acc += (mean[i] - mu[i]) * (mean[i] - mu[i]);
  out.mean_err = std::sqrt(acc);

  std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
  for (const auto& z : samples)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov[i][j] += (z.x[i] - mean[i]) * (z.x[j] - mean[j]);
  const auto S = mixture_cov_x(mix);
  acc = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = cov[i][j] / static_cast<double>(n) - S[i][j];
      acc += c * c;
    }
  out.cov_err = std::sqrt(acc);

  const auto dirs = projection_directions(d, n_projections, projection_seed);
  std::vector<double> proj(n);
  double total = 0.0;
  for (const auto& th : dirs) {
    Projected1D f;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& c : mix.components) {
      f.w.push_back(c.weight);
      f.mu.push_back(dot(th, c.mean.x));
      f.sd.push_back(std::sqrt(std::max(c.cov.xx, 0.0)));
      lo = std::min(lo, f.mu.back() - 12.0 * f.sd.back() - 1.0);
      hi = std::max(hi, f.mu.back() + 12.0 * f.sd.back() + 1.0);
    }
    for (std::size_t k = 0; k < n; ++k) proj[k] = dot(th, samples[k].x);
    std::sort(proj.begin(), proj.end());
    double q = 0.5 * (lo + hi), w1 = 0.0, lo_k = lo;
    for (std::size_t k = 0; k < n; ++k) {
      const double p = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
      q = mixture_quantile(f, p, lo_k, hi, q);
      lo_k = q;  // quantiles are monotone in p
      w1 += std::abs(proj[k] - q);
    }
    total += w1 / static_cast<double>(n);
  }
  out.sliced_w1 = total / static_cast<double>(dirs.size());
  return out;
}

double sliced_w1_samples(const std::vector<State>& a, const std::vector<State>& b, std::size_t n_projections,
                         std::uint64_t projection_seed) {
  if (a.size() != b.size() || a.empty()) throw Error(ErrorKind::BadRange, "sliced_w1_samples needs equal, non-empty sets");
  const std::size_t d = a.front().dim(), n = a.size();
  const auto dirs = projection_directions(d, n_projections, projection_seed);
  std::vector<double> pa(n), pb(n);
  double total = 0.0;
  for (const auto& th : dirs) {
    for (std::size_t k = 0; k < n; ++k) {
      pa[k] = dot(th, a[k].x);
      pb[k] = dot(th, b[k].x);
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    double w1 = 0.0;
    for (std::size_t k = 0; k < n; ++k) w1 += std::abs(pa[k] - pb[k]);
    total += w1 / static_cast<double>(n);
  }
  return total / static_cast<double>(dirs.size());
}

// ---------------------------------------------------------------- convergence

double loglog_slope(const std::vector<double>& h, const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 2) throw Error(ErrorKind::BadRange, "slope needs two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    if (!(h[k] > 0.0) || !(err[k] > 0.0)) throw Error(ErrorKind::BadRange, "slope needs positive data");
    const double x = std::log(h[k]), y = std::log(err[k]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(lo > 0.0) || !(hi > lo)) throw Error(ErrorKind::BadRange, "bad log grid");
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k)
    g[k] = lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(n - 1));
  return g;
}

double equilibrium_momentum(const ProcessSpec& score_spec, const SPD2& data_cov, double t, double x) {
  const BlockMat2 Pinv = inverse2(kernel_cov(score_spec, t, data_cov).full());
  const double M = score_spec.mass();
  return M * Pinv.c * x / (1.0 - M * Pinv.dd);
}

ConvergenceResult convergence_order(const ConvergenceSetup& s) {
  if (is_stochastic(s.kind)) throw Error(ErrorKind::InvalidConfig, "convergence needs a deterministic sampler");
  if (s.z0.dim() == 0) throw Error(ErrorKind::InvalidConfig, "convergence needs a start state");
  const Parameterization param(s.spec);
  const MixtureSpec mix = MixtureSpec::single(s.z0.dim(), s.data_cov.xx, s.data_cov.mm, s.data_cov.xm);
  const AnalyticScore score(mix, s.score_spec, param);
  auto L = [&](double t) { return gaussian_flow_matrix(s.spec, s.score_spec, s.data_cov, t); };

  ConvergenceResult r;
  double lx = 0.0, lm = 0.0;
  for (double h : s.h_grid) {
    if (!(h > 0.0) || !(h < s.t0)) throw Error(ErrorKind::BadRange, "h must lie in (0, t0)");
    SamplerSetup set;
    set.kind = s.kind;
    set.spec = &s.spec;
    set.score = &score;
    set.schedule = {s.t0, s.t0 - h};
    CoefficientTable tab;
    if (needs_table(s.kind)) {
      TableOptions opt;
      opt.atol = opt.rtol = 1e-12;
      opt.mask = table_mask(s.kind);
      tab = build_table(param, BTChoice::zero(), set.schedule, opt);
      set.table = &tab;
    }
    validate_setup(set);
    const State z1 = step(set, 0, s.z0, 0);
    const State ref = apply_to_state(linear_flow_map(L, s.t0, s.t0 - h, 64), s.z0);
    double ex = 0.0, em = 0.0;
    for (std::size_t i = 0; i < s.z0.dim(); ++i) {
      ex = std::max(ex, std::abs(z1.x[i] - ref.x[i]));
      em = std::max(em, std::abs(z1.m[i] - ref.m[i]));
    }
    r.h.push_back(h);
    r.err_x.push_back(ex);
    r.err_m.push_back(em);
    lx += std::log(ex / (h * h));
    lm += std::log(em / (h * h));
  }
  r.slope_x = loglog_slope(r.h, r.err_x);
  r.slope_m = loglog_slope(r.h, r.err_m);
  r.coef_x = std::exp(lx / static_cast<double>(r.h.size()));
  r.coef_m = std::exp(lm / static_cast<double>(r.h.size()));
  return r;
}

// ---------------------------------------------------------------- runs

MixtureSpec benchmark_mixture(const ProcessSpec& spec) {
  // four overlapping modes on a square plus a wide one; momentum at its data-time law
  const double smm = spec.kind == ProcessKind::VP ? 1.0 : spec.mass() * spec.gamma0;
  MixtureSpec mix;
  mix.d = 2;
  const double pos[4][2] = {{-1.0, -1.0}, {-1.0, 1.0}, {1.0, -1.0}, {1.0, 1.0}};
  for (const auto& p : pos)
    mix.components.push_back({0.2, State({p[0], p[1]}, {0.0, 0.0}), SPD2::diag(0.05, smm)});
  mix.components.push_back({0.2, State({0.0, 0.0}, {0.0, 0.0}), SPD2::diag(0.25, smm)});
  return mix;
}

void RunConfig::validate() const {
  process.validate();
  mixture.validate();
  if (steps.empty()) throw Error(ErrorKind::InvalidConfig, "steps must not be empty");
  for (auto n : steps)
    if (n < 1) throw Error(ErrorKind::InvalidConfig, "steps must be >= 1");
  if (lambdas.empty()) throw Error(ErrorKind::InvalidConfig, "lambdas must not be empty");
  for (double l : lambdas)
    if (!std::isfinite(l)) throw Error(ErrorKind::InvalidConfig, "lambda must be finite");
  if (!(eps > 0.0) || !(eps < process.T)) throw Error(ErrorKind::InvalidConfig, "need 0 < eps < T");
  if (chains < 1) throw Error(ErrorKind::InvalidConfig, "chains must be >= 1");
  if (ab_order < 0 || ab_order > 2) throw Error(ErrorKind::InvalidConfig, "ab_order must be 0, 1 or 2");
  if (!(quad_tol > 0.0)) throw Error(ErrorKind::InvalidConfig, "quad_tol must be positive");
  if (!(lambda_s >= 0.0) || !std::isfinite(lambda_s)) throw Error(ErrorKind::InvalidConfig, "lambda_s must be >= 0");
  if (!(sigma0_sq > 0.0)) throw Error(ErrorKind::InvalidConfig, "sigma0_sq must be positive");
  if (psld_only(sampler) && process.kind != ProcessKind::PSLD)
    throw Error(ErrorKind::InvalidConfig, std::string(to_string(sampler)) + " needs process = psld");
  if (param == ParamKind::Preconditioned && process.kind != ProcessKind::PSLD)
    throw Error(ErrorKind::InvalidConfig, "the preconditioned parameterization needs process = psld");
}

bool operator==(const RunConfig& l, const RunConfig& r) {
  return l.process == r.process && l.mixture == r.mixture && l.param == r.param && l.sigma0_sq == r.sigma0_sq &&
         l.sampler == r.sampler && l.schedule == r.schedule && l.eps == r.eps && l.steps == r.steps &&
         l.lambdas == r.lambdas && l.bt == r.bt && l.lambda_s == r.lambda_s && l.churn == r.churn &&
         l.denoise == r.denoise && l.chains == r.chains && l.seed == r.seed && l.ab_order == r.ab_order &&
         l.quad_tol == r.quad_tol && l.prior == r.prior && l.threads == r.threads && l.timing == r.timing;
}

std::vector<State> draw_prior(const RunConfig& c, std::size_t chains) {
  const NoiseStream noise(c.seed);
  const std::size_t d = c.mixture.d;
  const double T = c.process.T;
  std::vector<BlockMat2> chol;
  std::vector<State> mean;
  std::vector<double> cum;
  if (c.prior == PriorKind::Stationary) {
    chol.push_back(cholesky2(stationary_cov(c.process)));
    mean.emplace_back(d);
    cum.push_back(1.0);
  } else {
    const BlockMat2 E = mean_map(c.process, T);
    double acc = 0.0;
    for (const auto& comp : c.mixture.components) {
      chol.push_back(cholesky2(kernel_cov(c.process, T, comp.cov)));
      mean.push_back(apply_to_state(E, comp.mean));
      acc += comp.weight;
      cum.push_back(acc);
    }
  }
  std::vector<State> out;
  out.reserve(chains);
  for (std::size_t ch = 0; ch < chains; ++ch) {
    std::mt19937_64 gen(noise.key(ch, kPriorStep, 1));
    const double u = std::uniform_real_distribution<double>(0.0, cum.back())(gen);
    const std::size_t k = std::min<std::size_t>(
        static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin()), cum.size() - 1);
    State z = mean[k];
    add_applied(z, chol[k], noise.normal_state(ch, kPriorStep, 0, d));
    out.push_back(std::move(z));
  }
  return out;
}

std::vector<State> run_cell_samples(const RunConfig& c, std::size_t n_steps, double lambda, std::uint64_t* nfe) {
  c.validate();
  const Schedule sched = make_schedule(c.schedule, n_steps, c.process.T, c.eps);
  const Parameterization param(c.process, c.param, c.sigma0_sq);
  const AnalyticScore score(c.mixture, param);
  const NoiseStream noise(c.seed);

  CoefficientTable tab;
  SamplerSetup set;
  set.kind = c.sampler;
  set.spec = &c.process;
  set.score = &score;
  set.schedule = sched.t;
  set.churn = {c.lambda_s, c.churn};
  set.denoise = c.denoise;
  set.noise = &noise;
  if (needs_table(c.sampler)) {
    TableOptions opt;
    opt.atol = opt.rtol = c.quad_tol;
    opt.mask = table_mask(c.sampler);
    opt.ab_order = c.sampler == SamplerKind::ConjAB ? c.ab_order : 0;
    tab = build_table(param, BTChoice{c.bt, lambda, {}}, sched.t, opt);
    set.table = &tab;
  }
  validate_setup(set);

  std::vector<State> z = draw_prior(c, c.chains);
  score.reset_nfe();
  unsigned threads = c.threads ? c.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, c.chains));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  auto worker = [&](unsigned w) {
    try {
      for (std::size_t k = next++; k < c.chains; k = next++) z[k] = sample_chain(set, z[k], k);
    } catch (...) {
      errors[w] = std::current_exception();
      next = c.chains;
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < threads; ++w) pool.emplace_back(worker, w);
  worker(0);
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  const std::uint64_t per_chain =
      n_steps * static_cast<std::uint64_t>(npu(c.sampler)) + (c.denoise && is_stochastic(c.sampler) ? 1 : 0);
  if (score.nfe() != per_chain * c.chains)
    throw Error(ErrorKind::SolverFailure, "NFE accounting mismatch");
  if (nfe) *nfe = per_chain;
  for (const auto& s : z)
    if (!s.finite()) throw Error(ErrorKind::SolverFailure, "sampler produced non-finite states");
  return z;
}

RunReport run(const RunConfig& c) {
  c.validate();
  RunReport r;
  r.config = c;
  r.schedule_formula = schedule_formula(c.schedule);
  const std::vector<double> lambdas = needs_table(c.sampler) ? c.lambdas : std::vector<double>{c.lambdas.front()};
  for (std::size_t n : c.steps) {
    for (double lambda : lambdas) {
      const auto t0 = std::chrono::steady_clock::now();
      CellResult cell;
      cell.sampler = c.sampler;
      cell.n_steps = n;
      cell.lambda = lambda;
      cell.lambda_s = c.lambda_s;
      cell.seed = c.seed;
      const auto samples = run_cell_samples(c, n, lambda, &cell.nfe);
      cell.metrics = sample_error_metrics(samples, c.mixture);
      cell.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      r.cells.push_back(cell);
    }
  }
  return r;
}

void write_csv(std::ostream& os, const RunReport& r) {
  os << "sampler,n_steps,nfe,lambda,lambda_s,seed,mean_err,cov_err,sliced_w1,wall_ms\n";
  char buf[512];
  for (const auto& c : r.cells) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%llu,%.12g,%.12g,%llu,%.12g,%.12g,%.12g,%.3f\n", to_string(c.sampler),
                  c.n_steps, static_cast<unsigned long long>(c.nfe), c.lambda, c.lambda_s,
                  static_cast<unsigned long long>(c.seed), c.metrics.mean_err, c.metrics.cov_err,
                  c.metrics.sliced_w1, r.config.timing ? c.wall_ms : 0.0);
    os << buf;
  }
}

// ---------------------------------------------------------------- equivalence

State ddim_step(const ProcessSpec& vp, const State& z, double t, double t_next, const State& eps) {
  const double a = std::exp(-vp.beta_integral(t)), an = std::exp(-vp.beta_integral(t_next));
  const double sig = std::sqrt(-std::expm1(-vp.beta_integral(t)));
  const double sign = std::sqrt(-std::expm1(-vp.beta_integral(t_next)));
  const double r = std::sqrt(an / a);
  State out = z;
  for (std::size_t i = 0; i < z.dim(); ++i) out.x[i] = r * z.x[i] + (sign - r * sig) * eps.x[i];
  return out;
}

EquivalenceReport check_equivalence(double quad_tol) {
  EquivalenceReport rep;
  TableOptions opt;
  opt.atol = opt.rtol = quad_tol;

  {
    const ProcessSpec vp = ProcessSpec::vp(8.0);
    const Parameterization param(vp);
    const AnalyticScore score(MixtureSpec::single(2, 0.5, 1.0), param);
    const auto sched = make_schedule(ScheduleKind::QuadraticStriding, 100, vp.T).t;
    const auto tab = build_table(param, BTChoice::zero(), sched, opt);
    State zc({0.7, -1.2}, {0.0, 0.0}), zd = zc;
    for (std::size_t i = 0; i + 1 < sched.size(); ++i) {
      zc = conjugate_euler_step(tab, i, zc, score.evaluate(zc, sched[i]).eps);
      zd = ddim_step(vp, zd, sched[i], sched[i + 1], score.evaluate(zd, sched[i]).eps);
      rep.ddim_max_diff = std::max(rep.ddim_max_diff, max_abs_diff(zc, zd));
    }
  }

  {
    const ProcessSpec spec;
    const Parameterization param(spec);
    const AnalyticScore score(benchmark_mixture(spec), param);
    const auto sched = make_schedule(ScheduleKind::QuadraticStriding, 50, spec.T).t;
    const auto tab = build_table(param, BTChoice::zero(), sched, opt);
    TableOptions opt_ab = opt;
    opt_ab.ab_order = 1;
    const auto tab_ab = build_table(param, BTChoice::zero(), sched, opt_ab);
    const BlockMat2 F = drift_matrix(spec), GG = diffusion_gram(spec);

    const State start({1.3, -0.4}, {0.5, 0.2});
    State zc = start, ze = start, za = start, zp = start;
    std::vector<State> hist;
    State eps_prev;
    for (std::size_t i = 0; i + 1 < sched.size(); ++i) {
      const double t = sched[i], tn = sched[i + 1];
      const BlockMat2 psi = mat_exp(F, tn - t);
      auto kernel = [&](double s) { return mat_exp(F, tn - s) * (-0.5 * (GG * param.c_out(s))); };

      zc = conjugate_euler_step(tab, i, zc, score.evaluate(zc, t).eps);
      const State ee = score.evaluate(ze, t).eps;
      ze = apply_to_state(psi, ze);
      add_applied(ze, -1.0 * integrate_sqrt(kernel, tn, t, 64), ee);
      rep.exp_integrator_max_diff = std::max(rep.exp_integrator_max_diff, max_abs_diff(zc, ze));

      const State ea = score.evaluate(za, t).eps;
      hist.insert(hist.begin(), ea);
      if (hist.size() > 2) hist.resize(2);
      za = conjugate_ab_step(tab_ab, i, za, hist);

      const State ep = score.evaluate(zp, t).eps;
      const State zp0 = zp;
      zp = apply_to_state(psi, zp0);
      if (i == 0) {
        add_applied(zp, -1.0 * integrate_sqrt(kernel, tn, t, 64), ep);
      } else {
        const double tp = sched[i - 1];
        auto k0 = [&](double s) { return ((s - tp) / (t - tp)) * kernel(s); };
        auto k1 = [&](double s) { return ((s - t) / (tp - t)) * kernel(s); };
        add_applied(zp, -1.0 * integrate_sqrt(k0, tn, t, 64), ep);
        add_applied(zp, -1.0 * integrate_sqrt(k1, tn, t, 64), eps_prev);
      }
      eps_prev = ep;
      rep.ab_max_diff = std::max(rep.ab_max_diff, max_abs_diff(za, zp));
    }
  }
  rep.pass = rep.ddim_max_diff < 1e-10 && rep.exp_integrator_max_diff < 1e-8 && rep.ab_max_diff < 1e-6;
  return rep;
}

}  // namespace psld
