#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "psld/error.hpp"
#include "psld/harness.hpp"

using namespace psld;
using nlohmann::json;

namespace {

struct Common {
  std::string config, sampler, out, denoise;
  std::optional<std::size_t> steps;
  std::optional<double> lambda, lambda_s;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "config file (key = value lines)");
  app->add_option("--sampler", c.sampler, "sampler kind, e.g. conj-euler, rvv, coba");
  app->add_option("--steps", c.steps, "number of steps N");
  app->add_option("--lambda", c.lambda, "B_t scale lambda");
  app->add_option("--lambda-s", c.lambda_s, "position churn lambda_s (enables churn)");
  app->add_option("--seed", c.seed, "seed");
  app->add_option("--out", c.out, "output path (stdout when empty)");
  app->add_option("--denoise", c.denoise, "last-step denoising")->check(CLI::IsMember({"on", "off"}));
}

RunConfig load(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : parse_config_file(c.config);
  if (!c.sampler.empty()) cfg.sampler = parse_sampler(c.sampler);
  if (c.steps) cfg.steps = {*c.steps};
  if (c.lambda) cfg.lambdas = {*c.lambda};
  if (c.lambda_s) {
    cfg.lambda_s = *c.lambda_s;
    cfg.churn = true;
  }
  if (c.seed) cfg.seed = *c.seed;
  if (!c.denoise.empty()) cfg.denoise = c.denoise == "on";
  cfg.validate();
  return cfg;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  f << text;
  if (!f) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

json report_json(const RunReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"sampler", to_string(c.sampler)},
                     {"n_steps", c.n_steps},
                     {"nfe", c.nfe},
                     {"lambda", c.lambda},
                     {"lambda_s", c.lambda_s},
                     {"seed", c.seed},
                     {"mean_err", c.metrics.mean_err},
                     {"cov_err", c.metrics.cov_err},
                     {"sliced_w1", c.metrics.sliced_w1},
                     {"wall_ms", c.wall_ms}});
  }
  // every serialized value is also a JSON literal
  json cfg = json::object();
  std::istringstream lines(serialize_config(r.config));
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) cfg[line.substr(0, eq)] = json::parse(line.substr(eq + 3));
  }
  return {{"config", cfg},
          {"schedule_formula", r.schedule_formula},
          {"seed", r.config.seed},
          {"chains", r.config.chains},
          {"cells", cells}};
}

int cmd_sample(const Common& c, const std::string& json_path) {
  const RunConfig cfg = load(c);
  const RunReport r = run(cfg);
  std::ostringstream csv;
  write_csv(csv, r);
  emit(c.out, csv.str());
  if (!json_path.empty()) emit(json_path, report_json(r).dump(2) + "\n");
  return 0;
}

int cmd_convergence(const Common& c, double t0, double h_min, double h_max, std::size_t points, double nu) {
  RunConfig cfg = load(c);
  if (cfg.process.kind != ProcessKind::PSLD) throw Error(ErrorKind::InvalidConfig, "convergence runs on PSLD");
  ConvergenceSetup s;
  s.kind = cfg.sampler;
  s.score_spec = cfg.process;
  s.spec = cfg.process;
  if (nu > 0.0) s.spec.nu = nu;
  s.data_cov = SPD2::diag(0.25, cfg.process.mass() * cfg.process.gamma0);
  s.t0 = t0;
  s.z0 = State({1.0}, {equilibrium_momentum(s.score_spec, s.data_cov, t0, 1.0)});
  s.h_grid = log_grid(h_min, h_max, points);
  const ConvergenceResult r = convergence_order(s);
  std::ostringstream os;
  os << "h,err_x,err_m\n";
  char buf[128];
  for (std::size_t k = 0; k < r.h.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.6g,%.12g,%.12g\n", r.h[k], r.err_x[k], r.err_m[k]);
    os << buf;
  }
  emit(c.out, os.str());
  std::fprintf(stderr, "%s nu=%g slope_x=%.4f slope_m=%.4f coef_x=%.6g coef_m=%.6g\n", to_string(s.kind), s.spec.nu,
               r.slope_x, r.slope_m, r.coef_x, r.coef_m);
  return 0;
}

int cmd_stability(const Common& c, double t, double h) {
  const RunConfig cfg = load(c);
  const Parameterization p(cfg.process, cfg.param, cfg.sigma0_sq);
  const SPD2 data = cfg.mixture.components.front().cov;
  std::ostringstream os;
  os << "lambda,eig0_re,eig0_im,eig1_re,eig1_im,margin0,margin1,diagonalizable,stable\n";
  char buf[256];
  for (double l : cfg.lambdas) {
    const auto r = stability_report(p, cfg.process, data, t, BTChoice{cfg.bt, l, {}}, h);
    std::snprintf(buf, sizeof buf, "%.6g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d,%d\n", l, r.shifted_eigs[0].real(),
                  r.shifted_eigs[0].imag(), r.shifted_eigs[1].real(), r.shifted_eigs[1].imag(), r.margins[0],
                  r.margins[1], r.diagonalizable ? 1 : 0, r.stable ? 1 : 0);
    os << buf;
  }
  emit(c.out, os.str());
  return 0;
}

int cmd_equivalence(const Common& c) {
  const EquivalenceReport r = check_equivalence(1e-12);
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "ddim_max_diff=%.3e exp_integrator_max_diff=%.3e ab_max_diff=%.3e %s\n",
                r.ddim_max_diff, r.exp_integrator_max_diff, r.ab_max_diff, r.pass ? "PASS" : "FAIL");
  os << buf;
  emit(c.out, os.str());
  return r.pass ? 0 : 1;
}

int cmd_dump(const Common& c) {
  const RunConfig cfg = load(c);
  if (!needs_table(cfg.sampler)) throw Error(ErrorKind::MissingTable, std::string(to_string(cfg.sampler)) + " uses no table");
  const Schedule sched = make_schedule(cfg.schedule, cfg.steps.front(), cfg.process.T, cfg.eps);
  TableOptions opt;
  opt.atol = opt.rtol = cfg.quad_tol;
  opt.mask = table_mask(cfg.sampler);
  opt.ab_order = cfg.sampler == SamplerKind::ConjAB ? cfg.ab_order : 0;
  const auto tab =
      build_table(Parameterization(cfg.process, cfg.param, cfg.sigma0_sq), BTChoice{cfg.bt, cfg.lambdas.front(), {}},
                  sched.t, opt);
  std::ostringstream os;
  write_table_csv(os, tab);
  emit(c.out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conjugate and splitting samplers for phase-space Langevin diffusion"};
  app.require_subcommand(1);

  Common sample_c, conv_c, stab_c, eq_c, dump_c;
  std::string json_path;
  auto* sample = app.add_subcommand("sample", "run a sampler and write per-budget metrics as CSV");
  add_common(sample, sample_c);
  sample->add_option("--json", json_path, "also write a JSON report here");

  double t0 = 0.2, h_min = 1e-3, h_max = 1e-1, nu = 0.0;
  std::size_t points = 9;
  auto* conv = app.add_subcommand("convergence", "one-step error slopes on a single Gaussian");
  add_common(conv, conv_c);
  conv->add_option("--t0", t0, "start time");
  conv->add_option("--h-min", h_min);
  conv->add_option("--h-max", h_max);
  conv->add_option("--points", points);
  conv->add_option("--nu", nu, "integrator friction nu (the score keeps the config value)");

  double st = 0.01, sh = 0.1;
  auto* stab = app.add_subcommand("stability", "lambda sweep of the linear stability predicate");
  add_common(stab, stab_c);
  stab->add_option("--t", st, "time at which the Jacobian is frozen");
  stab->add_option("--step-size", sh, "step size h");

  auto* eq = app.add_subcommand("equivalence", "DDIM and exponential-integrator equivalence checks");
  add_common(eq, eq_c);
  auto* dump = app.add_subcommand("dump-coeffs", "write the coefficient table as CSV");
  add_common(dump, dump_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (sample->parsed()) return cmd_sample(sample_c, json_path);
    if (conv->parsed()) return cmd_convergence(conv_c, t0, h_min, h_max, points, nu);
    if (stab->parsed()) return cmd_stability(stab_c, st, sh);
    if (eq->parsed()) return cmd_equivalence(eq_c);
    if (dump->parsed()) return cmd_dump(dump_c);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
