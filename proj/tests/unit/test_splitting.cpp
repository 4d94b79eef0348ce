#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "psld/error.hpp"
#include "psld/harness.hpp"
#include "psld/splitting.hpp"

using namespace psld;

namespace {

struct Fixture {
  ProcessSpec spec;
  Parameterization param{spec};
  AnalyticScore score{benchmark_mixture(spec), param};
  NoiseStream noise{42};
  std::vector<double> sched = make_schedule(ScheduleKind::QuadraticStriding, 8, 1.0).t;
  CoefficientTable tab_none, tab_pos, tab_coba, tab_ab;

  Fixture() {
    tab_none = build_table(param, BTChoice::zero(), sched);
    tab_pos = build_table(param, BTChoice::zero(), sched, TableOptions{1e-5, 1e-5, 0, TableMask::PositionSplit});
    tab_coba =
        build_table(param, BTChoice::zero(), sched, TableOptions{1e-5, 1e-5, 0, TableMask::StochasticPositionSplit});
    tab_ab = build_table(param, BTChoice::zero(), sched, TableOptions{1e-5, 1e-5, 2, TableMask::None});
  }

  SamplerSetup setup(SamplerKind k) {
    SamplerSetup s;
    s.kind = k;
    s.spec = &spec;
    s.score = &score;
    s.schedule = sched;
    s.noise = &noise;
    if (needs_table(k)) {
      switch (table_mask(k)) {
        case TableMask::None: s.table = k == SamplerKind::ConjAB ? &tab_ab : &tab_none; break;
        case TableMask::PositionSplit: s.table = &tab_pos; break;
        case TableMask::StochasticPositionSplit: s.table = &tab_coba; break;
      }
    }
    return s;
  }
};

const State kZ({0.4, -0.9}, {0.3, 0.05});

}  // namespace

TEST_CASE("NPU accounting for every sampler") {
  Fixture f;
  const std::map<SamplerKind, int> table{
      {SamplerKind::Euler, 1}, {SamplerKind::EM, 1},       {SamplerKind::ConjEuler, 1}, {SamplerKind::ConjAB, 1},
      {SamplerKind::NSE, 2},   {SamplerKind::NVV, 3},      {SamplerKind::RSE, 1},       {SamplerKind::RVV, 2},
      {SamplerKind::NaiveOBA, 2}, {SamplerKind::ROBA, 1},  {SamplerKind::RBAO, 1},      {SamplerKind::ROBAB, 2},
      {SamplerKind::CSE, 1},   {SamplerKind::CVV, 2},      {SamplerKind::COBA, 1}};
  CHECK(all_sampler_kinds().size() == 15);
  for (SamplerKind k : all_sampler_kinds()) {
    CAPTURE(to_string(k));
    SamplerSetup s = f.setup(k);
    for (bool dn : {false, true}) {
      s.denoise = dn;
      f.score.reset_nfe();
      (void)sample_chain(s, kZ, 0);
      const std::uint64_t expect = 8 * table.at(k) + (dn && is_stochastic(k) ? 1 : 0);
      CHECK(f.score.nfe() == expect);
      CHECK(npu(k) == table.at(k));
    }
  }
}

TEST_CASE("sampler names round trip") {
  std::set<std::string> names;
  for (SamplerKind k : all_sampler_kinds()) {
    CHECK(parse_sampler(to_string(k)) == k);
    names.insert(to_string(k));
  }
  CHECK(names.size() == 15);
  CHECK(parse_sampler("RVV") == SamplerKind::RVV);
  CHECK(parse_sampler("conj_euler") == SamplerKind::ConjEuler);
  CHECK_THROWS_AS(parse_sampler("leapfrog"), Error);
}

TEST_CASE("position and momentum substeps") {
  const ProcessSpec s;
  const State z({1.0}, {2.0}), sc({0.5}, {-1.0});
  const double h = 0.01, c = 0.5 * h * s.beta;
  const State a = split_substep_A(s, z, h, sc, false);
  CHECK(a.x[0] == doctest::Approx(1.0 + c * (0.01 * 1.0 - 4.0 * 2.0 + 0.01 * 0.5)));
  CHECK(a.m[0] == 2.0);
  const State b = split_substep_B(s, z, h, sc, false);
  CHECK(b.m[0] == doctest::Approx(2.0 + c * (1.0 + 4.01 * 2.0 + 0.25 * 4.01 * -1.0)));
  CHECK(b.x[0] == 1.0);
  const State as = split_substep_A(s, z, h, sc, true);
  CHECK(as.x[0] == doctest::Approx(1.0 + c * (0.02 * 1.0 - 4.0 * 2.0 + 0.02 * 0.5)));
  const State bs = split_substep_B(s, z, h, sc, true);
  CHECK(bs.m[0] == doctest::Approx(2.0 + c * (1.0 + 8.02 * 2.0 + 0.25 * 8.02 * -1.0)));
}

TEST_CASE("symplectic Euler differs from Euler at second order") {
  Fixture f;
  auto gap = [&](double h) {
    SamplerSetup rse = f.setup(SamplerKind::RSE), eu = f.setup(SamplerKind::Euler);
    rse.schedule = eu.schedule = {0.5, 0.5 - h};
    return max_abs_diff(step(rse, 0, kZ, 0), step(eu, 0, kZ, 0));
  };
  const double r = gap(1e-3) / gap(5e-4);
  CHECK(r > 3.8);
  CHECK(r < 4.2);
}

TEST_CASE("OU substep") {
  const ProcessSpec s;
  const State z({1.0}, {1.0});
  const double h = 0.05;
  const State det = ou_substep(s, z, h, 0.5, {}, State(1));
  CHECK(det.x[0] == doctest::Approx(std::exp(-0.5 * h * 8.0 * 0.01)));
  CHECK(det.m[0] == doctest::Approx(std::exp(-0.5 * h * 8.0 * 4.01)));
  const State unit({1.0}, {1.0});
  const State noisy = ou_substep(s, State(1), h, 0.5, {}, unit);
  CHECK(noisy.x[0] == doctest::Approx(std::sqrt(1.0 - std::exp(-h * 8.0 * 0.01))));
  CHECK(noisy.m[0] == doctest::Approx(std::sqrt(0.25) * std::sqrt(1.0 - std::exp(-h * 8.0 * 4.01))));
  // churn with t_bar * lambda_s = h reproduces the unchurned std
  const double tbar = 0.4;
  const ChurnConfig c{h / tbar, true};
  CHECK(ou_position_noise_std(s, h, tbar, c) == ou_position_noise_std(s, h, tbar, {}));
  // the stationary momentum law N(0, M) is preserved in distribution
  const double cm = std::exp(-0.5 * h * 8.0 * 4.01), sm2 = 0.25 * (1.0 - std::exp(-h * 8.0 * 4.01));
  CHECK(cm * cm * 0.25 + sm2 == doctest::Approx(0.25));
}

TEST_CASE("deterministic samplers ignore the seed, stochastic ones are reproducible") {
  Fixture f;
  const NoiseStream other(7);
  for (SamplerKind k : all_sampler_kinds()) {
    CAPTURE(to_string(k));
    SamplerSetup a = f.setup(k), b = f.setup(k);
    b.noise = &other;
    const State za = sample_chain(a, kZ, 3), zb = sample_chain(b, kZ, 3), za2 = sample_chain(a, kZ, 3);
    CHECK(max_abs_diff(za, za2) == 0.0);
    if (is_stochastic(k)) CHECK(max_abs_diff(za, zb) > 0.0);
    else CHECK(max_abs_diff(za, zb) == 0.0);
  }
}

TEST_CASE("COBA collapses to ROBA without friction") {
  ProcessSpec s;
  s.gamma_fric = 0.0;
  const Parameterization p(s);
  const AnalyticScore sc(benchmark_mixture(s), p);
  const NoiseStream noise(9);
  const auto sched = make_schedule(ScheduleKind::QuadraticStriding, 20, 1.0).t;
  TableOptions opt;
  opt.mask = TableMask::StochasticPositionSplit;
  const auto tab = build_table(p, BTChoice::zero(), sched, opt);
  SamplerSetup coba{SamplerKind::COBA, &s, &sc, &tab, sched, {}, false, &noise};
  SamplerSetup roba{SamplerKind::ROBA, &s, &sc, nullptr, sched, {}, false, &noise};
  State a = kZ;
  for (std::size_t i = 0; i + 1 < sched.size(); ++i) {
    const State na = step(coba, i, a, 0), nb = step(roba, i, a, 0);
    CHECK(max_abs_diff(na, nb) < 1e-9);
    a = na;
  }
}

TEST_CASE("setup validation") {
  Fixture f;
  SamplerSetup s = f.setup(SamplerKind::CVV);
  s.table = nullptr;
  try {
    validate_setup(s);
    FAIL("expected MissingTable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingTable);
  }
  s = f.setup(SamplerKind::CVV);
  s.table = &f.tab_none;  // wrong mask
  CHECK_THROWS_AS(validate_setup(s), Error);
  const ProcessSpec vp = ProcessSpec::vp(8.0);
  SamplerSetup v = f.setup(SamplerKind::RVV);
  v.spec = &vp;
  CHECK_THROWS_AS(validate_setup(v), Error);
  SamplerSetup em = f.setup(SamplerKind::EM);
  em.noise = nullptr;
  CHECK_THROWS_AS(validate_setup(em), Error);
}

TEST_CASE("last-step denoising is one reverse-drift Euler step") {
  const ProcessSpec s;
  const Parameterization p(s);
  const AnalyticScore sc(benchmark_mixture(s), p);
  const double e = 1e-3;
  const State out = last_step_denoise(s, kZ, e, sc);
  const State sx = marginal_score(benchmark_mixture(s), s, kZ, e);
  const double c = 0.5 * e * s.beta;
  CHECK(out.x[0] == doctest::Approx(kZ.x[0] + c * (0.01 * kZ.x[0] - 4.0 * kZ.m[0] + 0.02 * sx.x[0])));
  CHECK(out.m[1] == doctest::Approx(kZ.m[1] + c * (kZ.x[1] + 4.01 * kZ.m[1] + 2.0 * 0.25 * 4.01 * sx.m[1])));
}

TEST_CASE("noise stream") {
  const NoiseStream n(5);
  CHECK(n.key(0, 1, 0) != n.key(1, 0, 0));
  CHECK(n.key(0, 0, 1) != n.key(0, 1, 0));
  CHECK(max_abs_diff(n.normal_state(3, 4, 0, 3), n.normal_state(3, 4, 0, 3)) == 0.0);
  double s1 = 0.0, s2 = 0.0;
  const int m = 20000;
  for (int k = 0; k < m; ++k) {
    const State z = n.normal_state(k, 0, 0, 1);
    s1 += z.x[0];
    s2 += z.x[0] * z.x[0];
  }
  CHECK(std::abs(s1 / m) < 0.03);
  CHECK(std::abs(s2 / m - 1.0) < 0.05);
}
