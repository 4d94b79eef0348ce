#include "psld/conjugate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "psld/error.hpp"
#include "psld/ode.hpp"

namespace psld {

namespace {

constexpr BlockMat2 kPositionMask{1.0, 1.0, 0.0, 0.0};

// Integrating in u = sqrt(s) removes the 1/sqrt(s) behaviour of C_out near s = 0.
double u_to_s(double u) {
  const double ue = std::max(u, 1e-150);
  return ue * ue;
}

void put(std::array<double, 16>& y, std::size_t off, const BlockMat2& m) {
  y[off] = m.a; y[off + 1] = m.b; y[off + 2] = m.c; y[off + 3] = m.dd;
}

BlockMat2 get(const std::array<double, 16>& y, std::size_t off) {
  return {y[off], y[off + 1], y[off + 2], y[off + 3]};
}

void check_schedule(const std::vector<double>& s) {
  if (s.empty()) throw Error(ErrorKind::BadRange, "empty schedule");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(s[i] >= 0.0) || !std::isfinite(s[i])) throw Error(ErrorKind::BadRange, "schedule times must be >= 0");
    if (i > 0 && !(s[i] < s[i - 1])) throw Error(ErrorKind::BadRange, "schedule must be strictly decreasing");
  }
}

}  // namespace

BlockMat2 bt_matrix(const BTChoice& bt, const ProcessSpec& spec) {
  BlockMat2 B;
  switch (bt.kind) {
    case BTKind::Zero: B = BlockMat2::zero(); break;
    case BTKind::LambdaI: B = bt.lambda * BlockMat2::identity(); break;
    case BTKind::LambdaOnes: B = bt.lambda * BlockMat2::ones(); break;
    case BTKind::Custom: B = bt.custom; break;
  }
  if (!B.finite()) throw Error(ErrorKind::InvalidConfig, "B_t must be finite");
  if (spec.kind == ProcessKind::VP) B = hadamard(B, BlockMat2::diag(1.0, 0.0));
  return B;
}

ConjugateIntegrand conjugate_integrand(const Parameterization& p, const BlockMat2& B, TableMask mask,
                                       double s) {
  const ProcessSpec& spec = p.spec();
  const BlockMat2 cskip = p.c_skip(s);
  const BlockMat2 cout = p.c_out(s);
  ConjugateIntegrand r;
  switch (mask) {
    case TableMask::None: {
      const BlockMat2 gg = diffusion_gram(spec, s);
      r.a_exponent = B - drift_matrix(spec, s) + 0.5 * (gg * cskip);
      r.phi_factor = -0.5 * (gg * cout);
      break;
    }
    case TableMask::PositionSplit: {
      const BlockMat2 gg = hadamard(diffusion_gram(spec, s), BlockMat2::diag(1.0, 0.0));
      r.a_exponent = B - hadamard(drift_matrix(spec, s), kPositionMask) +
                     0.5 * (gg * hadamard(cskip, kPositionMask));
      r.phi_factor = -0.5 * (gg * hadamard(cout, kPositionMask));
      break;
    }
    case TableMask::StochasticPositionSplit: {
      const double hb = 0.5 * spec.beta_at(s);
      const BlockMat2 Ft{-2.0 * hb * spec.gamma_fric, hb * spec.mass_inv, 0.0, 0.0};
      const BlockMat2 gg = BlockMat2::diag(spec.gamma_fric * spec.beta_at(s), 0.0);
      r.a_exponent = B - Ft + gg * hadamard(cskip, kPositionMask);
      r.phi_factor = -1.0 * (gg * hadamard(cout, kPositionMask));
      break;
    }
  }
  return r;
}

CoefficientTable build_table(const Parameterization& param, const BTChoice& bt,
                             const std::vector<double>& schedule, const TableOptions& opt) {
  check_schedule(schedule);
  if (opt.mask != TableMask::None && param.spec().kind == ProcessKind::VP)
    throw Error(ErrorKind::InvalidConfig, "position-split tables need a PSLD process");
  if (opt.ab_order < 0 || opt.ab_order > 2) throw Error(ErrorKind::InvalidConfig, "ab_order must be 0, 1 or 2");

  CoefficientTable tab;
  tab.t = schedule;
  tab.B = bt_matrix(bt, param.spec());
  tab.mask = opt.mask;
  tab.ab_order = opt.ab_order;
  tab.closed_form_A = param.kind() == ParamKind::Default && param.spec().time_constant();
  const BlockMat2 K0 = tab.closed_form_A ? conjugate_integrand(param, tab.B, opt.mask, 1.0).a_exponent
                                         : BlockMat2::zero();

  const std::size_t n = schedule.size();
  tab.A.resize(n);
  tab.A_inv.resize(n);
  tab.Phi.resize(n);

  // y = [A (4), Phi (4), unused...]; with a closed-form A the first block stays idle
  auto A_of = [&](double s, const std::array<double, 16>& y) {
    return tab.closed_form_A ? mat_exp(K0, s) : get(y, 0);
  };
  auto rhs = [&](double u, const std::array<double, 16>& y) {
    const double s = u_to_s(u);
    const ConjugateIntegrand ci = conjugate_integrand(param, tab.B, opt.mask, s);
    const BlockMat2 A = A_of(s, y);
    std::array<double, 16> dy{};
    if (!tab.closed_form_A) put(dy, 0, 2.0 * u * (A * ci.a_exponent));
    put(dy, 4, 2.0 * u * (A * ci.phi_factor));
    return dy;
  };

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = n - 1 - i;  // ascending in time
  std::array<double, 16> y{};
  put(y, 0, BlockMat2::identity());
  Dopri5<16> solver(opt.atol, opt.rtol);
  double u = 0.0;
  for (std::size_t idx : order) {
    const double un = std::sqrt(schedule[idx]);
    solver.integrate(rhs, u, un, y);
    u = un;
    const double s = schedule[idx];
    tab.A[idx] = A_of(s, y);
    tab.Phi[idx] = get(y, 4);
  }
  for (std::size_t i = 0; i < n; ++i) {
    try {
      tab.A_inv[i] = inverse2(tab.A[i]);
    } catch (const Error&) {
      throw Error(ErrorKind::SingularA, "A_t is singular at a schedule node");
    }
    const BlockMat2 r = tab.A[i] * tab.A_inv[i] - BlockMat2::identity();
    if (!(r.max_abs() < 1e-10)) throw Error(ErrorKind::SingularA, "A_t is too ill-conditioned to invert");
    if (!tab.Phi[i].finite()) throw Error(ErrorKind::QuadratureFailure, "Phi_t is not finite");
  }

  if (opt.ab_order > 0) {
    tab.ab_weights.resize(n > 0 ? n - 1 : 0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::size_t r = std::min<std::size_t>(opt.ab_order, i);
      std::vector<double> nodes;
      for (std::size_t k = 0; k <= r; ++k) nodes.push_back(schedule[i - k]);
      auto wrhs = [&](double uu, const std::array<double, 16>& yy) {
        const double s = u_to_s(uu);
        const ConjugateIntegrand ci = conjugate_integrand(param, tab.B, opt.mask, s);
        const BlockMat2 A = A_of(s, yy);
        const BlockMat2 dphi = 2.0 * uu * (A * ci.phi_factor);
        std::array<double, 16> dy{};
        if (!tab.closed_form_A) put(dy, 0, 2.0 * uu * (A * ci.a_exponent));
        for (std::size_t k = 0; k <= r; ++k) put(dy, 4 + 4 * k, lagrange_basis(nodes, k, s) * dphi);
        return dy;
      };
      std::array<double, 16> yy{};
      put(yy, 0, tab.A[i]);
      Dopri5<16> ws(opt.atol, opt.rtol);
      ws.integrate(wrhs, std::sqrt(schedule[i]), std::sqrt(schedule[i + 1]), yy);
      std::vector<BlockMat2> w;
      for (std::size_t k = 0; k <= r; ++k) w.push_back(get(yy, 4 + 4 * k));
      tab.ab_weights[i] = std::move(w);
    }
  }
  return tab;
}

double lagrange_basis(const std::vector<double>& nodes, std::size_t k, double s) {
  double v = 1.0;
  for (std::size_t l = 0; l < nodes.size(); ++l) {
    if (l == k) continue;
    v *= (s - nodes[l]) / (nodes[k] - nodes[l]);
  }
  return v;
}

State conjugate_euler_step(const CoefficientTable& tab, std::size_t i, const State& z, const State& eps) {
  if (i + 1 >= tab.t.size()) throw Error(ErrorKind::BadRange, "step index past the end of the table");
  const double h = tab.t[i] - tab.t[i + 1];
  State zh = apply_to_state(tab.A[i], z);
  const BlockMat2 lin = BlockMat2::identity() - h * (tab.A[i] * tab.B * tab.A_inv[i]);
  State next = apply_to_state(lin, zh);
  add_applied(next, tab.Phi[i + 1] - tab.Phi[i], eps);
  return apply_to_state(tab.A_inv[i + 1], next);
}

State conjugate_euler_step(const CoefficientTable& tab, std::size_t i, const State& z,
                           const ScoreProvider& provider) {
  const ScoreEval e = provider.evaluate(z, provider.param().c_noise(tab.t[i]));
  return conjugate_euler_step(tab, i, z, e.eps);
}

State conjugate_ab_step(const CoefficientTable& tab, std::size_t i, const State& z,
                        const std::vector<State>& history) {
  if (history.empty()) throw Error(ErrorKind::InsufficientHistory, "no eps evaluations supplied");
  if (i + 1 >= tab.t.size()) throw Error(ErrorKind::BadRange, "step index past the end of the table");
  const std::size_t r = std::min<std::size_t>({static_cast<std::size_t>(tab.ab_order), i, history.size() - 1});
  if (r == 0) return conjugate_euler_step(tab, i, z, history[0]);
  if (tab.ab_weights.size() <= i || tab.ab_weights[i].size() <= r)
    throw Error(ErrorKind::InsufficientHistory, "table was built without Adams-Bashforth weights");
  // the table weights were built for the full order; lower orders are only used during warm-up
  if (tab.ab_weights[i].size() != r + 1)
    throw Error(ErrorKind::InsufficientHistory, "history shorter than the table's extrapolation order");
  const double h = tab.t[i] - tab.t[i + 1];
  State zh = apply_to_state(tab.A[i], z);
  const BlockMat2 lin = BlockMat2::identity() - h * (tab.A[i] * tab.B * tab.A_inv[i]);
  State next = apply_to_state(lin, zh);
  for (std::size_t k = 0; k <= r; ++k) add_applied(next, tab.ab_weights[i][k], history[k]);
  return apply_to_state(tab.A_inv[i + 1], next);
}

namespace {

using cd = std::complex<double>;
struct CMat2 {
  cd a, b, c, d;
};

CMat2 cmul(const CMat2& l, const CMat2& r) {
  return {l.a * r.a + l.b * r.c, l.a * r.b + l.b * r.d, l.c * r.a + l.d * r.c, l.c * r.b + l.d * r.d};
}

std::array<cd, 2> ceigs(const CMat2& m) {
  const cd q = 0.5 * (m.a + m.d);
  const cd r = std::sqrt(q * q - (m.a * m.d - m.b * m.c));
  return {q + r, q - r};
}

}  // namespace

bool corollary_stable(std::complex<double> lambda_bar, double lambda, double h) {
  return std::abs(1.0 + h * (lambda_bar - lambda)) <= 1.0;
}

StabilityReport stability_from_spectrum(const std::vector<std::complex<double>>& jacobian_eigs,
                                        const BlockMat2& B_in_eigenbasis, double h) {
  StabilityReport rep;
  rep.jacobian_eigs = jacobian_eigs;
  CMat2 L{jacobian_eigs.at(0) - B_in_eigenbasis.a, -B_in_eigenbasis.b, -B_in_eigenbasis.c,
          jacobian_eigs.at(1) - B_in_eigenbasis.dd};
  const auto ev = ceigs(L);
  for (const cd& e : ev) {
    rep.shifted_eigs.push_back(e);
    rep.margins.push_back(std::abs(1.0 + h * e));
    rep.stable = rep.stable && rep.margins.back() <= 1.0;
  }
  return rep;
}

StabilityReport stability_report(const Parameterization& p, const ProcessSpec& score_spec,
                                 const SPD2& data_cov, double t, const BTChoice& bt, double h) {
  const BlockMat2 J = single_gaussian_eps_jacobian(p, data_cov, score_spec, t);
  const BlockMat2 K = 0.5 * (diffusion_gram(p.spec(), t) * p.c_out(t) * J);
  const BlockMat2 B = bt_matrix(bt, p.spec());
  const auto lam = eigenvalues(K);
  const double q = 0.5 * K.trace();
  const double r2 = q * q - K.det();
  const bool repeated = std::abs(r2) <= 1e-12 * std::max(q * q, 1e-300);
  const bool scalar = std::abs(K.b) + std::abs(K.c) + std::abs(K.a - K.dd) <= 1e-14 * (1.0 + K.max_abs());
  StabilityReport rep;
  if (repeated && !scalar) {
    // defective: fall back to the spectrum of Lambda-bar computed directly
    const BlockMat2 D = K - B;
    const auto ev = eigenvalues(D);
    rep.jacobian_eigs = {lam[0], lam[1]};
    rep.diagonalizable = false;
    for (const cd& e : ev) {
      rep.shifted_eigs.push_back(e);
      rep.margins.push_back(std::abs(1.0 + h * e));
      rep.stable = rep.stable && rep.margins.back() <= 1.0;
    }
    return rep;
  }
  // eigenvectors U of K
  CMat2 U;
  if (scalar) {
    U = {1.0, 0.0, 0.0, 1.0};
  } else if (std::abs(K.b) > std::abs(K.c)) {
    U = {K.b, K.b, lam[0] - K.a, lam[1] - K.a};
  } else if (K.c != 0.0) {
    U = {lam[0] - K.dd, lam[1] - K.dd, K.c, K.c};
  } else {
    // already diagonal
    U = {1.0, 0.0, 0.0, 1.0};
    if (std::abs(lam[0] - K.a) > std::abs(lam[0] - K.dd)) U = {0.0, 1.0, 1.0, 0.0};
  }
  const cd det = U.a * U.d - U.b * U.c;
  const CMat2 Uinv{U.d / det, -U.b / det, -U.c / det, U.a / det};
  const CMat2 Bc{B.a, B.b, B.c, B.dd};
  const CMat2 UBU = cmul(cmul(Uinv, Bc), U);
  const CMat2 Lbar{lam[0] - UBU.a, -UBU.b, -UBU.c, lam[1] - UBU.d};
  const auto ev = ceigs(Lbar);
  rep.jacobian_eigs = {lam[0], lam[1]};
  for (const cd& e : ev) {
    rep.shifted_eigs.push_back(e);
    rep.margins.push_back(std::abs(1.0 + h * e));
    rep.stable = rep.stable && rep.margins.back() <= 1.0 + 1e-12;
  }
  return rep;
}

std::vector<double> frozen_conjugate_growth(const Parameterization& p, const ScoreProvider& provider,
                                            const BTChoice& bt, double t_star, double h, const State& z0,
                                            int n_steps) {
  const CoefficientTable tab = build_table(p, bt, {t_star}, TableOptions{1e-12, 1e-12, 0, TableMask::None});
  const BlockMat2 A = tab.A[0];
  const BlockMat2 Ainv = tab.A_inv[0];
  const ConjugateIntegrand ci = conjugate_integrand(p, tab.B, TableMask::None, t_star);
  const BlockMat2 dphi = A * ci.phi_factor;  // dPhi/dt at t_star
  const BlockMat2 lin = BlockMat2::identity() - h * (A * tab.B * Ainv);
  const double n0 = std::max(z0.max_abs(), 1e-300);
  State zh = apply_to_state(A, z0);
  std::vector<double> growth;
  for (int k = 0; k < n_steps; ++k) {
    const State z = apply_to_state(Ainv, zh);
    const ScoreEval e = provider.evaluate(z, t_star);
    State next = apply_to_state(lin, zh);
    add_applied(next, -h * dphi, e.eps);  // Phi_{t-h} - Phi_t ~ -h dPhi/dt
    zh = std::move(next);
    const double g = apply_to_state(Ainv, zh).max_abs() / n0;
    growth.push_back(g);
    if (!std::isfinite(g) || g > 1e100) break;
  }
  return growth;
}

void write_table_csv(std::ostream& os, const CoefficientTable& tab) {
  os << "t,A_xx,A_xm,A_mx,A_mm,Phi_xx,Phi_xm,Phi_mx,Phi_mm\n";
  std::ostringstream line;
  line << std::setprecision(17);
  for (std::size_t i = 0; i < tab.t.size(); ++i) {
    line.str("");
    const auto& A = tab.A[i];
    const auto& P = tab.Phi[i];
    line << tab.t[i] << ',' << A.a << ',' << A.b << ',' << A.c << ',' << A.dd << ',' << P.a << ',' << P.b
         << ',' << P.c << ',' << P.dd << '\n';
    os << line.str();
  }
}

CoefficientTable read_table_csv(std::istream& is, const BlockMat2& B) {
  CoefficientTable tab;
  tab.B = B;
  std::string line;
  if (!std::getline(is, line) || line.rfind("t,", 0) != 0)
    throw Error(ErrorKind::Io, "coefficient CSV: missing header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::array<double, 9> v{};
    std::istringstream ss(line);
    std::string cell;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!std::getline(ss, cell, ',')) throw Error(ErrorKind::Io, "coefficient CSV: short row");
      try {
        v[k] = std::stod(cell);
      } catch (const std::exception&) {
        throw Error(ErrorKind::Io, "coefficient CSV: bad number '" + cell + "'");
      }
    }
    tab.t.push_back(v[0]);
    tab.A.push_back({v[1], v[2], v[3], v[4]});
    tab.Phi.push_back({v[5], v[6], v[7], v[8]});
    tab.A_inv.push_back(inverse2(tab.A.back()));
  }
  return tab;
}

}  // namespace psld
