#pragma once

#include <complex>
#include <iosfwd>
#include <vector>

#include "psld/linalg2.hpp"
#include "psld/score.hpp"
#include "psld/sde.hpp"

namespace psld {

enum class BTKind { Zero, LambdaI, LambdaOnes, Custom };

struct BTChoice {
  BTKind kind = BTKind::Zero;
  double lambda = 0.0;
  BlockMat2 custom{};

  static BTChoice zero() { return {}; }
  static BTChoice lambda_i(double l) { return {BTKind::LambdaI, l, {}}; }
  static BTChoice lambda_ones(double l) { return {BTKind::LambdaOnes, l, {}}; }
};

// B as a 2x2 block. For VP the inert momentum row and column are dropped.
BlockMat2 bt_matrix(const BTChoice& bt, const ProcessSpec& spec);

// None: full probability-flow ODE. PositionSplit: deterministic position split
// (mask [[1,1],[0,0]]). StochasticPositionSplit: the stochastic position split
// with doubled friction and no 1/2 on the diffusion term.
enum class TableMask { None, PositionSplit, StochasticPositionSplit };

struct TableOptions {
  double atol = 1e-5;
  double rtol = 1e-5;
  int ab_order = 0;  // 0, 1 or 2
  TableMask mask = TableMask::None;
};

struct CoefficientTable {
  std::vector<double> t;  // strictly decreasing
  std::vector<BlockMat2> A, A_inv, Phi;
  BlockMat2 B;
  TableMask mask = TableMask::None;
  bool closed_form_A = false;
  int ab_order = 0;
  // ab_weights[i][k] = int_{t_i}^{t_{i+1}} dPhi_s C_k(s) with the Lagrange basis on t_i, ..., t_{i-k}
  std::vector<std::vector<BlockMat2>> ab_weights;

  std::size_t steps() const { return t.empty() ? 0 : t.size() - 1; }
};

// Integrands of the transformed ODE at time s.
struct ConjugateIntegrand {
  BlockMat2 a_exponent;  // B - F + 1/2 G G^T C_skip (masked variants accordingly)
  BlockMat2 phi_factor;  // dPhi/ds = A_s * phi_factor
};
ConjugateIntegrand conjugate_integrand(const Parameterization& p, const BlockMat2& B, TableMask mask,
                                       double s);

CoefficientTable build_table(const Parameterization& param, const BTChoice& bt,
                             const std::vector<double>& schedule, const TableOptions& opt = {});

State conjugate_euler_step(const CoefficientTable& tab, std::size_t i, const State& z, const State& eps);
State conjugate_euler_step(const CoefficientTable& tab, std::size_t i, const State& z,
                           const ScoreProvider& provider);

// history[k] is eps at t_{i-k}; uses min(ab_order, i, history.size()-1) extrapolation order.
State conjugate_ab_step(const CoefficientTable& tab, std::size_t i, const State& z,
                        const std::vector<State>& history);

// Lagrange basis C_k(s) on the nodes t_i, t_{i-1}, ..., t_{i-r}
double lagrange_basis(const std::vector<double>& nodes, std::size_t k, double s);

struct StabilityReport {
  std::vector<std::complex<double>> jacobian_eigs;  // eigenvalues of 1/2 G G^T C_out d eps/dz
  std::vector<std::complex<double>> shifted_eigs;   // eigenvalues of Lambda - U^{-1} B U
  std::vector<double> margins;                      // |1 + h lambda~|
  bool diagonalizable = true;
  bool stable = true;
};

// Predicate on already known spectra.
StabilityReport stability_from_spectrum(const std::vector<std::complex<double>>& jacobian_eigs,
                                        const BlockMat2& B_in_eigenbasis, double h);
// Closed form of the margin for B = lambda I.
bool corollary_stable(std::complex<double> lambda_bar, double lambda, double h);

// Single-Gaussian data with covariance data_cov (eps is affine, Jacobian constant in z).
StabilityReport stability_report(const Parameterization& p, const ProcessSpec& score_spec,
                                 const SPD2& data_cov, double t, const BTChoice& bt, double h);

// Conjugate Euler on the transformed ODE with every coefficient frozen at t_star,
// driven by real score evaluations at t_star. Returns |z_n| / |z_0| per step.
std::vector<double> frozen_conjugate_growth(const Parameterization& p, const ScoreProvider& provider,
                                            const BTChoice& bt, double t_star, double h, const State& z0,
                                            int n_steps);

void write_table_csv(std::ostream& os, const CoefficientTable& tab);
CoefficientTable read_table_csv(std::istream& is, const BlockMat2& B);

}  // namespace psld
