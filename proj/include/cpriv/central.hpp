#pragma once

// Single-sensor compression solver. Per step it maximizes the public-error
// reduction subject to keeping the private-error reduction below per-horizon
// thresholds, over row-compression matrices C of rank at most M.
//
// Structure: with W_n = T^{-1/2} G_n, both objective and constraints are
// quadratic forms in an orthonormal basis U (C = U^T T^{-1/2}):
//   utility  = tr(U^T Theta_P U),       Theta_P      = W_0[:,pub] W_0[:,pub]^T
//   loss_jn  = tr(U^T Theta_{j,n} U),   Theta_{j,n}  = w w^T, w = W_n col j
// Stationary bases are top eigenvector sets of Theta_P minus the
// multiplier-weighted Theta_{j,n}; the solver searches the multipliers.

#include <vector>

#include "cpriv/objectives.hpp"

namespace cpriv {

struct ThetaSet {
  Matrix theta_p;                            // N x N PSD
  std::vector<std::vector<Matrix>> theta_q;  // [n][j], N x N rank-1 each
  // Cached factors: t_inv_sqrt, the public columns of W_0, and the private
  // columns of each W_n (used for cheap trace evaluation and Phi assembly).
  Matrix t_inv_sqrt;
  Matrix w_public;                 // N x |P|
  std::vector<Matrix> w_private;   // [n], N x |Q|
  int horizon() const { return static_cast<int>(w_private.size()) - 1; }
};

// Nonnegative multiplier per (horizon n, map row f).
struct MultiplierVector {
  Matrix gamma;  // (r+1) x |F|
};

struct MultiplierResult {
  MultiplierVector gamma;
  EigenSelection basis;
  bool feasible = false;
  double utility = 0.0;
};

ThetaSet build_thetas(const StepGeometry& geom, const PrivacySpec& spec);

// Basis of the penalized objective Phi = Theta_P - sum gamma A Theta_Q:
// eigenvectors of the M algebraically largest numerically non-zero
// eigenvalues.
EigenSelection stationary_basis(const ThetaSet& thetas,
                                const MultiplierVector& gamma,
                                const PrivacySpec& spec, int M);

// Searches multipliers >= 0 for the best feasible basis of rank <= M.
// Single-constraint problems use plain bisection plus a grid scan; otherwise
// cyclic per-coordinate bisection (each coordinate driven to the smallest
// value satisfying its own constraint) with a log-grid fallback. The best
// feasible candidate over every probe is returned. `gamma_seeds` supplies
// extra starting points (used by the rank-descent loop).
MultiplierResult solve_multipliers(const ThetaSet& thetas,
                                   const StepGeometry& geom,
                                   const PrivacySpec& spec, int M,
                                   const std::vector<Matrix>& gamma_seeds = {});

// Same search against caller-supplied per-horizon loss budgets (the
// decentralized solver adjusts budgets for the loss other sensors already
// cause).
MultiplierResult solve_multipliers(const ThetaSet& thetas,
                                   const std::vector<Vector>& thresholds,
                                   const PrivacySpec& spec, int M,
                                   const std::vector<Matrix>& gamma_seeds = {});

// Full per-step solve: rank cap M = min(N, |P| + (r+1)|Q|) descending until a
// feasible basis exists; returns C = U^T T^{-1/2}. Falls back to the 0-row
// plan, feasible only when every threshold is nonnegative (discarding the
// measurement then satisfies every floor).
CompressionPlan solve_centralized(const GaussianBelief& pred, const Matrix& H,
                                  const Matrix& R,
                                  const std::vector<Matrix>& f_future,
                                  const std::vector<Matrix>& q_future,
                                  const PrivacySpec& spec);

// Shared rank-descent engine over an arbitrary quadratic-form family; the
// decentralized solver reuses it with per-sensor geometry. `thresholds[n]`
// are the per-horizon loss budgets in map space.
CompressionPlan solve_rank_descent(const ThetaSet& thetas,
                                   const std::vector<Vector>& thresholds,
                                   const PrivacySpec& spec, int rank_cap);

// Loss of a candidate basis at horizon n, in map space (A * per-coordinate
// quadratic forms).
Vector basis_loss(const ThetaSet& thetas, const Matrix& u, int n,
                  const PrivacySpec& spec);
double basis_utility(const ThetaSet& thetas, const Matrix& u);

}  // namespace cpriv
