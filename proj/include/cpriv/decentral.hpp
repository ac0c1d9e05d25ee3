#pragma once

// Multi-sensor compression design. The measurement rows are split across S
// sensors and each sensor compresses only its own rows, so the joint plan is
// block diagonal with respect to the partition. Two schemes are provided:
//
//  - no-exchange: every sensor optimizes against its own innovation block and
//    a per-sensor share of the privacy floor, ignoring cross-sensor
//    correlations entirely (no global feasibility guarantee);
//  - sequential broadcast: sensors take turns re-solving their block against
//    the other sensors' current blocks through an exact decomposition of the
//    joint error reduction, so each accepted step keeps the exact joint
//    utility non-decreasing.

#include <vector>

#include "cpriv/central.hpp"
#include "cpriv/lds.hpp"
#include "cpriv/objectives.hpp"

namespace cpriv {

// Ordered split of the measurement rows {0..N-1} into non-empty disjoint
// blocks, one per sensor.
class SensorPartition {
 public:
  SensorPartition(int num_rows, std::vector<std::vector<int>> row_blocks);

  int num_sensors() const { return static_cast<int>(row_blocks_.size()); }
  int num_rows() const { return num_rows_; }
  const std::vector<int>& rows_of(int s) const { return row_blocks_.at(s); }
  int block_size(int s) const {
    return static_cast<int>(row_blocks_.at(s).size());
  }
  // Rows of every sensor except s, concatenated in ascending sensor order.
  std::vector<int> rows_excluding(int s) const;

 private:
  int num_rows_;
  std::vector<std::vector<int>> row_blocks_;
};

// Per-sensor compression blocks C_s (M_s x N_s, M_s possibly 0).
struct BlockPlan {
  std::vector<Matrix> blocks;

  int total_rows() const;
  // (sum M_s) x N joint matrix: block s's columns land on sensor s's
  // measurement rows, zeros elsewhere — diag(C_1, ..., C_S) up to the column
  // permutation induced by the partition.
  Matrix assembled(const SensorPartition& part) const;
};

// Exact joint error reduction at horizon n achieved by a block plan: stacks
// the per-sensor compressed cross-covariances C_s [G]_{I_s}, assembles the
// compressed innovation covariance Psi from every pairwise block
// C_i [T]_{I_i,I_j} C_j^T, and returns (CG)^T Psi^{-1} (CG). Near-singular
// Psi is inverted with the 1e-12 eigenvalue floor. Ground truth for both
// decentralized schemes.
Matrix exact_block_reduction(const StepGeometry& geom,
                             const SensorPartition& part,
                             const BlockPlan& plan, int n);

// Independent per-sensor solves: sensor s sees only its own predicted belief
// pred_s[s], measurement block h_s[s], noise block r_s[s], and the per-sensor
// floor delta_s[s], and runs the centralized machinery on that local
// geometry. Exceptions are isolated per sensor; a failing sensor falls back
// to an empty block. The union of blocks carries no joint feasibility
// guarantee because every cross-sensor innovation term is ignored.
// feasible_out, when given, receives each sensor's local feasibility flag
// (0 also for sensors that fell back after an error).
BlockPlan solve_no_exchange(const std::vector<GaussianBelief>& pred_s,
                            const std::vector<Matrix>& h_s,
                            const std::vector<Matrix>& r_s,
                            const std::vector<Matrix>& f_future,
                            const std::vector<Matrix>& q_future,
                            const PrivacySpec& spec,
                            const std::vector<double>& delta_s,
                            std::vector<char>* feasible_out = nullptr);

// Everything sensor s needs to re-solve its own block while the other blocks
// stay fixed. The joint reduction splits exactly as
//
//   D_n = fixed_d_others[n] + W_n^T U U^T W_n,   W_n = g_s[n] - g_others[n],
//
// where U spans the whitened row space of sensor s's block, t_s_eff is the
// innovation covariance of sensor s's rows conditioned on the other sensors'
// compressed rows, g_s[n] is the whitened own cross-covariance and
// g_others[n] the whitened contribution routed through the other blocks.
struct SequentialContext {
  Matrix t_s_eff;           // N_s x N_s, positive definite
  Matrix t_s_eff_inv_sqrt;  // t_s_eff^{-1/2}
  std::vector<Matrix> g_s;        // per horizon, N_s x L
  std::vector<Matrix> g_others;   // per horizon, N_s x L
  std::vector<Matrix> fixed_d_others;  // per horizon, L x L PSD

  int horizon() const { return static_cast<int>(g_s.size()) - 1; }
  // Quadratic-form family over state columns `cols`, expanded term by term:
  // g_s g_s^T - g_others g_s^T - g_s g_others^T + g_others g_others^T, each
  // factor restricted to `cols`. Equals [W_n]_{:,cols} [W_n]_{:,cols}^T.
  Matrix xi(int n, const std::vector<int>& cols) const;
};

// Builds the context for sensor s from the other sensors' blocks
// (others.blocks[s] is ignored). With every other block empty this reduces
// to the no-exchange local geometry: t_s_eff = [T]_{I_s,I_s}, g_others = 0,
// fixed_d_others = 0. Throws Singular when t_s_eff is not positive definite.
SequentialContext sequential_context(const StepGeometry& geom,
                                     const SensorPartition& part,
                                     const BlockPlan& others, int s);

// Re-solves sensor s's block against fixed other blocks: maximizes the
// public quadratic form of the context subject to the global per-horizon
// loss budgets minus the loss the other blocks already cause, reusing the
// multiplier / rank-descent machinery. Returns C_s = U^T t_s_eff^{-1/2}; an
// exhausted budget (fixed loss above a threshold) yields the empty block.
CompressionPlan solve_local_given_others(const SequentialContext& ctx,
                                         const PrivacySpec& spec,
                                         const std::vector<Vector>& thresholds);

struct SequentialResult {
  BlockPlan plan;
  std::vector<double> trace;  // exact joint utility after each sweep
  bool feasible = false;      // final assembly meets every loss budget
  int sweeps = 0;
};

// Alternating block optimization over a fixed ascending sensor order.
// Initialized from solve_no_exchange with per-sensor floors delta/S. Within
// a sweep each sensor re-solves against the freshest other blocks; a
// candidate block is adopted only when it improves the exact joint utility
// or repairs joint infeasibility, so the utility trace is non-decreasing
// once the assembly is feasible. Stops when consecutive sweep utilities
// differ by less than eps_conv or after max_iter sweeps.
//
// Message discipline: compression blocks circulate every sweep; measurement
// and noise blocks only once, at the start, and only the per-sensor diagonal
// noise blocks are ever shared — cross-sensor noise correlations in R are
// ignored throughout (the sensors assume independent noise).
SequentialResult run_sequential(const GaussianBelief& pred, const Matrix& H,
                                const Matrix& R,
                                const std::vector<Matrix>& f_future,
                                const std::vector<Matrix>& q_future,
                                const PrivacySpec& spec,
                                const SensorPartition& part, double eps_conv,
                                int max_iter);

}  // namespace cpriv
