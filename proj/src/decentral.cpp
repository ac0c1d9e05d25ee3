#include "cpriv/decentral.hpp"

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace cpriv {
namespace {

Matrix rows_subset(const Matrix& m, const std::vector<int>& rows) {
  Matrix out(static_cast<int>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<int>(i)) = m.row(rows[i]);
  return out;
}

Matrix cols_subset(const Matrix& m, const std::vector<int>& cols) {
  Matrix out(m.rows(), static_cast<int>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    out.col(static_cast<int>(j)) = m.col(cols[j]);
  return out;
}

Matrix submatrix(const Matrix& m, const std::vector<int>& rows,
                 const std::vector<int>& cols) {
  Matrix out(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<int>(i), static_cast<int>(j)) = m(rows[i], cols[j]);
  return out;
}

void place_block(Matrix& dst, const std::vector<int>& idx, const Matrix& block) {
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j)
      dst(idx[i], idx[j]) = block(static_cast<int>(i), static_cast<int>(j));
}

// Block-diagonal stack of every non-focal block, columns in the coordinates
// of the concatenated non-focal rows (ascending sensor order).
Matrix stack_other_blocks(const SensorPartition& part, const BlockPlan& plan,
                          int s) {
  int rows = 0;
  int cols = 0;
  for (int t = 0; t < part.num_sensors(); ++t) {
    if (t == s) continue;
    if (plan.blocks.at(t).cols() != part.block_size(t))
      throw DimMismatch("block width does not match its sensor's row count");
    rows += static_cast<int>(plan.blocks[t].rows());
    cols += part.block_size(t);
  }
  Matrix out = Matrix::Zero(rows, cols);
  int ro = 0;
  int co = 0;
  for (int t = 0; t < part.num_sensors(); ++t) {
    if (t == s) continue;
    const Matrix& b = plan.blocks[t];
    out.block(ro, co, b.rows(), b.cols()) = b;
    ro += static_cast<int>(b.rows());
    co += static_cast<int>(b.cols());
  }
  return out;
}

double budget_slack(double threshold) {
  return 1e-9 * (1.0 + std::abs(threshold));
}

struct JointEval {
  double utility = 0.0;
  bool feasible = true;
};

JointEval evaluate_joint(const StepGeometry& geom, const SensorPartition& part,
                         const BlockPlan& plan, const PrivacySpec& spec,
                         const std::vector<Vector>& thresholds) {
  JointEval out;
  for (int n = 0; n <= geom.horizon(); ++n) {
    const Matrix d = exact_block_reduction(geom, part, plan, n);
    if (n == 0)
      out.utility =
          d.topLeftCorner(spec.num_public(), spec.num_public()).trace();
    const Vector loss =
        spec.map_a() *
        d.diagonal().segment(spec.num_public(), spec.num_private());
    for (int f = 0; f < loss.size(); ++f)
      if (loss(f) > thresholds[n](f) + budget_slack(thresholds[n](f)))
        out.feasible = false;
  }
  return out;
}

}  // namespace

SensorPartition::SensorPartition(int num_rows,
                                 std::vector<std::vector<int>> row_blocks)
    : num_rows_(num_rows), row_blocks_(std::move(row_blocks)) {
  if (num_rows_ < 1)
    throw DimMismatch("partition needs at least one measurement row");
  if (row_blocks_.empty())
    throw DimMismatch("partition needs at least one sensor");
  std::vector<char> seen(num_rows_, 0);
  int total = 0;
  for (const auto& block : row_blocks_) {
    if (block.empty())
      throw DimMismatch("every sensor needs at least one measurement row");
    for (int idx : block) {
      if (idx < 0 || idx >= num_rows_)
        throw DimMismatch("partition row index out of range");
      if (seen[idx]) throw DimMismatch("measurement row assigned twice");
      seen[idx] = 1;
    }
    total += static_cast<int>(block.size());
  }
  if (total != num_rows_)
    throw DimMismatch("partition must cover every measurement row");
}

std::vector<int> SensorPartition::rows_excluding(int s) const {
  std::vector<int> out;
  out.reserve(num_rows_ - block_size(s));
  for (int t = 0; t < num_sensors(); ++t) {
    if (t == s) continue;
    out.insert(out.end(), row_blocks_[t].begin(), row_blocks_[t].end());
  }
  return out;
}

int BlockPlan::total_rows() const {
  int total = 0;
  for (const Matrix& b : blocks) total += static_cast<int>(b.rows());
  return total;
}

Matrix BlockPlan::assembled(const SensorPartition& part) const {
  if (static_cast<int>(blocks.size()) != part.num_sensors())
    throw DimMismatch("plan needs one block per sensor");
  Matrix out = Matrix::Zero(total_rows(), part.num_rows());
  int ro = 0;
  for (int s = 0; s < part.num_sensors(); ++s) {
    const Matrix& b = blocks[s];
    const std::vector<int>& own = part.rows_of(s);
    if (b.cols() != part.block_size(s))
      throw DimMismatch("block width does not match its sensor's row count");
    for (int i = 0; i < b.rows(); ++i)
      for (std::size_t t = 0; t < own.size(); ++t)
        out(ro + i, own[t]) = b(i, static_cast<int>(t));
    ro += static_cast<int>(b.rows());
  }
  return out;
}

Matrix exact_block_reduction(const StepGeometry& geom,
                             const SensorPartition& part,
                             const BlockPlan& plan, int n) {
  if (n < 0 || n > geom.horizon())
    throw DimMismatch("horizon index out of range");
  if (part.num_rows() != geom.T.rows())
    throw DimMismatch("partition does not match the measurement dimension");
  const int S = part.num_sensors();
  if (static_cast<int>(plan.blocks.size()) != S)
    throw DimMismatch("plan needs one block per sensor");

  std::vector<int> offset(S + 1, 0);
  for (int s = 0; s < S; ++s) {
    if (plan.blocks[s].cols() != part.block_size(s))
      throw DimMismatch("block width does not match its sensor's row count");
    offset[s + 1] = offset[s] + static_cast<int>(plan.blocks[s].rows());
  }

  const int dim = static_cast<int>(geom.G_by_n[n].cols());
  Matrix cg(offset[S], dim);
  Matrix psi(offset[S], offset[S]);
  for (int i = 0; i < S; ++i) {
    const Matrix& ci = plan.blocks[i];
    cg.middleRows(offset[i], ci.rows()) =
        ci * rows_subset(geom.G_by_n[n], part.rows_of(i));
    for (int j = 0; j < S; ++j)
      psi.block(offset[i], offset[j], ci.rows(), plan.blocks[j].rows()) =
          ci * submatrix(geom.T, part.rows_of(i), part.rows_of(j)) *
          plan.blocks[j].transpose();
  }
  return symmetrize(cg.transpose() * floored_psd_inverse(symmetrize(psi)) *
                    cg);
}

BlockPlan solve_no_exchange(const std::vector<GaussianBelief>& pred_s,
                            const std::vector<Matrix>& h_s,
                            const std::vector<Matrix>& r_s,
                            const std::vector<Matrix>& f_future,
                            const std::vector<Matrix>& q_future,
                            const PrivacySpec& spec,
                            const std::vector<double>& delta_s,
                            std::vector<char>* feasible_out) {
  const std::size_t S = pred_s.size();
  if (S == 0) throw DimMismatch("at least one sensor required");
  if (h_s.size() != S || r_s.size() != S || delta_s.size() != S)
    throw DimMismatch("per-sensor inputs need one entry per sensor");

  if (feasible_out) feasible_out->assign(S, 0);
  BlockPlan plan;
  plan.blocks.reserve(S);
  for (std::size_t s = 0; s < S; ++s) {
    try {
      PrivacySpec local(spec.num_public(), spec.num_private(), spec.map_a(),
                        delta_s[s], spec.lookahead());
      const CompressionPlan local_plan = solve_centralized(
          pred_s[s], h_s[s], r_s[s], f_future, q_future, local);
      plan.blocks.push_back(local_plan.matrix);
      if (feasible_out) (*feasible_out)[s] = local_plan.feasible ? 1 : 0;
    } catch (const std::exception&) {
      plan.blocks.push_back(Matrix::Zero(0, h_s[s].rows()));
    }
  }
  return plan;
}

Matrix SequentialContext::xi(int n, const std::vector<int>& cols) const {
  const Matrix a = cols_subset(g_s.at(n), cols);
  const Matrix b = cols_subset(g_others.at(n), cols);
  return symmetrize(a * a.transpose() - b * a.transpose() -
                    a * b.transpose() + b * b.transpose());
}

SequentialContext sequential_context(const StepGeometry& geom,
                                     const SensorPartition& part,
                                     const BlockPlan& others, int s) {
  if (part.num_rows() != geom.T.rows())
    throw DimMismatch("partition does not match the measurement dimension");
  if (static_cast<int>(others.blocks.size()) != part.num_sensors())
    throw DimMismatch("plan needs one block per sensor");
  if (s < 0 || s >= part.num_sensors())
    throw DimMismatch("sensor index out of range");

  const std::vector<int>& own = part.rows_of(s);
  const std::vector<int> rest = part.rows_excluding(s);

  const Matrix t_ss = submatrix(geom.T, own, own);
  const Matrix t_so = submatrix(geom.T, own, rest);
  const Matrix t_oo = submatrix(geom.T, rest, rest);
  const Matrix c_o = stack_other_blocks(part, others, s);

  const Matrix psi_inv =
      floored_psd_inverse(symmetrize(c_o * t_oo * c_o.transpose()));
  // Routes anything defined on the other sensors' rows through their
  // compressed channel: C_o^T (C_o T_oo C_o^T)^{-1} C_o.
  const Matrix route = c_o.transpose() * psi_inv * c_o;

  SequentialContext ctx;
  ctx.t_s_eff = symmetrize(t_ss - t_so * route * t_so.transpose());
  ctx.t_s_eff_inv_sqrt = sym_inv_sqrt(ctx.t_s_eff);
  const int r = geom.horizon();
  ctx.g_s.reserve(r + 1);
  ctx.g_others.reserve(r + 1);
  ctx.fixed_d_others.reserve(r + 1);
  for (int n = 0; n <= r; ++n) {
    const Matrix g_own = rows_subset(geom.G_by_n[n], own);
    const Matrix g_rest = rows_subset(geom.G_by_n[n], rest);
    ctx.g_s.push_back(ctx.t_s_eff_inv_sqrt * g_own);
    ctx.g_others.push_back(ctx.t_s_eff_inv_sqrt * t_so * route * g_rest);
    ctx.fixed_d_others.push_back(
        symmetrize(g_rest.transpose() * route * g_rest));
  }
  return ctx;
}

CompressionPlan solve_local_given_others(
    const SequentialContext& ctx, const PrivacySpec& spec,
    const std::vector<Vector>& thresholds) {
  const int r = ctx.horizon();
  if (static_cast<int>(thresholds.size()) != r + 1)
    throw DimMismatch("one loss budget required per horizon");
  if (ctx.g_s.at(0).cols() != spec.dim())
    throw DimMismatch("context state dimension does not match the spec");

  std::vector<int> pcols(spec.num_public());
  std::iota(pcols.begin(), pcols.end(), 0);

  ThetaSet thetas;
  thetas.t_inv_sqrt = ctx.t_s_eff_inv_sqrt;
  thetas.theta_p = ctx.xi(0, pcols);
  thetas.theta_q.resize(r + 1);
  thetas.w_private.resize(r + 1);
  for (int n = 0; n <= r; ++n) {
    const Matrix w = ctx.g_s[n] - ctx.g_others[n];
    if (n == 0) thetas.w_public = w.leftCols(spec.num_public());
    thetas.w_private[n] = w.rightCols(spec.num_private());
    thetas.theta_q[n].reserve(spec.num_private());
    for (int j = 0; j < spec.num_private(); ++j)
      thetas.theta_q[n].push_back(ctx.xi(n, {spec.num_public() + j}));
  }

  // Budget left for this sensor: the global budget minus the loss the other
  // blocks already cause. A negative entry means no headroom at all and
  // forces the empty block.
  std::vector<Vector> local(r + 1);
  for (int n = 0; n <= r; ++n) {
    if (thresholds[n].size() != spec.num_maps())
      throw DimMismatch("loss budget size does not match the map count");
    local[n] = thresholds[n] -
               spec.map_a() * ctx.fixed_d_others[n].diagonal().segment(
                                  spec.num_public(), spec.num_private());
  }

  const int n_s = static_cast<int>(ctx.t_s_eff.rows());
  const int cap =
      std::min(n_s, spec.num_public() + (r + 1) * spec.num_private());
  return solve_rank_descent(thetas, local, spec, cap);
}

SequentialResult run_sequential(const GaussianBelief& pred, const Matrix& H,
                                const Matrix& R,
                                const std::vector<Matrix>& f_future,
                                const std::vector<Matrix>& q_future,
                                const PrivacySpec& spec,
                                const SensorPartition& part, double eps_conv,
                                int max_iter) {
  if (H.rows() != part.num_rows())
    throw DimMismatch("partition does not match the measurement dimension");
  if (R.rows() != H.rows() || R.cols() != H.rows())
    throw DimMismatch("noise covariance must be square over the measurement");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be positive");

  const int S = part.num_sensors();
  std::vector<Matrix> h_blocks;
  std::vector<Matrix> r_blocks;
  h_blocks.reserve(S);
  r_blocks.reserve(S);
  // Sensors only ever share their own diagonal noise block, so the joint
  // geometry is built on the block-diagonal part of R.
  Matrix r_used = Matrix::Zero(R.rows(), R.cols());
  for (int s = 0; s < S; ++s) {
    const std::vector<int>& own = part.rows_of(s);
    h_blocks.push_back(rows_subset(H, own));
    r_blocks.push_back(submatrix(R, own, own));
    place_block(r_used, own, r_blocks.back());
  }

  const StepGeometry geom = step_geometry(pred, H, r_used, f_future, q_future);
  std::vector<Vector> thresholds;
  thresholds.reserve(geom.horizon() + 1);
  for (int n = 0; n <= geom.horizon(); ++n)
    thresholds.push_back(loss_thresholds(geom, spec, n));

  SequentialResult out;
  out.plan = solve_no_exchange(std::vector<GaussianBelief>(S, pred), h_blocks,
                               r_blocks, f_future, q_future, spec,
                               std::vector<double>(S, spec.delta() / S));
  JointEval cur = evaluate_joint(geom, part, out.plan, spec, thresholds);
  double u_prev = cur.utility;

  for (int sweep = 1; sweep <= max_iter; ++sweep) {
    for (int s = 0; s < S; ++s) {
      BlockPlan candidate = out.plan;
      try {
        const SequentialContext ctx =
            sequential_context(geom, part, out.plan, s);
        candidate.blocks[s] =
            solve_local_given_others(ctx, spec, thresholds).matrix;
      } catch (const std::exception&) {
        continue;  // keep the incumbent block
      }
      const JointEval trial =
          evaluate_joint(geom, part, candidate, spec, thresholds);
      // Adopt only improvements: strictly better utility among feasible
      // assemblies, any feasible over an infeasible incumbent, or any
      // progress while both are infeasible (the candidate enforces the
      // sensor's exact share of the budget).
      const bool adopt = trial.feasible
                             ? (!cur.feasible || trial.utility > cur.utility)
                             : !cur.feasible;
      if (adopt) {
        out.plan = std::move(candidate);
        cur = trial;
      }
    }
    out.trace.push_back(cur.utility);
    out.sweeps = sweep;
    if (std::abs(cur.utility - u_prev) < eps_conv) break;
    u_prev = cur.utility;
  }
  out.feasible = cur.feasible;
  return out;
}

}  // namespace cpriv
