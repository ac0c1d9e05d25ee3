#include "cpriv/baselines.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cpriv {
namespace {

void check_common(const StepGeometry& geom, const Matrix& H,
                  const PrivacySpec& spec, double gamma, int M) {
  if (M < 1) throw std::invalid_argument("baseline row budget must be >= 1");
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("baseline tradeoff must be finite and >= 0");
  if (H.rows() != geom.T.rows())
    throw DimMismatch("measurement map rows do not match innovation size");
  if (H.cols() != spec.dim())
    throw DimMismatch("measurement map columns do not match state dimension");
}

void check_pred(const GaussianBelief& pred, const PrivacySpec& spec) {
  if (pred.cov.rows() != spec.dim() || pred.cov.cols() != spec.dim())
    throw DimMismatch("predicted covariance does not match state dimension");
}

// Orthonormal basis (columns) of the orthogonal complement of col(A).
Matrix orth_complement(const Matrix& a) {
  if (a.cols() == 0) return Matrix::Identity(a.rows(), a.rows());
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU);
  const auto& sv = svd.singularValues();
  const double tol =
      std::max(a.rows(), a.cols()) * 1e-13 * (sv.size() ? sv(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  return svd.matrixU().rightCols(a.rows() - rank);
}

// T - S Sig_y^{-1} S^T: innovation covariance conditioned on the sub-state
// behind the cross-covariance S.
Matrix conditional_innovation(const Matrix& t, const Matrix& sig_zy,
                              const Matrix& sig_y) {
  const Matrix inv_y = floored_psd_inverse(symmetrize(sig_y));
  return symmetrize(t - sig_zy * inv_y * sig_zy.transpose());
}

// T Gam^T (Gam T Gam^T)^{-1} Gam T: innovation energy within the row space
// of Gam (invariant to the choice of basis rows).
Matrix projected_energy(const Matrix& t, const Matrix& gam) {
  const Matrix core = floored_psd_inverse(symmetrize(gam * t * gam.transpose()));
  return symmetrize(t * gam.transpose() * core * gam * t);
}

CompressionPlan rows_to_plan(const std::vector<Vector>& rows, int n_cols,
                             int rank_target) {
  CompressionPlan plan;
  plan.matrix.resize(static_cast<Eigen::Index>(rows.size()), n_cols);
  for (size_t i = 0; i < rows.size(); ++i)
    plan.matrix.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  plan.rank_target = rank_target;
  plan.feasible = true;
  return plan;
}

}  // namespace

BaselineKind::BaselineKind(BaselineMechanism mechanism, double gamma, int rows)
    : mechanism(mechanism), gamma(gamma), rows(rows) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("baseline tradeoff must be finite and > 0");
  if (rows < 1) throw std::invalid_argument("baseline row budget must be >= 1");
}

CompressionPlan ib_compression(const StepGeometry& geom,
                               const GaussianBelief& pred, const Matrix& H,
                               const PrivacySpec& spec, double gamma, int M) {
  check_common(geom, H, spec, gamma, M);
  check_pred(pred, spec);
  const int p = spec.num_public();
  const int q = spec.num_private();
  const int n = static_cast<int>(geom.T.rows());

  const Matrix sig_zy = H.leftCols(p) * pred.cov.topLeftCorner(p, p) +
                        H.rightCols(q) * pred.cov.bottomLeftCorner(q, p);
  const Matrix cond =
      conditional_innovation(geom.T, sig_zy, pred.cov.topLeftCorner(p, p));

  const EigenSelection sel = generalized_top_eigvecs(
      cond, geom.T, std::min(M, n), -1.0, EigOrder::ascending);

  // Row i carries weight sqrt((gamma (1 - lam_i) - 1) / (lam_i v_i^T T v_i));
  // directions where that is imaginary (or lam_i ~ 0) transmit nothing and
  // are dropped.
  std::vector<Vector> rows;
  for (Eigen::Index i = 0; i < sel.values.size(); ++i) {
    const double lam = sel.values(i);
    const double num = gamma * (1.0 - lam) - 1.0;
    if (num <= 0.0 || lam <= 1e-12) continue;
    const Vector v = sel.vectors.col(i);
    const double denom = lam * v.dot(geom.T * v);
    if (denom <= 0.0) continue;
    rows.push_back(std::sqrt(num / denom) * v);
  }
  return rows_to_plan(rows, n, M);
}

CompressionPlan pf_compression(const StepGeometry& geom,
                               const GaussianBelief& pred, const Matrix& H,
                               const PrivacySpec& spec, double gamma, int M) {
  check_common(geom, H, spec, gamma, M);
  check_pred(pred, spec);
  const int p = spec.num_public();
  const int q = spec.num_private();
  const int n = static_cast<int>(geom.T.rows());

  const Matrix sig_zy = H.leftCols(p) * pred.cov.topRightCorner(p, q) +
                        H.rightCols(q) * pred.cov.bottomRightCorner(q, q);
  const Matrix cond =
      conditional_innovation(geom.T, sig_zy, pred.cov.bottomRightCorner(q, q));

  const EigenSelection sel = generalized_top_eigvecs(
      cond, geom.T, std::min(M, n), -1.0, EigOrder::descending);

  std::vector<Vector> rows;
  for (Eigen::Index i = 0; i < sel.vectors.cols(); ++i)
    rows.push_back(sel.vectors.col(i));  // already unit norm
  return rows_to_plan(rows, n, M);
}

CompressionPlan cp_compression(const StepGeometry& geom, const Matrix& H,
                               const PrivacySpec& spec, double gamma, int M) {
  check_common(geom, H, spec, gamma, M);
  const int p = spec.num_public();
  const int q = spec.num_private();
  const int n = static_cast<int>(geom.T.rows());

  const Matrix basis_no_private = orth_complement(H.rightCols(q));
  const Matrix basis_no_public = orth_complement(H.leftCols(p));
  if (basis_no_private.cols() == 0 || basis_no_public.cols() == 0)
    throw EmptyNullspace(
        "measurement columns span the whole space; no protected complement");

  const Matrix omega = projected_energy(geom.T, basis_no_private.transpose());
  const Matrix pi = projected_energy(geom.T, basis_no_public.transpose());

  const EigenSelection sel =
      generalized_top_eigvecs(symmetrize(omega - gamma * pi), geom.T,
                              std::min(M, n), -1.0, EigOrder::descending);

  std::vector<Vector> rows;
  for (Eigen::Index i = 0; i < sel.vectors.cols(); ++i)
    rows.push_back(sel.vectors.col(i));
  return rows_to_plan(rows, n, M);
}

CompressionPlan baseline_compression(const BaselineKind& kind,
                                     const StepGeometry& geom,
                                     const GaussianBelief& pred,
                                     const Matrix& H, const PrivacySpec& spec) {
  switch (kind.mechanism) {
    case BaselineMechanism::ib:
      return ib_compression(geom, pred, H, spec, kind.gamma, kind.rows);
    case BaselineMechanism::pf:
      return pf_compression(geom, pred, H, spec, kind.gamma, kind.rows);
    case BaselineMechanism::cp:
      return cp_compression(geom, H, spec, kind.gamma, kind.rows);
  }
  throw std::invalid_argument("unknown baseline mechanism");
}

TradeoffCalibration calibrate_tradeoff(
    const std::function<double(double)>& steady_eta, double target_eta,
    double gamma_lo, double gamma_hi, int budget) {
  if (!steady_eta)
    throw std::invalid_argument("calibrate_tradeoff needs an evaluator");
  if (!(gamma_lo >= 0.0) || !(gamma_hi > gamma_lo))
    throw std::invalid_argument(
        "calibrate_tradeoff needs 0 <= gamma_lo < gamma_hi");
  if (budget < 2)
    throw std::invalid_argument("calibrate_tradeoff budget must be >= 2");

  int evals_left = budget;
  TradeoffCalibration best;
  double best_err = std::numeric_limits<double>::infinity();
  auto probe = [&](double g) {
    const double eta = steady_eta(g);
    --evals_left;
    const double err = std::abs(eta - target_eta);
    if (err < best_err) {
      best_err = err;
      best.gamma = g;
      best.achieved_eta = eta;
    }
    return err;
  };

  // Geometric coarse grid (endpoints exact), then ternary refinement of the
  // bracket around the best grid point. Every probe updates the incumbent, so
  // a non-unimodal landscape still returns the best value seen.
  const int n_grid = std::max(2, budget / 2);
  std::vector<double> grid(n_grid);
  const double lo_pos = gamma_lo > 0.0 ? gamma_lo : gamma_hi * 1e-9;
  for (int i = 0; i < n_grid; ++i)
    grid[i] = lo_pos * std::pow(gamma_hi / lo_pos,
                                static_cast<double>(i) / (n_grid - 1));
  grid.front() = gamma_lo;
  grid.back() = gamma_hi;

  int best_idx = 0;
  for (int i = 0; i < n_grid && evals_left > 0; ++i) {
    const double before = best_err;
    const double err = probe(grid[i]);
    if (err < before) best_idx = i;
  }

  double a = grid[std::max(0, best_idx - 1)];
  double b = grid[std::min(n_grid - 1, best_idx + 1)];
  while (evals_left >= 2 && b - a > 1e-12 * (1.0 + std::abs(b))) {
    const double m1 = a + (b - a) / 3.0;
    const double m2 = b - (b - a) / 3.0;
    const double e1 = probe(m1);
    const double e2 = probe(m2);
    if (e1 <= e2)
      b = m2;
    else
      a = m1;
  }
  return best;
}

}  // namespace cpriv
