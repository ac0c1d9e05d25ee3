#include "cpriv/central.hpp"

#include <algorithm>
#include <cmath>

namespace cpriv {

namespace {

// Acceptance slack for a loss against its budget: tight enough that active
// floors hold to ~1e-8 absolute, loose enough to absorb eigensolver noise.
double budget_slack(double thr) { return 1e-9 * (1.0 + std::abs(thr)); }

bool within_budget(double loss, double thr) {
  return loss <= thr + budget_slack(thr);
}

// One multiplier-search probe: feasibility state of the full stationary basis
// plus its per-constraint losses (used as the bisection predicate).
struct Probe {
  bool full_feasible = false;
  std::vector<Vector> full_losses;
};

class MultiplierSearch {
 public:
  MultiplierSearch(const ThetaSet& thetas,
                   const std::vector<Vector>& thresholds,
                   const PrivacySpec& spec, int m)
      : thetas_(thetas), thr_(thresholds), spec_(spec), m_(m) {}

  Probe evaluate(const Matrix& gamma) {
    EigenSelection sel =
        stationary_basis(thetas_, MultiplierVector{gamma}, spec_, m_);

    Probe probe;
    probe.full_losses = losses_of(sel.vectors);
    probe.full_feasible = feasible(probe.full_losses);
    consider(gamma, sel, sel.count(), probe.full_feasible, probe.full_losses);

    // Second candidate: the positive-eigenvalue prefix. Directions with
    // negative penalized value usually cost more privacy than they buy.
    int pos = 0;
    while (pos < sel.count() && sel.values(pos) > 0.0) ++pos;
    if (pos < sel.count()) {
      Matrix u = sel.vectors.leftCols(pos);
      std::vector<Vector> losses = losses_of(u);
      consider(gamma, EigenSelection{u, sel.values.head(pos)}, pos,
               feasible(losses), losses);
    }
    return probe;
  }

  bool have_best() const { return have_best_; }
  const MultiplierResult& best() const { return best_; }

 private:
  std::vector<Vector> losses_of(const Matrix& u) const {
    std::vector<Vector> out;
    out.reserve(thr_.size());
    for (int n = 0; n < static_cast<int>(thr_.size()); ++n)
      out.push_back(basis_loss(thetas_, u, n, spec_));
    return out;
  }

  bool feasible(const std::vector<Vector>& losses) const {
    for (size_t n = 0; n < thr_.size(); ++n)
      for (int f = 0; f < thr_[n].size(); ++f)
        if (!within_budget(losses[n](f), thr_[n](f))) return false;
    return true;
  }

  void consider(const Matrix& gamma, const EigenSelection& sel, int cols,
                bool ok, const std::vector<Vector>&) {
    if (!ok) return;
    double util = basis_utility(thetas_, sel.vectors.leftCols(cols));
    if (!have_best_ || util > best_.utility + 1e-12) {
      best_.gamma.gamma = gamma;
      best_.basis =
          EigenSelection{sel.vectors.leftCols(cols), sel.values.head(cols)};
      best_.feasible = true;
      best_.utility = util;
      have_best_ = true;
    }
  }

  const ThetaSet& thetas_;
  const std::vector<Vector>& thr_;
  const PrivacySpec& spec_;
  int m_;
  bool have_best_ = false;
  MultiplierResult best_;
};

}  // namespace

ThetaSet build_thetas(const StepGeometry& geom, const PrivacySpec& spec) {
  if (!geom.G_by_n.empty() && geom.G_by_n[0].cols() != spec.dim())
    throw DimMismatch("build_thetas: geometry does not match the partition");

  ThetaSet out;
  out.t_inv_sqrt = sym_inv_sqrt(geom.T);
  const int r = geom.horizon();
  out.theta_q.resize(r + 1);
  out.w_private.resize(r + 1);
  for (int n = 0; n <= r; ++n) {
    const Matrix w = out.t_inv_sqrt * geom.G_by_n[n];
    if (n == 0) {
      out.w_public = w.leftCols(spec.num_public());
      out.theta_p = symmetrize(out.w_public * out.w_public.transpose());
    }
    out.w_private[n] = w.rightCols(spec.num_private());
    out.theta_q[n].reserve(spec.num_private());
    for (int j = 0; j < spec.num_private(); ++j) {
      Vector col = out.w_private[n].col(j);
      out.theta_q[n].push_back(col * col.transpose());
    }
  }
  return out;
}

EigenSelection stationary_basis(const ThetaSet& thetas,
                                const MultiplierVector& gamma,
                                const PrivacySpec& spec, int M) {
  const int r1 = thetas.horizon() + 1;
  if (gamma.gamma.rows() != r1 || gamma.gamma.cols() != spec.num_maps())
    throw DimMismatch("multiplier shape must be (r+1) x |F|");
  if ((gamma.gamma.array() < 0.0).any())
    throw DimMismatch("multipliers must be non-negative");

  Matrix phi = thetas.theta_p;
  for (int n = 0; n < r1; ++n) {
    // Per-private-coordinate weight: mu_j = sum_f gamma(n,f) A(f,j).
    Vector mu = (gamma.gamma.row(n) * spec.map_a()).transpose();
    phi.noalias() -=
        thetas.w_private[n] * mu.asDiagonal() * thetas.w_private[n].transpose();
  }
  return top_nonzero_eigvecs(symmetrize(phi), M);
}

Vector basis_loss(const ThetaSet& thetas, const Matrix& u, int n,
                  const PrivacySpec& spec) {
  if (u.cols() == 0) return Vector::Zero(spec.num_maps());
  // tr(U^T w w^T U) = ||U^T w||^2 per private column w.
  Matrix proj = thetas.w_private[n].transpose() * u;  // |Q| x M
  Vector per_coord = proj.rowwise().squaredNorm();
  return spec.map_a() * per_coord;
}

double basis_utility(const ThetaSet& thetas, const Matrix& u) {
  if (u.cols() == 0) return 0.0;
  return (u.transpose() * thetas.w_public).squaredNorm();
}

MultiplierResult solve_multipliers(const ThetaSet& thetas,
                                   const StepGeometry& geom,
                                   const PrivacySpec& spec, int M,
                                   const std::vector<Matrix>& gamma_seeds) {
  std::vector<Vector> thresholds;
  for (int n = 0; n <= geom.horizon(); ++n)
    thresholds.push_back(loss_thresholds(geom, spec, n));
  return solve_multipliers(thetas, thresholds, spec, M, gamma_seeds);
}

MultiplierResult solve_multipliers(const ThetaSet& thetas,
                                   const std::vector<Vector>& thresholds,
                                   const PrivacySpec& spec, int M,
                                   const std::vector<Matrix>& gamma_seeds) {
  const int r1 = thetas.horizon() + 1;
  const int nf = spec.num_maps();
  if (static_cast<int>(thresholds.size()) != r1)
    throw DimMismatch("one threshold vector per horizon required");

  MultiplierResult infeasible;
  infeasible.gamma.gamma = Matrix::Zero(r1, nf);

  // A negative budget cannot be met by any multiplier (losses are >= 0).
  double min_thr = thresholds[0].minCoeff();
  for (const Vector& t : thresholds) min_thr = std::min(min_thr, t.minCoeff());
  if (min_thr < -budget_slack(min_thr)) return infeasible;

  MultiplierSearch search(thetas, thresholds, spec, M);

  // Unconstrained optimum: if gamma = 0 is feasible it is globally optimal
  // (top eigenvectors of Theta_P maximize the trace over all rank-M bases).
  const Matrix zero = Matrix::Zero(r1, nf);
  if (search.evaluate(zero).full_feasible) return search.best();

  for (const Matrix& seed : gamma_seeds) {
    if (seed.rows() != r1 || seed.cols() != nf) continue;
    search.evaluate(seed.cwiseMax(0.0));
  }

  const double g_base = 1e3 * std::max(thetas.theta_p.trace(), 1e-12) /
                        std::max(min_thr, 1e-9);

  auto probe_ok = [&](const Probe& p, int n, int f) {
    return within_budget(p.full_losses[n](f), thresholds[n](f));
  };

  if (r1 * nf == 1) {
    // Single constraint: plain bisection for the smallest feasible gamma.
    double hi = g_base;
    bool found = false;
    for (int d = 0; d <= 10 && !found; ++d) {
      if (search.evaluate(Matrix::Constant(1, 1, hi)).full_feasible)
        found = true;
      else
        hi *= 2.0;
    }
    if (found) {
      double lo = 0.0;
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (search.evaluate(Matrix::Constant(1, 1, mid)).full_feasible)
          hi = mid;
        else
          lo = mid;
      }
      search.evaluate(Matrix::Constant(1, 1, hi));
    }
    // Optimality polish: coarse log + linear scans, keeping the best probe.
    const double top = found ? hi : g_base * 1024.0;
    for (int i = 0; i < 48; ++i) {
      const double s = g_base * 1e-6 *
                       std::pow(1024.0 * 1e6 / 1e0, i / 47.0);
      search.evaluate(Matrix::Constant(1, 1, s));
    }
    for (int i = 1; i <= 16; ++i)
      search.evaluate(Matrix::Constant(1, 1, top * i / 16.0));
    return search.have_best() ? search.best() : infeasible;
  }

  // Cyclic coordinate search: drive each multiplier to the smallest value
  // satisfying its own constraint given the others. Multipliers are hard
  // capped so a persistently unsatisfiable constraint cannot blow gamma up.
  const double g_cap = g_base * 1024.0;
  Matrix gamma = zero;
  if (search.have_best()) gamma = search.best().gamma.gamma;

  constexpr int kMaxSweeps = 200;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool changed = false;
    for (int c = 0; c < r1 * nf; ++c) {
      const int n = c / nf, f = c % nf;
      const double cur = gamma(n, f);

      auto probe_at = [&](double x) {
        Matrix g = gamma;
        g(n, f) = x;
        return search.evaluate(g);
      };

      double next = cur;
      if (probe_ok(probe_at(0.0), n, f)) {
        next = 0.0;
      } else if (probe_ok(probe_at(cur), n, f)) {
        // Feasible here: bisect down toward the smallest feasible value.
        double lo = 0.0, hi = cur;
        for (int it = 0; it < 30; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (probe_ok(probe_at(mid), n, f))
            hi = mid;
          else
            lo = mid;
        }
        next = hi;
      } else {
        // Infeasible here: grow until the constraint gives, then bisect.
        double lo = cur, hi = std::max(g_base, 2.0 * std::max(cur, 1e-12));
        hi = std::min(hi, g_cap);
        bool found = false;
        while (true) {
          if (probe_ok(probe_at(hi), n, f)) {
            found = true;
            break;
          }
          if (hi >= g_cap) break;
          lo = hi;
          hi = std::min(hi * 2.0, g_cap);
        }
        if (found) {
          for (int it = 0; it < 30; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (probe_ok(probe_at(mid), n, f))
              hi = mid;
            else
              lo = mid;
          }
        }
        next = hi;  // when saturated, later sweeps or the fallback may recover
      }
      if (std::abs(next - cur) > 1e-9 * (1.0 + std::abs(cur))) changed = true;
      gamma(n, f) = next;
    }
    if (!changed) {
      search.evaluate(gamma);
      break;  // fixed point: further sweeps cannot move
    }
  }

  if (!search.have_best()) {
    // Uniform-scale fallback: gamma = s * ones over a log grid.
    for (int i = 0; i < 48; ++i) {
      const double s =
          g_base * 1e-6 * std::pow(1024.0 * 1e6, i / 47.0);
      search.evaluate(Matrix::Constant(r1, nf, s));
    }
  }
  return search.have_best() ? search.best() : infeasible;
}

CompressionPlan solve_rank_descent(const ThetaSet& thetas,
                                   const std::vector<Vector>& thresholds,
                                   const PrivacySpec& spec, int rank_cap) {
  const int n_meas = static_cast<int>(thetas.t_inv_sqrt.rows());

  bool floors_hold_empty = true;
  for (const Vector& t : thresholds)
    for (int f = 0; f < t.size(); ++f)
      if (t(f) < -budget_slack(t(f))) floors_hold_empty = false;

  CompressionPlan none{Matrix(0, n_meas), 0, floors_hold_empty};
  if (!floors_hold_empty) return none;  // no rank can meet a negative budget

  std::vector<Matrix> seeds;
  for (int m = rank_cap; m >= 1; --m) {
    MultiplierResult res =
        solve_multipliers(thetas, thresholds, spec, m, seeds);
    if (res.feasible) {
      CompressionPlan plan;
      plan.matrix = res.basis.vectors.transpose() * thetas.t_inv_sqrt;
      plan.rank_target = res.basis.count();
      plan.feasible = true;
      return plan;
    }
    seeds.push_back(res.gamma.gamma);
  }
  return none;
}

CompressionPlan solve_centralized(const GaussianBelief& pred, const Matrix& H,
                                  const Matrix& R,
                                  const std::vector<Matrix>& f_future,
                                  const std::vector<Matrix>& q_future,
                                  const PrivacySpec& spec) {
  StepGeometry geom = step_geometry(pred, H, R, f_future, q_future);
  ThetaSet thetas = build_thetas(geom, spec);
  std::vector<Vector> thresholds;
  for (int n = 0; n <= geom.horizon(); ++n)
    thresholds.push_back(loss_thresholds(geom, spec, n));

  const int n_meas = static_cast<int>(H.rows());
  const int cap = std::min(
      n_meas, spec.num_public() + (geom.horizon() + 1) * spec.num_private());
  return solve_rank_descent(thetas, thresholds, spec, cap);
}

}  // namespace cpriv
