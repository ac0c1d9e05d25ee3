#pragma once

// Utility / privacy bookkeeping for compressive filtering. The state vector
// splits into a public prefix (indices 0..|P|-1) whose estimation error we
// want small, and a private suffix whose error must stay above a floor. A
// nonnegative matrix A maps the private error variances to the constrained
// quantities (all-ones row = total private error; identity = per-coordinate
// floors).

#include <vector>

#include "cpriv/lds.hpp"

namespace cpriv {

struct LookaheadPolicy {
  enum class Kind {
    fixed,     // enforce horizons n = 0..r with a caller-chosen r
    adaptive,  // choose r each step from the noise/transition growth bounds
  };
  Kind kind = Kind::fixed;
  int r = 0;
  // Growth bounds used by the adaptive policy: F_k F_k^T >= xi I and
  // Q_k >= eps I uniformly over steps.
  double xi = 1.0;
  double eps = 1.0;

  static LookaheadPolicy fixed_r(int r) {
    return LookaheadPolicy{Kind::fixed, r, 1.0, 1.0};
  }
  static LookaheadPolicy adaptive(double xi, double eps) {
    return LookaheadPolicy{Kind::adaptive, 0, xi, eps};
  }
};

class PrivacySpec {
 public:
  // Public states are indices 0..num_public-1, private states the remainder.
  PrivacySpec(int num_public, int num_private, Matrix map_a, double delta,
              LookaheadPolicy lookahead);

  int num_public() const { return num_public_; }
  int num_private() const { return num_private_; }
  int dim() const { return num_public_ + num_private_; }
  int num_maps() const { return static_cast<int>(map_a_.rows()); }
  const Matrix& map_a() const { return map_a_; }
  double delta() const { return delta_; }
  const LookaheadPolicy& lookahead() const { return lookahead_; }

 private:
  int num_public_;
  int num_private_;
  Matrix map_a_;
  double delta_;
  LookaheadPolicy lookahead_;
};

// Everything about step k's optimization that does not depend on the
// compression matrix: the uncompressed innovation covariance T, the
// cross-covariances G between the innovation and the n-step-ahead state, and
// the update-free n-step covariances.
struct StepGeometry {
  Matrix T;
  std::vector<Matrix> G_by_n;
  std::vector<Matrix> P_pred_by_n;
  int horizon() const { return static_cast<int>(G_by_n.size()) - 1; }
};

// Trace of the public-block of a state covariance.
double public_error_trace(const Matrix& cov, const PrivacySpec& spec);

// A * vecdiag(private block of cov).
Vector private_error(const Matrix& cov, const PrivacySpec& spec);

// Builds T, G, and the update-free covariances for horizons n = 0..r, where r
// is the number of future transition matrices supplied.
StepGeometry step_geometry(const GaussianBelief& pred, const Matrix& H,
                           const Matrix& R,
                           const std::vector<Matrix>& f_future,
                           const std::vector<Matrix>& q_future);

// Covariance reduction achieved at horizon n by compressing with plan:
// G^T C^T (C T C^T)^{-1} C G. Zero matrix when the plan has no rows.
Matrix error_reduction(const StepGeometry& geom, const CompressionPlan& plan,
                       int n);

// Trace of the public block of the horizon-0 reduction.
double utility(const StepGeometry& geom, const CompressionPlan& plan,
               const PrivacySpec& spec);

// A * vecdiag(private block of the horizon-n reduction).
Vector privacy_loss(const StepGeometry& geom, const CompressionPlan& plan,
                    int n, const PrivacySpec& spec);

// A * (vecdiag(private block of the update-free covariance at horizon n) -
// delta * 1). Negative entries mean the floor is unreachable even with the
// measurement discarded.
Vector loss_thresholds(const StepGeometry& geom, const PrivacySpec& spec,
                       int n);

// Smallest lookahead r such that enforcing the floors over horizons 0..r
// keeps them satisfied forever, given uniform growth bounds F F^T >= xi I,
// Q >= eps I and a current covariance floor nu. Throws NoFiniteBound when no
// finite horizon suffices.
int min_lookahead(const PrivacySpec& spec, double nu, double xi, double eps);

}  // namespace cpriv
