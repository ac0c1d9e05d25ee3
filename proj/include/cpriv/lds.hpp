#pragma once

// Linear dynamical system model, ground-truth simulation, and the standard /
// compressed Kalman filter.
//
//   x_{k} = F_k x_{k-1} + v_k,   v_k ~ N(0, Q_k)
//   z_k   = H_k x_k + n_k,       n_k ~ N(0, R_k)
//
// A compression plan maps the measurement z_k to C z_k (M rows, possibly 0)
// before the filter consumes it.

#include <random>
#include <utility>
#include <vector>

#include "cpriv/linalg.hpp"

namespace cpriv {

// Per-step model matrices. Transition matrices must be provided far enough
// ahead for any lookahead a solver wants; measurement maps may vary in row
// count per step (dropped rows). Steps are 1-based.
class LdsModel {
 public:
  LdsModel(int dim_state, int dim_meas)
      : dim_state_(dim_state), dim_meas_(dim_meas) {}

  // Validates Q PSD / R PD on entry so later failures point at the model.
  void append_transition(Matrix f, Matrix q);
  void append_measurement(Matrix h, Matrix r);

  int dim_state() const { return dim_state_; }
  int dim_meas() const { return dim_meas_; }
  int transitions_provided() const { return static_cast<int>(f_seq_.size()); }
  int measurements_provided() const { return static_cast<int>(h_seq_.size()); }

  const Matrix& F(int k) const { return f_seq_.at(k - 1); }
  const Matrix& Q(int k) const { return q_seq_.at(k - 1); }
  const Matrix& H(int k) const { return h_seq_.at(k - 1); }
  const Matrix& R(int k) const { return r_seq_.at(k - 1); }

 private:
  int dim_state_;
  int dim_meas_;
  std::vector<Matrix> f_seq_, q_seq_, h_seq_, r_seq_;
};

enum class Stage { predicted, updated };

struct GaussianBelief {
  Vector mean;
  Matrix cov;
  Stage stage = Stage::updated;
};

// Measurement compression C (M x N). M = 0 means the measurement is discarded
// entirely. `feasible` records whether the producing solver met its
// constraints.
struct CompressionPlan {
  Matrix matrix;
  int rank_target = 0;
  bool feasible = true;
  int rows() const { return static_cast<int>(matrix.rows()); }
};

// mean' = F mean, cov' = F cov F^T + Q.
GaussianBelief predict(const GaussianBelief& belief, const Matrix& F,
                       const Matrix& Q);

// Standard Kalman measurement update. A 0-row H flips the stage and changes
// nothing else. The innovation covariance is inverted through a symmetric
// eigendecomposition with eigenvalue floor 1e-12.
GaussianBelief update(const GaussianBelief& belief, const Vector& z,
                      const Matrix& H, const Matrix& R);

// update() on the compressed stream (C z, C H, C R C^T).
GaussianBelief compressed_update(const GaussianBelief& belief, const Vector& z,
                                 const Matrix& H, const Matrix& R,
                                 const CompressionPlan& plan);

// n-step open-loop covariance: fold cov <- F_i cov F_i^T + Q_i over the given
// sequences. n = 0 returns the input unchanged.
Matrix n_step_cov(const Matrix& cov_kk, const std::vector<Matrix>& f_seq,
                  const std::vector<Matrix>& q_seq);

// Draws one step of ground truth and its measurement. Deterministic given the
// generator state; noise factors come from the symmetric PSD square root, so
// zero covariances are fine.
std::pair<Vector, Vector> simulate_step(std::mt19937_64& rng, const Vector& x,
                                        const Matrix& F, const Matrix& Q,
                                        const Matrix& H, const Matrix& R);

}  // namespace cpriv
