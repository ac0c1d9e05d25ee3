#include "cpriv/lds.hpp"

#include <cmath>

namespace cpriv {

void LdsModel::append_transition(Matrix f, Matrix q) {
  if (f.rows() != dim_state_ || f.cols() != dim_state_ ||
      q.rows() != dim_state_ || q.cols() != dim_state_)
    throw DimMismatch("transition matrices must be L x L");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(q));
  if (es.eigenvalues().minCoeff() < -psd_tol(q))
    throw NotPsd("process noise covariance must be PSD");
  f_seq_.push_back(std::move(f));
  q_seq_.push_back(std::move(q));
}

void LdsModel::append_measurement(Matrix h, Matrix r) {
  if (h.cols() != dim_state_ || r.rows() != h.rows() || r.cols() != h.rows())
    throw DimMismatch("measurement matrices must be N_k x L and N_k x N_k");
  if (h.rows() > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(r));
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw NotPsd("measurement noise covariance must be PD");
  }
  h_seq_.push_back(std::move(h));
  r_seq_.push_back(std::move(r));
}

GaussianBelief predict(const GaussianBelief& belief, const Matrix& F,
                       const Matrix& Q) {
  const auto L = belief.mean.size();
  if (F.rows() != L || F.cols() != L || Q.rows() != L || Q.cols() != L)
    throw DimMismatch("predict: dimension mismatch");
  GaussianBelief out;
  out.mean = F * belief.mean;
  out.cov = symmetrize(F * belief.cov * F.transpose() + Q);
  out.stage = Stage::predicted;
  return out;
}

GaussianBelief update(const GaussianBelief& belief, const Vector& z,
                      const Matrix& H, const Matrix& R) {
  const auto L = belief.mean.size();
  if (H.cols() != L || z.size() != H.rows() || R.rows() != H.rows() ||
      R.cols() != H.rows())
    throw DimMismatch("update: dimension mismatch");

  GaussianBelief out = belief;
  out.stage = Stage::updated;
  if (H.rows() == 0) return out;  // empty measurement carries no information

  const Matrix s_inv =
      floored_psd_inverse(H * belief.cov * H.transpose() + R);
  const Matrix K = belief.cov * H.transpose() * s_inv;
  out.mean = belief.mean + K * (z - H * belief.mean);
  out.cov = symmetrize((Matrix::Identity(L, L) - K * H) * belief.cov);
  return out;
}

GaussianBelief compressed_update(const GaussianBelief& belief, const Vector& z,
                                 const Matrix& H, const Matrix& R,
                                 const CompressionPlan& plan) {
  if (plan.rows() > 0 && plan.matrix.cols() != H.rows())
    throw DimMismatch("compression plan does not match measurement dimension");
  if (plan.rows() == 0) {
    GaussianBelief out = belief;
    out.stage = Stage::updated;
    return out;
  }
  const Matrix& C = plan.matrix;
  return update(belief, C * z, C * H, symmetrize(C * R * C.transpose()));
}

Matrix n_step_cov(const Matrix& cov_kk, const std::vector<Matrix>& f_seq,
                  const std::vector<Matrix>& q_seq) {
  if (f_seq.size() != q_seq.size())
    throw DimMismatch("n_step_cov: sequence lengths differ");
  Matrix cov = symmetrize(cov_kk);
  for (size_t i = 0; i < f_seq.size(); ++i)
    cov = symmetrize(f_seq[i] * cov * f_seq[i].transpose() + q_seq[i]);
  return cov;
}

std::pair<Vector, Vector> simulate_step(std::mt19937_64& rng, const Vector& x,
                                        const Matrix& F, const Matrix& Q,
                                        const Matrix& H, const Matrix& R) {
  const auto L = x.size();
  if (F.rows() != L || F.cols() != L || Q.rows() != L || H.cols() != L)
    throw DimMismatch("simulate_step: dimension mismatch");

  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&](Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = gauss(rng);
    return v;
  };

  Vector x_next = F * x + sym_sqrt(Q) * draw(L);
  Vector z = H * x_next + sym_sqrt(R) * draw(H.rows());
  return {std::move(x_next), std::move(z)};
}

}  // namespace cpriv
