#include "cpriv/objectives.hpp"

#include <cmath>

namespace cpriv {

PrivacySpec::PrivacySpec(int num_public, int num_private, Matrix map_a,
                         double delta, LookaheadPolicy lookahead)
    : num_public_(num_public),
      num_private_(num_private),
      map_a_(std::move(map_a)),
      delta_(delta),
      lookahead_(lookahead) {
  if (num_public_ < 0 || num_private_ < 1 || dim() < 1)
    throw DimMismatch("state partition sizes invalid");
  if (map_a_.cols() != num_private_ || map_a_.rows() < 1)
    throw DimMismatch("privacy map must have one column per private state");
  if ((map_a_.array() < 0.0).any())
    throw DimMismatch("privacy map entries must be non-negative");
  if (delta_ < 0.0) throw DimMismatch("privacy floor must be non-negative");
}

namespace {

Vector private_diag(const Matrix& cov, const PrivacySpec& spec) {
  return cov.bottomRightCorner(spec.num_private(), spec.num_private())
      .diagonal();
}

}  // namespace

double public_error_trace(const Matrix& cov, const PrivacySpec& spec) {
  if (cov.rows() != spec.dim() || cov.cols() != spec.dim())
    throw DimMismatch("covariance does not match the state partition");
  return cov.topLeftCorner(spec.num_public(), spec.num_public()).trace();
}

Vector private_error(const Matrix& cov, const PrivacySpec& spec) {
  if (cov.rows() != spec.dim() || cov.cols() != spec.dim())
    throw DimMismatch("covariance does not match the state partition");
  return spec.map_a() * private_diag(cov, spec);
}

StepGeometry step_geometry(const GaussianBelief& pred, const Matrix& H,
                           const Matrix& R,
                           const std::vector<Matrix>& f_future,
                           const std::vector<Matrix>& q_future) {
  const auto L = pred.cov.rows();
  if (H.cols() != L || R.rows() != H.rows() || R.cols() != H.rows())
    throw DimMismatch("step_geometry: measurement dimensions disagree");
  if (f_future.size() != q_future.size())
    throw DimMismatch("step_geometry: future sequences differ in length");

  StepGeometry geom;
  geom.T = symmetrize(H * pred.cov * H.transpose() + R);

  const int r = static_cast<int>(f_future.size());
  Matrix f_prod = Matrix::Identity(L, L);  // F_{k+1:k+n}, empty product = I
  geom.G_by_n.reserve(r + 1);
  geom.P_pred_by_n.reserve(r + 1);
  for (int n = 0; n <= r; ++n) {
    if (n > 0) f_prod = f_future[n - 1] * f_prod;
    geom.G_by_n.push_back(H * pred.cov * f_prod.transpose());
    geom.P_pred_by_n.push_back(n_step_cov(
        pred.cov,
        std::vector<Matrix>(f_future.begin(), f_future.begin() + n),
        std::vector<Matrix>(q_future.begin(), q_future.begin() + n)));
  }
  return geom;
}

Matrix error_reduction(const StepGeometry& geom, const CompressionPlan& plan,
                       int n) {
  if (n < 0 || n > geom.horizon())
    throw DimMismatch("error_reduction: horizon out of range");
  const auto L = geom.G_by_n[0].cols();
  if (plan.rows() == 0) return Matrix::Zero(L, L);
  if (plan.matrix.cols() != geom.T.rows())
    throw DimMismatch("error_reduction: plan does not match T");

  const Matrix& C = plan.matrix;
  const Matrix cg = C * geom.G_by_n[n];
  const Matrix inner = floored_psd_inverse(C * geom.T * C.transpose());
  return symmetrize(cg.transpose() * inner * cg);
}

double utility(const StepGeometry& geom, const CompressionPlan& plan,
               const PrivacySpec& spec) {
  const Matrix d = error_reduction(geom, plan, 0);
  return d.topLeftCorner(spec.num_public(), spec.num_public()).trace();
}

Vector privacy_loss(const StepGeometry& geom, const CompressionPlan& plan,
                    int n, const PrivacySpec& spec) {
  const Matrix d = error_reduction(geom, plan, n);
  return spec.map_a() * private_diag(d, spec);
}

Vector loss_thresholds(const StepGeometry& geom, const PrivacySpec& spec,
                       int n) {
  if (n < 0 || n > geom.horizon())
    throw DimMismatch("loss_thresholds: horizon out of range");
  Vector diag = private_diag(geom.P_pred_by_n[n], spec);
  return spec.map_a() *
         (diag - Vector::Constant(spec.num_private(), spec.delta()));
}

int min_lookahead(const PrivacySpec& spec, double nu, double xi, double eps) {
  if (xi <= 0.0 || eps <= 0.0 || nu <= 0.0)
    throw DimMismatch("min_lookahead: growth bounds must be positive");

  const Vector f_one = spec.map_a().rowwise().sum();  // A * 1
  const Vector f_delta = f_one * spec.delta();        // A * (delta 1)

  if (xi < 1.0) {
    const double limit = eps / (1.0 - xi);
    if (nu >= limit)
      throw NoFiniteBound("current covariance floor exceeds the growth limit");
    for (int f = 0; f < f_one.size(); ++f)
      if (f_delta(f) > f_one(f) * limit + 1e-15 * std::abs(f_delta(f)))
        throw NoFiniteBound("privacy floor exceeds the reachable error limit");
  }

  // Linear scan of the growth bound
  //   g(r) = eps * (1 + xi + ... + xi^{r-1}) + xi^r * nu,
  // searching for the smallest r with f_one * g(r) >= f_delta componentwise.
  constexpr int kMaxScan = 100000;
  double geo_sum = 0.0;  // sum_{i<r} xi^i
  double xi_pow = 1.0;   // xi^r
  for (int r = 0; r <= kMaxScan; ++r) {
    const double g = eps * geo_sum + xi_pow * nu;
    bool ok = true;
    for (int f = 0; f < f_one.size(); ++f)
      if (f_one(f) * g < f_delta(f)) {
        ok = false;
        break;
      }
    if (ok) return r > 0 ? r - 1 : 0;
    geo_sum += xi_pow;
    xi_pow *= xi;
  }
  throw NoFiniteBound("no finite lookahead reaches the privacy floor");
}

}  // namespace cpriv
