#include "cpriv/ekf.hpp"

#include <cmath>
#include <stdexcept>

#include "cpriv/scenario.hpp"

namespace cpriv {
namespace {

constexpr std::uint64_t kTagEkfNoise = 0x656b666e;

void check_state(const Vector& x) {
  if (x.size() != 4)
    throw DimMismatch("unicycle state must be [v, theta, p_x, p_y]");
}

void check_anchors(const Matrix& anchors) {
  if (anchors.rows() < 1 || anchors.cols() != 2)
    throw DimMismatch("anchors must be a nonempty list of (x, y) rows");
}

}  // namespace

Vector ekf_propagate(const Vector& x, double dt) {
  check_state(x);
  Vector out(4);
  out(0) = x(0);
  out(1) = x(1);
  out(2) = x(2) + dt * x(0) * std::cos(x(1));
  out(3) = x(3) + dt * x(0) * std::sin(x(1));
  return out;
}

Matrix ekf_f_jacobian(const Vector& x, double dt) {
  check_state(x);
  const double c = std::cos(x(1));
  const double s = std::sin(x(1));
  Matrix f = Matrix::Identity(4, 4);
  f(2, 0) = dt * c;
  f(2, 1) = -dt * x(0) * s;
  f(3, 0) = dt * s;
  f(3, 1) = dt * x(0) * c;
  return f;
}

Vector ekf_ranges(const Vector& x, const Matrix& anchors) {
  check_state(x);
  check_anchors(anchors);
  Vector d(anchors.rows());
  for (Eigen::Index i = 0; i < anchors.rows(); ++i)
    d(i) = std::hypot(x(2) - anchors(i, 0), x(3) - anchors(i, 1));
  return d;
}

Matrix ekf_h_jacobian(const Vector& x, const Matrix& anchors) {
  check_state(x);
  check_anchors(anchors);
  Matrix h = Matrix::Zero(anchors.rows(), 4);
  for (Eigen::Index i = 0; i < anchors.rows(); ++i) {
    const double dx = x(2) - anchors(i, 0);
    const double dy = x(3) - anchors(i, 1);
    const double d = std::hypot(dx, dy);
    if (d <= 1e-9)
      throw AnchorCollision("position coincides with an anchor");
    h(i, 2) = dx / d;
    h(i, 3) = dy / d;
  }
  return h;
}

EkfStepModel ekf_step_model(const Vector& estimate, const Matrix& anchors,
                            double dt) {
  EkfStepModel m;
  m.f_jac = ekf_f_jacobian(estimate, dt);
  m.predicted_mean = ekf_propagate(estimate, dt);
  m.h_jac = ekf_h_jacobian(m.predicted_mean, anchors);
  m.predicted_ranges = ekf_ranges(m.predicted_mean, anchors);
  return m;
}

Matrix default_ekf_anchors() {
  Matrix a(5, 2);
  a << 0.0, -4.0, 8.0, 8.0, 16.0, -4.0, 24.0, 8.0, 32.0, -4.0;
  return a;
}

EkfRunResult run_ekf_experiment(const EkfRunConfig& cfg) {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("ekf config: " + what);
  };
  if (cfg.steps < 1) fail("steps must be >= 1");
  if (!(cfg.dt > 0.0)) fail("dt must be > 0");
  if (!(cfg.delta >= 0.0)) fail("delta must be >= 0");
  if (!(cfg.q_scale >= 0.0)) fail("q_scale must be >= 0");
  if (!(cfg.r_scale > 0.0)) fail("r_scale must be > 0");
  if (!(cfg.p0_scale > 0.0)) fail("p0_scale must be > 0");
  if (!(cfg.speed > 0.0)) fail("speed must be > 0");
  if (!std::isfinite(cfg.heading_amp)) fail("heading_amp must be finite");
  if (!(cfg.heading_period > 0.0)) fail("heading_period must be > 0");
  const Matrix anchors =
      cfg.anchors.size() == 0 ? default_ekf_anchors() : cfg.anchors;
  check_anchors(anchors);

  const Eigen::Index n_meas = anchors.rows();
  const Matrix q_mat = cfg.q_scale * Matrix::Identity(4, 4);
  const Matrix r_mat =
      cfg.r_scale * Matrix::Identity(n_meas, n_meas);
  const PrivacySpec spec(1, 3, Matrix::Ones(1, 3), cfg.delta,
                         LookaheadPolicy::fixed_r(0));

  auto noise = derived_stream(cfg.seed, kTagEkfNoise);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double noise_scale = std::sqrt(cfg.r_scale);

  Vector truth(4);
  truth << cfg.speed, 0.0, cfg.start_x, cfg.start_y;
  GaussianBelief plain{truth, cfg.p0_scale * Matrix::Identity(4, 4),
                       Stage::updated};
  GaussianBelief sanitized = plain;

  auto ekf_step = [&](const GaussianBelief& belief, const Vector& z,
                      bool constrain, int* rows_out, bool* feasible_out) {
    const EkfStepModel m = ekf_step_model(belief.mean, anchors, cfg.dt);
    GaussianBelief pred{m.predicted_mean,
                        symmetrize(m.f_jac * belief.cov * m.f_jac.transpose() +
                                   q_mat),
                        Stage::predicted};
    const Vector pseudo_z =
        z - m.predicted_ranges + m.h_jac * m.predicted_mean;
    if (!constrain) return update(pred, pseudo_z, m.h_jac, r_mat);
    const CompressionPlan plan =
        solve_centralized(pred, m.h_jac, r_mat, {}, {}, spec);
    *rows_out = plan.rows();
    *feasible_out = plan.feasible;
    return compressed_update(pred, pseudo_z, m.h_jac, r_mat, plan);
  };

  EkfRunResult out;
  out.track.reserve(cfg.steps);
  double loc_sq_plain = 0.0, loc_sq_san = 0.0;
  double v_sq_plain = 0.0, v_sq_san = 0.0;
  for (int k = 1; k <= cfg.steps; ++k) {
    truth(1) =
        cfg.heading_amp * std::sin(2.0 * M_PI * k / cfg.heading_period);
    truth(2) += cfg.dt * cfg.speed * std::cos(truth(1));
    truth(3) += cfg.dt * cfg.speed * std::sin(truth(1));

    Vector z = ekf_ranges(truth, anchors);
    for (Eigen::Index i = 0; i < n_meas; ++i)
      z(i) += noise_scale * gauss(noise);

    EkfTrackPoint pt;
    pt.k = k;
    pt.truth = truth;
    plain = ekf_step(plain, z, false, nullptr, nullptr);
    sanitized = ekf_step(sanitized, z, true, &pt.m_used, &pt.feasible);
    pt.plain = plain.mean;
    pt.sanitized = sanitized.mean;

    loc_sq_plain += (plain.mean.tail(2) - truth.tail(2)).squaredNorm();
    loc_sq_san += (sanitized.mean.tail(2) - truth.tail(2)).squaredNorm();
    v_sq_plain += (plain.mean(0) - truth(0)) * (plain.mean(0) - truth(0));
    v_sq_san +=
        (sanitized.mean(0) - truth(0)) * (sanitized.mean(0) - truth(0));
    out.track.push_back(std::move(pt));
  }
  out.plain_loc_rmse = std::sqrt(loc_sq_plain / cfg.steps);
  out.sanitized_loc_rmse = std::sqrt(loc_sq_san / cfg.steps);
  out.plain_speed_rmse = std::sqrt(v_sq_plain / cfg.steps);
  out.sanitized_speed_rmse = std::sqrt(v_sq_san / cfg.steps);
  return out;
}

}  // namespace cpriv
