#pragma once

// Range-only localization demo on a unicycle-style model. The state is
// [speed, heading, pos_x, pos_y]; measurements are distances to fixed
// anchors. Each step linearizes around the current estimate and runs the
// usual update on the linearization-corrected pseudo-measurement, either
// plainly or with speed declared public and the rest of the state held above
// a privacy floor.

#include <cstdint>
#include <vector>

#include "cpriv/central.hpp"

namespace cpriv {

// x' = [v, theta, p_x + dt v cos(theta), p_y + dt v sin(theta)].
Vector ekf_propagate(const Vector& x, double dt);

// Jacobian of ekf_propagate at x.
Matrix ekf_f_jacobian(const Vector& x, double dt);

// Distances from (p_x, p_y) to each anchor row (a_x, a_y).
Vector ekf_ranges(const Vector& x, const Matrix& anchors);

// Jacobian of ekf_ranges at x; row i is [0, 0, (p_x - a_x)/d, (p_y - a_y)/d].
// Throws AnchorCollision when the position sits on an anchor (d <= 1e-9).
Matrix ekf_h_jacobian(const Vector& x, const Matrix& anchors);

// One-step linearization around an updated estimate: propagate the mean,
// differentiate the transition there, then differentiate the ranges at the
// propagated mean.
struct EkfStepModel {
  Vector predicted_mean;
  Matrix f_jac;            // transition Jacobian at the estimate
  Matrix h_jac;            // range Jacobian at predicted_mean
  Vector predicted_ranges; // ranges at predicted_mean
};
EkfStepModel ekf_step_model(const Vector& estimate, const Matrix& anchors,
                            double dt);

struct EkfRunConfig {
  std::uint64_t seed = 1;
  int steps = 318;
  double dt = 0.1;
  double delta = 2.0 / 3.0;  // per-component floor on the non-speed states
  double q_scale = 0.04;
  double r_scale = 0.04;
  double p0_scale = 0.01;
  double speed = 1.0;          // true speed along the corridor
  double heading_amp = 0.5;    // meander amplitude (rad) around due east
  double heading_period = 100; // meander period in steps
  double start_x = 0.0;        // truth starts here
  double start_y = 2.0;
  Matrix anchors;  // rows (a_x, a_y); empty selects the default five
};

// Five anchors zigzagging along the default eastward corridor.
Matrix default_ekf_anchors();

struct EkfTrackPoint {
  int k = 0;
  Vector truth;      // [v, theta, p_x, p_y] on the square
  Vector plain;      // unsanitized estimate
  Vector sanitized;  // floor-constrained estimate
  int m_used = 0;    // compressed rows kept by the sanitized filter
  bool feasible = false;
};

struct EkfRunResult {
  std::vector<EkfTrackPoint> track;
  double plain_loc_rmse = 0.0;
  double sanitized_loc_rmse = 0.0;
  double plain_speed_rmse = 0.0;
  double sanitized_speed_rmse = 0.0;
};

// Drives ground truth down a corridor with a gentle sinusoidal meander (the
// per-step heading drift stays well inside the filters' modeled process
// noise, so neither filter faces unmodeled maneuvers), measures noisy anchor
// ranges, and runs the two filters side by side from the same initial belief
// and the same measurements.
EkfRunResult run_ekf_experiment(const EkfRunConfig& cfg);

}  // namespace cpriv
