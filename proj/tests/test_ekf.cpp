#include "cpriv/ekf.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "test_support.hpp"

using cpriv::EkfRunConfig;
using cpriv::EkfStepModel;
using cpriv::Matrix;
using cpriv::Vector;

namespace {

Vector make_state(double v, double theta, double px, double py) {
  Vector x(4);
  x << v, theta, px, py;
  return x;
}

}  // namespace

TEST_CASE("propagation advances the position along the heading") {
  const Vector x = make_state(2.0, 0.0, 1.0, -1.0);
  const Vector out = cpriv::ekf_propagate(x, 0.1);
  CHECK(out(0) == 2.0);
  CHECK(out(1) == 0.0);
  CHECK(out(2) == doctest::Approx(1.2));
  CHECK(out(3) == doctest::Approx(-1.0));

  const Vector north = cpriv::ekf_propagate(make_state(2.0, M_PI / 2, 0, 0), 0.1);
  CHECK(north(2) == doctest::Approx(0.0));
  CHECK(north(3) == doctest::Approx(0.2));

  CHECK_THROWS_AS(cpriv::ekf_propagate(Vector::Zero(3), 0.1),
                  cpriv::DimMismatch);
}

TEST_CASE("a 3-4-5 anchor gives the textbook range row") {
  Matrix anchor(1, 2);
  anchor << 3.0, 4.0;
  const Vector x = make_state(1.0, 0.0, 0.0, 0.0);
  const Vector d = cpriv::ekf_ranges(x, anchor);
  CHECK(d(0) == doctest::Approx(5.0));
  const Matrix h = cpriv::ekf_h_jacobian(x, anchor);
  CHECK(h(0, 0) == 0.0);
  CHECK(h(0, 1) == 0.0);
  CHECK(h(0, 2) == doctest::Approx(-0.6));
  CHECK(h(0, 3) == doctest::Approx(-0.8));
}

TEST_CASE("transition Jacobian loses its heading column at zero speed") {
  const Matrix f = cpriv::ekf_f_jacobian(make_state(0.0, 0.7, 2.0, 3.0), 0.1);
  CHECK(f(2, 1) == 0.0);
  CHECK(f(3, 1) == 0.0);
  CHECK(f(2, 0) == doctest::Approx(0.1 * std::cos(0.7)));
  CHECK(f(3, 0) == doctest::Approx(0.1 * std::sin(0.7)));
  CHECK(f.topLeftCorner(2, 2) == Matrix::Identity(2, 2));
  CHECK(f.col(2) == Vector::Unit(4, 2));
  CHECK(f.col(3) == Vector::Unit(4, 3));
}

TEST_CASE("both Jacobians match central finite differences") {
  std::mt19937_64 rng(23);
  const Matrix anchors = cpriv::default_ekf_anchors();
  const double step = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    Vector x = testsup::random_vector(rng, 4);
    x(2) = 3.0 + x(2);  // stay away from the anchors
    x(3) = 2.0 + x(3);
    const Matrix f_jac = cpriv::ekf_f_jacobian(x, 0.1);
    const Matrix h_jac = cpriv::ekf_h_jacobian(x, anchors);
    for (int j = 0; j < 4; ++j) {
      Vector hi = x, lo = x;
      hi(j) += step;
      lo(j) -= step;
      const Vector df =
          (cpriv::ekf_propagate(hi, 0.1) - cpriv::ekf_propagate(lo, 0.1)) /
          (2 * step);
      const Vector dh = (cpriv::ekf_ranges(hi, anchors) -
                         cpriv::ekf_ranges(lo, anchors)) /
                        (2 * step);
      CHECK((f_jac.col(j) - df).cwiseAbs().maxCoeff() < 1e-5);
      CHECK((h_jac.col(j) - dh).cwiseAbs().maxCoeff() < 1e-5);
    }
  }
}

TEST_CASE("standing on an anchor is rejected") {
  Matrix anchor(1, 2);
  anchor << 1.0, 2.0;
  CHECK_THROWS_AS(
      cpriv::ekf_h_jacobian(make_state(1.0, 0.0, 1.0, 2.0), anchor),
      cpriv::AnchorCollision);
  CHECK_NOTHROW(cpriv::ekf_h_jacobian(make_state(1.0, 0.0, 1.1, 2.0), anchor));
}

TEST_CASE("step model composes the pieces at the right linearization points") {
  const Matrix anchors = cpriv::default_ekf_anchors();
  const Vector est = make_state(1.3, 0.4, 5.0, 1.0);
  const EkfStepModel m = cpriv::ekf_step_model(est, anchors, 0.1);
  CHECK(m.predicted_mean == cpriv::ekf_propagate(est, 0.1));
  CHECK(m.f_jac == cpriv::ekf_f_jacobian(est, 0.1));
  CHECK(m.h_jac == cpriv::ekf_h_jacobian(m.predicted_mean, anchors));
  CHECK(m.predicted_ranges == cpriv::ekf_ranges(m.predicted_mean, anchors));
}

TEST_CASE("default anchors frame the corridor") {
  const Matrix a = cpriv::default_ekf_anchors();
  CHECK(a.rows() == 5);
  CHECK(a.cols() == 2);
}

TEST_CASE("localization run is deterministic and tracks the loop") {
  EkfRunConfig cfg;
  cfg.steps = 60;
  const auto a = cpriv::run_ekf_experiment(cfg);
  const auto b = cpriv::run_ekf_experiment(cfg);
  REQUIRE(a.track.size() == 60);
  CHECK(a.plain_loc_rmse == b.plain_loc_rmse);
  CHECK(a.sanitized_loc_rmse == b.sanitized_loc_rmse);
  CHECK(a.track.back().plain == b.track.back().plain);

  for (const auto& pt : a.track) CHECK(pt.truth(0) == cfg.speed);
  // Truth moves east overall.
  CHECK(a.track.back().truth(2) > a.track.front().truth(2));

  EkfRunConfig other = cfg;
  other.seed = 2;
  const auto c = cpriv::run_ekf_experiment(other);
  CHECK(c.plain_loc_rmse != a.plain_loc_rmse);
}

TEST_CASE("sanitized filter gives up location but keeps speed") {
  // Tight bounds live in the acceptance suite; this is a fast sanity check.
  EkfRunConfig cfg;
  const auto res = cpriv::run_ekf_experiment(cfg);
  CHECK(res.sanitized_loc_rmse > 2.0 * res.plain_loc_rmse);
  CHECK(res.sanitized_speed_rmse < 2.0 * res.plain_speed_rmse);
  // The compressed filter starts by discarding, then settles on one row.
  CHECK(res.track.front().m_used == 0);
  CHECK(res.track.back().m_used == 1);
  CHECK(res.track.back().feasible);
}

TEST_CASE("run config validation") {
  auto expect_bad = [](auto&& mutate) {
    EkfRunConfig cfg;
    mutate(cfg);
    CHECK_THROWS_AS(cpriv::run_ekf_experiment(cfg), std::invalid_argument);
  };
  expect_bad([](EkfRunConfig& c) { c.steps = 0; });
  expect_bad([](EkfRunConfig& c) { c.dt = 0.0; });
  expect_bad([](EkfRunConfig& c) { c.r_scale = 0.0; });
  expect_bad([](EkfRunConfig& c) { c.speed = -1.0; });
  expect_bad([](EkfRunConfig& c) { c.heading_period = 0.0; });
  EkfRunConfig bad_anchor;
  bad_anchor.anchors = Matrix::Zero(2, 3);
  CHECK_THROWS_AS(cpriv::run_ekf_experiment(bad_anchor), cpriv::DimMismatch);
}
