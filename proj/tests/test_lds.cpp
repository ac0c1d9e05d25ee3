#include "cpriv/lds.hpp"

#include <random>

#include "doctest.h"
#include "test_support.hpp"

using cpriv::CompressionPlan;
using cpriv::GaussianBelief;
using cpriv::Matrix;
using cpriv::Stage;
using cpriv::Vector;
using testsup::random_matrix;
using testsup::random_pd;
using testsup::random_psd;
using testsup::random_vector;

namespace {

GaussianBelief scalar_belief(double mean, double cov, Stage stage) {
  GaussianBelief b;
  b.mean = Vector::Constant(1, mean);
  b.cov = Matrix::Constant(1, 1, cov);
  b.stage = stage;
  return b;
}

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

}  // namespace

TEST_CASE("predict: scalar arithmetic and identity dynamics") {
  GaussianBelief b = scalar_belief(3.0, 1.0, Stage::updated);
  GaussianBelief p = cpriv::predict(b, scalar(2.0), scalar(1.0));
  CHECK(p.mean(0) == doctest::Approx(6.0));
  CHECK(p.cov(0, 0) == doctest::Approx(5.0));
  CHECK(p.stage == Stage::predicted);

  std::mt19937_64 rng(31);
  GaussianBelief b4{random_vector(rng, 4), random_psd(rng, 4), Stage::updated};
  GaussianBelief same =
      cpriv::predict(b4, Matrix::Identity(4, 4), Matrix::Zero(4, 4));
  CHECK((same.mean - b4.mean).norm() < 1e-14);
  CHECK((same.cov - b4.cov).norm() < 1e-14);
}

TEST_CASE("predict: random case matches the explicit product and stays PSD") {
  std::mt19937_64 rng(32);
  GaussianBelief b{random_vector(rng, 4), random_psd(rng, 4), Stage::updated};
  Matrix f = random_matrix(rng, 4, 4);
  Matrix q = random_psd(rng, 4);
  GaussianBelief p = cpriv::predict(b, f, q);
  Matrix expect = f * b.cov * f.transpose() + q;
  CHECK((p.cov - cpriv::symmetrize(expect)).norm() < 1e-10);
  Eigen::SelfAdjointEigenSolver<Matrix> es(p.cov);
  CHECK(es.eigenvalues().minCoeff() > -1e-9);

  CHECK_THROWS_AS(cpriv::predict(b, random_matrix(rng, 3, 3), q),
                  cpriv::DimMismatch);
}

TEST_CASE("update: scalar gain") {
  GaussianBelief b = scalar_belief(0.0, 1.0, Stage::predicted);
  GaussianBelief u =
      cpriv::update(b, Vector::Constant(1, 2.0), scalar(1.0), scalar(1.0));
  CHECK(u.mean(0) == doctest::Approx(1.0));
  CHECK(u.cov(0, 0) == doctest::Approx(0.5));
  CHECK(u.stage == Stage::updated);
}

TEST_CASE("update: empty measurement only flips the stage") {
  std::mt19937_64 rng(33);
  GaussianBelief b{random_vector(rng, 4), random_psd(rng, 4), Stage::predicted};
  GaussianBelief u = cpriv::update(b, Vector(0), Matrix(0, 4), Matrix(0, 0));
  CHECK(u.stage == Stage::updated);
  CHECK((u.mean - b.mean).norm() == 0.0);
  CHECK((u.cov - b.cov).norm() == 0.0);
}

TEST_CASE("update: covariance never grows (PSD ordering and diagonals)") {
  std::mt19937_64 rng(34);
  for (int t = 0; t < 20; ++t) {
    GaussianBelief b{random_vector(rng, 4), random_pd(rng, 4),
                     Stage::predicted};
    Matrix h = random_matrix(rng, 3, 4);
    Matrix r = random_pd(rng, 3);
    GaussianBelief u = cpriv::update(b, random_vector(rng, 3), h, r);
    Eigen::SelfAdjointEigenSolver<Matrix> es(b.cov - u.cov);
    CHECK(es.eigenvalues().minCoeff() > -1e-9);
    for (int i = 0; i < 4; ++i)
      CHECK(u.cov(i, i) <= b.cov(i, i) + 1e-9);
  }
}

TEST_CASE("compressed_update: identity plan equals the plain update") {
  std::mt19937_64 rng(35);
  GaussianBelief b{random_vector(rng, 4), random_pd(rng, 4), Stage::predicted};
  Matrix h = random_matrix(rng, 3, 4);
  Matrix r = random_pd(rng, 3);
  Vector z = random_vector(rng, 3);
  CompressionPlan plan{Matrix::Identity(3, 3), 3, true};
  GaussianBelief a = cpriv::compressed_update(b, z, h, r, plan);
  GaussianBelief e = cpriv::update(b, z, h, r);
  CHECK((a.mean - e.mean).norm() < 1e-10);
  CHECK((a.cov - e.cov).norm() < 1e-10);
}

TEST_CASE("compressed_update: 0-row plan discards the measurement") {
  std::mt19937_64 rng(36);
  GaussianBelief b{random_vector(rng, 4), random_psd(rng, 4), Stage::predicted};
  CompressionPlan none{Matrix(0, 3), 0, true};
  GaussianBelief u = cpriv::compressed_update(b, random_vector(rng, 3),
                                              random_matrix(rng, 3, 4),
                                              random_pd(rng, 3), none);
  CHECK(u.stage == Stage::updated);
  CHECK((u.cov - b.cov).norm() == 0.0);
}

TEST_CASE("compressed_update: matches hand-written transformed filter") {
  // Oracle: the compressed stream (Cz, CH, CRC^T) pushed through textbook
  // Kalman formulas with a plain matrix inverse.
  std::mt19937_64 rng(37);
  GaussianBelief b{random_vector(rng, 5), random_pd(rng, 5), Stage::predicted};
  Matrix h = random_matrix(rng, 5, 5);
  Matrix r = random_pd(rng, 5);
  Vector z = random_vector(rng, 5);
  Matrix c = random_matrix(rng, 2, 5);
  CompressionPlan plan{c, 2, true};

  GaussianBelief got = cpriv::compressed_update(b, z, h, r, plan);

  Matrix ht = c * h;
  Matrix rt = c * r * c.transpose();
  Matrix s = ht * b.cov * ht.transpose() + rt;
  Matrix k = b.cov * ht.transpose() * s.inverse();
  Vector mean = b.mean + k * (c * z - ht * b.mean);
  Matrix cov = (Matrix::Identity(5, 5) - k * ht) * b.cov;

  CHECK((got.mean - mean).norm() < 1e-8);
  CHECK((got.cov - cpriv::symmetrize(cov)).norm() < 1e-8);
}

TEST_CASE("compressed_update: any invertible square plan is information-free") {
  std::mt19937_64 rng(38);
  for (int t = 0; t < 10; ++t) {
    GaussianBelief b{random_vector(rng, 4), random_pd(rng, 4),
                     Stage::predicted};
    Matrix h = random_matrix(rng, 3, 4);
    Matrix r = random_pd(rng, 3);
    Vector z = random_vector(rng, 3);
    Matrix c = random_matrix(rng, 3, 3);
    if (std::abs(c.determinant()) < 1e-3) continue;
    CompressionPlan plan{c, 3, true};
    GaussianBelief a = cpriv::compressed_update(b, z, h, r, plan);
    GaussianBelief e = cpriv::update(b, z, h, r);
    CHECK((a.cov - e.cov).norm() < 1e-8);
  }
}

TEST_CASE("n_step_cov: conventions and scalar accumulation") {
  std::mt19937_64 rng(39);
  Matrix cov = random_psd(rng, 3);
  CHECK((cpriv::n_step_cov(cov, {}, {}) - cov).norm() == 0.0);

  Matrix f = random_matrix(rng, 3, 3);
  Matrix q = random_psd(rng, 3);
  GaussianBelief b{Vector::Zero(3), cov, Stage::updated};
  CHECK((cpriv::n_step_cov(cov, {f}, {q}) - cpriv::predict(b, f, q).cov)
            .norm() < 1e-12);

  Matrix one = scalar(1.0);
  CHECK(cpriv::n_step_cov(one, {one, one}, {one, one})(0, 0) ==
        doctest::Approx(3.0));

  CHECK_THROWS_AS(cpriv::n_step_cov(cov, {f}, {}), cpriv::DimMismatch);
}

TEST_CASE("simulate_step: noiseless, deterministic, and calibrated") {
  std::mt19937_64 rng(40);
  Matrix f = random_matrix(rng, 3, 3);
  Matrix h = random_matrix(rng, 2, 3);
  Vector x = random_vector(rng, 3);

  auto [xn, z] = cpriv::simulate_step(rng, x, f, Matrix::Zero(3, 3), h,
                                      Matrix::Zero(2, 2));
  CHECK((xn - f * x).norm() < 1e-14);
  CHECK((z - h * xn).norm() < 1e-14);

  Matrix q = random_pd(rng, 3);
  Matrix r = random_pd(rng, 2);
  std::mt19937_64 s1(77), s2(77);
  auto [a1, b1] = cpriv::simulate_step(s1, x, f, q, h, r);
  auto [a2, b2] = cpriv::simulate_step(s2, x, f, q, h, r);
  CHECK((a1 - a2).norm() == 0.0);
  CHECK((b1 - b2).norm() == 0.0);
}

TEST_CASE("simulate_step: sample covariance of the process noise matches Q") {
  Matrix q(2, 2);
  q << 2.0, 0.5, 0.5, 1.0;
  Matrix f = Matrix::Identity(2, 2);
  Matrix h = Matrix::Zero(0, 2);
  Vector x = Vector::Zero(2);

  std::mt19937_64 rng(41);
  Matrix acc = Matrix::Zero(2, 2);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    auto [xn, z] = cpriv::simulate_step(rng, x, f, q, h, Matrix(0, 0));
    acc += xn * xn.transpose();  // v = xn - F x = xn here
  }
  Matrix sample = acc / n;
  CHECK((sample - q).cwiseAbs().maxCoeff() < 0.05 * q.norm());
}

TEST_CASE("filter consistency: reported variance tracks empirical error") {
  std::mt19937_64 rng(42);
  Matrix f = testsup::random_with_sv(rng, 4, 0.5, 0.9);  // stable dynamics
  Matrix h = random_matrix(rng, 4, 4);
  Matrix q = 0.1 * Matrix::Identity(4, 4);
  Matrix r = Matrix::Identity(4, 4);

  Vector se = Vector::Zero(4);   // squared estimation error, accumulated
  Vector var = Vector::Zero(4);  // reported variance, accumulated
  for (int run = 0; run < 50; ++run) {
    Vector x = random_vector(rng, 4);
    GaussianBelief belief{x, Matrix::Identity(4, 4), Stage::updated};
    // Start the estimate at the truth plus unit-covariance noise.
    belief.mean = x + random_vector(rng, 4);
    for (int k = 0; k < 20; ++k) {
      auto [xn, z] = cpriv::simulate_step(rng, x, f, q, h, r);
      x = xn;
      belief = cpriv::update(cpriv::predict(belief, f, q), z, h, r);
      se += (belief.mean - x).cwiseAbs2();
      var += belief.cov.diagonal();
    }
  }
  for (int i = 0; i < 4; ++i) {
    double ratio = se(i) / var(i);
    CHECK(ratio > 0.5);
    CHECK(ratio < 2.0);
  }
}

TEST_CASE("LdsModel validates matrices on provision") {
  cpriv::LdsModel model(3, 2);
  Matrix bad_q = -Matrix::Identity(3, 3);
  CHECK_THROWS_AS(model.append_transition(Matrix::Identity(3, 3), bad_q),
                  cpriv::NotPsd);
  CHECK_THROWS_AS(model.append_transition(Matrix::Identity(2, 2),
                                          Matrix::Identity(2, 2)),
                  cpriv::DimMismatch);
  CHECK_THROWS_AS(
      model.append_measurement(Matrix::Identity(2, 3), Matrix::Zero(2, 2)),
      cpriv::NotPsd);
  model.append_transition(Matrix::Identity(3, 3), Matrix::Identity(3, 3));
  model.append_measurement(Matrix::Identity(2, 3) * 2.0,
                           Matrix::Identity(2, 2));
  CHECK(model.transitions_provided() == 1);
  CHECK(model.F(1)(0, 0) == 1.0);
  CHECK(model.H(1)(0, 0) == 2.0);
}
