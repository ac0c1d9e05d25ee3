#include "cpriv/linalg.hpp"

#include <random>

#include "doctest.h"
#include "test_support.hpp"

using cpriv::EigenSelection;
using cpriv::EigOrder;
using cpriv::Matrix;
using cpriv::Vector;
using testsup::random_matrix;
using testsup::random_pd;
using testsup::random_psd;

namespace {

Matrix diag3(double a, double b, double c) {
  Vector d(3);
  d << a, b, c;
  return Matrix(d.asDiagonal());
}

}  // namespace

TEST_CASE("sym_sqrt: diagonal and identity") {
  Vector d(2);
  d << 4.0, 9.0;
  Matrix s = cpriv::sym_sqrt(Matrix(d.asDiagonal()));
  CHECK(s(0, 0) == doctest::Approx(2.0));
  CHECK(s(1, 1) == doctest::Approx(3.0));
  CHECK(s(0, 1) == doctest::Approx(0.0));

  Matrix i3 = Matrix::Identity(3, 3);
  CHECK((cpriv::sym_sqrt(i3) - i3).norm() < 1e-12);
}

TEST_CASE("sym_sqrt: squares back to the input on random PSD") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    Matrix m = random_psd(rng, 5);
    Matrix s = cpriv::sym_sqrt(m);
    CHECK((s * s - m).norm() / m.norm() < 1e-8);
    CHECK((s - s.transpose()).norm() < 1e-12);
  }
}

TEST_CASE("sym_sqrt: rejects indefinite input") {
  CHECK_THROWS_AS(cpriv::sym_sqrt(diag3(1.0, -1.0, 2.0)), cpriv::NotPsd);
  CHECK_THROWS_AS(cpriv::sym_sqrt(Matrix::Random(3, 4)), cpriv::DimMismatch);
}

TEST_CASE("sym_inv_sqrt: scalar, identity, random PD") {
  Matrix one(1, 1);
  one << 4.0;
  CHECK(cpriv::sym_inv_sqrt(one)(0, 0) == doctest::Approx(0.5));

  Matrix i2 = Matrix::Identity(2, 2);
  CHECK((cpriv::sym_inv_sqrt(i2) - i2).norm() < 1e-12);

  std::mt19937_64 rng(12);
  for (int t = 0; t < 20; ++t) {
    Matrix m = random_pd(rng, 6);
    Matrix r = cpriv::sym_inv_sqrt(m);
    CHECK((r * m * r - Matrix::Identity(6, 6)).norm() < 1e-8);
  }
}

TEST_CASE("sym_inv_sqrt: rejects singular input") {
  std::mt19937_64 rng(13);
  Matrix rank2 = random_psd(rng, 4, 2);
  CHECK_THROWS_AS(cpriv::sym_inv_sqrt(rank2), cpriv::Singular);
}

TEST_CASE("top_nonzero_eigvecs: diagonal selection drops the zero") {
  EigenSelection sel = cpriv::top_nonzero_eigvecs(diag3(3.0, 0.0, -1.0), 2);
  REQUIRE(sel.count() == 2);
  CHECK(sel.values(0) == doctest::Approx(3.0));
  CHECK(sel.values(1) == doctest::Approx(-1.0));
  CHECK(sel.vectors(0, 0) == doctest::Approx(1.0));
  CHECK(sel.vectors(2, 1) == doctest::Approx(1.0));
}

TEST_CASE("top_nonzero_eigvecs: returns fewer columns than requested") {
  Vector d(2);
  d << 5.0, 2.0;
  EigenSelection sel = cpriv::top_nonzero_eigvecs(Matrix(d.asDiagonal()), 5);
  REQUIRE(sel.count() == 2);
  CHECK(sel.values(0) == doctest::Approx(5.0));
  CHECK(sel.values(1) == doctest::Approx(2.0));
}

TEST_CASE("top_nonzero_eigvecs: rank-3 reconstruction") {
  std::mt19937_64 rng(14);
  Matrix q = testsup::random_orthogonal(rng, 8);
  Vector s = Vector::Zero(8);
  s(0) = 2.0;
  s(1) = -1.5;
  s(2) = 0.7;
  Matrix m = cpriv::symmetrize(q * s.asDiagonal() * q.transpose());

  EigenSelection sel = cpriv::top_nonzero_eigvecs(m, 3);
  REQUIRE(sel.count() == 3);
  Matrix recon =
      sel.vectors * sel.values.asDiagonal() * sel.vectors.transpose();
  CHECK((m - recon).norm() < 1e-8);
  // Columns orthonormal.
  CHECK((sel.vectors.transpose() * sel.vectors - Matrix::Identity(3, 3)).norm() <
        1e-10);
}

TEST_CASE("top_nonzero_eigvecs: deterministic output, fixed signs") {
  std::mt19937_64 rng(15);
  Matrix m = random_psd(rng, 6);
  EigenSelection a = cpriv::top_nonzero_eigvecs(m, 6);
  EigenSelection b = cpriv::top_nonzero_eigvecs(m, 6);
  CHECK((a.vectors.array() == b.vectors.array()).all());
  CHECK((a.values.array() == b.values.array()).all());
  for (int c = 0; c < a.count(); ++c) {
    Eigen::Index pivot;
    a.vectors.col(c).cwiseAbs().maxCoeff(&pivot);
    CHECK(a.vectors(pivot, c) > 0.0);
  }

  // Repeated eigenvalue: any orthonormal pair is valid, but the choice must be
  // reproducible.
  Matrix eye = Matrix::Identity(4, 4);
  EigenSelection e1 = cpriv::top_nonzero_eigvecs(eye, 4);
  EigenSelection e2 = cpriv::top_nonzero_eigvecs(eye, 4);
  CHECK((e1.vectors.array() == e2.vectors.array()).all());
}

TEST_CASE("generalized_top_eigvecs: identity pencil equals ordinary") {
  std::mt19937_64 rng(16);
  Matrix a = cpriv::symmetrize(random_matrix(rng, 5, 5));
  EigenSelection gen =
      cpriv::generalized_top_eigvecs(a, Matrix::Identity(5, 5), 5);
  EigenSelection ord = cpriv::top_nonzero_eigvecs(a, 5);
  REQUIRE(gen.count() == ord.count());
  CHECK((gen.values - ord.values).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((gen.vectors - ord.vectors).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("generalized_top_eigvecs: proportional pencil") {
  std::mt19937_64 rng(17);
  Matrix b = random_pd(rng, 4);
  Matrix a = 2.0 * b;
  EigenSelection sel = cpriv::generalized_top_eigvecs(a, b, 1);
  REQUIRE(sel.count() == 1);
  CHECK(sel.values(0) == doctest::Approx(2.0));
}

TEST_CASE("generalized_top_eigvecs: pencil residual and unit norms") {
  std::mt19937_64 rng(18);
  for (int t = 0; t < 20; ++t) {
    Matrix a = cpriv::symmetrize(random_matrix(rng, 5, 5));
    Matrix b = random_pd(rng, 5);
    EigenSelection sel = cpriv::generalized_top_eigvecs(a, b, 5);
    for (int c = 0; c < sel.count(); ++c) {
      Vector v = sel.vectors.col(c);
      CHECK(v.norm() == doctest::Approx(1.0));
      CHECK((a * v - sel.values(c) * b * v).norm() < 1e-8);
    }
    // Descending by default.
    for (int c = 1; c < sel.count(); ++c)
      CHECK(sel.values(c) <= sel.values(c - 1) + 1e-12);
  }
}

TEST_CASE("generalized_top_eigvecs: ascending order option") {
  std::mt19937_64 rng(19);
  Matrix a = cpriv::symmetrize(random_matrix(rng, 5, 5));
  Matrix b = random_pd(rng, 5);
  EigenSelection asc =
      cpriv::generalized_top_eigvecs(a, b, 3, -1.0, EigOrder::ascending);
  for (int c = 1; c < asc.count(); ++c)
    CHECK(asc.values(c) >= asc.values(c - 1) - 1e-12);
  EigenSelection desc = cpriv::generalized_top_eigvecs(a, b, 5);
  CHECK(asc.values(0) == doctest::Approx(desc.values(desc.count() - 1)));
}

TEST_CASE("inertia: diagonal, zero matrix") {
  cpriv::Inertia in = cpriv::inertia(diag3(3.0, 0.0, -1.0));
  CHECK(in.n_pos == 1);
  CHECK(in.n_neg == 1);
  CHECK(in.n_zero == 1);

  cpriv::Inertia z = cpriv::inertia(Matrix::Zero(4, 4));
  CHECK(z.n_pos == 0);
  CHECK(z.n_neg == 0);
  CHECK(z.n_zero == 4);
}

TEST_CASE("inertia of a difference of low-rank PSD matrices is bounded") {
  // A - B with rank(A) = 2, rank(B) = 1 has at most 2 positive and 1 negative
  // eigenvalues (Weyl interlacing).
  std::mt19937_64 rng(20);
  for (int t = 0; t < 50; ++t) {
    Matrix a = random_psd(rng, 6, 2);
    Matrix b = random_psd(rng, 6, 1);
    cpriv::Inertia in = cpriv::inertia(a - b, 1e-9);
    CHECK(in.n_pos <= 2);
    CHECK(in.n_neg <= 1);
    CHECK(in.n_pos + in.n_neg + in.n_zero == 6);
  }
}

TEST_CASE("weighted projector identity holds for full-row-rank maps") {
  // A^T (A B A^T)^{-1} A == B^{-1/2} U U^T B^{-1/2} with U the right singular
  // vectors of A B^{1/2} that carry non-zero singular values.
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> dim_n(2, 10);
  int done = 0;
  while (done < 100) {
    int n = dim_n(rng);
    std::uniform_int_distribution<int> dim_m(1, n);
    int m = dim_m(rng);
    Matrix a = random_matrix(rng, m, n);
    Eigen::JacobiSVD<Matrix> probe(a);
    // Full row rank, well away from rank deficiency so the plain-inverse
    // oracle keeps its digits.
    if (probe.singularValues()(m - 1) < 1e-3) continue;
    Matrix b = random_pd(rng, n);

    Matrix lhs = a.transpose() *
                 (a * b * a.transpose()).inverse() * a;

    Matrix half = cpriv::sym_sqrt(b);
    Eigen::JacobiSVD<Matrix> svd(a * half, Eigen::ComputeFullV);
    int rank = 0;
    const double cut = 1e-10 * svd.singularValues()(0);
    for (int i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) > cut) ++rank;
    Matrix u = svd.matrixV().leftCols(rank);
    Matrix ihalf = cpriv::sym_inv_sqrt(b);
    Matrix rhs = ihalf * u * u.transpose() * ihalf;

    CHECK((lhs - rhs).norm() / lhs.norm() < 1e-8);
    ++done;
  }
}

TEST_CASE("congruence keeps eigenvalue floors: A B A^T >= alpha beta I") {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 100; ++t) {
    std::uniform_int_distribution<int> dim_n(2, 8);
    int n = dim_n(rng);
    std::uniform_int_distribution<int> dim_m(1, n);
    int m = dim_m(rng);
    Matrix a = random_matrix(rng, m, n);
    Matrix b = random_pd(rng, n, 0.1);

    Eigen::SelfAdjointEigenSolver<Matrix> ea(a * a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eb(b);
    double alpha = std::max(0.0, ea.eigenvalues().minCoeff());
    double beta = std::max(0.0, eb.eigenvalues().minCoeff());

    Eigen::SelfAdjointEigenSolver<Matrix> eab(
        cpriv::symmetrize(a * b * a.transpose()));
    CHECK(eab.eigenvalues().minCoeff() >= alpha * beta - 1e-9);
  }
}
