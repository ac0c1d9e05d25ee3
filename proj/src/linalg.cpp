#include "cpriv/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace cpriv {

namespace {

// Flip each column so its largest-magnitude entry is positive; on exact ties
// the lowest row index decides. Keeps eigenvector output reproducible under
// eigenvalue multiplicity.
void fix_column_signs(Matrix& v) {
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index pivot = 0;
    double best = std::abs(v(0, c));
    for (Eigen::Index r = 1; r < v.rows(); ++r) {
      const double mag = std::abs(v(r, c));
      if (mag > best) {
        best = mag;
        pivot = r;
      }
    }
    if (v(pivot, c) < 0.0) v.col(c) = -v.col(c);
  }
}

double default_zero_tol(const Vector& eigvals) {
  return 1e-10 * eigvals.cwiseAbs().maxCoeff();
}

Eigen::SelfAdjointEigenSolver<Matrix> decompose(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimMismatch("matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  if (es.info() != Eigen::Success)
    throw Singular("eigendecomposition failed to converge");
  return es;
}

}  // namespace

double psd_tol(const Matrix& m) {
  const double max_abs = m.size() > 0 ? m.cwiseAbs().maxCoeff() : 0.0;
  return 1e-9 * (1.0 + max_abs);
}

Matrix symmetrize(const Matrix& m) {
  return 0.5 * (m + m.transpose());
}

Matrix sym_sqrt(const Matrix& m) {
  if (m.size() == 0) return Matrix(0, 0);
  auto es = decompose(m);
  const double tol = psd_tol(m);
  Vector lam = es.eigenvalues();
  if (lam.minCoeff() < -tol) throw NotPsd("matrix is not positive semidefinite");
  Vector root = lam.cwiseMax(0.0).cwiseSqrt();
  return symmetrize(es.eigenvectors() * root.asDiagonal() *
                    es.eigenvectors().transpose());
}

Matrix sym_inv_sqrt(const Matrix& m) {
  if (m.size() == 0) return Matrix(0, 0);
  auto es = decompose(m);
  const Vector& lam = es.eigenvalues();
  if (lam.minCoeff() <= 1e-12) throw Singular("matrix is not positive definite");
  Vector inv_root = lam.cwiseSqrt().cwiseInverse();
  return symmetrize(es.eigenvectors() * inv_root.asDiagonal() *
                    es.eigenvectors().transpose());
}

Matrix floored_psd_inverse(const Matrix& m, double floor) {
  if (m.size() == 0) return Matrix(0, 0);
  auto es = decompose(m);
  if (es.eigenvalues().minCoeff() < -psd_tol(m))
    throw Singular("matrix has a negative eigenvalue");
  Vector inv = es.eigenvalues().cwiseMax(floor).cwiseInverse();
  return symmetrize(es.eigenvectors() * inv.asDiagonal() *
                    es.eigenvectors().transpose());
}

EigenSelection top_nonzero_eigvecs(const Matrix& m, int count,
                                   double zero_tol) {
  if (m.size() == 0 || count == 0)
    return EigenSelection{Matrix(m.rows(), 0), Vector(0)};
  auto es = decompose(m);
  const Vector& lam = es.eigenvalues();  // ascending
  const double tol = zero_tol >= 0.0 ? zero_tol : default_zero_tol(lam);

  // Indices of numerically non-zero eigenvalues, algebraically descending.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = lam.size() - 1; i >= 0; --i)
    if (std::abs(lam(i)) > tol) keep.push_back(i);
  if (static_cast<int>(keep.size()) > count) keep.resize(count);

  EigenSelection sel;
  sel.vectors.resize(m.rows(), static_cast<Eigen::Index>(keep.size()));
  sel.values.resize(static_cast<Eigen::Index>(keep.size()));
  for (size_t j = 0; j < keep.size(); ++j) {
    sel.vectors.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]);
    sel.values(static_cast<Eigen::Index>(j)) = lam(keep[j]);
  }
  fix_column_signs(sel.vectors);
  return sel;
}

EigenSelection generalized_top_eigvecs(const Matrix& a, const Matrix& b,
                                       int count, double zero_tol,
                                       EigOrder order) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimMismatch("pencil matrices must share dimensions");
  const Matrix ib = sym_inv_sqrt(b);
  const Matrix reduced = symmetrize(ib * symmetrize(a) * ib);

  auto es = decompose(reduced);
  const Vector& lam = es.eigenvalues();
  const double tol = zero_tol >= 0.0 ? zero_tol : default_zero_tol(lam);

  std::vector<Eigen::Index> keep;
  if (order == EigOrder::descending) {
    for (Eigen::Index i = lam.size() - 1; i >= 0; --i)
      if (std::abs(lam(i)) > tol) keep.push_back(i);
  } else {
    for (Eigen::Index i = 0; i < lam.size(); ++i)
      if (std::abs(lam(i)) > tol) keep.push_back(i);
  }
  if (static_cast<int>(keep.size()) > count) keep.resize(count);

  EigenSelection sel;
  sel.vectors.resize(a.rows(), static_cast<Eigen::Index>(keep.size()));
  sel.values.resize(static_cast<Eigen::Index>(keep.size()));
  for (size_t j = 0; j < keep.size(); ++j) {
    Vector v = ib * es.eigenvectors().col(keep[j]);
    sel.vectors.col(static_cast<Eigen::Index>(j)) = v / v.norm();
    sel.values(static_cast<Eigen::Index>(j)) = lam(keep[j]);
  }
  fix_column_signs(sel.vectors);
  return sel;
}

Inertia inertia(const Matrix& m, double zero_tol) {
  auto es = decompose(m);
  const Vector& lam = es.eigenvalues();
  const double tol = zero_tol >= 0.0 ? zero_tol : default_zero_tol(lam);
  Inertia in;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) > tol)
      ++in.n_pos;
    else if (lam(i) < -tol)
      ++in.n_neg;
    else
      ++in.n_zero;
  }
  return in;
}

}  // namespace cpriv
