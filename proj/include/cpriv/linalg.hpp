#pragma once

// Deterministic symmetric-matrix utilities: square roots, selective
// eigendecompositions, generalized eigenvectors of symmetric-definite pencils,
// and inertia counts. Everything else in the library builds on these.

#include <Eigen/Dense>
#include <stdexcept>

namespace cpriv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Failure modes surfaced by the numeric kit and the solvers on top of it.
struct DimMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NotPsd : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Singular : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoFiniteBound : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyNullspace : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AnchorCollision : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Absolute-plus-relative slack under which a symmetric matrix still counts as
// positive semidefinite.
double psd_tol(const Matrix& m);

// 0.5 * (m + m^T). All decompositions here symmetrize first to kill float
// drift accumulated by products.
Matrix symmetrize(const Matrix& m);

// Orthonormal eigenvectors (columns) for the eigenvalues kept by a selection
// rule, values sorted as requested. May hold fewer columns than asked for.
struct EigenSelection {
  Matrix vectors;
  Vector values;
  int count() const { return static_cast<int>(vectors.cols()); }
};

struct Inertia {
  int n_pos = 0;
  int n_neg = 0;
  int n_zero = 0;
};

enum class EigOrder { descending, ascending };

// Symmetric PSD square root; eigenvalues within psd_tol below zero are clamped
// to zero. Throws NotPsd beyond that slack.
Matrix sym_sqrt(const Matrix& m);

// Inverse symmetric square root of a positive-definite matrix. Throws Singular
// when the smallest eigenvalue is <= 1e-12.
Matrix sym_inv_sqrt(const Matrix& m);

// Inverse of a symmetric PSD matrix with eigenvalues floored at `floor`.
// Keeps near-rank-deficient innovation covariances invertible; throws
// Singular when the input has an eigenvalue materially below zero.
Matrix floored_psd_inverse(const Matrix& m, double floor = 1e-12);

// Eigenpairs for the `count` algebraically largest eigenvalues among those
// with |lambda| > zero_tol (default: 1e-10 * spectral radius). Deterministic
// sign convention: the largest-magnitude entry of each vector is positive,
// ties broken by lowest row index.
EigenSelection top_nonzero_eigvecs(const Matrix& m, int count,
                                   double zero_tol = -1.0);

// Solves a v = lambda b v for symmetric a and positive-definite b, by
// reduction through b^{-1/2}. Returns the `count` largest (or smallest, when
// ascending) eigenvalues with |lambda| > zero_tol; vectors normalized to unit
// Euclidean length. Note: pencil eigenvectors are b-orthogonal, not mutually
// orthonormal.
EigenSelection generalized_top_eigvecs(const Matrix& a, const Matrix& b,
                                       int count, double zero_tol = -1.0,
                                       EigOrder order = EigOrder::descending);

// Counts of eigenvalues above zero_tol, below -zero_tol, and in between.
Inertia inertia(const Matrix& m, double zero_tol = -1.0);

}  // namespace cpriv
