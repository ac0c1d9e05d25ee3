#pragma once

// Closed-form competing compressions used for comparison runs. None of them
// enforce the hard per-horizon floors of the constrained solver; a scalar
// tradeoff gamma and a row budget M shape each design instead.
//
//   ib: Gaussian information bottleneck against the public sub-state. Rows
//       are scaled left eigenvectors of the conditional-over-marginal
//       innovation matrix, smallest eigenvalues first; rows whose scaling
//       would be imaginary are dropped, so the output may have fewer than M
//       rows (possibly zero).
//   pf: privacy-funnel variant of the same construction against the private
//       sub-state, largest eigenvalues first, rows kept unit-norm.
//   cp: compressive projection onto the innovation energy visible to the
//       public sub-state minus gamma times the energy visible to the private
//       one, through a generalized eigenproblem against T.

#include <functional>

#include "cpriv/objectives.hpp"

namespace cpriv {

enum class BaselineMechanism { ib, pf, cp };

// Configuration knob for a baseline run: which mechanism, its tradeoff
// scalar, and the row budget.
struct BaselineKind {
  BaselineMechanism mechanism;
  double gamma;  // > 0
  int rows;      // M >= 1
  BaselineKind(BaselineMechanism mechanism, double gamma, int rows);
};

// Information-bottleneck compression toward the public sub-state. `pred`
// supplies the predicted covariance, H the measurement map the innovation
// covariance geom.T was built from. Returns at most M rows (N columns);
// gamma <= 1 always yields the 0-row plan.
CompressionPlan ib_compression(const StepGeometry& geom,
                               const GaussianBelief& pred, const Matrix& H,
                               const PrivacySpec& spec, double gamma, int M);

// Privacy-funnel compression away from the private sub-state: identical
// construction with the conditioning flipped to the private block, rows
// ordered by descending eigenvalue and kept unit-norm (gamma does not enter
// the closed form; it is accepted for interface symmetry and validated only).
CompressionPlan pf_compression(const StepGeometry& geom,
                               const GaussianBelief& pred, const Matrix& H,
                               const PrivacySpec& spec, double gamma, int M);

// Compressive-projection rows: M principal generalized unit eigenvectors of
// (Omega - gamma Pi, T) where Omega / Pi are the innovation energies in the
// orthogonal complements of the private / public measurement columns. Throws
// EmptyNullspace when either complement is trivial (H columns span the whole
// measurement space). gamma = 0 reduces to the principal (Omega, T)
// directions.
CompressionPlan cp_compression(const StepGeometry& geom, const Matrix& H,
                               const PrivacySpec& spec, double gamma, int M);

// Dispatch on BaselineKind.
CompressionPlan baseline_compression(const BaselineKind& kind,
                                     const StepGeometry& geom,
                                     const GaussianBelief& pred,
                                     const Matrix& H, const PrivacySpec& spec);

// Deterministic best-effort search for the tradeoff scalar whose closed-loop
// steady private error lands nearest a target. `steady_eta` runs the
// mechanism (row budget and everything else baked in) and reports the steady
// value for one gamma. Geometric grid over [gamma_lo, gamma_hi] followed by
// ternary refinement around the best bracket; ties prefer the smaller gamma.
// `budget` caps the number of evaluations.
struct TradeoffCalibration {
  double gamma = 0.0;
  double achieved_eta = 0.0;
};
TradeoffCalibration calibrate_tradeoff(
    const std::function<double(double)>& steady_eta, double target_eta,
    double gamma_lo, double gamma_hi, int budget);

}  // namespace cpriv
