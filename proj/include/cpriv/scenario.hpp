#pragma once

// Scenario generation and experiment drivers: randomized model families, the
// per-step filtering loop for every scheme (centralized, decentralized,
// baselines), tradeoff-calibrated baseline comparisons, and CSV persistence.
// Every run is a pure function of (config, seed); trials derive independent
// streams with trial_seed.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cpriv/baselines.hpp"
#include "cpriv/central.hpp"
#include "cpriv/decentral.hpp"

namespace cpriv {

// Standard 64-bit finalizing mix; used to derive independent seeds.
std::uint64_t splitmix64(std::uint64_t x);

// Seed for trial index t of a base seed (t >= 0); streams never collide for
// distinct trials.
std::uint64_t trial_seed(std::uint64_t base, int trial);

// Independent deterministic substream of a seed for one purpose tag
// (transitions, measurement maps, noise, row drops each own a tag so a config
// change in one never shifts the draws of another).
std::mt19937_64 derived_stream(std::uint64_t seed, std::uint64_t tag);

struct FGenerator {
  enum class Kind {
    random_sv,   // U diag(d) V^T, d uniform in [sv_lo, sv_hi]
    mixing,      // row-normalized gaussian, diagonal blocks scaled by omega,
                 // off-diagonal blocks by 1 - omega
    flip,        // zero diagonal blocks, gaussian off-blocks, rows normalized
    identity,
    normalized,  // gaussian entries, every row normalized to unit length
  };
  Kind kind = Kind::random_sv;
  double sv_lo = 1.0;
  double sv_hi = 1.2;
  double omega = 0.5;

  static FGenerator random_sv(double lo, double hi);
  static FGenerator mixing(double omega);
  static FGenerator flip();
  static FGenerator identity();
  static FGenerator normalized();
};

struct HGenerator {
  enum class Kind { gaussian, orthogonal, identity };
  Kind kind = Kind::gaussian;
};

enum class SchemeKind { centralized, no_exchange, sequential, baseline };
enum class ErrorMapKind { trace, elementwise };

struct ScenarioConfig {
  std::uint64_t seed = 1;
  int steps = 20;
  int dim_state = 8;
  int dim_meas = 8;
  int num_public = 4;
  int num_private = 4;
  double delta = 1.0;
  ErrorMapKind error_map = ErrorMapKind::trace;
  LookaheadPolicy lookahead = LookaheadPolicy::fixed_r(0);
  double q_scale = 2.0;
  double r_scale = 1.0;
  double p0_scale = 0.01;
  FGenerator f_gen;
  HGenerator h_gen;
  std::vector<int> sensor_sizes;         // empty: single sensor
  SchemeKind scheme = SchemeKind::centralized;
  std::optional<BaselineKind> baseline;  // required when scheme == baseline
  double drop_prob = 0.0;
};

// Throws std::invalid_argument with a description when the config is
// inconsistent (dims, scheme/sensor pairing, generator requirements, ...).
void validate(const ScenarioConfig& cfg);

PrivacySpec spec_from(const ScenarioConfig& cfg);

Matrix gen_F(const FGenerator& gen, std::mt19937_64& rng, int dim,
             const PrivacySpec& spec);
Matrix gen_H(const HGenerator& gen, std::mt19937_64& rng, int n_meas, int dim);

// Keeps each row independently with probability 1 - p; returns the surviving
// rows of H and the matching principal submatrix of R. p = 1 gives a 0-row
// measurement.
std::pair<Matrix, Matrix> drop_rows(const Matrix& h, const Matrix& r, double p,
                                    std::mt19937_64& rng);

struct StepRecord {
  int k = 0;
  double tau = 0.0;
  Vector eta;            // map-space private errors of the updated covariance
  double eta_min = 0.0;
  double eta_sum = 0.0;
  std::vector<int> m_used;  // rows per sensor (one entry when centralized)
  bool feasible = false;
  double utility = 0.0;
  long long wall_ns = 0;  // reserved; always 0 so identical runs stay
                          // byte-identical
  bool diagnostic = false;  // set on the aborting record of a failed trial
  std::string note;
  int total_rows() const;
};

// Everything about one solved step, handed to an optional observer (oracle
// tests use it to cross-check plans against the covariances). Block fields
// are null for single-sensor schemes.
struct StepTrace {
  int k;
  const CompressionPlan& plan;
  const StepGeometry& geom;
  const GaussianBelief& pred;
  const GaussianBelief& upd;
  const SensorPartition* partition;
  const BlockPlan* blocks;
};
using StepObserver = std::function<void(const StepTrace&)>;

// Runs the configured closed loop. A propagated numeric error aborts the
// trial: the returned list ends with a diagnostic record carrying the message.
std::vector<StepRecord> run_experiment(const ScenarioConfig& cfg,
                                       const StepObserver& observer = {});

// ---- persistence ----------------------------------------------------------

// Shortest round-trip decimal form; identical doubles always format to
// identical bytes.
std::string format_csv_number(double v);

// Header: k,tau,eta_min,eta_sum,M,feasible,utility,wall_ns
void write_step_csv(std::ostream& out, const std::vector<StepRecord>& records);

struct SweepRow {
  std::string param;
  double value = 0.0;
  double mean_tau = 0.0;
  double mean_eta_min = 0.0;
  double frac_feasible = 0.0;  // fraction of trials feasible at every step
};
// Header: param,value,mean_tau,mean_eta_min,frac_feasible
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

// Flat key = value text, '#'/';' comments, optional [section] lines ignored.
// Keys mirror the ScenarioConfig field names. Throws std::invalid_argument
// with the offending line on any parse problem.
ScenarioConfig parse_scenario_config(const std::string& text);
ScenarioConfig load_scenario_config(const std::string& path);

// ---- baseline comparison --------------------------------------------------

struct ComparisonSeries {
  std::string scheme;  // "proposed", "ib", "pf", "cp"
  double gamma = 0.0;  // calibrated tradeoff (0 for proposed)
  int rows = 0;        // calibrated row budget (0 for proposed)
  std::vector<double> mean_tau;       // index k-1
  std::vector<double> mean_eta_min;
  std::vector<double> mean_eta_sum;
  std::vector<double> frac_feasible;
};
struct BaselineComparison {
  std::vector<ComparisonSeries> series;
};

// Runs the proposed scheme and the three baselines with gamma (and row
// budget) calibrated so each baseline's mean eta at the final step lands as
// close as possible to |Q| delta. Requires the trace error map. trials >= 1,
// calib_budget >= 2 evaluations per (mechanism, row budget) pair.
BaselineComparison run_baseline_comparison(const ScenarioConfig& base,
                                           int trials, int calib_budget);

// Header: scheme,gamma,rows,k,mean_tau,mean_eta_min,mean_eta_sum,frac_feasible
void write_comparison_csv(std::ostream& out, const BaselineComparison& cmp);

}  // namespace cpriv
