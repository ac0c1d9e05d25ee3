#include "cli.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cpriv/ekf.hpp"
#include "cpriv/scenario.hpp"

namespace cpriv {
namespace {

SchemeKind parse_scheme(const std::string& name) {
  if (name == "centralized") return SchemeKind::centralized;
  if (name == "no_exchange") return SchemeKind::no_exchange;
  if (name == "sequential") return SchemeKind::sequential;
  if (name == "baseline") return SchemeKind::baseline;
  throw std::invalid_argument("unknown scheme '" + name + "'");
}

// Options shared by the scenario-driven subcommands. Option pointers let the
// callbacks distinguish "absent" from "explicitly set to the default".
struct ScenarioOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  int steps = 0;
  int trials = 1;
  std::string scheme;
  std::string out_path;
  CLI::Option* config_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* steps_opt = nullptr;
  CLI::Option* trials_opt = nullptr;
  CLI::Option* scheme_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

void add_scenario_opts(CLI::App* cmd, ScenarioOpts* opts, bool with_trials) {
  opts->config_opt =
      cmd->add_option("--config", opts->config_path, "Path to a key = value "
                                                     "scenario config file");
  opts->seed_opt = cmd->add_option("--seed", opts->seed, "Base random seed");
  opts->steps_opt = cmd->add_option("--steps", opts->steps, "Steps per run");
  if (with_trials)
    opts->trials_opt =
        cmd->add_option("--trials", opts->trials, "Independent trials");
  opts->scheme_opt = cmd->add_option(
      "--scheme", opts->scheme,
      "centralized, no_exchange, sequential, or baseline");
  opts->out_opt = cmd->add_option("--out", opts->out_path, "Output CSV path");
}

ScenarioConfig resolve_config(const ScenarioOpts& opts,
                              const ScenarioConfig& base) {
  ScenarioConfig cfg = opts.config_opt->count()
                           ? load_scenario_config(opts.config_path)
                           : base;
  if (opts.seed_opt->count()) cfg.seed = opts.seed;
  if (opts.steps_opt->count()) cfg.steps = opts.steps;
  if (opts.scheme_opt->count()) cfg.scheme = parse_scheme(opts.scheme);
  return cfg;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::invalid_argument("cannot open output file: " + path);
  return out;
}

int write_records(const std::vector<StepRecord>& records,
                  const ScenarioOpts& opts) {
  if (opts.out_opt->count()) {
    std::ofstream out = open_out(opts.out_path);
    write_step_csv(out, records);
  } else {
    write_step_csv(std::cout, records);
  }
  return !records.empty() && records.back().diagnostic ? 2 : 0;
}

int run_simulate(const ScenarioOpts& opts) {
  const ScenarioConfig cfg = resolve_config(opts, ScenarioConfig{});
  return write_records(run_experiment(cfg), opts);
}

// Three-sensor setup used when `decentralized` is invoked without a config.
ScenarioConfig decentralized_default_config() {
  ScenarioConfig cfg;
  cfg.dim_meas = 30;
  cfg.sensor_sizes = {10, 10, 10};
  cfg.scheme = SchemeKind::sequential;
  cfg.delta = 3.0;
  cfg.q_scale = 4.0;
  cfg.error_map = ErrorMapKind::elementwise;
  cfg.lookahead = LookaheadPolicy::adaptive(1.0, 4.0);
  return cfg;
}

int run_decentralized(const ScenarioOpts& opts) {
  ScenarioConfig cfg = resolve_config(opts, decentralized_default_config());
  if (!opts.scheme_opt->count() && cfg.scheme != SchemeKind::no_exchange)
    cfg.scheme = SchemeKind::sequential;
  if (cfg.scheme != SchemeKind::no_exchange &&
      cfg.scheme != SchemeKind::sequential)
    throw std::invalid_argument(
        "decentralized runs need scheme sequential or no_exchange");
  return write_records(run_experiment(cfg), opts);
}

int run_sweep(const ScenarioOpts& opts, const std::string& param,
              const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("empty sweep grid");
  if (opts.trials < 1) throw std::invalid_argument("trials must be >= 1");
  const ScenarioConfig base = resolve_config(opts, ScenarioConfig{});

  std::vector<SweepRow> rows;
  for (double value : grid) {
    ScenarioConfig cfg = base;
    if (param == "delta") {
      cfg.delta = value;
    } else if (param == "omega") {
      cfg.f_gen = FGenerator::mixing(value);
    } else if (param == "r") {
      const int r = static_cast<int>(std::lround(value));
      if (r < 0) throw std::invalid_argument("lookahead depth must be >= 0");
      cfg.lookahead = LookaheadPolicy::fixed_r(r);
    } else {
      throw std::invalid_argument("sweep param must be delta, omega, or r");
    }

    SweepRow row;
    row.param = param;
    row.value = value;
    for (int t = 0; t < opts.trials; ++t) {
      ScenarioConfig run = cfg;
      run.seed = trial_seed(base.seed, t);
      const std::vector<StepRecord> recs = run_experiment(run);
      bool all_feasible = static_cast<int>(recs.size()) == run.steps;
      for (const StepRecord& rec : recs)
        all_feasible = all_feasible && rec.feasible && !rec.diagnostic;
      row.mean_tau += recs.back().tau / opts.trials;
      row.mean_eta_min += recs.back().eta_min / opts.trials;
      row.frac_feasible += (all_feasible ? 1.0 : 0.0) / opts.trials;
    }
    rows.push_back(std::move(row));
  }

  if (opts.out_opt->count()) {
    std::ofstream out = open_out(opts.out_path);
    write_sweep_csv(out, rows);
  } else {
    write_sweep_csv(std::cout, rows);
  }
  return 0;
}

int run_compare(const ScenarioOpts& opts, int calib_budget) {
  if (opts.trials < 1) throw std::invalid_argument("trials must be >= 1");
  const ScenarioConfig cfg = resolve_config(opts, ScenarioConfig{});
  const BaselineComparison cmp =
      run_baseline_comparison(cfg, opts.trials, calib_budget);
  if (opts.out_opt->count()) {
    std::ofstream out = open_out(opts.out_path);
    write_comparison_csv(out, cmp);
  } else {
    write_comparison_csv(std::cout, cmp);
  }
  return 0;
}

std::string speed_sibling(const std::string& out) {
  const auto slash = out.find_last_of("/\\");
  const auto dot = out.find_last_of('.');
  if (dot == std::string::npos ||
      (slash != std::string::npos && dot < slash))
    return out + "_speed";
  return out.substr(0, dot) + "_speed" + out.substr(dot);
}

int run_ekf_loc(std::uint64_t seed, bool has_seed, int steps, bool has_steps,
                const std::string& out_path) {
  EkfRunConfig cfg;
  if (has_seed) cfg.seed = seed;
  if (has_steps) cfg.steps = steps;
  const EkfRunResult res = run_ekf_experiment(cfg);

  std::ofstream track = open_out(out_path);
  track << "k,true_x,true_y,plain_x,plain_y,san_x,san_y,m,feasible\n";
  for (const EkfTrackPoint& pt : res.track)
    track << pt.k << ',' << format_csv_number(pt.truth(2)) << ','
          << format_csv_number(pt.truth(3)) << ','
          << format_csv_number(pt.plain(2)) << ','
          << format_csv_number(pt.plain(3)) << ','
          << format_csv_number(pt.sanitized(2)) << ','
          << format_csv_number(pt.sanitized(3)) << ',' << pt.m_used << ','
          << (pt.feasible ? 1 : 0) << '\n';

  std::ofstream speed = open_out(speed_sibling(out_path));
  speed << "k,true_v,plain_v,san_v\n";
  for (const EkfTrackPoint& pt : res.track)
    speed << pt.k << ',' << format_csv_number(pt.truth(0)) << ','
          << format_csv_number(pt.plain(0)) << ','
          << format_csv_number(pt.sanitized(0)) << '\n';

  std::cout << "plain_loc_rmse=" << format_csv_number(res.plain_loc_rmse)
            << "\nsanitized_loc_rmse="
            << format_csv_number(res.sanitized_loc_rmse)
            << "\nplain_speed_rmse="
            << format_csv_number(res.plain_speed_rmse)
            << "\nsanitized_speed_rmse="
            << format_csv_number(res.sanitized_speed_rmse) << "\n";
  return 0;
}

// ---- selftest -------------------------------------------------------------

Matrix rand_mat(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = gauss(rng);
  return m;
}

Matrix rand_pd(std::mt19937_64& rng, int n) {
  const Matrix g = rand_mat(rng, n, n);
  return g * g.transpose() + 0.5 * Matrix::Identity(n, n);
}

bool check_update_equivalence(std::mt19937_64& rng) {
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 2 + static_cast<int>(rng() % 4);
    const int n = 2 + static_cast<int>(rng() % 5);
    const int pub = 1 + static_cast<int>(rng() % (dim - 1));
    const PrivacySpec spec(pub, dim - pub, Matrix::Ones(1, dim - pub), 0.1,
                           LookaheadPolicy::fixed_r(0));
    const GaussianBelief pred{rand_mat(rng, dim, 1), rand_pd(rng, dim),
                              Stage::predicted};
    const Matrix h = rand_mat(rng, n, dim);
    const Matrix r = rand_pd(rng, n);
    const Vector z = rand_mat(rng, n, 1);
    CompressionPlan plan;
    plan.matrix = rand_mat(rng, 1 + static_cast<int>(rng() % n), n);
    plan.rank_target = plan.rows();

    const StepGeometry geom = step_geometry(pred, h, r, {}, {});
    const Matrix via_filter = compressed_update(pred, z, h, r, plan).cov;
    const Matrix via_reduction = pred.cov - error_reduction(geom, plan, 0);
    if ((via_filter - via_reduction).cwiseAbs().maxCoeff() > 1e-8)
      return false;
  }
  return true;
}

bool check_block_assembly(std::mt19937_64& rng) {
  for (int trial = 0; trial < 10; ++trial) {
    const int dim = 3 + static_cast<int>(rng() % 3);
    const int S = 2 + static_cast<int>(rng() % 2);
    std::vector<std::vector<int>> index_blocks;
    std::vector<int> sizes;
    int n = 0;
    for (int s = 0; s < S; ++s) {
      const int sz = 1 + static_cast<int>(rng() % 3);
      std::vector<int> b(sz);
      for (int i = 0; i < sz; ++i) b[i] = n + i;
      index_blocks.push_back(std::move(b));
      sizes.push_back(sz);
      n += sz;
    }
    const SensorPartition part(n, index_blocks);
    const GaussianBelief pred{rand_mat(rng, dim, 1), rand_pd(rng, dim),
                              Stage::predicted};
    const Matrix h = rand_mat(rng, n, dim);
    const Matrix r = rand_pd(rng, n);
    const StepGeometry geom = step_geometry(pred, h, r, {}, {});

    BlockPlan bp;
    for (int s = 0; s < S; ++s)
      bp.blocks.push_back(
          rand_mat(rng, 1 + static_cast<int>(rng() % sizes[s]), sizes[s]));
    CompressionPlan joint;
    joint.matrix = bp.assembled(part);
    joint.rank_target = joint.rows();

    const Matrix exact = exact_block_reduction(geom, part, bp, 0);
    const Matrix direct = error_reduction(geom, joint, 0);
    if ((exact - direct).cwiseAbs().maxCoeff() > 1e-8) return false;
  }
  return true;
}

bool check_ekf_jacobians(std::mt19937_64& rng) {
  const Matrix anchors = default_ekf_anchors();
  const double h = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    Vector x = rand_mat(rng, 4, 1);
    x(2) = 2.0 + x(2);  // keep the position off the anchors
    x(3) = 2.0 + x(3);
    const Matrix f_jac = ekf_f_jacobian(x, 0.1);
    const Matrix h_jac = ekf_h_jacobian(x, anchors);
    for (int j = 0; j < 4; ++j) {
      Vector hi = x, lo = x;
      hi(j) += h;
      lo(j) -= h;
      const Vector df =
          (ekf_propagate(hi, 0.1) - ekf_propagate(lo, 0.1)) / (2 * h);
      const Vector dh =
          (ekf_ranges(hi, anchors) - ekf_ranges(lo, anchors)) / (2 * h);
      if ((f_jac.col(j) - df).cwiseAbs().maxCoeff() > 1e-5) return false;
      if ((h_jac.col(j) - dh).cwiseAbs().maxCoeff() > 1e-5) return false;
    }
  }
  return true;
}

bool check_floor_run() {
  ScenarioConfig cfg;
  cfg.steps = 15;
  cfg.delta = 1.0;
  cfg.lookahead = LookaheadPolicy::adaptive(1.0, 2.0);
  const std::vector<StepRecord> recs = run_experiment(cfg);
  if (static_cast<int>(recs.size()) != cfg.steps) return false;
  const double floor = cfg.num_private * cfg.delta;
  bool attained = false;
  for (const StepRecord& rec : recs) {
    if (rec.diagnostic) return false;
    if (!attained && rec.eta_sum >= floor - 1e-6) attained = true;
    else if (attained && rec.eta_sum < floor - 1e-6) return false;
  }
  return attained;
}

int run_selftest() {
  std::mt19937_64 rng(20240817u);
  bool all = true;
  const std::pair<const char*, bool> checks[] = {
      {"update-equivalence", check_update_equivalence(rng)},
      {"block-assembly", check_block_assembly(rng)},
      {"ekf-jacobians", check_ekf_jacobians(rng)},
      {"privacy-floor-run", check_floor_run()},
  };
  for (const auto& [name, ok] : checks) {
    std::cout << "selftest " << name << ": " << (ok ? "pass" : "FAIL")
              << "\n";
    all = all && ok;
  }
  return all ? 0 : 2;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Compressive privacy filtering experiments"};
  app.require_subcommand(1);
  int exit_code = 0;

  ScenarioOpts sim_opts;
  CLI::App* sim = app.add_subcommand(
      "simulate", "Run one closed-loop experiment and write per-step CSV");
  add_scenario_opts(sim, &sim_opts, false);
  sim->callback([&] { exit_code = run_simulate(sim_opts); });

  ScenarioOpts sweep_opts;
  std::string sweep_param;
  std::vector<double> sweep_grid;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Aggregate final-step stats across trials over a value grid");
  add_scenario_opts(sweep, &sweep_opts, true);
  sweep->add_option("--param", sweep_param, "delta, omega, or r")->required();
  sweep->add_option("--grid", sweep_grid, "Comma-separated values")
      ->required()
      ->delimiter(',');
  sweep->callback(
      [&] { exit_code = run_sweep(sweep_opts, sweep_param, sweep_grid); });

  ScenarioOpts cmp_opts;
  int calib_budget = 24;
  CLI::App* cmp = app.add_subcommand(
      "compare-baselines",
      "Proposed scheme vs tradeoff-calibrated reference mechanisms");
  add_scenario_opts(cmp, &cmp_opts, true);
  cmp->add_option("--calib-budget", calib_budget,
                  "Evaluations per calibration search");
  cmp->callback([&] { exit_code = run_compare(cmp_opts, calib_budget); });

  ScenarioOpts dec_opts;
  CLI::App* dec = app.add_subcommand(
      "decentralized", "Multi-sensor run (sequential unless told otherwise)");
  add_scenario_opts(dec, &dec_opts, false);
  dec->callback([&] { exit_code = run_decentralized(dec_opts); });

  std::uint64_t ekf_seed = 0;
  int ekf_steps = 0;
  std::string ekf_out;
  CLI::App* ekf = app.add_subcommand(
      "ekf-loc", "Range-only localization demo with a sanitized filter");
  CLI::Option* ekf_seed_opt =
      ekf->add_option("--seed", ekf_seed, "Random seed");
  CLI::Option* ekf_steps_opt =
      ekf->add_option("--steps", ekf_steps, "Steps to run");
  ekf->add_option("--out", ekf_out, "Track CSV path; speed series goes to a "
                                    "_speed sibling file")
      ->required();
  ekf->callback([&] {
    exit_code =
        run_ekf_loc(ekf_seed, ekf_seed_opt->count() > 0, ekf_steps,
                    ekf_steps_opt->count() > 0, ekf_out);
  });

  CLI::App* self = app.add_subcommand(
      "selftest", "Quick internal consistency battery");
  self->callback([&] { exit_code = run_selftest(); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}

}  // namespace cpriv
