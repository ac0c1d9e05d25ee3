#pragma once

namespace cpriv {

// Command line entry point. Subcommands: simulate, sweep, compare-baselines,
// decentralized, ekf-loc, selftest. Returns 0 on success, 1 on configuration
// or usage errors, 2 on numeric failures.
int cli_main(int argc, char** argv);

}  // namespace cpriv
