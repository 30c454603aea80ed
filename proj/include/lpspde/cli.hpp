#pragma once

#include "lpspde/config.hpp"

#include <iosfwd>
#include <string>

namespace lpspde {

enum ExitCode : int { exit_ok = 0, exit_audit_failure = 1, exit_config_error = 2, exit_runtime_error = 3 };

struct RunOptions {
  int workers = 1;
  bool strict = false;
  /// Overrides [output] dir when non-empty.
  std::string out_dir;
};

/// Runs simulate, moments, check, sweep or oracle and writes its artifacts
/// (JSON summary plus CSV tables) into the output directory. Returns the exit
/// code; `log` receives a short human-readable summary.
int run(const std::string& subcommand, const ExperimentConfig& config, const RunOptions& options, std::ostream& log);

/// Command-line entry point: lpspde SUBCOMMAND --config PATH [--seed N]
/// [--workers N] [--strict] [--out DIR].
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace lpspde
