#pragma once

// Run configuration: YAML document -> validated RunConfig, and back.

#include <cstdint>
#include <string>
#include <vector>

#include "emfg/asymptotics.hpp"

namespace emfg::cli {

enum class Command { solve, sweep, flattest, groundstate, hopfcole, verify };

const char* command_name(Command c);
/// Throws ConfigError for an unknown name.
Command parse_command(const std::string& name);

struct GridSection {
  double half_width = 4.0;
  int points = 401;
};

struct SweepSection {
  std::vector<double> epsilons{0.2, 0.1, 0.05, 0.025};
  SweepOptions options;
};

struct FlattestSection {
  std::vector<double> epsilons{0.4, 0.2, 0.1, 0.05};
  FlattestOptions options;
  /// Repeat with the exponents of a two-minimum potential exchanged.
  bool swapped_rerun = true;
};

struct GroundStateSection {
  std::vector<double> deltas{0.5, 0.25, 0.125, 0.0625};
  double b = 2.0;
  GroundStateOptions options;
};

struct VerifySection {
  int legendre_samples = 200;
  int fenchel_pairs = 10000;
  int adjoint_trials = 20;
  /// Subadditivity is measured at this viscosity on [-half_width, half_width].
  double subadditivity_epsilon = 0.1;
  double subadditivity_half_width = 2.0;
  int subadditivity_points = 801;
  std::vector<double> interior_fractions{0.25, 0.5, 0.75};
  std::vector<double> endpoint_fractions{0.1, 0.05, 0.02, 0.01};
  double time_budget = 60.0;  // seconds
};

struct RunConfig {
  Command command = Command::solve;
  ModelParams model;
  GridSection grid;
  SolverConfig solver;
  /// Random competitors per converged solve (solve command).
  int competitors = 50;
  SweepSection sweep;
  FlattestSection flattest;
  GroundStateSection groundstate;
  HopfColeOptions hopfcole;
  VerifySection verify;
  std::string output_dir;
  std::uint64_t seed = 1;
};

/// Parses and validates a YAML document. Every error is a ConfigError whose
/// message starts with "line L, column C:" pointing at the offending node.
/// Absent keys keep the defaults above (and those of the library structs);
/// `solver` settings also apply to sweep, flattest and groundstate runs.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// YAML echo of every field; parse_config(emit_config(c)) reproduces c.
std::string emit_config(const RunConfig& config);

}  // namespace emfg::cli
