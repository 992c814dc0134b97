#pragma once

// Command execution: config -> ResultBundle.

#include "emfg/cli/output.hpp"

namespace emfg::cli {

/// Runs the configured command. Solver failures are recorded in the bundle
/// (failed entries marked); ConfigError propagates. Independent solves use
/// up to `threads` threads; results do not depend on the thread count.
ResultBundle run(const RunConfig& config, int threads = 1);

/// sup over t >= 0 of t r - c t^k, by dense sampling of the ray and a
/// golden-section refinement.
double numeric_ray_sup(double r, double c, double k);

}  // namespace emfg::cli
