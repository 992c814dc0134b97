#pragma once

// Vanishing-viscosity analysis: rescaling, epsilon sweeps, exponent fits,
// concentration, flattest-minimum selection, ground states and the
// Hopf-Cole cross-check.

#include <optional>
#include <string>
#include <vector>

#include "emfg/mfg.hpp"

namespace emfg {

struct RescaledSolution {
  Grid<double> grid{1, 1.0, 3};  // y coordinates
  ScalarField u_bar;
  ScalarField m_bar;
  double lambda_tilde = 0.0;
  Point shift;                  // x_eps
  double truncation_loss = 0.0; // M - int m_bar
};

/// y = (x - x_eps) / eps^len, m_bar = eps^mass m, u_bar = eps^u (u - u(x_eps)),
/// lambda_tilde = eps^lam lambda. By default the y window is the physical box
/// mapped by the length scale, with the same number of nodes.
RescaledSolution rescale_solution(const Grid<double>& grid, const MFGSolution& sol, const ModelParams& model,
                                  std::optional<Grid<double>> y_grid = std::nullopt);

/// Smallest radius whose ball around `center` holds `target` mass; linear in
/// the cumulative mass between consecutive node distances. 0 when target <= 0.
double concentration_radius(const Grid<double>& grid, const ScalarField& m, const Point& center, double target);

/// Mass inside the closed ball of radius r around `center`.
double mass_within(const Grid<double>& grid, const ScalarField& m, const Point& center, double r);

struct DecayFit {
  double c1 = 0.0;
  double c2 = 0.0;
  double r2 = 0.0;
  bool envelope_holds = false;
};

/// Log-linear fit of shell maxima of m against |y - center| on the outer
/// half of the window; c1 is 1.1 times the largest m e^{c2 |y|} over the
/// outer-half nodes, and the envelope is then checked at every node.
DecayFit decay_fit(const Grid<double>& grid, const ScalarField& m, const Point& center);

struct SweepRecord {
  double epsilon = 0.0;
  bool ok = false;
  std::string error;
  double lambda = 0.0;
  double lambda_tilde = 0.0;
  Point x_eps;
  double distance_to_zero = 0.0;     // |x_eps - nearest zero of V|
  std::vector<double> radii;         // rescaled radii
  std::vector<double> mass_fraction; // mass within radius * eps^len of x_eps, over M
  double eta = 0.0;
  double width_r = 0.0;              // rescaled radius holding M - eta
  double sup_m_bar = 0.0;
  double truncation_loss = 0.0;
  double boundary_decay = 0.0;       // max m on the box faces over max m
  EnergyBreakdown energy;
  double duality_gap = 0.0;
  double optimality_residual = 0.0;
  double kinetic_moment = 0.0;       // int m |w/m|^gamma'
  DecayFit decay;
  int iterations = 0;
  double spacing = 0.0;
};

/// One sweep row for a converged solve; `rs` is its rescaling.
SweepRecord summarize_solution(const Grid<double>& grid, const MFGSolution& sol, const ModelParams& model,
                               const RescaledSolution& rs, const std::vector<double>& radii, double eta_fraction);

struct SweepOptions {
  double window = 90.0;          // rescaled half width Y
  double rescaled_spacing = 0.1; // h_y
  std::vector<double> radii{2.0, 4.0, 8.0, 16.0, 32.0};
  double eta_fraction = 0.1;     // eta = eta_fraction * M
  bool warm_start = true;
  SolverConfig solver;
};

/// Physical grid for one epsilon: half width Y eps^len and spacing h_y eps^len
/// (odd node count).
Grid<double> sweep_grid(const ModelParams& model, const SweepOptions& opt);

struct SweepResult {
  std::vector<SweepRecord> records;
  std::vector<RescaledSolution> rescaled;  // parallel to records (empty grid on failure)
};

SweepResult run_sweep(const ModelParams& model_template, const std::vector<double>& epsilons,
                      const SweepOptions& opt);

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least-squares slope of log y against log x.
ExponentFit fit_exponent(const std::vector<double>& xs, const std::vector<double>& ys);

struct ConcentrationReport {
  std::vector<double> epsilons;
  std::vector<double> radii;       // R(eta) per epsilon, rescaled
  std::vector<double> distances;   // |x_eps - nearest zero|
  double radius_ratio = 0.0;       // across the two smallest eps (>= 1)
  bool radius_stable = false;      // ratio <= 1.5
  bool distance_nonincreasing = false;  // over the tail, within one grid spacing
  bool distance_shrinks = false;   // final distance at most half the first, or both within a spacing
};

ConcentrationReport concentration_report(const std::vector<SweepRecord>& records);

struct FlattestRun {
  double epsilon = 0.0;
  Point x_eps;
  double energy = 0.0;
  std::vector<double> start_energies;
  double distance_to_selected = 0.0;
};

struct FlattestReport {
  bool determined = false;
  std::optional<Point> predicted;  // flattest zero, if unique
  std::vector<FlattestRun> runs;
  bool converges = false;          // distance non-increasing within a spacing
  double final_distance = 0.0;
};

struct FlattestOptions {
  double half_width = 2.5;
  double rescaled_spacing = 0.1;  // h = min(h_y eps^len, max_spacing)
  double max_spacing = 0.01;
  SolverConfig solver;
};

/// Multi-start at every zero of V; the lowest-energy equilibrium defines
/// x_eps.
FlattestReport flattest_min_experiment(const ModelParams& model, const std::vector<double>& epsilons,
                                       const FlattestOptions& opt);

struct GroundStateStep {
  double delta = 0.0;
  double lambda = 0.0;
  Point x_delta;
  double l1_to_previous = 0.0;  // recentred; 0 for the first step
  double energy = 0.0;
};

struct GroundStateReport {
  std::vector<GroundStateStep> steps;
  bool cauchy = false;           // successive distances decrease by at least 1.5x each step
  MFGSolution limit;             // the delta = 0 solve
  Grid<double> grid{1, 1.0, 3};
  double limit_residual = 0.0;   // HJB of the limit system, relative to 1 + max |rhs|
  double fp_residual = 0.0;      // relative to its scale
  double limit_l1_to_last = 0.0; // recentred distance from the smallest delta
  DecayFit decay;
  MinimizerReport minimality;
};

struct GroundStateOptions {
  double half_width = 8.0;
  int points = 801;
  int competitors = 20;
  std::uint64_t seed = 1;
  SolverConfig solver;
};

/// Solves with V = delta |x|^b for each delta, recentring by argmin u, then
/// solves the potential-free system directly (unmollified) on the box.
GroundStateReport ground_state(const ModelParams& model, const std::vector<double>& deltas, double b,
                               const GroundStateOptions& opt);

struct HopfColeReport {
  double lambda_nls = 0.0;
  double lambda_mfg = 0.0;
  double density_error = 0.0;   // max |v^2 - m| / max m
  double lambda_error = 0.0;    // |difference| / |lambda_mfg|
  double log_identity_error = 0.0;  // sup of |-eps log(m / max m) - (u - min u) - c| where m >= 1e-6 max m
  int iterations = 0;
  ScalarField v2;
};

struct HopfColeOptions {
  double relaxation = 0.5;
  double tolerance = 1e-12;
  int max_iterations = 2000;
};

/// Normalized ground state of -2 eps^2 Lap v + (V + f(v^2)) v = lambda v,
/// int v^2 = M, by frozen-coefficient inverse power iteration.
HopfColeReport hopf_cole_crosscheck(const Grid<double>& grid, const ModelParams& model, const MFGSolution& mfg,
                                    const HopfColeOptions& opt = {});

/// The eigen solve alone: returns (v^2, lambda, iterations).
struct NlsSolution {
  ScalarField v2;
  double lambda = 0.0;
  int iterations = 0;
};
NlsSolution solve_nls_ground_state(const Grid<double>& grid, const ModelParams& model, const HopfColeOptions& opt = {});

}  // namespace emfg
