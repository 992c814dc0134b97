#pragma once

// Coupled ergodic MFG solver (damped fictitious play) with its optimality
// and duality certificates.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emfg/energy.hpp"
#include "emfg/fokker_planck.hpp"
#include "emfg/hjb.hpp"

namespace emfg {

struct SolverConfig {
  double damping = 0.5;
  int max_outer_iterations = 2000;
  double tolerance = 1e-11;      // L1 distance of successive m, relative to M
  double hjb_tolerance = 1e-12;
  int hjb_max_iterations = 400;
  /// Anderson mixing of the damped best-response map over this many past
  /// iterates; 0 gives plain damped fictitious play.
  int anderson_depth = 5;
  /// Once the damped step falls below this, the fixed point is polished by
  /// Newton on the coupled discrete system (central schemes only; 0 disables).
  double newton_switch = 1e-3;
  bool mollified = true;
  HamiltonianScheme hjb_scheme = HamiltonianScheme::central;
  FluxScheme fp_scheme = FluxScheme::central;
  /// Initial Gaussian; sigma <= 0 picks the concentration scale of the model.
  double initial_sigma = 0.0;
  std::optional<Point> initial_center;
  std::optional<ScalarField> initial_m;
  std::optional<ScalarField> initial_u;
  std::optional<double> initial_lambda;

  void validate() const;
};

struct MFGSolution {
  ScalarField u;
  ScalarField m;
  VectorField w;
  double lambda = 0.0;
  EnergyBreakdown energy;
  /// |lambda M - (kinetic + int (V + f(m)) m)| with the local coupling.
  double duality_gap = 0.0;
  /// Same identity with the coupling actually used by the solve.
  double discrete_duality_gap = 0.0;
  double optimality_residual = 0.0;
  double constraint_residual = 0.0;  // relative to its scale
  double max_cell_peclet = 0.0;
  /// max of m on the box faces over max m; the truncation is harmless when
  /// this is below 1e-8.
  double boundary_decay = 0.0;
  int fixedpoint_iterations = 0;
  int newton_polishes = 0;
  bool converged = false;
  std::vector<double> history;  // successive L1 distances
  Point argmin_x;
};

/// Right-hand side of the HJB for a given density: coupling(m) + V.
ScalarField mfg_rhs(const Grid<double>& grid, const ModelParams& model, const ScalarField& m, bool mollified);

/// Default starting density: normalized Gaussian.
ScalarField initial_density(const Grid<double>& grid, const ModelParams& model, const SolverConfig& cfg);

/// Throws SolverError if the iteration does not settle within the budget;
/// the error history carries the L1 distances.
MFGSolution solve_mfg(const Grid<double>& grid, const ModelParams& model, const SolverConfig& cfg = {});

/// |lambda M - (int m L(-w/m) + int (V + f(m)) m)| for the local coupling f.
double duality_certificate(const Grid<double>& grid, const MFGSolution& sol, const ModelParams& model);

/// int m |w/m + grad H(grad u)|.
double optimality_residual(const Grid<double>& grid, const MFGSolution& sol, const ModelParams& model);

/// Competitor pair for the minimality check.
struct Competitor {
  std::string kind;
  KPair pair;
};

/// Feasible competitors: stationary densities for perturbed drifts
/// b + grad G with random smooth G, translated solutions, and in two
/// dimensions divergence-free perturbations of w supported inside the box.
std::vector<Competitor> random_competitors(const Grid<double>& grid, const MFGSolution& sol,
                                           const ModelParams& model, int trials, std::uint64_t seed);

struct MinimizerReport {
  int trials = 0;
  int passed = 0;
  double solution_energy = 0.0;
  double min_competitor_energy = 0.0;
  double min_margin = 0.0;   // min over competitors of E(competitor) - E(solution)
  double tolerance = 0.0;
  bool all_pass = false;
};

MinimizerReport minimizer_verification(const Grid<double>& grid, const MFGSolution& sol,
                                       const ModelParams& model, const SolverConfig& cfg, int trials,
                                       std::uint64_t seed);

/// Runs solve_mfg from each starting centre and returns every converged
/// solution, ordered by total energy.
std::vector<MFGSolution> solve_mfg_multistart(const Grid<double>& grid, const ModelParams& model,
                                              const SolverConfig& cfg, const std::vector<Point>& centers);

/// e(a) + e(M - a) - e(M) from three independent solves at masses a, M - a, M.
struct SubadditivityReport {
  double a = 0.0;
  double e_a = 0.0;
  double e_rest = 0.0;
  double e_full = 0.0;
  double gap = 0.0;
};

SubadditivityReport subadditivity_gap(const Grid<double>& grid, const ModelParams& model,
                                      const SolverConfig& cfg, double a);

}  // namespace emfg
