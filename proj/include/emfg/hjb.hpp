#pragma once

// Ergodic Hamilton-Jacobi-Bellman solver on the truncated box:
//   -eps Lap u + H(grad u) + lambda = rhs,   min u = 0.

#include <optional>
#include <vector>

#include "emfg/grid.hpp"
#include "emfg/model.hpp"

namespace emfg {

enum class HamiltonianScheme {
  // Central gradient inside H. Monotone whenever the cell Peclet number
  // |grad H| h / (2 eps) is at most one, which the solver reports; it is the
  // exact adjoint partner of the Fokker-Planck discretization.
  central,
  // Godunov (upwind) monotone discretization of |p|^gamma; first order.
  godunov,
};

struct HJBProblem {
  ScalarField rhs;
  double epsilon = 1.0;
  HamiltonianSpec hamiltonian;
};

struct HJBOptions {
  HamiltonianScheme scheme = HamiltonianScheme::central;
  /// On max |residual| / (1 + max |rhs|); never below the stencil roundoff
  /// level 64 eps_mach (2N eps / h^2) max |u|.
  double tolerance = 1e-10;
  int max_iterations = 400;
  double initial_time_step = 1.0;
  std::optional<ScalarField> initial_u;
  std::optional<double> initial_lambda;
};

struct HJBSolution {
  ScalarField u;
  double lambda = 0.0;
  int iterations = 0;
  double residual = 0.0;
  Eigen::Index argmin = 0;
  Point argmin_x;
  double max_cell_peclet = 0.0;
  std::vector<double> residual_history;
};

/// Pseudo-transient continuation (implicit Euler in pseudo-time, growing the
/// step as the residual falls) converging to Newton on the stationary system
/// with u pinned at one node; lambda is the bordered unknown.
HJBSolution solve_ergodic_hjb(const Grid<double>& grid, const HJBProblem& problem,
                              const HJBOptions& options = {});

/// Discrete residual -eps Lap u + H(grad u) + lambda - rhs.
ScalarField hjb_residual(const Grid<double>& grid, const HJBProblem& problem, const ScalarField& u,
                         double lambda, HamiltonianScheme scheme = HamiltonianScheme::central);

/// Godunov upwind gradient magnitudes for a radial convex Hamiltonian with
/// minimum at zero (one-sided differences on boundary nodes).
VectorField godunov_gradient(const Grid<double>& grid, const ScalarField& u);

/// Index of the smallest entry, first in node order on ties.
Eigen::Index first_argmin(const ScalarField& f);

struct GradientGrowthReport {
  double implied_k = 0.0;  // max |grad u| / (1 + |x|)^{b/gamma}
  double exponent = 0.0;   // b / gamma
  bool finite = false;
};

GradientGrowthReport gradient_growth_check(const Grid<double>& grid, const ScalarField& u,
                                           const ModelParams& model);

struct GrowthLowerReport {
  bool skipped = false;
  double c = 0.0;          // largest C with u >= C |x|^{1+b/gamma} - 1/C on the outer half
  double exponent = 0.0;   // 1 + b/gamma
  double inner_radius = 0.0;
};

GrowthLowerReport growth_lower_check(const Grid<double>& grid, const ScalarField& u,
                                     const ModelParams& model, double inner_radius = -1.0);

}  // namespace emfg
