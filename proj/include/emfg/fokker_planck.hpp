#pragma once

// Stationary Kolmogorov equation  eps Lap m + div(m b) = 0,  int m = M,
// with zero-flux boundary.

#include <optional>

#include "emfg/grid.hpp"
#include "emfg/model.hpp"

namespace emfg {

enum class FluxScheme {
  // Same divergence and Laplacian as the constraint operator; (m, -m b) is
  // then feasible up to the linear-solve residual.
  central,
  // Exponentially fitted (Scharfetter-Gummel) face fluxes; an M-matrix for any
  // drift, but the constraint holds only to discretization accuracy.
  scharfetter_gummel,
};

struct FPProblem {
  VectorField drift;
  double epsilon = 1.0;
  double mass = 1.0;
  FluxScheme scheme = FluxScheme::central;
  /// Node expected to carry substantial mass (the argmin of u, say); the
  /// solve is anchored there. Defaults to the minimum of drift_potential.
  std::optional<Eigen::Index> anchor;
};

struct FPSolution {
  ScalarField m;
  VectorField w;  // -m b
  double linear_residual = 0.0;   // max |A m| after normalization
  double residual_scale = 0.0;    // max |eps Lap m| + max |div(m b)|
  double clamped_min = 0.0;       // most negative entry before clamping
};

FPSolution solve_stationary_fp(const Grid<double>& grid, const FPProblem& problem);

/// Trapezoid line integral of the drift along grid paths from the first
/// node; for a gradient drift this is the potential up to a constant.
ScalarField drift_potential(const Grid<double>& grid, const VectorField& drift);

/// Sparse generator m -> eps Lap m + div(m b) for the chosen scheme.
Eigen::SparseMatrix<double> fp_operator(const Grid<double>& grid, const FPProblem& problem);

struct LyapunovReport {
  double weighted_mass = 0.0;        // int e^{kappa u} m
  std::vector<double> radii;         // R samples
  std::vector<double> tails;         // int_{|x| > R} e^{kappa |x|} m
  bool finite = false;
  bool tails_decreasing = false;
};

LyapunovReport lyapunov_mass_decay(const Grid<double>& grid, const ScalarField& m, const ScalarField& u,
                                   double kappa, int radius_samples = 8);

}  // namespace emfg
