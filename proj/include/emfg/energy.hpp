#pragma once

// Constraint set, energy functional and its lower bound.

#include <limits>
#include <optional>

#include "emfg/grid.hpp"
#include "emfg/model.hpp"

namespace emfg {

/// A candidate (m, w) for the constraint -eps Lap m + div w = 0, int m = M.
struct KPair {
  ScalarField m;
  VectorField w;
  double epsilon = 1.0;
  double mass = 1.0;
};

struct ConstraintResidual {
  double max = 0.0;
  double l2 = 0.0;
  /// max |eps Lap m| + max |div w|, the natural size of the two terms.
  double scale = 0.0;
};

ConstraintResidual constraint_residual(const Grid<double>& grid, const KPair& pair);

inline constexpr double kInfiniteKinetic = std::numeric_limits<double>::infinity();

/// m L(-w/m). Zero when w vanishes, +inf when m <= 0 and w does not. Below
/// 1e-14 * m_max the perspective is evaluated in log form.
double kinetic_density(const HamiltonianSpec& ham, double m, const Point& w, double m_max = 1.0);

struct EnergyBreakdown {
  double kinetic = 0.0;
  double potential = 0.0;
  double coupling = 0.0;
  double total = 0.0;
};

struct FeasibilityOptions {
  double mass_tolerance = 1e-8;        // relative to M
  double constraint_tolerance = 1e-8;  // max residual relative to its scale
};

/// Quadrature of the energy. With `mollified` the coupling term is F_k[m]
/// built from the model's mollifier width (<= 0 meaning 2h). Throws
/// InfeasibleError when the pair violates mass or constraint beyond tolerance.
EnergyBreakdown energy(const Grid<double>& grid, const KPair& pair, const ModelParams& model,
                       bool mollified, const FeasibilityOptions& feas = {});

/// Same quadrature without feasibility checks.
EnergyBreakdown energy_unchecked(const Grid<double>& grid, const KPair& pair, const ModelParams& model,
                                 bool mollified);

double effective_mollifier_width(const Grid<double>& grid, const ModelParams& model);

/// E >= -K - C eps^{-lam}: split form of the one-dimensional lower bound.
struct EnergyLowerBound {
  double k = 0.0;           // constant part (from the box average M/|Omega|)
  double c = 0.0;           // coefficient of eps^{-lam}
  double exponent = 0.0;    // lam
  double value = 0.0;       // -k - c eps^{-exponent}
};

/// In one dimension the constants come from m <= M/|Omega| + int |m'|,
/// eps m' = w and Hoelder; in higher dimension the caller supplies (k, c)
/// and only the exponent is derived.
EnergyLowerBound energy_lower_bound(const ModelParams& model, double domain_volume,
                                    std::optional<std::pair<double, double>> envelope = std::nullopt);

}  // namespace emfg
