#include "emfg/hjb.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace emfg {

namespace {

struct Linearization {
  ScalarField hamiltonian;            // H at each node
  std::vector<Eigen::Triplet<double>> jac;  // d H / d u
  double max_peclet = 0.0;
};

// H(grad u) and its derivative with respect to u for the chosen scheme.
Linearization linearize(const Grid<double>& grid, const HamiltonianSpec& ham, double eps,
                        const ScalarField& u, HamiltonianScheme scheme) {
  const int dim = grid.dim();
  const int n = grid.points_per_axis();
  const double h = grid.spacing();
  Linearization lin;
  lin.hamiltonian.resize(grid.size());
  lin.jac.reserve(static_cast<size_t>(grid.size()) * 2 * dim);
  Point p(dim);
  // Each component of the discrete gradient is a two-point difference
  // (u[hi] - u[lo]) * coef.
  std::array<Eigen::Index, 3> hi{}, lo{};
  std::array<double, 3> coef{};
  for (Eigen::Index idx = 0; idx < grid.size(); ++idx) {
    for (int a = 0; a < dim; ++a) {
      const int i = grid.axis_index(idx, a);
      const Eigen::Index s = grid.stride(a);
      if (i == 0) {
        hi[a] = idx + s; lo[a] = idx; coef[a] = 1.0 / h;
      } else if (i == n - 1) {
        hi[a] = idx; lo[a] = idx - s; coef[a] = 1.0 / h;
      } else if (scheme == HamiltonianScheme::central) {
        hi[a] = idx + s; lo[a] = idx - s; coef[a] = 0.5 / h;
      } else {
        const double bwd = (u[idx] - u[idx - s]) / h;
        const double fwd = (u[idx + s] - u[idx]) / h;
        const double up = std::max(bwd, 0.0);
        const double down = std::max(-fwd, 0.0);
        if (up == 0.0 && down == 0.0) {
          hi[a] = idx; lo[a] = idx; coef[a] = 0.0;
        } else if (up >= down) {
          hi[a] = idx; lo[a] = idx - s; coef[a] = 1.0 / h;
        } else {
          hi[a] = idx + s; lo[a] = idx; coef[a] = 1.0 / h;
        }
      }
      p[a] = (u[hi[a]] - u[lo[a]]) * coef[a];
    }
    lin.hamiltonian[idx] = hamiltonian(ham, p);
    const Point dh = grad_hamiltonian(ham, p);
    for (int a = 0; a < dim; ++a) {
      if (coef[a] == 0.0 || dh[a] == 0.0) continue;
      lin.jac.emplace_back(idx, hi[a], dh[a] * coef[a]);
      lin.jac.emplace_back(idx, lo[a], -dh[a] * coef[a]);
    }
    lin.max_peclet = std::max(lin.max_peclet, dh.cwiseAbs().maxCoeff() * h / (2.0 * eps));
  }
  return lin;
}

}  // namespace

Eigen::Index first_argmin(const ScalarField& f) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < f.size(); ++i) {
    if (f[i] < f[best]) best = i;
  }
  return best;
}

VectorField godunov_gradient(const Grid<double>& grid, const ScalarField& u) {
  detail::require_scalar_shape(grid, u, "godunov_gradient");
  const int n = grid.points_per_axis();
  const double h = grid.spacing();
  VectorField g(grid.size(), grid.dim());
  for (Eigen::Index idx = 0; idx < grid.size(); ++idx) {
    for (int a = 0; a < grid.dim(); ++a) {
      const int i = grid.axis_index(idx, a);
      const Eigen::Index s = grid.stride(a);
      if (i == 0) {
        g(idx, a) = (u[idx + s] - u[idx]) / h;
      } else if (i == n - 1) {
        g(idx, a) = (u[idx] - u[idx - s]) / h;
      } else {
        const double up = std::max((u[idx] - u[idx - s]) / h, 0.0);
        const double down = std::max(-(u[idx + s] - u[idx]) / h, 0.0);
        g(idx, a) = up >= down ? up : -down;
      }
    }
  }
  return g;
}

ScalarField hjb_residual(const Grid<double>& grid, const HJBProblem& problem, const ScalarField& u,
                         double lambda, HamiltonianScheme scheme) {
  detail::require_scalar_shape(grid, u, "hjb_residual");
  const Linearization lin = linearize(grid, problem.hamiltonian, problem.epsilon, u, scheme);
  return (-problem.epsilon * laplacian(grid, u) + lin.hamiltonian).array() + lambda -
         problem.rhs.array();
}

HJBSolution solve_ergodic_hjb(const Grid<double>& grid, const HJBProblem& problem,
                              const HJBOptions& options) {
  detail::require_scalar_shape(grid, problem.rhs, "solve_ergodic_hjb");
  problem.hamiltonian.validate();
  if (!(problem.epsilon > 0.0)) throw ConfigError("HJB viscosity must be positive");
  if (!problem.rhs.allFinite()) {
    throw DomainError("HJB right-hand side is not finite (unbounded below or NaN)");
  }
  const Eigen::Index n = grid.size();
  const double eps = problem.epsilon;
  const double scale = 1.0 + problem.rhs.cwiseAbs().maxCoeff();
  const Eigen::SparseMatrix<double> lap = laplacian_matrix(grid);

  ScalarField u = options.initial_u.value_or(ScalarField::Zero(n));
  detail::require_scalar_shape(grid, u, "solve_ergodic_hjb initial guess");
  const Eigen::Index pin = options.initial_u ? first_argmin(u) : first_argmin(problem.rhs);
  u.array() -= u[pin];
  double lambda = options.initial_lambda.value_or(problem.rhs[pin]);

  HJBSolution sol;
  auto residual_of = [&](const ScalarField& uu, double lam, Linearization* lin_out) {
    Linearization lin = linearize(grid, problem.hamiltonian, eps, uu, options.scheme);
    ScalarField r = (-eps * (lap * uu) + lin.hamiltonian).array() + lam - problem.rhs.array();
    if (lin_out) *lin_out = std::move(lin);
    return r;
  };

  // Cancellation in the stencil limits attainable accuracy to a multiple of
  // machine precision times eps |u| / h^2.
  const double stencil = 2.0 * grid.dim() * eps / (grid.spacing() * grid.spacing());
  auto target = [&](const ScalarField& uu) {
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * stencil * uu.cwiseAbs().maxCoeff();
    return std::max(options.tolerance, floor / scale);
  };

  Linearization lin;
  ScalarField res = residual_of(u, lambda, &lin);
  double rnorm = res.cwiseAbs().maxCoeff();
  const double r0 = std::max(rnorm, 1e-300);
  double dt = options.initial_time_step;
  sol.residual_history.push_back(rnorm / scale);

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  std::vector<Eigen::Triplet<double>> trip;
  int it = 0;
  bool pattern_analyzed = false;
  for (; it < options.max_iterations && rnorm / scale > target(u); ++it) {
    trip.clear();
    trip.reserve(lin.jac.size() + static_cast<size_t>(lap.nonZeros()) + 3 * static_cast<size_t>(n) + 1);
    for (int k = 0; k < lap.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator itl(lap, k); itl; ++itl) {
        trip.emplace_back(itl.row(), itl.col(), -eps * itl.value());
      }
    }
    trip.insert(trip.end(), lin.jac.begin(), lin.jac.end());
    const double inv_dt = std::isfinite(dt) ? 1.0 / dt : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      trip.emplace_back(i, i, inv_dt);  // keeps the structural diagonal present
      trip.emplace_back(i, n, 1.0);
    }
    trip.emplace_back(n, pin, 1.0);
    Eigen::SparseMatrix<double> jac(n + 1, n + 1);
    jac.setFromTriplets(trip.begin(), trip.end());
    jac.makeCompressed();
    if (!pattern_analyzed) {
      lu.analyzePattern(jac);
      pattern_analyzed = options.scheme == HamiltonianScheme::central;
    }
    lu.factorize(jac);
    if (lu.info() != Eigen::Success) {
      dt *= 0.25;
      pattern_analyzed = false;
      if (dt < 1e-14) throw SolverError("HJB Jacobian factorization failed", sol.residual_history);
      continue;
    }
    Eigen::VectorXd rhs(n + 1);
    rhs.head(n) = -res;
    rhs[n] = -u[pin];
    const Eigen::VectorXd step = lu.solve(rhs);
    const ScalarField u_new = u + step.head(n);
    const double lambda_new = lambda + step[n];
    Linearization lin_new;
    const ScalarField res_new = residual_of(u_new, lambda_new, &lin_new);
    const double rnew = res_new.cwiseAbs().maxCoeff();
    if (!std::isfinite(rnew) || !u_new.allFinite() || (rnew > 10.0 * rnorm && rnew > 1e-8 * scale)) {
      dt = (std::isfinite(dt) ? dt : 1e6) * 0.25;
      if (dt < 1e-14) throw SolverError("HJB pseudo-time step collapsed", sol.residual_history);
      continue;
    }
    u = u_new;
    lambda = lambda_new;
    res = res_new;
    lin = std::move(lin_new);
    const double prev = rnorm;
    rnorm = rnew;
    sol.residual_history.push_back(rnorm / scale);
    // Switched evolution relaxation: the step grows as the residual falls.
    if (std::isfinite(dt)) {
      dt = dt * std::clamp(prev / std::max(rnorm, 1e-300), 0.5, 10.0);
      if (dt > 1e12 || rnorm < 1e-6 * r0) dt = std::numeric_limits<double>::infinity();
    }
  }
  if (rnorm / scale > target(u)) {
    std::ostringstream os;
    os << "HJB did not converge after " << it << " iterations, residual " << rnorm / scale;
    throw SolverError(os.str(), sol.residual_history);
  }
  sol.argmin = first_argmin(u);
  u.array() -= u[sol.argmin];
  sol.u = std::move(u);
  sol.lambda = lambda;
  sol.iterations = it;
  sol.residual = rnorm / scale;
  sol.argmin_x = grid.coordinate(sol.argmin);
  sol.max_cell_peclet = lin.max_peclet;
  return sol;
}

GradientGrowthReport gradient_growth_check(const Grid<double>& grid, const ScalarField& u,
                                           const ModelParams& model) {
  GradientGrowthReport rep;
  rep.exponent = model.potential.growth() / model.hamiltonian.gamma;
  const VectorField g = gradient(grid, u);
  double k = 0.0;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double r = grid.coordinate(i).norm();
    k = std::max(k, g.row(i).norm() / std::pow(1.0 + r, rep.exponent));
  }
  rep.implied_k = k;
  rep.finite = std::isfinite(k);
  return rep;
}

GrowthLowerReport growth_lower_check(const Grid<double>& grid, const ScalarField& u,
                                     const ModelParams& model, double inner_radius) {
  GrowthLowerReport rep;
  const double b = model.potential.growth();
  rep.exponent = 1.0 + b / model.hamiltonian.gamma;
  rep.inner_radius = inner_radius > 0.0 ? inner_radius : 0.5 * grid.half_width();
  if (b <= 0.0 || model.potential.prefactor <= 0.0) {
    rep.skipped = true;
    return rep;
  }
  // Feasibility of C is monotone on the relevant branch: u + 1/C - C r^e >= 0
  // becomes harder as C grows past the optimum, so bisect on the largest
  // feasible C starting from a tiny feasible value.
  auto feasible = [&](double c) {
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const double r = grid.coordinate(i).norm();
      if (r < rep.inner_radius) continue;
      if (u[i] < c * std::pow(r, rep.exponent) - 1.0 / c) return false;
    }
    return true;
  };
  double lo = 1e-12;
  if (!feasible(lo)) return rep;
  double hi = 1.0;
  while (feasible(hi) && hi < 1e12) hi *= 2.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  rep.c = lo;
  return rep;
}

}  // namespace emfg
