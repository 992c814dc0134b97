#include "emfg/fokker_planck.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <sstream>

namespace emfg {

namespace {

// B(P) = P / (e^P - 1), with the removable singularity at 0.
double bernoulli(double p) {
  if (std::abs(p) < 1e-6) return 1.0 - 0.5 * p + p * p / 12.0;
  return p / std::expm1(p);
}

Eigen::SparseMatrix<double> sg_operator(const Grid<double>& grid, const FPProblem& pb) {
  const int n = grid.points_per_axis();
  const double h = grid.spacing();
  const double eps = pb.epsilon;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<size_t>(grid.size()) * 4 * grid.dim());
  for (int a = 0; a < grid.dim(); ++a) {
    const Eigen::Index s = grid.stride(a);
    for (Eigen::Index idx = 0; idx < grid.size(); ++idx) {
      const int i = grid.axis_index(idx, a);
      if (i == n - 1) continue;
      // Face between idx and idx + s carries q = eps m' + b m.
      const Eigen::Index jdx = idx + s;
      const double be = 0.5 * (pb.drift(idx, a) + pb.drift(jdx, a));
      const double p = be * h / eps;
      const double cj = eps / h * bernoulli(-p);
      const double ci = -eps / h * bernoulli(p);
      // Node-centred control volumes: half width at the boundary.
      const double vol_i = (i == 0 ? 0.5 : 1.0) * h;
      const double vol_j = (i + 1 == n - 1 ? 0.5 : 1.0) * h;
      t.emplace_back(idx, jdx, cj / vol_i);
      t.emplace_back(idx, idx, ci / vol_i);
      t.emplace_back(jdx, jdx, -cj / vol_j);
      t.emplace_back(jdx, idx, -ci / vol_j);
    }
  }
  Eigen::SparseMatrix<double> a(grid.size(), grid.size());
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

}  // namespace

ScalarField drift_potential(const Grid<double>& grid, const VectorField& drift) {
  detail::require_vector_shape(grid, drift, "drift_potential");
  const double h = grid.spacing();
  ScalarField phi = ScalarField::Zero(grid.size());
  for (Eigen::Index idx = 1; idx < grid.size(); ++idx) {
    int a = 0;
    while (grid.axis_index(idx, a) == 0) ++a;
    const Eigen::Index prev = idx - grid.stride(a);
    phi[idx] = phi[prev] + 0.5 * h * (drift(idx, a) + drift(prev, a));
  }
  return phi;
}

Eigen::SparseMatrix<double> fp_operator(const Grid<double>& grid, const FPProblem& problem) {
  detail::require_vector_shape(grid, problem.drift, "fp_operator");
  if (!(problem.epsilon > 0.0)) throw ConfigError("Fokker-Planck viscosity must be positive");
  if (!problem.drift.allFinite()) throw DomainError("Fokker-Planck drift is not finite");
  if (problem.scheme == FluxScheme::scharfetter_gummel) return sg_operator(grid, problem);
  Eigen::SparseMatrix<double> a = problem.epsilon * laplacian_matrix(grid);
  for (int ax = 0; ax < grid.dim(); ++ax) {
    Eigen::SparseMatrix<double> d = divergence_matrix(grid, ax);
    a += d * problem.drift.col(ax).asDiagonal();
  }
  return a;
}

FPSolution solve_stationary_fp(const Grid<double>& grid, const FPProblem& problem) {
  if (!(problem.mass > 0.0)) throw ConfigError("Fokker-Planck mass must be positive");
  const Eigen::SparseMatrix<double> a = fp_operator(grid, problem);
  const Eigen::Index n = grid.size();
  const ScalarField omega = grid.quadrature_weights();
  // The weighted column sums of A vanish, so one equation is redundant. Row r
  // is replaced by the unit row and the mass row is restored by a rank-one
  // (Sherman-Morrison) correction, which keeps the factorization sparse.
  auto solve_with_row = [&](Eigen::Index r) -> Eigen::VectorXd {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<size_t>(a.nonZeros()) + 1);
    for (int k = 0; k < a.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it) {
        if (it.row() != r) t.emplace_back(it.row(), it.col(), it.value());
      }
    }
    t.emplace_back(r, r, 1.0);
    Eigen::SparseMatrix<double> b(n, n);
    b.setFromTriplets(t.begin(), t.end());
    b.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(b);
    if (lu.info() != Eigen::Success) throw SolverError("Fokker-Planck system is singular", {});
    Eigen::VectorXd er = Eigen::VectorXd::Zero(n);
    er[r] = 1.0;
    const Eigen::VectorXd y = lu.solve(er);  // B^-1 e_r
    // v = omega - e_r; solution of (B + e_r v^T) m = M e_r.
    const double vy = omega.dot(y) - y[r];
    const double denom = 1.0 + vy;
    if (!(std::abs(denom) > 0.0)) throw SolverError("Fokker-Planck mass constraint is degenerate", {});
    Eigen::VectorXd m = problem.mass * (y - y * (vy / denom));
    // One step of iterative refinement on the full system.
    Eigen::VectorXd res(n);
    res = -(a * m);
    res[r] = problem.mass - omega.dot(m);
    const Eigen::VectorXd x = lu.solve(res);
    const double vx = omega.dot(x) - x[r];
    m += x - y * (vx / denom);
    return m;
  };
  Eigen::Index r = 0;
  if (problem.anchor) {
    r = *problem.anchor;
    if (r < 0 || r >= n) throw ConfigError("Fokker-Planck anchor outside the grid");
  } else {
    drift_potential(grid, problem.drift).minCoeff(&r);
  }
  Eigen::VectorXd sol = solve_with_row(r);
  // A pivot in the tail loses accuracy; re-anchor at the peak.
  for (int pass = 0; pass < 2; ++pass) {
    if (!sol.allFinite()) break;
    Eigen::Index peak = 0;
    const double top = sol.cwiseAbs().maxCoeff(&peak);
    if (std::abs(sol[r]) >= 1e-3 * top) break;
    r = peak;
    sol = solve_with_row(r);
  }
  if (!sol.allFinite()) throw SolverError("Fokker-Planck solve produced non-finite values", {});

  FPSolution out;
  ScalarField m = sol.head(n);
  const double peak = m.cwiseAbs().maxCoeff();
  out.clamped_min = m.minCoeff();
  if (out.clamped_min < -1e-12 * peak) {
    std::ostringstream os;
    os << "Fokker-Planck density has negative entries down to " << out.clamped_min
       << " (relative " << out.clamped_min / peak << "); drift too strong for the mesh";
    throw SolverError(os.str(), {});
  }
  m = m.cwiseMax(0.0);
  m *= problem.mass / integrate(grid, m);
  out.m = m;
  out.w = -(problem.drift.array().colwise() * m.array()).matrix();
  const ScalarField am = a * m;
  out.linear_residual = am.cwiseAbs().maxCoeff();
  out.residual_scale = (problem.epsilon * laplacian(grid, m)).cwiseAbs().maxCoeff() +
                       divergence(grid, out.w).cwiseAbs().maxCoeff();
  return out;
}

LyapunovReport lyapunov_mass_decay(const Grid<double>& grid, const ScalarField& m, const ScalarField& u,
                                   double kappa, int radius_samples) {
  detail::require_scalar_shape(grid, m, "lyapunov_mass_decay");
  detail::require_scalar_shape(grid, u, "lyapunov_mass_decay");
  LyapunovReport rep;
  if (kappa == 0.0) {
    rep.weighted_mass = integrate(grid, m);
  } else {
    rep.weighted_mass = integrate(grid, ((kappa * u).array().exp() * m.array()).matrix().eval());
  }
  ScalarField radius(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) radius[i] = grid.coordinate(i).norm();
  const ScalarField weighted = ((kappa * radius).array().exp() * m.array()).matrix();
  bool decreasing = true;
  for (int k = 0; k < radius_samples; ++k) {
    const double r = grid.half_width() * k / radius_samples;
    const ScalarField tail = (radius.array() > r).select(weighted, 0.0);
    const double v = integrate(grid, tail);
    if (!rep.tails.empty() && v > rep.tails.back()) decreasing = false;
    rep.radii.push_back(r);
    rep.tails.push_back(v);
  }
  rep.finite = std::isfinite(rep.weighted_mass);
  for (double v : rep.tails) rep.finite = rep.finite && std::isfinite(v);
  rep.tails_decreasing = decreasing;
  return rep;
}

}  // namespace emfg
