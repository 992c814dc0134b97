#include "emfg/mfg.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <cstdio>
#include <cstdlib>

namespace emfg {

void SolverConfig::validate() const {
  if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");
  if (!(tolerance > 0.0)) throw ConfigError("fixed-point tolerance must be positive");
  if (!(hjb_tolerance > 0.0)) throw ConfigError("HJB tolerance must be positive");
  if (max_outer_iterations < 1) throw ConfigError("max outer iterations must be >= 1");
  if (hjb_max_iterations < 1) throw ConfigError("max HJB iterations must be >= 1");
  if (anderson_depth < 0) throw ConfigError("anderson depth must be >= 0");
  if (!(newton_switch >= 0.0)) throw ConfigError("newton switch must be >= 0");
}

ScalarField mfg_rhs(const Grid<double>& grid, const ModelParams& model, const ScalarField& m, bool mollified) {
  const ScalarField v = potential_field(model.potential, grid);
  if (mollified) {
    const Mollifier chi(grid, effective_mollifier_width(grid, model));
    return mollified_coupling(model.coupling, chi, m) + v;
  }
  return local_coupling(model.coupling, m) + v;
}

ScalarField initial_density(const Grid<double>& grid, const ModelParams& model, const SolverConfig& cfg) {
  const auto ex = RescalingExponents::from(model.dim, model.hamiltonian.gamma, model.coupling.alpha);
  double sigma = cfg.initial_sigma;
  if (!(sigma > 0.0)) {
    sigma = std::clamp(4.0 * std::pow(model.epsilon, ex.len), 3.0 * grid.spacing(), 0.25 * grid.half_width());
  }
  const Point c = cfg.initial_center.value_or(Point::Zero(grid.dim()));
  if (c.size() != grid.dim()) throw ConfigError("initial centre has the wrong dimension");
  ScalarField m = sample(grid, [&](const Point& x) {
    return std::exp(-(x - c).squaredNorm() / (2.0 * sigma * sigma));
  });
  return m * (model.mass / integrate(grid, m));
}

namespace {

VectorField drift_of(const Grid<double>& grid, const HamiltonianSpec& ham, const ScalarField& u) {
  const VectorField p = gradient(grid, u);
  VectorField b(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) b.row(i) = grad_hamiltonian(ham, p.row(i).transpose()).transpose();
  return b;
}

double l1_distance(const Grid<double>& grid, const ScalarField& a, const ScalarField& b) {
  return integrate(grid, (a - b).cwiseAbs().eval());
}

void finalize(const Grid<double>& grid, const ModelParams& model, const SolverConfig& cfg,
              MFGSolution& sol, const ScalarField& rhs_used) {
  const KPair pair{sol.m, sol.w, model.epsilon, model.mass};
  sol.energy = energy_unchecked(grid, pair, model, cfg.mollified);
  const ConstraintResidual cr = constraint_residual(grid, pair);
  sol.constraint_residual = cr.scale > 0.0 ? cr.max / cr.scale : cr.max;
  sol.duality_gap = duality_certificate(grid, sol, model);
  const double identity = sol.energy.kinetic + integrate(grid, rhs_used.cwiseProduct(sol.m).eval());
  sol.discrete_duality_gap = std::abs(sol.lambda * model.mass - identity);
  sol.optimality_residual = optimality_residual(grid, sol, model);
  sol.argmin_x = grid.coordinate(first_argmin(sol.u));
  double edge = 0.0;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (grid.on_boundary(i)) edge = std::max(edge, sol.m[i]);
  }
  sol.boundary_decay = edge / sol.m.maxCoeff();
}

// Hessian of c_h |p|^gamma, zero at p = 0.
Eigen::MatrixXd hessian_hamiltonian(const HamiltonianSpec& ham, const Point& p) {
  const Eigen::Index d = p.size();
  const double r = p.norm();
  if (r == 0.0) return Eigen::MatrixXd::Zero(d, d);
  const double g = ham.gamma;
  const double c = ham.c_h * g * std::pow(r, g - 2.0);
  const Point e = p / r;
  return c * (Eigen::MatrixXd::Identity(d, d) + (g - 2.0) * e * e.transpose());
}

struct CoupledState {
  ScalarField u;
  double lambda = 0.0;
  ScalarField m;
};

// Newton on the full discrete system
//   -eps Lap u + H(G u) + lambda - C(m) - V = 0,   u[pin] = 0,
//   eps Lap m + sum_a Div_a (b_a(G u) m) = 0,      <omega, m> = M,
// for the central discretizations. The weighted sum of the Fokker-Planck rows
// vanishes identically, so the row at `anchor` carries the mass constraint.
// Returns false if it does not reach the targets, leaving `st` untouched.
bool newton_polish(const Grid<double>& grid, const ModelParams& model, const std::optional<Mollifier>& chi,
                   const ScalarField& v, double hjb_tolerance, CoupledState& st) {
  const Eigen::Index n = grid.size();
  const Eigen::Index o = n + 1;  // offset of m
  const Eigen::Index size = 2 * n + 1;
  const int dim = grid.dim();
  const double eps = model.epsilon;
  const ScalarField omega = grid.quadrature_weights();
  const Eigen::SparseMatrix<double> lap = laplacian_matrix(grid);
  std::vector<Eigen::SparseMatrix<double>> gmat, dmat;
  for (int a = 0; a < dim; ++a) {
    gmat.push_back(gradient_matrix(grid, a));
    dmat.push_back(divergence_matrix(grid, a));
  }
  Eigen::SparseMatrix<double> chi_mat;
  if (chi) chi_mat = Eigen::SparseMatrix<double>(chi->matrix());
  const Eigen::Index pin = first_argmin(st.u);
  Eigen::Index anchor = 0;
  st.m.maxCoeff(&anchor);
  const double c_f = model.coupling.c_f;
  const double alpha = model.coupling.alpha;

  auto coupling_of = [&](const ScalarField& m) {
    return chi ? mollified_coupling(model.coupling, *chi, m) : local_coupling(model.coupling, m);
  };
  struct Eval {
    ScalarField r1, r3;  // r3 holds the mass defect at the anchor row
    double merit = 0.0;    // scaled max norm, for the stopping test
    double descent = 0.0;  // scaled sum of squares, for the line search
    VectorField p, b;
  };
  double s1 = 1.0, s3 = 1.0;
  auto evaluate = [&](const ScalarField& u, double lambda, const ScalarField& m) {
    Eval e;
    e.p.resize(n, dim);
    e.b.resize(n, dim);
    for (int a = 0; a < dim; ++a) e.p.col(a) = gmat[a] * u;
    ScalarField hv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Point pi = e.p.row(i).transpose();
      hv[i] = hamiltonian(model.hamiltonian, pi);
      e.b.row(i) = grad_hamiltonian(model.hamiltonian, pi).transpose();
    }
    e.r1 = (-eps * (lap * u) + hv).array() + lambda - (coupling_of(m) + v).array();
    e.r3 = eps * (lap * m);
    for (int a = 0; a < dim; ++a) e.r3 += dmat[a] * e.b.col(a).cwiseProduct(m);
    const double mass_defect = omega.dot(m) - model.mass;
    e.r3[anchor] = 0.0;
    e.merit = std::max({e.r1.cwiseAbs().maxCoeff() / s1, e.r3.cwiseAbs().maxCoeff() / s3,
                        std::abs(mass_defect) / model.mass, std::abs(u[pin]) / s1});
    e.descent = e.r1.squaredNorm() / (s1 * s1) + e.r3.squaredNorm() / (s3 * s3) +
                (u[pin] * u[pin]) / (s1 * s1) + (mass_defect * mass_defect) / (model.mass * model.mass);
    e.r3[anchor] = mass_defect;
    return e;
  };

  ScalarField u = st.u.array() - st.u[pin];
  double lambda = st.lambda;
  ScalarField m = st.m;
  s1 = 1.0 + (coupling_of(m) + v).cwiseAbs().maxCoeff();
  s3 = std::max(eps * (lap * m).cwiseAbs().maxCoeff(), 1e-300);
  Eval cur = evaluate(u, lambda, m);
  const double stencil = 2.0 * dim * eps / (grid.spacing() * grid.spacing());
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * stencil;
  auto target = [&]() {
    return std::max(hjb_tolerance, floor * std::max(u.cwiseAbs().maxCoeff() / s1, 1.0));
  };

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
  std::vector<Eigen::Triplet<double>> t;
  auto put = [&](const Eigen::SparseMatrix<double>& blk, Eigen::Index r0, Eigen::Index c0) {
    for (int k = 0; k < blk.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator itb(blk, k); itb; ++itb) {
        if (r0 == o && itb.row() == anchor) continue;
        t.emplace_back(r0 + itb.row(), c0 + itb.col(), itb.value());
      }
    }
  };
  auto f_prime = [&](double x) { return x > 0.0 ? -c_f * alpha * std::pow(x, alpha - 1.0) : 0.0; };
  int short_steps = 0;
  for (int it = 0; it < 40; ++it) {
    if (cur.merit <= target()) {
      st.u = u.array() - u.minCoeff();
      st.lambda = lambda;
      st.m = m.cwiseMax(0.0);
      st.m *= model.mass / integrate(grid, st.m);
      return true;
    }
    Eigen::SparseMatrix<double> j11 = -eps * lap;
    Eigen::SparseMatrix<double> j31(n, n);
    Eigen::SparseMatrix<double> j33 = eps * lap;
    for (int a = 0; a < dim; ++a) {
      j11 += Eigen::SparseMatrix<double>(cur.b.col(a).asDiagonal()) * gmat[a];
      j33 += dmat[a] * Eigen::SparseMatrix<double>(cur.b.col(a).asDiagonal());
      for (int c = 0; c < dim; ++c) {
        ScalarField hm(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          hm[i] = hessian_hamiltonian(model.hamiltonian, Point(cur.p.row(i).transpose()))(a, c) * m[i];
        }
        j31 += dmat[a] * Eigen::SparseMatrix<double>(hm.asDiagonal()) * gmat[c];
      }
    }
    Eigen::SparseMatrix<double> j13;
    if (chi) {
      const ScalarField fp = (chi_mat * m).unaryExpr(f_prime);
      j13 = -(chi_mat * Eigen::SparseMatrix<double>(fp.asDiagonal()) * chi_mat);
    } else {
      j13 = -Eigen::SparseMatrix<double>(m.unaryExpr(f_prime).asDiagonal());
    }
    t.clear();
    put(j11, 0, 0);
    put(j13, 0, o);
    put(j31, o, 0);
    put(j33, o, o);
    for (Eigen::Index i = 0; i < n; ++i) {
      t.emplace_back(i, n, 1.0);  // lambda
      t.emplace_back(i, i, 0.0);
      t.emplace_back(o + i, o + i, 0.0);
    }
    t.emplace_back(n, pin, 1.0);
    t.emplace_back(o + anchor, o + anchor, 1.0);  // mass row, minus its rank-one part
    Eigen::SparseMatrix<double> jac(size, size);
    jac.setFromTriplets(t.begin(), t.end());
    jac.makeCompressed();
    if (!analyzed) {
      lu.analyzePattern(jac);
      analyzed = true;
    }
    lu.factorize(jac);
    if (lu.info() != Eigen::Success) return false;
    // Full matrix = jac + e_a (w - e_a)^T on the m block.
    Eigen::VectorXd ea = Eigen::VectorXd::Zero(size);
    ea[o + anchor] = 1.0;
    const Eigen::VectorXd y = lu.solve(ea);
    const double vy = omega.dot(y.segment(o, n)) - y[o + anchor];
    Eigen::VectorXd rhs(size);
    rhs.head(n) = -cur.r1;
    rhs[n] = -u[pin];
    rhs.segment(o, n) = -cur.r3;
    Eigen::VectorXd step = lu.solve(rhs);
    const double vx = omega.dot(step.segment(o, n)) - step[o + anchor];
    step -= y * (vx / (1.0 + vy));
    if (!step.allFinite()) return false;
    double tau = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 8; ++ls, tau *= 0.5) {
      const ScalarField m_new = (m + tau * step.segment(o, n)).cwiseMax(0.0);
      const ScalarField u_new = u + tau * step.head(n);
      Eval trial = evaluate(u_new, lambda + tau * step[n], m_new);
      if (std::isfinite(trial.descent) && trial.descent < (1.0 - 1e-4 * tau) * cur.descent) {
        u = u_new;
        m = m_new;
        lambda += tau * step[n];
        cur = std::move(trial);
        accepted = true;
        break;
      }
    }
    // Repeated short steps mean the iterate is outside the Newton basin.
    short_steps = tau < 0.2 ? short_steps + 1 : 0;
    if (!accepted || short_steps >= 3) return false;
  }
  return false;
}

}  // namespace

MFGSolution solve_mfg(const Grid<double>& grid, const ModelParams& model, const SolverConfig& cfg) {
  model.validate();
  cfg.validate();
  if (grid.dim() != model.dim) throw ConfigError("grid and model dimensions differ");
  const ScalarField v = potential_field(model.potential, grid);
  std::optional<Mollifier> chi;
  if (cfg.mollified) chi.emplace(grid, effective_mollifier_width(grid, model));
  auto rhs_of = [&](const ScalarField& m) -> ScalarField {
    return (chi ? mollified_coupling(model.coupling, *chi, m) : local_coupling(model.coupling, m)) + v;
  };

  ScalarField m = cfg.initial_m.value_or(initial_density(grid, model, cfg));
  detail::require_scalar_shape(grid, m, "solve_mfg initial density");
  m = m.cwiseMax(0.0);
  m *= model.mass / integrate(grid, m);

  HJBOptions hopt;
  hopt.scheme = cfg.hjb_scheme;
  hopt.tolerance = cfg.hjb_tolerance;
  hopt.max_iterations = cfg.hjb_max_iterations;
  hopt.initial_u = cfg.initial_u;
  hopt.initial_lambda = cfg.initial_lambda;

  MFGSolution sol;
  const bool decoupled = model.coupling.c_f == 0.0;
  const ScalarField sqrt_w = grid.quadrature_weights().cwiseSqrt();
  std::vector<ScalarField> hist_m, hist_f;  // Anderson memory
  int next_newton = 1;
  for (int it = 1; it <= cfg.max_outer_iterations; ++it) {
    const ScalarField rhs = rhs_of(m);
    HJBSolution hs = solve_ergodic_hjb(grid, HJBProblem{rhs, model.epsilon, model.hamiltonian}, hopt);
    hopt.initial_u = hs.u;
    hopt.initial_lambda = hs.lambda;
    hopt.initial_time_step = 1e3;
    FPProblem fp;
    fp.drift = drift_of(grid, model.hamiltonian, hs.u);
    fp.epsilon = model.epsilon;
    fp.mass = model.mass;
    fp.scheme = cfg.fp_scheme;
    fp.anchor = hs.argmin;
    FPSolution fs = solve_stationary_fp(grid, fp);
    const double step = cfg.damping * l1_distance(grid, fs.m, m) / model.mass;
    sol.history.push_back(step);
    if (decoupled || step < cfg.tolerance) {
      sol.u = std::move(hs.u);
      sol.lambda = hs.lambda;
      sol.m = std::move(fs.m);
      sol.w = std::move(fs.w);
      sol.max_cell_peclet = hs.max_cell_peclet;
      sol.fixedpoint_iterations = it;
      sol.converged = true;
      finalize(grid, model, cfg, sol, rhs);
      return sol;
    }
    const bool newton_ok = cfg.newton_switch > 0.0 && cfg.hjb_scheme == HamiltonianScheme::central &&
                           cfg.fp_scheme == FluxScheme::central;
    if (newton_ok && step < cfg.newton_switch && it >= next_newton) {
      CoupledState st{hopt.initial_u.value(), hopt.initial_lambda.value(), fs.m};
      if (newton_polish(grid, model, chi, v, cfg.hjb_tolerance, st)) {
        m = std::move(st.m);
        hopt.initial_u = std::move(st.u);
        hopt.initial_lambda = st.lambda;
        hist_m.clear();
        hist_f.clear();
        ++sol.newton_polishes;
        next_newton = it + 1;
        continue;
      }
      next_newton = it + 25;
    }
    ScalarField f = fs.m - m;
    ScalarField next = m + cfg.damping * f;
    if (cfg.anderson_depth > 0) {
      hist_m.push_back(m);
      hist_f.push_back(f);
      if (static_cast<int>(hist_m.size()) > cfg.anderson_depth + 1) {
        hist_m.erase(hist_m.begin());
        hist_f.erase(hist_f.begin());
      }
      const Eigen::Index k = static_cast<Eigen::Index>(hist_m.size()) - 1;
      if (k > 0) {
        Eigen::MatrixXd df(m.size(), k), dm(m.size(), k);
        for (Eigen::Index j = 0; j < k; ++j) {
          df.col(j) = hist_f[j + 1] - hist_f[j];
          dm.col(j) = hist_m[j + 1] - hist_m[j];
        }
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(sqrt_w.asDiagonal() * df);
        cod.setThreshold(1e-10);
        const Eigen::VectorXd g = cod.solve((sqrt_w.cwiseProduct(f)).eval());
        const ScalarField mixed = next - (dm + cfg.damping * df) * g;
        if (g.allFinite() && mixed.minCoeff() >= 0.0) {
          next = mixed;
        } else {
          hist_m.clear();
          hist_f.clear();
        }
      }
    }
    m = next.cwiseMax(0.0);
    m *= model.mass / integrate(grid, m);
  }
  std::ostringstream os;
  os << "fictitious play did not converge in " << cfg.max_outer_iterations << " iterations; last L1 step "
     << sol.history.back();
  throw SolverError(os.str(), sol.history);
}

double duality_certificate(const Grid<double>& grid, const MFGSolution& sol, const ModelParams& model) {
  const KPair pair{sol.m, sol.w, model.epsilon, model.mass};
  const EnergyBreakdown e = energy_unchecked(grid, pair, model, false);
  const ScalarField rhs = local_coupling(model.coupling, sol.m.cwiseMax(0.0)) + potential_field(model.potential, grid);
  const double j = e.kinetic + integrate(grid, rhs.cwiseProduct(sol.m).eval());
  return std::abs(sol.lambda * model.mass - j);
}

double optimality_residual(const Grid<double>& grid, const MFGSolution& sol, const ModelParams& model) {
  const VectorField b = drift_of(grid, model.hamiltonian, sol.u);
  // m |w/m + b| = |w + m b|
  const VectorField d = sol.w + (b.array().colwise() * sol.m.array()).matrix();
  return integrate(grid, d.rowwise().norm().eval());
}

namespace {

struct Moments {
  Point mean;
  double spread = 0.0;
};

Moments moments(const Grid<double>& grid, const ScalarField& m) {
  const double mass = integrate(grid, m);
  Moments mo;
  mo.mean = Point::Zero(grid.dim());
  for (int a = 0; a < grid.dim(); ++a) {
    const ScalarField xa = sample(grid, [&](const Point& x) { return x[a]; });
    mo.mean[a] = integrate(grid, xa.cwiseProduct(m).eval()) / mass;
  }
  const ScalarField r2 = sample(grid, [&](const Point& x) { return (x - mo.mean).squaredNorm(); });
  mo.spread = std::sqrt(integrate(grid, r2.cwiseProduct(m).eval()) / mass);
  return mo;
}

KPair fp_competitor(const Grid<double>& grid, const ModelParams& model, const SolverConfig& cfg,
                    const VectorField& drift) {
  FPProblem fp;
  fp.drift = drift;
  fp.epsilon = model.epsilon;
  fp.mass = model.mass;
  fp.scheme = cfg.fp_scheme;
  FPSolution fs = solve_stationary_fp(grid, fp);
  return KPair{std::move(fs.m), std::move(fs.w), model.epsilon, model.mass};
}

}  // namespace

std::vector<Competitor> random_competitors(const Grid<double>& grid, const MFGSolution& sol,
                                           const ModelParams& model, int trials, std::uint64_t seed) {
  const SolverConfig cfg;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> amp(0.05, 0.6);
  const VectorField b = drift_of(grid, model.hamiltonian, sol.u);
  const Moments mo = moments(grid, sol.m);
  const double scale = std::max(3.0 * mo.spread, 4.0 * grid.spacing());
  const double b_rms = std::sqrt(integrate(grid, b.rowwise().squaredNorm().eval().cwiseProduct(sol.m).eval()) /
                                 model.mass);
  const double b_ref = b_rms > 0.0 ? b_rms : model.epsilon / scale;
  std::vector<Competitor> out;
  for (int t = 0; t < trials; ++t) {
    const int kind = grid.dim() == 2 ? t % 3 : t % 2;
    if (kind == 0) {
      // Smooth random potential G: a few modes on the support scale.
      std::array<std::array<double, 4>, 3> coef{};
      for (auto& row : coef)
        for (double& c : row) c = unit(rng);
      const double a = amp(rng);
      ScalarField g = sample(grid, [&](const Point& x) {
        double s = 0.0;
        for (int ax = 0; ax < grid.dim(); ++ax) {
          const double z = (x[ax] - mo.mean[ax]) / scale;
          for (int k = 1; k <= 3; ++k) {
            s += coef[k - 1][2 * ax] * std::sin(k * z) / k + coef[k - 1][2 * ax + 1] * std::cos(k * z) / k;
          }
        }
        return s;
      });
      const VectorField dg = gradient(grid, g);
      const double dg_max = dg.rowwise().norm().maxCoeff();
      const double factor = dg_max > 0.0 ? a * b_ref / dg_max : 0.0;
      out.push_back({"drift", fp_competitor(grid, model, cfg, b + factor * dg)});
    } else if (kind == 1) {
      // Translated drift: moves the mass off its optimal location.
      Point shift(grid.dim());
      for (int ax = 0; ax < grid.dim(); ++ax) shift[ax] = unit(rng) * 0.5 * mo.spread;
      VectorField bs(b.rows(), b.cols());
      for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const Point x = grid.coordinate(i) - shift;
        for (int ax = 0; ax < grid.dim(); ++ax) {
          bs(i, ax) = interpolate(grid, b.col(ax), x, 0.0);
        }
      }
      // Outside the sampled window keep the original drift.
      for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const Point x = grid.coordinate(i) - shift;
        if (x.cwiseAbs().maxCoeff() > grid.half_width()) bs.row(i) = b.row(i);
      }
      out.push_back({"shift", fp_competitor(grid, model, cfg, bs)});
    } else {
      // Divergence-free perturbation of w from a compactly supported stream
      // function inside the bulk of the density.
      Point c(2);
      c[0] = mo.mean[0] + 0.5 * mo.spread * unit(rng);
      c[1] = mo.mean[1] + 0.5 * mo.spread * unit(rng);
      const double radius = std::max(mo.spread, 3.0 * grid.spacing());
      const double a = amp(rng);
      ScalarField psi = sample(grid, [&](const Point& x) {
        const double r2 = (x - c).squaredNorm() / (radius * radius);
        return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0;
      });
      for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const auto mi = grid.multi_index(i);
        const int n = grid.points_per_axis();
        if (mi[0] < 2 || mi[1] < 2 || mi[0] > n - 3 || mi[1] > n - 3) psi[i] = 0.0;
      }
      const VectorField gp = gradient(grid, psi);
      VectorField curl(grid.size(), 2);
      curl.col(0) = gp.col(1);
      curl.col(1) = -gp.col(0);
      const double cmax = curl.rowwise().norm().maxCoeff();
      const double w_ref = sol.w.rowwise().norm().maxCoeff();
      const double factor = cmax > 0.0 ? a * std::max(w_ref, model.epsilon * sol.m.maxCoeff() / radius) / cmax : 0.0;
      out.push_back({"curl", KPair{sol.m, sol.w + factor * curl, model.epsilon, model.mass}});
    }
  }
  return out;
}

MinimizerReport minimizer_verification(const Grid<double>& grid, const MFGSolution& sol,
                                       const ModelParams& model, const SolverConfig& cfg, int trials,
                                       std::uint64_t seed) {
  MinimizerReport rep;
  rep.trials = trials;
  const KPair own{sol.m, sol.w, model.epsilon, model.mass};
  rep.solution_energy = energy_unchecked(grid, own, model, cfg.mollified).total;
  rep.tolerance = 1e-8 * (1.0 + std::abs(rep.solution_energy));
  rep.min_competitor_energy = std::numeric_limits<double>::infinity();
  rep.min_margin = std::numeric_limits<double>::infinity();
  FeasibilityOptions feas;
  feas.constraint_tolerance = 1e-9;
  for (const Competitor& c : random_competitors(grid, sol, model, trials, seed)) {
    const double e = energy(grid, c.pair, model, cfg.mollified, feas).total;
    rep.min_competitor_energy = std::min(rep.min_competitor_energy, e);
    rep.min_margin = std::min(rep.min_margin, e - rep.solution_energy);
    if (e >= rep.solution_energy - rep.tolerance) ++rep.passed;
  }
  rep.all_pass = rep.passed == rep.trials;
  return rep;
}

std::vector<MFGSolution> solve_mfg_multistart(const Grid<double>& grid, const ModelParams& model,
                                              const SolverConfig& cfg, const std::vector<Point>& centers) {
  std::vector<MFGSolution> out;
  std::vector<std::string> failures;
  for (const Point& c : centers) {
    SolverConfig local = cfg;
    local.initial_center = c;
    local.initial_m.reset();
    local.initial_u.reset();
    local.initial_lambda.reset();
    try {
      out.push_back(solve_mfg(grid, model, local));
    } catch (const SolverError& e) {
      failures.emplace_back(e.what());
    }
  }
  if (out.empty()) {
    std::string msg = "no start converged";
    for (const auto& f : failures) msg += "; " + f;
    throw SolverError(msg, {});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const MFGSolution& a, const MFGSolution& b) { return a.energy.total < b.energy.total; });
  return out;
}

SubadditivityReport subadditivity_gap(const Grid<double>& grid, const ModelParams& model,
                                      const SolverConfig& cfg, double a) {
  if (!(a > 0.0 && a < model.mass)) throw ConfigError("subadditivity split must satisfy 0 < a < M");
  auto e_of = [&](double mass) {
    ModelParams mp = model;
    mp.mass = mass;
    return solve_mfg(grid, mp, cfg).energy.total;
  };
  SubadditivityReport rep;
  rep.a = a;
  rep.e_a = e_of(a);
  rep.e_rest = e_of(model.mass - a);
  rep.e_full = e_of(model.mass);
  rep.gap = rep.e_a + rep.e_rest - rep.e_full;
  return rep;
}

}  // namespace emfg
