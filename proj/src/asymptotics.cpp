#include "emfg/asymptotics.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace emfg {

namespace {

int odd_points(double half_width, double spacing) {
  int n = static_cast<int>(std::ceil(2.0 * half_width / spacing)) + 1;
  if (n % 2 == 0) ++n;
  return std::max(n, 3);
}

Point clamp_to_box(const Grid<double>& grid, Point x) {
  for (int a = 0; a < x.size(); ++a) x[a] = std::clamp(x[a], -grid.half_width(), grid.half_width());
  return x;
}

double nearest_zero_distance(const PotentialSpec& pot, const Point& x) {
  double best = std::numeric_limits<double>::infinity();
  for (const Point& z : pot.zeros(static_cast<int>(x.size()))) best = std::min(best, (x - z).norm());
  return best;
}

ScalarField recentre(const Grid<double>& grid, const ScalarField& m, const Point& shift) {
  return sample(grid, [&](const Point& y) { return interpolate(grid, m, (y + shift).eval(), 0.0); });
}

}  // namespace

RescaledSolution rescale_solution(const Grid<double>& grid, const MFGSolution& sol, const ModelParams& model,
                                  std::optional<Grid<double>> y_grid) {
  const auto ex = RescalingExponents::from(model.dim, model.hamiltonian.gamma, model.coupling.alpha);
  const double eps = model.epsilon;
  const double len = std::pow(eps, ex.len);
  RescaledSolution out;
  out.grid = y_grid.value_or(Grid<double>(grid.dim(), grid.half_width() / len, grid.points_per_axis()));
  const Eigen::Index i0 = first_argmin(sol.u);
  out.shift = grid.coordinate(i0);
  const double u0 = sol.u[i0];
  const double fm = std::pow(eps, ex.mass);
  const double fu = std::pow(eps, ex.u);
  const bool identity = eps == 1.0 && out.shift.norm() == 0.0 && out.grid.same_shape(grid);
  if (identity) {
    out.m_bar = sol.m;
    out.u_bar = sol.u.array() - u0;
  } else {
    out.m_bar = sample(out.grid, [&](const Point& y) {
      return fm * interpolate(grid, sol.m, (out.shift + len * y).eval(), 0.0);
    });
    out.u_bar = sample(out.grid, [&](const Point& y) {
      return fu * (interpolate(grid, sol.u, clamp_to_box(grid, out.shift + len * y), 0.0) - u0);
    });
  }
  out.lambda_tilde = std::pow(eps, ex.lam) * sol.lambda;
  out.truncation_loss = model.mass - integrate(out.grid, out.m_bar);
  return out;
}

double mass_within(const Grid<double>& grid, const ScalarField& m, const Point& center, double r) {
  const ScalarField w = grid.quadrature_weights();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if ((grid.coordinate(i) - center).norm() <= r) acc += w[i] * m[i];
  }
  return acc;
}

double concentration_radius(const Grid<double>& grid, const ScalarField& m, const Point& center, double target) {
  if (target <= 0.0) return 0.0;
  const ScalarField w = grid.quadrature_weights();
  std::vector<std::pair<double, double>> nodes;
  nodes.reserve(static_cast<size_t>(grid.size()));
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    nodes.emplace_back((grid.coordinate(i) - center).norm(), w[i] * m[i]);
  }
  std::sort(nodes.begin(), nodes.end());
  double cum = 0.0;
  double prev_r = 0.0;
  size_t k = 0;
  while (k < nodes.size()) {
    // Nodes at equal distance enter the ball together.
    const double r = nodes[k].first;
    double add = 0.0;
    while (k < nodes.size() && nodes[k].first == r) add += nodes[k++].second;
    if (cum + add >= target) {
      if (add <= 0.0) return r;
      return prev_r + (r - prev_r) * (target - cum) / add;
    }
    cum += add;
    prev_r = r;
  }
  return std::numeric_limits<double>::infinity();
}

DecayFit decay_fit(const Grid<double>& grid, const ScalarField& m, const Point& center) {
  DecayFit fit;
  ScalarField r(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) r[i] = (grid.coordinate(i) - center).norm();
  // Largest full ball around the centre that stays inside the box.
  double rmax = grid.half_width();
  for (int a = 0; a < grid.dim(); ++a) rmax = std::min(rmax, grid.half_width() - std::abs(center[a]));
  const double rin = 0.5 * rmax;
  const double shell = grid.spacing();
  const int nshell = std::max(1, static_cast<int>(std::floor((rmax - rin) / shell)));
  std::vector<double> peak(static_cast<size_t>(nshell), 0.0);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (r[i] < rin || r[i] >= rin + nshell * shell) continue;
    const int s = std::min(nshell - 1, static_cast<int>((r[i] - rin) / shell));
    peak[static_cast<size_t>(s)] = std::max(peak[static_cast<size_t>(s)], m[i]);
  }
  std::vector<double> xs, ys;
  for (int s = 0; s < nshell; ++s) {
    if (peak[static_cast<size_t>(s)] > 0.0) {
      xs.push_back(rin + (s + 0.5) * shell);
      ys.push_back(std::log(peak[static_cast<size_t>(s)]));
    }
  }
  if (xs.size() < 2) return fit;
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  const double slope = sxy / sxx;
  fit.c2 = -slope;
  fit.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  double c1 = 0.0;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (r[i] >= rin && r[i] <= rmax) c1 = std::max(c1, m[i] * std::exp(fit.c2 * r[i]));
  }
  fit.c1 = 1.1 * c1;
  fit.envelope_holds = fit.c2 > 0.0;
  for (Eigen::Index i = 0; i < grid.size() && fit.envelope_holds; ++i) {
    if (m[i] > fit.c1 * std::exp(-fit.c2 * r[i])) fit.envelope_holds = false;
  }
  return fit;
}

Grid<double> sweep_grid(const ModelParams& model, const SweepOptions& opt) {
  const auto ex = RescalingExponents::from(model.dim, model.hamiltonian.gamma, model.coupling.alpha);
  const double len = std::pow(model.epsilon, ex.len);
  const int n = odd_points(opt.window, opt.rescaled_spacing);
  return Grid<double>(model.dim, opt.window * len, n);
}

SweepRecord summarize_solution(const Grid<double>& grid, const MFGSolution& sol, const ModelParams& model,
                               const RescaledSolution& rs, const std::vector<double>& radii, double eta_fraction) {
  const auto ex = RescalingExponents::from(model.dim, model.hamiltonian.gamma, model.coupling.alpha);
  const double len = std::pow(model.epsilon, ex.len);
  SweepRecord rec;
  rec.epsilon = model.epsilon;
  rec.eta = eta_fraction * model.mass;
  rec.spacing = grid.spacing();
  rec.lambda = sol.lambda;
  rec.lambda_tilde = rs.lambda_tilde;
  rec.x_eps = rs.shift;
  rec.distance_to_zero = nearest_zero_distance(model.potential, rec.x_eps);
  rec.radii = radii;
  for (double r : radii) rec.mass_fraction.push_back(mass_within(grid, sol.m, rec.x_eps, r * len) / model.mass);
  rec.width_r = concentration_radius(grid, sol.m, rec.x_eps, model.mass - rec.eta) / len;
  rec.sup_m_bar = rs.m_bar.maxCoeff();
  rec.truncation_loss = rs.truncation_loss;
  rec.boundary_decay = sol.boundary_decay;
  rec.energy = sol.energy;
  rec.duality_gap = sol.duality_gap;
  rec.optimality_residual = sol.optimality_residual;
  rec.kinetic_moment = sol.energy.kinetic / model.hamiltonian.c_l();
  rec.decay = decay_fit(rs.grid, rs.m_bar, Point::Zero(model.dim));
  rec.iterations = sol.fixedpoint_iterations;
  return rec;
}

SweepResult run_sweep(const ModelParams& model_template, const std::vector<double>& epsilons,
                      const SweepOptions& opt) {
  SweepResult out;
  const auto ex = RescalingExponents::from(model_template.dim, model_template.hamiltonian.gamma,
                                           model_template.coupling.alpha);
  std::optional<size_t> previous;
  for (double eps : epsilons) {
    ModelParams model = model_template;
    model.epsilon = eps;
    SweepRecord rec;
    rec.epsilon = eps;
    rec.eta = opt.eta_fraction * model.mass;
    RescaledSolution rs;
    try {
      const Grid<double> grid = sweep_grid(model, opt);
      rec.spacing = grid.spacing();
      SolverConfig cfg = opt.solver;
      const RescaledSolution* p = previous ? &out.rescaled[*previous] : nullptr;
      // Rescaled windows share the node layout across epsilon.
      if (opt.warm_start && p && p->grid.dim() == grid.dim() && p->grid.points_per_axis() == grid.points_per_axis()) {
        cfg.initial_m = std::pow(eps, -ex.mass) * p->m_bar;
        cfg.initial_u = std::pow(eps, -ex.u) * p->u_bar;
        cfg.initial_lambda = std::pow(eps, -ex.lam) * p->lambda_tilde;
      }
      const MFGSolution sol = solve_mfg(grid, model, cfg);
      rs = rescale_solution(grid, sol, model);
      rec = summarize_solution(grid, sol, model, rs, opt.radii, opt.eta_fraction);
      rec.ok = true;
    } catch (const SolverError& e) {
      rec.error = e.what();
    } catch (const DomainError& e) {
      rec.error = e.what();
    }
    out.records.push_back(rec);
    out.rescaled.push_back(std::move(rs));
    if (rec.ok) previous = out.rescaled.size() - 1;
    else previous.reset();
  }
  return out;
}

ExponentFit fit_exponent(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw ShapeError("fit_exponent needs two or more paired samples");
  std::vector<double> lx, ly;
  for (size_t k = 0; k < xs.size(); ++k) {
    if (!(xs[k] > 0.0) || !(ys[k] > 0.0)) throw DomainError("fit_exponent needs positive samples");
    lx.push_back(std::log(xs[k]));
    ly.push_back(std::log(ys[k]));
  }
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t k = 0; k < lx.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
    syy += (ly[k] - my) * (ly[k] - my);
  }
  if (sxx == 0.0) throw DomainError("fit_exponent needs distinct abscissae");
  ExponentFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

ConcentrationReport concentration_report(const std::vector<SweepRecord>& records) {
  ConcentrationReport rep;
  std::vector<const SweepRecord*> ok;
  for (const auto& r : records) {
    if (r.ok) ok.push_back(&r);
  }
  std::stable_sort(ok.begin(), ok.end(), [](const SweepRecord* a, const SweepRecord* b) { return a->epsilon > b->epsilon; });
  for (const SweepRecord* r : ok) {
    rep.epsilons.push_back(r->epsilon);
    rep.radii.push_back(r->width_r);
    rep.distances.push_back(r->distance_to_zero);
  }
  const size_t n = ok.size();
  if (n >= 2) {
    const double a = rep.radii[n - 2], b = rep.radii[n - 1];
    rep.radius_ratio = std::max(a, b) / std::max(std::min(a, b), 1e-300);
    rep.radius_stable = rep.radius_ratio <= 1.5;
  }
  if (n >= 1) {
    const size_t start = n >= 3 ? n - 3 : 0;
    rep.distance_nonincreasing = true;
    for (size_t k = start + 1; k < n; ++k) {
      if (rep.distances[k] > rep.distances[k - 1] + ok[k]->spacing) rep.distance_nonincreasing = false;
    }
    const bool within = rep.distances[start] <= ok[start]->spacing && rep.distances[n - 1] <= ok[n - 1]->spacing;
    rep.distance_shrinks = within || rep.distances[n - 1] <= 0.5 * rep.distances[start];
  }
  return rep;
}

FlattestReport flattest_min_experiment(const ModelParams& model, const std::vector<double>& epsilons,
                                       const FlattestOptions& opt) {
  if (model.potential.form != PotentialSpec::Form::polynomial_product) {
    throw ConfigError("flattest-minimum experiment needs a polynomial_product potential");
  }
  FlattestReport rep;
  const auto& minima = model.potential.minima;
  double bmax = 0.0;
  for (const auto& mj : minima) bmax = std::max(bmax, mj.exponent);
  int count = 0;
  const std::vector<Point> zeros = model.potential.zeros(model.dim);
  for (size_t j = 0; j < minima.size(); ++j) {
    if (minima[j].exponent == bmax) {
      ++count;
      rep.predicted = zeros[j];
    }
  }
  rep.determined = count == 1;
  if (!rep.determined) rep.predicted.reset();

  const std::vector<Point>& centers = zeros;
  const auto ex = RescalingExponents::from(model.dim, model.hamiltonian.gamma, model.coupling.alpha);
  std::vector<double> spacing;
  for (double eps : epsilons) {
    ModelParams mp = model;
    mp.epsilon = eps;
    const double h = std::min(opt.max_spacing, opt.rescaled_spacing * std::pow(eps, ex.len));
    const Grid<double> grid(model.dim, opt.half_width, odd_points(opt.half_width, h));
    const std::vector<MFGSolution> sols = solve_mfg_multistart(grid, mp, opt.solver, centers);
    FlattestRun run;
    run.epsilon = eps;
    run.x_eps = sols.front().argmin_x;
    run.energy = sols.front().energy.total;
    for (const auto& s : sols) run.start_energies.push_back(s.energy.total);
    run.distance_to_selected = rep.predicted ? (run.x_eps - *rep.predicted).norm()
                                             : nearest_zero_distance(model.potential, run.x_eps);
    rep.runs.push_back(run);
    spacing.push_back(grid.spacing());
  }
  rep.converges = !rep.runs.empty();
  for (size_t k = 1; k < rep.runs.size(); ++k) {
    if (rep.runs[k].distance_to_selected > rep.runs[k - 1].distance_to_selected + spacing[k]) rep.converges = false;
  }
  if (!rep.runs.empty()) rep.final_distance = rep.runs.back().distance_to_selected;
  return rep;
}

GroundStateReport ground_state(const ModelParams& model, const std::vector<double>& deltas, double b,
                               const GroundStateOptions& opt) {
  GroundStateReport rep;
  rep.grid = Grid<double>(model.dim, opt.half_width, opt.points);
  const Grid<double>& grid = rep.grid;
  SolverConfig cfg = opt.solver;
  ScalarField prev_rec;
  std::vector<double> dist;
  for (double delta : deltas) {
    ModelParams mp = model;
    mp.potential = PotentialSpec::power_law(b, delta);
    const MFGSolution sol = solve_mfg(grid, mp, cfg);
    cfg.initial_m = sol.m;
    cfg.initial_u = sol.u;
    cfg.initial_lambda = sol.lambda;
    GroundStateStep step;
    step.delta = delta;
    step.lambda = sol.lambda;
    step.x_delta = sol.argmin_x;
    step.energy = sol.energy.total;
    const ScalarField rec = recentre(grid, sol.m, sol.argmin_x);
    if (prev_rec.size() > 0) {
      step.l1_to_previous = integrate(grid, (rec - prev_rec).cwiseAbs().eval());
      dist.push_back(step.l1_to_previous);
    }
    prev_rec = rec;
    rep.steps.push_back(step);
  }
  rep.cauchy = dist.size() >= 2;
  for (size_t k = 1; k < dist.size(); ++k) {
    if (!(dist[k] * 1.5 <= dist[k - 1])) rep.cauchy = false;
  }

  // Potential-free limit with the local coupling.
  ModelParams limit_model = model;
  limit_model.potential = PotentialSpec::power_law(b, 0.0);
  SolverConfig lcfg = cfg;
  lcfg.mollified = false;
  rep.limit = solve_mfg(grid, limit_model, lcfg);
  const ScalarField rhs = local_coupling(model.coupling, rep.limit.m);
  const ScalarField hres = hjb_residual(grid, HJBProblem{rhs, model.epsilon, model.hamiltonian}, rep.limit.u,
                                        rep.limit.lambda, lcfg.hjb_scheme);
  rep.limit_residual = hres.cwiseAbs().maxCoeff() / (1.0 + rhs.cwiseAbs().maxCoeff());
  rep.fp_residual = rep.limit.constraint_residual;
  const ScalarField rec = recentre(grid, rep.limit.m, rep.limit.argmin_x);
  if (prev_rec.size() > 0) rep.limit_l1_to_last = integrate(grid, (rec - prev_rec).cwiseAbs().eval());
  rep.decay = decay_fit(grid, rep.limit.m, rep.limit.argmin_x);
  rep.minimality = minimizer_verification(grid, rep.limit, limit_model, lcfg, opt.competitors, opt.seed);
  return rep;
}

NlsSolution solve_nls_ground_state(const Grid<double>& grid, const ModelParams& model, const HopfColeOptions& opt) {
  model.validate();
  if (model.hamiltonian.gamma != 2.0 || model.hamiltonian.c_h != 0.5) {
    throw ConfigError("Hopf-Cole reduction needs the quadratic Hamiltonian |p|^2/2 (gamma = 2, c_h = 1/2)");
  }
  if (!(opt.relaxation > 0.0 && opt.relaxation <= 1.0)) throw ConfigError("relaxation must lie in (0, 1]");
  const double eps = model.epsilon;
  const Eigen::Index n = grid.size();
  const ScalarField omega = grid.quadrature_weights();
  const ScalarField v_pot = potential_field(model.potential, grid);
  const Eigen::SparseMatrix<double> kinetic = -2.0 * eps * eps * laplacian_matrix(grid);
  Eigen::SparseMatrix<double> eye(n, n);
  eye.setIdentity();

  SolverConfig init;
  ScalarField m = initial_density(grid, model, init);
  ScalarField x = m.cwiseSqrt();
  NlsSolution out;
  auto wnorm2 = [&](const ScalarField& y) { return omega.dot(y.cwiseAbs2()); };
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const ScalarField d = v_pot + local_coupling(model.coupling, m);
    const Eigen::SparseMatrix<double> a = kinetic + Eigen::SparseMatrix<double>(d.asDiagonal());
    const double sigma = d.minCoeff() - 1e-3 * (1.0 + std::abs(d.minCoeff()));
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a - sigma * eye);
    if (lu.info() != Eigen::Success) throw SolverError("Hopf-Cole shifted operator is singular", {});
    x /= std::sqrt(wnorm2(x));
    for (int k = 0; k < 1000; ++k) {
      ScalarField y = lu.solve(x);
      y /= std::sqrt(wnorm2(y));
      if (y.sum() < 0.0) y = -y;
      const double change = (y - x).cwiseAbs().maxCoeff();
      x = std::move(y);
      if (change < 1e-14) break;
    }
    const ScalarField m_new = model.mass * x.cwiseAbs2() / wnorm2(x);
    const ScalarField m_next = (1.0 - opt.relaxation) * m + opt.relaxation * m_new;
    const double change = (m_next - m).cwiseAbs().maxCoeff() / m_next.maxCoeff();
    m = m_next;
    out.iterations = it;
    if (change < opt.tolerance) break;
    if (it == opt.max_iterations) throw SolverError("Hopf-Cole iteration did not converge", {});
  }
  // Eigenvalue of the operator frozen at the converged density.
  const ScalarField d = v_pot + local_coupling(model.coupling, m);
  const ScalarField v = m.cwiseSqrt();
  const ScalarField av = kinetic * v + d.cwiseProduct(v);
  out.lambda = omega.dot(v.cwiseProduct(av)) / omega.dot(v.cwiseAbs2());
  out.v2 = m;
  return out;
}

HopfColeReport hopf_cole_crosscheck(const Grid<double>& grid, const ModelParams& model, const MFGSolution& mfg,
                                    const HopfColeOptions& opt) {
  const NlsSolution nls = solve_nls_ground_state(grid, model, opt);
  HopfColeReport rep;
  rep.lambda_nls = nls.lambda;
  rep.lambda_mfg = mfg.lambda;
  rep.iterations = nls.iterations;
  rep.v2 = nls.v2;
  const double mmax = mfg.m.maxCoeff();
  rep.density_error = (nls.v2 - mfg.m).cwiseAbs().maxCoeff() / mmax;
  rep.lambda_error = std::abs(nls.lambda - mfg.lambda) / std::max(std::abs(mfg.lambda), 1e-300);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  const double umin = mfg.u.minCoeff();
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (mfg.m[i] < 1e-6 * mmax) continue;
    const double diff = -model.epsilon * std::log(mfg.m[i] / mmax) - (mfg.u[i] - umin);
    lo = std::min(lo, diff);
    hi = std::max(hi, diff);
  }
  rep.log_identity_error = 0.5 * (hi - lo);
  return rep;
}

}  // namespace emfg
