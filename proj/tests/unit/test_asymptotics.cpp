#include <gtest/gtest.h>

#include <cmath>

#include "emfg/asymptotics.hpp"

using namespace emfg;

namespace {

Point vec1(double x) { return Point::Constant(1, x); }

ModelParams coupled_model(double eps) {
  ModelParams m;
  m.hamiltonian = {0.5, 2.0};
  m.coupling = {1.0, 1.0};
  m.potential = PotentialSpec::power_law(2.0);
  m.epsilon = eps;
  return m;
}

ModelParams two_well(double b_plus, double b_minus) {
  ModelParams m = coupled_model(0.4);
  m.potential = PotentialSpec::product({{vec1(1.0), b_plus}, {vec1(-1.0), b_minus}});
  return m;
}

const SweepResult& coupled_sweep() {
  static const SweepResult r = run_sweep(coupled_model(1.0), {0.2, 0.1, 0.05, 0.025}, SweepOptions{});
  return r;
}

}  // namespace

TEST(Rescale, UnitViscosityIsIdentity) {
  const ModelParams model = coupled_model(1.0);
  const Grid<double> g(1, 4.0, 401);
  const auto s = solve_mfg(g, model);
  ASSERT_NEAR(s.argmin_x[0], 0.0, 1e-12);
  const auto r = rescale_solution(g, s, model);
  EXPECT_EQ(r.grid.points_per_axis(), g.points_per_axis());
  EXPECT_DOUBLE_EQ(r.grid.half_width(), g.half_width());
  EXPECT_LT((r.m_bar - s.m).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((r.u_bar - s.u).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_DOUBLE_EQ(r.lambda_tilde, s.lambda);
}

TEST(Rescale, ExponentsAndCoherence) {
  const auto e = RescalingExponents::from(1, 2.0, 1.0);
  EXPECT_EQ(e.len, 2.0);
  EXPECT_EQ(e.mass, 2.0);
  EXPECT_EQ(e.lam, 2.0);
  EXPECT_EQ(e.u, -1.0);
  for (int n : {1, 2, 3}) {
    for (double gamma : {1.5, 2.0, 4.0}) {
      const double alpha = 0.5 * gamma / (gamma - 1.0) / n;
      const auto r = RescalingExponents::from(n, gamma, alpha);
      EXPECT_EQ(r.mass, n * r.len);
      EXPECT_EQ(r.lam, alpha * r.mass);
    }
  }
}

TEST(Rescale, MassIsInvariant) {
  const ModelParams model = coupled_model(0.1);
  SweepOptions opt;
  const Grid<double> g = sweep_grid(model, opt);
  const auto s = solve_mfg(g, model);
  const auto r = rescale_solution(g, s, model);
  EXPECT_NEAR(integrate(r.grid, r.m_bar) + r.truncation_loss, model.mass, 1e-12);
  EXPECT_LT(std::abs(r.truncation_loss), 1e-6 * model.mass);
  EXPECT_NEAR(r.lambda_tilde, std::pow(0.1, 2.0) * s.lambda, 1e-15);
}

TEST(FitExponent, Examples) {
  const std::vector<double> xs{0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<double> inv_sq, flat(xs.size(), 3.0);
  for (double x : xs) inv_sq.push_back(1.0 / (x * x));
  const auto a = fit_exponent(xs, inv_sq);
  EXPECT_NEAR(a.slope, -2.0, 1e-12);
  EXPECT_NEAR(a.r2, 1.0, 1e-12);
  EXPECT_NEAR(fit_exponent(xs, flat).slope, 0.0, 1e-12);
  EXPECT_THROW(fit_exponent({1.0}, {1.0}), ShapeError);
  EXPECT_THROW(fit_exponent({1.0, -1.0}, {1.0, 1.0}), DomainError);
}

TEST(Concentration, RadiusExamples) {
  const Grid<double> g(1, 8.0, 1601);
  const double eps = 0.25;
  FPProblem p;
  p.drift = sample(g, [](const Point& x) { return x[0]; });
  p.epsilon = eps;
  const auto s = solve_stationary_fp(g, p);
  EXPECT_EQ(concentration_radius(g, s.m, vec1(0.0), 0.0), 0.0);
  EXPECT_NEAR(concentration_radius(g, s.m, vec1(0.0), 0.9), 1.6448536269514722 * std::sqrt(eps), 1e-2);
  EXPECT_NEAR(mass_within(g, s.m, vec1(0.0), 8.0), 1.0, 1e-12);
}

TEST(DecayFit, ExponentialAndGaussian) {
  const Grid<double> g(1, 20.0, 2001);
  const ScalarField e = sample(g, [](const Point& x) { return 0.5 * std::exp(-std::abs(x[0])); });
  const auto fe = decay_fit(g, e, vec1(0.0));
  EXPECT_NEAR(fe.c2, 1.0, 1e-3);
  EXPECT_GE(fe.c1, 0.5);
  EXPECT_LE(fe.c1, 0.56);
  EXPECT_TRUE(fe.envelope_holds);
  const Grid<double> h(1, 4.0, 401);
  const ScalarField gauss = sample(h, [](const Point& x) { return std::exp(-x[0] * x[0]); });
  const auto fg = decay_fit(h, gauss, vec1(0.0));
  EXPECT_GT(fg.c2, 0.0);
  EXPECT_TRUE(fg.envelope_holds);
}

TEST(Sweep, CoupledScaling) {
  const auto& r = coupled_sweep();
  ASSERT_EQ(r.records.size(), 4u);
  std::vector<double> eps, lam, tilde, sup;
  for (const auto& rec : r.records) {
    ASSERT_TRUE(rec.ok) << rec.error;
    eps.push_back(rec.epsilon);
    lam.push_back(std::abs(rec.lambda));
    tilde.push_back(rec.lambda_tilde);
    sup.push_back(rec.sup_m_bar);
    EXPECT_LT(rec.lambda_tilde, 0.0);
    EXPECT_LT(rec.truncation_loss, 1e-4);
    EXPECT_LE(rec.boundary_decay, 1e-8);
    EXPECT_LE(rec.duality_gap, 1e-3 * std::abs(rec.lambda));
  }
  EXPECT_NEAR(fit_exponent(eps, lam).slope, -2.0, 0.15 * 2.0);
  EXPECT_LE(*std::max_element(tilde.begin(), tilde.end()) / *std::min_element(tilde.begin(), tilde.end()), 3.0);
  EXPECT_LE(*std::max_element(sup.begin(), sup.end()) / *std::min_element(sup.begin(), sup.end()), 3.0);
  const auto c = concentration_report(r.records);
  EXPECT_TRUE(c.radius_stable);
  EXPECT_LE(c.radius_ratio, 1.5);
  EXPECT_TRUE(c.distance_nonincreasing || c.distance_shrinks);
}

TEST(Sweep, MassFractionMonotone) {
  const auto& r = coupled_sweep();
  for (const auto& rec : r.records) {
    for (size_t k = 1; k < rec.mass_fraction.size(); ++k) {
      EXPECT_GE(rec.mass_fraction[k], rec.mass_fraction[k - 1]);
    }
    EXPECT_LE(rec.mass_fraction.back(), 1.0 + 1e-12);
  }
  // The rescaled confinement weakens as eps shrinks, so fixed-R fractions
  // settle onto their limit rather than grow; the tail must be Cauchy.
  const size_t n = r.records.size();
  for (size_t k = 0; k < r.records[0].radii.size(); ++k) {
    const double d1 = std::abs(r.records[n - 2].mass_fraction[k] - r.records[n - 3].mass_fraction[k]);
    const double d2 = std::abs(r.records[n - 1].mass_fraction[k] - r.records[n - 2].mass_fraction[k]);
    EXPECT_LE(d2, d1) << "radius " << r.records[0].radii[k];
    EXPECT_LT(d2, 1e-3);
  }
  for (const auto& rec : r.records) {
    for (size_t k = 0; k < rec.radii.size(); ++k) {
      if (rec.radii[k] >= rec.width_r) EXPECT_GE(rec.mass_fraction[k], 1.0 - rec.eta - 1e-9);
      else EXPECT_LT(rec.mass_fraction[k], 1.0 - rec.eta);
    }
  }
}

TEST(Sweep, DecoupledControlScalesDifferently) {
  ModelParams model = coupled_model(1.0);
  model.coupling.c_f = 0.0;
  model.potential = PotentialSpec::power_law(2.0, 0.5);
  // The Gaussian has rescaled width eps^{1/2 - 2}, far wider than the coupled profile.
  SweepOptions opt;
  opt.window = 400.0;
  opt.rescaled_spacing = 0.5;
  const auto r = run_sweep(model, {0.2, 0.1}, opt);
  for (const auto& rec : r.records) {
    ASSERT_TRUE(rec.ok) << rec.error;
    EXPECT_NEAR(rec.lambda, rec.epsilon, 1e-3 * rec.epsilon);
    EXPECT_NEAR(rec.lambda_tilde, std::pow(rec.epsilon, 3.0), 1e-3 * std::pow(rec.epsilon, 3.0));
  }
}

TEST(Sweep, ConcentrationReportFlags) {
  std::vector<SweepRecord> recs(3);
  const double widths[] = {2.0, 2.1, 2.2};
  const double dist[] = {0.2, 0.1, 0.05};
  for (int k = 0; k < 3; ++k) {
    recs[k].ok = true;
    recs[k].epsilon = 0.4 / (1 << k);
    recs[k].width_r = widths[k];
    recs[k].distance_to_zero = dist[k];
    recs[k].spacing = 1e-3;
  }
  const auto c = concentration_report(recs);
  EXPECT_TRUE(c.radius_stable);
  EXPECT_NEAR(c.radius_ratio, 2.2 / 2.1, 1e-12);
  EXPECT_TRUE(c.distance_nonincreasing);
  EXPECT_TRUE(c.distance_shrinks);
  recs[2].width_r = 4.0;
  EXPECT_FALSE(concentration_report(recs).radius_stable);
}

TEST(Flattest, SymmetricExponentsAreUndetermined) {
  const auto rep = flattest_min_experiment(two_well(2.0, 2.0), {0.4}, FlattestOptions{});
  EXPECT_FALSE(rep.determined);
  EXPECT_FALSE(rep.predicted.has_value());
}

TEST(Flattest, SelectsTheFlatterZero) {
  for (const auto& [bp, bm, target] : {std::tuple{4.0, 2.0, 1.0}, std::tuple{2.0, 4.0, -1.0}}) {
    const auto rep = flattest_min_experiment(two_well(bp, bm), {0.4, 0.2, 0.1}, FlattestOptions{});
    ASSERT_TRUE(rep.determined);
    EXPECT_EQ((*rep.predicted)[0], target);
    ASSERT_EQ(rep.runs.size(), 3u);
    EXPECT_TRUE(rep.converges);
    EXPECT_LT(rep.final_distance, 0.2);
    EXPECT_LT(std::abs(rep.runs.back().x_eps[0] - target), 0.2);
  }
}

TEST(GroundState, ConvergesToPotentialFreeLimit) {
  ModelParams model = coupled_model(1.0);
  model.mass = 20.0;
  GroundStateOptions opt;
  const auto rep = ground_state(model, {0.5, 0.25, 0.125, 0.0625}, 2.0, opt);
  ASSERT_EQ(rep.steps.size(), 4u);
  EXPECT_NEAR(rep.steps.front().x_delta[0], 0.0, 1e-12);
  EXPECT_TRUE(rep.cauchy);
  for (size_t k = 2; k < rep.steps.size(); ++k) {
    EXPECT_LT(rep.steps[k].l1_to_previous, rep.steps[k - 1].l1_to_previous);
  }
  EXPECT_LE(rep.limit_residual, 10.0 * opt.solver.hjb_tolerance);
  EXPECT_LE(rep.fp_residual, 10.0 * opt.solver.hjb_tolerance);
  EXPECT_GT(rep.decay.c2, 0.0);
  EXPECT_TRUE(rep.decay.envelope_holds);
  EXPECT_TRUE(rep.minimality.all_pass);
  EXPECT_EQ(rep.minimality.trials, opt.competitors);
}

TEST(HopfCole, DecoupledHarmonicOscillator) {
  ModelParams model = coupled_model(0.25);
  model.coupling.c_f = 0.0;
  model.potential = PotentialSpec::power_law(2.0, 0.5);
  const Grid<double> g(1, 6.0, 601);
  const auto nls = solve_nls_ground_state(g, model);
  EXPECT_NEAR(nls.lambda, 0.25, 1e-3);
  const double c = 1.0 / std::sqrt(2.0 * M_PI * 0.25);
  double err = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double x = g.coordinate(i)[0];
    err = std::max(err, std::abs(nls.v2[i] - c * std::exp(-2.0 * x * x)));
  }
  EXPECT_LE(err, 1e-3 * c);
  SolverConfig cfg;
  cfg.mollified = false;
  const auto rep = hopf_cole_crosscheck(g, model, solve_mfg(g, model, cfg));
  EXPECT_LE(rep.density_error, 1e-3);
  EXPECT_LE(rep.lambda_error, 1e-3);
}

TEST(HopfCole, CoupledCrossCheckAndLogIdentity) {
  ModelParams model = coupled_model(0.25);
  model.potential = PotentialSpec::power_law(2.0, 0.5);
  const Grid<double> g(1, 6.0, 601);
  SolverConfig cfg;
  cfg.mollified = false;
  const auto sol = solve_mfg(g, model, cfg);
  const auto rep = hopf_cole_crosscheck(g, model, sol);
  EXPECT_LE(rep.density_error, 1e-2);
  EXPECT_LE(rep.lambda_error, 1e-2);
  EXPECT_LE(rep.log_identity_error, 1e-2);
  EXPECT_NEAR(integrate(g, rep.v2), model.mass, 1e-10);
}

TEST(HopfCole, RequiresQuadraticHamiltonian) {
  ModelParams model = coupled_model(0.25);
  model.hamiltonian = {0.5, 3.0};
  model.coupling.alpha = 0.5;
  const Grid<double> g(1, 4.0, 201);
  EXPECT_THROW(solve_nls_ground_state(g, model), ConfigError);
  model.hamiltonian = {1.0, 2.0};
  EXPECT_THROW(solve_nls_ground_state(g, model), ConfigError);
}
