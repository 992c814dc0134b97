#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "emfg/mfg.hpp"

using namespace emfg;

namespace {

ModelParams lq_model(double mass = 1.0) {
  ModelParams m;
  m.hamiltonian = {0.5, 2.0};
  m.coupling = {0.0, 1.0};
  m.potential = PotentialSpec::power_law(2.0, 0.5);
  m.mass = mass;
  m.epsilon = 0.25;
  return m;
}

ModelParams coupled_model() {
  ModelParams m = lq_model();
  m.coupling = {1.0, 1.0};
  m.potential = PotentialSpec::power_law(2.0, 1.0);
  return m;
}

const Grid<double>& lq_grid() {
  static const Grid<double> g(1, 8.0, 801);
  return g;
}

const Grid<double>& coupled_grid() {
  static const Grid<double> g(1, 4.0, 801);
  return g;
}

KPair shifted_gibbs(const Grid<double>& g, double eps, double mass, double shift) {
  FPProblem p;
  p.drift = sample(g, [&](const Point& x) { return x[0] - shift; });
  p.epsilon = eps;
  p.mass = mass;
  const auto s = solve_stationary_fp(g, p);
  return {s.m, s.w, eps, mass};
}

}  // namespace

TEST(MFG, DecoupledLinearQuadratic) {
  const auto& g = lq_grid();
  const ModelParams model = lq_model();
  const auto s = solve_mfg(g, model);
  EXPECT_TRUE(s.converged);
  EXPECT_EQ(s.fixedpoint_iterations, 1);
  EXPECT_NEAR(s.lambda, 0.25, 1e-3);
  const double c = 1.0 / std::sqrt(2.0 * M_PI * 0.25);
  double eu = 0.0, em = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double x = g.coordinate(i)[0];
    if (std::abs(x) <= 6.0) eu = std::max(eu, std::abs(s.u[i] - 0.5 * x * x));
    em = std::max(em, std::abs(s.m[i] - c * std::exp(-2.0 * x * x)));
  }
  EXPECT_LE(eu, 1e-3);
  EXPECT_LE(em, 1e-3 * c);
  EXPECT_LE(s.duality_gap, 1e-3 * std::abs(s.lambda * model.mass));
  EXPECT_LE(s.boundary_decay, 1e-8);
}

TEST(MFG, CoupledCertificates) {
  const auto& g = coupled_grid();
  const ModelParams model = coupled_model();
  const auto s = solve_mfg(g, model);
  EXPECT_TRUE(s.converged);
  EXPECT_LT(s.lambda, 0.0);
  EXPECT_LE(s.duality_gap, 1e-3 * std::abs(s.lambda * model.mass));
  EXPECT_LE(s.optimality_residual, 1e-6);
  EXPECT_LE(s.constraint_residual, 1e-8);
  EXPECT_NEAR(integrate(g, s.m), model.mass, 1e-10);
  EXPECT_EQ(s.u.minCoeff(), 0.0);
  EXPECT_NEAR(duality_certificate(g, s, model), s.duality_gap, 1e-14);
  EXPECT_NEAR(optimality_residual(g, s, model), s.optimality_residual, 1e-14);
}

TEST(MFG, LocalCouplingClosesDiscreteIdentity) {
  SolverConfig cfg;
  cfg.mollified = false;
  const ModelParams model = coupled_model();
  const auto s = solve_mfg(coupled_grid(), model, cfg);
  EXPECT_LE(s.duality_gap, 1e-10 * std::abs(s.lambda));
  EXPECT_NEAR(s.discrete_duality_gap, s.duality_gap, 1e-12);
}

TEST(MFG, CertificateDetectsSuboptimalPairs) {
  const auto& g = coupled_grid();
  const ModelParams model = coupled_model();
  const auto s = solve_mfg(g, model);
  for (double shift : {0.3, -0.6}) {
    MFGSolution other = s;
    const KPair p = shifted_gibbs(g, model.epsilon, model.mass, shift);
    other.m = p.m;
    other.w = p.w;
    EXPECT_GE(duality_certificate(g, other, model), 10.0 * s.duality_gap);
  }
}

TEST(MFG, DoubledMassCertificate) {
  const auto& g = lq_grid();
  const auto a = solve_mfg(g, lq_model(1.0));
  const auto b = solve_mfg(g, lq_model(2.0));
  EXPECT_NEAR(b.lambda, a.lambda, 1e-12);
  EXPECT_LT((b.m - 2.0 * a.m).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(b.energy.total, 2.0 * a.energy.total, 1e-12);
  EXPECT_LE(b.duality_gap, 1e-3 * std::abs(b.lambda * 2.0));
}

TEST(MFG, OptimalityResidualSeesPerturbedValue) {
  const auto& g = coupled_grid();
  const ModelParams model = coupled_model();
  const auto s = solve_mfg(g, model);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1e-2);
  MFGSolution noisy = s;
  for (auto& v : noisy.u) v += n(rng);
  const double base = std::max(s.optimality_residual, 1e-12);
  EXPECT_GE(optimality_residual(g, noisy, model), 10.0 * base);
}

TEST(MFG, OptimalityResidualIgnoresEmptyRegions) {
  const auto& g = coupled_grid();
  const ModelParams model = coupled_model();
  MFGSolution s = solve_mfg(g, model);
  const double base = optimality_residual(g, s, model);
  for (Eigen::Index i = 0; i < 50; ++i) {
    s.m[i] = 0.0;
    s.w.row(i).setZero();
    s.u[i] += 1.0 + 0.1 * static_cast<double>(i);
  }
  EXPECT_NEAR(optimality_residual(g, s, model), base, 1e-12);
}

TEST(MFG, MinimizerAgainstRandomCompetitors) {
  for (const auto& [model, grid] : {std::pair{lq_model(), &lq_grid()}, std::pair{coupled_model(), &coupled_grid()}}) {
    const auto s = solve_mfg(*grid, model);
    const auto rep = minimizer_verification(*grid, s, model, {}, 50, 11);
    EXPECT_EQ(rep.trials, 50);
    EXPECT_EQ(rep.passed, 50);
    EXPECT_TRUE(rep.all_pass);
    EXPECT_GE(rep.min_margin, -rep.tolerance);
  }
}

TEST(MFG, CompetitorsAreFeasible) {
  const auto& g = coupled_grid();
  const ModelParams model = coupled_model();
  const auto s = solve_mfg(g, model);
  const auto comps = random_competitors(g, s, model, 12, 5);
  EXPECT_EQ(comps.size(), 12u);
  for (const auto& c : comps) {
    EXPECT_NEAR(integrate(g, c.pair.m), model.mass, 1e-8 * model.mass) << c.kind;
    const auto r = constraint_residual(g, c.pair);
    EXPECT_LE(r.max, 1e-8 * r.scale) << c.kind;
    EXPECT_GE(c.pair.m.minCoeff(), -1e-12) << c.kind;
  }
}

TEST(MFG, SolutionIsItsOwnCompetitor) {
  const auto& g = coupled_grid();
  const ModelParams model = coupled_model();
  const auto s = solve_mfg(g, model);
  const auto e = energy(g, {s.m, s.w, model.epsilon, model.mass}, model, true);
  EXPECT_DOUBLE_EQ(e.total, s.energy.total);
}

TEST(MFG, MovingMassOffCentreRaisesEnergy) {
  const auto& g = lq_grid();
  const ModelParams model = lq_model();
  const auto s = solve_mfg(g, model);
  for (double shift : {0.25, 1.0}) {
    const auto e = energy(g, shifted_gibbs(g, model.epsilon, model.mass, shift), model, true);
    EXPECT_GT(e.total, s.energy.total + 0.1 * shift * shift);
  }
}

TEST(MFG, MultistartFindsOneEquilibrium) {
  const auto& g = coupled_grid();
  const ModelParams model = coupled_model();
  std::vector<Point> centres;
  for (double x : {-1.0, -0.5, 0.0, 0.5, 1.0}) centres.push_back(Point::Constant(1, x));
  const auto sols = solve_mfg_multistart(g, model, {}, centres);
  ASSERT_EQ(sols.size(), 5u);
  const double scale = std::abs(sols.front().energy.total) + 1.0;
  for (const auto& s : sols) EXPECT_NEAR(s.energy.total, sols.front().energy.total, 1e-6 * scale);
  for (size_t k = 1; k < sols.size(); ++k) EXPECT_LE(sols[k - 1].energy.total, sols[k].energy.total);
}

TEST(MFG, Deterministic) {
  const auto& g = coupled_grid();
  const auto a = solve_mfg(g, coupled_model());
  const auto b = solve_mfg(g, coupled_model());
  EXPECT_EQ(a.lambda, b.lambda);
  EXPECT_TRUE(a.m == b.m);
  EXPECT_TRUE(a.u == b.u);
  EXPECT_EQ(a.history, b.history);
}

TEST(MFG, ExhaustedBudgetRaises) {
  SolverConfig cfg;
  cfg.max_outer_iterations = 1;
  try {
    solve_mfg(coupled_grid(), coupled_model(), cfg);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_FALSE(e.history().empty());
  }
}

TEST(MFG, RejectsBadConfiguration) {
  SolverConfig cfg;
  cfg.damping = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(solve_mfg(coupled_grid(), coupled_model(), cfg), ConfigError);
  cfg.damping = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.tolerance = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  ModelParams bad = coupled_model();
  bad.coupling.alpha = 2.5;
  EXPECT_THROW(solve_mfg(coupled_grid(), bad), ConfigError);
}

TEST(Subadditivity, PositiveSymmetricAndVanishingAtEndpoints) {
  ModelParams model;
  model.hamiltonian = {0.5, 2.0};
  model.coupling = {1.0, 1.0};
  model.potential = PotentialSpec::power_law(2.0);
  model.epsilon = 0.1;
  const Grid<double> g(1, 2.0, 801);
  const auto half = subadditivity_gap(g, model, {}, 0.5);
  EXPECT_GT(half.gap, 0.0);
  const auto lo = subadditivity_gap(g, model, {}, 0.25);
  const auto hi = subadditivity_gap(g, model, {}, 0.75);
  EXPECT_NEAR(lo.gap, hi.gap, 1e-10);
  EXPECT_GT(lo.gap, 0.0);
  double prev = lo.gap;
  for (double a : {0.1, 0.02}) {
    const double gap = subadditivity_gap(g, model, {}, a).gap;
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_LE(prev, 0.25 * half.gap);
  EXPECT_THROW(subadditivity_gap(g, model, {}, 0.0), ConfigError);
  EXPECT_THROW(subadditivity_gap(g, model, {}, 1.0), ConfigError);
}
