#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "emfg/energy.hpp"
#include "emfg/fokker_planck.hpp"

using namespace emfg;

namespace {

Point vec1(double x) { return Point::Constant(1, x); }

ModelParams exponential_model(double eps) {
  ModelParams m;
  m.hamiltonian = {1.0, 2.0};
  m.coupling = {1.0, 1.0};
  m.potential = PotentialSpec::power_law(1.0);
  m.mass = 1.0;
  m.epsilon = eps;
  return m;
}

KPair gradient_pair(const Grid<double>& g, const ScalarField& m, double eps) {
  return {m, eps * gradient(g, m), eps, integrate(g, m)};
}

KPair ou_pair(const Grid<double>& g, double eps, double mass) {
  FPProblem p;
  p.drift = sample(g, [](const Point& x) { return x[0]; });
  p.epsilon = eps;
  p.mass = mass;
  const FPSolution s = solve_stationary_fp(g, p);
  return {s.m, s.w, eps, mass};
}

}  // namespace

TEST(ConstraintResidual, UniformDensityIsExact) {
  const Grid<double> g(2, 1.0, 21);
  const KPair p{ScalarField::Constant(g.size(), 0.25), VectorField::Zero(g.size(), 2), 0.3, 1.0};
  const auto r = constraint_residual(g, p);
  EXPECT_EQ(r.max, 0.0);
  EXPECT_EQ(r.l2, 0.0);
}

TEST(ConstraintResidual, GradientFluxIsSecondOrder) {
  // The compact Laplacian and the central divergence of the central gradient
  // differ by a fourth-derivative term, so w = eps grad m is feasible only to O(h^2).
  double prev = 0.0;
  for (int n : {201, 401, 801}) {
    const Grid<double> g(1, 6.0, n);
    const ScalarField m = sample(g, [](const Point& x) { return std::exp(-x[0] * x[0]) / std::sqrt(M_PI); });
    const auto r = constraint_residual(g, gradient_pair(g, m, 0.5));
    const double rel = r.max / r.scale;
    EXPECT_LT(rel, 0.05);
    if (prev > 0.0) EXPECT_LT(rel, prev / 3.0);
    prev = rel;
  }
}

TEST(ConstraintResidual, FokkerPlanckOutputIsFeasible) {
  const Grid<double> g(1, 6.0, 601);
  const KPair p = ou_pair(g, 0.5, 1.0);
  const auto r = constraint_residual(g, p);
  EXPECT_LT(r.max, 1e-10 * r.scale);
  EXPECT_NEAR(integrate(g, p.m), 1.0, 1e-12);
}

TEST(KineticDensity, Examples) {
  const HamiltonianSpec h{1.0, 2.0};
  EXPECT_EQ(kinetic_density(h, 0.0, vec1(0.0)), 0.0);
  EXPECT_EQ(kinetic_density(h, 2.0, vec1(0.0)), 0.0);
  EXPECT_NEAR(kinetic_density(h, 1.0, vec1(2.0)), 1.0, 1e-15);
  EXPECT_EQ(kinetic_density(h, 0.0, vec1(1.0)), kInfiniteKinetic);
  EXPECT_NEAR(kinetic_density(h, 1e-20, vec1(1e-3), 1.0), 2.5e13, 1.0);
}

TEST(KineticDensity, SmallMassUsesStableForm) {
  const HamiltonianSpec h{0.5, 2.0};
  const double m = 1e-9, w = 3e-9;
  EXPECT_NEAR(kinetic_density(h, m, vec1(w)), m * lagrangian(h, vec1(w / m)), 1e-22);
}

TEST(KineticDensity, JointlyConvex) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> um(0.01, 3.0), uw(-2.0, 2.0);
  for (double g : {1.5, 2.0, 3.0}) {
    const HamiltonianSpec h{0.7, g};
    for (int k = 0; k < 300; ++k) {
      const double m1 = um(rng), m2 = um(rng);
      Point w1(2), w2(2);
      w1 << uw(rng), uw(rng);
      w2 << uw(rng), uw(rng);
      const double mid = kinetic_density(h, 0.5 * (m1 + m2), (0.5 * (w1 + w2)).eval(), 3.0);
      const double avg = 0.5 * (kinetic_density(h, m1, w1, 3.0) + kinetic_density(h, m2, w2, 3.0));
      EXPECT_LE(mid, avg * (1.0 + 1e-12) + 1e-15);
    }
  }
}

TEST(Energy, ExponentialDensityClosedForm) {
  // The kink at the origin costs O(h) kinetic energy, hence the fine grid.
  const Grid<double> g(1, 25.0, 50001);
  const ScalarField m = sample(g, [](const Point& x) { return 0.5 * std::exp(-std::abs(x[0])); });
  for (double eps : {0.5, 1.0}) {
    const auto e = energy_unchecked(g, gradient_pair(g, m, eps), exponential_model(eps), false);
    EXPECT_NEAR(e.kinetic, eps * eps / 4.0, 1e-3);
    EXPECT_NEAR(e.potential, 1.0, 1e-3);
    EXPECT_NEAR(e.coupling, -0.125, 1e-3);
    EXPECT_NEAR(e.total, eps * eps / 4.0 + 0.875, 2e-3);
    EXPECT_DOUBLE_EQ(e.total, e.kinetic + e.potential + e.coupling);
  }
}

TEST(Energy, UniformDensityHasNoKinetic) {
  const Grid<double> g(1, 2.0, 101);
  ModelParams model = exponential_model(1.0);
  model.mass = 4.0;
  const KPair p{ScalarField::Ones(g.size()), VectorField::Zero(g.size(), 1), 1.0, 4.0};
  const auto e = energy(g, p, model, false);
  EXPECT_EQ(e.kinetic, 0.0);
  EXPECT_NEAR(e.potential, 4.0, 1e-12);
  EXPECT_NEAR(e.coupling, -2.0, 1e-12);
}

TEST(Energy, InfiniteKineticWhereMassVanishes) {
  const Grid<double> g(1, 2.0, 101);
  ScalarField m = ScalarField::Ones(g.size());
  m[50] = 0.0;
  VectorField w = VectorField::Zero(g.size(), 1);
  w(50, 0) = 1.0;
  const auto e = energy_unchecked(g, {m, w, 1.0, integrate(g, m)}, exponential_model(1.0), false);
  EXPECT_TRUE(std::isinf(e.total));
  EXPECT_GT(e.total, 0.0);
}

TEST(Energy, RejectsInfeasiblePairs) {
  const Grid<double> g(1, 6.0, 601);
  const ModelParams model = exponential_model(0.5);
  KPair p = ou_pair(g, 0.5, 1.0);
  EXPECT_NO_THROW(energy(g, p, model, false));
  KPair heavy = p;
  heavy.m *= 1.01;
  EXPECT_THROW(energy(g, heavy, model, false), InfeasibleError);
  KPair bent = p;
  bent.w *= 1.2;
  try {
    energy(g, bent, model, false);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_GT(e.constraint_residual(), 1e-8);
  }
}

TEST(Energy, MollifiedConvergesToLocal) {
  const Grid<double> g(1, 6.0, 2401);
  const KPair p = ou_pair(g, 0.5, 1.0);
  ModelParams model = exponential_model(0.5);
  const double local = energy_unchecked(g, p, model, false).total;
  double prev = 0.0;
  for (double w : {0.4, 0.2, 0.1}) {
    model.mollifier_width = w;
    const double err = std::abs(energy_unchecked(g, p, model, true).total - local);
    if (prev > 0.0) EXPECT_LT(err, 0.6 * prev) << "width " << w;
    prev = err;
  }
  model.mollifier_width = 0.0;
  EXPECT_DOUBLE_EQ(effective_mollifier_width(g, model), 2.0 * g.spacing());
}

TEST(Energy, ScalingIdentity) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  const Grid<double> g(1, 3.0, 121);
  for (double alpha : {0.5, 1.0, 1.5}) {
    ModelParams model = exponential_model(0.7);
    model.coupling.alpha = alpha;
    ScalarField m(g.size());
    VectorField w(g.size(), 1);
    for (Eigen::Index i = 0; i < g.size(); ++i) m[i] = u(rng), w(i, 0) = u(rng) - 0.6;
    const KPair p{m, w, 0.7, integrate(g, m)};
    const auto e = energy_unchecked(g, p, model, false);
    for (double c : {1.5, 3.0}) {
      const KPair q{c * m, c * w, 0.7, c * p.mass};
      const auto ec = energy_unchecked(g, q, model, false);
      EXPECT_NEAR(ec.kinetic, c * e.kinetic, 1e-12 * c * e.kinetic);
      EXPECT_NEAR(ec.potential, c * e.potential, 1e-12 * c * e.potential);
      EXPECT_NEAR(ec.coupling, std::pow(c, alpha + 1.0) * e.coupling, 1e-12 * std::abs(ec.coupling));
    }
  }
}

TEST(LowerBound, ScalesWithLambdaExponent) {
  ModelParams model = exponential_model(1.0);
  model.potential = PotentialSpec::power_law(2.0);
  const auto b1 = energy_lower_bound(model, 16.0);
  EXPECT_DOUBLE_EQ(b1.exponent, 2.0);
  double prev = -(b1.value + b1.k);
  for (double eps : {0.5, 0.25}) {
    model.epsilon = eps;
    const auto b = energy_lower_bound(model, 16.0);
    EXPECT_NEAR(b.k, b1.k, 1e-14 * std::abs(b1.k));
    EXPECT_NEAR(b.c, b1.c, 1e-14 * b1.c);
    const double singular = -(b.value + b.k);
    EXPECT_NEAR(singular / prev, 4.0, 1e-12);
    prev = singular;
  }
}

TEST(LowerBound, HoldsOnFeasiblePairs) {
  const Grid<double> g(1, 6.0, 601);
  for (double eps : {1.0, 0.5, 0.25}) {
    ModelParams model = exponential_model(eps);
    model.potential = PotentialSpec::power_law(2.0);
    for (double mass : {1.0, 3.0}) {
      model.mass = mass;
      const KPair p = ou_pair(g, eps, mass);
      const auto e = energy(g, p, model, false);
      EXPECT_TRUE(std::isfinite(e.total));
      EXPECT_GE(e.total, energy_lower_bound(model, g.volume()).value);
    }
  }
}

TEST(LowerBound, HigherDimensionUsesSuppliedEnvelope) {
  ModelParams model = exponential_model(0.5);
  model.dim = 2;
  model.coupling.alpha = 0.5;
  const auto b = energy_lower_bound(model, 4.0, std::make_pair(1.0, 2.0));
  EXPECT_DOUBLE_EQ(b.k, 1.0);
  EXPECT_DOUBLE_EQ(b.c, 2.0);
  EXPECT_DOUBLE_EQ(b.exponent, RescalingExponents::from(2, 2.0, 0.5).lam);
  EXPECT_NEAR(b.value, -1.0 - 2.0 * std::pow(0.5, -b.exponent), 1e-12);
}
