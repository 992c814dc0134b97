#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "emfg/model.hpp"

using namespace emfg;

namespace {

Point vec(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

// sup_p [p.q - H(p)] restricted to p parallel to q, by dense sampling and ternary refinement.
double sup_oracle(const HamiltonianSpec& h, const Point& q) {
  const double r = q.norm();
  if (r == 0.0) return 0.0;
  const Point dir = q / r;
  auto phi = [&](double t) { return t * r - hamiltonian(h, (t * dir).eval()); };
  const double hi = 4.0 * std::pow(r / (h.c_h * h.gamma), 1.0 / (h.gamma - 1.0)) + 1.0;
  double best = 0.0, arg = 0.0;
  for (int k = 0; k <= 4000; ++k) {
    const double t = hi * k / 4000.0;
    if (phi(t) > best) best = phi(t), arg = t;
  }
  double a = std::max(0.0, arg - hi / 4000.0), b = arg + hi / 4000.0;
  for (int it = 0; it < 200; ++it) {
    const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
    if (phi(m1) < phi(m2)) a = m1;
    else b = m2;
  }
  return std::max(best, phi(0.5 * (a + b)));
}

ModelParams base_model() {
  ModelParams m;
  m.hamiltonian = {1.0, 2.0};
  m.coupling = {1.0, 1.0};
  m.potential = PotentialSpec::power_law(2.0);
  return m;
}

}  // namespace

TEST(Hamiltonian, Examples) {
  EXPECT_EQ(hamiltonian(HamiltonianSpec{1.0, 2.0}, vec({0.0, 0.0})), 0.0);
  EXPECT_DOUBLE_EQ(hamiltonian(HamiltonianSpec{1.0, 2.0}, vec({3.0, 4.0})), 25.0);
  EXPECT_DOUBLE_EQ(hamiltonian(HamiltonianSpec{2.0, 3.0}, vec({1.0})), 2.0);
}

TEST(Hamiltonian, GradientExamples) {
  const Point p = vec({0.3, -1.2});
  EXPECT_LT((grad_hamiltonian(HamiltonianSpec{1.0, 2.0}, p) - 2.0 * p).norm(), 1e-15);
  for (double g : {1.3, 2.0, 3.5}) {
    EXPECT_EQ(grad_hamiltonian(HamiltonianSpec{1.0, g}, vec({0.0, 0.0})).norm(), 0.0);
  }
  EXPECT_DOUBLE_EQ(grad_hamiltonian(HamiltonianSpec{1.0, 3.0}, vec({2.0}))[0], 12.0);
}

TEST(Hamiltonian, GradientGrowthBound) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 2.0);
  for (double g : {1.5, 2.0, 3.0}) {
    const HamiltonianSpec h{0.7, g};
    for (int k = 0; k < 50; ++k) {
      const Point p = vec({n(rng), n(rng)});
      EXPECT_LE(grad_hamiltonian(h, p).norm(), h.c_h * g * std::pow(p.norm(), g - 1.0) * (1.0 + 1e-14));
    }
  }
}

TEST(Lagrangian, Examples) {
  EXPECT_EQ(lagrangian(HamiltonianSpec{1.0, 2.0}, vec({0.0})), 0.0);
  EXPECT_NEAR(lagrangian(HamiltonianSpec{1.0, 2.0}, vec({2.0, 0.0})), 1.0, 1e-15);
}

TEST(Lagrangian, MatchesNumericSupremum) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (double g : {1.4, 2.0, 2.7, 4.0}) {
    for (double c : {0.5, 1.0, 2.0}) {
      const HamiltonianSpec h{c, g};
      for (int k = 0; k < 10; ++k) {
        const Point q = vec({u(rng), u(rng)});
        const double exact = lagrangian(h, q);
        EXPECT_NEAR(sup_oracle(h, q), exact, 1e-6 * std::max(1.0, exact)) << "gamma " << g << " c " << c;
      }
    }
  }
}

TEST(Lagrangian, FenchelInequalityAndEquality) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.5);
  for (double g : {1.5, 2.0, 3.0}) {
    const HamiltonianSpec h{0.8, g};
    for (int k = 0; k < 200; ++k) {
      const Point p = vec({n(rng), n(rng)}), q = vec({n(rng), n(rng)});
      EXPECT_LE(p.dot(q), hamiltonian(h, p) + lagrangian(h, q) + 1e-12);
      const Point qs = grad_hamiltonian(h, p);
      const double lhs = p.dot(qs), rhs = hamiltonian(h, p) + lagrangian(h, qs);
      EXPECT_NEAR(lhs, rhs, 1e-8 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST(Lagrangian, LegendreInvolution) {
  for (double g : {1.5, 2.0, 3.0}) {
    const HamiltonianSpec h{1.2, g};
    const HamiltonianSpec dual{h.c_l(), h.conjugate_exponent()};
    for (double r : {0.1, 0.7, 1.5, 2.5}) {
      const Point p = vec({r});
      EXPECT_NEAR(sup_oracle(dual, p), hamiltonian(h, p), 1e-6 * hamiltonian(h, p));
    }
  }
}

TEST(Coupling, Examples) {
  const CouplingSpec c{1.0, 1.0};
  EXPECT_EQ(coupling_f(c, 0.0), 0.0);
  EXPECT_EQ(coupling_F(c, 0.0), 0.0);
  EXPECT_EQ(coupling_F(c, -1.0), 0.0);
  EXPECT_DOUBLE_EQ(coupling_f(c, 2.0), -2.0);
  EXPECT_DOUBLE_EQ(coupling_F(c, 2.0), -2.0);
}

TEST(Coupling, PrimitiveMatchesQuadrature) {
  for (double a : {0.3, 1.0, 1.7}) {
    const CouplingSpec c{1.3, a};
    const double m = 1.9;
    const int n = 20000;
    // Simpson on t = s^2 substitution to remove the root singularity at zero.
    double acc = 0.0;
    const double top = std::sqrt(m);
    for (int k = 0; k <= n; ++k) {
      const double s = top * k / n;
      const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      acc += w * coupling_f(c, s * s) * 2.0 * s;
    }
    acc *= top / n / 3.0;
    EXPECT_NEAR(acc, coupling_F(c, m), 1e-8);
  }
}

TEST(Mollifier, RowsSumToOne) {
  const Grid<double> g(2, 2.0, 41);
  const Mollifier chi(g, 0.3);
  EXPECT_LT(chi.row_sum_defect(), 1e-14);
  const ScalarField c = ScalarField::Constant(g.size(), 0.7);
  EXPECT_LT((chi.apply(c) - c).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Mollifier, ConstantFieldGivesLocalCoupling) {
  const Grid<double> g(1, 4.0, 201);
  const CouplingSpec c{1.5, 0.8};
  const Mollifier chi(g, 0.2);
  const ScalarField out = mollified_coupling(c, chi, ScalarField::Constant(g.size(), 2.0));
  for (Eigen::Index i = 0; i < g.size(); ++i) EXPECT_NEAR(out[i], coupling_f(c, 2.0), 1e-13);
}

TEST(Mollifier, ConvergesAsWidthShrinks) {
  const Grid<double> g(1, 4.0, 4001);
  const CouplingSpec c{1.0, 1.0};
  const ScalarField m = sample(g, [](const Point& x) { return std::exp(-x[0] * x[0]); });
  const ScalarField local = local_coupling(c, m);
  double prev = 0.0;
  for (double w : {0.4, 0.2, 0.1}) {
    const double err = (mollified_coupling(c, Mollifier(g, w), m) - local).cwiseAbs().maxCoeff();
    if (prev > 0.0) EXPECT_LT(err, 0.6 * prev) << "width " << w;
    prev = err;
  }
}

TEST(Mollifier, JensenBound) {
  const Grid<double> g(1, 6.0, 601);
  for (double a : {0.5, 1.0, 1.5}) {
    const CouplingSpec c{1.0, a};
    const ScalarField m = sample(g, [](const Point& x) { return 2.0 * std::exp(-2.0 * x[0] * x[0]); });
    const double lower = -c.c_f / (a + 1.0) * integrate(g, m.array().pow(a + 1.0).matrix().eval());
    for (double w : {0.1, 0.5, 1.0}) {
      const double fk = mollified_potential_energy(g, c, Mollifier(g, w), m);
      EXPECT_GE(fk, lower - 1e-10);
      EXPECT_LE(fk, 0.0);
    }
  }
}

TEST(Mollifier, RejectsNegativeDensity) {
  const Grid<double> g(1, 1.0, 21);
  ScalarField m = ScalarField::Ones(g.size());
  m[4] = -1e-6;
  EXPECT_THROW(mollified_coupling(CouplingSpec{}, Mollifier(g, 0.2), m), DomainError);
  m[4] = -1e-14;
  EXPECT_NO_THROW(mollified_coupling(CouplingSpec{}, Mollifier(g, 0.2), m));
}

TEST(Potential, Examples) {
  const auto flat = PotentialSpec::product({{vec({-1.0}), 2.0}, {vec({1.0}), 4.0}});
  EXPECT_EQ(potential_value(flat, vec({-1.0})), 0.0);
  EXPECT_EQ(potential_value(flat, vec({1.0})), 0.0);
  EXPECT_DOUBLE_EQ(potential_value(flat, vec({0.0})), 1.0);
  EXPECT_DOUBLE_EQ(potential_value(PotentialSpec::power_law(2.0), vec({3.0, 4.0})), 25.0);
  EXPECT_DOUBLE_EQ(flat.growth(), 6.0);
}

TEST(Potential, NonnegativeWithEnvelope) {
  const auto flat = PotentialSpec::product({{vec({-1.0}), 2.0}, {vec({1.0}), 4.0}});
  std::vector<Point> pts;
  for (int k = -200; k <= 200; ++k) pts.push_back(vec({k * 0.05}));
  for (const auto& p : pts) EXPECT_GE(potential_value(flat, p), 0.0);
  EXPECT_TRUE(potential_envelope_holds(flat, 3.0, pts));
  EXPECT_TRUE(potential_envelope_holds(PotentialSpec::power_law(2.0), 1.0, pts));
  EXPECT_FALSE(potential_envelope_holds(PotentialSpec::power_law(2.0, 100.0), 2.0, pts));
}

TEST(Model, SubcriticalityGate) {
  ModelParams m = base_model();
  EXPECT_NO_THROW(m.validate());
  m.coupling.alpha = 2.0;  // gamma'/N = 2
  EXPECT_THROW(m.validate(), ConfigError);
  m.coupling.alpha = 1.99;
  EXPECT_NO_THROW(m.validate());
  m.dim = 2;
  m.coupling.alpha = 1.0;
  EXPECT_THROW(m.validate(), ConfigError);
  m = base_model();
  m.epsilon = -1.0;
  EXPECT_THROW(m.validate(), ConfigError);
  m = base_model();
  m.hamiltonian.gamma = 1.0;
  EXPECT_THROW(m.validate(), ConfigError);
}

TEST(Rescaling, Exponents) {
  const auto e = RescalingExponents::from(1, 2.0, 1.0);
  EXPECT_DOUBLE_EQ(e.len, 2.0);
  EXPECT_DOUBLE_EQ(e.mass, 2.0);
  EXPECT_DOUBLE_EQ(e.lam, 2.0);
  EXPECT_DOUBLE_EQ(e.u, -1.0);
  for (int n : {1, 2}) {
    for (double g : {1.5, 2.0, 3.0}) {
      const double gp = g / (g - 1.0);
      const double a = 0.4 * gp / n;
      const auto r = RescalingExponents::from(n, g, a);
      EXPECT_GT(r.len, 0.0);
      EXPECT_NEAR(r.mass, n * r.len, 1e-14);
      EXPECT_NEAR(r.lam, a * r.mass, 1e-14);
    }
  }
}

TEST(Rescaling, PurePowersInvariantPotentialShrinks) {
  ModelParams m = base_model();
  m.epsilon = 0.5;
  const RescaledModel rm(m);
  const auto ing = rescaled_ingredients(rm);
  for (double p : {0.0, 0.4, 1.7}) {
    EXPECT_NEAR(ing.hamiltonian(vec({p})), hamiltonian(m.hamiltonian, vec({p})), 1e-14);
    EXPECT_NEAR(ing.lagrangian(vec({p})), lagrangian(m.hamiltonian, vec({p})), 1e-14);
    EXPECT_NEAR(ing.coupling(p), coupling_f(m.coupling, p), 1e-14);
  }
  EXPECT_NEAR(ing.potential(vec({1.0})), 0.015625, 1e-15);
  const ModelParams unit = rescaled_model(rm);
  EXPECT_EQ(unit.epsilon, 1.0);
  EXPECT_NEAR(potential_value(unit.potential, vec({1.0})), 0.015625, 1e-15);
  EXPECT_NEAR(potential_value(unit.potential, vec({2.0})), 0.0625, 1e-15);
}

TEST(Rescaling, RescaledEnvelope) {
  for (double eps : {0.5, 0.1}) {
    ModelParams m = base_model();
    m.epsilon = eps;
    const RescaledModel rm(m);
    const auto ing = rescaled_ingredients(rm);
    const double s = std::pow(eps, rm.exponents.lam + 2.0 * rm.exponents.len);
    for (int k = -20; k <= 20; ++k) {
      const double y = k * 0.5;
      EXPECT_NEAR(ing.potential(vec({y})), s * y * y, 1e-14 * (1.0 + y * y));
    }
  }
}
