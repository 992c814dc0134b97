#include "emfg/energy.hpp"

#include <cmath>
#include <sstream>

namespace emfg {

ConstraintResidual constraint_residual(const Grid<double>& grid, const KPair& pair) {
  detail::require_scalar_shape(grid, pair.m, "constraint_residual");
  detail::require_vector_shape(grid, pair.w, "constraint_residual");
  const ScalarField diff = pair.epsilon * laplacian(grid, pair.m);
  const ScalarField div = divergence(grid, pair.w);
  const ScalarField r = div - diff;
  ConstraintResidual out;
  out.max = r.cwiseAbs().maxCoeff();
  out.l2 = std::sqrt(std::max(integrate(grid, r.cwiseAbs2().eval()), 0.0));
  out.scale = diff.cwiseAbs().maxCoeff() + div.cwiseAbs().maxCoeff();
  return out;
}

double kinetic_density(const HamiltonianSpec& ham, double m, const Point& w, double m_max) {
  const double threshold = 1e-14 * std::max(m_max, 0.0);
  const double wn = w.norm();
  if (m > threshold) return m * lagrangian(ham, (-w / m).eval());
  if (wn == 0.0) return 0.0;
  if (m <= 0.0) return kInfiniteKinetic;
  // Near-vacuum node: c_l |w|^g' m^{1-g'} in log form so tiny m cannot
  // overflow the ratio before the product is taken.
  const double gp = ham.conjugate_exponent();
  return ham.c_l() * std::exp(gp * std::log(wn) + (1.0 - gp) * std::log(m));
}

double effective_mollifier_width(const Grid<double>& grid, const ModelParams& model) {
  return model.mollifier_width > 0.0 ? model.mollifier_width : 2.0 * grid.spacing();
}

EnergyBreakdown energy_unchecked(const Grid<double>& grid, const KPair& pair, const ModelParams& model,
                                 bool mollified) {
  detail::require_scalar_shape(grid, pair.m, "energy");
  detail::require_vector_shape(grid, pair.w, "energy");
  const ScalarField m = pair.m.cwiseMax(0.0);
  const double m_max = m.maxCoeff();
  ScalarField kin(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    kin[i] = kinetic_density(model.hamiltonian, m[i], pair.w.row(i).transpose(), m_max);
  }
  EnergyBreakdown e;
  e.kinetic = kin.allFinite() ? integrate(grid, kin) : kInfiniteKinetic;
  e.potential = integrate(grid, potential_field(model.potential, grid).cwiseProduct(m).eval());
  if (mollified) {
    const Mollifier chi(grid, effective_mollifier_width(grid, model));
    e.coupling = mollified_potential_energy(grid, model.coupling, chi, m);
  } else {
    e.coupling = integrate(grid, m.unaryExpr([&](double v) { return coupling_F(model.coupling, v); }).eval());
  }
  e.total = e.kinetic + e.potential + e.coupling;
  return e;
}

EnergyBreakdown energy(const Grid<double>& grid, const KPair& pair, const ModelParams& model,
                       bool mollified, const FeasibilityOptions& feas) {
  detail::require_scalar_shape(grid, pair.m, "energy");
  if (pair.m.minCoeff() < -1e-12) {
    throw InfeasibleError("density has negative entries", 0.0, 0.0);
  }
  const double mass_err = std::abs(integrate(grid, pair.m) - pair.mass);
  const ConstraintResidual cr = constraint_residual(grid, pair);
  const double rel = cr.scale > 0.0 ? cr.max / cr.scale : cr.max;
  if (mass_err > feas.mass_tolerance * pair.mass || rel > feas.constraint_tolerance) {
    std::ostringstream os;
    os.precision(6);
    os << "infeasible pair: mass error " << mass_err << ", relative constraint residual " << rel;
    throw InfeasibleError(os.str(), mass_err, rel);
  }
  return energy_unchecked(grid, pair, model, mollified);
}

EnergyLowerBound energy_lower_bound(const ModelParams& model, double domain_volume,
                                    std::optional<std::pair<double, double>> envelope) {
  model.validate();
  const auto ex = RescalingExponents::from(model.dim, model.hamiltonian.gamma, model.coupling.alpha);
  EnergyLowerBound out;
  out.exponent = ex.lam;
  const double eps = model.epsilon;
  if (envelope) {
    out.k = envelope->first;
    out.c = envelope->second;
  } else {
    if (model.dim != 1) {
      throw ConfigError("explicit lower-bound constants are only available in one dimension");
    }
    if (!(domain_volume > 0.0)) throw ConfigError("domain volume must be positive");
    const double gamma = model.hamiltonian.gamma;
    const double gp = model.hamiltonian.conjugate_exponent();
    const double alpha = model.coupling.alpha;
    const double mass = model.mass;
    const double b = model.coupling.c_f * mass / (alpha + 1.0);
    const double c_alpha = std::max(1.0, std::pow(2.0, alpha - 1.0));
    const double c_l = model.hamiltonian.c_l();
    // E >= c_l D - c_alpha b [(M/|Omega|)^alpha + (M^{1/gamma} D^{1/gamma'} / eps)^alpha]
    // with D = int m |w/m|^gamma'; minimize c_l D - P D^s over D >= 0.
    out.k = c_alpha * b * std::pow(mass / domain_volume, alpha);
    const double s = alpha / gp;
    const double p_eps1 = c_alpha * b * std::pow(mass, alpha / gamma);  // P at eps = 1
    out.c = (1.0 - s) * std::pow(std::pow(s, s) * p_eps1 / std::pow(c_l, s), 1.0 / (1.0 - s));
  }
  out.value = -out.k - out.c * std::pow(eps, -out.exponent);
  return out;
}

}  // namespace emfg
