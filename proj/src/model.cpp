#include "emfg/model.hpp"

#include <algorithm>
#include <sstream>

namespace emfg {

void HamiltonianSpec::validate() const {
  if (!(c_h > 0.0) || !std::isfinite(c_h)) throw ConfigError("hamiltonian c_h must be positive");
  if (!(gamma > 1.0) || !std::isfinite(gamma)) throw ConfigError("hamiltonian gamma must be > 1");
}

void CouplingSpec::validate() const {
  if (!(c_f >= 0.0) || !std::isfinite(c_f)) throw ConfigError("coupling c_f must be >= 0");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("coupling alpha must be positive");
}

PotentialSpec PotentialSpec::power_law(double b, double prefactor) {
  PotentialSpec p;
  p.form = Form::power;
  p.power = b;
  p.prefactor = prefactor;
  return p;
}

PotentialSpec PotentialSpec::product(std::vector<PotentialMinimum> minima, double prefactor) {
  PotentialSpec p;
  p.form = Form::polynomial_product;
  p.minima = std::move(minima);
  p.prefactor = prefactor;
  return p;
}

double PotentialSpec::growth() const {
  if (form == Form::power) return power;
  double b = 0.0;
  for (const auto& mj : minima) b += mj.exponent;
  return b;
}

std::vector<Point> PotentialSpec::zeros(int dim) const {
  std::vector<Point> out;
  if (form == Form::power) {
    out.push_back(Point::Zero(dim));
    return out;
  }
  for (const auto& mj : minima) out.push_back(mj.location / argument_scale);
  return out;
}

void PotentialSpec::validate(int dim) const {
  if (!(prefactor >= 0.0) || !std::isfinite(prefactor)) {
    throw ConfigError("potential prefactor must be >= 0");
  }
  if (!(argument_scale > 0.0)) throw ConfigError("potential argument scale must be positive");
  if (form == Form::power) {
    if (!(power > 0.0)) throw ConfigError("potential power b must be positive");
    return;
  }
  if (minima.empty()) throw ConfigError("polynomial_product potential needs at least one minimum");
  for (const auto& mj : minima) {
    if (mj.location.size() != dim) {
      throw ConfigError("potential minimum has dimension " + std::to_string(mj.location.size()) +
                        ", model dimension is " + std::to_string(dim));
    }
    if (!(mj.exponent > 0.0)) throw ConfigError("potential exponents b_j must be positive");
  }
}

void ModelParams::validate() const {
  if (dim < 1 || dim > 3) throw ConfigError("model dimension must be 1, 2 or 3");
  hamiltonian.validate();
  coupling.validate();
  potential.validate(dim);
  if (!(mass > 0.0) || !std::isfinite(mass)) throw ConfigError("mass M must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be positive");
  if (!std::isfinite(mollifier_width)) throw ConfigError("mollifier width must be finite");
  const double critical = hamiltonian.conjugate_exponent() / dim;
  if (!(coupling.alpha < critical)) {
    std::ostringstream os;
    os.precision(17);
    os << "coupling exponent alpha = " << coupling.alpha
       << " is not subcritical: need 0 < alpha < gamma'/N = " << critical;
    throw ConfigError(os.str());
  }
}

RescalingExponents RescalingExponents::from(int dim, double gamma, double alpha) {
  const double gp = gamma / (gamma - 1.0);
  const double n = dim;
  const double d = gp - alpha * n;
  RescalingExponents e{};
  e.len = gp / d;
  e.mass = n * e.len;
  e.lam = alpha * e.mass;
  e.u = (n * alpha * (gp - 1.0) - gp) / d;
  e.grad = n * alpha * (gp - 1.0) / d;
  return e;
}

RescaledModel::RescaledModel(const ModelParams& model)
    : base(model),
      exponents(RescalingExponents::from(model.dim, model.hamiltonian.gamma, model.coupling.alpha)) {
  model.validate();
}

double potential_value(const PotentialSpec& spec, const Point& x) {
  const Point sx = spec.argument_scale * x;
  if (spec.form == PotentialSpec::Form::power) {
    const double r = sx.norm();
    return r == 0.0 ? 0.0 : spec.prefactor * std::pow(r, spec.power);
  }
  double v = spec.prefactor;
  for (const auto& mj : spec.minima) {
    const double r = (sx - mj.location).norm();
    if (r == 0.0) return 0.0;
    v *= std::pow(r, mj.exponent);
  }
  return v;
}

ScalarField potential_field(const PotentialSpec& spec, const Grid<double>& grid) {
  return sample(grid, [&](const Point& x) { return potential_value(spec, x); });
}

bool potential_envelope_holds(const PotentialSpec& spec, double c_v, const std::vector<Point>& points) {
  const double b = spec.growth();
  for (const auto& x : points) {
    const double v = potential_value(spec, x);
    const double r = x.norm();
    const double lower = std::pow(std::max(r - c_v, 0.0), b) / c_v;
    const double upper = c_v * std::pow(1.0 + r, b);
    if (v < lower * (1.0 - 1e-12) || v > upper * (1.0 + 1e-12)) return false;
  }
  return true;
}

bool hamiltonian_bounds_hold(const HamiltonianSpec& spec, double k,
                             const std::function<double(const Point&)>& h,
                             const std::vector<Point>& samples) {
  for (const auto& p : samples) {
    const double pw = spec.c_h * std::pow(p.norm(), spec.gamma);
    const double hv = h(p);
    const double slack = 1e-12 * (1.0 + std::abs(pw));
    if (hv < pw - k - slack || hv > pw + slack) return false;
  }
  return true;
}

bool coupling_bounds_hold(const CouplingSpec& spec, double k, const std::function<double(double)>& f,
                          const std::vector<double>& samples) {
  for (double m : samples) {
    const double pw = -spec.c_f * std::pow(std::max(m, 0.0), spec.alpha);
    const double fv = f(m);
    const double slack = 1e-12 * (1.0 + std::abs(pw));
    if (fv < pw - k - slack || fv > pw + k + slack) return false;
  }
  return true;
}

Mollifier::Mollifier(const Grid<double>& grid, double width) : grid_(grid), width_(width) {
  if (!(width > 0.0)) throw ConfigError("mollifier width must be positive");
  const int reach = static_cast<int>(std::ceil(width / grid.spacing()));
  const int n = grid.points_per_axis();
  const int dim = grid.dim();
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<std::pair<Eigen::Index, double>> row;
  for (Eigen::Index idx = 0; idx < grid.size(); ++idx) {
    const auto mi = grid.multi_index(idx);
    row.clear();
    double total = 0.0;
    std::array<int, 3> off{0, 0, 0};
    std::array<int, 3> lo{0, 0, 0};
    std::array<int, 3> hi{0, 0, 0};
    for (int a = 0; a < dim; ++a) {
      lo[a] = std::max(0, mi[a] - reach);
      hi[a] = std::min(n - 1, mi[a] + reach);
    }
    std::array<int, 3> cur = lo;
    while (true) {
      double r2 = 0.0;
      for (int a = 0; a < dim; ++a) {
        off[a] = cur[a] - mi[a];
        const double d = off[a] * grid.spacing() / width;
        r2 += d * d;
      }
      if (r2 < 1.0) {
        const double wgt = std::exp(-1.0 / (1.0 - r2));
        row.emplace_back(grid.index(cur), wgt);
        total += wgt;
      }
      int a = dim - 1;
      while (a >= 0 && cur[a] == hi[a]) {
        cur[a] = lo[a];
        --a;
      }
      if (a < 0) break;
      ++cur[a];
    }
    for (const auto& [j, wgt] : row) trip.emplace_back(idx, j, wgt / total);
  }
  weights_.resize(grid.size(), grid.size());
  weights_.setFromTriplets(trip.begin(), trip.end());
}

ScalarField Mollifier::apply(const ScalarField& m) const {
  detail::require_scalar_shape(grid_, m, "mollifier");
  return weights_ * m;
}

double Mollifier::row_sum_defect() const {
  const ScalarField ones = ScalarField::Ones(weights_.cols());
  return (weights_ * ones - ones).cwiseAbs().maxCoeff();
}

namespace {

void require_nonnegative(const ScalarField& m) {
  if (m.size() > 0 && m.minCoeff() < -1e-12) {
    throw DomainError("density has negative entries down to " + std::to_string(m.minCoeff()));
  }
}

}  // namespace

ScalarField local_coupling(const CouplingSpec& coupling, const ScalarField& m) {
  require_nonnegative(m);
  return m.unaryExpr([&](double v) { return coupling_f(coupling, v); });
}

ScalarField mollified_coupling(const CouplingSpec& coupling, const Mollifier& chi, const ScalarField& m) {
  require_nonnegative(m);
  const ScalarField smoothed = chi.apply(m);
  const ScalarField inner = smoothed.unaryExpr([&](double v) { return coupling_f(coupling, v); });
  return chi.apply(inner);
}

double mollified_potential_energy(const Grid<double>& grid, const CouplingSpec& coupling,
                                  const Mollifier& chi, const ScalarField& m) {
  require_nonnegative(m);
  const ScalarField smoothed = chi.apply(m);
  return integrate(grid, smoothed.unaryExpr([&](double v) { return coupling_F(coupling, v); }).eval());
}

RescaledIngredients rescaled_ingredients(const RescaledModel& rm) {
  const double eps = rm.base.epsilon;
  const RescalingExponents e = rm.exponents;
  const HamiltonianSpec ham = rm.base.hamiltonian;
  const CouplingSpec cpl = rm.base.coupling;
  const PotentialSpec pot = rm.base.potential;
  const double a = std::pow(eps, e.lam);
  const double c = std::pow(eps, -e.grad);
  RescaledIngredients out;
  out.hamiltonian = [=](const Point& p) { return a * hamiltonian(ham, (c * p).eval()); };
  out.coupling = [=](double m) { return a * coupling_f(cpl, std::pow(eps, -e.mass) * m); };
  out.potential = [=](const Point& y) {
    return a * potential_value(pot, (std::pow(eps, e.len) * y).eval());
  };
  // (a H(c .))^*(q) = a L(q / (a c)).
  out.lagrangian = [=](const Point& q) { return a * lagrangian(ham, (q / (a * c)).eval()); };
  return out;
}

ModelParams rescaled_model(const RescaledModel& rm) {
  ModelParams out = rm.base;
  const double eps = rm.base.epsilon;
  out.epsilon = 1.0;
  out.potential.prefactor *= std::pow(eps, rm.exponents.lam);
  out.potential.argument_scale *= std::pow(eps, rm.exponents.len);
  if (out.mollifier_width > 0.0) out.mollifier_width /= std::pow(eps, rm.exponents.len);
  return out;
}

}  // namespace emfg
