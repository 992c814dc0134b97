#pragma once

// Model ingredients: power-law Hamiltonian and its Legendre transform, the
// aggregating power coupling and its primitive, the mollified coupling,
// confining potentials, and the vanishing-viscosity rescaling exponents.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "emfg/errors.hpp"
#include "emfg/grid.hpp"

namespace emfg {

/// H(p) = c_h |p|^gamma.
struct HamiltonianSpec {
  double c_h = 0.5;
  double gamma = 2.0;

  /// gamma' = gamma / (gamma - 1).
  double conjugate_exponent() const { return gamma / (gamma - 1.0); }
  /// Constant of the Legendre transform L(q) = c_l |q|^gamma'.
  double c_l() const { return (1.0 - 1.0 / gamma) * std::pow(gamma * c_h, 1.0 / (1.0 - gamma)); }
  void validate() const;
};

/// f(m) = -c_f m^alpha (aggregating).
struct CouplingSpec {
  double c_f = 1.0;
  double alpha = 1.0;
  void validate() const;
};

struct PotentialMinimum {
  Point location;
  double exponent = 2.0;
};

/// V(x) = prefactor * prod_j |s x - x_j|^{b_j}  (polynomial_product), or
/// V(x) = prefactor * |s x|^b                    (power).
/// `argument_scale` s is 1 for physical potentials and < 1 for the rescaled
/// potential of the vanishing-viscosity analysis.
struct PotentialSpec {
  enum class Form { polynomial_product, power };
  Form form = Form::power;
  std::vector<PotentialMinimum> minima;
  double power = 2.0;
  double prefactor = 1.0;
  double argument_scale = 1.0;

  static PotentialSpec power_law(double b, double prefactor = 1.0);
  static PotentialSpec product(std::vector<PotentialMinimum> minima, double prefactor = 1.0);

  /// Total growth exponent b.
  double growth() const;
  /// Zeros of V in physical coordinates.
  std::vector<Point> zeros(int dim) const;
  void validate(int dim) const;
};

struct ModelParams {
  int dim = 1;
  HamiltonianSpec hamiltonian;
  CouplingSpec coupling;
  PotentialSpec potential;
  double mass = 1.0;
  double epsilon = 1.0;
  /// Support radius of the mollifier; <= 0 selects twice the grid spacing.
  double mollifier_width = 0.0;

  /// Throws ConfigError on any invalid field, including alpha >= gamma'/dim.
  void validate() const;
};

/// Vanishing-viscosity exponents, all derived from (N, gamma, alpha):
///   len  = g'/(g' - aN)           mass = N len
///   lam  = a mass                 u    = (N a (g' - 1) - g')/(g' - aN)
struct RescalingExponents {
  double len;
  double mass;
  double lam;
  double u;
  /// Exponent of the momentum argument in H_eps(p) = eps^lam H(eps^-grad p).
  double grad;

  static RescalingExponents from(int dim, double gamma, double alpha);
};

struct RescaledModel {
  ModelParams base;
  RescalingExponents exponents;

  explicit RescaledModel(const ModelParams& model);
};

// ---------------------------------------------------------------------------
// Pointwise ingredients. Templated on the Eigen expression so both fixed and
// dynamic vectors work.

template <typename Derived>
typename Derived::Scalar hamiltonian(const HamiltonianSpec& spec, const Eigen::MatrixBase<Derived>& p) {
  using S = typename Derived::Scalar;
  const S r = p.norm();
  if (r == S(0)) return S(0);
  return S(spec.c_h) * std::pow(r, S(spec.gamma));
}

/// grad H(p) = c_h gamma |p|^{gamma-2} p, continuously extended by 0 at p = 0.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> grad_hamiltonian(
    const HamiltonianSpec& spec, const Eigen::MatrixBase<Derived>& p) {
  using S = typename Derived::Scalar;
  const S r = p.norm();
  if (r == S(0)) return Eigen::Matrix<S, Eigen::Dynamic, 1>::Zero(p.size());
  return (S(spec.c_h * spec.gamma) * std::pow(r, S(spec.gamma - 2.0))) * p;
}

template <typename Derived>
typename Derived::Scalar lagrangian(const HamiltonianSpec& spec, const Eigen::MatrixBase<Derived>& q) {
  using S = typename Derived::Scalar;
  const S r = q.norm();
  if (r == S(0)) return S(0);
  return S(spec.c_l()) * std::pow(r, S(spec.conjugate_exponent()));
}

inline double coupling_f(const CouplingSpec& spec, double m) {
  if (m <= 0.0) return 0.0;
  return -spec.c_f * std::pow(m, spec.alpha);
}

inline double coupling_F(const CouplingSpec& spec, double m) {
  if (m <= 0.0) return 0.0;
  return -spec.c_f * std::pow(m, spec.alpha + 1.0) / (spec.alpha + 1.0);
}

double potential_value(const PotentialSpec& spec, const Point& x);
ScalarField potential_field(const PotentialSpec& spec, const Grid<double>& grid);

/// Checks C_V^-1 (max(|x| - C_V, 0))^b <= V(x) <= C_V (1 + |x|)^b on the
/// given points.
bool potential_envelope_holds(const PotentialSpec& spec, double c_v, const std::vector<Point>& points);

/// Two-sided bound validators for user-supplied H and f (K arbitrary).
bool hamiltonian_bounds_hold(const HamiltonianSpec& spec, double k,
                             const std::function<double(const Point&)>& h,
                             const std::vector<Point>& samples);
bool coupling_bounds_hold(const CouplingSpec& spec, double k, const std::function<double(double)>& f,
                          const std::vector<double>& samples);

// ---------------------------------------------------------------------------
// Mollification.

/// Discrete mollifier: for each node, the normalized weights of the bump
/// exp(-1/(1 - |x/width|^2)) restricted to nodes inside the box. Rows sum to
/// one exactly, so constants are fixed points.
class Mollifier {
 public:
  Mollifier(const Grid<double>& grid, double width);

  ScalarField apply(const ScalarField& m) const;
  double width() const { return width_; }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix() const { return weights_; }
  /// Largest deviation of a row sum from one.
  double row_sum_defect() const;

 private:
  Grid<double> grid_;
  double width_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> weights_;
};

/// f_k[m] = chi * f(chi * m). Throws DomainError for m < -1e-12.
ScalarField mollified_coupling(const CouplingSpec& coupling, const Mollifier& chi, const ScalarField& m);
/// F_k[m] = integral of F(chi * m).
double mollified_potential_energy(const Grid<double>& grid, const CouplingSpec& coupling,
                                  const Mollifier& chi, const ScalarField& m);

/// Local (unmollified) coupling applied nodewise.
ScalarField local_coupling(const CouplingSpec& coupling, const ScalarField& m);

// ---------------------------------------------------------------------------
// Rescaled ingredients.

struct RescaledIngredients {
  std::function<double(const Point&)> hamiltonian;
  std::function<double(double)> coupling;
  std::function<double(const Point&)> potential;
  std::function<double(const Point&)> lagrangian;
};

/// H_eps(p) = eps^lam H(eps^-grad p), f_eps(m) = eps^lam f(eps^-mass m),
/// V_eps(y) = eps^lam V(eps^len y) and L_eps = (H_eps)^*.
RescaledIngredients rescaled_ingredients(const RescaledModel& rm);

/// The rescaled problem as a model with unit viscosity: H and f are the
/// canonical pure powers (invariant under the rescaling) and only the
/// potential changes.
ModelParams rescaled_model(const RescaledModel& rm);

}  // namespace emfg
