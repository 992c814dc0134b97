#include "emfg/cli/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <functional>
#include <limits>
#include <random>
#include <thread>

namespace emfg::cli {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Runs fn(0..n-1) on up to `threads` threads; the first exception of each
// task is kept in its slot.
std::vector<std::exception_ptr> parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t k = next++; k < n; k = next++) {
      try {
        fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const size_t workers = std::min<size_t>(n, static_cast<size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    worker();
    return errors;
  }
  std::vector<std::thread> pool;
  for (size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return errors;
}

// ConfigError is a user error and is rethrown; anything else becomes a
// recorded failure.
bool record_error(ResultBundle& b, const std::exception_ptr& e, const std::string& what) {
  if (!e) return false;
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    b.failures.push_back(what + ": " + ex.what());
  }
  return true;
}

Grid<double> config_grid(const RunConfig& c) { return Grid<double>(c.model.dim, c.grid.half_width, c.grid.points); }

// Nodes on the first axis through the centre of the remaining axes.
struct Slice {
  std::vector<double> x;
  std::vector<Eigen::Index> nodes;
};

Slice axis_slice(const Grid<double>& g) {
  Slice s;
  const int c = (g.points_per_axis() - 1) / 2;
  for (int i = 0; i < g.points_per_axis(); ++i) {
    std::array<int, 3> mi{i, c, c};
    s.nodes.push_back(g.index(mi));
    s.x.push_back(g.axis_coordinate(i));
  }
  return s;
}

std::vector<double> take(const ScalarField& f, const Slice& s) {
  std::vector<double> out;
  for (auto i : s.nodes) out.push_back(f[i]);
  return out;
}

std::vector<std::string> coordinate_columns(const std::string& stem, int dim) {
  if (dim == 1) return {stem};
  std::vector<std::string> out;
  for (int a = 1; a <= dim; ++a) out.push_back(stem + "_" + std::to_string(a));
  return out;
}

std::vector<std::string> record_columns(int dim, size_t radii) {
  std::vector<std::string> cols{"epsilon", "lambda", "lambda_tilde"};
  for (const auto& c : coordinate_columns("x_eps", dim)) cols.push_back(c);
  for (size_t r = 1; r <= radii; ++r) cols.push_back("mass_fraction_R" + std::to_string(r));
  for (const char* c : {"sup_m_bar", "energy_kinetic", "energy_potential", "energy_coupling", "duality_gap",
                        "optimality_residual", "duality_gap_relative", "radius_eta", "truncation_loss", "iterations",
                        "ok"}) {
    cols.push_back(c);
  }
  return cols;
}

std::vector<double> record_row(const SweepRecord& r, int dim, size_t radii, double mass) {
  std::vector<double> row{r.epsilon};
  if (!r.ok) {
    row.resize(record_columns(dim, radii).size() - 1, kNaN);
    row.push_back(0.0);
    return row;
  }
  row.push_back(r.lambda);
  row.push_back(r.lambda_tilde);
  for (int a = 0; a < dim; ++a) row.push_back(r.x_eps[a]);
  for (size_t k = 0; k < radii; ++k) row.push_back(k < r.mass_fraction.size() ? r.mass_fraction[k] : kNaN);
  row.push_back(r.sup_m_bar);
  row.push_back(r.energy.kinetic);
  row.push_back(r.energy.potential);
  row.push_back(r.energy.coupling);
  row.push_back(r.duality_gap);
  row.push_back(r.optimality_residual);
  row.push_back(r.duality_gap / std::abs(r.lambda * mass));
  row.push_back(r.width_r);
  row.push_back(r.truncation_loss);
  row.push_back(r.iterations);
  row.push_back(1.0);
  return row;
}

json point_json(const Point& p) { return std::vector<double>(p.data(), p.data() + p.size()); }

json solution_json(const MFGSolution& s, const ModelParams& model) {
  return {{"lambda", s.lambda},
          {"energy", {{"kinetic", s.energy.kinetic}, {"potential", s.energy.potential},
                      {"coupling", s.energy.coupling}, {"total", s.energy.total}}},
          {"duality_gap", s.duality_gap},
          {"duality_gap_relative", s.duality_gap / std::abs(s.lambda * model.mass)},
          {"discrete_duality_gap", s.discrete_duality_gap},
          {"optimality_residual", s.optimality_residual},
          {"constraint_residual", s.constraint_residual},
          {"max_cell_peclet", s.max_cell_peclet},
          {"boundary_decay", s.boundary_decay},
          {"fixedpoint_iterations", s.fixedpoint_iterations},
          {"newton_polishes", s.newton_polishes},
          {"converged", s.converged},
          {"argmin_u", point_json(s.argmin_x)}};
}

Table field_table(const std::string& name, const Grid<double>& g, const std::vector<std::string>& names,
                  const std::vector<const ScalarField*>& fields) {
  Table t;
  t.name = name;
  t.columns = coordinate_columns("x", g.dim());
  for (const auto& n : names) t.columns.push_back(n);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    std::vector<double> row;
    const Point x = g.coordinate(i);
    for (int a = 0; a < g.dim(); ++a) row.push_back(x[a]);
    for (const ScalarField* f : fields) row.push_back((*f)[i]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table history_table(const std::vector<double>& history) {
  Table t{"convergence", {"iteration", "l1_step"}, {}};
  for (size_t k = 0; k < history.size(); ++k) t.rows.push_back({static_cast<double>(k + 1), history[k]});
  return t;
}

void check_minimality(ResultBundle& b, const std::string& name, const MinimizerReport& r) {
  b.check(name + ".competitors_passed", static_cast<double>(r.passed), ">=", static_cast<double>(r.trials),
          "random feasible competitors with energy >= solution energy - " + format_number(r.tolerance));
  b.summary[name] = {{"trials", r.trials},         {"passed", r.passed},
                     {"solution_energy", r.solution_energy}, {"min_competitor_energy", r.min_competitor_energy},
                     {"min_margin", r.min_margin}, {"tolerance", r.tolerance}};
}

// ---------------------------------------------------------------------------

void run_solve(ResultBundle& b, int /*threads*/) {
  const RunConfig& c = b.config;
  const Grid<double> g = config_grid(c);
  MFGSolution sol;
  try {
    sol = solve_mfg(g, c.model, c.solver);
  } catch (const SolverError& e) {
    b.failures.push_back(std::string("solve: ") + e.what());
    b.tables.push_back(history_table(e.history()));
    return;
  }
  const RescaledSolution rs = rescale_solution(g, sol, c.model);
  SweepRecord rec = summarize_solution(g, sol, c.model, rs, c.sweep.options.radii, c.sweep.options.eta_fraction);
  rec.ok = true;
  const size_t nr = c.sweep.options.radii.size();
  b.tables.push_back({"results", record_columns(g.dim(), nr), {record_row(rec, g.dim(), nr, c.model.mass)}});

  const ScalarField v = potential_field(c.model.potential, g);
  std::vector<std::string> names{"potential", "u", "m"};
  std::vector<const ScalarField*> fields{&v, &sol.u, &sol.m};
  std::vector<ScalarField> w(g.dim());
  for (int a = 0; a < g.dim(); ++a) {
    w[a] = sol.w.col(a);
    names.push_back(g.dim() == 1 ? "w" : "w_" + std::to_string(a + 1));
    fields.push_back(&w[a]);
  }
  b.tables.push_back(field_table("fields", g, names, fields));
  b.tables.push_back(history_table(sol.history));

  b.summary["solution"] = solution_json(sol, c.model);
  b.check("duality_gap_relative", sol.duality_gap / std::abs(sol.lambda * c.model.mass), "<=", 1e-3,
          "|lambda M - J(m, w)| / |lambda M|");
  b.check("constraint_residual", sol.constraint_residual, "<=", 1e-8, "relative to eps |Lap m| + |div w|");
  b.check("boundary_decay", sol.boundary_decay, "<=", 1e-8, "max m on the box faces over max m");
  if (c.competitors > 0) {
    check_minimality(b, "minimality", minimizer_verification(g, sol, c.model, c.solver, c.competitors, c.seed));
  }

  const Slice s = axis_slice(g);
  b.plots.push_back({"density", "Equilibrium density", "x", "m", false, false, {{"m", s.x, take(sol.m, s)}}});
  b.plots.push_back({"value", "Value function", "x", "u", false, false, {{"u", s.x, take(sol.u, s)}}});
  std::vector<double> it, hist;
  for (size_t k = 0; k < sol.history.size(); ++k) {
    it.push_back(static_cast<double>(k + 1));
    hist.push_back(sol.history[k]);
  }
  b.plots.push_back({"convergence", "Outer iteration", "iteration", "L1 step / M", false, true, {{"step", it, hist}}});
}

void run_sweep_command(ResultBundle& b, int /*threads*/) {
  const RunConfig& c = b.config;
  const SweepOptions& opt = c.sweep.options;
  const SweepResult res = run_sweep(c.model, c.sweep.epsilons, opt);
  const int dim = c.model.dim;
  const size_t nr = opt.radii.size();

  Table t{"sweep", record_columns(dim, nr), {}};
  std::vector<double> eps, lam, lt, sup, gaps, edge;
  json runs = json::array();
  for (size_t k = 0; k < res.records.size(); ++k) {
    const SweepRecord& r = res.records[k];
    t.rows.push_back(record_row(r, dim, nr, c.model.mass));
    if (!r.ok) {
      b.failures.push_back("sweep eps=" + format_number(r.epsilon) + ": " + r.error);
      runs.push_back({{"epsilon", r.epsilon}, {"ok", false}, {"error", r.error}});
      continue;
    }
    eps.push_back(r.epsilon);
    lam.push_back(std::abs(r.lambda));
    lt.push_back(r.lambda_tilde);
    sup.push_back(r.sup_m_bar);
    gaps.push_back(r.duality_gap / std::abs(r.lambda * c.model.mass));
    edge.push_back(r.boundary_decay);
    runs.push_back({{"epsilon", r.epsilon}, {"ok", true}, {"lambda", r.lambda}, {"lambda_tilde", r.lambda_tilde},
                    {"x_eps", point_json(r.x_eps)}, {"radius_eta", r.width_r}, {"sup_m_bar", r.sup_m_bar},
                    {"spacing", r.spacing}, {"iterations", r.iterations},
                    {"decay", {{"c1", r.decay.c1}, {"c2", r.decay.c2}, {"envelope_holds", r.decay.envelope_holds}}}});
  }
  b.tables.push_back(t);
  b.summary["runs"] = runs;

  const auto ex = RescalingExponents::from(dim, c.model.hamiltonian.gamma, c.model.coupling.alpha);
  if (eps.size() >= 2) {
    const ExponentFit fit = fit_exponent(eps, lam);
    b.summary["lambda_fit"] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r2},
                               {"expected", -ex.lam}};
    b.check("lambda_exponent_error", std::abs(fit.slope + ex.lam) / ex.lam, "<=", 0.15,
            "fitted slope " + format_number(fit.slope) + " of log|lambda| vs log eps against -" + format_number(ex.lam));

    const double lt_max = *std::max_element(lt.begin(), lt.end());
    b.check("lambda_tilde_max", lt_max, "<", 0.0, "rescaled ergodic constants are negative");
    std::vector<double> alt;
    for (double v : lt) alt.push_back(std::abs(v));
    const auto [amin, amax] = std::minmax_element(alt.begin(), alt.end());
    b.check("lambda_tilde_ratio", *amax / *amin, "<=", 3.0, "max/min |lambda_tilde| across the sweep");
    const auto [smin, smax] = std::minmax_element(sup.begin(), sup.end());
    b.check("sup_m_bar_ratio", *smax / *smin, "<=", 3.0, "max/min sup of the rescaled density");

    const ConcentrationReport cr = concentration_report(res.records);
    b.summary["concentration"] = {{"epsilons", cr.epsilons}, {"radii", cr.radii}, {"distances", cr.distances},
                                  {"radius_ratio", cr.radius_ratio}};
    b.check("concentration_radius_ratio", cr.radius_ratio, "<=", 1.5,
            "rescaled radius holding M - eta, two smallest eps");
    b.summary["concentration"]["distance_nonincreasing"] = cr.distance_nonincreasing;
    b.summary["concentration"]["distance_shrinks"] = cr.distance_shrinks;
    b.check("distance_to_argmin_decreasing", cr.distance_nonincreasing || cr.distance_shrinks,
            "|x_eps - argmin V| non-increasing over the tail (within one spacing), or halved over the sweep");
  }
  if (!gaps.empty()) {
    b.check("duality_gap_relative_max", *std::max_element(gaps.begin(), gaps.end()), "<=", 1e-3,
            "largest |lambda M - J| / |lambda M| over the sweep");
    b.check("boundary_decay_max", *std::max_element(edge.begin(), edge.end()), "<=", 1e-8,
            "largest max m on the box faces over max m");
  }

  std::vector<double> fit_y;
  if (eps.size() >= 2) {
    const ExponentFit fit = fit_exponent(eps, lam);
    for (double e : eps) fit_y.push_back(std::exp(fit.intercept) * std::pow(e, fit.slope));
  }
  b.plots.push_back({"lambda_scaling", "Ergodic constant against viscosity", "epsilon", "|lambda|", true, true,
                     {{"|lambda|", eps, lam}, {"least-squares fit", eps, fit_y}}});

  Plot frac{"mass_fraction", "Mass near x_eps", "R (rescaled radius)", "mass fraction", true, false, {}};
  Plot traj{"x_eps_trajectory", "Distance of x_eps to the nearest zero of V", "epsilon", "distance", true, false,
            {{"|x_eps - x0|", {}, {}}}};
  for (const auto& r : res.records) {
    if (!r.ok) continue;
    frac.series.push_back({"eps=" + format_number(r.epsilon), r.radii, r.mass_fraction});
    traj.series[0].x.push_back(r.epsilon);
    traj.series[0].y.push_back(r.distance_to_zero);
  }
  b.plots.push_back(frac);
  b.plots.push_back(traj);

  Plot prof{"rescaled_density", "Rescaled densities", "y", "m_bar", false, false, {}};
  Table rt{"rescaled_profiles", {"y"}, {}};
  std::vector<std::vector<double>> cols;
  std::vector<double> ycol;
  for (size_t k = 0; k < res.records.size(); ++k) {
    if (!res.records[k].ok) continue;
    const RescaledSolution& rs = res.rescaled[k];
    const Slice s = axis_slice(rs.grid);
    const std::vector<double> mb = take(rs.m_bar, s);
    prof.series.push_back({"eps=" + format_number(res.records[k].epsilon), s.x, mb});
    if (ycol.empty()) ycol = s.x;
    if (s.x.size() == ycol.size()) {
      rt.columns.push_back("m_bar_eps_" + format_number(res.records[k].epsilon));
      cols.push_back(mb);
    }
  }
  for (size_t i = 0; i < ycol.size(); ++i) {
    std::vector<double> row{ycol[i]};
    for (const auto& col : cols) row.push_back(col[i]);
    rt.rows.push_back(std::move(row));
  }
  if (!cols.empty()) b.tables.push_back(rt);
  b.plots.push_back(prof);
}

void run_flattest(ResultBundle& b, int threads) {
  const RunConfig& c = b.config;
  std::vector<ModelParams> variants{c.model};
  const auto& minima = c.model.potential.minima;
  if (c.flattest.swapped_rerun && minima.size() == 2 && minima[0].exponent != minima[1].exponent) {
    ModelParams swapped = c.model;
    std::swap(swapped.potential.minima[0].exponent, swapped.potential.minima[1].exponent);
    variants.push_back(swapped);
  }
  std::vector<FlattestReport> reports(variants.size());
  const auto errors = parallel_for(variants.size(), threads, [&](size_t k) {
    reports[k] = flattest_min_experiment(variants[k], c.flattest.epsilons, c.flattest.options);
  });

  const int dim = c.model.dim;
  Table t{"flattest", {"variant", "epsilon"}, {}};
  for (const auto& col : coordinate_columns("x_eps", dim)) t.columns.push_back(col);
  t.columns.push_back("distance_to_selected");
  t.columns.push_back("energy");
  for (size_t j = 1; j <= minima.size(); ++j) t.columns.push_back("start_energy_" + std::to_string(j));
  Plot plot{"flattest_selection", "Selected equilibrium against viscosity", "epsilon", "distance to flattest zero",
            true, false, {}};
  json out = json::array();
  std::vector<std::optional<Point>> predicted(variants.size());
  for (size_t k = 0; k < variants.size(); ++k) {
    const std::string label = k == 0 ? "original" : "swapped";
    if (record_error(b, errors[k], "flattest " + label)) continue;
    const FlattestReport& r = reports[k];
    predicted[k] = r.predicted;
    Series se{label, {}, {}};
    json runs = json::array();
    for (const auto& run : r.runs) {
      std::vector<double> row{static_cast<double>(k), run.epsilon};
      for (int a = 0; a < dim; ++a) row.push_back(run.x_eps[a]);
      row.push_back(run.distance_to_selected);
      row.push_back(run.energy);
      for (size_t j = 0; j < minima.size(); ++j) {
        row.push_back(j < run.start_energies.size() ? run.start_energies[j] : kNaN);
      }
      t.rows.push_back(std::move(row));
      se.x.push_back(run.epsilon);
      se.y.push_back(run.distance_to_selected);
      runs.push_back({{"epsilon", run.epsilon}, {"x_eps", point_json(run.x_eps)},
                      {"distance_to_selected", run.distance_to_selected}, {"energy", run.energy}});
    }
    plot.series.push_back(se);
    out.push_back({{"variant", label},
                   {"determined", r.determined},
                   {"predicted", r.predicted ? point_json(*r.predicted) : json(nullptr)},
                   {"converges", r.converges},
                   {"final_distance", r.final_distance},
                   {"runs", runs}});
    b.check(label + ".flattest_zero_unique", r.determined, "exactly one zero carries the largest exponent");
    b.check(label + ".distance_nonincreasing", r.converges, "distance to the flattest zero, within one spacing");
    b.check(label + ".final_distance", r.final_distance, "<=", 0.2, "|x_eps - flattest zero| at the smallest eps");
  }
  if (variants.size() == 2 && predicted[0] && predicted[1]) {
    b.check("swapped_selects_other_zero", (*predicted[0] - *predicted[1]).norm(), ">", 0.0,
            "exchanging the exponents moves the selected zero");
  }
  b.summary["variants"] = out;
  b.tables.push_back(t);
  b.plots.push_back(plot);
}

void run_groundstate(ResultBundle& b, int /*threads*/) {
  const RunConfig& c = b.config;
  GroundStateReport r;
  try {
    r = ground_state(c.model, c.groundstate.deltas, c.groundstate.b, c.groundstate.options);
  } catch (const SolverError& e) {
    b.failures.push_back(std::string("groundstate: ") + e.what());
    return;
  }
  const int dim = c.model.dim;
  Table steps{"groundstate_steps", {"delta", "lambda"}, {}};
  for (const auto& col : coordinate_columns("x_delta", dim)) steps.columns.push_back(col);
  steps.columns.push_back("l1_to_previous");
  steps.columns.push_back("energy");
  std::vector<double> ds, l1;
  for (const auto& s : r.steps) {
    std::vector<double> row{s.delta, s.lambda};
    for (int a = 0; a < dim; ++a) row.push_back(s.x_delta[a]);
    row.push_back(s.l1_to_previous);
    row.push_back(s.energy);
    steps.rows.push_back(std::move(row));
    if (s.l1_to_previous > 0.0) {
      ds.push_back(s.delta);
      l1.push_back(s.l1_to_previous);
    }
  }
  b.tables.push_back(steps);
  b.tables.push_back(field_table("groundstate_limit", r.grid, {"u", "m"}, {&r.limit.u, &r.limit.m}));

  const double tol = c.solver.hjb_tolerance;
  b.summary["limit"] = solution_json(r.limit, c.model);
  b.summary["limit_residual"] = r.limit_residual;
  b.summary["fp_residual"] = r.fp_residual;
  b.summary["limit_l1_to_last"] = r.limit_l1_to_last;
  b.summary["decay"] = {{"c1", r.decay.c1}, {"c2", r.decay.c2}, {"r2", r.decay.r2},
                        {"envelope_holds", r.decay.envelope_holds}};
  b.check("recentred_cauchy", r.cauchy, "successive recentred L1 distances shrink by 1.5x or more");
  b.check("limit_hjb_residual", r.limit_residual, "<=", 10.0 * tol, "HJB residual of the potential-free system");
  b.check("limit_fp_residual", r.fp_residual, "<=", 10.0 * tol, "Fokker-Planck residual of the potential-free system");
  b.check("decay_rate_c2", r.decay.c2, ">", 0.0, "m <= c1 exp(-c2 |x - x0|)");
  b.check("decay_envelope", r.decay.envelope_holds, "envelope with c1 inflated by 1.1 holds at every node");
  if (c.groundstate.options.competitors > 0) check_minimality(b, "minimality", r.minimality);

  const Slice s = axis_slice(r.grid);
  const std::vector<double> m = take(r.limit.m, s);
  std::vector<double> env;
  for (double x : s.x) env.push_back(r.decay.c1 * std::exp(-r.decay.c2 * std::abs(x - r.limit.argmin_x[0])));
  b.plots.push_back({"groundstate_density", "Ground state density and decay envelope", "x", "m", false, true,
                     {{"m", s.x, m}, {"c1 exp(-c2 |x - x0|)", s.x, env}}});
  b.plots.push_back({"groundstate_cauchy", "Recentred L1 distance between successive deltas", "delta",
                     "L1 distance", true, true, {{"distance", ds, l1}}});
}

void run_hopfcole(ResultBundle& b, int /*threads*/) {
  RunConfig& c = b.config;
  c.solver.mollified = false;
  const Grid<double> g = config_grid(c);
  MFGSolution sol;
  HopfColeReport r;
  try {
    sol = solve_mfg(g, c.model, c.solver);
    r = hopf_cole_crosscheck(g, c.model, sol, c.hopfcole);
  } catch (const SolverError& e) {
    b.failures.push_back(std::string("hopfcole: ") + e.what());
    return;
  }
  b.tables.push_back(field_table("hopfcole", g, {"u", "m", "v2"}, {&sol.u, &sol.m, &r.v2}));
  b.summary["mfg"] = solution_json(sol, c.model);
  b.summary["hopf_cole"] = {{"lambda_nls", r.lambda_nls},       {"lambda_mfg", r.lambda_mfg},
                            {"density_error", r.density_error}, {"lambda_error", r.lambda_error},
                            {"log_identity_error", r.log_identity_error}, {"iterations", r.iterations}};
  b.check("boundary_decay", sol.boundary_decay, "<=", 1e-8, "max m on the box faces over max m");
  b.check("density_error", r.density_error, "<=", 1e-2, "max |v^2 - m| / max m");
  b.check("lambda_error", r.lambda_error, "<=", 1e-2, "|lambda_nls - lambda_mfg| / |lambda_mfg|");
  const Slice s = axis_slice(g);
  b.plots.push_back({"hopfcole", "Coupled solve against the nonlinear eigenproblem", "x", "density", false, false,
                     {{"m (MFG)", s.x, take(sol.m, s)}, {"v^2 (eigenproblem)", s.x, take(r.v2, s)}}});
}

// ---------------------------------------------------------------------------
// Invariant suite.

void verify_legendre(ResultBundle& b, std::mt19937_64& rng) {
  const VerifySection& v = b.config.verify;
  std::uniform_real_distribution<double> uc(0.2, 3.0), ur(0.0, 5.0);
  const std::vector<double> gammas{b.config.model.hamiltonian.gamma, 1.5, 3.0};
  double worst = 0.0, worst_inv = 0.0;
  for (int k = 0; k < v.legendre_samples; ++k) {
    HamiltonianSpec h{uc(rng), gammas[static_cast<size_t>(k) % gammas.size()]};
    const double r = ur(rng);
    Point q = Point::Zero(1);
    q[0] = r;
    const double closed = lagrangian(h, q);
    const double numeric = numeric_ray_sup(r, h.c_h, h.gamma);
    worst = std::max(worst, std::abs(numeric - closed) / std::max(std::abs(closed), 1e-300));
    const double back = numeric_ray_sup(r, h.c_l(), h.conjugate_exponent());
    const double ham = hamiltonian(h, q);
    worst_inv = std::max(worst_inv, std::abs(back - ham) / std::max(std::abs(ham), 1e-300));
  }
  b.summary["legendre"] = {{"samples", v.legendre_samples}, {"max_relative_error", worst},
                           {"involution_max_relative_error", worst_inv}};
  b.check("legendre_sup_oracle", worst, "<=", 1e-6, "numeric sup of p q - H(p) against c_l |q|^gamma'");
  b.check("legendre_involution", worst_inv, "<=", 1e-6, "numeric transform of L against H");
}

void verify_fenchel(ResultBundle& b, std::mt19937_64& rng) {
  const VerifySection& v = b.config.verify;
  const int dim = b.config.model.dim;
  std::uniform_real_distribution<double> uc(0.2, 3.0), ux(-3.0, 3.0);
  const std::vector<double> gammas{b.config.model.hamiltonian.gamma, 1.5, 3.0};
  int violations = 0;
  double worst_equality = 0.0;
  for (int k = 0; k < v.fenchel_pairs; ++k) {
    HamiltonianSpec h{uc(rng), gammas[static_cast<size_t>(k) % gammas.size()]};
    Point p(dim), q(dim);
    for (int a = 0; a < dim; ++a) p[a] = ux(rng), q[a] = ux(rng);
    const double hp = hamiltonian(h, p), lq = lagrangian(h, q), pq = p.dot(q);
    if (pq > hp + lq + 1e-13 * (hp + lq + std::abs(pq))) ++violations;
    const Point qs = grad_hamiltonian(h, p);
    const double lhs = hp + lagrangian(h, qs);
    worst_equality = std::max(worst_equality, std::abs(lhs - p.dot(qs)) / std::max(lhs, 1e-300));
  }
  b.summary["fenchel"] = {{"pairs", v.fenchel_pairs}, {"violations", violations},
                          {"equality_max_relative_error", worst_equality}};
  b.check("fenchel_violations", static_cast<double>(violations), "<=", 0.0, "p q <= H(p) + L(q) on random pairs");
  b.check("fenchel_equality", worst_equality, "<=", 1e-8, "equality at q = grad H(p)");
}

void verify_adjointness(ResultBundle& b, std::mt19937_64& rng) {
  const int trials = b.config.verify.adjoint_trials;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_div = 0.0, worst_lap = 0.0;
  for (const Grid<double>& g : {Grid<double>(1, 2.0, 101), Grid<double>(2, 2.0, 41), Grid<double>(3, 1.0, 11)}) {
    for (int k = 0; k < trials; ++k) {
      ScalarField f(g.size()), h(g.size());
      VectorField w(g.size(), g.dim());
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        f[i] = u(rng);
        h[i] = u(rng);
        for (int a = 0; a < g.dim(); ++a) w(i, a) = u(rng);
      }
      const ScalarField gw = dot(gradient(g, f), w);
      const ScalarField fd = f.cwiseProduct(divergence(g, w));
      const double scale = integrate(g, gw.cwiseAbs()) + integrate(g, fd.cwiseAbs());
      worst_div = std::max(worst_div, std::abs(integrate(g, gw) + integrate(g, fd)) / scale);
      const ScalarField a = laplacian(g, f).cwiseProduct(h), c = f.cwiseProduct(laplacian(g, h));
      const double lscale = integrate(g, a.cwiseAbs()) + integrate(g, c.cwiseAbs());
      worst_lap = std::max(worst_lap, std::abs(integrate(g, a) - integrate(g, c)) / lscale);
    }
  }
  b.summary["adjointness"] = {{"divergence_max_relative_error", worst_div},
                              {"laplacian_max_relative_error", worst_lap}};
  b.check("gradient_divergence_adjoint", worst_div, "<=", 1e-10, "<grad f, w> + <f, div w> on random fields");
  b.check("laplacian_symmetric", worst_lap, "<=", 1e-10, "<Lap f, h> - <f, Lap h> on random fields");
}

// Stationary FP for random confining drifts, reused by the energy checks.
KPair verify_fokker_planck(ResultBundle& b, std::mt19937_64& rng) {
  const double mass = b.config.model.mass;
  std::uniform_real_distribution<double> amp(-0.5, 0.5), phase(0.0, 6.283185307179586), freq(0.5, 3.0);
  double worst_mass = 0.0, worst_negative = 0.0, min_entry = std::numeric_limits<double>::infinity();
  double worst_constraint = 0.0;
  KPair first;
  int trial = 0;
  for (const Grid<double>& g : {Grid<double>(1, 4.0, 401), Grid<double>(1, 4.0, 401), Grid<double>(2, 3.0, 41)}) {
    const double a1 = amp(rng), k1 = freq(rng), p1 = phase(rng), a2 = amp(rng), k2 = freq(rng), p2 = phase(rng);
    const ScalarField phi = sample(g, [&](const Point& x) {
      return 0.5 * x.squaredNorm() + a1 * std::sin(k1 * x[0] + p1) + a2 * std::cos(k2 * x[x.size() - 1] + p2);
    });
    FPProblem pb;
    pb.drift = gradient(g, phi);
    pb.epsilon = 0.5;
    pb.mass = mass;
    const FPSolution fp = solve_stationary_fp(g, pb);
    worst_mass = std::max(worst_mass, std::abs(integrate(g, fp.m) - mass) / mass);
    worst_negative = std::max(worst_negative, -fp.clamped_min / fp.m.maxCoeff());
    min_entry = std::min(min_entry, fp.m.minCoeff());
    const KPair pair{fp.m, fp.w, pb.epsilon, mass};
    const ConstraintResidual cr = constraint_residual(g, pair);
    worst_constraint = std::max(worst_constraint, cr.max / cr.scale);
    if (trial++ == 0) first = pair;
  }
  b.summary["fokker_planck"] = {{"mass_relative_error", worst_mass},
                                {"min_entry", min_entry},
                                {"largest_clamped_negative_relative", worst_negative},
                                {"constraint_relative_residual", worst_constraint}};
  b.check("fp_mass_conservation", worst_mass, "<=", 1e-12, "|int m - M| / M");
  b.check("fp_positivity", min_entry, ">=", 0.0, "smallest density entry");
  b.check("fp_clamped_negative", worst_negative, "<=", 1e-12, "most negative raw entry relative to max m");
  b.check("fp_constraint_residual", worst_constraint, "<=", 1e-10,
          "max |eps Lap m - div w| relative to its scale");
  return first;
}

void verify_energy_scaling(ResultBundle& b, const KPair& pair) {
  const Grid<double> g(1, 4.0, 401);
  const ModelParams& model = b.config.model;
  ModelParams m1 = model;
  m1.dim = 1;
  if (m1.potential.form == PotentialSpec::Form::polynomial_product) {
    for (auto& mj : m1.potential.minima) mj.location.conservativeResize(1);
  }
  const EnergyBreakdown base = energy_unchecked(g, pair, m1, false);
  const double alpha = model.coupling.alpha;
  double worst = 0.0;
  for (double c : {0.5, 2.0, 3.7}) {
    const KPair scaled{c * pair.m, c * pair.w, pair.epsilon, c * pair.mass};
    const EnergyBreakdown e = energy_unchecked(g, scaled, m1, false);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
    worst = std::max({worst, rel(e.kinetic, c * base.kinetic), rel(e.potential, c * base.potential),
                      rel(e.coupling, std::pow(c, alpha + 1.0) * base.coupling)});
  }
  b.summary["energy_scaling"] = {{"max_relative_error", worst}};
  b.check("energy_scaling", worst, "<=", 1e-12, "kinetic and potential linear in c, coupling as c^(alpha+1)");
}

void verify_subadditivity(ResultBundle& b, int threads) {
  const VerifySection& v = b.config.verify;
  ModelParams model = b.config.model;
  model.epsilon = v.subadditivity_epsilon;
  const Grid<double> g(model.dim, v.subadditivity_half_width, v.subadditivity_points);
  std::vector<double> fractions = v.interior_fractions;
  std::vector<double> endpoint = v.endpoint_fractions;
  std::sort(endpoint.begin(), endpoint.end(), std::greater<>());
  fractions.insert(fractions.end(), endpoint.begin(), endpoint.end());
  std::vector<SubadditivityReport> reports(fractions.size());
  const auto errors = parallel_for(fractions.size(), threads, [&](size_t k) {
    reports[k] = subadditivity_gap(g, model, b.config.solver, fractions[k] * model.mass);
  });
  bool failed = false;
  json rows = json::array();
  Table t{"subadditivity", {"fraction", "e_a", "e_rest", "e_full", "gap"}, {}};
  for (size_t k = 0; k < fractions.size(); ++k) {
    if (record_error(b, errors[k], "subadditivity a=" + format_number(fractions[k]))) {
      failed = true;
      continue;
    }
    const auto& r = reports[k];
    t.rows.push_back({fractions[k], r.e_a, r.e_rest, r.e_full, r.gap});
    rows.push_back({{"fraction", fractions[k]}, {"e_a", r.e_a}, {"e_rest", r.e_rest}, {"e_full", r.e_full},
                    {"gap", r.gap}});
  }
  b.tables.push_back(t);
  b.summary["subadditivity"] = rows;
  if (failed) return;
  const size_t ni = v.interior_fractions.size();
  double min_gap = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < ni; ++k) min_gap = std::min(min_gap, reports[k].gap);
  b.check("subadditivity_interior_min_gap", min_gap, ">=", 0.0, "e(a) + e(M - a) - e(M) at interior a");
  bool decreasing = true;
  for (size_t k = ni + 1; k < fractions.size(); ++k) {
    if (!(reports[k].gap < reports[k - 1].gap)) decreasing = false;
  }
  b.check("subadditivity_endpoint_decreasing", decreasing, "gap decreases as a -> 0");
  if (fractions.size() > ni + 1) {
    b.check("subadditivity_endpoint_ratio", reports.back().gap / reports[ni].gap, "<=", 0.25,
            "gap at the smallest a over the gap at the largest endpoint a");
  }
}

void run_verify(ResultBundle& b, int threads) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(b.config.seed);
  verify_legendre(b, rng);
  verify_fenchel(b, rng);
  verify_adjointness(b, rng);
  const KPair pair = verify_fokker_planck(b, rng);
  verify_energy_scaling(b, pair);
  verify_subadditivity(b, threads);
  const double elapsed = seconds_since(t0);
  b.summary["suite_seconds"] = elapsed;
  b.check("suite_runtime_seconds", elapsed, "<", b.config.verify.time_budget, "wall time of the invariant suite");
}

}  // namespace

double numeric_ray_sup(double r, double c, double k) {
  auto g = [&](double t) { return t * r - c * std::pow(t, k); };
  if (r == 0.0) return 0.0;
  double hi = 1.0;
  while (g(hi) > 0.0) hi *= 2.0;
  const int samples = 4000;
  int best = 0;
  double best_val = 0.0;
  for (int i = 1; i <= samples; ++i) {
    const double val = g(hi * i / samples);
    if (val > best_val) best_val = val, best = i;
  }
  double a = hi * std::max(best - 1, 0) / samples, d = hi * std::min(best + 1, samples) / samples;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = d - phi * (d - a), x2 = a + phi * (d - a);
  double f1 = g(x1), f2 = g(x2);
  for (int it = 0; it < 200 && d - a > 1e-15 * std::max(1.0, d); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2, f1 = f2;
      x2 = a + phi * (d - a), f2 = g(x2);
    } else {
      d = x2;
      x2 = x1, f2 = f1;
      x1 = d - phi * (d - a), f1 = g(x1);
    }
  }
  return std::max({best_val, f1, f2});
}

ResultBundle run(const RunConfig& config, int threads) {
  ResultBundle b;
  b.config = config;
  b.config.groundstate.options.seed = config.seed;
  b.started = utc_now();
  const auto t0 = Clock::now();
  switch (config.command) {
    case Command::solve: run_solve(b, threads); break;
    case Command::sweep: run_sweep_command(b, threads); break;
    case Command::flattest: run_flattest(b, threads); break;
    case Command::groundstate: run_groundstate(b, threads); break;
    case Command::hopfcole: run_hopfcole(b, threads); break;
    case Command::verify: run_verify(b, threads); break;
  }
  b.runtime_seconds = seconds_since(t0);
  b.finished = utc_now();
  return b;
}

}  // namespace emfg::cli
