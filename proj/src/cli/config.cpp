#include "emfg/cli/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace emfg::cli {

namespace {

std::string where(const YAML::Mark& m) {
  if (m.is_null()) return "line 1, column 1";
  return "line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1);
}

[[noreturn]] void fail(const YAML::Mark& m, const std::string& msg) { throw ConfigError(where(m) + ": " + msg); }

template <typename T>
const char* type_name() {
  if constexpr (std::is_same_v<T, bool>) return "a boolean";
  else if constexpr (std::is_integral_v<T>) return "an integer";
  else if constexpr (std::is_floating_point_v<T>) return "a number";
  else return "a string";
}

template <typename T>
T scalar_as(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) fail(node.Mark(), path + " must be " + type_name<T>());
  try {
    return node.as<T>();
  } catch (const YAML::BadConversion&) {
    fail(node.Mark(), path + " must be " + type_name<T>() + ", got '" + node.Scalar() + "'");
  }
}

std::vector<double> sequence_as(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence()) fail(node.Mark(), path + " must be a list of numbers");
  std::vector<double> out;
  for (size_t k = 0; k < node.size(); ++k) out.push_back(scalar_as<double>(node[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

// A mapping whose keys are consumed one by one; finish() rejects leftovers.
class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) fail(node_.Mark(), (path_.empty() ? "document" : path_) + " must be a mapping");
  }

  YAML::Mark mark() const { return node_ ? node_.Mark() : YAML::Mark::null_mark(); }

  YAML::Node child(const std::string& key) {
    allowed_.insert(key);
    if (!node_ || !node_.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
    const YAML::Node& map = node_;
    return map[key];
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  bool read(const std::string& key, T& out) {
    const YAML::Node n = child(key);
    if (!n) return false;
    out = scalar_as<T>(n, name(key));
    return true;
  }

  bool read_list(const std::string& key, std::vector<double>& out) {
    const YAML::Node n = child(key);
    if (!n) return false;
    out = sequence_as(n, name(key));
    return true;
  }

  /// Positive finite number.
  void read_positive(const std::string& key, double& out) {
    if (read(key, out) && !(out > 0.0 && std::isfinite(out))) fail(child(key).Mark(), name(key) + " must be positive");
  }

  void read_positive_list(const std::string& key, std::vector<double>& out, bool nonempty = true) {
    if (!read_list(key, out)) return;
    if (nonempty && out.empty()) fail(child(key).Mark(), name(key) + " must not be empty");
    for (double v : out) {
      if (!(v > 0.0 && std::isfinite(v))) fail(child(key).Mark(), name(key) + " entries must be positive");
    }
  }

  void read_count(const std::string& key, int& out, int min_value) {
    if (read(key, out) && out < min_value) {
      fail(child(key).Mark(), name(key) + " must be >= " + std::to_string(min_value));
    }
  }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      const std::string key = it->first.Scalar();
      if (!allowed_.count(key)) {
        std::string known;
        for (const auto& k : allowed_) known += (known.empty() ? "" : ", ") + k;
        fail(it->first.Mark(), "unknown key '" + name(key) + "' (expected one of: " + known + ")");
      }
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> allowed_;
};

void anchored(const YAML::Mark& m, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    fail(m, e.what());
  }
}

Point point_as(const YAML::Node& node, const std::string& path) {
  if (node.IsScalar()) {
    Point p(1);
    p[0] = scalar_as<double>(node, path);
    return p;
  }
  const std::vector<double> v = sequence_as(node, path);
  if (v.empty()) fail(node.Mark(), path + " must not be empty");
  return Eigen::Map<const Point>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void parse_potential(Section& s, PotentialSpec& pot) {
  std::string form;
  if (s.read("form", form)) {
    if (form == "power") pot.form = PotentialSpec::Form::power;
    else if (form == "polynomial_product") pot.form = PotentialSpec::Form::polynomial_product;
    else fail(s.child("form").Mark(), s.name("form") + " must be 'power' or 'polynomial_product', got '" + form + "'");
  }
  s.read("power", pot.power);
  s.read("prefactor", pot.prefactor);
  const YAML::Node minima = s.child("minima");
  if (minima) {
    if (!minima.IsSequence()) fail(minima.Mark(), s.name("minima") + " must be a list");
    pot.minima.clear();
    for (size_t j = 0; j < minima.size(); ++j) {
      Section ms(minima[j], s.name("minima") + "[" + std::to_string(j) + "]");
      PotentialMinimum mj;
      const YAML::Node loc = ms.child("location");
      if (!loc) fail(ms.mark(), ms.name("location") + " is required");
      mj.location = point_as(loc, ms.name("location"));
      ms.read("exponent", mj.exponent);
      ms.finish();
      pot.minima.push_back(mj);
    }
  }
  s.finish();
}

void parse_model(Section& s, ModelParams& model) {
  s.read("dim", model.dim);
  {
    Section h(s.child("hamiltonian"), s.name("hamiltonian"));
    h.read("c_h", model.hamiltonian.c_h);
    h.read("gamma", model.hamiltonian.gamma);
    h.finish();
    anchored(h.mark(), [&] { model.hamiltonian.validate(); });
  }
  YAML::Mark alpha_mark = s.mark();
  {
    Section c(s.child("coupling"), s.name("coupling"));
    c.read("c_f", model.coupling.c_f);
    if (c.read("alpha", model.coupling.alpha)) alpha_mark = c.child("alpha").Mark();
    c.finish();
    anchored(c.mark(), [&] { model.coupling.validate(); });
  }
  {
    Section p(s.child("potential"), s.name("potential"));
    parse_potential(p, model.potential);
    anchored(p.mark(), [&] { model.potential.validate(model.dim); });
  }
  s.read_positive("mass", model.mass);
  s.read_positive("epsilon", model.epsilon);
  if (s.read("mollifier_width", model.mollifier_width) && model.mollifier_width < 0.0) {
    fail(s.child("mollifier_width").Mark(), s.name("mollifier_width") + " must be >= 0 (0 selects twice the spacing)");
  }
  s.finish();
  // Everything else is checked above, so a failure here is the subcriticality gate.
  anchored(alpha_mark, [&] { model.validate(); });
}

void parse_solver(Section& s, SolverConfig& cfg) {
  s.read("damping", cfg.damping);
  s.read("max_outer_iterations", cfg.max_outer_iterations);
  s.read("tolerance", cfg.tolerance);
  s.read("hjb_tolerance", cfg.hjb_tolerance);
  s.read("hjb_max_iterations", cfg.hjb_max_iterations);
  s.read("anderson_depth", cfg.anderson_depth);
  s.read("newton_switch", cfg.newton_switch);
  s.read("mollified", cfg.mollified);
  s.read("initial_sigma", cfg.initial_sigma);
  std::string scheme;
  if (s.read("hjb_scheme", scheme)) {
    if (scheme == "central") cfg.hjb_scheme = HamiltonianScheme::central;
    else if (scheme == "godunov") cfg.hjb_scheme = HamiltonianScheme::godunov;
    else fail(s.child("hjb_scheme").Mark(), s.name("hjb_scheme") + " must be 'central' or 'godunov'");
  }
  if (s.read("fp_scheme", scheme)) {
    if (scheme == "central") cfg.fp_scheme = FluxScheme::central;
    else if (scheme == "scharfetter_gummel") cfg.fp_scheme = FluxScheme::scharfetter_gummel;
    else fail(s.child("fp_scheme").Mark(), s.name("fp_scheme") + " must be 'central' or 'scharfetter_gummel'");
  }
  s.finish();
  anchored(s.mark(), [&] { cfg.validate(); });
}

void check_odd_points(Section& s, const std::string& key, int points) {
  if (points < 3 || points % 2 == 0) fail(s.child(key).Mark(), s.name(key) + " must be an odd integer >= 3");
}

void check_fraction(Section& s, const std::string& key, double v) {
  if (!(v > 0.0 && v < 1.0)) fail(s.child(key).Mark(), s.name(key) + " must lie in (0, 1)");
}

}  // namespace

const char* command_name(Command c) {
  switch (c) {
    case Command::solve: return "solve";
    case Command::sweep: return "sweep";
    case Command::flattest: return "flattest";
    case Command::groundstate: return "groundstate";
    case Command::hopfcole: return "hopfcole";
    case Command::verify: return "verify";
  }
  return "solve";
}

Command parse_command(const std::string& name) {
  for (Command c : {Command::solve, Command::sweep, Command::flattest, Command::groundstate, Command::hopfcole,
                    Command::verify}) {
    if (name == command_name(c)) return c;
  }
  throw ConfigError("unknown command '" + name + "'");
}

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    fail(e.mark, e.msg);
  }
  RunConfig cfg;
  Section s(root, "");

  std::string command;
  if (s.read("command", command)) anchored(s.child("command").Mark(), [&] { cfg.command = parse_command(command); });

  {
    Section m(s.child("model"), "model");
    parse_model(m, cfg.model);
  }
  {
    Section g(s.child("grid"), "grid");
    g.read("half_width", cfg.grid.half_width);
    g.read("points", cfg.grid.points);
    g.finish();
    anchored(g.mark(), [&] { Grid<double>(cfg.model.dim, cfg.grid.half_width, cfg.grid.points); });
  }
  {
    Section sv(s.child("solver"), "solver");
    parse_solver(sv, cfg.solver);
  }
  s.read_count("competitors", cfg.competitors, 0);
  {
    Section sw(s.child("sweep"), "sweep");
    auto& o = cfg.sweep.options;
    sw.read_positive_list("epsilons", cfg.sweep.epsilons);
    sw.read_positive("window", o.window);
    sw.read_positive("rescaled_spacing", o.rescaled_spacing);
    sw.read_positive_list("radii", o.radii);
    if (sw.read("eta_fraction", o.eta_fraction)) check_fraction(sw, "eta_fraction", o.eta_fraction);
    sw.read("warm_start", o.warm_start);
    sw.finish();
  }
  {
    Section f(s.child("flattest"), "flattest");
    auto& o = cfg.flattest.options;
    f.read_positive_list("epsilons", cfg.flattest.epsilons);
    f.read_positive("half_width", o.half_width);
    f.read_positive("rescaled_spacing", o.rescaled_spacing);
    f.read_positive("max_spacing", o.max_spacing);
    f.read("swapped_rerun", cfg.flattest.swapped_rerun);
    f.finish();
  }
  {
    Section g(s.child("groundstate"), "groundstate");
    auto& o = cfg.groundstate.options;
    g.read_positive_list("deltas", cfg.groundstate.deltas);
    g.read_positive("b", cfg.groundstate.b);
    g.read_positive("half_width", o.half_width);
    if (g.read("points", o.points)) check_odd_points(g, "points", o.points);
    g.read_count("competitors", o.competitors, 0);
    g.finish();
  }
  {
    Section h(s.child("hopfcole"), "hopfcole");
    if (h.read("relaxation", cfg.hopfcole.relaxation) && !(cfg.hopfcole.relaxation > 0.0 && cfg.hopfcole.relaxation <= 1.0)) {
      fail(h.child("relaxation").Mark(), "hopfcole.relaxation must lie in (0, 1]");
    }
    h.read_positive("tolerance", cfg.hopfcole.tolerance);
    h.read_count("max_iterations", cfg.hopfcole.max_iterations, 1);
    h.finish();
  }
  {
    Section v(s.child("verify"), "verify");
    auto& o = cfg.verify;
    v.read_count("legendre_samples", o.legendre_samples, 1);
    v.read_count("fenchel_pairs", o.fenchel_pairs, 1);
    v.read_count("adjoint_trials", o.adjoint_trials, 1);
    v.read_positive("subadditivity_epsilon", o.subadditivity_epsilon);
    v.read_positive("subadditivity_half_width", o.subadditivity_half_width);
    if (v.read("subadditivity_points", o.subadditivity_points)) check_odd_points(v, "subadditivity_points", o.subadditivity_points);
    v.read_positive_list("interior_fractions", o.interior_fractions);
    v.read_positive_list("endpoint_fractions", o.endpoint_fractions);
    for (const char* key : {"interior_fractions", "endpoint_fractions"}) {
      for (double a : key[0] == 'i' ? o.interior_fractions : o.endpoint_fractions) {
        if (!(a < 1.0)) fail(v.child(key).Mark(), v.name(key) + " entries must lie in (0, 1)");
      }
    }
    v.read_positive("time_budget", o.time_budget);
    v.finish();
  }
  {
    Section o(s.child("output"), "output");
    o.read("dir", cfg.output_dir);
    o.finish();
  }
  s.read("seed", cfg.seed);
  s.finish();

  cfg.sweep.options.solver = cfg.solver;
  cfg.flattest.options.solver = cfg.solver;
  cfg.groundstate.options.solver = cfg.solver;
  cfg.groundstate.options.seed = cfg.seed;
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

void emit_list(YAML::Emitter& e, const std::vector<double>& v) {
  e << YAML::Flow << YAML::BeginSeq;
  for (double x : v) e << x;
  e << YAML::EndSeq;
}

void emit_point(YAML::Emitter& e, const Point& p) {
  e << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index k = 0; k < p.size(); ++k) e << p[k];
  e << YAML::EndSeq;
}

}  // namespace

std::string emit_config(const RunConfig& c) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e.SetFloatPrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "command" << YAML::Value << command_name(c.command);

  const ModelParams& m = c.model;
  e << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "dim" << YAML::Value << m.dim;
  e << YAML::Key << "hamiltonian" << YAML::Value << YAML::BeginMap << YAML::Key << "c_h" << YAML::Value
    << m.hamiltonian.c_h << YAML::Key << "gamma" << YAML::Value << m.hamiltonian.gamma << YAML::EndMap;
  e << YAML::Key << "coupling" << YAML::Value << YAML::BeginMap << YAML::Key << "c_f" << YAML::Value << m.coupling.c_f
    << YAML::Key << "alpha" << YAML::Value << m.coupling.alpha << YAML::EndMap;
  e << YAML::Key << "potential" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "form" << YAML::Value
    << (m.potential.form == PotentialSpec::Form::power ? "power" : "polynomial_product");
  e << YAML::Key << "power" << YAML::Value << m.potential.power;
  e << YAML::Key << "prefactor" << YAML::Value << m.potential.prefactor;
  e << YAML::Key << "minima" << YAML::Value << YAML::BeginSeq;
  for (const auto& mj : m.potential.minima) {
    e << YAML::Flow << YAML::BeginMap << YAML::Key << "location" << YAML::Value;
    emit_point(e, mj.location);
    e << YAML::Key << "exponent" << YAML::Value << mj.exponent << YAML::EndMap;
  }
  e << YAML::EndSeq << YAML::EndMap;
  e << YAML::Key << "mass" << YAML::Value << m.mass;
  e << YAML::Key << "epsilon" << YAML::Value << m.epsilon;
  e << YAML::Key << "mollifier_width" << YAML::Value << m.mollifier_width;
  e << YAML::EndMap;

  e << YAML::Key << "grid" << YAML::Value << YAML::BeginMap << YAML::Key << "half_width" << YAML::Value
    << c.grid.half_width << YAML::Key << "points" << YAML::Value << c.grid.points << YAML::EndMap;

  const SolverConfig& s = c.solver;
  e << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "damping" << YAML::Value << s.damping;
  e << YAML::Key << "max_outer_iterations" << YAML::Value << s.max_outer_iterations;
  e << YAML::Key << "tolerance" << YAML::Value << s.tolerance;
  e << YAML::Key << "hjb_tolerance" << YAML::Value << s.hjb_tolerance;
  e << YAML::Key << "hjb_max_iterations" << YAML::Value << s.hjb_max_iterations;
  e << YAML::Key << "anderson_depth" << YAML::Value << s.anderson_depth;
  e << YAML::Key << "newton_switch" << YAML::Value << s.newton_switch;
  e << YAML::Key << "mollified" << YAML::Value << s.mollified;
  e << YAML::Key << "initial_sigma" << YAML::Value << s.initial_sigma;
  e << YAML::Key << "hjb_scheme" << YAML::Value << (s.hjb_scheme == HamiltonianScheme::central ? "central" : "godunov");
  e << YAML::Key << "fp_scheme" << YAML::Value
    << (s.fp_scheme == FluxScheme::central ? "central" : "scharfetter_gummel");
  e << YAML::EndMap;

  e << YAML::Key << "competitors" << YAML::Value << c.competitors;

  const SweepOptions& so = c.sweep.options;
  e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "epsilons" << YAML::Value;
  emit_list(e, c.sweep.epsilons);
  e << YAML::Key << "window" << YAML::Value << so.window;
  e << YAML::Key << "rescaled_spacing" << YAML::Value << so.rescaled_spacing;
  e << YAML::Key << "radii" << YAML::Value;
  emit_list(e, so.radii);
  e << YAML::Key << "eta_fraction" << YAML::Value << so.eta_fraction;
  e << YAML::Key << "warm_start" << YAML::Value << so.warm_start;
  e << YAML::EndMap;

  const FlattestOptions& fo = c.flattest.options;
  e << YAML::Key << "flattest" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "epsilons" << YAML::Value;
  emit_list(e, c.flattest.epsilons);
  e << YAML::Key << "half_width" << YAML::Value << fo.half_width;
  e << YAML::Key << "rescaled_spacing" << YAML::Value << fo.rescaled_spacing;
  e << YAML::Key << "max_spacing" << YAML::Value << fo.max_spacing;
  e << YAML::Key << "swapped_rerun" << YAML::Value << c.flattest.swapped_rerun;
  e << YAML::EndMap;

  const GroundStateOptions& go = c.groundstate.options;
  e << YAML::Key << "groundstate" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "deltas" << YAML::Value;
  emit_list(e, c.groundstate.deltas);
  e << YAML::Key << "b" << YAML::Value << c.groundstate.b;
  e << YAML::Key << "half_width" << YAML::Value << go.half_width;
  e << YAML::Key << "points" << YAML::Value << go.points;
  e << YAML::Key << "competitors" << YAML::Value << go.competitors;
  e << YAML::EndMap;

  e << YAML::Key << "hopfcole" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "relaxation" << YAML::Value << c.hopfcole.relaxation;
  e << YAML::Key << "tolerance" << YAML::Value << c.hopfcole.tolerance;
  e << YAML::Key << "max_iterations" << YAML::Value << c.hopfcole.max_iterations;
  e << YAML::EndMap;

  const VerifySection& v = c.verify;
  e << YAML::Key << "verify" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "legendre_samples" << YAML::Value << v.legendre_samples;
  e << YAML::Key << "fenchel_pairs" << YAML::Value << v.fenchel_pairs;
  e << YAML::Key << "adjoint_trials" << YAML::Value << v.adjoint_trials;
  e << YAML::Key << "subadditivity_epsilon" << YAML::Value << v.subadditivity_epsilon;
  e << YAML::Key << "subadditivity_half_width" << YAML::Value << v.subadditivity_half_width;
  e << YAML::Key << "subadditivity_points" << YAML::Value << v.subadditivity_points;
  e << YAML::Key << "interior_fractions" << YAML::Value;
  emit_list(e, v.interior_fractions);
  e << YAML::Key << "endpoint_fractions" << YAML::Value;
  emit_list(e, v.endpoint_fractions);
  e << YAML::Key << "time_budget" << YAML::Value << v.time_budget;
  e << YAML::EndMap;

  e << YAML::Key << "output" << YAML::Value << YAML::BeginMap << YAML::Key << "dir" << YAML::Value << c.output_dir
    << YAML::EndMap;
  e << YAML::Key << "seed" << YAML::Value << c.seed;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace emfg::cli
