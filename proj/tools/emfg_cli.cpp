// emfg: ergodic mean field game solver and vanishing-viscosity experiments.
//
//   emfg solve|sweep|flattest|groundstate|hopfcole|verify --config <path> --out <dir>
//        [--seed N] [--threads N]
//
// Exit status: 0 all assertions pass, 1 solver failure, 2 config error,
// 3 assertion failure. EMFG_OUT_DIR, when set, replaces the output directory.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>

#include "emfg/cli/runner.hpp"

namespace {

constexpr int kExitConfig = 2;

std::string pick_output_dir(const std::string& flag, const std::string& from_config) {
  if (const char* env = std::getenv("EMFG_OUT_DIR"); env && *env) return env;
  if (!flag.empty()) return flag;
  return from_config;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace emfg::cli;
  CLI::App app{"Ergodic mean field game solver"};
  std::string command, config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("command", command, "solve, sweep, flattest, groundstate, hopfcole or verify")
      ->required()
      ->check(CLI::IsMember({"solve", "sweep", "flattest", "groundstate", "hopfcole", "verify"}));
  app.add_option("--config", config_path, "YAML run configuration")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (EMFG_OUT_DIR takes precedence)");
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides the config)");
  app.add_option("--threads", threads, "threads for independent solves")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  RunConfig cfg;
  try {
    cfg = load_config(config_path);
    cfg.command = parse_command(command);
    if (*seed_opt) cfg.seed = seed;
    cfg.output_dir = pick_output_dir(out_dir, cfg.output_dir);
    if (cfg.output_dir.empty()) throw emfg::ConfigError("no output directory: pass --out or set EMFG_OUT_DIR");
  } catch (const emfg::ConfigError& e) {
    std::cerr << "config error: " << config_path << ": " << e.what() << "\n";
    return kExitConfig;
  }

  ResultBundle bundle;
  try {
    bundle = run(cfg, threads);
  } catch (const emfg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 1;
  }
  try {
    emit(bundle, cfg.output_dir);
  } catch (const std::exception& e) {
    std::cerr << "cannot write results: " << e.what() << "\n";
    return 1;
  }

  for (const auto& a : bundle.assertions) {
    std::printf("%s %s = %s (%s %s)\n", a.pass ? "PASS" : "FAIL", a.name.c_str(), format_number(a.value).c_str(),
                a.relation.c_str(), format_number(a.threshold).c_str());
  }
  for (const auto& f : bundle.failures) std::printf("SOLVER FAILURE %s\n", f.c_str());
  std::printf("%s: %d/%zu assertions passed, %zu solver failures, results in %s\n", command_name(cfg.command),
              bundle.passed(), bundle.assertions.size(), bundle.failures.size(), cfg.output_dir.c_str());
  return bundle.exit_code();
}
