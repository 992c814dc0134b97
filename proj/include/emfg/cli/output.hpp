#pragma once

// Result bundle and its on-disk form: CSV tables, summary.json, SVG plots and
// the config echo.

#include <json.hpp>

#include <string>
#include <vector>

#include "emfg/cli/config.hpp"

namespace emfg::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "1.0.0";

struct Table {
  std::string name;  // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Plot {
  std::string name;  // file stem
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
};

struct Assertion {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // how value is compared with threshold, e.g. "<="
  std::string detail;
};

struct ResultBundle {
  RunConfig config;
  std::vector<Table> tables;
  std::vector<Plot> plots;
  std::vector<Assertion> assertions;
  std::vector<std::string> failures;  // solver failures, one line each
  nlohmann::json summary = nlohmann::json::object();
  std::string started;   // UTC, ISO 8601
  std::string finished;
  double runtime_seconds = 0.0;

  /// Records an assertion and returns its outcome.
  bool check(const std::string& name, double value, const std::string& relation, double threshold,
             const std::string& detail = "");
  /// Boolean assertion; value is 1 or 0.
  bool check(const std::string& name, bool pass, const std::string& detail = "");

  int passed() const;
  /// 0 all assertions pass, 1 solver failure, 3 assertion failure.
  int exit_code() const;
};

/// %.17g, with nan and inf spelled out.
std::string format_number(double v);

std::string render_csv(const Table& t);
std::string render_svg(const Plot& p);
nlohmann::json summary_document(const ResultBundle& b);

/// Writes <name>.csv per table, <name>.svg per plot, summary.json and
/// config.yaml into `dir` (created if missing). Returns the written paths.
std::vector<std::string> emit(const ResultBundle& b, const std::string& dir);

}  // namespace emfg::cli
