#pragma once

// Scenario files and the runners behind the command line tool.
//
//   potential = quartic          # built-in id or path to a potential table
//   dimension = 1
//   [grid]       min = -10   max = 10   count = 1025   (comma lists in 2-D)
//   [dual_grid]  same keys; defaults to [grid]
//   [out_grid]   optional grid for phi_t
//   [times]      values = 0.1, 0.2  or  t_min, t_max, count, spacing = linear|geometric
//   [checks]     names = ..., tolerance.<name> = ..., plus check parameters
//   [output]     dir, formats = csv, json, snapshots = true|false

#include "heatdual/grid.hpp"
#include "heatdual/report.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace heatdual {

/// Every check name accepted in [checks] names, in report order.
const std::vector<std::string>& check_names();

struct CheckParameters {
  /// Times for the pointwise checks.
  std::vector<double> times{0.25, 0.5, 1.0};
  std::vector<double> small_times{0.05, 0.1, 0.5};
  std::vector<double> rescaling_times{0.1, 0.3, 1.0};
  std::optional<double> dt;
  /// Point of the Hessian-variance identity; the origin when empty.
  std::optional<std::vector<double>> point;
  std::optional<double> certificate_m;
  std::optional<double> certificate_b;
};

struct ScenarioConfig {
  std::filesystem::path source;
  std::string potential;
  int dimension = 1;
  std::optional<GridSpec> grid;
  std::optional<GridSpec> dual_grid;
  std::optional<GridSpec> out_grid;
  std::vector<double> times;
  /// Empty means every check that applies to the potential.
  std::vector<std::string> checks;
  std::map<std::string, double> tolerances;
  CheckParameters parameters;
  /// Unset means --out, then the HEATDUAL_OUT environment variable, then ".".
  std::optional<std::filesystem::path> output_dir;
  bool write_csv = true;
  bool write_json = true;
  bool snapshots = false;
};

/// Throws ConfigError with "file:line: field: message" diagnostics.
ScenarioConfig parse_config(const std::string& text, const std::string& name = "<config>");
ScenarioConfig load_config(const std::filesystem::path& path);

/// Initial potential and the properties the runners need.
struct ScenarioPotential {
  std::string id;
  PotentialField phi0;
  GridSpec dual;
  std::optional<GridSpec> out;
  bool smooth = true;
  bool strictly_convex = false;
  std::optional<std::pair<double, double>> certificate;
};

ScenarioPotential resolve_potential(const ScenarioConfig& config);

/// Writes trace.csv (and trace.json); snapshots as potential tables.
void run_evolve(const ScenarioConfig& config, const std::filesystem::path& out_dir);

/// Runs the selected checks. Tolerances are multiplied by tolerance_scale.
std::vector<CheckReport> verify_checks(const ScenarioConfig& config, double tolerance_scale = 1.0);

/// Writes report.json and returns true when every check passed.
bool run_verify(const ScenarioConfig& config, const std::filesystem::path& out_dir,
                double tolerance_scale = 1.0);

/// Writes primal.dat and dual.dat.
void run_conjugate(const ScenarioConfig& config, const std::filesystem::path& out_dir);

std::string format_report_json(const std::vector<CheckReport>& reports);

}  // namespace heatdual
