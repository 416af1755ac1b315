#pragma once

#include <json.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace heatdual {

/// Result of one numerical verification. passed <=> max_residual <= tolerance.
struct CheckReport {
  std::string name;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  std::vector<double> worst_location;
  std::optional<double> worst_t;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  /// Named auxiliary values (LHS/RHS, slack, coverage...), kept in insertion order.
  std::vector<std::pair<std::string, double>> details;

  CheckReport() = default;
  CheckReport(std::string name, double tolerance) : name(std::move(name)), tolerance(tolerance) {}

  /// Records a residual; keeps the location when it is the new worst.
  void observe(double residual, const std::vector<double>& location,
               std::optional<double> t = std::nullopt);
  void add_detail(std::string key, double value) { details.emplace_back(std::move(key), value); }
  /// Folds another report of the same check into this one.
  void merge(const CheckReport& other);
  /// Sets `passed` from the residual and tolerance. NaN residuals fail.
  CheckReport& finalize();
  double detail(const std::string& key) const;
};

nlohmann::ordered_json to_json(const CheckReport& report);

}  // namespace heatdual
