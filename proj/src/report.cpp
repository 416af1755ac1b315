#include "heatdual/report.hpp"

#include "heatdual/error.hpp"

#include <cmath>

namespace heatdual {

void CheckReport::observe(double residual, const std::vector<double>& location,
                          std::optional<double> t) {
  const bool first = checked++ == 0;
  const bool worse = std::isnan(residual) || (!std::isnan(max_residual) && residual > max_residual);
  if (worse || first) {
    if (worse) max_residual = residual;
    worst_location = location;
    worst_t = t;
  }
}

void CheckReport::merge(const CheckReport& other) {
  const bool worse = std::isnan(other.max_residual) ||
                     (!std::isnan(max_residual) && other.max_residual > max_residual);
  const bool first = checked == 0 && other.checked > 0;
  if (worse || first) {
    if (worse) max_residual = other.max_residual;
    worst_location = other.worst_location;
    worst_t = other.worst_t;
  }
  checked += other.checked;
  skipped += other.skipped;
  for (const auto& d : other.details) details.push_back(d);
}

CheckReport& CheckReport::finalize() {
  passed = !std::isnan(max_residual) && max_residual <= tolerance;
  return *this;
}

double CheckReport::detail(const std::string& key) const {
  for (const auto& [k, v] : details)
    if (k == key) return v;
  throw InvalidArgument("report '" + name + "' has no detail '" + key + "'");
}

namespace {
nlohmann::ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}
}  // namespace

nlohmann::ordered_json to_json(const CheckReport& r) {
  nlohmann::ordered_json j;
  j["name"] = r.name;
  j["max_residual"] = number(r.max_residual);
  j["tolerance"] = number(r.tolerance);
  j["passed"] = r.passed;
  nlohmann::ordered_json loc;
  auto point = nlohmann::ordered_json::array();
  for (double x : r.worst_location) point.push_back(number(x));
  loc["point"] = point;
  loc["t"] = r.worst_t ? number(*r.worst_t) : nlohmann::ordered_json(nullptr);
  j["worst_location"] = loc;
  j["samples"] = {{"checked", r.checked}, {"skipped", r.skipped}};
  nlohmann::ordered_json details = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.details) details[k] = number(v);
  j["details"] = details;
  return j;
}

}  // namespace heatdual
