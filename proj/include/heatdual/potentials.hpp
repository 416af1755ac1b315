#pragma once

// Built-in test potentials and whitespace-separated potential tables.

#include "heatdual/grid.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace heatdual {

/// phi(x) >= M|x| - b for the given M.
using CertificateOffset = std::function<double(double M)>;

struct BuiltinPotential {
  std::string id;
  std::string formula;
  int dim = 1;
  std::function<double(const Vec&)> f;
  bool smooth = true;
  /// Positive definite Hessian everywhere on its domain (Brascamp-Lieb applies).
  bool strictly_convex = true;
  bool gaussian = false;
  GridSpec source;
  GridSpec dual;
  CertificateOffset certificate;
  /// Wider grid for the evolved potential when the support is compact.
  std::optional<GridSpec> out = std::nullopt;

  PotentialField sample() const { return PotentialField::sample(source, f); }
  PotentialField sample(const GridSpec& grid) const { return PotentialField::sample(grid, f); }
};

const std::vector<BuiltinPotential>& builtin_potentials();

/// nullptr when the id is unknown.
const BuiltinPotential* find_potential(const std::string& id);

/// Reads lines `x_1 ... x_n value`. Blank lines and lines starting with '#'
/// are ignored; `inf` or values >= kCap mean outside the domain. The nodes must
/// form a complete uniform grid listed in row-major order.
PotentialField load_potential_table(const std::string& path);

/// Writes a field in the format read by load_potential_table, %.17g per value.
void write_potential_table(const std::string& path, const ScalarField& field);

}  // namespace heatdual
