#pragma once

// Uniform rectangular grids, sampled scalar fields, trapezoid quadrature and
// central finite differences. Every other module is built on these types.

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace heatdual {

/// Finite stand-in for +infinity. e^{-kCap} is exactly 0 in double precision.
inline constexpr double kCap = 1e9;
inline constexpr std::size_t kDefaultPointBudget = std::size_t{1} << 22;
inline constexpr double kDefaultMargin = 0.1;
inline constexpr int kMaxDim = 3;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using Index = std::array<std::size_t, kMaxDim>;

inline bool is_capped(double v) { return v >= kCap; }

struct Axis {
  double min = 0.0;
  double max = 1.0;
  std::size_t count = 8;

  double spacing() const { return (max - min) / static_cast<double>(count - 1); }
  /// Node coordinate. The upper half is measured from `max`, so a grid with
  /// min == -max is exactly mirror symmetric in floating point.
  double coord(std::size_t i) const;

  friend bool operator==(const Axis&, const Axis&) = default;
};

class GridSpec {
 public:
  explicit GridSpec(std::vector<Axis> axes, std::size_t point_budget = kDefaultPointBudget);

  /// Same bounds and count on every axis.
  static GridSpec cube(int dim, double min, double max, std::size_t count);

  int dim() const { return static_cast<int>(axes_.size()); }
  const Axis& axis(int k) const { return axes_[static_cast<std::size_t>(k)]; }
  const std::vector<Axis>& axes() const { return axes_; }
  std::size_t size() const { return size_; }
  std::size_t stride(int k) const { return strides_[static_cast<std::size_t>(k)]; }
  double spacing(int k) const { return axis(k).spacing(); }
  double cell_volume() const;

  Index unravel(std::size_t flat) const;
  std::size_t ravel(const Index& idx) const;
  Vec point(std::size_t flat) const;
  Vec point(const Index& idx) const;

  /// Nearest node (clamped to the box).
  std::size_t nearest(const Vec& x) const;
  bool contains(const Vec& x) const;

  /// True when every axis satisfies min == -max.
  bool symmetric() const;
  /// Index of the node at -x. Requires a symmetric grid.
  std::size_t mirror(std::size_t flat) const;

  /// Grid with every coordinate multiplied by `factor` > 0.
  GridSpec scaled(double factor) const;

  std::string describe() const;

  friend bool operator==(const GridSpec& a, const GridSpec& b) { return a.axes_ == b.axes_; }

 private:
  std::vector<Axis> axes_;
  std::array<std::size_t, kMaxDim> strides_{};
  std::size_t size_ = 0;
};

/// Inclusive per-axis index box.
struct Region {
  Index lo{};
  Index hi{};
  int dim = 1;

  static Region full(const GridSpec& spec);
  /// Drops max(2, floor(fraction * count)) nodes on each side of each axis.
  static Region interior(const GridSpec& spec, double margin_fraction = kDefaultMargin);

  bool contains(const Index& idx) const;
  std::size_t size() const;
  /// Flat grid indices of the region, in row-major order.
  std::vector<std::size_t> nodes(const GridSpec& spec) const;
};

enum class FieldKind { potential, density, log_density, scalar };

std::string to_string(FieldKind kind);

class ScalarField {
 public:
  ScalarField(GridSpec spec, std::vector<double> values, FieldKind kind);

  static ScalarField sample(const GridSpec& spec, FieldKind kind,
                            const std::function<double(const Vec&)>& f);

  const GridSpec& spec() const { return spec_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double at(const Index& idx) const { return values_[spec_.ravel(idx)]; }
  FieldKind kind() const { return kind_; }
  std::size_t size() const { return values_.size(); }

 protected:
  GridSpec spec_;
  std::vector<double> values_;
  FieldKind kind_;
};

/// Extended-real convex potential. Values >= kCap are stored as kCap and mean
/// "outside the domain". At least one value is finite.
class PotentialField : public ScalarField {
 public:
  PotentialField(GridSpec spec, std::vector<double> values);

  static PotentialField sample(const GridSpec& spec, const std::function<double(const Vec&)>& f);

  bool capped(std::size_t i) const { return is_capped(values_[i]); }
  double min_value() const;
  std::size_t argmin() const;
  /// False when the grid minimum sits on the box boundary (coercivity suspect).
  bool minimum_is_interior() const;
  /// e^{-phi}, with capped nodes mapped to exactly 0.
  ScalarField density() const;
  /// phi + c, saturating at kCap.
  PotentialField shifted(double c) const;
};

/// Pairwise summation; result is independent of thread count by construction.
double pairwise_sum(std::span<const double> values);

/// Tensor trapezoid weights restricted to a region (half weights on the region faces).
std::vector<double> trapezoid_weights(const GridSpec& spec, const Region& region);

/// Trapezoid weights on the effective domain of `phi` within `region`: every
/// cell that has a capped corner is dropped, every other cell gives vol/2^n to
/// each corner. Coincides with trapezoid_weights when nothing is capped.
std::vector<double> domain_weights(const PotentialField& phi, const Region& region);

/// Trapezoid integral of a density field over the whole box.
double quadrature(const ScalarField& density);

/// log of the domain-aware trapezoid integral of e^{-phi}, evaluated with a max shift.
double log_integral_exp_neg(const PotentialField& phi, const Region& region);
double log_integral_exp_neg(const PotentialField& phi);
double integral_exp_neg(const PotentialField& phi);

/// Second-order central difference gradient at a node with a neighbour on
/// every side. Throws StencilError at the boundary or next to a capped value.
Vec gradient(const ScalarField& field, std::size_t flat);

/// Central difference Hessian; mixed partials use the four-point cross
/// stencil and are written to both triangles, so the result is exactly symmetric.
Mat hessian(const ScalarField& field, std::size_t flat);

/// True when gradient/hessian are defined at the node.
bool stencil_valid(const ScalarField& field, std::size_t flat);

/// Multilinear interpolation. Empty when x is outside the box or a cell
/// corner is NaN / capped.
std::optional<double> interpolate(const ScalarField& field, const Vec& x);

}  // namespace heatdual
