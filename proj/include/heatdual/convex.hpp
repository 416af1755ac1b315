#pragma once

// Discrete Legendre-Fenchel transform and convexity diagnostics.

#include "heatdual/grid.hpp"
#include "heatdual/report.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace heatdual {

struct ConjugatePair {
  PotentialField primal;
  PotentialField dual;
};

struct ConjugateWithArgmax {
  PotentialField dual;
  /// Flat primal index attaining the max for every dual node.
  std::vector<std::size_t> argmax;
};

/// psi(z_j) = max_k z_j . x_k - phi(x_k) over the finite primal nodes.
///
/// In 1-D this is a linear-time sweep over the upper convex hull of
/// (x_k, -phi(x_k)); for n >= 2 the sup is taken one axis at a time, so the
/// cost is O(N * M^{1/n}) instead of O(N * M). Capped nodes never attain the
/// max. Warns when the dual box does not contain the discrete primal slopes
/// (the argmax variant does not).
PotentialField legendre_transform(const PotentialField& primal, const GridSpec& dual_grid);

ConjugateWithArgmax legendre_transform_with_argmax(const PotentialField& primal,
                                                   const GridSpec& dual_grid);

/// Literal O(N_x * N_z) maximum. Test oracle.
PotentialField brute_force_conjugate(const PotentialField& primal, const GridSpec& dual_grid,
                                     std::size_t budget = 100'000'000);

/// Largest negative part of a second difference along each axis (and both
/// diagonals in 2-D), over nodes whose stencil avoids capped values. Raw,
/// unnormalized differences; 0 means discretely convex.
double convexity_defect(const ScalarField& field);

/// Per-axis [min, max] of the forward differences (phi(x+h e_k) - phi(x)) / h
/// between finite neighbours.
std::vector<std::pair<double, double>> discrete_slope_range(const PotentialField& primal);

bool covers_slopes(const PotentialField& primal, const GridSpec& dual_grid);

/// Symmetric dual box that contains every discrete slope, `count` points per axis.
GridSpec suggest_dual_grid(const PotentialField& primal, std::size_t count);

/// Samples interior dual nodes z, takes x = grad psi(z) by finite differences,
/// interpolates grad phi at x and reports max |grad phi(x) - z|. Points whose x
/// leaves the primal grid are skipped; more than 20% skipped is a CoverageError.
CheckReport gradient_map_inverse_check(const PotentialField& primal, const PotentialField& dual,
                                       double tolerance = 5e-3,
                                       double margin = kDefaultMargin);

}  // namespace heatdual
