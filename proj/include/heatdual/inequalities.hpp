#pragma once

// Log-concave measures on grids and the Brascamp-Lieb variance inequality.

#include "heatdual/grid.hpp"
#include "heatdual/report.hpp"

#include <vector>

namespace heatdual {

inline constexpr double kDefaultLambdaMin = 1e-6;

/// Probability measure proportional to e^{-V} restricted to a region of the grid.
class LogConcaveMeasure {
 public:
  explicit LogConcaveMeasure(PotentialField potential);
  LogConcaveMeasure(PotentialField potential, const Region& region,
                    double convexity_tolerance = 1e-8);

  const PotentialField& potential() const { return potential_; }
  const Region& region() const { return region_; }
  /// Integral of e^{-V} over the region.
  double normalization() const { return std::exp(log_z_); }
  double log_normalization() const { return log_z_; }
  /// Mass of the region relative to the whole box.
  double coverage() const { return coverage_; }
  /// Probability of each node (zero outside the region and the domain).
  const std::vector<double>& probabilities() const { return prob_; }

 private:
  PotentialField potential_;
  Region region_;
  double log_z_ = 0.0;
  double coverage_ = 1.0;
  std::vector<double> prob_;
};

double expectation(const LogConcaveMeasure& measure, const ScalarField& integrand);
/// Centered second moment, computed as E[(g - E g)^2].
double variance(const LogConcaveMeasure& measure, const ScalarField& integrand);

struct BrascampLiebOptions {
  double tolerance = 1e-4;
  double lambda_min = kDefaultLambdaMin;
};

/// Var_mu(x.theta) against E_mu[(D^2 V)^{-1} theta.theta]. Details: lhs, rhs,
/// slack = rhs - lhs. Residual is max(0, -slack). Throws StrictnessError when
/// a node with positive mass has a Hessian eigenvalue below lambda_min. Nodes
/// without a full stencil are left out of the rhs and their mass is reported
/// as skipped_mass, which can only make the check more conservative.
CheckReport brascamp_lieb_check(const LogConcaveMeasure& measure, const Vec& theta,
                                const BrascampLiebOptions& options = {});

/// Tr (D^2 psi)^{-1} on interior nodes; NaN on the excluded margin.
ScalarField trace_inverse_hessian_field(const PotentialField& potential,
                                        double margin = kDefaultMargin,
                                        double lambda_min = kDefaultLambdaMin);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Mat& symmetric);

/// Coordinate function x -> x . theta sampled on the grid.
ScalarField linear_field(const GridSpec& spec, const Vec& theta);

}  // namespace heatdual
