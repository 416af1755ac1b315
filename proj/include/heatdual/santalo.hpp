#pragma once

// Functional volume product along the heat flow, the pointwise identity for
// d/dt of the evolved conjugate, and the small-time / superlinearity /
// Hessian-variance bounds.

#include "heatdual/grid.hpp"
#include "heatdual/heatflow.hpp"
#include "heatdual/report.hpp"

#include <optional>
#include <vector>

namespace heatdual {

/// Integral of e^{-phi} times integral of e^{-phi*}, with phi* the discrete
/// transform on `dual_grid`.
double volume_product(const PotentialField& phi, const GridSpec& dual_grid);
/// Same product for an already computed conjugate.
double volume_product(const PotentialField& phi, const PotentialField& conjugate);

struct FlowOptions {
  HeatOptions heat;
  /// Time step for centered differences in t; default_time_step(t) when empty.
  std::optional<double> dt;
  /// Grid for phi_t; the source grid when empty.
  std::optional<GridSpec> out_grid;
  double lambda_min = 1e-6;
  /// Smallest fraction of the e^{-psi_t} mass the interior must carry.
  double min_coverage = 0.999;

  double step(double t) const { return dt ? *dt : default_time_step(t); }
};

struct VolumeProductTrace {
  std::vector<double> times;
  /// log of (integral of e^{-phi0}) * (integral of e^{-psi_t}).
  std::vector<double> alpha;
  std::vector<double> alpha_prime_fd;
  std::vector<double> alpha_prime_integral;
  std::vector<double> int_exp_neg_phi_t;
  std::vector<double> int_exp_neg_psi_t;
  std::vector<double> coverage;
  std::vector<double> max_log_tail_ratio;
  /// t = 0 endpoint from phi0 and its discrete transform, kept out of the
  /// sequence above since alpha need not be continuous there.
  double int_exp_neg_phi0 = 0.0;
  double alpha0 = 0.0;

  std::size_t size() const { return times.size(); }
  double volume_product(std::size_t k) const { return int_exp_neg_phi_t[k] * int_exp_neg_psi_t[k]; }
};

/// Largest |phi(x) - phi(-x)| over the grid; throws EvennessError for an
/// asymmetric grid.
double evenness_defect(const PotentialField& phi);

/// Throws EvennessError unless phi0 is even within 1e-12, InvalidArgument
/// unless times are positive and strictly increasing.
VolumeProductTrace evolve_trace(const PotentialField& phi0, const std::vector<double>& times,
                                const GridSpec& dual_grid, const FlowOptions& options = {});

/// Mean of Tr (D^2 psi)^{-1} - |z|^2 under e^{-psi} on the interior. Throws
/// CoverageError when the interior holds less than min_coverage of the mass.
double alpha_prime_integral(const PotentialField& psi, const FlowOptions& options = {},
                            double* coverage = nullptr);

/// Both sides of d/dt psi_t(z) = |z|^2 - Tr (D^2 psi_t)^{-1} on the dual grid.
/// NaN outside the interior.
struct IdentityTerms {
  ScalarField lhs;
  ScalarField rhs;
};

IdentityTerms pointwise_identity_terms(const PotentialField& phi0, double t, const GridSpec& dual_grid,
                                       double dt, const FlowOptions& options = {});

/// Residual |lhs - rhs| / max(1, |z|^2) over interior dual nodes.
CheckReport verify_pointwise_identity(const PotentialField& phi0, double t, const GridSpec& dual_grid,
                                      double dt, double tolerance = 1e-2,
                                      const FlowOptions& options = {});

/// d/dt psi_t(z) against -d/dt phi_t(x) at x = grad psi_t(z) (finite
/// differences), relative to max(1, |z|^2). phi_{t+-dt}(x) is evaluated from
/// the heat kernel directly; points where that evaluation fails the tail check
/// are skipped, more than 20% skipped is a CoverageError.
CheckReport verify_perturbation_relation(const PotentialField& phi0, double t, const GridSpec& dual_grid,
                                         double dt, double tolerance = 1e-2,
                                         const FlowOptions& options = {});

/// (phi_{t+dt} - phi_{t-dt}) / 2dt against Tr D^2 phi_t - |grad phi_t|^2 on the
/// interior of the grid of phi_t, relative to max(1, |Tr| + |grad|^2).
CheckReport verify_heat_relation(const PotentialField& phi0, double t, double dt,
                                 double tolerance = 1e-3, const FlowOptions& options = {});

/// theta^T D^2 phi_{1/2}(x) theta against 1 - Var(y.theta) under
/// e^{-phi(y) - |x - y|^2/2}. x must be a node of phi's grid.
CheckReport verify_hessian_variance_identity(const PotentialField& phi, const Vec& x, const Vec& theta,
                                             double tolerance = 1e-3, const HeatOptions& options = {});

/// One-sided max(0, psi_t - psi0 - t|z|^2) on interior dual nodes, with psi0
/// the transform of phi0 on the same dual grid.
CheckReport verify_small_time_bound(const PotentialField& phi0, const PotentialField& psi0, double t,
                                    double tolerance = 1e-6, const FlowOptions& options = {});

/// For decreasing times: integral of e^{-psi_t} >= integral of e^{-psi0 - t|z|^2},
/// the latter increasing as t decreases and tending to the integral of
/// e^{-psi0}. Residual is the largest relative violation of either property.
CheckReport verify_small_time_chain(const PotentialField& phi0, const PotentialField& psi0,
                                    std::vector<double> times, double tolerance = 1e-6,
                                    const FlowOptions& options = {});

/// phi_t(x) >= M|x| - b - tM^2 - sqrt(2nt) M at every node. Throws
/// InvalidArgument when phi0 >= M|x| - b fails somewhere on the grid.
CheckReport verify_superlinearity_bound(const PotentialField& phi0, double M, double b, double t,
                                        double tolerance = 1e-9, const HeatOptions& options = {});

/// |M(Q_t u) - M(P_s u)| / M(P_s u), s = (e^{2t} - 1)/2. Q_t u lives on a
/// refined copy of the grid of phi_t, P_s u on the same grid stretched by e^t.
/// Q_t u is conjugated by the discrete transform, P_s u goes through make_snapshot.
CheckReport rescaling_check(const PotentialField& phi0, double t, const GridSpec& dual_grid,
                            double tolerance = 1e-3, const FlowOptions& options = {});

}  // namespace heatdual
