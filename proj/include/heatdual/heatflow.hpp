#pragma once

// Heat semigroup P_t and Fokker-Planck semigroup Q_t acting on e^{-phi},
// evaluated in the log domain straight from the t = 0 data.

#include "heatdual/grid.hpp"

#include <optional>
#include <string>
#include <vector>

namespace heatdual {

struct HeatOptions {
  /// Bound on (Gaussian mass outside the source box) / P_t e^{-phi}(x).
  double tail_tolerance = 1e-12;
  /// Interior margin on which the tail bound is enforced.
  double margin = kDefaultMargin;
};

/// Estimate of the part of the heat integral that lies outside the source box.
/// Beyond each finite boundary node phi is continued linearly with the node's
/// outward secant slopes (a lower bound along each axis ray, by convexity), and
/// the kernel is integrated exactly along the outward axes and by the
/// trapezoid rule along the face.
class TailBound {
 public:
  TailBound(const PotentialField& phi0, double t);
  /// log of the estimated missing mass at x (-inf when every boundary node is capped).
  double log_bound(const Vec& x) const;

 private:
  struct Piece {
    double value;
    unsigned mask;
    std::array<int, kMaxDim> side;
    std::array<double, kMaxDim> slope;
    std::array<double, kMaxDim> coord;
    std::array<double, kMaxDim> log_weight;
  };
  std::vector<Piece> pieces_;
  double t_;
  int dim_ = 1;
};

/// log(erfc(a) / 2), accurate for large positive a.
double log_half_erfc(double a);

/// phi_t and its derivatives at arbitrary points, from
/// e^{-phi_t(x)} = (4 pi t)^{-n/2} sum_k w_k e^{-phi(y_k) - |x - y_k|^2 / 4t}.
/// The gradient and Hessian come from the posterior moments of y:
/// grad phi_t = (x - E y) / 2t, D^2 phi_t = I / 2t - Cov(y) / 4t^2.
class HeatKernelEvaluator {
 public:
  HeatKernelEvaluator(const PotentialField& phi0, double t);

  struct Jet {
    double value = 0.0;
    Vec gradient;
    Mat hessian;
    /// log(tail bound / P_t(x)).
    double log_tail_ratio = 0.0;
  };

  Jet evaluate(const Vec& x) const;
  double value(const Vec& x) const { return evaluate(x).value; }
  double t() const { return t_; }
  int dim() const { return source_.dim(); }
  const GridSpec& source() const { return source_; }

 private:
  GridSpec source_;
  double t_;
  double shift_ = 0.0;
  std::vector<double> log_weight_;
  std::vector<double> scaled_;
  std::array<std::vector<double>, kMaxDim> coords_;
  std::array<std::size_t, kMaxDim> counts_{};
  TailBound tail_;
};

/// phi_t = -log P_t e^{-phi0} on `out_grid`. Throws DomainError for t <= 0 and
/// TruncationError when an interior output point fails the tail bound.
PotentialField heat_evolve(const PotentialField& phi0, double t, const GridSpec& out_grid,
                           const HeatOptions& options = {});
PotentialField heat_evolve(const PotentialField& phi0, double t, const HeatOptions& options = {});

/// -log Q_t e^{-phi0} through Q_t u(x) = e^{nt} P_s u(e^t x), s = (e^{2t} - 1)/2.
PotentialField fokker_planck_evolve(const PotentialField& phi0, double t, const GridSpec& out_grid,
                                    const HeatOptions& options = {});

/// t/100 clamped to [1e-5, 1e-2].
double default_time_step(double t);

/// (phi_{t+dt}(x) - phi_{t-dt}(x)) / 2dt. Requires 0 < dt < t.
double heat_time_derivative(const PotentialField& phi0, double t, const Vec& x, double dt,
                            const HeatOptions& options = {});

struct SnapshotMeta {
  std::string potential_id;
  GridSpec source;
  GridSpec out;
  GridSpec dual;
};

struct FlowSnapshot {
  double t = 0.0;
  PotentialField phi_t;
  PotentialField psi_t;
  /// Largest log(tail / P_t) met while polishing psi_t on interior dual nodes.
  double max_log_tail_ratio = 0.0;
  SnapshotMeta meta;
};

/// Conjugate of phi_t on `dual_grid`. The discrete transform of the sampled
/// phi_t supplies the starting maximizer; damped Newton steps on
/// x -> z.x - phi_t(x) with the evaluator's exact derivatives then converge to
/// the continuous sup.
PotentialField evolved_conjugate(const HeatKernelEvaluator& evaluator, const PotentialField& phi_t,
                                 const GridSpec& dual_grid, const HeatOptions& options,
                                 double* max_log_tail_ratio = nullptr);

/// phi_t on `out_grid` (defaults to the source grid) and psi_t on `dual_grid`.
/// At t = 0 phi_t is phi0 itself and psi_t its discrete transform.
FlowSnapshot make_snapshot(const PotentialField& phi0, double t, const GridSpec& dual_grid,
                           const HeatOptions& options = {},
                           const std::optional<GridSpec>& out_grid = std::nullopt,
                           const std::string& potential_id = {});

}  // namespace heatdual
