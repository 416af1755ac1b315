#include "heatdual/santalo.hpp"

#include "heatdual/convex.hpp"
#include "heatdual/error.hpp"
#include "heatdual/inequalities.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace heatdual {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> as_vector(const Vec& x) { return std::vector<double>(x.data(), x.data() + x.size()); }

void require_step(double t, double dt) {
  if (!(dt > 0.0) || !(dt < t)) throw InvalidArgument("time step must satisfy 0 < dt < t");
}

double log_mass(const PotentialField& phi, const char* what) {
  const double l = log_integral_exp_neg(phi);
  if (!std::isfinite(l)) throw DomainError(std::string("integral of e^{-") + what + "} is degenerate");
  return l;
}

PotentialField conjugate_at(const PotentialField& phi0, double t, const GridSpec& dual,
                            const FlowOptions& options) {
  return make_snapshot(phi0, t, dual, options.heat, options.out_grid).psi_t;
}

}  // namespace

double volume_product(const PotentialField& phi, const PotentialField& conjugate) {
  const double l = log_mass(phi, "phi") + log_mass(conjugate, "phi*");
  const double m = std::exp(l);
  if (!std::isfinite(m) || m <= 0.0) throw DomainError("volume product is degenerate");
  return m;
}

double volume_product(const PotentialField& phi, const GridSpec& dual_grid) {
  return volume_product(phi, legendre_transform(phi, dual_grid));
}

double evenness_defect(const PotentialField& phi) {
  const GridSpec& spec = phi.spec();
  if (!spec.symmetric()) throw EvennessError("grid is not symmetric about the origin");
  double worst = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) worst = std::max(worst, std::abs(phi[i] - phi[spec.mirror(i)]));
  return worst;
}

double alpha_prime_integral(const PotentialField& psi, const FlowOptions& options, double* coverage) {
  const GridSpec& spec = psi.spec();
  const Region interior = Region::interior(spec, options.heat.margin);
  const LogConcaveMeasure measure(psi, interior);
  if (coverage) *coverage = measure.coverage();
  if (measure.coverage() < options.min_coverage)
    throw CoverageError("interior carries only " + std::to_string(measure.coverage()) +
                        " of the mass of e^{-psi}");
  const ScalarField tr = trace_inverse_hessian_field(psi, options.heat.margin, options.lambda_min);
  std::vector<double> g(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) g[i] = tr[i] - spec.point(i).squaredNorm();
  return expectation(measure, ScalarField(spec, std::move(g), FieldKind::scalar));
}

VolumeProductTrace evolve_trace(const PotentialField& phi0, const std::vector<double>& times,
                                const GridSpec& dual_grid, const FlowOptions& options) {
  const double defect = evenness_defect(phi0);
  if (defect > 1e-12)
    throw EvennessError("initial potential is not even (defect " + std::to_string(defect) + ")");
  if (times.empty()) throw InvalidArgument("no trace times");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] > 0.0)) throw InvalidArgument("trace times must be positive");
    if (k && !(times[k] > times[k - 1])) throw InvalidArgument("trace times must be strictly increasing");
  }

  VolumeProductTrace trace;
  const double log_phi0 = log_mass(phi0, "phi");
  trace.int_exp_neg_phi0 = std::exp(log_phi0);
  trace.alpha0 = log_phi0 + log_mass(legendre_transform(phi0, dual_grid), "psi");

  for (double t : times) {
    const double dt = options.step(t);
    require_step(t, dt);
    const FlowSnapshot snap = make_snapshot(phi0, t, dual_grid, options.heat, options.out_grid);
    const double log_psi = log_mass(snap.psi_t, "psi_t");
    const double lo = log_mass(conjugate_at(phi0, t - dt, dual_grid, options), "psi_t");
    const double hi = log_mass(conjugate_at(phi0, t + dt, dual_grid, options), "psi_t");
    double cov = 0.0;
    const double integral = alpha_prime_integral(snap.psi_t, options, &cov);

    trace.times.push_back(t);
    trace.alpha.push_back(log_phi0 + log_psi);
    trace.alpha_prime_fd.push_back((hi - lo) / (2.0 * dt));
    trace.alpha_prime_integral.push_back(integral);
    trace.int_exp_neg_phi_t.push_back(std::exp(log_mass(snap.phi_t, "phi_t")));
    trace.int_exp_neg_psi_t.push_back(std::exp(log_psi));
    trace.coverage.push_back(cov);
    trace.max_log_tail_ratio.push_back(snap.max_log_tail_ratio);
  }
  return trace;
}

IdentityTerms pointwise_identity_terms(const PotentialField& phi0, double t, const GridSpec& dual_grid,
                                       double dt, const FlowOptions& options) {
  require_step(t, dt);
  const PotentialField psi = conjugate_at(phi0, t, dual_grid, options);
  const PotentialField lo = conjugate_at(phi0, t - dt, dual_grid, options);
  const PotentialField hi = conjugate_at(phi0, t + dt, dual_grid, options);
  const ScalarField tr = trace_inverse_hessian_field(psi, options.heat.margin, options.lambda_min);
  std::vector<double> lhs(dual_grid.size(), kNaN), rhs(dual_grid.size(), kNaN);
  for (std::size_t i : Region::interior(dual_grid, options.heat.margin).nodes(dual_grid)) {
    lhs[i] = (hi[i] - lo[i]) / (2.0 * dt);
    rhs[i] = dual_grid.point(i).squaredNorm() - tr[i];
  }
  return {ScalarField(dual_grid, std::move(lhs), FieldKind::scalar),
          ScalarField(dual_grid, std::move(rhs), FieldKind::scalar)};
}

CheckReport verify_pointwise_identity(const PotentialField& phi0, double t, const GridSpec& dual_grid,
                                      double dt, double tolerance, const FlowOptions& options) {
  const IdentityTerms terms = pointwise_identity_terms(phi0, t, dual_grid, dt, options);
  CheckReport report("pointwise_identity", tolerance);
  for (std::size_t i : Region::interior(dual_grid, options.heat.margin).nodes(dual_grid)) {
    const Vec z = dual_grid.point(i);
    report.observe(std::abs(terms.lhs[i] - terms.rhs[i]) / std::max(1.0, z.squaredNorm()), as_vector(z), t);
  }
  report.add_detail("dt", dt);
  return report.finalize();
}

CheckReport verify_perturbation_relation(const PotentialField& phi0, double t, const GridSpec& dual_grid,
                                         double dt, double tolerance, const FlowOptions& options) {
  require_step(t, dt);
  const PotentialField psi = conjugate_at(phi0, t, dual_grid, options);
  const PotentialField psi_lo = conjugate_at(phi0, t - dt, dual_grid, options);
  const PotentialField psi_hi = conjugate_at(phi0, t + dt, dual_grid, options);
  const HeatKernelEvaluator at_lo(phi0, t - dt), at_hi(phi0, t + dt);
  const double log_tol = std::log(options.heat.tail_tolerance);

  CheckReport report("perturbation_relation", tolerance);
  for (std::size_t i : Region::interior(dual_grid, options.heat.margin).nodes(dual_grid)) {
    const Vec z = dual_grid.point(i);
    const Vec x = gradient(psi, i);
    const auto lo = at_lo.evaluate(x), hi = at_hi.evaluate(x);
    if (lo.log_tail_ratio > log_tol || hi.log_tail_ratio > log_tol) {
      ++report.skipped;
      continue;
    }
    const double dpsi = (psi_hi[i] - psi_lo[i]) / (2.0 * dt);
    const double dphi = (hi.value - lo.value) / (2.0 * dt);
    report.observe(std::abs(dpsi + dphi) / std::max(1.0, z.squaredNorm()), as_vector(z), t);
  }
  const std::size_t total = report.checked + report.skipped;
  if (total == 0 || report.skipped * 5 > total)
    throw CoverageError("perturbation relation: " + std::to_string(report.skipped) + " of " +
                        std::to_string(total) + " points fail the tail check at grad psi_t(z)");
  report.add_detail("dt", dt);
  return report.finalize();
}

CheckReport verify_heat_relation(const PotentialField& phi0, double t, double dt, double tolerance,
                                 const FlowOptions& options) {
  require_step(t, dt);
  const GridSpec out = options.out_grid.value_or(phi0.spec());
  const PotentialField mid = heat_evolve(phi0, t, out, options.heat);
  const PotentialField lo = heat_evolve(phi0, t - dt, out, options.heat);
  const PotentialField hi = heat_evolve(phi0, t + dt, out, options.heat);
  const GridSpec& spec = mid.spec();
  CheckReport report("heat_relation", tolerance);
  for (std::size_t i : Region::interior(spec, options.heat.margin).nodes(spec)) {
    const double lhs = (hi[i] - lo[i]) / (2.0 * dt);
    const Vec g = gradient(mid, i);
    const double tr = hessian(mid, i).trace();
    const double g2 = g.squaredNorm();
    report.observe(std::abs(lhs - (tr - g2)) / std::max(1.0, std::abs(tr) + g2), as_vector(spec.point(i)), t);
  }
  report.add_detail("dt", dt);
  return report.finalize();
}

CheckReport verify_hessian_variance_identity(const PotentialField& phi, const Vec& x, const Vec& theta,
                                             double tolerance, const HeatOptions& options) {
  const GridSpec& spec = phi.spec();
  if (x.size() != spec.dim() || theta.size() != spec.dim())
    throw InvalidArgument("point and direction must match the grid dimension");
  if (std::abs(theta.norm() - 1.0) > 1e-12) throw InvalidArgument("direction must be a unit vector");
  const std::size_t node = spec.nearest(x);
  const Vec xn = spec.point(node);
  for (int k = 0; k < spec.dim(); ++k)
    if (std::abs(xn[k] - x[k]) > 1e-9 * spec.spacing(k)) throw InvalidArgument("point is not a grid node");

  const PotentialField half = heat_evolve(phi, 0.5, options);
  const double lhs = theta.dot(hessian(half, node) * theta);

  std::vector<double> v(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i)
    v[i] = phi.capped(i) ? kCap : phi[i] + 0.5 * (spec.point(i) - xn).squaredNorm();
  const LogConcaveMeasure mu(PotentialField(spec, std::move(v)));
  const double rhs = 1.0 - variance(mu, linear_field(spec, theta));

  CheckReport report("hessian_variance_identity", tolerance);
  report.observe(std::abs(lhs - rhs), as_vector(xn), 0.5);
  report.add_detail("lhs", lhs);
  report.add_detail("rhs", rhs);
  return report.finalize();
}

CheckReport verify_small_time_bound(const PotentialField& phi0, const PotentialField& psi0, double t,
                                    double tolerance, const FlowOptions& options) {
  const GridSpec& dual = psi0.spec();
  const PotentialField psi = conjugate_at(phi0, t, dual, options);
  CheckReport report("small_time_bound", tolerance);
  for (std::size_t i : Region::interior(dual, options.heat.margin).nodes(dual)) {
    const Vec z = dual.point(i);
    report.observe(std::max(0.0, psi[i] - psi0[i] - t * z.squaredNorm()), as_vector(z), t);
  }
  return report.finalize();
}

CheckReport verify_small_time_chain(const PotentialField& phi0, const PotentialField& psi0,
                                    std::vector<double> times, double tolerance,
                                    const FlowOptions& options) {
  if (times.empty()) throw InvalidArgument("no times for the small-time chain");
  std::sort(times.begin(), times.end(), std::greater<>());
  const GridSpec& dual = psi0.spec();
  const double full = std::exp(log_mass(psi0, "psi"));
  CheckReport report("lim0_chain", tolerance);
  double previous = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    if (!(t > 0.0)) throw InvalidArgument("chain times must be positive");
    std::vector<double> shifted(dual.size());
    for (std::size_t i = 0; i < dual.size(); ++i)
      shifted[i] = std::min(kCap, psi0[i] + t * dual.point(i).squaredNorm());
    const double lower = std::exp(log_mass(PotentialField(dual, std::move(shifted)), "psi"));
    const double evolved = std::exp(log_mass(conjugate_at(phi0, t, dual, options), "psi_t"));
    double violation = std::max(0.0, (lower - evolved) / evolved);
    if (k) violation = std::max(violation, (previous - lower) / previous);
    report.observe(violation, {}, t);
    previous = lower;
  }
  report.add_detail("int_exp_neg_psi", full);
  report.add_detail("relative_gap_at_smallest_t", (full - previous) / full);
  return report.finalize();
}

CheckReport verify_superlinearity_bound(const PotentialField& phi0, double M, double b, double t,
                                        double tolerance, const HeatOptions& options) {
  if (!(M >= 0.0) || !std::isfinite(b)) throw InvalidArgument("certificate needs M >= 0 and finite b");
  const GridSpec& spec = phi0.spec();
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (phi0.capped(i)) continue;
    const double floor = M * spec.point(i).norm() - b;
    if (phi0[i] < floor - 1e-12 * std::max(1.0, std::abs(floor)))
      throw InvalidArgument("certificate phi >= M|x| - b fails at a grid node");
  }
  const PotentialField phi_t = heat_evolve(phi0, t, options);
  const double shift = b + t * M * M + std::sqrt(2.0 * spec.dim() * t) * M;
  CheckReport report("superlinearity_bound", tolerance);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const Vec x = spec.point(i);
    report.observe(std::max(0.0, M * x.norm() - shift - phi_t[i]), as_vector(x), t);
  }
  report.add_detail("M", M);
  report.add_detail("b", b);
  return report.finalize();
}

namespace {

GridSpec refined(const GridSpec& grid, std::size_t factor) {
  std::vector<Axis> axes = grid.axes();
  for (Axis& a : axes) a.count = std::min<std::size_t>((a.count - 1) * factor + 1, 4097);
  return GridSpec(axes);
}

}  // namespace

CheckReport rescaling_check(const PotentialField& phi0, double t, const GridSpec& dual_grid,
                            double tolerance, const FlowOptions& options) {
  if (!(t > 0.0)) throw DomainError("rescaling check needs t > 0");
  const double s = 0.5 * std::expm1(2.0 * t);
  // The Fokker-Planck side goes through the plain discrete conjugate, whose
  // O(h^2) bias per axis is what limits agreement; refine its grid.
  const GridSpec base = options.out_grid.value_or(phi0.spec());
  const GridSpec out = refined(base, phi0.spec().dim() == 1 ? 4 : 5 - static_cast<std::size_t>(phi0.spec().dim()));
  const PotentialField q = fokker_planck_evolve(phi0, t, out, options.heat);
  const double m_q = volume_product(q, dual_grid);
  // P_s u is Q_t u stretched by e^t, so it gets the stretched box.
  const FlowSnapshot snap = make_snapshot(phi0, s, dual_grid, options.heat, base.scaled(std::exp(t)));
  const double m_p = volume_product(snap.phi_t, snap.psi_t);
  CheckReport report("rescaling_identity", tolerance);
  report.observe(std::abs(m_q - m_p) / m_p, {}, t);
  report.add_detail("volume_product_fokker_planck", m_q);
  report.add_detail("volume_product_heat", m_p);
  report.add_detail("s", s);
  return report.finalize();
}

}  // namespace heatdual
