#include "heatdual/inequalities.hpp"

#include "heatdual/convex.hpp"
#include "heatdual/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <sstream>

namespace heatdual {

namespace {

std::string where(const GridSpec& spec, std::size_t flat) {
  const Vec x = spec.point(flat);
  std::ostringstream os;
  os << '(';
  for (int k = 0; k < x.size(); ++k) os << (k ? ", " : "") << x[k];
  os << ')';
  return os.str();
}

std::vector<double> log_weights(const PotentialField& v, const Region& region) {
  const auto w = domain_weights(v, region);
  std::vector<double> out(w.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] > 0.0) out[i] = std::log(w[i]) - v[i];
  return out;
}

}  // namespace

double min_eigenvalue(const Mat& h) {
  if (h.rows() == 1) return h(0, 0);
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

LogConcaveMeasure::LogConcaveMeasure(PotentialField potential)
    : LogConcaveMeasure(potential, Region::full(potential.spec())) {}

LogConcaveMeasure::LogConcaveMeasure(PotentialField potential, const Region& region,
                                     double convexity_tolerance)
    : potential_(std::move(potential)), region_(region) {
  const double defect = convexity_defect(potential_);
  if (defect > convexity_tolerance)
    throw InvalidArgument("measure potential is not discretely convex (defect " +
                          std::to_string(defect) + ")");
  const auto lw = log_weights(potential_, region_);
  double m = -std::numeric_limits<double>::infinity();
  for (double v : lw) m = std::max(m, v);
  if (!std::isfinite(m)) throw DomainError("measure has zero mass on its region");
  prob_.assign(lw.size(), 0.0);
  for (std::size_t i = 0; i < lw.size(); ++i)
    if (std::isfinite(lw[i])) prob_[i] = std::exp(lw[i] - m);
  const double s = pairwise_sum(prob_);
  for (double& p : prob_) p /= s;
  log_z_ = m + std::log(s);
  if (!std::isfinite(log_z_)) throw DomainError("measure normalization is not finite");
  const double log_total = log_integral_exp_neg(potential_);
  coverage_ = std::exp(log_z_ - log_total);
}

double expectation(const LogConcaveMeasure& measure, const ScalarField& integrand) {
  if (!(integrand.spec() == measure.potential().spec()))
    throw InvalidArgument("integrand grid differs from measure grid");
  const auto& p = measure.probabilities();
  std::vector<double> terms(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (std::isnan(integrand[i]))
      throw InvalidArgument("integrand is NaN at a node carrying mass: " +
                            where(integrand.spec(), i));
    terms[i] = p[i] * integrand[i];
  }
  return pairwise_sum(terms);
}

double variance(const LogConcaveMeasure& measure, const ScalarField& integrand) {
  const double mean = expectation(measure, integrand);
  const auto& p = measure.probabilities();
  std::vector<double> terms(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    const double d = integrand[i] - mean;
    terms[i] = p[i] * d * d;
  }
  return pairwise_sum(terms);
}

ScalarField linear_field(const GridSpec& spec, const Vec& theta) {
  return ScalarField::sample(spec, FieldKind::scalar, [&](const Vec& x) { return x.dot(theta); });
}

CheckReport brascamp_lieb_check(const LogConcaveMeasure& measure, const Vec& theta,
                                const BrascampLiebOptions& options) {
  const PotentialField& v = measure.potential();
  const GridSpec& spec = v.spec();
  if (theta.size() != spec.dim()) throw InvalidArgument("direction has the wrong dimension");
  if (std::abs(theta.norm() - 1.0) > 1e-12) throw InvalidArgument("direction must be a unit vector");

  const double lhs = variance(measure, linear_field(spec, theta));
  const auto& p = measure.probabilities();
  std::vector<double> terms(p.size(), 0.0);
  std::size_t checked = 0, skipped = 0;
  std::vector<double> lost(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (!stencil_valid(v, i)) {
      ++skipped;
      lost[i] = p[i];
      continue;
    }
    ++checked;
    const Mat h = hessian(v, i);
    if (min_eigenvalue(h) < options.lambda_min)
      throw StrictnessError("Hessian of the potential is singular at " + where(spec, i));
    const Vec s = h.inverse() * theta;
    terms[i] = p[i] * theta.dot(s);
  }
  const double rhs = pairwise_sum(terms);
  CheckReport report("brascamp_lieb", options.tolerance);
  report.observe(std::max(0.0, lhs - rhs), std::vector<double>(theta.data(), theta.data() + theta.size()));
  report.add_detail("lhs", lhs);
  report.add_detail("rhs", rhs);
  report.add_detail("slack", rhs - lhs);
  report.add_detail("coverage", measure.coverage());
  report.add_detail("skipped_mass", pairwise_sum(lost));
  report.checked = checked;
  report.skipped = skipped;
  return report.finalize();
}

ScalarField trace_inverse_hessian_field(const PotentialField& potential, double margin,
                                        double lambda_min) {
  const GridSpec& spec = potential.spec();
  std::vector<double> out(spec.size(), std::nan(""));
  for (std::size_t flat : Region::interior(spec, margin).nodes(spec)) {
    const Mat h = hessian(potential, flat);
    if (min_eigenvalue(h) < lambda_min)
      throw StrictnessError("Hessian is singular at " + where(spec, flat));
    out[flat] = h.inverse().trace();
  }
  return ScalarField(spec, std::move(out), FieldKind::scalar);
}

}  // namespace heatdual
