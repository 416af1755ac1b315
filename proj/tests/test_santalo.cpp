#include "heatdual/convex.hpp"
#include "heatdual/error.hpp"
#include "heatdual/heatflow.hpp"
#include "heatdual/potentials.hpp"
#include "heatdual/santalo.hpp"

#include <doctest.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <numbers>

using namespace heatdual;

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

GridSpec line(double lo, double hi, std::size_t n) { return GridSpec({Axis{lo, hi, n}}); }

PotentialField sample(const GridSpec& g, const std::function<double(const Vec&)>& f) {
  return PotentialField::sample(g, f);
}

PotentialField gaussian(const GridSpec& g) {
  return sample(g, [](const Vec& x) { return 0.5 * x.squaredNorm(); });
}

PotentialField quartic() {
  return sample(line(-10, 10, 1025), [](const Vec& x) { return std::pow(x[0], 4) / 4; });
}

const BuiltinPotential& builtin(const std::string& id) {
  const BuiltinPotential* p = find_potential(id);
  REQUIRE(p != nullptr);
  return *p;
}

FlowOptions flow_for(const BuiltinPotential& p) {
  FlowOptions o;
  o.out_grid = p.out;
  return o;
}

double at(const ScalarField& f, const Vec& x) { return f[f.spec().nearest(x)]; }

// Variance of N(0,1) conditioned on [-1,1], by composite Simpson.
double truncated_normal_variance() {
  const int n = 20000;
  const double h = 2.0 / n;
  double m0 = 0, m2 = 0;
  for (int i = 0; i <= n; ++i) {
    const double y = -1 + i * h, w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    m0 += w * std::exp(-y * y / 2);
    m2 += w * y * y * std::exp(-y * y / 2);
  }
  return m2 / m0;
}

}  // namespace

TEST_CASE("volume product examples") {
  spdlog::set_level(spdlog::level::err);
  const GridSpec ref = line(-10, 10, 1025);
  const double g = volume_product(gaussian(ref), ref);
  CHECK(std::abs(g - kTwoPi) <= 1e-3 * kTwoPi);
  const double shifted = volume_product(gaussian(ref).shifted(3.5), ref);
  CHECK(std::abs(shifted - g) <= 1e-6 * g);

  const auto& interval = builtin("interval");
  const double m = volume_product(interval.sample(), interval.dual);
  CHECK(std::abs(m - 4.0) <= 1e-3 * 4.0);
}

TEST_CASE("volume product never exceeds the Gaussian value on the library") {
  for (const auto& p : builtin_potentials()) {
    CAPTURE(p.id);
    const double bound = std::pow(kTwoPi, p.dim);
    CHECK(volume_product(p.sample(), p.dual) <= bound * (1 + 1e-3));
  }
}

TEST_CASE("volume product of an empty dual integral is a domain error") {
  const auto phi = sample(line(-1, 1, 33), [](const Vec&) { return 0.0; });
  const auto far = PotentialField(line(-1, 1, 33), std::vector<double>(33, 2000.0));
  CHECK_THROWS_AS(volume_product(phi, far), DomainError);
}

TEST_CASE("Gaussian trace is constant") {
  const auto phi0 = gaussian(builtin("gaussian").source);
  std::vector<double> times;
  for (int k = 1; k <= 10; ++k) times.push_back(0.1 * k);
  const auto trace = evolve_trace(phi0, times, builtin("gaussian").dual);
  REQUIRE(trace.size() == 10);
  CHECK(trace.alpha0 == doctest::Approx(std::log(kTwoPi)).epsilon(1e-3));
  for (std::size_t k = 0; k < trace.size(); ++k) {
    CHECK(std::abs(trace.alpha[k] - std::log(kTwoPi)) <= 1e-3);
    CHECK(std::abs(trace.alpha_prime_fd[k]) <= 1e-3);
    CHECK(std::abs(trace.alpha_prime_integral[k]) <= 1e-3);
    CHECK(trace.volume_product(k) == doctest::Approx(kTwoPi).epsilon(1e-3));
  }
}

TEST_CASE("quartic trace increases towards the Gaussian value") {
  const auto& p = builtin("quartic");
  std::vector<double> times;
  for (int k = 1; k <= 10; ++k) times.push_back(0.1 * k);
  const auto trace = evolve_trace(p.sample(), times, p.dual);
  for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace.alpha[k] >= trace.alpha[k - 1] - 1e-4);
  CHECK(trace.alpha.back() > trace.alpha.front());
  CHECK(trace.alpha.back() < std::log(kTwoPi));
  for (std::size_t k = 0; k < trace.size(); ++k) {
    CHECK(trace.alpha_prime_integral[k] > 0);
    CHECK(std::abs(trace.alpha_prime_fd[k] - trace.alpha_prime_integral[k]) <= 5e-3);
    CHECK(trace.int_exp_neg_phi_t[k] == doctest::Approx(trace.int_exp_neg_phi0).epsilon(1e-9));
  }
}

TEST_CASE("interval trace starts at log 4 and increases") {
  const auto& p = builtin("interval");
  const auto trace = evolve_trace(p.sample(), {0.05, 0.1, 0.2, 0.5, 1.0}, p.dual, flow_for(p));
  CHECK(trace.alpha0 == doctest::Approx(std::log(4.0)).epsilon(1e-3));
  CHECK(trace.alpha[0] >= trace.alpha0 - 1e-4);
  for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace.alpha[k] >= trace.alpha[k - 1] - 1e-4);
}

TEST_CASE("trace preconditions") {
  const GridSpec g = line(-10, 10, 257);
  CHECK_THROWS_AS(evolve_trace(sample(g, [](const Vec& x) { return (x[0] - 0.1) * (x[0] - 0.1); }), {0.1}, g),
                  EvennessError);
  CHECK_THROWS_AS(evenness_defect(sample(line(-9, 10, 257), [](const Vec& x) { return x[0] * x[0]; })),
                  EvennessError);
  CHECK(evenness_defect(gaussian(g)) == 0.0);
  CHECK_THROWS_AS(evolve_trace(gaussian(g), {0.2, 0.1}, g), InvalidArgument);
  CHECK_THROWS_AS(evolve_trace(gaussian(g), {0.0, 0.1}, g), InvalidArgument);
  CHECK_THROWS_AS(evolve_trace(gaussian(g), {0.1, 0.1}, g), InvalidArgument);
}

TEST_CASE("alpha prime integral on closed-form conjugates") {
  const GridSpec dual = line(-8, 8, 1025);
  const double t = 0.5;
  const auto psi_t = sample(dual, [t](const Vec& z) { return (1 + 2 * t) * z[0] * z[0] / 2 - 0.5 * std::log(1 + 2 * t); });
  double coverage = 0;
  CHECK(std::abs(alpha_prime_integral(psi_t, {}, &coverage)) < 1e-6);
  CHECK(coverage > 0.999);
  CHECK(std::abs(alpha_prime_integral(gaussian(dual))) < 1e-6);
  CHECK_THROWS_AS(alpha_prime_integral(gaussian(line(-2, 2, 201))), CoverageError);
}

TEST_CASE("pointwise identity, Gaussian closed forms") {
  const auto phi0 = gaussian(line(-12, 12, 1025));
  const auto terms = pointwise_identity_terms(phi0, 0.5, line(-4, 4, 513), 5e-3);
  const Vec one = Vec::Constant(1, 1.0);
  CHECK(at(terms.lhs, one) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(at(terms.rhs, one) == doctest::Approx(0.5).epsilon(1e-5));

  const auto phi2 = gaussian(GridSpec::cube(2, -12, 12, 129));
  const auto terms2 = pointwise_identity_terms(phi2, 0.25, GridSpec::cube(2, -4, 4, 65), 2.5e-3);
  const Vec ones = Vec::Constant(2, 1.0);
  CHECK(at(terms2.lhs, ones) == doctest::Approx(2 - 2 / 1.5).epsilon(1e-5));
  CHECK(at(terms2.rhs, ones) == doctest::Approx(2 - 2 / 1.5).epsilon(1e-5));

  const auto r = verify_pointwise_identity(phi0, 0.5, line(-4, 4, 513), 5e-4, 1e-6);
  CHECK(r.passed);
}

TEST_CASE("pointwise identity and perturbation relation for the quartic") {
  const auto& p = builtin("quartic");
  const auto id = verify_pointwise_identity(p.sample(), 0.5, p.dual, default_time_step(0.5));
  CHECK(id.passed);
  CHECK(id.max_residual <= 1e-2);
  const auto pr = verify_perturbation_relation(p.sample(), 0.5, p.dual, default_time_step(0.5));
  CHECK(pr.passed);
  CHECK(pr.max_residual <= 1e-2);
  const auto g = verify_perturbation_relation(gaussian(line(-12, 12, 1025)), 0.5, line(-4, 4, 513), 5e-3, 1e-4);
  CHECK(g.passed);
}

TEST_CASE("perturbation relation at the origin of an even potential") {
  const auto phi0 = builtin("cosh").sample();
  const double t = 0.5, dt = 5e-3;
  const GridSpec dual = line(-2, 2, 65);
  const double zero_plus = at(make_snapshot(phi0, t + dt, dual).psi_t, Vec::Zero(1));
  const double zero_minus = at(make_snapshot(phi0, t - dt, dual).psi_t, Vec::Zero(1));
  const double dpsi = (zero_plus - zero_minus) / (2 * dt);
  CHECK(dpsi == doctest::Approx(-heat_time_derivative(phi0, t, Vec::Zero(1), dt)).epsilon(1e-8));
}

TEST_CASE("heat relation") {
  const FlowOptions o;
  CHECK(verify_heat_relation(gaussian(line(-12, 12, 1025)), 0.5, 5e-3, 1e-3, o).passed);
  CHECK(verify_heat_relation(quartic(), 0.5, 5e-3, 1e-3, o).passed);
  CHECK_THROWS_AS(verify_heat_relation(quartic(), 0.5, 0.5), InvalidArgument);
}

TEST_CASE("Hessian-variance identity") {
  const GridSpec g = line(-12, 12, 1025);
  const Vec theta = Vec::Constant(1, 1.0);
  for (double c : {0.0, 2.75}) {
    const auto r = verify_hessian_variance_identity(gaussian(g).shifted(c), Vec::Constant(1, 1.5), theta);
    CHECK(r.passed);
    CHECK(r.detail("lhs") == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(r.detail("rhs") == doctest::Approx(0.5).epsilon(1e-6));
  }
  const double oracle = 1 - truncated_normal_variance();
  const double pdf1 = std::exp(-0.5) / std::sqrt(kTwoPi);
  CHECK(oracle == doctest::Approx(2 * pdf1 / std::erf(1 / std::numbers::sqrt2)).epsilon(1e-10));
  CHECK(oracle == doctest::Approx(0.7089).epsilon(1e-4));
  const auto r = verify_hessian_variance_identity(builtin("interval").sample(), Vec::Zero(1), theta);
  CHECK(r.passed);
  CHECK(std::abs(r.detail("rhs") - oracle) <= 1e-3);
  CHECK(std::abs(r.detail("lhs") - oracle) <= 1e-3);
  CHECK_THROWS_AS(verify_hessian_variance_identity(gaussian(g), Vec::Constant(1, 0.01), theta), InvalidArgument);
}

TEST_CASE("small time bound") {
  const auto phi0 = gaussian(builtin("gaussian").source);
  const GridSpec dual = builtin("gaussian").dual;
  const auto psi0 = legendre_transform(phi0, dual);
  for (double t : {0.05, 0.1, 0.5}) CHECK(verify_small_time_bound(phi0, psi0, t).passed);
  const auto& q = builtin("quartic");
  const auto qpsi = legendre_transform(q.sample(), q.dual);
  for (double t : {0.05, 0.1, 0.5}) {
    const auto r = verify_small_time_bound(q.sample(), qpsi, t);
    CHECK(r.passed);
    CHECK(r.max_residual <= 1e-6);
  }
  const auto chain = verify_small_time_chain(q.sample(), qpsi, {0.5, 0.05, 0.1});
  CHECK(chain.name == "lim0_chain");
  CHECK(chain.passed);
  CHECK(chain.detail("relative_gap_at_smallest_t") > 0);
}

TEST_CASE("superlinearity bound") {
  const GridSpec g = line(-10, 10, 1025);
  const auto square = sample(g, [](const Vec& x) { return x[0] * x[0]; });
  CHECK(verify_superlinearity_bound(square, 2.0, 1.0, 0.5).passed);
  CHECK(verify_superlinearity_bound(square, 0.0, 0.0, 0.5).passed);
  CHECK_THROWS_AS(verify_superlinearity_bound(square, 3.0, 1.0, 0.5), InvalidArgument);
  const auto& interval = builtin("interval");
  for (double t : {0.1, 0.5, 1.0}) CHECK(verify_superlinearity_bound(interval.sample(), 3.0, 3.0, t).passed);
}

TEST_CASE("rescaling identity") {
  const auto& q = builtin("quartic");
  const auto r = rescaling_check(q.sample(), 0.3, q.dual);
  CHECK(r.passed);
  CHECK(r.detail("s") == doctest::Approx((std::exp(0.6) - 1) / 2));
}
