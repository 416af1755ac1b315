#include "heatdual/error.hpp"
#include "heatdual/grid.hpp"
#include "heatdual/parallel.hpp"

#include <Eigen/LU>
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace heatdual;

namespace {

GridSpec line(double lo, double hi, std::size_t n) { return GridSpec({Axis{lo, hi, n}}); }

PotentialField sampled(const GridSpec& g, double (*f)(const Vec&)) { return PotentialField::sample(g, f); }

}  // namespace

TEST_CASE("grid spec validation") {
  CHECK_THROWS_AS(line(0, 1, 7), InvalidArgument);
  CHECK_THROWS_AS(line(1, 1, 10), InvalidArgument);
  CHECK_THROWS_AS(line(2, 1, 10), InvalidArgument);
  CHECK_THROWS_AS(line(0, INFINITY, 10), InvalidArgument);
  CHECK_THROWS_AS(GridSpec({}), InvalidArgument);
  CHECK_THROWS_AS(GridSpec::cube(4, -1, 1, 8), InvalidArgument);
  CHECK_THROWS_AS(GridSpec({Axis{-1, 1, 100}, Axis{-1, 1, 100}}, 9999), InvalidArgument);
  CHECK_NOTHROW(GridSpec({Axis{-1, 1, 100}, Axis{-1, 1, 100}}, 10000));
  CHECK_THROWS_AS(GridSpec::cube(2, -1, 1, 2049), InvalidArgument);
}

TEST_CASE("axis nodes include both ends and mirror exactly") {
  const Axis a{-3.7, 3.7, 1001};
  CHECK(a.coord(0) == -3.7);
  CHECK(a.coord(1000) == 3.7);
  CHECK(a.coord(500) == 0.0);
  for (std::size_t i = 0; i < 1001; ++i) CHECK(a.coord(i) == -a.coord(1000 - i));
  CHECK(a.spacing() == doctest::Approx(7.4 / 1000).epsilon(1e-15));
}

TEST_CASE("row-major indexing, nearest node and mirror") {
  const GridSpec g({Axis{-1, 1, 9}, Axis{-2, 2, 17}});
  CHECK(g.size() == 153);
  CHECK(g.stride(1) == 1);
  CHECK(g.stride(0) == 17);
  for (std::size_t f = 0; f < g.size(); ++f) {
    CHECK(g.ravel(g.unravel(f)) == f);
    CHECK(g.nearest(g.point(f)) == f);
    CHECK((g.point(g.mirror(f)) + g.point(f)).norm() == 0.0);
  }
  Vec far(2);
  far << 5, -5;
  CHECK(g.nearest(far) == g.ravel({8, 0, 0}));
  CHECK_FALSE(g.contains(far));
  CHECK(g.symmetric());
  CHECK_FALSE(GridSpec({Axis{-1, 2, 9}}).symmetric());
  CHECK(g.scaled(2.0).axis(1).max == 4.0);
}

TEST_CASE("interior region drops ten percent per side, at least two nodes") {
  const GridSpec g = GridSpec::cube(2, -1, 1, 101);
  const Region r = Region::interior(g);
  CHECK(r.lo[0] == 10);
  CHECK(r.hi[0] == 90);
  CHECK(r.size() == 81 * 81);
  const Region small = Region::interior(GridSpec::cube(1, -1, 1, 8));
  CHECK(small.lo[0] == 2);
  CHECK(small.hi[0] == 5);
  CHECK(Region::full(g).size() == g.size());
  CHECK(Region::interior(g).nodes(g).size() == r.size());
}

TEST_CASE("quadrature: constants, the Gaussian and the Laplace density") {
  const GridSpec unit = line(0, 1, 101);
  const ScalarField one(unit, std::vector<double>(101, 1.0), FieldKind::density);
  CHECK(quadrature(one) == doctest::Approx(1.0).epsilon(1e-15));

  const auto gauss = ScalarField::sample(line(-8, 8, 1025), FieldKind::density,
                                         [](const Vec& x) { return std::exp(-0.5 * x[0] * x[0]); });
  CHECK(std::abs(quadrature(gauss) - std::sqrt(2 * std::numbers::pi)) < 1e-8);

  const auto laplace = ScalarField::sample(line(-20, 20, 4097), FieldKind::density,
                                           [](const Vec& x) { return std::exp(-std::abs(x[0])); });
  CHECK(std::abs(quadrature(laplace) - 2.0) < 1e-4);

  const ScalarField box2(GridSpec::cube(2, 0, 2, 33), std::vector<double>(33 * 33, 1.0), FieldKind::density);
  CHECK(quadrature(box2) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("quadrature is linear in the values") {
  const GridSpec g = line(-3, 3, 65);
  const auto f = ScalarField::sample(g, FieldKind::density, [](const Vec& x) { return 1 + x[0] * x[0]; });
  const auto h = ScalarField::sample(g, FieldKind::density, [](const Vec& x) { return std::exp(x[0]); });
  const auto sum = ScalarField::sample(g, FieldKind::density,
                                       [](const Vec& x) { return 2 * (1 + x[0] * x[0]) + 3 * std::exp(x[0]); });
  CHECK(quadrature(sum) == doctest::Approx(2 * quadrature(f) + 3 * quadrature(h)).epsilon(1e-14));
}

TEST_CASE("quadrature rejects non-densities and NaN") {
  const GridSpec g = line(0, 1, 9);
  CHECK_THROWS_AS(quadrature(PotentialField(g, std::vector<double>(9, 0.0))), InvalidArgument);
  std::vector<double> v(9, 1.0);
  v[4] = std::nan("");
  CHECK_THROWS_AS(ScalarField(g, v, FieldKind::density), InvalidArgument);
  v[4] = -1.0;
  CHECK_THROWS_AS(ScalarField(g, v, FieldKind::density), InvalidArgument);
  CHECK_THROWS_AS(ScalarField(g, std::vector<double>(8, 1.0), FieldKind::scalar), InvalidArgument);
}

TEST_CASE("potential fields saturate at the cap and need a finite value") {
  const GridSpec g = line(-1, 1, 9);
  std::vector<double> v(9, 0.0);
  v[0] = 1e12;
  v[8] = INFINITY;
  const PotentialField phi(g, v);
  CHECK(phi[0] == kCap);
  CHECK(phi[8] == kCap);
  CHECK(phi.capped(0));
  CHECK(phi.density()[0] == 0.0);
  CHECK(phi.shifted(5.0)[0] == kCap);
  CHECK(phi.shifted(5.0)[4] == 5.0);
  CHECK_THROWS_AS(PotentialField(g, std::vector<double>(9, kCap)), DomainError);
  v[3] = std::nan("");
  CHECK_THROWS_AS(PotentialField(g, v), InvalidArgument);
}

TEST_CASE("minimum location flags boundary minima") {
  const GridSpec g = line(-2, 2, 41);
  const auto bowl = PotentialField::sample(g, [](const Vec& x) { return (x[0] - 0.5) * (x[0] - 0.5); });
  CHECK(bowl.argmin() == 25);
  CHECK(bowl.min_value() == doctest::Approx(0.0));
  CHECK(bowl.minimum_is_interior());
  const auto ramp = PotentialField::sample(g, [](const Vec& x) { return x[0]; });
  CHECK_FALSE(ramp.minimum_is_interior());
}

TEST_CASE("domain-aware integral of an indicator is its length") {
  const GridSpec g = line(-4, 4, 1025);
  const auto ind = PotentialField::sample(g, [](const Vec& x) { return std::abs(x[0]) <= 1 + 1e-12 ? 0.0 : kCap; });
  CHECK(integral_exp_neg(ind) == doctest::Approx(2.0).epsilon(1e-14));
  const auto disc = PotentialField::sample(GridSpec::cube(2, -1.5, 1.5, 257),
                                           [](const Vec& x) { return x.norm() <= 1 ? 0.0 : kCap; });
  CHECK(std::abs(integral_exp_neg(disc) - std::numbers::pi) < 0.05);
}

TEST_CASE("log integral survives huge potentials") {
  const GridSpec g = line(-1, 1, 33);
  const auto phi = PotentialField::sample(g, [](const Vec& x) { return 5000.0 + x[0] * x[0]; });
  const auto ref = PotentialField::sample(g, [](const Vec& x) { return x[0] * x[0]; });
  CHECK(integral_exp_neg(phi) == 0.0);
  CHECK(log_integral_exp_neg(phi) == doctest::Approx(std::log(integral_exp_neg(ref)) - 5000.0).epsilon(1e-14));
}

TEST_CASE("finite differences: examples") {
  const GridSpec g = line(-4, 4, 801);
  const auto half = sampled(g, [](const Vec& x) { return 0.5 * x[0] * x[0]; });
  const std::size_t at1 = g.nearest(Vec::Constant(1, 1.0));
  CHECK(gradient(half, at1)[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hessian(half, at1)(0, 0) == doctest::Approx(1.0).epsilon(1e-10));

  const auto quartic = sampled(g, [](const Vec& x) { return std::pow(x[0], 4) / 4; });
  const std::size_t at05 = g.nearest(Vec::Constant(1, 0.5));
  CHECK(std::abs(gradient(quartic, at05)[0] - 0.125) < 1e-4);

  const GridSpec g2 = GridSpec::cube(2, -2, 2, 81);
  Vec p(2);
  p << 1, -1;
  const auto iso = sampled(g2, [](const Vec& x) { return 0.5 * x.squaredNorm(); });
  const Vec gr = gradient(iso, g2.nearest(p));
  CHECK(gr[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gr[1] == doctest::Approx(-1.0).epsilon(1e-12));

  const auto aniso = sampled(g2, [](const Vec& x) { return 0.5 * x[0] * x[0] + 2 * x[1] * x[1]; });
  const Mat h = hessian(aniso, g2.nearest(p));
  CHECK(h(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(h(1, 1) == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(std::abs(h(0, 1)) < 1e-10);

  const auto rank1 = sampled(g2, [](const Vec& x) { return 0.5 * (x[0] + x[1]) * (x[0] + x[1]); });
  const Mat r = hessian(rank1, g2.nearest(p));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(r(i, j) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(r.determinant()) < 1e-8);
}

TEST_CASE("hessian is exactly symmetric") {
  const GridSpec g = GridSpec::cube(2, -2, 2, 41);
  const auto f = sampled(g, [](const Vec& x) { return std::exp(0.3 * x[0] - 0.7 * x[1]) + x[0] * x[0] * x[1]; });
  for (std::size_t i : Region::interior(g).nodes(g)) {
    const Mat h = hessian(f, i);
    CHECK(h(0, 1) == h(1, 0));
  }
}

TEST_CASE("finite differences converge at second order") {
  const auto err = [](std::size_t n) {
    const GridSpec g = line(-2, 2, n);
    const auto f = PotentialField::sample(g, [](const Vec& x) { return std::cosh(x[0]); });
    const std::size_t i = g.nearest(Vec::Constant(1, 1.0));
    const double x = g.point(i)[0];
    return std::pair{std::abs(gradient(f, i)[0] - std::sinh(x)), std::abs(hessian(f, i)(0, 0) - std::cosh(x))};
  };
  const auto coarse = err(41), fine = err(81);
  CHECK(coarse.first / fine.first == doctest::Approx(4.0).epsilon(0.05));
  CHECK(coarse.second / fine.second == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("stencil errors at the boundary and next to the cap") {
  const GridSpec g = line(-2, 2, 41);
  const auto ind = PotentialField::sample(g, [](const Vec& x) { return std::abs(x[0]) <= 1 ? 0.0 : kCap; });
  CHECK_THROWS_AS(gradient(ind, 0), StencilError);
  CHECK_THROWS_AS(hessian(ind, 40), StencilError);
  CHECK_THROWS_AS(gradient(ind, 10), StencilError);
  CHECK_THROWS_AS(gradient(ind, 9), StencilError);
  CHECK(stencil_valid(ind, 11));
  CHECK_NOTHROW(hessian(ind, 20));
  CHECK_FALSE(stencil_valid(ind, 0));
}

TEST_CASE("multilinear interpolation") {
  const GridSpec g = GridSpec::cube(2, 0, 1, 11);
  const auto plane = ScalarField::sample(g, FieldKind::scalar, [](const Vec& x) { return 2 * x[0] - 3 * x[1] + 1; });
  Vec p(2);
  p << 0.37, 0.81;
  CHECK(*interpolate(plane, p) == doctest::Approx(2 * 0.37 - 3 * 0.81 + 1).epsilon(1e-14));
  p << 1.2, 0.5;
  CHECK_FALSE(interpolate(plane, p).has_value());
  const auto ind = PotentialField::sample(g, [](const Vec& x) { return x[0] < 0.5 ? 0.0 : kCap; });
  p << 0.45, 0.5;
  CHECK_FALSE(interpolate(ind, p).has_value());
  p << 0.3, 0.5;
  CHECK(*interpolate(ind, p) == 0.0);
}

TEST_CASE("pairwise sum is accurate on many small terms") {
  std::vector<double> v(1 << 20, 0.1);
  CHECK(pairwise_sum(v) == doctest::Approx(0.1 * (1 << 20)).epsilon(1e-14));
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
}

TEST_CASE("parallel_for covers every index once and rethrows") {
  for (unsigned threads : {1u, 3u, 4u}) {
    set_thread_count(threads);
    std::vector<int> hits(1001, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_AS(parallel_for(100, [](std::size_t i) {
                      if (i == 77) throw DomainError("boom");
                    }),
                    DomainError);
  }
  set_thread_count(1);
}
