#include "heatdual/convex.hpp"

#include "heatdual/error.hpp"
#include "heatdual/parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace heatdual {

namespace {

struct LineView {
  const double* data;
  std::size_t stride;
  std::size_t size;
  double operator[](std::size_t k) const { return data[k * stride]; }
};

// Max over the absent-free points of z * x_k - v_k for every z of `dual`,
// writing the value and the winning k. Lines without a finite point produce
// -kCap so that the next axis sees them as absent.
void conjugate_line(const Axis& primal, LineView v, const Axis& dual, double* out,
                    std::size_t out_stride, std::int32_t* arg, std::vector<std::size_t>& hull) {
  hull.clear();
  auto x = [&](std::size_t k) { return primal.coord(k); };
  for (std::size_t k = 0; k < v.size; ++k) {
    if (is_capped(v[k])) continue;
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2];
      const std::size_t b = hull.back();
      // Drop b when slope(a,b) <= slope(b,k) in the points (x, -v).
      const double lhs = (v[a] - v[b]) * (x(k) - x(b));
      const double rhs = (v[b] - v[k]) * (x(b) - x(a));
      if (lhs <= rhs) hull.pop_back();
      else break;
    }
    hull.push_back(k);
  }
  if (hull.empty()) {
    for (std::size_t j = 0; j < dual.count; ++j) {
      out[j * out_stride] = -kCap;
      arg[j * out_stride] = -1;
    }
    return;
  }
  std::size_t p = 0;
  for (std::size_t j = 0; j < dual.count; ++j) {
    const double z = dual.coord(j);
    double best = z * x(hull[p]) - v[hull[p]];
    while (p + 1 < hull.size()) {
      const double next = z * x(hull[p + 1]) - v[hull[p + 1]];
      if (next < best) break;
      best = next;
      ++p;
    }
    out[j * out_stride] = best;
    arg[j * out_stride] = static_cast<std::int32_t>(hull[p]);
  }
}

struct Shape {
  int dim = 1;
  std::array<std::size_t, kMaxDim> count{};
  std::array<std::size_t, kMaxDim> stride{};
  std::size_t size = 1;

  void finish() {
    size = 1;
    for (int k = dim - 1; k >= 0; --k) {
      const auto u = static_cast<std::size_t>(k);
      stride[u] = size;
      size *= count[u];
    }
  }
};

}  // namespace

ConjugateWithArgmax legendre_transform_with_argmax(const PotentialField& primal,
                                                   const GridSpec& dual_grid) {
  const GridSpec& xs = primal.spec();
  const int n = xs.dim();
  if (dual_grid.dim() != n) throw InvalidArgument("dual grid dimension differs from primal");

  std::vector<double> current(primal.values().begin(), primal.values().end());
  Shape in;
  in.dim = n;
  for (int k = 0; k < n; ++k) in.count[static_cast<std::size_t>(k)] = xs.axis(k).count;
  in.finish();

  std::vector<std::vector<std::int32_t>> args(static_cast<std::size_t>(n));
  std::vector<Shape> shapes(static_cast<std::size_t>(n));

  for (int a = 0; a < n; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    Shape out = in;
    out.count[ua] = dual_grid.axis(a).count;
    out.finish();
    std::vector<double> next(out.size);
    std::vector<std::int32_t> arg(out.size);
    // Every line along axis a is identified by its position with index 0 on axis a.
    const std::size_t lines = in.size / in.count[ua];
    if (a > 0)
      for (double& v : current) v = -v;
    parallel_for(lines, [&](std::size_t line) {
      thread_local std::vector<std::size_t> hull;
      std::size_t rem = line;
      std::size_t in_off = 0, out_off = 0;
      for (int k = n - 1; k >= 0; --k) {
        const auto uk = static_cast<std::size_t>(k);
        if (k == a) continue;
        const std::size_t i = rem % in.count[uk];
        rem /= in.count[uk];
        in_off += i * in.stride[uk];
        out_off += i * out.stride[uk];
      }
      LineView view{current.data() + in_off, in.stride[ua], in.count[ua]};
      conjugate_line(xs.axis(a), view, dual_grid.axis(a), next.data() + out_off, out.stride[ua],
                     arg.data() + out_off, hull);
    });
    args[ua] = std::move(arg);
    shapes[ua] = out;
    current = std::move(next);
    in = out;
  }

  std::vector<std::size_t> argmax(dual_grid.size());
  for (std::size_t j = 0; j < dual_grid.size(); ++j) {
    const Index z = dual_grid.unravel(j);
    Index x{};
    for (int a = n - 1; a >= 0; --a) {
      const Shape& s = shapes[static_cast<std::size_t>(a)];
      std::size_t off = 0;
      for (int k = 0; k < n; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        off += (k <= a ? z[uk] : x[uk]) * s.stride[uk];
      }
      const std::int32_t w = args[static_cast<std::size_t>(a)][off];
      x[static_cast<std::size_t>(a)] = w < 0 ? 0 : static_cast<std::size_t>(w);
    }
    argmax[j] = xs.ravel(x);
  }
  for (double& v : current) v = std::min(v, kCap);
  return {PotentialField(dual_grid, std::move(current)), std::move(argmax)};
}

PotentialField legendre_transform(const PotentialField& primal, const GridSpec& dual_grid) {
  if (!covers_slopes(primal, dual_grid))
    spdlog::warn("dual grid {} does not cover the discrete slopes of the primal", dual_grid.describe());
  return legendre_transform_with_argmax(primal, dual_grid).dual;
}

PotentialField brute_force_conjugate(const PotentialField& primal, const GridSpec& dual_grid,
                                     std::size_t budget) {
  const GridSpec& xs = primal.spec();
  if (dual_grid.dim() != xs.dim()) throw InvalidArgument("dual grid dimension differs from primal");
  if (static_cast<double>(xs.size()) * static_cast<double>(dual_grid.size()) >
      static_cast<double>(budget))
    throw BudgetError("brute-force conjugate exceeds the work budget");
  const int n = xs.dim();
  std::vector<Vec> xpts;
  std::vector<double> vals;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (primal.capped(k)) continue;
    xpts.push_back(xs.point(k));
    vals.push_back(primal[k]);
  }
  std::vector<double> out(dual_grid.size());
  parallel_for(dual_grid.size(), [&](std::size_t j) {
    const Vec z = dual_grid.point(j);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < xpts.size(); ++k) {
      double s = 0.0;
      for (int d = 0; d < n; ++d) s += z[d] * xpts[k][d];
      best = std::max(best, s - vals[k]);
    }
    out[j] = std::min(best, kCap);
  });
  return PotentialField(dual_grid, std::move(out));
}

double convexity_defect(const ScalarField& field) {
  const GridSpec& spec = field.spec();
  const int n = spec.dim();
  std::vector<std::vector<int>> dirs;
  for (int k = 0; k < n; ++k) {
    std::vector<int> d(static_cast<std::size_t>(n), 0);
    d[static_cast<std::size_t>(k)] = 1;
    dirs.push_back(d);
  }
  if (n == 2) {
    dirs.push_back({1, 1});
    dirs.push_back({1, -1});
  }
  auto ok = [](double v) { return !std::isnan(v) && !is_capped(v); };
  double worst = 0.0;
  for (std::size_t flat = 0; flat < spec.size(); ++flat) {
    const Index idx = spec.unravel(flat);
    if (!ok(field[flat])) continue;
    for (const auto& d : dirs) {
      bool inside = true;
      std::ptrdiff_t off = 0;
      for (int k = 0; k < n; ++k) {
        const int s = d[static_cast<std::size_t>(k)];
        if (s == 0) continue;
        const auto i = idx[static_cast<std::size_t>(k)];
        if (i == 0 || i + 1 >= spec.axis(k).count) inside = false;
        off += s * static_cast<std::ptrdiff_t>(spec.stride(k));
      }
      if (!inside) continue;
      const double fp = field[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(flat) + off)];
      const double fm = field[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(flat) - off)];
      if (!ok(fp) || !ok(fm)) continue;
      worst = std::max(worst, -(fp - 2.0 * field[flat] + fm));
    }
  }
  return worst;
}

std::vector<std::pair<double, double>> discrete_slope_range(const PotentialField& primal) {
  const GridSpec& spec = primal.spec();
  std::vector<std::pair<double, double>> range(
      static_cast<std::size_t>(spec.dim()),
      {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()});
  for (std::size_t flat = 0; flat < spec.size(); ++flat) {
    if (primal.capped(flat)) continue;
    const Index idx = spec.unravel(flat);
    for (int k = 0; k < spec.dim(); ++k) {
      if (idx[static_cast<std::size_t>(k)] + 1 >= spec.axis(k).count) continue;
      const std::size_t nb = flat + spec.stride(k);
      if (primal.capped(nb)) continue;
      const double s = (primal[nb] - primal[flat]) / spec.spacing(k);
      auto& r = range[static_cast<std::size_t>(k)];
      r.first = std::min(r.first, s);
      r.second = std::max(r.second, s);
    }
  }
  return range;
}

bool covers_slopes(const PotentialField& primal, const GridSpec& dual_grid) {
  const auto range = discrete_slope_range(primal);
  for (int k = 0; k < dual_grid.dim(); ++k) {
    const auto& r = range[static_cast<std::size_t>(k)];
    if (r.first > r.second) continue;
    if (r.first < dual_grid.axis(k).min || r.second > dual_grid.axis(k).max) return false;
  }
  return true;
}

GridSpec suggest_dual_grid(const PotentialField& primal, std::size_t count) {
  const auto range = discrete_slope_range(primal);
  std::vector<Axis> axes;
  for (const auto& r : range) {
    double half = 1.0;
    if (r.first <= r.second) half = std::max({std::abs(r.first), std::abs(r.second), 1e-3});
    axes.push_back(Axis{-half, half, count});
  }
  return GridSpec(std::move(axes));
}

CheckReport gradient_map_inverse_check(const PotentialField& primal, const PotentialField& dual,
                                       double tolerance, double margin) {
  const GridSpec& xs = primal.spec();
  const GridSpec& zs = dual.spec();
  const int n = xs.dim();
  if (zs.dim() != n) throw InvalidArgument("primal and dual dimensions differ");

  std::vector<std::vector<double>> comps(static_cast<std::size_t>(n),
                                         std::vector<double>(xs.size(), std::nan("")));
  for (std::size_t flat = 0; flat < xs.size(); ++flat) {
    if (!stencil_valid(primal, flat)) continue;
    const Vec g = gradient(primal, flat);
    for (int k = 0; k < n; ++k) comps[static_cast<std::size_t>(k)][flat] = g[k];
  }
  std::vector<ScalarField> grad_fields;
  for (auto& c : comps) grad_fields.emplace_back(xs, std::move(c), FieldKind::scalar);

  CheckReport report("gradient_map_inverse", tolerance);
  const auto nodes = Region::interior(zs, margin).nodes(zs);
  for (std::size_t flat : nodes) {
    const Vec z = zs.point(flat);
    if (!stencil_valid(dual, flat)) {
      ++report.skipped;
      continue;
    }
    const Vec x = gradient(dual, flat);
    Vec g(n);
    bool ok = true;
    for (int k = 0; k < n && ok; ++k) {
      const auto v = interpolate(grad_fields[static_cast<std::size_t>(k)], x);
      if (!v) ok = false;
      else g[k] = *v;
    }
    if (!ok) {
      ++report.skipped;
      continue;
    }
    report.observe((g - z).norm(), std::vector<double>(z.data(), z.data() + n));
  }
  const double total = static_cast<double>(report.checked + report.skipped);
  if (total == 0.0 || static_cast<double>(report.skipped) > 0.2 * total)
    throw CoverageError("gradient map check skipped " + std::to_string(report.skipped) + " of " +
                        std::to_string(report.checked + report.skipped) + " points");
  return report.finalize();
}

}  // namespace heatdual
