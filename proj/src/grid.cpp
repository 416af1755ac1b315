#include "heatdual/grid.hpp"

#include "heatdual/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace heatdual {

double Axis::coord(std::size_t i) const {
  const std::size_t last = count - 1;
  if (2 * i == last && min == -max) return 0.0;
  if (2 * i <= last) return min + static_cast<double>(i) * spacing();
  return max - static_cast<double>(last - i) * spacing();
}

GridSpec::GridSpec(std::vector<Axis> axes, std::size_t point_budget) : axes_(std::move(axes)) {
  if (axes_.empty() || axes_.size() > static_cast<std::size_t>(kMaxDim))
    throw InvalidArgument("grid dimension must be 1, 2 or 3");
  size_ = 1;
  for (std::size_t k = 0; k < axes_.size(); ++k) {
    const Axis& a = axes_[k];
    if (!std::isfinite(a.min) || !std::isfinite(a.max) || !(a.min < a.max))
      throw InvalidArgument("grid axis " + std::to_string(k) + ": need finite min < max");
    if (a.count < 8)
      throw InvalidArgument("grid axis " + std::to_string(k) + ": need at least 8 points");
    size_ *= a.count;
    if (size_ > point_budget)
      throw InvalidArgument("grid exceeds point budget of " + std::to_string(point_budget));
  }
  std::size_t s = 1;
  for (int k = dim() - 1; k >= 0; --k) {
    strides_[static_cast<std::size_t>(k)] = s;
    s *= axes_[static_cast<std::size_t>(k)].count;
  }
}

GridSpec GridSpec::cube(int dim, double min, double max, std::size_t count) {
  if (dim < 1 || dim > kMaxDim) throw InvalidArgument("grid dimension must be 1, 2 or 3");
  return GridSpec(std::vector<Axis>(static_cast<std::size_t>(dim), Axis{min, max, count}));
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (const Axis& a : axes_) v *= a.spacing();
  return v;
}

Index GridSpec::unravel(std::size_t flat) const {
  Index idx{};
  for (int k = 0; k < dim(); ++k) {
    idx[static_cast<std::size_t>(k)] = flat / stride(k);
    flat %= stride(k);
  }
  return idx;
}

std::size_t GridSpec::ravel(const Index& idx) const {
  std::size_t flat = 0;
  for (int k = 0; k < dim(); ++k) flat += idx[static_cast<std::size_t>(k)] * stride(k);
  return flat;
}

Vec GridSpec::point(const Index& idx) const {
  Vec x(dim());
  for (int k = 0; k < dim(); ++k) x[k] = axis(k).coord(idx[static_cast<std::size_t>(k)]);
  return x;
}

Vec GridSpec::point(std::size_t flat) const { return point(unravel(flat)); }

std::size_t GridSpec::nearest(const Vec& x) const {
  Index idx{};
  for (int k = 0; k < dim(); ++k) {
    const Axis& a = axis(k);
    const double r = std::round((x[k] - a.min) / a.spacing());
    const double c = std::clamp(r, 0.0, static_cast<double>(a.count - 1));
    idx[static_cast<std::size_t>(k)] = static_cast<std::size_t>(c);
  }
  return ravel(idx);
}

bool GridSpec::contains(const Vec& x) const {
  for (int k = 0; k < dim(); ++k)
    if (!(x[k] >= axis(k).min && x[k] <= axis(k).max)) return false;
  return true;
}

bool GridSpec::symmetric() const {
  return std::all_of(axes_.begin(), axes_.end(), [](const Axis& a) { return a.min == -a.max; });
}

std::size_t GridSpec::mirror(std::size_t flat) const {
  Index idx = unravel(flat);
  for (int k = 0; k < dim(); ++k) {
    auto& i = idx[static_cast<std::size_t>(k)];
    i = axis(k).count - 1 - i;
  }
  return ravel(idx);
}

GridSpec GridSpec::scaled(double factor) const {
  if (!(factor > 0.0)) throw InvalidArgument("grid scale factor must be positive");
  std::vector<Axis> axes = axes_;
  for (Axis& a : axes) {
    a.min *= factor;
    a.max *= factor;
  }
  return GridSpec(std::move(axes), std::numeric_limits<std::size_t>::max());
}

std::string GridSpec::describe() const {
  std::ostringstream os;
  for (int k = 0; k < dim(); ++k) {
    if (k) os << " x ";
    os << '[' << axis(k).min << ',' << axis(k).max << "]:" << axis(k).count;
  }
  return os.str();
}

Region Region::full(const GridSpec& spec) {
  Region r;
  r.dim = spec.dim();
  for (int k = 0; k < spec.dim(); ++k) r.hi[static_cast<std::size_t>(k)] = spec.axis(k).count - 1;
  return r;
}

Region Region::interior(const GridSpec& spec, double margin_fraction) {
  Region r;
  r.dim = spec.dim();
  for (int k = 0; k < spec.dim(); ++k) {
    const std::size_t n = spec.axis(k).count;
    const auto drop = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::floor(margin_fraction * static_cast<double>(n))));
    if (2 * drop >= n) throw InvalidArgument("interior margin leaves no points");
    r.lo[static_cast<std::size_t>(k)] = drop;
    r.hi[static_cast<std::size_t>(k)] = n - 1 - drop;
  }
  return r;
}

bool Region::contains(const Index& idx) const {
  for (int k = 0; k < dim; ++k) {
    const auto u = static_cast<std::size_t>(k);
    if (idx[u] < lo[u] || idx[u] > hi[u]) return false;
  }
  return true;
}

std::size_t Region::size() const {
  std::size_t n = 1;
  for (int k = 0; k < dim; ++k) {
    const auto u = static_cast<std::size_t>(k);
    n *= hi[u] - lo[u] + 1;
  }
  return n;
}

std::vector<std::size_t> Region::nodes(const GridSpec& spec) const {
  std::vector<std::size_t> out;
  out.reserve(size());
  for (std::size_t flat = 0; flat < spec.size(); ++flat)
    if (contains(spec.unravel(flat))) out.push_back(flat);
  return out;
}

std::string to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::potential: return "potential";
    case FieldKind::density: return "density";
    case FieldKind::log_density: return "log-density";
    case FieldKind::scalar: return "scalar";
  }
  return "unknown";
}

ScalarField::ScalarField(GridSpec spec, std::vector<double> values, FieldKind kind)
    : spec_(std::move(spec)), values_(std::move(values)), kind_(kind) {
  if (values_.size() != spec_.size())
    throw InvalidArgument("field has " + std::to_string(values_.size()) + " values, grid has " +
                          std::to_string(spec_.size()) + " points");
  if (kind_ == FieldKind::density) {
    for (double v : values_)
      if (std::isnan(v) || v < 0.0) throw InvalidArgument("density values must be finite and >= 0");
  }
}

ScalarField ScalarField::sample(const GridSpec& spec, FieldKind kind,
                                const std::function<double(const Vec&)>& f) {
  std::vector<double> v(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) v[i] = f(spec.point(i));
  return ScalarField(spec, std::move(v), kind);
}

PotentialField::PotentialField(GridSpec spec, std::vector<double> values)
    : ScalarField(std::move(spec), std::move(values), FieldKind::potential) {
  bool any_finite = false;
  for (double& v : values_) {
    if (std::isnan(v)) throw InvalidArgument("potential contains NaN");
    if (v == -std::numeric_limits<double>::infinity())
      throw InvalidArgument("potential must be bounded below");
    if (v >= kCap) v = kCap;
    else any_finite = true;
  }
  if (!any_finite) throw DomainError("potential is +infinity everywhere (empty domain)");
}

PotentialField PotentialField::sample(const GridSpec& spec,
                                      const std::function<double(const Vec&)>& f) {
  std::vector<double> v(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) v[i] = f(spec.point(i));
  return PotentialField(spec, std::move(v));
}

double PotentialField::min_value() const { return values_[argmin()]; }

std::size_t PotentialField::argmin() const {
  return static_cast<std::size_t>(std::min_element(values_.begin(), values_.end()) - values_.begin());
}

bool PotentialField::minimum_is_interior() const {
  const Index idx = spec_.unravel(argmin());
  for (int k = 0; k < spec_.dim(); ++k) {
    const auto i = idx[static_cast<std::size_t>(k)];
    if (i == 0 || i + 1 == spec_.axis(k).count) return false;
  }
  return true;
}

ScalarField PotentialField::density() const {
  std::vector<double> d(values_.size());
  std::transform(values_.begin(), values_.end(), d.begin(),
                 [](double v) { return is_capped(v) ? 0.0 : std::exp(-v); });
  return ScalarField(spec_, std::move(d), FieldKind::density);
}

PotentialField PotentialField::shifted(double c) const {
  std::vector<double> v(values_);
  for (double& x : v)
    if (!is_capped(x)) x += c;
  return PotentialField(spec_, std::move(v));
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 16) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

std::vector<double> trapezoid_weights(const GridSpec& spec, const Region& region) {
  std::vector<double> w(spec.size(), 0.0);
  for (std::size_t flat = 0; flat < spec.size(); ++flat) {
    const Index idx = spec.unravel(flat);
    if (!region.contains(idx)) continue;
    double v = 1.0;
    for (int k = 0; k < spec.dim(); ++k) {
      const auto u = static_cast<std::size_t>(k);
      const bool face = idx[u] == region.lo[u] || idx[u] == region.hi[u];
      v *= spec.spacing(k) * (face ? 0.5 : 1.0);
    }
    w[flat] = v;
  }
  return w;
}

std::vector<double> domain_weights(const PotentialField& phi, const Region& region) {
  const GridSpec& spec = phi.spec();
  const int n = spec.dim();
  const std::size_t corners = std::size_t{1} << n;
  const double share = spec.cell_volume() / static_cast<double>(corners);
  std::vector<double> w(spec.size(), 0.0);
  for (std::size_t flat = 0; flat < spec.size(); ++flat) {
    const Index idx = spec.unravel(flat);
    bool lower_corner = region.contains(idx);
    for (int k = 0; k < n && lower_corner; ++k) {
      const auto u = static_cast<std::size_t>(k);
      if (idx[u] >= region.hi[u]) lower_corner = false;
    }
    if (!lower_corner) continue;
    bool complete = true;
    for (std::size_t c = 0; c < corners && complete; ++c) {
      std::size_t node = flat;
      for (int k = 0; k < n; ++k)
        if (c & (std::size_t{1} << k)) node += spec.stride(k);
      complete = !phi.capped(node);
    }
    if (!complete) continue;
    for (std::size_t c = 0; c < corners; ++c) {
      std::size_t node = flat;
      for (int k = 0; k < n; ++k)
        if (c & (std::size_t{1} << k)) node += spec.stride(k);
      w[node] += share;
    }
  }
  return w;
}

double quadrature(const ScalarField& density) {
  if (density.kind() != FieldKind::density)
    throw InvalidArgument("quadrature expects a density field, got " + to_string(density.kind()));
  const auto w = trapezoid_weights(density.spec(), Region::full(density.spec()));
  std::vector<double> terms(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double v = density[i];
    if (std::isnan(v)) throw InvalidArgument("density contains NaN");
    terms[i] = w[i] * v;
  }
  return pairwise_sum(terms);
}

double log_integral_exp_neg(const PotentialField& phi, const Region& region) {
  const auto w = domain_weights(phi, region);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] > 0.0) m = std::max(m, std::log(w[i]) - phi[i]);
  if (!std::isfinite(m)) return -std::numeric_limits<double>::infinity();
  std::vector<double> terms(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] > 0.0) terms[i] = std::exp(std::log(w[i]) - phi[i] - m);
  return m + std::log(pairwise_sum(terms));
}

double log_integral_exp_neg(const PotentialField& phi) {
  return log_integral_exp_neg(phi, Region::full(phi.spec()));
}

double integral_exp_neg(const PotentialField& phi) { return std::exp(log_integral_exp_neg(phi)); }

namespace {

bool usable(double v) { return !std::isnan(v) && !is_capped(v); }

void require_stencil(const ScalarField& field, std::size_t flat, bool mixed) {
  const GridSpec& spec = field.spec();
  const Index idx = spec.unravel(flat);
  for (int k = 0; k < spec.dim(); ++k) {
    const auto i = idx[static_cast<std::size_t>(k)];
    if (i == 0 || i + 1 >= spec.axis(k).count)
      throw StencilError("finite-difference stencil leaves the grid at node " +
                         std::to_string(flat));
  }
  auto check = [&](std::size_t node) {
    if (!usable(field[node]))
      throw StencilError("undefined derivative: capped or NaN value next to node " +
                         std::to_string(flat));
  };
  check(flat);
  for (int k = 0; k < spec.dim(); ++k) {
    check(flat + spec.stride(k));
    check(flat - spec.stride(k));
  }
  if (!mixed) return;
  for (int a = 0; a < spec.dim(); ++a)
    for (int b = a + 1; b < spec.dim(); ++b) {
      check(flat + spec.stride(a) + spec.stride(b));
      check(flat + spec.stride(a) - spec.stride(b));
      check(flat - spec.stride(a) + spec.stride(b));
      check(flat - spec.stride(a) - spec.stride(b));
    }
}

}  // namespace

bool stencil_valid(const ScalarField& field, std::size_t flat) {
  try {
    require_stencil(field, flat, true);
    return true;
  } catch (const StencilError&) {
    return false;
  }
}

Vec gradient(const ScalarField& field, std::size_t flat) {
  require_stencil(field, flat, false);
  const GridSpec& spec = field.spec();
  Vec g(spec.dim());
  for (int k = 0; k < spec.dim(); ++k) {
    const std::size_t s = spec.stride(k);
    g[k] = (field[flat + s] - field[flat - s]) / (2.0 * spec.spacing(k));
  }
  return g;
}

Mat hessian(const ScalarField& field, std::size_t flat) {
  require_stencil(field, flat, true);
  const GridSpec& spec = field.spec();
  const int n = spec.dim();
  Mat h(n, n);
  const double f0 = field[flat];
  for (int a = 0; a < n; ++a) {
    const std::size_t sa = spec.stride(a);
    const double ha = spec.spacing(a);
    h(a, a) = (field[flat + sa] - 2.0 * f0 + field[flat - sa]) / (ha * ha);
    for (int b = a + 1; b < n; ++b) {
      const std::size_t sb = spec.stride(b);
      const double hb = spec.spacing(b);
      const double v = (field[flat + sa + sb] - field[flat + sa - sb] - field[flat - sa + sb] +
                        field[flat - sa - sb]) /
                       (4.0 * ha * hb);
      h(a, b) = v;
      h(b, a) = v;
    }
  }
  return h;
}

std::optional<double> interpolate(const ScalarField& field, const Vec& x) {
  const GridSpec& spec = field.spec();
  const int n = spec.dim();
  if (!spec.contains(x)) return std::nullopt;
  Index base{};
  std::array<double, kMaxDim> frac{};
  for (int k = 0; k < n; ++k) {
    const Axis& a = spec.axis(k);
    double s = (x[k] - a.min) / a.spacing();
    auto i = static_cast<std::size_t>(std::floor(s));
    if (i >= a.count - 1) i = a.count - 2;
    base[static_cast<std::size_t>(k)] = i;
    frac[static_cast<std::size_t>(k)] = std::clamp(s - static_cast<double>(i), 0.0, 1.0);
  }
  const std::size_t corner0 = spec.ravel(base);
  double acc = 0.0;
  for (std::size_t c = 0; c < (std::size_t{1} << n); ++c) {
    std::size_t node = corner0;
    double wgt = 1.0;
    for (int k = 0; k < n; ++k) {
      const bool up = c & (std::size_t{1} << k);
      if (up) node += spec.stride(k);
      const double f = frac[static_cast<std::size_t>(k)];
      wgt *= up ? f : 1.0 - f;
    }
    const double v = field[node];
    if (!usable(v)) return std::nullopt;
    acc += wgt * v;
  }
  return acc;
}

}  // namespace heatdual
