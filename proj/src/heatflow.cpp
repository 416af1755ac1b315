#include "heatdual/heatflow.hpp"

#include "heatdual/convex.hpp"
#include "heatdual/error.hpp"
#include "heatdual/parallel.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace heatdual {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string format_point(const Vec& x) {
  std::ostringstream os;
  os << '(';
  for (int k = 0; k < x.size(); ++k) os << (k ? ", " : "") << x[k];
  os << ')';
  return os.str();
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double log_normalizer(int n, double t) {
  return 0.5 * static_cast<double>(n) * std::log(4.0 * std::numbers::pi * t);
}

void require_positive_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t))
    throw DomainError("diffusion time must be positive, got " + std::to_string(t));
}

}  // namespace

double log_half_erfc(double a) {
  if (a < 25.0) return std::log(0.5 * std::erfc(a));
  const double inv2 = 1.0 / (a * a);
  const double series = 1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2;
  return -a * a - std::log(a * std::sqrt(std::numbers::pi)) + std::log(series) - std::log(2.0);
}

TailBound::TailBound(const PotentialField& phi0, double t) : t_(t) {
  const GridSpec& spec = phi0.spec();
  const int n = spec.dim();
  const double log_kernel_norm = -0.5 * std::log(4.0 * std::numbers::pi * t);
  for (std::size_t flat = 0; flat < spec.size(); ++flat) {
    if (phi0.capped(flat)) continue;
    const Index idx = spec.unravel(flat);
    std::array<int, kMaxDim> side{};
    bool boundary = false;
    for (int k = 0; k < n; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (idx[uk] == 0) side[uk] = -1;
      if (idx[uk] + 1 == spec.axis(k).count) side[uk] = 1;
      boundary = boundary || side[uk] != 0;
    }
    if (!boundary) continue;
    const Vec y = spec.point(flat);
    std::array<double, kMaxDim> slope{}, coord{}, log_w{};
    for (int k = 0; k < n; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      coord[uk] = y[k];
      const Axis& ax = spec.axis(k);
      log_w[uk] = std::log(side[uk] ? 0.5 * ax.spacing() : ax.spacing()) + log_kernel_norm;
      if (!side[uk]) continue;
      Index in = idx;
      in[uk] = side[uk] < 0 ? 1 : ax.count - 2;
      const std::size_t inner = spec.ravel(in);
      slope[uk] = phi0.capped(inner) ? 0.0 : (phi0[flat] - phi0[inner]) / ax.spacing();
    }
    // Every non-empty subset of the outward axes owns the orthant-like piece
    // of the complement lying beyond the node along exactly those axes.
    unsigned outward = 0;
    for (int k = 0; k < n; ++k)
      if (side[static_cast<std::size_t>(k)]) outward |= 1u << k;
    for (unsigned mask = outward; mask; mask = (mask - 1) & outward)
      pieces_.push_back(Piece{phi0[flat], mask, side, slope, coord, log_w});
  }
  dim_ = n;
}

double TailBound::log_bound(const Vec& x) const {
  const double sqrt4t = std::sqrt(4.0 * t_);
  const double inv4t = 1.0 / (4.0 * t_);
  double acc = kNegInf;
  for (const Piece& p : pieces_) {
    double term = -p.value;
    for (int k = 0; k < dim_; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const double d = static_cast<double>(p.side[uk]) * (p.coord[uk] - x[k]);
      if (p.mask & (1u << k)) {
        const double s = p.slope[uk];
        term += t_ * s * s + s * d + log_half_erfc((d + 2.0 * t_ * s) / sqrt4t);
      } else {
        const double e = p.coord[uk] - x[k];
        term += p.log_weight[uk] - e * e * inv4t;
      }
    }
    acc = log_add(acc, term);
  }
  return acc;
}

HeatKernelEvaluator::HeatKernelEvaluator(const PotentialField& phi0, double t)
    : source_(phi0.spec()), t_(t), tail_(phi0, t) {
  require_positive_time(t);
  const auto w = domain_weights(phi0, Region::full(source_));
  log_weight_.assign(source_.size(), kNegInf);
  shift_ = kNegInf;
  for (std::size_t k = 0; k < source_.size(); ++k) {
    if (w[k] <= 0.0) continue;
    log_weight_[k] = std::log(w[k]) - phi0[k];
    shift_ = std::max(shift_, log_weight_[k]);
  }
  if (shift_ == kNegInf) throw DomainError("potential has no integrable region");
  scaled_.resize(source_.size());
  for (std::size_t k = 0; k < source_.size(); ++k)
    scaled_[k] = log_weight_[k] == kNegInf ? 0.0 : std::exp(log_weight_[k] - shift_);
  // Real axes occupy the trailing slots so the innermost loop is the longest.
  const int off = kMaxDim - source_.dim();
  for (int p = 0; p < kMaxDim; ++p) {
    const auto ua = static_cast<std::size_t>(p);
    const int a = p - off;
    if (a >= 0) {
      counts_[ua] = source_.axis(a).count;
      coords_[ua].resize(counts_[ua]);
      for (std::size_t i = 0; i < counts_[ua]; ++i) coords_[ua][i] = source_.axis(a).coord(i);
    } else {
      counts_[ua] = 1;
      coords_[ua] = {0.0};
    }
  }
}

HeatKernelEvaluator::Jet HeatKernelEvaluator::evaluate(const Vec& x) const {
  const int n = source_.dim();
  const double inv4t = 1.0 / (4.0 * t_);
  const int off = kMaxDim - n;
  std::array<double, kMaxDim> xp{0.0, 0.0, 0.0};
  for (int a = 0; a < n; ++a) xp[static_cast<std::size_t>(off + a)] = x[a];

  thread_local std::vector<double> weights;
  thread_local std::array<std::vector<double>, kMaxDim> factors;
  weights.resize(source_.size());

  double log_scale = 0.0;
  double s0 = 0.0;
  std::array<double, kMaxDim> s1{0.0, 0.0, 0.0};

  // Separable fast path: every term is scaled_[k] * prod_a factor_a[i_a], all <= 1.
  for (int a = 0; a < kMaxDim; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    auto& f = factors[ua];
    f.resize(counts_[ua]);
    double mx = kNegInf;
    for (std::size_t i = 0; i < counts_[ua]; ++i) {
      const double d = xp[ua] - coords_[ua][i];
      f[i] = -d * d * inv4t;
      mx = std::max(mx, f[i]);
    }
    for (std::size_t i = 0; i < counts_[ua]; ++i) f[i] = std::exp(f[i] - mx);
    log_scale += mx;
  }
  {
    std::size_t k = 0;
    for (std::size_t i0 = 0; i0 < counts_[0]; ++i0) {
      const double f0 = factors[0][i0];
      const double u0 = coords_[0][i0] - xp[0];
      for (std::size_t i1 = 0; i1 < counts_[1]; ++i1) {
        const double f01 = f0 * factors[1][i1];
        const double u1 = coords_[1][i1] - xp[1];
        for (std::size_t i2 = 0; i2 < counts_[2]; ++i2, ++k) {
          const double w = scaled_[k] * f01 * factors[2][i2];
          weights[k] = w;
          s0 += w;
          s1[0] += w * u0;
          s1[1] += w * u1;
          s1[2] += w * (coords_[2][i2] - xp[2]);
        }
      }
    }
  }
  log_scale += shift_;

  // Terms dropped by underflow are below e^{-700} relative to the largest
  // weight, negligible as long as the sum itself stays far from the underflow range.
  if (!(s0 > 1e-250)) {
    double m = kNegInf;
    std::size_t k = 0;
    for (std::size_t i0 = 0; i0 < counts_[0]; ++i0)
      for (std::size_t i1 = 0; i1 < counts_[1]; ++i1)
        for (std::size_t i2 = 0; i2 < counts_[2]; ++i2, ++k) {
          const double d0 = xp[0] - coords_[0][i0];
          const double d1 = xp[1] - coords_[1][i1];
          const double d2 = xp[2] - coords_[2][i2];
          const double a = log_weight_[k] - (d0 * d0 + d1 * d1 + d2 * d2) * inv4t;
          weights[k] = a;
          m = std::max(m, a);
        }
    s0 = 0.0;
    s1 = {0.0, 0.0, 0.0};
    k = 0;
    for (std::size_t i0 = 0; i0 < counts_[0]; ++i0)
      for (std::size_t i1 = 0; i1 < counts_[1]; ++i1)
        for (std::size_t i2 = 0; i2 < counts_[2]; ++i2, ++k) {
          const double w = weights[k] == kNegInf ? 0.0 : std::exp(weights[k] - m);
          weights[k] = w;
          s0 += w;
          s1[0] += w * (coords_[0][i0] - xp[0]);
          s1[1] += w * (coords_[1][i1] - xp[1]);
          s1[2] += w * (coords_[2][i2] - xp[2]);
        }
    log_scale = m;
  }

  Jet jet;
  const double log_p = log_scale + std::log(s0) - log_normalizer(n, t_);
  jet.value = -log_p;

  std::array<double, kMaxDim> mean{s1[0] / s0, s1[1] / s0, s1[2] / s0};
  double c[kMaxDim][kMaxDim] = {};
  {
    std::size_t k = 0;
    for (std::size_t i0 = 0; i0 < counts_[0]; ++i0) {
      const double v0 = coords_[0][i0] - xp[0] - mean[0];
      for (std::size_t i1 = 0; i1 < counts_[1]; ++i1) {
        const double v1 = coords_[1][i1] - xp[1] - mean[1];
        for (std::size_t i2 = 0; i2 < counts_[2]; ++i2, ++k) {
          const double w = weights[k];
          if (w == 0.0) continue;
          const double v2 = coords_[2][i2] - xp[2] - mean[2];
          c[0][0] += w * v0 * v0;
          c[0][1] += w * v0 * v1;
          c[0][2] += w * v0 * v2;
          c[1][1] += w * v1 * v1;
          c[1][2] += w * v1 * v2;
          c[2][2] += w * v2 * v2;
        }
      }
    }
  }
  jet.gradient.resize(n);
  jet.hessian.resize(n, n);
  const double inv2t = 1.0 / (2.0 * t_);
  for (int a = 0; a < n; ++a) {
    jet.gradient[a] = -mean[static_cast<std::size_t>(off + a)] * inv2t;
    for (int b = a; b < n; ++b) {
      const double cov = c[off + a][off + b] / s0;
      const double h = (a == b ? inv2t : 0.0) - cov * inv2t * inv2t;
      jet.hessian(a, b) = h;
      jet.hessian(b, a) = h;
    }
  }
  jet.log_tail_ratio = tail_.log_bound(x) - log_p;
  return jet;
}

PotentialField heat_evolve(const PotentialField& phi0, double t, const GridSpec& out_grid,
                           const HeatOptions& options) {
  require_positive_time(t);
  const GridSpec& src = phi0.spec();
  const int n = src.dim();
  if (out_grid.dim() != n) throw InvalidArgument("output grid dimension differs from source");

  const auto w = domain_weights(phi0, Region::full(src));
  std::vector<double> current(src.size(), kNegInf);
  for (std::size_t k = 0; k < src.size(); ++k)
    if (w[k] > 0.0) current[k] = std::log(w[k]) - phi0[k];

  // Axis-by-axis log-domain sum: exact factorization of the tensor kernel.
  std::array<std::size_t, kMaxDim> count{};
  for (int k = 0; k < n; ++k) count[static_cast<std::size_t>(k)] = src.axis(k).count;
  const double inv4t = 1.0 / (4.0 * t);
  for (int a = 0; a < n; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    auto in_count = count;
    auto out_count = count;
    out_count[ua] = out_grid.axis(a).count;
    auto strides = [n](const std::array<std::size_t, kMaxDim>& c) {
      std::array<std::size_t, kMaxDim> s{};
      std::size_t acc = 1;
      for (int k = n - 1; k >= 0; --k) {
        s[static_cast<std::size_t>(k)] = acc;
        acc *= c[static_cast<std::size_t>(k)];
      }
      return std::pair{s, acc};
    };
    const auto [in_stride, in_size] = strides(in_count);
    const auto [out_stride, out_size] = strides(out_count);
    std::vector<double> next(out_size);
    std::vector<double> ys(in_count[ua]);
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = src.axis(a).coord(i);
    const std::size_t lines = in_size / in_count[ua];
    parallel_for(lines, [&](std::size_t line) {
      std::size_t rem = line, in_off = 0, out_off = 0;
      for (int k = n - 1; k >= 0; --k) {
        const auto uk = static_cast<std::size_t>(k);
        if (k == a) continue;
        const std::size_t i = rem % in_count[uk];
        rem /= in_count[uk];
        in_off += i * in_stride[uk];
        out_off += i * out_stride[uk];
      }
      thread_local std::vector<double> terms;
      terms.resize(in_count[ua]);
      for (std::size_t j = 0; j < out_count[ua]; ++j) {
        const double xo = out_grid.axis(a).coord(j);
        double m = kNegInf;
        for (std::size_t i = 0; i < in_count[ua]; ++i) {
          const double v = current[in_off + i * in_stride[ua]];
          const double d = xo - ys[i];
          terms[i] = v == kNegInf ? kNegInf : v - d * d * inv4t;
          m = std::max(m, terms[i]);
        }
        double s = 0.0;
        if (m != kNegInf)
          for (std::size_t i = 0; i < in_count[ua]; ++i)
            if (terms[i] != kNegInf) s += std::exp(terms[i] - m);
        next[out_off + j * out_stride[ua]] = m == kNegInf ? kNegInf : m + std::log(s);
      }
    });
    current = std::move(next);
    count = out_count;
  }

  const double norm = log_normalizer(n, t);
  std::vector<double> values(out_grid.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = current[i] == kNegInf ? kCap : norm - current[i];

  const TailBound tail(phi0, t);
  const double log_tol = std::log(options.tail_tolerance);
  for (std::size_t flat : Region::interior(out_grid, options.margin).nodes(out_grid)) {
    const Vec x = out_grid.point(flat);
    const double ratio = tail.log_bound(x) + values[flat];
    if (ratio > log_tol)
      throw TruncationError("heat evolution at t=" + std::to_string(t) + ": source box too small at x=" +
                            format_point(x) + " (tail/mass ratio " + std::to_string(std::exp(ratio)) +
                            ")");
  }
  return PotentialField(out_grid, std::move(values));
}

PotentialField heat_evolve(const PotentialField& phi0, double t, const HeatOptions& options) {
  return heat_evolve(phi0, t, phi0.spec(), options);
}

PotentialField fokker_planck_evolve(const PotentialField& phi0, double t, const GridSpec& out_grid,
                                    const HeatOptions& options) {
  if (t < 0.0 || !std::isfinite(t)) throw DomainError("Fokker-Planck time must be >= 0");
  if (t == 0.0) {
    if (!(out_grid == phi0.spec()))
      throw InvalidArgument("at t = 0 the output grid must equal the source grid");
    return phi0;
  }
  const double s = 0.5 * std::expm1(2.0 * t);
  const PotentialField heat = heat_evolve(phi0, s, out_grid.scaled(std::exp(t)), options);
  std::vector<double> values(heat.values().begin(), heat.values().end());
  const double shift = static_cast<double>(out_grid.dim()) * t;
  for (double& v : values)
    if (!is_capped(v)) v -= shift;
  return PotentialField(out_grid, std::move(values));
}

double default_time_step(double t) { return std::clamp(t / 100.0, 1e-5, 1e-2); }

double heat_time_derivative(const PotentialField& phi0, double t, const Vec& x, double dt,
                            const HeatOptions& options) {
  require_positive_time(t);
  if (!(dt > 0.0) || dt >= t)
    throw InvalidArgument("time step must satisfy 0 < dt < t (dt=" + std::to_string(dt) + ")");
  const HeatKernelEvaluator plus(phi0, t + dt);
  const HeatKernelEvaluator minus(phi0, t - dt);
  const auto jp = plus.evaluate(x);
  const auto jm = minus.evaluate(x);
  const double log_tol = std::log(options.tail_tolerance);
  if (jp.log_tail_ratio > log_tol || jm.log_tail_ratio > log_tol)
    throw TruncationError("time derivative at x=" + format_point(x) + " fails the tail bound");
  return (jp.value - jm.value) / (2.0 * dt);
}

PotentialField evolved_conjugate(const HeatKernelEvaluator& evaluator, const PotentialField& phi_t,
                                 const GridSpec& dual_grid, const HeatOptions& options,
                                 double* max_log_tail_ratio) {
  const int n = evaluator.dim();
  const GridSpec& xs = phi_t.spec();
  const auto start = legendre_transform_with_argmax(phi_t, dual_grid);
  const double t = evaluator.t();

  std::vector<double> psi(dual_grid.size());
  std::vector<double> tail(dual_grid.size(), kNegInf);
  parallel_for(dual_grid.size(), [&](std::size_t j) {
    const Vec z = dual_grid.point(j);
    Vec x = xs.point(start.argmax[j]);
    auto jet = evaluator.evaluate(x);
    double f = z.dot(x) - jet.value;
    const double gtol = 1e-13 * std::max(1.0, z.norm());
    for (int it = 0; it < 60; ++it) {
      const Vec g = z - jet.gradient;
      if (g.norm() <= gtol) break;
      Vec step(n);
      Eigen::LLT<Mat> llt(jet.hessian);
      if (llt.info() == Eigen::Success) step = llt.solve(g);
      if (llt.info() != Eigen::Success || !step.allFinite()) step = 2.0 * t * g;
      double scale = 1.0;
      bool accepted = false;
      for (int back = 0; back < 60; ++back, scale *= 0.5) {
        const Vec xn = x + scale * step;
        auto jn = evaluator.evaluate(xn);
        const double fn = z.dot(xn) - jn.value;
        if (fn >= f - 1e-14 * (1.0 + std::abs(f))) {
          x = xn;
          jet = std::move(jn);
          f = fn;
          accepted = true;
          break;
        }
      }
      if (!accepted || (scale * step).norm() <= 1e-15 * (1.0 + x.norm())) break;
    }
    psi[j] = std::min(z.dot(x) - jet.value, kCap);
    tail[j] = jet.log_tail_ratio;
  });

  double worst = kNegInf;
  std::size_t worst_node = 0;
  for (std::size_t flat : Region::interior(dual_grid, options.margin).nodes(dual_grid))
    if (tail[flat] > worst) {
      worst = tail[flat];
      worst_node = flat;
    }
  if (max_log_tail_ratio) *max_log_tail_ratio = worst;
  if (worst > std::log(options.tail_tolerance))
    throw TruncationError("conjugate at t=" + std::to_string(t) + ": maximizer for z=" +
                          format_point(dual_grid.point(worst_node)) +
                          " sees source-box truncation (tail/mass " + std::to_string(std::exp(worst)) +
                          ")");
  return PotentialField(dual_grid, std::move(psi));
}

FlowSnapshot make_snapshot(const PotentialField& phi0, double t, const GridSpec& dual_grid,
                           const HeatOptions& options, const std::optional<GridSpec>& out_grid,
                           const std::string& potential_id) {
  const GridSpec out = out_grid.value_or(phi0.spec());
  SnapshotMeta meta{potential_id, phi0.spec(), out, dual_grid};
  if (t == 0.0) {
    if (!(out == phi0.spec())) throw InvalidArgument("at t = 0 the output grid must equal the source grid");
    return FlowSnapshot{0.0, phi0, legendre_transform(phi0, dual_grid), kNegInf, std::move(meta)};
  }
  require_positive_time(t);
  PotentialField phi_t = heat_evolve(phi0, t, out, options);
  const HeatKernelEvaluator evaluator(phi0, t);
  double tail = kNegInf;
  PotentialField psi_t = evolved_conjugate(evaluator, phi_t, dual_grid, options, &tail);
  return FlowSnapshot{t, std::move(phi_t), std::move(psi_t), tail, std::move(meta)};
}

}  // namespace heatdual
