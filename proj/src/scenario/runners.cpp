#include "heatdual/convex.hpp"
#include "heatdual/error.hpp"
#include "heatdual/inequalities.hpp"
#include "heatdual/potentials.hpp"
#include "heatdual/santalo.hpp"
#include "heatdual/scenario.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>

namespace heatdual {

namespace {

namespace fs = std::filesystem;

const std::map<std::string, double>& default_tolerances() {
  static const std::map<std::string, double> tol{
      {"legendre_oracle", 1e-12},       {"volume_product_bound", 1e-3},
      {"pointwise_identity", 1e-2},     {"perturbation_relation", 1e-2},
      {"heat_relation", 1e-3},          {"gradient_map_inverse", 5e-3},
      {"convexity_preservation", 1e-8}, {"brascamp_lieb", 1e-4},
      {"monotonicity", 1e-4},           {"alpha_prime_cross_validation", 5e-3},
      {"hessian_variance_identity", 1e-3}, {"small_time_bound", 1e-6},
      {"lim0_chain", 1e-6},             {"superlinearity_bound", 1e-9},
      {"rescaling_identity", 1e-3}};
  return tol;
}

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

/// Folds per-time reports into one; per-run details are dropped in favour of
/// the aggregates the caller adds.
CheckReport combine(const std::string& name, double tolerance, const std::vector<CheckReport>& parts) {
  CheckReport out(name, tolerance);
  for (const auto& p : parts) {
    CheckReport bare = p;
    bare.details.clear();
    out.merge(bare);
  }
  return out;
}

class Verifier {
 public:
  Verifier(const ScenarioConfig& cfg, double scale)
      : cfg_(cfg), pot_(resolve_potential(cfg)), scale_(scale) {
    flow_.out_grid = pot_.out;
    flow_.dt = cfg.parameters.dt;
  }

  std::vector<std::string> selection() const {
    if (!cfg_.checks.empty()) return cfg_.checks;
    std::vector<std::string> out;
    for (const auto& name : check_names()) {
      if (name == "superlinearity_bound" && !pot_.certificate) continue;
      if ((name == "monotonicity" || name == "alpha_prime_cross_validation" ||
           name == "volume_product_bound") && !even())
        continue;
      if (name == "legendre_oracle" && !builtin() && oracle_cost(pot_.phi0.spec(), pot_.dual) > 1e8) continue;
      out.push_back(name);
    }
    return out;
  }

  CheckReport run(const std::string& name) {
    const double tol = tolerance(name);
    if (name == "legendre_oracle") return legendre_oracle(tol);
    if (name == "volume_product_bound") return volume_product_bound(tol);
    if (name == "pointwise_identity") return per_time(name, tol, [&](double t, double dt, double tl) {
        return verify_pointwise_identity(pot_.phi0, t, pot_.dual, dt, tl, flow_);
      });
    if (name == "perturbation_relation") return per_time(name, tol, [&](double t, double dt, double tl) {
        return verify_perturbation_relation(pot_.phi0, t, pot_.dual, dt, tl, flow_);
      });
    if (name == "heat_relation") return per_time(name, tol, [&](double t, double dt, double tl) {
        return verify_heat_relation(pot_.phi0, t, dt, tl, flow_);
      });
    if (name == "gradient_map_inverse") return per_time(name, tol, [&](double t, double, double tl) {
        const PotentialField phi_t = heat_evolve(pot_.phi0, t, gradient_grid(t), flow_.heat);
        return gradient_map_inverse_check(phi_t, snapshot(t).psi_t, tl, flow_.heat.margin);
      });
    if (name == "convexity_preservation") return convexity_preservation(tol);
    if (name == "brascamp_lieb") return brascamp_lieb(tol);
    if (name == "monotonicity") return monotonicity(tol);
    if (name == "alpha_prime_cross_validation") return cross_validation(tol);
    if (name == "hessian_variance_identity") return hessian_variance(tol);
    if (name == "small_time_bound") {
      std::vector<CheckReport> parts;
      for (double t : cfg_.parameters.small_times)
        parts.push_back(verify_small_time_bound(pot_.phi0, psi0(), t, tol, flow_));
      return combine(name, tol, parts).finalize();
    }
    if (name == "lim0_chain") {
      CheckReport r = verify_small_time_chain(pot_.phi0, psi0(), cfg_.parameters.small_times, tol, flow_);
      return r;
    }
    if (name == "superlinearity_bound") return superlinearity(tol);
    if (name == "rescaling_identity") {
      std::vector<CheckReport> parts;
      for (double t : cfg_.parameters.rescaling_times)
        parts.push_back(rescaling_check(pot_.phi0, t, pot_.dual, tol, flow_));
      CheckReport r = combine(name, tol, parts);
      for (std::size_t k = 0; k < parts.size(); ++k) {
        r.add_detail("volume_product_fokker_planck_" + std::to_string(k),
                     parts[k].detail("volume_product_fokker_planck"));
        r.add_detail("volume_product_heat_" + std::to_string(k), parts[k].detail("volume_product_heat"));
      }
      return r.finalize();
    }
    throw ConfigError("unknown check '" + name + "'");
  }

 private:
  static double oracle_cost(const GridSpec& a, const GridSpec& b) {
    return static_cast<double>(a.size()) * static_cast<double>(b.size());
  }

  /// Grid for phi_t that contains grad psi_t of every interior dual node.
  /// Axes that are too short are extended at the same spacing.
  GridSpec gradient_grid(double t) {
    const GridSpec base = flow_.out_grid.value_or(pot_.phi0.spec());
    const PotentialField& psi = snapshot(t).psi_t;
    std::vector<double> reach(static_cast<std::size_t>(base.dim()), 0.0);
    for (std::size_t j : Region::interior(psi.spec(), flow_.heat.margin).nodes(psi.spec())) {
      if (!stencil_valid(psi, j)) continue;
      const Vec x = gradient(psi, j);
      for (int k = 0; k < base.dim(); ++k) reach[k] = std::max(reach[k], std::abs(x[k]));
    }
    std::vector<Axis> axes = base.axes();
    for (int k = 0; k < base.dim(); ++k) {
      Axis& a = axes[static_cast<std::size_t>(k)];
      const double h = a.spacing();
      const double need = 1.05 * reach[k] + 2.0 * h;
      if (-a.min >= need && a.max >= need) continue;
      const double lo = std::min(a.min, -need), hi = std::max(a.max, need);
      const auto steps = static_cast<std::size_t>(std::ceil((hi - lo) / h - 1e-9));
      a = Axis{lo, hi, steps + 1};
    }
    return GridSpec(axes);
  }

  bool builtin() const { return find_potential(pot_.id) != nullptr; }

  bool even() const {
    if (!pot_.phi0.spec().symmetric()) return false;
    return evenness_defect(pot_.phi0) <= 1e-12;
  }

  double tolerance(const std::string& name) const {
    const auto it = cfg_.tolerances.find(name);
    return (it != cfg_.tolerances.end() ? it->second : default_tolerances().at(name)) * scale_;
  }

  double step(double t) const { return flow_.step(t); }

  const FlowSnapshot& snapshot(double t) {
    auto it = snapshots_.find(t);
    if (it == snapshots_.end())
      it = snapshots_.emplace(t, make_snapshot(pot_.phi0, t, pot_.dual, flow_.heat, flow_.out_grid, pot_.id))
               .first;
    return it->second;
  }

  const PotentialField& psi0() {
    if (!psi0_) psi0_ = std::make_unique<PotentialField>(legendre_transform(pot_.phi0, pot_.dual));
    return *psi0_;
  }

  const VolumeProductTrace& trace() {
    if (!trace_) trace_ = std::make_unique<VolumeProductTrace>(evolve_trace(pot_.phi0, cfg_.times, pot_.dual, flow_));
    return *trace_;
  }

  CheckReport per_time(const std::string& name, double tol,
                       const std::function<CheckReport(double, double, double)>& f) {
    std::vector<CheckReport> parts;
    for (double t : cfg_.parameters.times) {
      parts.push_back(f(t, step(t), tol));
      if (!parts.back().worst_t) parts.back().worst_t = t;
    }
    CheckReport r = combine(name, tol, parts);
    if (cfg_.parameters.dt) r.add_detail("dt", *cfg_.parameters.dt);
    return r.finalize();
  }

  CheckReport legendre_oracle(double tol) {
    PotentialField primal = pot_.phi0;
    GridSpec dual = pot_.dual;
    if (const BuiltinPotential* b = find_potential(pot_.id)) {
      const auto coarse = [](const GridSpec& g) {
        std::vector<Axis> axes = g.axes();
        for (auto& a : axes) a.count = std::min<std::size_t>(a.count, 64);
        return GridSpec(axes);
      };
      primal = b->sample(coarse(primal.spec()));
      dual = coarse(dual);
    }
    const PotentialField fast = legendre_transform_with_argmax(primal, dual).dual;
    const PotentialField slow = brute_force_conjugate(primal, dual);
    CheckReport r("legendre_oracle", tol);
    for (std::size_t i = 0; i < dual.size(); ++i) {
      const Vec z = dual.point(i);
      r.observe(std::abs(fast[i] - slow[i]) / std::max(1.0, std::abs(slow[i])),
                std::vector<double>(z.data(), z.data() + z.size()));
    }
    r.add_detail("primal_points", static_cast<double>(primal.spec().size()));
    r.add_detail("dual_points", static_cast<double>(dual.size()));
    return r.finalize();
  }

  double gaussian_bound() const { return std::pow(2.0 * std::numbers::pi, pot_.phi0.spec().dim()); }

  CheckReport volume_product_bound(double tol) {
    const double bound = gaussian_bound();
    CheckReport r("volume_product_bound", tol);
    const double m0 = volume_product(pot_.phi0, psi0());
    r.observe(std::max(0.0, m0 / bound - 1.0), {}, 0.0);
    const auto& tr = trace();
    double worst = m0;
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const double m = std::exp(tr.alpha[k]);
      worst = std::max(worst, m);
      r.observe(std::max(0.0, m / bound - 1.0), {}, tr.times[k]);
    }
    r.add_detail("volume_product_t0", m0);
    r.add_detail("largest_volume_product", worst);
    r.add_detail("gaussian_value", bound);
    return r.finalize();
  }

  CheckReport convexity_preservation(double tol) {
    CheckReport r("convexity_preservation", tol);
    double min_eig = std::numeric_limits<double>::infinity();
    for (double t : cfg_.parameters.times) {
      const FlowSnapshot& s = snapshot(t);
      r.observe(std::max(convexity_defect(s.phi_t), convexity_defect(s.psi_t)), {}, t);
      const GridSpec& g = s.phi_t.spec();
      for (std::size_t i : Region::interior(g, flow_.heat.margin).nodes(g)) {
        min_eig = std::min(min_eig, min_eigenvalue(hessian(s.phi_t, i)));
      }
    }
    if (!(min_eig > 0.0)) r.observe(std::numeric_limits<double>::infinity(), {}, std::nullopt);
    r.add_detail("min_hessian_eigenvalue", min_eig);
    return r.finalize();
  }

  CheckReport brascamp_lieb(double tol) {
    std::vector<CheckReport> parts;
    const int n = pot_.phi0.spec().dim();
    const auto directions = [&](const PotentialField& v, std::optional<double> t) {
      const LogConcaveMeasure mu(v);
      for (int k = 0; k < n; ++k) {
        Vec theta = Vec::Zero(n);
        theta[k] = 1.0;
        CheckReport c = brascamp_lieb_check(mu, theta, {tol, flow_.lambda_min});
        c.worst_t = t;
        parts.push_back(std::move(c));
      }
    };
    if (pot_.strictly_convex) directions(pot_.phi0, 0.0);
    for (double t : cfg_.parameters.times) directions(snapshot(t).psi_t, t);
    CheckReport r = combine("brascamp_lieb", tol, parts);
    double slack = std::numeric_limits<double>::infinity();
    for (const auto& p : parts) slack = std::min(slack, p.detail("slack"));
    r.add_detail("min_slack", slack);
    return r.finalize();
  }

  CheckReport monotonicity(double tol) {
    const auto& tr = trace();
    CheckReport r("monotonicity", tol);
    for (std::size_t k = 0; k < tr.size(); ++k) {
      if (k) r.observe(std::max(0.0, tr.alpha[k - 1] - tr.alpha[k]), {}, tr.times[k]);
      r.observe(std::max(0.0, -tr.alpha_prime_integral[k]), {}, tr.times[k]);
    }
    r.add_detail("alpha_first", tr.alpha.front());
    r.add_detail("alpha_last", tr.alpha.back());
    r.add_detail("alpha_t0", tr.alpha0);
    return r.finalize();
  }

  CheckReport cross_validation(double tol) {
    const auto& tr = trace();
    CheckReport r("alpha_prime_cross_validation", tol);
    for (std::size_t k = 0; k < tr.size(); ++k)
      r.observe(std::abs(tr.alpha_prime_fd[k] - tr.alpha_prime_integral[k]), {}, tr.times[k]);
    return r.finalize();
  }

  CheckReport hessian_variance(double tol) {
    const GridSpec& g = pot_.phi0.spec();
    const int n = g.dim();
    Vec x = Vec::Zero(n);
    if (cfg_.parameters.point)
      for (int k = 0; k < n; ++k) x[k] = (*cfg_.parameters.point)[static_cast<std::size_t>(k)];
    std::vector<CheckReport> parts;
    for (int k = 0; k < n; ++k) {
      Vec theta = Vec::Zero(n);
      theta[k] = 1.0;
      parts.push_back(verify_hessian_variance_identity(pot_.phi0, x, theta, tol, flow_.heat));
    }
    CheckReport r = combine("hessian_variance_identity", tol, parts);
    for (int k = 0; k < n; ++k) {
      r.add_detail("lhs_" + std::to_string(k), parts[static_cast<std::size_t>(k)].detail("lhs"));
      r.add_detail("rhs_" + std::to_string(k), parts[static_cast<std::size_t>(k)].detail("rhs"));
    }
    return r.finalize();
  }

  CheckReport superlinearity(double tol) {
    if (!pot_.certificate)
      throw ConfigError("superlinearity_bound needs checks.certificate_m and checks.certificate_b");
    const auto [m, b] = *pot_.certificate;
    std::vector<CheckReport> parts;
    for (double t : cfg_.parameters.times)
      parts.push_back(verify_superlinearity_bound(pot_.phi0, m, b, t, tol, flow_.heat));
    CheckReport r = combine("superlinearity_bound", tol, parts);
    r.add_detail("M", m);
    r.add_detail("b", b);
    return r.finalize();
  }

  const ScenarioConfig& cfg_;
  ScenarioPotential pot_;
  double scale_;
  FlowOptions flow_;
  std::map<double, FlowSnapshot> snapshots_;
  std::unique_ptr<PotentialField> psi0_;
  std::unique_ptr<VolumeProductTrace> trace_;
};

}  // namespace

namespace {

PotentialField load_scenario_table(const ScenarioConfig& cfg) {
  fs::path path = cfg.potential;
  if (path.is_relative() && !fs::exists(path)) path = cfg.source.parent_path() / path;
  if (!fs::exists(path))
    throw ConfigError(cfg.source.string() + ": potential: '" + cfg.potential +
                      "' is neither a built-in potential nor a readable table");
  try {
    PotentialField phi = load_potential_table(path.string());
    if (phi.spec().dim() != cfg.dimension)
      throw ConfigError(cfg.source.string() + ": dimension: table is " + std::to_string(phi.spec().dim()) +
                        "-dimensional");
    if (cfg.grid && !(*cfg.grid == phi.spec()))
      throw ConfigError(cfg.source.string() + ": grid: does not match the table grid " + phi.spec().describe());
    return phi;
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

ScenarioPotential resolve_potential(const ScenarioConfig& cfg) {
  const BuiltinPotential* b = find_potential(cfg.potential);
  if (b && !cfg.grid) throw ConfigError(cfg.source.string() + ": grid: missing section [grid]");
  PotentialField phi0 = b ? b->sample(*cfg.grid) : load_scenario_table(cfg);
  GridSpec dual = cfg.dual_grid.value_or(phi0.spec());
  ScenarioPotential out{cfg.potential, std::move(phi0), std::move(dual), cfg.out_grid, true, false, std::nullopt};
  if (b) {
    out.smooth = b->smooth;
    out.strictly_convex = b->strictly_convex;
    const double m = cfg.parameters.certificate_m.value_or(1.0);
    out.certificate = std::pair{m, cfg.parameters.certificate_b.value_or(b->certificate(m))};
  } else {
    out.smooth = std::none_of(out.phi0.values().begin(), out.phi0.values().end(), is_capped);
    if (cfg.parameters.certificate_m && cfg.parameters.certificate_b)
      out.certificate = std::pair{*cfg.parameters.certificate_m, *cfg.parameters.certificate_b};
  }
  return out;
}

void run_evolve(const ScenarioConfig& cfg, const fs::path& out_dir) {
  const ScenarioPotential pot = resolve_potential(cfg);
  FlowOptions flow;
  flow.out_grid = pot.out;
  flow.dt = cfg.parameters.dt;
  const VolumeProductTrace tr = evolve_trace(pot.phi0, cfg.times, pot.dual, flow);
  ensure_dir(out_dir);
  if (cfg.write_csv) {
    std::string csv = "t,alpha,alpha_prime_fd,alpha_prime_integral,int_exp_neg_phi_t,int_exp_neg_psi_t,volume_product\n";
    for (std::size_t k = 0; k < tr.size(); ++k) {
      for (double v : {tr.times[k], tr.alpha[k], tr.alpha_prime_fd[k], tr.alpha_prime_integral[k],
                       tr.int_exp_neg_phi_t[k], tr.int_exp_neg_psi_t[k], tr.volume_product(k)})
        csv += format_g(v) + ',';
      csv.back() = '\n';
    }
    write_text(out_dir / "trace.csv", csv);
  }
  if (cfg.write_json) {
    nlohmann::ordered_json j;
    j["potential"] = pot.id;
    j["alpha_t0"] = tr.alpha0;
    j["int_exp_neg_phi0"] = tr.int_exp_neg_phi0;
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < tr.size(); ++k)
      rows.push_back({{"t", tr.times[k]},
                      {"alpha", tr.alpha[k]},
                      {"alpha_prime_fd", tr.alpha_prime_fd[k]},
                      {"alpha_prime_integral", tr.alpha_prime_integral[k]},
                      {"int_exp_neg_phi_t", tr.int_exp_neg_phi_t[k]},
                      {"int_exp_neg_psi_t", tr.int_exp_neg_psi_t[k]},
                      {"volume_product", tr.volume_product(k)},
                      {"interior_coverage", tr.coverage[k]}});
    j["trace"] = rows;
    write_text(out_dir / "trace.json", j.dump(2) + "\n");
  }
  if (cfg.snapshots) {
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const FlowSnapshot s = make_snapshot(pot.phi0, tr.times[k], pot.dual, flow.heat, flow.out_grid, pot.id);
      write_potential_table((out_dir / ("phi_t_" + std::to_string(k) + ".dat")).string(), s.phi_t);
      write_potential_table((out_dir / ("psi_t_" + std::to_string(k) + ".dat")).string(), s.psi_t);
    }
  }
}

std::vector<CheckReport> verify_checks(const ScenarioConfig& cfg, double tolerance_scale) {
  if (!(tolerance_scale > 0.0) || !std::isfinite(tolerance_scale))
    throw ConfigError("tolerance scale must be a positive number");
  Verifier v(cfg, tolerance_scale);
  std::vector<CheckReport> out;
  for (const auto& name : v.selection()) {
    spdlog::info("check {}", name);
    out.push_back(v.run(name));
  }
  return out;
}

std::string format_report_json(const std::vector<CheckReport>& reports) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  return arr.dump(2) + "\n";
}

bool run_verify(const ScenarioConfig& cfg, const fs::path& out_dir, double tolerance_scale) {
  const auto reports = verify_checks(cfg, tolerance_scale);
  ensure_dir(out_dir);
  write_text(out_dir / "report.json", format_report_json(reports));
  return std::all_of(reports.begin(), reports.end(), [](const CheckReport& r) { return r.passed; });
}

void run_conjugate(const ScenarioConfig& cfg, const fs::path& out_dir) {
  const ScenarioPotential pot = resolve_potential(cfg);
  const PotentialField dual = legendre_transform(pot.phi0, pot.dual);
  ensure_dir(out_dir);
  write_potential_table((out_dir / "primal.dat").string(), pot.phi0);
  write_potential_table((out_dir / "dual.dat").string(), dual);
}

}  // namespace heatdual
