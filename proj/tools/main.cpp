// heatdual: evolve, verify and conjugate scenarios from the command line.
//
// Exit status: 0 all checks passed, 1 a check failed, 2 configuration or usage
// error, 3 numerical failure (singular Hessian, truncation, coverage...).

#include "heatdual/error.hpp"
#include "heatdual/parallel.hpp"
#include "heatdual/potentials.hpp"
#include "heatdual/scenario.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kUsage = 2, kNumerical = 3 };

std::filesystem::path output_dir(const heatdual::ScenarioConfig& cfg, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (cfg.output_dir) return *cfg.output_dir;
  if (const char* env = std::getenv("HEATDUAL_OUT"); env && *env) return env;
  return ".";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heat flow, Legendre transforms and the functional volume product on grids"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out;
  unsigned threads = 1;
  double tolerance_scale = 1.0;
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  const auto scenario = [&](CLI::App* cmd, bool tolerances) {
    cmd->add_option("--config", config_path, "Scenario file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", out, "Output directory (default: config, then $HEATDUAL_OUT, then .)");
    cmd->add_option("--threads", threads, "Worker threads, 0 = all cores")->capture_default_str();
    if (tolerances)
      cmd->add_option("--tolerance-scale", tolerance_scale, "Multiply every check tolerance")
          ->check(CLI::PositiveNumber)
          ->capture_default_str();
  };
  CLI::App* evolve = app.add_subcommand("evolve", "Write the volume-product trace over the configured times");
  scenario(evolve, false);
  CLI::App* verify = app.add_subcommand("verify", "Run the configured checks and write report.json");
  scenario(verify, true);
  CLI::App* conjugate = app.add_subcommand("conjugate", "Write primal and dual tables");
  scenario(conjugate, false);
  CLI::App* list = app.add_subcommand("list-potentials", "Print the built-in potentials");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("heatdual"));
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (list->parsed()) {
      for (const auto& p : heatdual::builtin_potentials())
        std::printf("%-20s %dd  %-28s grid %s  dual %s%s%s\n", p.id.c_str(), p.dim, p.formula.c_str(),
                    p.source.describe().c_str(), p.dual.describe().c_str(), p.out ? "  out " : "",
                    p.out ? p.out->describe().c_str() : "");
      return kOk;
    }
    heatdual::set_thread_count(threads);
    const heatdual::ScenarioConfig cfg = heatdual::load_config(config_path);
    const auto dir = output_dir(cfg, out);
    if (evolve->parsed()) {
      heatdual::run_evolve(cfg, dir);
      return kOk;
    }
    if (conjugate->parsed()) {
      heatdual::run_conjugate(cfg, dir);
      return kOk;
    }
    const bool passed = heatdual::run_verify(cfg, dir, tolerance_scale);
    if (!passed) std::fprintf(stderr, "heatdual: some checks failed, see %s\n", (dir / "report.json").c_str());
    return passed ? kOk : kCheckFailed;
  } catch (const heatdual::InvalidArgument& e) {
    std::fprintf(stderr, "heatdual: %s\n", e.what());
    return kUsage;
  } catch (const heatdual::NumericalError& e) {
    std::fprintf(stderr, "heatdual: numerical error: %s\n", e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "heatdual: %s\n", e.what());
    return kNumerical;
  }
}
