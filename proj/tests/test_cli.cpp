#include "heatdual/error.hpp"
#include "heatdual/potentials.hpp"
#include "heatdual/scenario.hpp"

#include <doctest.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace heatdual;
namespace fs = std::filesystem;

namespace {

const std::string kQuartic = R"(potential = quartic
dimension = 1
[grid]
min = -10
max = 10
count = 257
[times]
values = 0.1, 0.2, 0.4
)";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("heatdual_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "case.ini");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

std::vector<std::vector<double>> csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("full config") {
  spdlog::set_level(spdlog::level::err);
  const auto cfg = parse_config(R"(# comment
potential = aniso_quadratic_2d   ; trailing comment
dimension = 2

[grid]
min = -12, -6
max = 12, 6
count = 65, 33

[dual_grid]
min = -6
max = 6
count = 41

[times]
t_min = 0.05
t_max = 2
count = 10
spacing = geometric

[checks]
names = pointwise_identity, brascamp_lieb
tolerance.pointwise_identity = 1e-3
times = 0.5
dt = 1e-3
point = 0.5, 0.25

[output]
dir = results
formats = csv
snapshots = true
)",
                                "full.ini");
  CHECK(cfg.potential == "aniso_quadratic_2d");
  CHECK(cfg.dimension == 2);
  REQUIRE(cfg.grid);
  CHECK(cfg.grid->axis(1).max == 6.0);
  CHECK(cfg.grid->axis(1).count == 33);
  CHECK(cfg.dual_grid->axis(1).count == 41);
  REQUIRE(cfg.times.size() == 10);
  CHECK(cfg.times.front() == doctest::Approx(0.05));
  CHECK(cfg.times.back() == doctest::Approx(2.0));
  CHECK(cfg.times[1] / cfg.times[0] == doctest::Approx(cfg.times[9] / cfg.times[8]));
  CHECK(cfg.checks == std::vector<std::string>{"pointwise_identity", "brascamp_lieb"});
  CHECK(cfg.tolerances.at("pointwise_identity") == 1e-3);
  CHECK(cfg.parameters.times == std::vector<double>{0.5});
  CHECK(*cfg.parameters.dt == 1e-3);
  CHECK((*cfg.parameters.point)[1] == 0.25);
  CHECK(*cfg.output_dir == "results");
  CHECK(cfg.write_csv);
  CHECK_FALSE(cfg.write_json);
  CHECK(cfg.snapshots);
}

TEST_CASE("time lists") {
  auto cfg = parse_config(kQuartic + "");
  CHECK(cfg.times == std::vector<double>{0.1, 0.2, 0.4});
  cfg = parse_config("potential = quartic\ndimension = 1\n[grid]\nmin=-1\nmax=1\ncount=9\n[times]\nt_min = 0.1\n"
                     "t_max = 0.5\ncount = 5\nspacing = linear\n");
  REQUIRE(cfg.times.size() == 5);
  CHECK(cfg.times[2] == doctest::Approx(0.3));
  cfg = parse_config("potential = quartic\ndimension = 1\n[grid]\nmin=-1\nmax=1\ncount=9\n");
  CHECK(cfg.times.size() == 10);
}

TEST_CASE("config diagnostics name the file, line and field") {
  const std::string base = "potential = quartic\ndimension = 1\n";
  const std::string grid = "[grid]\nmin = -1\nmax = 1\ncount = 9\n";
  CHECK(config_error("dimension = 1\n" + grid).find("potential") != std::string::npos);
  CHECK(config_error(base + grid + "[times]\nvalues = 0.2, 0.1\n").find("case.ini:8: times.values") != std::string::npos);
  CHECK(config_error(base + grid + "colour = red\n").find("case.ini:7: grid.colour") != std::string::npos);
  CHECK(config_error(base + "[grid]\nmin = -1\nmin = -2\nmax = 1\ncount = 9\n").find("case.ini:5: grid.min") !=
        std::string::npos);
  CHECK(config_error(base + "[grid]\nmin = -1\nmax = 1\ncount = 7\n").find("count") != std::string::npos);
  CHECK(config_error(base + "[grid]\nmin = -1\nmax = 1\ncount = 8.5\n").find("count") != std::string::npos);
  CHECK(config_error(base + "[grid]\nmin = 1\nmax = -1\ncount = 9\n").find("grid") != std::string::npos);
  CHECK(config_error(base + grid + "[checks]\nnames = pointwise, heat_relation\n").find("pointwise") !=
        std::string::npos);
  CHECK(config_error(base + grid + "[checks]\ntolerance.bogus = 1\n").find("tolerance.bogus") != std::string::npos);
  CHECK(config_error(base + grid + "[output]\nformats = xml\n").find("formats") != std::string::npos);
  CHECK(config_error("potential = gaussian_2d\ndimension = 2\n[grid]\nmin = -1, -1, -1\nmax = 1\ncount = 9\n")
            .find("min") != std::string::npos);
  CHECK(config_error(base + grid + "[grid]\nmin = 0\n").find("grid") != std::string::npos);
  CHECK(config_error(base + "dimension = 4\n").find("dimension") != std::string::npos);
}

TEST_CASE("a built-in without a grid is rejected with the field name") {
  try {
    parse_config("potential = quartic\ndimension = 1\n", "nogrid.ini");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("grid") != std::string::npos);
  }
  CHECK_THROWS_AS(resolve_potential(parse_config("potential = no_such_thing\ndimension = 1\n")), ConfigError);
}

TEST_CASE("potential tables round trip") {
  const fs::path dir = scratch("tables");
  const GridSpec g({Axis{-2, 2, 9}, Axis{-1, 3, 11}});
  const auto phi = PotentialField::sample(g, [](const Vec& x) { return x[0] > 1.5 ? kCap : std::exp(x[1]) + x[0] / 3; });
  write_potential_table((dir / "t.dat").string(), phi);
  const auto back = load_potential_table((dir / "t.dat").string());
  CHECK(back.spec() == g);
  for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(back[i] == phi[i]);

  std::ofstream(dir / "hand.dat") << "# x value\n-1 inf\n-0.5 0.25\n0 0\n0.5 0.25\n1 1\n1.5 2.25\n2 4\n2.5 6.25\n";
  const auto hand = load_potential_table((dir / "hand.dat").string());
  CHECK(hand.size() == 8);
  CHECK(hand.capped(0));
  CHECK(hand[3] == 0.25);

  std::ofstream(dir / "bad.dat") << "0 0\n1 1\n3 9\n4 16\n5 25\n6 36\n7 49\n8 64\n";
  CHECK_THROWS_AS(load_potential_table((dir / "bad.dat").string()), InvalidArgument);
  CHECK_THROWS_AS(load_potential_table((dir / "missing.dat").string()), InvalidArgument);
}

TEST_CASE("a table potential needs no grid section") {
  const fs::path dir = scratch("table_cfg");
  const auto abs = PotentialField::sample(GridSpec({Axis{-3, 3, 61}}), [](const Vec& x) { return std::abs(x[0]); });
  write_potential_table((dir / "abs.dat").string(), abs);
  std::ofstream(dir / "abs.ini") << "potential = abs.dat\ndimension = 1\n[dual_grid]\nmin = -2\nmax = 2\ncount = 41\n";
  const auto cfg = load_config(dir / "abs.ini");
  const auto pot = resolve_potential(cfg);
  CHECK(pot.phi0.size() == 61);
  CHECK_FALSE(pot.certificate);

  run_conjugate(cfg, dir / "out");
  const auto dual = load_potential_table((dir / "out" / "dual.dat").string());
  for (std::size_t j = 0; j < dual.size(); ++j) {
    const double z = dual.spec().point(j)[0];
    if (std::abs(z) <= 1 + 1e-12)
      CHECK(std::abs(dual[j]) < 1e-12);
    else
      CHECK(dual[j] == doctest::Approx(3 * (std::abs(z) - 1)));
  }
}

TEST_CASE("conjugate: Gaussian fixed point and interval support function") {
  const fs::path dir = scratch("conjugate");
  auto cfg = parse_config("potential = gaussian\ndimension = 1\n[grid]\nmin = -6\nmax = 6\ncount = 1025\n");
  run_conjugate(cfg, dir / "g");
  const auto primal = load_potential_table((dir / "g" / "primal.dat").string());
  const auto dual = load_potential_table((dir / "g" / "dual.dat").string());
  CHECK(primal.spec() == dual.spec());
  for (std::size_t i : Region::interior(dual.spec()).nodes(dual.spec())) CHECK(std::abs(dual[i] - primal[i]) < 1e-4);

  cfg = parse_config("potential = interval\ndimension = 1\n[grid]\nmin = -4\nmax = 4\ncount = 801\n[dual_grid]\n"
                     "min = -5\nmax = 5\ncount = 101\n");
  run_conjugate(cfg, dir / "i");
  const auto support = load_potential_table((dir / "i" / "dual.dat").string());
  for (std::size_t j = 0; j < support.size(); ++j)
    CHECK(std::abs(support[j] - std::abs(support.spec().point(j)[0])) <= 0.01);
}

TEST_CASE("verify: single check selection and unattainable tolerance") {
  const fs::path dir = scratch("verify");
  auto cfg = parse_config(kQuartic + "[checks]\nnames = pointwise_identity\ntimes = 0.5\n");
  const auto reports = verify_checks(cfg);
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].name == "pointwise_identity");
  CHECK(reports[0].passed);
  CHECK(run_verify(cfg, dir / "ok"));
  const auto json = nlohmann::json::parse(read(dir / "ok" / "report.json"));
  REQUIRE(json.size() == 1);
  for (const char* key : {"name", "max_residual", "tolerance", "passed", "worst_location", "samples"})
    CHECK(json[0].contains(key));

  cfg.tolerances["pointwise_identity"] = 1e-15;
  CHECK_FALSE(run_verify(cfg, dir / "fail"));
  const auto failed = nlohmann::json::parse(read(dir / "fail" / "report.json"));
  CHECK(failed[0]["passed"] == false);
  CHECK(failed[0]["worst_location"]["point"].size() == 1);
  CHECK(failed[0]["worst_location"]["t"] == 0.5);

  cfg.tolerances.clear();
  const auto scaled = verify_checks(cfg, 1e-12);
  CHECK(scaled[0].tolerance == doctest::Approx(1e-14));
  CHECK_FALSE(scaled[0].passed);
}

TEST_CASE("verify: default selection follows the potential") {
  auto cfg = parse_config(kQuartic + "[checks]\nnames = superlinearity_bound, small_time_bound, monotonicity\n");
  const auto reports = verify_checks(cfg);
  REQUIRE(reports.size() == 3);
  for (const auto& r : reports) CHECK(r.passed);
  CHECK(reports[0].detail("b") == doctest::Approx(0.75));
}

TEST_CASE("evolve: Gaussian volume product column and quartic alpha") {
  const fs::path dir = scratch("evolve");
  auto cfg = parse_config("potential = gaussian\ndimension = 1\n[grid]\nmin = -12\nmax = 12\ncount = 513\n[dual_grid]\n"
                          "min = -6\nmax = 6\ncount = 257\n[times]\nvalues = 0.1, 0.5, 1\n[output]\nsnapshots = true\n");
  run_evolve(cfg, dir / "g");
  std::ifstream in(dir / "g" / "trace.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,alpha,alpha_prime_fd,alpha_prime_integral,int_exp_neg_phi_t,int_exp_neg_psi_t,volume_product");
  const auto rows = csv_rows(dir / "g" / "trace.csv");
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) {
    REQUIRE(row.size() == 7);
    CHECK(std::abs(row[6] - 6.28319) < 1e-4);
  }
  CHECK(fs::exists(dir / "g" / "trace.json"));
  CHECK(fs::exists(dir / "g" / "psi_t_2.dat"));
  CHECK(load_potential_table((dir / "g" / "phi_t_0.dat").string()).size() == 513);

  cfg = parse_config(kQuartic + "[dual_grid]\nmin = -10\nmax = 10\ncount = 257\n[output]\nformats = csv\n");
  run_evolve(cfg, dir / "q");
  CHECK_FALSE(fs::exists(dir / "q" / "trace.json"));
  const auto q = csv_rows(dir / "q" / "trace.csv");
  for (std::size_t k = 1; k < q.size(); ++k) CHECK(q[k][1] >= q[k - 1][1] - 1e-4);
}

TEST_CASE("shipped scenario files parse") {
  for (const auto& entry : fs::directory_iterator(HEATDUAL_TEST_DATA)) {
    if (entry.path().extension() != ".ini") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(resolve_potential(load_config(entry.path())));
  }
}

TEST_CASE("reports keep the location of the worst observation") {
  CheckReport r("demo", 1.0);
  r.observe(0.5, {}, 0.1);
  r.observe(0.2, {}, 0.2);
  r.observe(0.7, {1.0}, 0.3);
  r.observe(0.1, {2.0}, 0.4);
  r.finalize();
  CHECK(r.max_residual == 0.7);
  CHECK(*r.worst_t == 0.3);
  CHECK(r.worst_location == std::vector<double>{1.0});
  CHECK(r.checked == 4);
  CHECK(r.passed);

  CheckReport first("demo", 1.0);
  first.observe(0.0, {}, 0.5);
  first.observe(0.0, {}, 0.6);
  CHECK(*first.worst_t == 0.5);

  CheckReport merged("demo", 0.6);
  merged.merge(first);
  merged.merge(r);
  merged.finalize();
  CHECK(*merged.worst_t == 0.3);
  CHECK(merged.checked == 6);
  CHECK_FALSE(merged.passed);

  CheckReport nan("demo", 1.0);
  nan.observe(std::nan(""), {3.0});
  CHECK_FALSE(nan.finalize().passed);
}
