#include "heatdual/potentials.hpp"

#include "heatdual/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace heatdual {

namespace {

constexpr double kEdgeSlack = 1e-12;

GridSpec line(double lo, double hi, std::size_t n) { return GridSpec({Axis{lo, hi, n}}); }

GridSpec plane(Axis a, Axis b) { return GridSpec({a, b}); }

std::vector<BuiltinPotential> make_library() {
  std::vector<BuiltinPotential> lib;
  const auto quad_cert = [](double m) { return 0.5 * m * m; };
  const auto indicator_cert = [](double m) { return m; };

  lib.push_back({"gaussian", "x^2/2", 1, [](const Vec& x) { return 0.5 * x[0] * x[0]; }, true, true,
                 true, line(-12, 12, 1025), line(-6, 6, 513), quad_cert});
  lib.push_back({"quartic", "x^4/4", 1,
                 [](const Vec& x) {
                   const double s = x[0] * x[0];
                   return 0.25 * s * s;
                 },
                 true, false, false, line(-10, 10, 1025), line(-10, 10, 1025),
                 [](double m) { return 0.75 * std::pow(m, 4.0 / 3.0); }});
  lib.push_back({"cosh", "cosh(x) - 1", 1, [](const Vec& x) { return std::cosh(x[0]) - 1.0; }, true,
                 true, false, line(-10, 10, 1025), line(-10, 10, 1025),
                 [](double m) { return m * std::asinh(m) - std::sqrt(1.0 + m * m) + 1.0; }});
  lib.push_back({"abs_cubed", "|x|^3/3", 1,
                 [](const Vec& x) {
                   const double a = std::abs(x[0]);
                   return a * a * a / 3.0;
                 },
                 true, false, false, line(-10, 10, 1025), line(-10, 10, 1025),
                 [](double m) { return 2.0 / 3.0 * std::pow(m, 1.5); }});
  lib.push_back({"interval", "indicator of [-1, 1]", 1,
                 [](const Vec& x) { return std::abs(x[0]) <= 1.0 + kEdgeSlack ? 0.0 : kCap; }, false,
                 false, false, line(-4, 4, 1025), line(-12, 12, 1025), indicator_cert,
                 line(-16, 16, 1025)});
  lib.push_back({"gaussian_2d", "|x|^2/2", 2, [](const Vec& x) { return 0.5 * x.squaredNorm(); },
                 true, true, true, GridSpec::cube(2, -12, 12, 129), GridSpec::cube(2, -6, 6, 65),
                 quad_cert});
  lib.push_back({"aniso_quadratic_2d", "x1^2/2 + 2 x2^2", 2,
                 [](const Vec& x) { return 0.5 * x[0] * x[0] + 2.0 * x[1] * x[1]; }, true, true, false,
                 plane({-12, 12, 129}, {-6, 6, 129}), plane({-6, 6, 65}, {-12, 12, 65}), quad_cert});
  lib.push_back({"ball_2d", "indicator of the unit disc", 2,
                 [](const Vec& x) { return x.norm() <= 1.0 + kEdgeSlack ? 0.0 : kCap; }, false, false,
                 false, GridSpec::cube(2, -1.5, 1.5, 129), GridSpec::cube(2, -12, 12, 129),
                 indicator_cert, GridSpec::cube(2, -12, 12, 257)});
  return lib;
}

std::vector<double> distinct_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v)
    if (out.empty() || std::abs(x - out.back()) > 1e-9 * std::max(1.0, std::abs(x))) out.push_back(x);
  return out;
}

}  // namespace

const std::vector<BuiltinPotential>& builtin_potentials() {
  static const std::vector<BuiltinPotential> lib = make_library();
  return lib;
}

const BuiltinPotential* find_potential(const std::string& id) {
  for (const auto& p : builtin_potentials())
    if (p.id == id) return &p;
  return nullptr;
}

PotentialField load_potential_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open potential table " + path);
  std::vector<std::vector<double>> rows;
  std::string text;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, text)) {
    ++lineno;
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos || text[first] == '#') continue;
    std::istringstream ls(text);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        row.push_back(v);
      } catch (const std::exception&) {
        throw InvalidArgument(path + ":" + std::to_string(lineno) + ": not a number: " + tok);
      }
    }
    if (width == 0) width = row.size();
    if (row.size() != width || width < 2 || width > kMaxDim + 1)
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected " +
                            (width ? std::to_string(width) : std::string("2 to 4")) + " columns");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidArgument(path + ": empty potential table");
  const int dim = static_cast<int>(width) - 1;

  std::vector<Axis> axes;
  for (int k = 0; k < dim; ++k) {
    std::vector<double> c;
    for (const auto& r : rows) c.push_back(r[static_cast<std::size_t>(k)]);
    const auto nodes = distinct_sorted(std::move(c));
    if (nodes.size() < 2) throw InvalidArgument(path + ": axis " + std::to_string(k) + " has one node");
    axes.push_back(Axis{nodes.front(), nodes.back(), nodes.size()});
    const Axis& ax = axes.back();
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (std::abs(nodes[i] - ax.coord(i)) > 1e-6 * ax.spacing())
        throw InvalidArgument(path + ": axis " + std::to_string(k) + " is not uniformly spaced");
  }
  GridSpec spec(axes);
  if (rows.size() != spec.size())
    throw InvalidArgument(path + ": " + std::to_string(rows.size()) + " rows for a grid of " +
                          std::to_string(spec.size()) + " nodes");
  std::vector<double> values(spec.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Vec x = spec.point(i);
    for (int k = 0; k < dim; ++k)
      if (std::abs(rows[i][static_cast<std::size_t>(k)] - x[k]) > 1e-6 * spec.spacing(k))
        throw InvalidArgument(path + ": row " + std::to_string(i + 1) + " is out of row-major order");
    const double v = rows[i].back();
    values[i] = std::isinf(v) && v > 0 ? kCap : v;
  }
  return PotentialField(std::move(spec), std::move(values));
}

void write_potential_table(const std::string& path, const ScalarField& field) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "w"), &std::fclose);
  if (!f) throw InvalidArgument("cannot write " + path);
  const GridSpec& spec = field.spec();
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const Vec x = spec.point(i);
    for (int k = 0; k < spec.dim(); ++k) std::fprintf(f.get(), "%.17g ", x[k]);
    std::fprintf(f.get(), "%.17g\n", field[i]);
  }
}

}  // namespace heatdual
