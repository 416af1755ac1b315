#include "heatdual/error.hpp"
#include "heatdual/potentials.hpp"
#include "heatdual/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace heatdual {

namespace {

struct Entry {
  std::string value;
  std::size_t line = 0;
  bool used = false;
};

using Section = std::map<std::string, Entry>;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

class Document {
 public:
  Document(const std::string& text, std::string name) : name_(std::move(name)) {
    std::istringstream in(text);
    std::string raw;
    std::string section;
    std::size_t lineno = 0;
    sections_[section];
    while (std::getline(in, raw)) {
      ++lineno;
      const auto hash = raw.find_first_of("#;");
      const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(lineno, line, "unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        if (sections_.count(section)) fail(lineno, section, "section appears twice");
        sections_[section];
        section_lines_[section] = lineno;
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(lineno, line, "expected key = value");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) fail(lineno, line, "empty key");
      auto& sec = sections_[section];
      if (sec.count(key)) fail(lineno, field(section, key), "key appears twice");
      sec[key] = Entry{trim(line.substr(eq + 1)), lineno};
    }
  }

  [[noreturn]] void fail(std::size_t line, const std::string& what, const std::string& msg) const {
    throw ConfigError(name_ + ":" + std::to_string(line) + ": " + what + ": " + msg);
  }
  [[noreturn]] void fail(const std::string& what, const std::string& msg) const {
    throw ConfigError(name_ + ": " + what + ": " + msg);
  }

  static std::string field(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }

  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }

  Entry* find(const std::string& section, const std::string& key) {
    auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    auto e = s->second.find(key);
    if (e == s->second.end()) return nullptr;
    e->second.used = true;
    return &e->second;
  }

  std::string require(const std::string& section, const std::string& key) {
    Entry* e = find(section, key);
    if (!e) {
      const auto sl = section_lines_.find(section);
      if (sl != section_lines_.end()) fail(sl->second, field(section, key), "missing field");
      fail(field(section, key), "missing field");
    }
    return e->value;
  }

  double number(const std::string& section, const std::string& key, const std::string& text,
                std::size_t line) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
      return v;
    } catch (const std::exception&) {
      fail(line, field(section, key), "not a finite number: '" + text + "'");
    }
  }

  std::vector<std::string> list(const Entry& e) const {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(e.value);
    while (std::getline(in, item, ',')) out.push_back(trim(item));
    if (!e.value.empty() && out.empty()) out.push_back({});
    return out;
  }

  std::vector<double> numbers(const std::string& section, const std::string& key) {
    Entry* e = find(section, key);
    if (!e) return {};
    std::vector<double> out;
    for (const auto& item : list(*e)) out.push_back(number(section, key, item, e->line));
    return out;
  }

  std::optional<double> optional_number(const std::string& section, const std::string& key) {
    Entry* e = find(section, key);
    if (!e) return std::nullopt;
    return number(section, key, e->value, e->line);
  }

  bool boolean(const std::string& section, const std::string& key, bool fallback) {
    Entry* e = find(section, key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "yes" || e->value == "1") return true;
    if (e->value == "false" || e->value == "no" || e->value == "0") return false;
    fail(e->line, field(section, key), "expected true or false");
  }

  std::size_t line_of(const std::string& section, const std::string& key) {
    Entry* e = find(section, key);
    return e ? e->line : 0;
  }

  /// Keys that were present but never read.
  void reject_unknown() const {
    for (const auto& [section, entries] : sections_)
      for (const auto& [key, e] : entries)
        if (!e.used) fail(e.line, field(section, key), "unknown field");
  }

  const Section& section(const std::string& s) const { return sections_.at(s); }
  Section& mutable_section(const std::string& s) { return sections_.at(s); }
  std::size_t section_line(const std::string& s) const {
    const auto it = section_lines_.find(s);
    return it == section_lines_.end() ? 0 : it->second;
  }

 private:
  std::string name_;
  std::map<std::string, Section> sections_;
  std::map<std::string, std::size_t> section_lines_;
};

GridSpec parse_grid(Document& doc, const std::string& section, int dim) {
  if (!doc.has_section(section)) doc.fail(section, "missing section [" + section + "]");
  const auto per_axis = [&](const std::string& key) {
    doc.require(section, key);
    auto v = doc.numbers(section, key);
    if (v.size() == 1) v.assign(static_cast<std::size_t>(dim), v[0]);
    if (v.size() != static_cast<std::size_t>(dim))
      doc.fail(doc.line_of(section, key), section + "." + key,
               "expected 1 or " + std::to_string(dim) + " values");
    return v;
  };
  const auto lo = per_axis("min");
  const auto hi = per_axis("max");
  const auto count = per_axis("count");
  std::vector<Axis> axes;
  for (int k = 0; k < dim; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    if (count[uk] != std::floor(count[uk]) || count[uk] < 8)
      doc.fail(doc.line_of(section, "count"), section + ".count", "must be an integer >= 8");
    axes.push_back(Axis{lo[uk], hi[uk], static_cast<std::size_t>(count[uk])});
  }
  try {
    return GridSpec(std::move(axes));
  } catch (const InvalidArgument& e) {
    doc.fail(doc.section_line(section), section, e.what());
  }
}

std::vector<double> parse_times(Document& doc) {
  const std::string s = "times";
  if (doc.find(s, "values")) {
    if (doc.find(s, "t_min") || doc.find(s, "t_max") || doc.find(s, "count") || doc.find(s, "spacing"))
      doc.fail(doc.line_of(s, "values"), "times.values", "give either values or t_min/t_max/count/spacing");
    return doc.numbers(s, "values");
  }
  const double lo = doc.number(s, "t_min", doc.require(s, "t_min"), doc.line_of(s, "t_min"));
  const double hi = doc.number(s, "t_max", doc.require(s, "t_max"), doc.line_of(s, "t_max"));
  const double c = doc.number(s, "count", doc.require(s, "count"), doc.line_of(s, "count"));
  if (c != std::floor(c) || c < 1) doc.fail(doc.line_of(s, "count"), "times.count", "must be a positive integer");
  const std::size_t n = static_cast<std::size_t>(c);
  std::string spacing = "linear";
  if (Entry* e = doc.find(s, "spacing")) spacing = e->value;
  if (spacing != "linear" && spacing != "geometric")
    doc.fail(doc.line_of(s, "spacing"), "times.spacing", "expected linear or geometric");
  if (!(lo > 0.0) || !(hi >= lo)) doc.fail(doc.line_of(s, "t_min"), "times", "need 0 < t_min <= t_max");
  if (n > 1 && !(hi > lo)) doc.fail(doc.line_of(s, "t_max"), "times", "need t_min < t_max for count > 1");
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
    t[k] = spacing == "linear" ? lo + u * (hi - lo) : lo * std::pow(hi / lo, u);
  }
  if (n > 1) t.back() = hi;
  return t;
}

void check_times(Document& doc, const std::string& section, const std::string& key,
                 const std::vector<double>& t) {
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(t[k] > 0.0)) doc.fail(doc.line_of(section, key), Document::field(section, key), "times must be positive");
    if (k && !(t[k] > t[k - 1]))
      doc.fail(doc.line_of(section, key), Document::field(section, key), "times must be strictly increasing");
  }
}

}  // namespace

const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names{
      "legendre_oracle",        "volume_product_bound", "pointwise_identity",
      "perturbation_relation",  "heat_relation",        "gradient_map_inverse",
      "convexity_preservation", "brascamp_lieb",        "monotonicity",
      "alpha_prime_cross_validation", "hessian_variance_identity", "small_time_bound",
      "lim0_chain",             "superlinearity_bound", "rescaling_identity"};
  return names;
}

ScenarioConfig parse_config(const std::string& text, const std::string& name) {
  Document doc(text, name);
  ScenarioConfig cfg;
  cfg.source = name;
  cfg.potential = doc.require("", "potential");
  if (cfg.potential.empty()) doc.fail(doc.line_of("", "potential"), "potential", "empty value");
  {
    const double d = doc.number("", "dimension", doc.require("", "dimension"), doc.line_of("", "dimension"));
    if (d != std::floor(d) || d < 1 || d > kMaxDim)
      doc.fail(doc.line_of("", "dimension"), "dimension", "must be 1, 2 or 3");
    cfg.dimension = static_cast<int>(d);
  }
  const BuiltinPotential* builtin = find_potential(cfg.potential);
  if (builtin && builtin->dim != cfg.dimension)
    doc.fail(doc.line_of("", "potential"), "potential",
             "'" + cfg.potential + "' is " + std::to_string(builtin->dim) + "-dimensional");

  if (doc.has_section("grid"))
    cfg.grid = parse_grid(doc, "grid", cfg.dimension);
  else if (builtin)
    doc.fail("grid", "missing section [grid] (required for built-in potentials)");
  if (doc.has_section("dual_grid")) cfg.dual_grid = parse_grid(doc, "dual_grid", cfg.dimension);
  if (doc.has_section("out_grid")) cfg.out_grid = parse_grid(doc, "out_grid", cfg.dimension);

  if (doc.has_section("times")) {
    cfg.times = parse_times(doc);
    check_times(doc, "times", doc.find("times", "values") ? "values" : "t_min", cfg.times);
  } else {
    for (int k = 0; k < 10; ++k) cfg.times.push_back(0.05 * std::pow(40.0, k / 9.0));
    cfg.times.back() = 2.0;
  }

  if (doc.has_section("checks")) {
    const std::string s = "checks";
    if (Entry* e = doc.find(s, "names")) {
      std::set<std::string> seen;
      for (const auto& n : doc.list(*e)) {
        if (std::find(check_names().begin(), check_names().end(), n) == check_names().end())
          doc.fail(e->line, "checks.names", "unknown check '" + n + "'");
        if (!seen.insert(n).second) doc.fail(e->line, "checks.names", "check '" + n + "' listed twice");
        cfg.checks.push_back(n);
      }
      if (cfg.checks.empty()) doc.fail(e->line, "checks.names", "empty list");
    }
    auto& params = cfg.parameters;
    const auto times_key = [&](const char* key, std::vector<double>& dst) {
      if (doc.find(s, key)) {
        dst = doc.numbers(s, key);
        std::vector<double> sorted = dst;
        std::sort(sorted.begin(), sorted.end());
        check_times(doc, s, key, sorted);
      }
    };
    times_key("times", params.times);
    times_key("small_times", params.small_times);
    times_key("rescaling_times", params.rescaling_times);
    params.dt = doc.optional_number(s, "dt");
    if (params.dt && !(*params.dt > 0.0)) doc.fail(doc.line_of(s, "dt"), "checks.dt", "must be positive");
    if (doc.find(s, "point")) {
      params.point = doc.numbers(s, "point");
      if (params.point->size() != static_cast<std::size_t>(cfg.dimension))
        doc.fail(doc.line_of(s, "point"), "checks.point", "wrong number of coordinates");
    }
    params.certificate_m = doc.optional_number(s, "certificate_m");
    params.certificate_b = doc.optional_number(s, "certificate_b");
    if (params.certificate_m && !(*params.certificate_m >= 0.0))
      doc.fail(doc.line_of(s, "certificate_m"), "checks.certificate_m", "must be >= 0");
    for (auto& [key, entry] : doc.mutable_section(s)) {
      if (key.rfind("tolerance.", 0) != 0) continue;
      const std::string check = key.substr(10);
      if (std::find(check_names().begin(), check_names().end(), check) == check_names().end())
        doc.fail(entry.line, "checks." + key, "unknown check '" + check + "'");
      entry.used = true;
      const double v = doc.number(s, key, entry.value, entry.line);
      if (!(v >= 0.0)) doc.fail(entry.line, "checks." + key, "must be >= 0");
      cfg.tolerances[check] = v;
    }
  }

  if (doc.has_section("output")) {
    const std::string s = "output";
    if (Entry* e = doc.find(s, "dir")) cfg.output_dir = e->value;
    if (Entry* e = doc.find(s, "formats")) {
      cfg.write_csv = cfg.write_json = false;
      for (const auto& f : doc.list(*e)) {
        if (f == "csv") cfg.write_csv = true;
        else if (f == "json") cfg.write_json = true;
        else doc.fail(e->line, "output.formats", "unknown format '" + f + "' (csv, json)");
      }
    }
    cfg.snapshots = doc.boolean(s, "snapshots", false);
  }
  doc.reject_unknown();
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

}  // namespace heatdual
