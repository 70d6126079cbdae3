// tunnelcat <command> <config.ini> [--dump-config]
//
// Exit status: 0 success, 1 usage error (bad command line or config), 2
// numerical failure (the library error message is printed verbatim).

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "CLI11.hpp"
#include "tunnelcat/io.hpp"
#include "tunnelcat/tunnelcat.hpp"

namespace tc = tunnelcat;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::set<std::string> kCommands{"zsc", "inventory", "caustics", "regions", "oracle", "compare", "selftest"};

// Keys accepted in each section; commands accept only their own block.
const std::map<std::string, std::set<std::string>> kKeys{
    {"potential", {"family", "omega", "lambda", "a", "coefficients"}},
    {"units", {"hbar", "mass"}},
    {"output", {"path", "format"}},
    {"zsc", {"beta_list", "beta_range", "steps", "x0_cutoff", "rel_tol"}},
    {"inventory", {"x0", "beta"}},
    {"caustics", {"beta_range", "steps", "well"}},
    {"regions", {"x0_range", "beta_range", "resolution"}},
    {"oracle", {"grid", "beta_list"}},
    {"compare", {"beta_list", "beta_range", "steps", "grid"}},
    {"selftest", {}},
};

using Config = std::map<std::string, std::string>;  // "section.key" -> value

Config read_config(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw UsageError(fmt::format("cannot read config: {}", e.what()));
  }
  Config out;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw UsageError(fmt::format("config key '{}' must be inside a [section]", section));
    }
    for (const auto& [key, value] : body) out[section + "." + key] = value.data();
  }
  return out;
}

class Reader {
 public:
  explicit Reader(const Config& c) : c_(c) {}

  bool has(const std::string& key) const { return c_.count(key) > 0; }

  std::string text(const std::string& key) const {
    auto it = c_.find(key);
    if (it == c_.end()) throw UsageError(fmt::format("missing config key '{}'", key));
    return it->second;
  }

  double number(const std::string& key) const {
    const std::string s = text(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (s.find_first_not_of(" \t", used) == std::string::npos && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(fmt::format("config key '{}': not a finite number: '{}'", key, s));
  }

  double positive(const std::string& key) const {
    const double v = number(key);
    if (!(v > 0.0)) throw UsageError(fmt::format("config key '{}' must be > 0", key));
    return v;
  }

  int integer(const std::string& key, int min) const {
    const double v = number(key);
    if (v != std::floor(v) || v < min || v > 1e7) {
      throw UsageError(fmt::format("config key '{}' must be an integer >= {}", key, min));
    }
    return static_cast<int>(v);
  }

  std::vector<double> list(const std::string& key) const {
    try {
      return tc::detail::parse_list(key, text(key));
    } catch (const tc::InvalidArgument& e) {
      throw UsageError(fmt::format("config key '{}': {}", key, e.what()));
    }
  }

  std::pair<double, double> range(const std::string& key) const {
    const auto v = list(key);
    if (v.size() != 2 || !(v[0] < v[1])) {
      throw UsageError(fmt::format("config key '{}' must be 'min, max' with min < max", key));
    }
    return {v[0], v[1]};
  }

  // beta_list, or beta_range + steps (steps + 1 evenly spaced values).
  std::vector<double> betas(const std::string& block) const {
    std::vector<double> out;
    if (has(block + ".beta_list")) {
      out = list(block + ".beta_list");
      if (out.empty()) throw UsageError(fmt::format("config key '{}.beta_list' is empty", block));
    } else {
      const auto [lo, hi] = range(block + ".beta_range");
      const int steps = integer(block + ".steps", 1);
      for (int i = 0; i <= steps; ++i) out.push_back(i == steps ? hi : lo + (hi - lo) * i / steps);
    }
    for (double b : out) {
      if (!(b > 0.0) || !std::isfinite(b)) throw UsageError(fmt::format("config block '{}': every beta must be > 0", block));
    }
    return out;
  }

 private:
  const Config& c_;
};

void check_keys(const Config& c, const std::string& command) {
  for (const auto& [full, value] : c) {
    const auto dot = full.find('.');
    const std::string section = full.substr(0, dot), key = full.substr(dot + 1);
    auto it = kKeys.find(section);
    if (it == kKeys.end()) throw UsageError(fmt::format("unknown config section '[{}]'", section));
    if (kCommands.count(section) && section != command) {
      throw UsageError(fmt::format("config section '[{}]' does not belong to command '{}'", section, command));
    }
    if (!it->second.count(key)) throw UsageError(fmt::format("unknown config key '{}'", full));
  }
}

tc::Potential potential(const Reader& r) {
  tc::ConfigMap m;
  for (const char* k : {"family", "omega", "lambda", "a", "coefficients"}) {
    if (r.has(std::string("potential.") + k)) m[k] = r.text(std::string("potential.") + k);
  }
  for (const char* k : {"hbar", "mass"}) {
    if (r.has(std::string("units.") + k)) m[k] = r.text(std::string("units.") + k);
  }
  try {
    return tc::potential_from_config(m);
  } catch (const tc::InvalidArgument& e) {
    throw UsageError(fmt::format("potential config: {}", e.what()));
  }
}

tc::Grid grid_from(const Reader& r, const std::string& key, const tc::Potential& pot, double beta_min) {
  if (!r.has(key)) return tc::default_grid(pot, beta_min);
  const auto v = r.list(key);
  if (v.size() != 3 || !(v[0] < v[1]) || v[2] != std::floor(v[2]) || v[2] < 16) {
    throw UsageError(fmt::format("config key '{}' must be 'x_min, x_max, n_points' with n_points >= 16", key));
  }
  return {v[0], v[1], static_cast<int>(v[2])};
}

// Fills defaults so that --dump-config states the full effective run.
Config effective(Config c, const std::string& command) {
  auto fill = [&](const std::string& k, const std::string& v) { c.emplace(k, v); };
  if (command != "selftest") {
    fill("units.hbar", "1");
    fill("units.mass", "1");
  }
  fill("output.path", "-");
  fill("output.format", "csv");
  if (command == "zsc") fill("zsc.rel_tol", "1e-9");
  if (command == "caustics") fill("caustics.well", "0");
  return c;
}

void dump_config(std::ostream& os, const Config& c) {
  std::string current;
  for (const auto& [full, value] : c) {
    const auto dot = full.find('.');
    const std::string section = full.substr(0, dot);
    if (section != current) {
      if (!current.empty()) os << '\n';
      os << '[' << section << "]\n";
      current = section;
    }
    os << full.substr(dot + 1) << " = " << value << '\n';
  }
}

struct Output {
  std::string format;
  std::ostream* os;
  std::ofstream file;
};

void open_output(const Reader& r, Output& out) {
  out.format = r.text("output.format");
  if (out.format != "csv" && out.format != "json") {
    throw UsageError(fmt::format("config key 'output.format' must be csv or json, got '{}'", out.format));
  }
  const std::string path = r.text("output.path");
  if (path == "-") {
    out.os = &std::cout;
    return;
  }
  out.file.open(path);
  if (!out.file) throw UsageError(fmt::format("config key 'output.path': cannot open '{}'", path));
  out.os = &out.file;
}

int run_zsc(const Reader& r, Output& out) {
  const auto pot = potential(r);
  const auto betas = r.betas("zsc");
  std::optional<double> cutoff;
  if (r.has("zsc.x0_cutoff")) cutoff = r.positive("zsc.x0_cutoff");
  tc::PartitionConfig cfg;
  cfg.outer.rel_tol = r.positive("zsc.rel_tol");
  const tc::PartitionSolver solver(pot, cfg);
  std::vector<tc::ZscResult> rows;
  for (double b : betas) rows.push_back(solver.z_semiclassical(b, cutoff));
  if (out.format == "csv") {
    tc::io::write_zsc_csv(*out.os, rows);
  } else {
    tc::io::json j = tc::io::json::array();
    for (const auto& row : rows) j.push_back(tc::io::to_json(row));
    *out.os << j.dump(2) << '\n';
  }
  return 0;
}

int run_inventory(const Reader& r, Output& out) {
  const auto pot = potential(r);
  const double x0 = r.number("inventory.x0");
  const double beta = r.positive("inventory.beta");
  const auto inv = tc::enumerate(pot, x0, beta);
  if (out.format == "csv") {
    tc::io::write_inventory_csv(*out.os, inv);
  } else {
    *out.os << tc::io::to_json(inv).dump(2) << '\n';
  }
  return 0;
}

int run_caustics(const Reader& r, Output& out) {
  const auto pot = potential(r);
  const auto [lo, hi] = r.range("caustics.beta_range");
  if (!(lo > 0.0)) throw UsageError("config key 'caustics.beta_range' must start above 0");
  const int steps = r.integer("caustics.steps", 1);
  const int well = r.integer("caustics.well", 0);
  const tc::PathSolver solver(pot);
  const auto& wells = solver.landscape().wells;
  if (well >= static_cast<int>(wells.size())) {
    throw UsageError(fmt::format("config key 'caustics.well': potential has {} well(s)", wells.size()));
  }
  const auto curve = tc::CausticTracer(solver, wells[well]).curve(lo, hi, steps);
  if (out.format == "csv") {
    tc::io::write_caustic_csv(*out.os, curve);
  } else {
    *out.os << tc::io::to_json(curve).dump(2) << '\n';
  }
  return 0;
}

int run_regions(const Reader& r, Output& out) {
  const auto pot = potential(r);
  const auto xr = r.range("regions.x0_range");
  const auto br = r.range("regions.beta_range");
  if (!(br.first > 0.0)) throw UsageError("config key 'regions.beta_range' must start above 0");
  const int res = r.integer("regions.resolution", 16);
  const auto map = tc::region_map(pot, xr, br, res);
  if (out.format == "csv") {
    tc::io::write_region_csv(*out.os, map);
  } else {
    *out.os << tc::io::to_json(map).dump() << '\n';
  }
  for (const auto& f : map.failures) std::cerr << "warning: " << f << '\n';
  return 0;
}

int run_oracle(const Reader& r, Output& out) {
  const auto pot = potential(r);
  std::vector<double> betas;
  if (r.has("oracle.beta_list")) betas = r.betas("oracle");
  double beta_min = 0.5;
  for (double b : betas) beta_min = std::min(beta_min, b);
  const auto spec = tc::eigen_spectrum(pot, grid_from(r, "oracle.grid", pot, beta_min));
  if (out.format == "csv") {
    tc::io::write_spectrum_csv(*out.os, spec);
    return 0;
  }
  auto j = tc::io::to_json(spec);
  j["z_exact"] = tc::io::json::array();
  for (double b : betas) {
    const auto z = tc::z_exact(spec, b);
    j["z_exact"].push_back({{"beta", tc::io::jnum(b)}, {"z", tc::io::jnum(z.value)}, {"tail_bound", tc::io::jnum(z.tail_bound)}});
  }
  *out.os << j.dump(2) << '\n';
  return 0;
}

int run_compare(const Reader& r, Output& out) {
  const auto pot = potential(r);
  const auto betas = r.betas("compare");
  double beta_min = betas.front();
  for (double b : betas) beta_min = std::min(beta_min, b);
  const auto spec = tc::eigen_spectrum(pot, grid_from(r, "compare.grid", pot, beta_min));
  const tc::PartitionSolver solver(pot);
  std::vector<tc::io::CompareRow> rows;
  for (double b : betas) {
    const double zs = solver.z_semiclassical(b).value;
    const double ze = tc::z_exact(spec, b).value;
    rows.push_back({b, zs, ze, zs / ze - 1.0});
  }
  if (out.format == "csv") {
    tc::io::write_compare_csv(*out.os, rows);
  } else {
    tc::io::json j = tc::io::json::array();
    for (const auto& row : rows) j.push_back(tc::io::to_json(row));
    *out.os << j.dump(2) << '\n';
  }
  return 0;
}

// Harmonic exactness of Z_sc and the elliptic / generic turning-point cross-check.
int run_selftest(const Reader&, Output& out) {
  bool all = true;
  auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    *out.os << (ok ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
    all = all && ok;
  };

  double worst = 0.0;
  for (double omega : {0.5, 1.0, 2.0}) {
    const tc::PartitionSolver solver(tc::Potential(tc::Harmonic{omega}));
    for (double beta : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
      const double z = solver.z_semiclassical(beta).value;
      worst = std::max(worst, std::abs(z / tc::z_harmonic_closed_form(omega, beta) - 1.0));
    }
  }
  report("harmonic_exactness", worst <= 1e-6, fmt::format("max rel error {:.3g} (limit 1e-6)", worst));

  const tc::Potential quartic(tc::HarmonicPlusQuartic{1.0, 0.5});
  const tc::PathSolver paths(quartic, [] {
    tc::PathConfig c;
    c.include_wound = false;
    return c;
  }());
  double diff = 0.0;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const double x0 = 0.1 + 2.9 * i / 4.0, beta = 0.1 + 4.9 * j / 4.0;
      const double closed = tc::quartic_turning_point(quartic, x0, beta);
      const auto sols = paths.solve_turning_points(x0, beta);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& s : sols) best = std::min(best, std::abs(s.x_turn - closed));
      diff = std::max(diff, best);
    }
  }
  report("elliptic_cross_check", diff <= 1e-8, fmt::format("max |x_turn difference| {:.3g} (limit 1e-8)", diff));
  return all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiclassical partition functions from classical turning points"};
  std::string command, config_path;
  bool dump = false;
  app.add_option("command", command, "zsc | inventory | caustics | regions | oracle | compare | selftest")->required();
  app.add_option("config", config_path, "INI configuration file")->required();
  app.add_flag("--dump-config", dump, "print the effective configuration and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (!kCommands.count(command)) throw UsageError(fmt::format("unknown command '{}'", command));
    const Config config = effective(read_config(config_path), command);
    check_keys(config, command);
    if (dump) {
      dump_config(std::cout, config);
      return 0;
    }
    const Reader reader(config);
    Output out;
    open_output(reader, out);
    if (command == "zsc") return run_zsc(reader, out);
    if (command == "inventory") return run_inventory(reader, out);
    if (command == "caustics") return run_caustics(reader, out);
    if (command == "regions") return run_regions(reader, out);
    if (command == "oracle") return run_oracle(reader, out);
    if (command == "compare") return run_compare(reader, out);
    return run_selftest(reader, out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const tc::InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const tc::Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
}
