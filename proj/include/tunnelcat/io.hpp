#pragma once

// CSV / JSON serialization of the library's results. Every number is written
// with 9 significant digits so that identical inputs give identical bytes.

#include <cmath>
#include <cstdlib>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tunnelcat/catastrophe.hpp"
#include "tunnelcat/classical_paths.hpp"
#include "tunnelcat/oracle.hpp"
#include "tunnelcat/partition.hpp"

namespace tunnelcat::io {

using json = nlohmann::ordered_json;

inline std::string num(double v) { return fmt::format("{:.9g}", v); }

/// A JSON number rounded to 9 significant digits; null when not finite.
inline json jnum(double v) {
  if (!std::isfinite(v)) return nullptr;
  // strtod, unlike stod, returns subnormals instead of throwing on underflow.
  return std::strtod(num(v).c_str(), nullptr);
}

inline json to_json(const ClassicalPath& p) {
  json j;
  j["side"] = to_string(p.side);
  j["x_turn"] = jnum(p.x_turn);
  j["x_minus"] = jnum(p.x_minus);
  j["x_plus"] = jnum(p.x_plus);
  j["n"] = p.n_periods;
  j["turns"] = p.turns;
  j["E"] = jnum(p.energy);
  j["S"] = jnum(p.action);
  j["Delta"] = p.determinant ? jnum(*p.determinant) : json(nullptr);
  j["stability"] = to_string(p.stability.kind);
  j["index"] = p.stability.index;
  j["index_is_lower_bound"] = p.stability.lower_bound;
  if (p.failure) j["failure"] = *p.failure;
  return j;
}

inline json to_json(const PathInventory& inv) {
  json j;
  j["x0"] = jnum(inv.x0);
  j["beta"] = jnum(inv.beta);
  j["paths"] = json::array();
  for (const auto& p : inv.paths) j["paths"].push_back(to_json(p));
  j["p"] = inv.p;
  j["N"] = inv.N;
  j["warnings"] = inv.warnings;
  return j;
}

inline void write_inventory_csv(std::ostream& os, const PathInventory& inv) {
  os << "x0,beta,side,x_turn,x_minus,x_plus,n,E,S,Delta,stability,index\n";
  for (const auto& p : inv.paths) {
    os << num(inv.x0) << ',' << num(inv.beta) << ',' << to_string(p.side) << ',' << num(p.x_turn) << ','
       << num(p.x_minus) << ',' << num(p.x_plus) << ',' << p.n_periods << ',' << num(p.energy) << ','
       << num(p.action) << ',' << (p.determinant ? num(*p.determinant) : "nan") << ','
       << to_string(p.stability.kind) << ',' << p.stability.index << '\n';
  }
}

/// Rows ordered by beta, then x0. Missing cells are written as -1.
inline void write_region_csv(std::ostream& os, const RegionMap& m) {
  os << "x0,beta,p,N\n";
  for (std::size_t ib = 0; ib < m.beta_grid.size(); ++ib) {
    for (std::size_t ix = 0; ix < m.x0_grid.size(); ++ix) {
      os << num(m.x0_grid[ix]) << ',' << num(m.beta_grid[ib]) << ',' << m.counts[ib][ix] << ','
         << m.minima_counts[ib][ix] << '\n';
    }
  }
}

inline json to_json(const RegionMap& m) {
  json j;
  json grid_x = json::array(), grid_b = json::array();
  for (double x : m.x0_grid) grid_x.push_back(jnum(x));
  for (double b : m.beta_grid) grid_b.push_back(jnum(b));
  j["header"] = {{"x0_grid", grid_x}, {"beta_grid", grid_b}, {"layout", "[beta][x0]"}};
  j["p"] = m.counts;
  j["N"] = m.minima_counts;
  j["failures"] = m.failures;
  return j;
}

inline void write_caustic_csv(std::ostream& os, const CausticCurve& c) {
  os << "beta,x0_left,x0_right\n";
  for (const auto& s : c.samples) os << num(s.beta) << ',' << num(s.x0_left) << ',' << num(s.x0_right) << '\n';
}

inline json to_json(const CausticCurve& c) {
  json j;
  j["well"] = {{"x_m", jnum(c.well.x_m)},
               {"omega_m", jnum(c.well.omega_m)},
               {"left_edge", jnum(c.well.left_edge)},
               {"right_edge", jnum(c.well.right_edge)}};
  j["branch_index"] = c.branch_index;
  j["samples"] = json::array();
  for (const auto& s : c.samples) {
    j["samples"].push_back({{"beta", jnum(s.beta)}, {"x0_left", jnum(s.x0_left)}, {"x0_right", jnum(s.x0_right)}});
  }
  return j;
}

inline void write_spectrum_csv(std::ostream& os, const SpectrumResult& s) {
  os << "n,E_n,converged\n";
  for (std::size_t i = 0; i < s.energies.size(); ++i) {
    os << i << ',' << num(s.energies[i]) << ',' << (s.converged[i] ? 1 : 0) << '\n';
  }
}

inline json to_json(const SpectrumResult& s) {
  json j;
  j["grid"] = {{"x_min", jnum(s.grid.x_min)}, {"x_max", jnum(s.grid.x_max)}, {"n_points", s.grid.n_points}};
  json e = json::array();
  for (double v : s.energies) e.push_back(jnum(v));
  j["energies"] = e;
  j["converged"] = s.converged;
  j["n_converged"] = s.n_converged;
  return j;
}

inline void write_zsc_csv(std::ostream& os, const std::vector<ZscResult>& rows) {
  os << "beta,z_sc,error_estimate,n_singular_points\n";
  for (const auto& r : rows) {
    os << num(r.beta) << ',' << num(r.value) << ',' << num(r.error_estimate) << ',' << r.singular_points.size()
       << '\n';
  }
}

inline json to_json(const ZscResult& r) {
  json j;
  j["beta"] = jnum(r.beta);
  j["z_sc"] = jnum(r.value);
  j["error_estimate"] = jnum(r.error_estimate);
  j["cutoff"] = jnum(r.cutoff);
  json sp = json::array();
  for (double x : r.singular_points) sp.push_back(jnum(x));
  j["singular_points"] = sp;
  json pieces = json::array();
  for (const auto& p : r.breakdown) {
    pieces.push_back({{"lower", jnum(p.lower)}, {"upper", jnum(p.upper)}, {"value", jnum(p.value)},
                      {"error", jnum(p.error)}});
  }
  j["breakdown"] = pieces;
  return j;
}

struct CompareRow {
  double beta;
  double z_sc;
  double z_exact;
  double rel_error;
};

inline void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows) {
  os << "beta,z_sc,z_exact,rel_error\n";
  for (const auto& r : rows) {
    os << num(r.beta) << ',' << num(r.z_sc) << ',' << num(r.z_exact) << ',' << num(r.rel_error) << '\n';
  }
}

inline json to_json(const CompareRow& r) {
  return {{"beta", jnum(r.beta)}, {"z_sc", jnum(r.z_sc)}, {"z_exact", jnum(r.z_exact)}, {"rel_error", jnum(r.rel_error)}};
}

}  // namespace tunnelcat::io
