#pragma once

// Where closed paths are born and die in the (x0, beta) control plane.
//
// Inside a well of -V with top x_m, a starting point x0 != x_m sees a second
// single-turn branch on the far side of x_m (paths that cross the top). Its
// beta has a fold minimum beta_fold(x0) > pi / (hbar omega_m); below it the
// branch contributes nothing, above it two paths. The first caustic curve is
// beta_fold(x0) = beta.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "tunnelcat/classical_paths.hpp"
#include "tunnelcat/errors.hpp"
#include "tunnelcat/potential.hpp"
#include "tunnelcat/quadrature.hpp"

namespace tunnelcat {

/// beta = p pi / (hbar omega_m), p = 1..p_max.
inline std::vector<double> bifurcation_thresholds(const WellDescriptor& well, int p_max, const UnitSystem& units = {}) {
  if (p_max < 1) throw InvalidArgument("bifurcation_thresholds: p_max must be >= 1");
  std::vector<double> out;
  for (int p = 1; p <= p_max; ++p) out.push_back(p * std::numbers::pi / (units.hbar() * well.omega_m));
  return out;
}

/// Number of real extrema of s^4 + u s^2 + v s, i.e. real roots of 4s^3 + 2us + v:
/// 3 inside the cusp v^2 < -8u^3/27, 1 outside, 2 on the bifurcation set (within 1e-12).
inline int cusp_extrema_count(double u, double v) {
  if (!std::isfinite(u) || !std::isfinite(v)) throw InvalidArgument("cusp_extrema_count: non-finite control");
  const double lhs = v * v;
  const double rhs = -8.0 * u * u * u / 27.0;
  const double tol = 1e-12 * std::max(1.0, std::max(std::abs(lhs), std::abs(rhs)));
  if (std::abs(lhs - rhs) <= tol) return (u == 0.0 && v == 0.0) ? 1 : 2;
  return lhs < rhs ? 3 : 1;
}

struct CausticPoint {
  double beta;
  double x0_left;
  double x0_right;
};

struct CausticCurve {
  WellDescriptor well;
  std::vector<CausticPoint> samples;
  int branch_index = 1;
};

struct CausticConfig {
  int scan_points = 192;  ///< branch sampling used for fold detection
  int x0_grid = 32;       ///< coarse x0 grid per side before refinement
  RootConfig root{1e-13, 200};
};

namespace detail {

inline PathConfig fold_path_config(const PathConfig& base, const CausticConfig& cc) {
  PathConfig c = base;
  c.scan_points = cc.scan_points;
  c.include_wound = false;
  return c;
}

}  // namespace detail

/// Locates the first caustic family of one well.
class CausticTracer {
 public:
  CausticTracer(const PathSolver& solver, const WellDescriptor& well, CausticConfig cfg = {})
      : solver_(solver.potential(), detail::fold_path_config(solver.config(), cfg)), well_(well), cfg_(cfg) {
    if (!std::isfinite(well_.left_edge) || !std::isfinite(well_.right_edge)) {
      throw InvalidArgument("CausticTracer: the well must have finite edges");
    }
  }

  double threshold() const { return std::numbers::pi / (solver_.potential().hbar() * well_.omega_m); }

  /// Lowest beta of the far-side single-turn branch seen from x0 (the fold
  /// where a path pair appears), or +inf if that branch does not exist.
  double fold_beta(double x0) const {
    if (!well_.contains(x0) || x0 == well_.x_m) return threshold();
    const Side far = x0 > well_.x_m ? Side::left : Side::right;
    const auto a = solver_.atlas(x0, false);
    for (const auto& b : a.single_turn) {
      if (b.side != far || b.start == a.x0) continue;
      const bool beyond_top = far == Side::left ? b.start < well_.x_m : b.start > well_.x_m;
      if (!beyond_top) continue;
      double best = b.beta_start;
      for (const auto& e : b.extrema) {
        if (e.minimum) best = std::min(best, e.beta);
      }
      return best;
    }
    return std::numeric_limits<double>::infinity();
  }

  /// Frontier abscissa on one side of x_m, if the fold curve reaches beta there.
  std::optional<double> frontier(double beta, Side side) const {
    if (!(beta > threshold())) return std::nullopt;
    const double edge = side == Side::left ? well_.left_edge : well_.right_edge;
    const double span = edge - well_.x_m;
    auto g = [&](double x0) { return fold_beta(x0) - beta; };
    double prev = well_.x_m;
    for (int j = 1; j < cfg_.x0_grid; ++j) {
      const double f = static_cast<double>(j) / cfg_.x0_grid;
      const double x = well_.x_m + span * f * f;
      const double gx = g(x);
      if (gx >= 0.0) {
        if (!std::isfinite(gx)) {
          // Refine where the branch still exists before root finding.
          double lo = prev, hi = x;
          for (int k = 0; k < 60 && !std::isfinite(g(0.5 * (lo + hi))); ++k) hi = 0.5 * (lo + hi);
          return find_root_bracketed(g, lo, 0.5 * (lo + hi), cfg_.root);
        }
        if (prev == well_.x_m) {
          // Keep the bracket off x_m itself, where x0 is snapped to the top.
          // Just above threshold the frontier sits closer to x_m than any
          // fixed offset, so shrink until g changes sign.
          double hi = x, off = span * 1e-9;
          while (g(well_.x_m + off) >= 0.0) {
            hi = well_.x_m + off;
            off *= 0.1;
            if (std::abs(off) < 1e-15 * std::abs(span)) return hi;
          }
          return find_root_bracketed(g, well_.x_m + off, hi, cfg_.root);
        }
        return find_root_bracketed(g, prev, x, cfg_.root);
      }
      prev = x;
    }
    return std::nullopt;
  }

  std::optional<std::pair<double, double>> locus(double beta) const {
    const auto l = frontier(beta, Side::left);
    const auto r = frontier(beta, Side::right);
    if (!l || !r) return std::nullopt;
    return std::make_pair(*l, *r);
  }

  CausticCurve curve(double beta_lo, double beta_hi, int steps) const {
    if (!(beta_lo < beta_hi) || steps < 1) throw InvalidArgument("caustic curve: need beta_lo < beta_hi, steps >= 1");
    CausticCurve c;
    c.well = well_;
    for (int i = 0; i <= steps; ++i) {
      const double b = beta_lo + (beta_hi - beta_lo) * i / steps;
      if (auto l = locus(b)) c.samples.push_back({b, l->first, l->second});
    }
    return c;
  }

  const PathSolver& solver() const noexcept { return solver_; }

 private:
  PathSolver solver_;
  WellDescriptor well_;
  CausticConfig cfg_;
};

/// (x0_left, x0_right) of the first caustic family at beta, or none below
/// the first threshold.
inline std::optional<std::pair<double, double>> caustic_locus(const PathSolver& solver, const WellDescriptor& well,
                                                              double beta, const CausticConfig& cfg = {}) {
  return CausticTracer(solver, well, cfg).locus(beta);
}

// ---------------------------------------------------------------------------
// Region map.

struct RegionMap {
  std::vector<double> x0_grid;
  std::vector<double> beta_grid;
  // Indexed [beta][x0]. Missing cells hold -1.
  std::vector<std::vector<int>> counts;
  std::vector<std::vector<int>> minima_counts;
  std::vector<std::vector<bool>> boundary;
  std::vector<std::string> failures;

  int p(std::size_t ib, std::size_t ix) const { return counts[ib][ix]; }
};

inline std::vector<double> uniform_grid(double lo, double hi, int nodes) {
  std::vector<double> g(nodes);
  for (int i = 0; i < nodes; ++i) g[i] = i + 1 == nodes ? hi : lo + (hi - lo) * i / (nodes - 1);
  return g;
}

/// Counts p and N on a (resolution + 1)^2 node grid over the rectangle.
inline RegionMap region_map(const PathSolver& solver, std::pair<double, double> x0_range,
                            std::pair<double, double> beta_range, int resolution) {
  if (resolution < 16) throw InvalidArgument("region_map: resolution must be >= 16");
  if (!(x0_range.first < x0_range.second) || !(beta_range.first < beta_range.second) ||
      !std::isfinite(x0_range.first) || !std::isfinite(x0_range.second) || !(beta_range.first > 0.0) ||
      !std::isfinite(beta_range.second)) {
    throw InvalidArgument("region_map: ranges must be finite with min < max and beta > 0");
  }
  RegionMap m;
  m.x0_grid = uniform_grid(x0_range.first, x0_range.second, resolution + 1);
  m.beta_grid = uniform_grid(beta_range.first, beta_range.second, resolution + 1);
  const std::size_t nb = m.beta_grid.size(), nx = m.x0_grid.size();
  m.counts.assign(nb, std::vector<int>(nx, -1));
  m.minima_counts.assign(nb, std::vector<int>(nx, -1));
  m.boundary.assign(nb, std::vector<bool>(nx, false));
  for (std::size_t ix = 0; ix < nx; ++ix) {
    std::optional<PathAtlas> atlas;
    try {
      atlas = solver.atlas(m.x0_grid[ix], solver.config().include_wound);
    } catch (const Error& e) {
      m.failures.push_back(e.what());
      continue;
    }
    for (std::size_t ib = 0; ib < nb; ++ib) {
      try {
        const auto inv = solver.enumerate(*atlas, m.beta_grid[ib]);
        // A caustic exactly on a node leaves an even count: report the larger neighbour.
        m.counts[ib][ix] = inv.p % 2 == 0 ? inv.p + 1 : inv.p;
        m.minima_counts[ib][ix] = inv.N;
      } catch (const Error& e) {
        m.failures.push_back(e.what());
      }
    }
  }
  for (std::size_t ib = 0; ib < nb; ++ib) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const int c = m.counts[ib][ix];
      auto differs = [&](std::size_t jb, std::size_t jx) { return m.counts[jb][jx] != c; };
      m.boundary[ib][ix] = (ib > 0 && differs(ib - 1, ix)) || (ib + 1 < nb && differs(ib + 1, ix)) ||
                           (ix > 0 && differs(ib, ix - 1)) || (ix + 1 < nx && differs(ib, ix + 1));
    }
  }
  return m;
}

inline RegionMap region_map(const Potential& pot, std::pair<double, double> x0_range,
                            std::pair<double, double> beta_range, int resolution, const PathConfig& cfg = {}) {
  return region_map(PathSolver(pot, cfg), x0_range, beta_range, resolution);
}

}  // namespace tunnelcat
