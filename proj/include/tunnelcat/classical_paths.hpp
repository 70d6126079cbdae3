#pragma once

// Closed Euclidean trajectories x(0) = x(beta*hbar) = x0 described through
// their turning points only. A trajectory with conserved level E = V(x_turn)
// moves where V(x) >= E; one-way flight times and actions between x0 and a
// turning point are ordinary integrals with an inverse-square-root end.
//
// Two families of branches are scanned for a given x0:
//   * single-turn paths (n = 0): parameterized by the turning point itself,
//     which must be a running record low of V walking away from x0;
//   * wound paths inside a well of -V (n >= 1 periods, optionally with one
//     extra bounce), parameterized by the right turning point x+.
// On every branch beta(s) is sampled, its extrema refined, and each monotone
// piece searched for the requested beta.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "tunnelcat/errors.hpp"
#include "tunnelcat/potential.hpp"
#include "tunnelcat/quadrature.hpp"

namespace tunnelcat {

enum class Side { left, right, still };

inline const char* to_string(Side s) {
  switch (s) {
    case Side::left: return "left";
    case Side::right: return "right";
    case Side::still: return "still";
  }
  return "?";
}

enum class StabilityKind { minimum, one_saddle, multi_saddle, marginal };

inline const char* to_string(StabilityKind k) {
  switch (k) {
    case StabilityKind::minimum: return "minimum";
    case StabilityKind::one_saddle: return "one_saddle";
    case StabilityKind::multi_saddle: return "multi_saddle";
    case StabilityKind::marginal: return "marginal";
  }
  return "?";
}

/// Morse index of a stationary path. For wound paths only a lower bound is
/// known (node counting), flagged by `lower_bound`.
struct Stability {
  StabilityKind kind = StabilityKind::marginal;
  int index = 0;
  bool lower_bound = false;

  bool operator==(const Stability&) const = default;
};

inline Stability stability_from_index(int index, bool lower_bound) {
  const auto kind = index == 0   ? StabilityKind::minimum
                    : index == 1 ? StabilityKind::one_saddle
                                 : StabilityKind::multi_saddle;
  return {kind, index, lower_bound};
}

/// One solution of the closed-path time condition.
struct TurningPointSolution {
  Side side = Side::still;  ///< initial direction of motion
  double x_turn = 0.0;      ///< turning point on `side` (x0 for still paths)
  double x_minus = std::numeric_limits<double>::quiet_NaN();
  double x_plus = std::numeric_limits<double>::quiet_NaN();
  int n_periods = 0;
  int turns = 0;  ///< interior zeros of the velocity
  double energy = 0.0;
  /// Admissible interval of x_turn on this branch (start, end); single-turn only.
  double branch_start = std::numeric_limits<double>::quiet_NaN();
  double branch_end = std::numeric_limits<double>::quiet_NaN();

  bool single_turn() const { return turns == 1; }
  bool still() const { return side == Side::still; }
};

struct ClassicalPath : TurningPointSolution {
  double x0 = 0.0;
  double beta = 0.0;
  double action = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> determinant;
  Stability stability;
  std::optional<std::string> failure;
};

struct PathInventory {
  double x0 = 0.0;
  double beta = 0.0;
  std::vector<ClassicalPath> paths;
  int p = 0;
  int N = 0;
  std::vector<std::string> warnings;
};

struct PathConfig {
  QuadratureConfig quad{1e-11, 1e-15, 200};
  int scan_points = 2048;
  int end_grading = 40;           ///< geometric refinement levels at both ends of each branch
  double snap_tolerance = 1e-10;  ///< x0 this close (relative) to a critical point is put on it
  double marginal_tolerance = 1e-10;
  int n_max_extra = 1;
  bool include_wound = true;
};

// ---------------------------------------------------------------------------
// Leg integrals.

enum class LegKernel { time, action };

/// Panel partitions of the two halves of a leg integral.
struct LegPartition {
  std::vector<double> near_turn;
  std::vector<double> near_start;
};

namespace detail {

inline double leg_integrand(LegKernel kernel, double mass, double gap) {
  gap = std::abs(gap);
  if (kernel == LegKernel::time) return 1.0 / std::sqrt(2.0 * gap / mass);
  return std::sqrt(2.0 * mass * gap);
}

template <class Run>
double leg_halves(double from, double tp, Run&& run) {
  const double mid = 0.5 * (from + tp);
  double total = 0.0;
  // Halves shorter than one ulp are empty.
  if (tp != mid) total += run(true, std::min(tp, mid), std::max(tp, mid), tp < mid ? SingularEnd::lower : SingularEnd::upper);
  if (from != mid) {
    total += run(false, std::min(from, mid), std::max(from, mid), from < mid ? SingularEnd::lower : SingularEnd::upper);
  }
  return total;
}

}  // namespace detail

/// One-way integral between `from` and the turning point `tp` of
/// dx / v(x, tp) (kernel time) or M v(x, tp) dx (kernel action), with
/// v(x, y)^2 = (2/M) [V(x) - V(y)]. Requires V(x) > V(tp) strictly between.
inline double leg_integral(const Potential& pot, double from, double tp, LegKernel kernel,
                           const QuadratureConfig& cfg, LegPartition* record = nullptr, bool* converged = nullptr) {
  const double mass = pot.mass();
  const double span = from - tp;
  bool ok = true;
  const double total = detail::leg_halves(from, tp, [&](bool near_turn, double lo, double hi, SingularEnd end) {
    QuadratureResult r;
    if (near_turn) {
      auto f = [&](double, double d) { return detail::leg_integrand(kernel, mass, d * pot.secant_offset(tp, d)); };
      r = integrate_endpoint_power(f, lo, hi, end, 2, cfg);
    } else {
      auto f = [&](double, double e) {
        return detail::leg_integrand(kernel, mass, (span + e) * pot.secant_offset(tp, span + e));
      };
      r = integrate_endpoint_power(f, lo, hi, end, 2, cfg);
    }
    ok = ok && r.converged;
    if (record) (near_turn ? record->near_turn : record->near_start) = r.partition;
    return r.value;
  });
  if (converged) *converged = ok;
  return total;
}

/// Same integral evaluated on frozen panel partitions (smooth in from, tp).
inline double leg_integral_frozen(const Potential& pot, double from, double tp, LegKernel kernel,
                                  const LegPartition& parts) {
  const double mass = pot.mass();
  const double span = from - tp;
  return detail::leg_halves(from, tp, [&](bool near_turn, double lo, double hi, SingularEnd end) {
    if (near_turn) {
      auto f = [&](double, double d) { return detail::leg_integrand(kernel, mass, d * pot.secant_offset(tp, d)); };
      return integrate_endpoint_power_on_partition(f, lo, hi, end, 2, parts.near_turn);
    }
    auto f = [&](double, double e) {
        return detail::leg_integrand(kernel, mass, (span + e) * pot.secant_offset(tp, span + e));
      };
    return integrate_endpoint_power_on_partition(f, lo, hi, end, 2, parts.near_start);
  });
}

/// Inverse temperature of the single-turn closed path from x0 bouncing at
/// x_turn: beta*hbar = 2 * integral of dx / v(x, x_turn).
inline double time_of_flight(const Potential& pot, double x0, double x_turn, const QuadratureConfig& cfg = {}) {
  if (x0 == x_turn) return 0.0;
  const auto s = pot.eval(x_turn);
  const double scale = std::max({1.0, std::abs(pot.curvature(x0)), std::abs(s.V2)}) * std::abs(x0 - x_turn);
  if (std::abs(s.V1) <= 1e-12 * scale) {
    throw SingularTurningPoint("time_of_flight: V'(x_turn) vanishes, the flight time diverges");
  }
  constexpr int probes = 100;
  for (int i = 1; i < probes; ++i) {
    const double x = x_turn + (x0 - x_turn) * i / probes;
    if (!(pot.difference(x, x_turn) > 0.0)) {
      throw InvalidBracket("time_of_flight: V(x) - V(x_turn) must be > 0 between x0 and x_turn");
    }
  }
  bool ok = true;
  const double t = leg_integral(pot, x0, x_turn, LegKernel::time, cfg, nullptr, &ok);
  if (!ok) throw ToleranceNotReached("time_of_flight: quadrature did not converge", 2.0 * t / pot.hbar(), 0.0);
  return 2.0 * t / pot.hbar();
}

namespace detail {

// Turning points of level E = V(x_plus) on both sides of the well top.
inline double mirror_turning_point(const Potential& pot, const WellDescriptor& well, double x_plus) {
  if (x_plus == well.x_m) return well.x_m;
  auto q = [&](double x) { return pot.secant(x, x_plus); };
  return find_root_bracketed(q, well.left_edge, well.x_m, RootConfig{1e-15, 300});
}

inline double point_at_level_right(const Potential& pot, const WellDescriptor& well, double ref) {
  // x in (x_m, right_edge) with V(x) = V(ref), ref outside that interval.
  auto q = [&](double x) { return pot.secant(x, ref); };
  return find_root_bracketed(q, well.x_m, well.right_edge, RootConfig{1e-15, 300});
}

}  // namespace detail

/// Full period of the bounded oscillation at level E inside `well`.
inline double period(const Potential& pot, const WellDescriptor& well, double energy, const QuadratureConfig& cfg = {}) {
  if (!(energy < well.v_top)) return 2.0 * std::numbers::pi / well.omega_m / pot.hbar();
  auto level = [&](double x) { return pot.value(x) - energy; };
  const double xp = find_root_bracketed(level, well.x_m, well.right_edge);
  const double xm = detail::mirror_turning_point(pot, well, xp);
  return 2.0 * (leg_integral(pot, well.x_m, xm, LegKernel::time, cfg) +
                leg_integral(pot, well.x_m, xp, LegKernel::time, cfg)) /
         pot.hbar();
}

/// beta for a path from x0 in `well` at level E: n full periods plus one
/// extra bounce off the turning point on `side`.
inline double time_of_flight_periodic(const Potential& pot, const WellDescriptor& well, double x0, double energy,
                                      int n_periods, Side side, const QuadratureConfig& cfg = {}) {
  if (n_periods < 0) throw InvalidArgument("time_of_flight_periodic: n_periods must be >= 0");
  if (side == Side::still) throw InvalidArgument("time_of_flight_periodic: side must be left or right");
  if (!(energy <= pot.value(x0))) throw InvalidBracket("time_of_flight_periodic: level above V(x0)");
  auto level = [&](double x) { return pot.value(x) - energy; };
  const double xp = find_root_bracketed(level, well.x_m, well.right_edge);
  const double xm = detail::mirror_turning_point(pot, well, xp);
  const double tl = leg_integral(pot, x0, xm, LegKernel::time, cfg);
  const double tr = leg_integral(pot, x0, xp, LegKernel::time, cfg);
  return (2.0 * n_periods * (tl + tr) + 2.0 * (side == Side::left ? tl : tr)) / pot.hbar();
}

// ---------------------------------------------------------------------------
// Branches.

struct BranchExtremum {
  double w;
  double beta;
  bool minimum;
};

/// A one-parameter family of closed paths. The parameter is w, the distance
/// of the turning point from the branch end (where beta diverges), running
/// from w = length at the branch start to w = 0 at the end.
struct Branch {
  enum class Kind { single_turn, wound };

  Kind kind = Kind::single_turn;
  Side side = Side::left;
  int n_periods = 0;
  bool extra_bounce = true;
  double start = 0.0;
  double end = 0.0;
  double beta_start = 0.0;      ///< value (or limit) of beta at the start; may be +inf
  bool start_is_limit = false;  ///< beta_start is analytic, not evaluable through beta_at
  std::vector<double> w;        ///< samples, start -> end (decreasing)
  std::vector<double> beta;
  std::vector<BranchExtremum> extrema;
  std::function<double(double)> beta_at;  ///< beta as a function of w in (0, length)

  double length() const { return std::abs(end - start); }
  double position(double wv) const { return end + (start > end ? wv : -wv); }
  double eval(double wv) const {
    if (wv >= length()) return beta_start;
    if (wv <= 0.0) return std::numeric_limits<double>::infinity();
    return beta_at(wv);
  }
};

namespace detail {

inline std::vector<double> branch_grid(double length, int uniform, int grading) {
  std::vector<double> w;
  w.reserve(uniform + 2 * grading);
  for (int i = 1; i <= uniform; ++i) w.push_back(length * (1.0 - static_cast<double>(i) / (uniform + 1)));
  double f = 0.5;
  for (int k = 1; k <= grading; ++k, f *= 0.5) {
    w.push_back(length * f);
    w.push_back(length - length * f);
  }
  std::sort(w.begin(), w.end(), std::greater<>());
  w.erase(std::unique(w.begin(), w.end()), w.end());
  w.erase(std::remove_if(w.begin(), w.end(), [length](double v) { return !(v > 0.0 && v < length); }), w.end());
  return w;
}

// Local extrema of beta along the samples (start value, samples, +inf at the
// end), each refined by Brent minimization between its neighbours.
inline void find_extrema(Branch& b) {
  b.extrema.clear();
  const std::size_t n = b.w.size();
  auto value = [&](std::ptrdiff_t i) {
    if (i < 0) return b.beta_start;
    if (i >= static_cast<std::ptrdiff_t>(n)) return std::numeric_limits<double>::infinity();
    return b.beta[i];
  };
  auto wpos = [&](std::ptrdiff_t i) {
    if (i < 0) return b.length();
    if (i >= static_cast<std::ptrdiff_t>(n)) return 0.0;
    return b.w[i];
  };
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const double dl = value(i) - value(i - 1);
    const double dr = value(i + 1) - value(i);
    if (!std::isfinite(dl) && !std::isfinite(dr)) continue;
    const bool is_min = dl < 0.0 && dr > 0.0;
    const bool is_max = dl > 0.0 && dr < 0.0;
    if (!is_min && !is_max) continue;
    const double hi = wpos(i - 1);
    const double lo = wpos(i + 1);
    const double sign = is_min ? 1.0 : -1.0;
    auto obj = [&](double wv) {
      if (wv <= 0.0 || wv >= b.length()) return std::numeric_limits<double>::infinity();
      return sign * b.beta_at(wv);
    };
    const auto [wbest, fbest] = boost::math::tools::brent_find_minima(obj, lo, hi, 40);
    double wb = wbest, vb = sign * fbest;
    if (sign * value(i) < fbest) {
      wb = b.w[i];
      vb = value(i);
    }
    b.extrema.push_back({wb, vb, is_min});
  }
}

inline void sample_branch(Branch& b, int uniform, int grading) {
  b.w = branch_grid(b.length(), uniform, grading);
  b.beta.resize(b.w.size());
  for (std::size_t i = 0; i < b.w.size(); ++i) b.beta[i] = b.beta_at(b.w[i]);
  find_extrema(b);
}

// Roots of beta(w) = target on a branch, one per monotone piece.
inline std::vector<double> branch_roots(const Branch& b, double target, std::vector<std::string>* warnings) {
  struct Node {
    double w;
    double beta;
  };
  std::vector<Node> nodes;
  nodes.reserve(b.w.size() + b.extrema.size() + 2);
  nodes.push_back({b.length(), b.beta_start});
  for (std::size_t i = 0; i < b.w.size(); ++i) nodes.push_back({b.w[i], b.beta[i]});
  for (const auto& e : b.extrema) nodes.push_back({e.w, e.beta});
  nodes.push_back({0.0, std::numeric_limits<double>::infinity()});
  std::sort(nodes.begin(), nodes.end(), [](const Node& l, const Node& r) { return l.w > r.w; });

  // Piece boundaries are the refined extrema; within a piece beta is monotone.
  std::vector<double> cuts{b.length()};
  for (const auto& e : b.extrema) cuts.push_back(e.w);
  cuts.push_back(0.0);
  std::sort(cuts.begin(), cuts.end(), std::greater<>());

  auto f = [&](double wv) { return b.eval(wv) - target; };
  const RootConfig rc{4e-16, 400, true};

  std::vector<double> roots;
  std::size_t k = 0;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double whi = cuts[c], wlo = cuts[c + 1];
    while (k < nodes.size() && nodes[k].w > whi) ++k;
    for (std::size_t j = k; j + 1 < nodes.size() && nodes[j + 1].w >= wlo; ++j) {
      const double va = nodes[j].beta - target;
      const double vb = nodes[j + 1].beta - target;
      if (va == 0.0) {
        if (nodes[j].w > 0.0 && nodes[j].w < b.length()) roots.push_back(nodes[j].w);
        continue;
      }
      if (!((va < 0.0) != (vb < 0.0) || vb == 0.0)) continue;
      if (!std::isfinite(vb)) {
        if (warnings) {
          warnings->push_back("beta beyond the resolvable range of a branch near its divergent end");
        }
        continue;
      }
      if (vb == 0.0) continue;  // picked up as va == 0 on the next cell
      try {
        roots.push_back(find_root_bracketed(f, nodes[j + 1].w, nodes[j].w, rc));
      } catch (const NoSignChange&) {
        if (warnings) warnings->push_back("a root bracket of a branch collapsed under re-evaluation");
      }
    }
  }
  std::sort(roots.begin(), roots.end(), std::greater<>());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [&](double l, double r) { return std::abs(l - r) <= 1e-12 * b.length(); }),
              roots.end());
  return roots;
}

}  // namespace detail

/// Everything about x0 that does not depend on beta: the sampled branches.
struct PathAtlas {
  double x0 = 0.0;
  const WellDescriptor* well = nullptr;  ///< well of -V containing x0, if any
  std::optional<CriticalPoint> at_critical;  ///< x0 sits on a critical point of V
  std::vector<Branch> single_turn;
  // Wound sampling: for each w sample, the legs from x0 to both turning points.
  double wound_start = 0.0;
  double wound_end = 0.0;
  bool wound_start_at_top = false;
  std::vector<double> wound_w;
  std::vector<double> wound_tl;
  std::vector<double> wound_tr;
  bool has_wound = false;
  /// Wound branches by (n, variant), built on first use. Not thread safe.
  mutable std::map<std::pair<int, int>, Branch> wound_cache;
};

class PathSolver {
 public:
  explicit PathSolver(Potential pot, PathConfig cfg = {})
      : pot_(std::move(pot)), cfg_(cfg), land_(analyze(pot_)) {
    cfg_.quad.validate();
    if (cfg_.scan_points < 16) throw InvalidArgument("PathConfig: scan_points must be >= 16");
  }

  const Potential& potential() const noexcept { return pot_; }
  const PathConfig& config() const noexcept { return cfg_; }
  const Landscape& landscape() const noexcept { return land_; }

  /// x0 moved onto a critical point of V when within snap tolerance.
  double snapped(double x0) const {
    for (const auto& c : land_.points) {
      if (std::abs(x0 - c.x) <= cfg_.snap_tolerance * std::max(1.0, std::abs(c.x))) return c.x;
    }
    return x0;
  }

  PathAtlas atlas(double x0, bool include_wound) const {
    if (!std::isfinite(x0)) throw InvalidArgument("x0 must be finite");
    PathAtlas a;
    a.x0 = snapped(x0);
    for (const auto& c : land_.points) {
      if (c.x == a.x0) a.at_critical = c;
    }
    a.well = land_.well_containing(a.x0);
    for (Side side : {Side::left, Side::right}) add_single_turn(a, side);
    if (include_wound && a.well && std::isfinite(a.well->left_edge) && std::isfinite(a.well->right_edge)) {
      add_wound(a);
    }
    return a;
  }

  /// Every closed path from x0 of duration beta*hbar: single-turn paths on
  /// both sides, the still path when x0 is a critical point of V, and wound
  /// paths with up to n_max = ceil(beta hbar omega_m / 2 pi) + 1 periods.
  std::vector<TurningPointSolution> solve_turning_points(double x0, double beta) const {
    return solve(atlas(x0, cfg_.include_wound), beta, nullptr);
  }

  std::vector<TurningPointSolution> solve(const PathAtlas& a, double beta, std::vector<std::string>* warnings) const {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be finite and > 0");
    std::vector<TurningPointSolution> out;
    const double x0 = a.x0;
    if (a.at_critical) {
      TurningPointSolution s;
      s.side = Side::still;
      s.x_turn = x0;
      s.energy = a.at_critical->V;
      out.push_back(s);
    }
    for (const auto& b : a.single_turn) {
      for (double wv : detail::branch_roots(b, beta, warnings)) {
        TurningPointSolution s;
        s.side = b.side;
        s.x_turn = b.position(wv);
        (b.side == Side::left ? s.x_minus : s.x_plus) = s.x_turn;
        s.n_periods = 0;
        s.turns = 1;
        s.energy = pot_.value(s.x_turn);
        s.branch_start = b.start;
        s.branch_end = b.end;
        out.push_back(s);
      }
    }
    if (a.has_wound) {
      const auto& well = *a.well;
      const int n_max = static_cast<int>(std::ceil(beta * pot_.hbar() * well.omega_m / (2.0 * std::numbers::pi))) +
                        cfg_.n_max_extra;
      for (int n = 1; n <= n_max; ++n) {
        for (int variant = 0; variant < 3; ++variant) {
          const bool extra = variant > 0;
          const Side side = variant == 2 ? Side::right : Side::left;
          const Branch& b = wound_branch(a, n, extra, side);
          for (double wv : detail::branch_roots(b, beta, warnings)) {
            const double xp = b.position(wv);
            TurningPointSolution s;
            s.x_plus = xp;
            s.x_minus = detail::mirror_turning_point(pot_, well, xp);
            s.n_periods = n;
            s.energy = pot_.value(xp);
            if (extra) {
              s.side = side;
              s.turns = 2 * n + 1;
              s.x_turn = side == Side::left ? s.x_minus : s.x_plus;
              out.push_back(s);
            } else {
              // Periodic: the two directions of travel are distinct paths.
              s.turns = 2 * n;
              for (Side d : {Side::left, Side::right}) {
                s.side = d;
                s.x_turn = d == Side::left ? s.x_minus : s.x_plus;
                out.push_back(s);
              }
            }
          }
        }
      }
    }
    return out;
  }

  ClassicalPath make_path(double x0, double beta, const TurningPointSolution& s) const {
    ClassicalPath p;
    static_cast<TurningPointSolution&>(p) = s;
    p.x0 = snapped(x0);
    p.beta = beta;
    return p;
  }

  /// Euclidean action: beta*hbar*E + M * integral of v |dx| along the path.
  double action(const ClassicalPath& p) const {
    const double hb = pot_.hbar();
    if (p.still()) return p.beta * hb * pot_.value(p.x0);
    const auto& q = cfg_.quad;
    if (p.single_turn()) {
      return p.beta * hb * p.energy + 2.0 * leg_integral(pot_, p.x0, p.x_turn, LegKernel::action, q);
    }
    const double al = leg_integral(pot_, p.x0, p.x_minus, LegKernel::action, q);
    const double ar = leg_integral(pot_, p.x0, p.x_plus, LegKernel::action, q);
    double s = p.beta * hb * p.energy + 2.0 * p.n_periods * (al + ar);
    if (p.turns % 2 == 1) s += 2.0 * (p.side == Side::left ? al : ar);
    return s;
  }

  /// Fluctuation determinant. Still paths: closed form (sin at a maximum of
  /// V, sinh at a minimum). Single-turn paths:
  ///   4 pi hbar^2 [V(xt) - V(x0)] / (M V'(xt)) * d beta / d xt  at fixed x0.
  double fluctuation_determinant(const ClassicalPath& p) const {
    const double hb = pot_.hbar();
    const double m = pot_.mass();
    if (p.still()) {
      const double v2 = pot_.curvature(p.x0);
      const double w = std::sqrt(std::abs(v2) / m);
      const double arg = p.beta * hb * w;
      return 2.0 * std::numbers::pi * hb * (v2 < 0.0 ? std::sin(arg) : std::sinh(arg)) / (m * w);
    }
    if (!p.single_turn()) {
      throw Unavailable("fluctuation_determinant: not available for paths with two turning points");
    }
    const auto st = pot_.eval(p.x_turn);
    const double xt = p.x_turn;
    const double scale_v = std::max(std::abs(pot_.curvature(p.x0)), std::abs(st.V2)) * std::abs(xt - p.x0);
    if (std::abs(st.V1) <= 1e-12 * std::max(1.0, scale_v)) {
      throw SingularTurningPoint("fluctuation_determinant: V'(x_turn) vanishes");
    }
    double start = p.branch_start, end = p.branch_end;
    if (!std::isfinite(start) || !std::isfinite(end)) {
      const auto iv = turn_interval(p.x0, xt);
      start = iv.first;
      end = iv.second;
    }
    double room = std::min(std::abs(xt - start), std::abs(end - xt));
    if (start != p.x0) room = std::min(room, std::abs(xt - p.x0));
    LegPartition parts;
    leg_integral(pot_, p.x0, xt, LegKernel::time, cfg_.quad, &parts);
    auto beta_of = [&](double x) { return 2.0 * leg_integral_frozen(pot_, p.x0, x, LegKernel::time, parts) / hb; };
    // Step a small fraction of the distance to the nearest singularity of beta.
    const double dbeta = derivative_central(beta_of, xt, 1e3 * room / std::max(1.0, std::abs(xt)));
    return 4.0 * std::numbers::pi * hb * hb * pot_.difference(xt, p.x0) / (m * st.V1) * dbeta;
  }

  /// Natural size of a determinant at x0: 2 pi hbar / (M omega_m) inside a
  /// well, the free-particle value 2 pi beta hbar^2 / M elsewhere.
  double determinant_scale(double x0, double beta) const {
    const auto* w = land_.well_containing(x0);
    const double hb = pot_.hbar();
    if (w) return 2.0 * std::numbers::pi * hb / (pot_.mass() * w->omega_m);
    return 2.0 * std::numbers::pi * beta * hb * hb / pot_.mass();
  }

  Stability classify_stability(const ClassicalPath& p, std::optional<double> delta) const {
    const double tol = cfg_.marginal_tolerance * determinant_scale(p.x0, p.beta);
    if (p.still()) {
      const double v2 = pot_.curvature(p.x0);
      if (v2 > 0.0) return stability_from_index(0, false);
      if (delta && std::abs(*delta) < tol) return {StabilityKind::marginal, 0, false};
      const double w = std::sqrt(-v2 / pot_.mass());
      const int index = static_cast<int>(std::floor(p.beta * pot_.hbar() * w / std::numbers::pi));
      return stability_from_index(index, false);
    }
    if (p.single_turn()) {
      if (!delta || std::abs(*delta) < tol) return {StabilityKind::marginal, 0, false};
      return stability_from_index(*delta > 0.0 ? 0 : 1, false);
    }
    // k interior zeros of xdot: Sturm separation gives at least k - 1
    // conjugate points, hence at least k - 1 negative modes.
    return stability_from_index(std::max(1, p.turns - 1), true);
  }

  PathInventory enumerate(double x0, double beta) const { return enumerate(atlas(x0, cfg_.include_wound), beta); }

  PathInventory enumerate(const PathAtlas& a, double beta) const {
    PathInventory inv;
    inv.x0 = a.x0;
    inv.beta = beta;
    for (const auto& s : solve(a, beta, &inv.warnings)) inv.paths.push_back(complete(a.x0, beta, s));
    finish(inv);
    return inv;
  }

  /// Only the candidates for minima (still and single-turn paths), completed.
  PathInventory minima(double x0, double beta) const {
    PathInventory inv;
    const PathAtlas a = atlas(x0, false);
    inv.x0 = a.x0;
    inv.beta = beta;
    for (const auto& s : solve(a, beta, &inv.warnings)) {
      ClassicalPath p = complete(a.x0, beta, s);
      if (p.stability.kind == StabilityKind::minimum || p.stability.kind == StabilityKind::marginal) {
        inv.paths.push_back(std::move(p));
      }
    }
    finish(inv);
    return inv;
  }

  ClassicalPath complete(double x0, double beta, const TurningPointSolution& s) const {
    ClassicalPath p = make_path(x0, beta, s);
    try {
      p.action = action(p);
      if (p.still() || p.single_turn()) p.determinant = fluctuation_determinant(p);
      p.stability = classify_stability(p, p.determinant);
    } catch (const Error& e) {
      p.failure = e.what();
      p.stability = {StabilityKind::marginal, 0, false};
    }
    return p;
  }

  /// Record-low interval (start, end) of the turning point for a single-turn
  /// path from x0 through x_turn.
  std::pair<double, double> turn_interval(double x0, double x_turn) const {
    const Side side = x_turn < x0 ? Side::left : Side::right;
    for (const auto& iv : record_low_intervals(snapped(x0), side)) {
      const double lo = std::min(iv.start, iv.end), hi = std::max(iv.start, iv.end);
      if (x_turn >= lo && x_turn <= hi) return {iv.start, iv.end};
    }
    throw InvalidBracket("turn_interval: x_turn is not an admissible turning point for x0");
  }

  struct TurnInterval {
    double start;
    double end;
    double beta_start;
    bool start_is_limit;
  };

  /// Walking from x0 towards `side`, the turning points are the running
  /// record lows of V; they form intervals ending at local minima of V.
  std::vector<TurnInterval> record_low_intervals(double x0, Side side) const {
    std::vector<TurnInterval> out;
    const double dir = side == Side::left ? -1.0 : 1.0;
    std::vector<const CriticalPoint*> ahead;
    for (const auto& c : land_.points) {
      if ((c.x - x0) * dir > 0.0) ahead.push_back(&c);
    }
    if (dir < 0.0) std::reverse(ahead.begin(), ahead.end());

    const double inf = std::numeric_limits<double>::infinity();
    double record_pos = x0;
    double record = pot_.value(x0);
    bool record_is_x0 = true;
    double piece_start = x0;
    for (const CriticalPoint* c : ahead) {
      const double piece_end = c->x;
      const bool decreasing = c->kind == CriticalKind::minimum;
      if (decreasing && c->V < record) {
        TurnInterval iv{};
        iv.end = piece_end;
        if (piece_start == x0 && record_is_x0) {
          iv.start = x0;
          const auto* here = at_critical_point(x0);
          if (here && here->kind == CriticalKind::maximum) {
            iv.beta_start = std::numbers::pi / (std::sqrt(-here->V2 / pot_.mass()) * pot_.hbar());
          } else {
            iv.beta_start = 0.0;
          }
          iv.start_is_limit = true;
        } else {
          auto q = [&](double x) { return pot_.secant(x, record_pos); };
          iv.start = find_root_bracketed(q, std::min(piece_start, piece_end), std::max(piece_start, piece_end),
                                         RootConfig{1e-15, 300});
          if (record_is_x0) {
            iv.beta_start = time_of_flight_unchecked(x0, iv.start);
            iv.start_is_limit = false;
          } else {
            // The path would graze a minimum of V: the flight time diverges.
            iv.beta_start = inf;
            iv.start_is_limit = true;
          }
        }
        out.push_back(iv);
        record = c->V;
        record_pos = c->x;
        record_is_x0 = false;
      }
      piece_start = piece_end;
    }
    return out;
  }

 private:
  static void finish(PathInventory& inv) {
    std::stable_sort(inv.paths.begin(), inv.paths.end(), [](const ClassicalPath& l, const ClassicalPath& r) {
      if (std::isnan(l.action) || std::isnan(r.action)) return !std::isnan(l.action) && std::isnan(r.action);
      return l.action < r.action;
    });
    inv.p = static_cast<int>(inv.paths.size());
    inv.N = static_cast<int>(std::count_if(inv.paths.begin(), inv.paths.end(), [](const ClassicalPath& p) {
      return p.stability.kind == StabilityKind::minimum;
    }));
    for (const auto& p : inv.paths) {
      if (p.failure) inv.warnings.push_back(*p.failure);
    }
  }

  const CriticalPoint* at_critical_point(double x) const {
    for (const auto& c : land_.points) {
      if (c.x == x) return &c;
    }
    return nullptr;
  }

  double time_of_flight_unchecked(double x0, double xt) const {
    return 2.0 * leg_integral(pot_, x0, xt, LegKernel::time, cfg_.quad) / pot_.hbar();
  }

  void add_single_turn(PathAtlas& a, Side side) const {
    for (const auto& iv : record_low_intervals(a.x0, side)) {
      Branch b;
      b.kind = Branch::Kind::single_turn;
      b.side = side;
      b.start = iv.start;
      b.end = iv.end;
      b.beta_start = iv.beta_start;
      b.start_is_limit = iv.start_is_limit;
      const double x0 = a.x0;
      const double start = b.start, end = b.end;
      b.beta_at = [this, x0, start, end](double wv) {
        const double xt = end + (start > end ? wv : -wv);
        return time_of_flight_unchecked(x0, xt);
      };
      detail::sample_branch(b, cfg_.scan_points, cfg_.end_grading);
      a.single_turn.push_back(std::move(b));
    }
  }

  void add_wound(PathAtlas& a) const {
    const auto& well = *a.well;
    const double x0 = a.x0;
    double start;
    if (x0 >= well.x_m) {
      start = x0;
    } else {
      start = detail::point_at_level_right(pot_, well, x0);
    }
    const double vl = pot_.value(well.left_edge), vr = pot_.value(well.right_edge);
    const double end = vr >= vl ? well.right_edge : detail::point_at_level_right(pot_, well, well.left_edge);
    if (!(end > start)) return;
    a.has_wound = true;
    a.wound_start = start;
    a.wound_end = end;
    a.wound_start_at_top = x0 == well.x_m;
    a.wound_w = detail::branch_grid(end - start, cfg_.scan_points, cfg_.end_grading);
    a.wound_tl.resize(a.wound_w.size());
    a.wound_tr.resize(a.wound_w.size());
    for (std::size_t i = 0; i < a.wound_w.size(); ++i) {
      const auto [tl, tr] = wound_legs(x0, well, end - a.wound_w[i]);
      a.wound_tl[i] = tl;
      a.wound_tr[i] = tr;
    }
  }

  std::pair<double, double> wound_legs(double x0, const WellDescriptor& well, double xp) const {
    const double xm = detail::mirror_turning_point(pot_, well, xp);
    return {leg_integral(pot_, x0, xm, LegKernel::time, cfg_.quad),
            leg_integral(pot_, x0, xp, LegKernel::time, cfg_.quad)};
  }

  const Branch& wound_branch(const PathAtlas& a, int n, bool extra, Side side) const {
    const int variant = extra ? (side == Side::left ? 1 : 2) : 0;
    const auto key = std::make_pair(n, variant);
    auto it = a.wound_cache.find(key);
    if (it != a.wound_cache.end()) return it->second;
    Branch b;
    b.kind = Branch::Kind::wound;
    b.side = side;
    b.n_periods = n;
    b.extra_bounce = extra;
    b.start = a.wound_start;
    b.end = a.wound_end;
    const double hb = pot_.hbar();
    auto combine = [n, extra, side, hb](double tl, double tr) {
      return (2.0 * n * (tl + tr) + (extra ? 2.0 * (side == Side::left ? tl : tr) : 0.0)) / hb;
    };
    if (a.wound_start_at_top) {
      const double w = a.well->omega_m;
      b.beta_start = (2.0 * n + (extra ? 1.0 : 0.0)) * std::numbers::pi / (w * hb);
      b.start_is_limit = true;
    } else {
      const auto [tl, tr] = wound_legs(a.x0, *a.well, a.wound_start);
      b.beta_start = combine(tl, tr);
    }
    const double end = a.wound_end;
    const double x0 = a.x0;
    const WellDescriptor* well = a.well;
    b.beta_at = [this, x0, well, end, combine](double wv) {
      const auto [tl, tr] = wound_legs(x0, *well, end - wv);
      return combine(tl, tr);
    };
    b.w = a.wound_w;
    b.beta.resize(b.w.size());
    for (std::size_t i = 0; i < b.w.size(); ++i) b.beta[i] = combine(a.wound_tl[i], a.wound_tr[i]);
    detail::find_extrema(b);
    return a.wound_cache.emplace(key, std::move(b)).first->second;
  }

  Potential pot_;
  PathConfig cfg_;
  Landscape land_;
};

// Free-function forms over a default-configured solver.

inline std::vector<TurningPointSolution> solve_turning_points(const Potential& pot, double x0, double beta) {
  return PathSolver(pot).solve_turning_points(x0, beta);
}

inline PathInventory enumerate(const Potential& pot, double x0, double beta, const PathConfig& cfg = {}) {
  return PathSolver(pot, cfg).enumerate(x0, beta);
}

}  // namespace tunnelcat
