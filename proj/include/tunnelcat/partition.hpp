#pragma once

// Semiclassical partition function: an ordinary x0 integral of
// sum over minima of exp(-S/hbar) / sqrt(Delta).
//
// The integrand jumps where a pair of paths is born (a fold of a single-turn
// branch). On the side where the new minimum exists, Delta vanishes like
// |x0 - x_c|^(1/2), so the integrand grows like |x0 - x_c|^(-1/4); pieces
// touching such points use x0 = x_c +/- s^4.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "tunnelcat/catastrophe.hpp"
#include "tunnelcat/classical_paths.hpp"
#include "tunnelcat/errors.hpp"
#include "tunnelcat/potential.hpp"
#include "tunnelcat/quadrature.hpp"

namespace tunnelcat {

struct IntegrandValue {
  double value = 0.0;
  int minima = 0;
  bool divergent_at_caustic = false;  ///< a contributing path was marginal
};

struct PartitionConfig {
  QuadratureConfig outer{1e-9, 1e-300, 400};
  int scan_points = 64;  ///< branch sampling for the integrand (n = 0 branches only)
  int end_grading = 32;
  int transition_grid = 64;  ///< coarse x0 grid searching for jumps of the minima count
  double cutoff_exponent = 50.0;
  double cutoff_check = 1e-12;
  CausticConfig caustic{};
};

struct ZscResult {
  double beta = 0.0;
  double value = 0.0;
  double error_estimate = 0.0;
  double cutoff = 0.0;
  double peak = 0.0;  ///< largest integrand value seen on the coarse grid
  std::vector<double> singular_points;
  struct Piece {
    double lower;
    double upper;
    double value;
    double error;
  };
  std::vector<Piece> breakdown;
};

/// 1 / (2 sinh(beta hbar omega / 2)).
inline double z_harmonic_closed_form(double omega, double beta, const UnitSystem& units = {}) {
  if (!(omega > 0.0) || !(beta > 0.0)) throw InvalidArgument("z_harmonic_closed_form: omega, beta must be > 0");
  return 1.0 / (2.0 * std::sinh(0.5 * beta * units.hbar() * omega));
}

/// sqrt(M / (2 pi beta hbar^2)) * integral of exp(-beta V).
inline double z_classical_limit(const Potential& pot, double beta, const QuadratureConfig& cfg = {1e-12, 1e-300, 200}) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("z_classical_limit: beta must be > 0");
  const double vmin = lowest_value(pot);
  const double c = 2.0 * level_radius(pot, lowest_value(pot) + 50.0 / beta);
  std::vector<double> cuts{-c, c};
  for (const auto& cp : critical_points(pot, -c, c)) cuts.push_back(cp.x);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    auto f = [&](double x) { return std::exp(-beta * (pot.value(x) - vmin)); };
    const auto r = adaptive_integrate(f, cuts[i], cuts[i + 1], cfg);
    if (!r.converged) throw ToleranceNotReached("z_classical_limit: quadrature did not converge", r.value, r.error);
    total += r.value;
  }
  const double hb = pot.hbar();
  return std::sqrt(pot.mass() / (2.0 * std::numbers::pi * beta * hb * hb)) * std::exp(-beta * vmin) * total;
}

class PartitionSolver {
 public:
  explicit PartitionSolver(Potential pot, PartitionConfig cfg = {}, PathConfig paths = {})
      : cfg_(cfg), paths_(pot, paths), fast_(pot, fast_config(paths, cfg)) {
    cfg_.outer.validate();
  }

  const PathSolver& paths() const noexcept { return paths_; }
  const Potential& potential() const noexcept { return paths_.potential(); }
  const PartitionConfig& config() const noexcept { return cfg_; }

  /// sum over minima of exp(-S/hbar) Delta^(-1/2) at (x0, beta).
  IntegrandValue integrand(double x0, double beta) const { return integrand_with(fast_, x0, beta); }

  /// Same, with the full-resolution branch scan.
  IntegrandValue integrand_reference(double x0, double beta) const { return integrand_with(paths_, x0, beta); }

  ZscResult z_semiclassical(double beta, std::optional<double> x0_cutoff = std::nullopt) const {
    return z_semiclassical(beta, x0_cutoff, cfg_.outer);
  }

  ZscResult z_semiclassical(double beta, std::optional<double> x0_cutoff, const QuadratureConfig& outer) const {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("z_semiclassical: beta must be > 0");
    outer.validate();
    ZscResult res;
    res.beta = beta;
    double c = x0_cutoff ? *x0_cutoff : 2.0 * level_radius(potential(), lowest_value(potential()) + cfg_.cutoff_exponent / beta);
    if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("z_semiclassical: x0_cutoff must be > 0");

    auto f = [&](double x0) { return integrand(x0, beta).value; };

    // Coarse grid: peak estimate and jumps of the minima count. A default
    // cutoff grows until the integrand has decayed there; a given one is
    // only checked.
    const int n = cfg_.transition_grid;
    std::vector<double> xs(n + 1);
    std::vector<int> counts(n + 1);
    for (int attempt = 0;; ++attempt) {
      double peak = 0.0;
      for (int i = 0; i <= n; ++i) {
        xs[i] = -c + 2.0 * c * i / n;
        const auto v = integrand(xs[i], beta);
        counts[i] = v.minima;
        peak = std::max(peak, v.value);
      }
      const double at_cut = std::max(std::abs(f(-c)), std::abs(f(c)));
      if (at_cut <= cfg_.cutoff_check * peak) {
        res.peak = peak;
        break;
      }
      if (x0_cutoff || attempt >= 12) {
        throw CutoffTooSmall("z_semiclassical: integrand at the x0 cutoff is not negligible");
      }
      c *= 1.5;
    }
    res.cutoff = c;

    // Split points: well tops, the first caustic pair, and any other jump of
    // the minima count seen on the coarse grid.
    std::vector<double> smooth_cuts;
    std::vector<double> singular;
    for (const auto& w : paths_.landscape().wells) {
      if (w.x_m > -c && w.x_m < c) smooth_cuts.push_back(w.x_m);
      if (std::isfinite(w.left_edge) && std::isfinite(w.right_edge)) {
        if (auto l = caustic_locus(fast_, w, beta, cfg_.caustic)) {
          singular.push_back(l->first);
          singular.push_back(l->second);
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      if (counts[i] == counts[i + 1]) continue;
      const bool known =
          std::any_of(singular.begin(), singular.end(), [&](double s) { return s >= xs[i] && s <= xs[i + 1]; });
      if (known) continue;
      double lo = xs[i], hi = xs[i + 1];
      const int clo = counts[i];
      for (int k = 0; k < 60 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo)); ++k) {
        const double mid = 0.5 * (lo + hi);
        (integrand(mid, beta).minima == clo ? lo : hi) = mid;
      }
      singular.push_back(0.5 * (lo + hi));
    }
    const double peak = res.peak;

    struct Cut {
      double x;
      bool singular;
    };
    std::vector<Cut> cuts{{-c, false}, {c, false}};
    for (double x : smooth_cuts) cuts.push_back({x, false});
    for (double x : singular) {
      if (x > -c && x < c) cuts.push_back({x, true});
    }
    std::sort(cuts.begin(), cuts.end(), [](const Cut& l, const Cut& r) { return l.x < r.x; });
    std::vector<Cut> merged;
    for (const auto& k : cuts) {
      if (!merged.empty() && k.x - merged.back().x <= 1e-14 * std::max(1.0, std::abs(k.x))) {
        merged.back().singular = merged.back().singular || k.singular;
      } else {
        merged.push_back(k);
      }
    }
    for (const auto& k : merged) {
      if (k.singular) res.singular_points.push_back(k.x);
    }

    // Absolute tolerance shared across pieces, relative to a first estimate.
    QuadratureConfig piece_cfg = outer;
    piece_cfg.abs_tol = std::max(outer.abs_tol, outer.rel_tol * peak * 1e-3 * c);
    bool ok = true;
    auto add = [&](double lo, double hi, const QuadratureResult& r) {
      res.breakdown.push_back({lo, hi, r.value, r.error});
      res.value += r.value;
      res.error_estimate += r.error;
      ok = ok && r.converged;
    };
    for (std::size_t i = 0; i + 1 < merged.size(); ++i) {
      const Cut& a = merged[i];
      const Cut& b = merged[i + 1];
      if (!a.singular && !b.singular) {
        add(a.x, b.x, adaptive_integrate(f, a.x, b.x, piece_cfg));
        continue;
      }
      const double mid = 0.5 * (a.x + b.x);
      if (a.singular) {
        add(a.x, mid, integrate_endpoint_power(f, a.x, mid, SingularEnd::lower, 4, piece_cfg));
      } else {
        add(a.x, mid, adaptive_integrate(f, a.x, mid, piece_cfg));
      }
      if (b.singular) {
        add(mid, b.x, integrate_endpoint_power(f, mid, b.x, SingularEnd::upper, 4, piece_cfg));
      } else {
        add(mid, b.x, adaptive_integrate(f, mid, b.x, piece_cfg));
      }
    }
    if (!ok) {
      throw ToleranceNotReached("z_semiclassical: outer x0 quadrature did not converge", res.value,
                                res.error_estimate);
    }
    return res;
  }

 private:
  static PathConfig fast_config(PathConfig p, const PartitionConfig& cfg) {
    p.scan_points = cfg.scan_points;
    p.end_grading = cfg.end_grading;
    p.include_wound = false;
    return p;
  }

  static IntegrandValue integrand_with(const PathSolver& s, double x0, double beta) {
    IntegrandValue out;
    const double hb = s.potential().hbar();
    const auto inv = s.minima(x0, beta);
    for (const auto& p : inv.paths) {
      if (p.stability.kind == StabilityKind::marginal) {
        out.divergent_at_caustic = true;
        continue;
      }
      if (!p.determinant || !(*p.determinant > 0.0)) continue;
      out.value += std::exp(-p.action / hb) / std::sqrt(*p.determinant);
      ++out.minima;
    }
    return out;
  }

  PartitionConfig cfg_;
  PathSolver paths_;
  PathSolver fast_;
};

/// Free-function forms.
inline IntegrandValue integrand(const Potential& pot, double x0, double beta) {
  return PartitionSolver(pot).integrand(x0, beta);
}

inline ZscResult z_semiclassical(const Potential& pot, double beta, std::optional<double> x0_cutoff = std::nullopt,
                                 const PartitionConfig& cfg = {}) {
  return PartitionSolver(pot, cfg).z_semiclassical(beta, x0_cutoff);
}

}  // namespace tunnelcat
