#pragma once

// Reference spectrum of H = -(hbar^2 / 2M) d^2/dx^2 + V on a uniform grid with
// Dirichlet walls: three-point Laplacian, lowest levels by LAPACK bisection
// (dstebz), eigenvectors for the decay check by inverse iteration (dstein).
// Each level is computed on grids h, h/2, h/4; two Richardson steps remove the
// O(h^2) error and their difference decides which levels are trusted.

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "tunnelcat/errors.hpp"
#include "tunnelcat/potential.hpp"
#include "tunnelcat/quadrature.hpp"

namespace tunnelcat {

struct Grid {
  double x_min = -12.0;
  double x_max = 12.0;
  int n_points = 4001;  ///< including both wall nodes

  void validate() const {
    if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max) || n_points < 16) {
      throw InvalidArgument("Grid: need finite x_min < x_max and n_points >= 16");
    }
  }
  double spacing() const { return (x_max - x_min) / (n_points - 1); }
};

struct SpectrumConfig {
  int max_levels = 200;
  double shift_tolerance = 1e-6;  ///< relative change allowed between refinements
  double decay_tolerance = 1e-8;        ///< ground state: wall amplitude relative to the maximum
  double level_decay_tolerance = 1e-6;  ///< other levels; shifts the energy by about its square
};

struct SpectrumResult {
  std::vector<double> energies;  ///< ascending
  std::vector<bool> converged;   ///< per level: refinement stable and decayed at the walls
  Grid grid;
  int n_converged = 0;
};

namespace detail {

struct Tridiagonal {
  std::vector<double> diag;
  std::vector<double> off;
};

inline Tridiagonal hamiltonian(const Potential& pot, const Grid& g) {
  const int n = g.n_points - 2;
  const double h = g.spacing();
  const double t = pot.hbar() * pot.hbar() / (2.0 * pot.mass() * h * h);
  Tridiagonal m;
  m.diag.resize(n);
  m.off.assign(n - 1, -t);
  for (int i = 0; i < n; ++i) m.diag[i] = 2.0 * t + pot.value(g.x_min + (i + 1) * h);
  return m;
}

inline std::vector<double> lowest_eigenvalues(Tridiagonal m, int count) {
  const lapack_int n = static_cast<lapack_int>(m.diag.size());
  count = std::min<int>(count, n);
  lapack_int found = 0, nsplit = 0;
  std::vector<double> w(n);
  std::vector<lapack_int> block(n), split(n);
  const lapack_int info = LAPACKE_dstebz('I', 'B', n, 0.0, 0.0, 1, count, 0.0, m.diag.data(), m.off.data(), &found,
                                         &nsplit, w.data(), block.data(), split.data());
  if (info != 0) throw EvaluationFailed("eigen_spectrum: dstebz failed with info " + std::to_string(info));
  w.resize(found);
  return w;
}

// Wall amplitude / max amplitude of each eigenvector, by inverse iteration.
inline std::vector<double> wall_ratios(Tridiagonal m, const std::vector<double>& energies) {
  const lapack_int n = static_cast<lapack_int>(m.diag.size());
  const lapack_int k = static_cast<lapack_int>(energies.size());
  std::vector<double> w = energies;
  std::vector<lapack_int> block(k, 1), split{n};
  std::vector<double> z(static_cast<std::size_t>(n) * k);
  std::vector<lapack_int> ifail(k);
  const lapack_int info = LAPACKE_dstein(LAPACK_COL_MAJOR, n, m.diag.data(), m.off.data(), k, w.data(), block.data(),
                                         split.data(), z.data(), n, ifail.data());
  if (info < 0) throw EvaluationFailed("eigen_spectrum: dstein failed with info " + std::to_string(info));
  std::vector<double> ratio(k);
  for (lapack_int j = 0; j < k; ++j) {
    const double* v = z.data() + static_cast<std::size_t>(j) * n;
    double peak = 0.0;
    for (lapack_int i = 0; i < n; ++i) peak = std::max(peak, std::abs(v[i]));
    ratio[j] = std::max(std::abs(v[0]), std::abs(v[n - 1])) / peak;
  }
  return ratio;
}

}  // namespace detail

/// Lowest levels on `grid`, Richardson-extrapolated from grids h, h/2, h/4.
/// A level is trusted when both extrapolations agree to shift_tolerance and
/// its eigenvector has decayed at the walls; n_converged counts the leading
/// trusted levels.
inline SpectrumResult eigen_spectrum(const Potential& pot, const Grid& grid, const SpectrumConfig& cfg = {}) {
  grid.validate();
  if (cfg.max_levels < 1) throw InvalidArgument("SpectrumConfig: max_levels must be >= 1");
  Grid g2 = grid, g4 = grid;
  g2.n_points = 2 * grid.n_points - 1;
  g4.n_points = 4 * grid.n_points - 3;
  const auto h1 = detail::hamiltonian(pot, grid);
  const auto e1 = detail::lowest_eigenvalues(h1, cfg.max_levels);
  const auto e2 = detail::lowest_eigenvalues(detail::hamiltonian(pot, g2), cfg.max_levels);
  const auto e4 = detail::lowest_eigenvalues(detail::hamiltonian(pot, g4), cfg.max_levels);
  const std::size_t k = std::min({e1.size(), e2.size(), e4.size()});

  SpectrumResult out;
  out.grid = grid;
  const auto ratios = detail::wall_ratios(h1, std::vector<double>(e1.begin(), e1.begin() + k));
  if (k == 0 || !(ratios[0] < cfg.decay_tolerance)) {
    throw GridTooNarrow("eigen_spectrum: ground state has not decayed at the grid walls; widen the grid");
  }
  for (std::size_t i = 0; i < k; ++i) {
    const double r1 = (4.0 * e2[i] - e1[i]) / 3.0;
    const double r2 = (4.0 * e4[i] - e2[i]) / 3.0;
    if (!out.energies.empty() && !(r2 > out.energies.back())) break;
    out.energies.push_back(r2);
    const bool stable = std::abs(r2 - r1) <= cfg.shift_tolerance * std::max(std::abs(r2), 1e-12);
    out.converged.push_back(stable && ratios[i] < cfg.level_decay_tolerance);
  }
  while (out.n_converged < static_cast<int>(out.converged.size()) && out.converged[out.n_converged]) {
    ++out.n_converged;
  }
  return out;
}

struct ZExactResult {
  double value = 0.0;
  double tail_bound = 0.0;
};

/// Spectral sum over the trusted levels; the remainder is bounded by a
/// geometric series with the last trusted gap.
inline ZExactResult z_exact(const SpectrumResult& s, double beta, double tail_tolerance = 1e-10) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("z_exact: beta must be > 0");
  const int n = s.n_converged;
  if (n < 2) throw TailNotNegligible("z_exact: fewer than two trusted levels");
  const double e0 = s.energies[0];
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += std::exp(-beta * (s.energies[i] - e0));
  const double gap = s.energies[n - 1] - s.energies[n - 2];
  const double tail = std::exp(-beta * (s.energies[n - 1] + gap - e0)) / -std::expm1(-beta * gap);
  if (!(tail <= tail_tolerance * sum)) {
    throw TailNotNegligible("z_exact: truncated spectral sum is not converged at this beta; widen or refine the grid");
  }
  const double scale = std::exp(-beta * e0);
  return {scale * sum, scale * tail};
}

/// A grid that should resolve the levels relevant at inverse temperatures
/// down to beta_min: walls well beyond the classical turning points of
/// V_min + 40 / beta_min, about 40 points per local wavelength there.
inline Grid default_grid(const Potential& pot, double beta_min) {
  if (!(beta_min > 0.0)) throw InvalidArgument("default_grid: beta_min must be > 0");
  const double cap = 40.0 / beta_min;
  const double turn = level_radius(pot, lowest_value(pot) + cap);
  const double half = 1.6 * turn + 2.0;
  const double kmax = std::sqrt(2.0 * pot.mass() * cap) / pot.hbar();
  const double h = 2.0 * std::numbers::pi / kmax / 40.0;
  const int n = std::clamp(static_cast<int>(std::ceil(2.0 * half / h)) + 1, 2001, 8001);
  return {-half, half, n};
}

}  // namespace tunnelcat
