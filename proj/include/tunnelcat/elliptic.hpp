#pragma once

// Jacobi cn (with sn, dn from the same pass) by the descending Landen
// transformation, and the self-consistent turning point of the
// harmonic-plus-quartic oscillator, x_t = x0 cn(u(x_t), k(x_t)).

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "tunnelcat/errors.hpp"
#include "tunnelcat/potential.hpp"
#include "tunnelcat/quadrature.hpp"

namespace tunnelcat {

struct JacobiValues {
  double sn;
  double cn;
  double dn;
};

namespace detail {

inline void check_modulus(double k) {
  if (!(k >= 0.0 && k <= 1.0)) throw InvalidArgument("elliptic modulus k must lie in [0, 1]");
}

}  // namespace detail

/// sn, cn, dn of (u, k) with k the modulus (not the parameter m = k^2).
inline JacobiValues jacobi_sn_cn_dn(double u, double k) {
  detail::check_modulus(k);
  if (!std::isfinite(u)) throw InvalidArgument("jacobi: u must be finite");
  if (k == 0.0) return {std::sin(u), std::cos(u), 1.0};
  if (k == 1.0) {
    const double s = 1.0 / std::cosh(u);
    return {std::tanh(u), s, s};
  }
  constexpr int max_steps = 16;
  std::array<double, max_steps + 1> a{}, c{};
  a[0] = 1.0;
  double b = std::sqrt((1.0 - k) * (1.0 + k));
  c[0] = k;
  int n = 0;
  while (n < max_steps && std::abs(c[n]) > std::numeric_limits<double>::epsilon() * a[n]) {
    a[n + 1] = 0.5 * (a[n] + b);
    c[n + 1] = 0.5 * (a[n] - b);
    b = std::sqrt(a[n] * b);
    ++n;
  }
  double phi = std::ldexp(a[n] * u, n);
  for (int j = n; j > 0; --j) {
    phi = 0.5 * (phi + std::asin(c[j] / a[j] * std::sin(phi)));
  }
  const double cn = std::cos(phi);
  // 1 - k^2 sn^2 written as a sum of non-negative terms.
  const double dn = std::sqrt((1.0 - k) * (1.0 + k) + k * k * cn * cn);
  return {std::sin(phi), cn, dn};
}

inline double jacobi_cn(double u, double k) { return jacobi_sn_cn_dn(u, k).cn; }

/// Complete elliptic integral of the first kind, K(k) = pi / (2 AGM(1, k')).
inline double complete_K(double k) {
  detail::check_modulus(k);
  if (k == 1.0) return std::numeric_limits<double>::infinity();
  double a = 1.0, b = std::sqrt((1.0 - k) * (1.0 + k));
  while (std::abs(a - b) > 4.0 * std::numeric_limits<double>::epsilon() * a) {
    const double an = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = an;
  }
  return std::numbers::pi / (2.0 * a);
}

/// Elliptic argument and modulus for a harmonic-plus-quartic turning point.
struct QuarticArgs {
  double u;
  double k;
};

inline QuarticArgs quartic_args(double omega, double lambda, double mass, double hbar, double beta, double x_turn) {
  const double mw2 = mass * omega * omega;
  const double q = 4.0 * lambda * x_turn * x_turn;
  const double u = 0.5 * beta * hbar * omega * std::sqrt(1.0 + q / mw2);
  const double k = std::sqrt((mw2 + 0.5 * q) / (mw2 + q));
  return {u, std::min(k, 1.0)};
}

/// Turning point of the single closed path from x0 at inverse temperature
/// beta in V = M w^2 x^2 / 2 + lambda x^4, from x_t = x0 cn(u, k).
inline double quartic_turning_point(const Potential& pot, double x0, double beta) {
  const auto* hq = std::get_if<HarmonicPlusQuartic>(&pot.family());
  if (!hq) throw InvalidArgument("quartic_turning_point: potential must be harmonic_plus_quartic");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("quartic_turning_point: beta must be > 0");
  if (!std::isfinite(x0)) throw InvalidArgument("quartic_turning_point: x0 must be finite");
  if (x0 == 0.0) return 0.0;
  const double m = pot.mass(), hb = pot.hbar();
  const double sign = x0 > 0.0 ? 1.0 : -1.0;
  const double r0 = std::abs(x0);
  // Only u <= K(k) is physical (cn >= 0). u grows and K shrinks with r, so
  // past the crossing g is replaced by r, which keeps the sign change unique.
  auto g = [&](double r) {
    const auto [u, k] = quartic_args(hq->omega, hq->lambda, m, hb, beta, r);
    if (u >= complete_K(k)) return r;
    return r - r0 * jacobi_cn(u, k);
  };
  try {
    return sign * find_root_bracketed(g, 0.0, r0, RootConfig{1e-15, 400});
  } catch (const NoSignChange&) {
    throw ConvergenceFailure("quartic_turning_point: no bracket in (0, |x0|)");
  }
}

}  // namespace tunnelcat
