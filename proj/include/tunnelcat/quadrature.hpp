#pragma once

// Numerical kernels shared by the path, partition and catastrophe code:
// adaptive Gauss-Kronrod quadrature that can replay its own panel partition,
// power-law substitutions for integrable endpoint singularities, bracketed
// root refinement and a Richardson-corrected central derivative.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "tunnelcat/errors.hpp"

namespace tunnelcat {

struct QuadratureConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  int max_subdivisions = 60;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || max_subdivisions < 4) {
      throw InvalidArgument("QuadratureConfig: need rel_tol > 0, abs_tol > 0, max_subdivisions >= 4");
    }
  }

  QuadratureConfig tightened(double factor) const {
    QuadratureConfig c = *this;
    c.rel_tol *= factor;
    c.abs_tol *= factor;
    return c;
  }
};

/// Outcome of an adaptive integration. `partition` holds the panel
/// breakpoints as fractions of the integration interval (0 and 1 included),
/// so the same rule can be replayed on a nearby interval.
struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
  std::vector<double> partition;
};

enum class SingularEnd { lower, upper };

struct RootConfig {
  double rel_width = 1e-13;
  std::uintmax_t max_iterations = 200;
  bool relative_only = false;  ///< drop the max(1, .) floor: width <= rel_width * |x|
};

namespace detail {

struct Panel {
  double a;
  double b;
  double value;
  double error;
};

template <class F>
Panel kronrod15(F& f, double a, double b) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  using G = boost::math::quadrature::gauss<double, 7>;
  const auto& x = GK::abscissa();
  const auto& wk = GK::weights();
  const auto& wg = G::weights();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);

  double f0 = f(mid);
  double kronrod = f0 * wk[0];
  double gauss = f0 * wg[0];
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double fp = f(mid + half * x[i]);
    const double fm = f(mid - half * x[i]);
    kronrod += (fp + fm) * wk[i];
    if (i % 2 == 0) gauss += (fp + fm) * wg[i / 2];
  }
  kronrod *= half;
  gauss *= half;
  const double err = std::max(std::abs(kronrod - gauss),
                              2.0 * std::numeric_limits<double>::epsilon() * std::abs(kronrod));
  return {a, b, kronrod, err};
}

inline bool finite(double v) { return std::isfinite(v); }

}  // namespace detail

/// Globally adaptive G7/K15 quadrature. Never throws on a missed tolerance;
/// the result's `converged` flag records it.
template <class F>
QuadratureResult adaptive_integrate(F&& f, double a, double b, const QuadratureConfig& cfg = {}) {
  QuadratureResult out;
  if (a == b) {
    out.partition = {0.0, 1.0};
    return out;
  }
  std::vector<detail::Panel> panels{detail::kronrod15(f, a, b)};
  int subdivisions = 0;
  for (;;) {
    double total = 0.0;
    double err = 0.0;
    for (const auto& p : panels) {
      total += p.value;
      err += p.error;
    }
    out.value = total;
    out.error = err;
    if (!detail::finite(total) || !detail::finite(err)) {
      out.converged = false;
      break;
    }
    if (err <= std::max(cfg.abs_tol, cfg.rel_tol * std::abs(total))) break;
    if (subdivisions >= cfg.max_subdivisions) {
      out.converged = false;
      break;
    }
    auto worst = std::max_element(panels.begin(), panels.end(),
                                  [](const auto& l, const auto& r) { return l.error < r.error; });
    const double mid = 0.5 * (worst->a + worst->b);
    if (mid <= worst->a || mid >= worst->b) {
      out.converged = false;
      break;
    }
    const detail::Panel left = detail::kronrod15(f, worst->a, mid);
    const detail::Panel right = detail::kronrod15(f, mid, worst->b);
    *worst = left;
    panels.push_back(right);
    ++subdivisions;
  }
  std::sort(panels.begin(), panels.end(), [](const auto& l, const auto& r) { return l.a < r.a; });
  out.partition.reserve(panels.size() + 1);
  for (const auto& p : panels) out.partition.push_back((p.a - a) / (b - a));
  out.partition.push_back(1.0);
  return out;
}

/// Applies the K15 rule on a fixed partition (fractions of [a, b]). The result
/// is a smooth function of a, b and any parameters inside f.
template <class F>
double integrate_on_partition(F&& f, double a, double b, std::span<const double> partition) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < partition.size(); ++i) {
    const double pa = a + (b - a) * partition[i];
    const double pb = a + (b - a) * partition[i + 1];
    total += detail::kronrod15(f, pa, pb).value;
  }
  return total;
}

namespace detail {

// Evaluates f at x = xs + sign * t^power. Integrands may take (x) or
// (x, offset) where offset = x - xs is exact, which lets callers avoid
// cancellation when forming differences against the singular point.
template <class F>
auto power_substituted(F& f, double xs, double sign, int power) {
  return [&f, xs, sign, power](double t) {
    const double tp = std::pow(t, power);
    const double offset = sign * tp;
    const double jac = power * std::pow(t, power - 1);
    if constexpr (std::is_invocable_v<F&, double, double>) {
      return jac * f(xs + offset, offset);
    } else {
      return jac * f(xs + offset);
    }
  };
}

}  // namespace detail

/// Integrates f over [lower, upper] after the substitution x = x_s +/- t^power,
/// where x_s is the singular end. power = 2 removes an inverse-square-root
/// singularity exactly; power = 4 removes |x - x_s|^(-1/4) and softens
/// |x - x_s|^(-1/2).
template <class F>
QuadratureResult integrate_endpoint_power(F&& f, double lower, double upper, SingularEnd end, int power,
                                          const QuadratureConfig& cfg = {}) {
  if (!(lower < upper)) throw InvalidArgument("integrate_endpoint_power: need lower < upper");
  const double xs = end == SingularEnd::lower ? lower : upper;
  const double sign = end == SingularEnd::lower ? 1.0 : -1.0;
  const double tmax = std::pow(upper - lower, 1.0 / power);
  auto g = detail::power_substituted(f, xs, sign, power);
  return adaptive_integrate(g, 0.0, tmax, cfg);
}

template <class F>
double integrate_endpoint_power_on_partition(F&& f, double lower, double upper, SingularEnd end, int power,
                                             std::span<const double> partition) {
  const double xs = end == SingularEnd::lower ? lower : upper;
  const double sign = end == SingularEnd::lower ? 1.0 : -1.0;
  const double tmax = std::pow(upper - lower, 1.0 / power);
  auto g = detail::power_substituted(f, xs, sign, power);
  return integrate_on_partition(g, 0.0, tmax, partition);
}

/// Integral of f over [lower, upper] where f ~ |x - x_s|^(-1/2) at the
/// singular end, via x = x_s +/- t^2 and adaptive Gauss-Kronrod in t.
template <class F>
double integrate_inverse_sqrt_endpoint(F&& f, double lower, double upper, SingularEnd end,
                                       const QuadratureConfig& cfg = {}) {
  cfg.validate();
  if (!(lower < upper)) throw InvalidArgument("integrate_inverse_sqrt_endpoint: need lower < upper");
  const double xs = end == SingularEnd::lower ? lower : upper;
  const double sign = end == SingularEnd::lower ? 1.0 : -1.0;
  const double tmax = std::sqrt(upper - lower);
  auto g = detail::power_substituted(f, xs, sign, 2);

  // Finiteness probe: after substitution the integrand must stay bounded
  // (or at worst grow slower than 1/t) towards t = 0.
  const double g4 = g(1e-4 * tmax);
  const double g6 = g(1e-6 * tmax);
  const double g8 = g(1e-8 * tmax);
  if (!std::isfinite(g4) || !std::isfinite(g6) || !std::isfinite(g8) ||
      std::abs(g8) > 50.0 * std::max(std::abs(g6), std::numeric_limits<double>::min())) {
    throw NonIntegrable("integrate_inverse_sqrt_endpoint: integrand not integrable at the singular end");
  }
  QuadratureResult r = adaptive_integrate(g, 0.0, tmax, cfg);
  if (!r.converged) {
    throw ToleranceNotReached("integrate_inverse_sqrt_endpoint: max_subdivisions exhausted", r.value, r.error);
  }
  return r.value;
}

/// Root of g inside [lo, hi] (sign change required), refined by TOMS 748
/// until the bracket width is below rel_width * max(1, |x|).
template <class G>
double find_root_bracketed(G&& g, double lo, double hi, const RootConfig& cfg = {}) {
  if (lo > hi) std::swap(lo, hi);
  const double glo = g(lo);
  const double ghi = g(hi);
  if (glo == 0.0) return lo;
  if (ghi == 0.0) return hi;
  if (!std::isfinite(glo) || !std::isfinite(ghi) || (glo > 0.0) == (ghi > 0.0)) {
    throw NoSignChange("find_root_bracketed: g(lo) and g(hi) do not differ in sign");
  }
  auto done = [&cfg](double a, double b) {
    const double mag = std::max(std::abs(a), std::abs(b));
    return std::abs(b - a) <= cfg.rel_width * (cfg.relative_only ? mag : std::max(1.0, mag));
  };
  std::uintmax_t iters = cfg.max_iterations;
  auto fn = [&g](double x) { return g(x); };
  const auto [a, b] = boost::math::tools::toms748_solve(fn, lo, hi, glo, ghi, done, iters);
  const double ga = g(a);
  const double gb = g(b);
  return std::abs(ga) <= std::abs(gb) ? a : b;
}

/// Five-point central difference with one Richardson step (h and h/2);
/// h = max(1e-6, 1e-6 |x|) * scale, rounded down to a power of two so that
/// the stencil abscissae are exact. Only g on [x - 2h, x + 2h] is used.
template <class G>
double derivative_central(G&& g, double x, double scale = 1.0) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("derivative_central: scale must be > 0");
  const double h = std::exp2(std::floor(std::log2(std::max(1e-6, 1e-6 * std::abs(x)) * scale)));
  auto eval = [&g](double at) {
    double v;
    try {
      v = g(at);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw EvaluationFailed(std::string("derivative_central: ") + e.what());
    }
    if (!std::isfinite(v)) throw EvaluationFailed("derivative_central: non-finite function value");
    return v;
  };
  const double f2p = eval(x + 2.0 * h), f2m = eval(x - 2.0 * h);
  const double f1p = eval(x + h), f1m = eval(x - h);
  const double fhp = eval(x + 0.5 * h), fhm = eval(x - 0.5 * h);
  const double coarse = (-f2p + 8.0 * f1p - 8.0 * f1m + f2m) / (12.0 * h);
  const double fine = (-f1p + 8.0 * fhp - 8.0 * fhm + f1m) / (6.0 * h);
  return (16.0 * fine - coarse) / 15.0;
}

}  // namespace tunnelcat
