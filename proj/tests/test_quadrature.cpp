#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "tunnelcat/quadrature.hpp"

using namespace tunnelcat;

namespace {

// Composite midpoint rule on the t-substituted integrand, x = x_s +/- t^2.
double midpoint_oracle(const std::function<double(double)>& f, double lo, double hi, SingularEnd end, int panels) {
  const double xs = end == SingularEnd::lower ? lo : hi;
  const double sign = end == SingularEnd::lower ? 1.0 : -1.0;
  const double tmax = std::sqrt(hi - lo);
  const double dt = tmax / panels;
  long double sum = 0.0L;
  for (int i = 0; i < panels; ++i) {
    const double t = (i + 0.5) * dt;
    sum += 2.0 * t * f(xs + sign * t * t);
  }
  return static_cast<double>(sum * dt);
}

// Plain bisection to a tiny bracket.
double bisect(const std::function<double(double)>& g, double lo, double hi) {
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    ((g(mid) > 0) == (g(lo) > 0) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct SingularCase {
  std::function<double(double)> f;
  double lo, hi;
  SingularEnd end;
  double expected;
};

std::vector<SingularCase> singular_cases() {
  return {
      {[](double x) { return 1.0 / std::sqrt(1.0 - x); }, 0.0, 1.0, SingularEnd::upper, 2.0},
      {[](double x) { return 1.0 / std::sqrt(x * (2.0 - x)); }, 0.0, 1.0, SingularEnd::lower, std::numbers::pi / 2},
      {[](double x) { return x / std::sqrt(1.0 - x * x); }, 0.0, 1.0, SingularEnd::upper, 1.0},
  };
}

}  // namespace

TEST(InverseSqrtEndpoint, ReferenceIntegrals) {
  for (const auto& c : singular_cases()) {
    EXPECT_NEAR(integrate_inverse_sqrt_endpoint(c.f, c.lo, c.hi, c.end), c.expected, 1e-10);
  }
}

TEST(InverseSqrtEndpoint, AgreesWithMidpointRefinementOracle) {
  for (const auto& c : singular_cases()) {
    const double oracle = midpoint_oracle(c.f, c.lo, c.hi, c.end, 1 << 20);
    const double v = integrate_inverse_sqrt_endpoint(c.f, c.lo, c.hi, c.end);
    EXPECT_NEAR(v, oracle, 1e-9 * std::abs(oracle));
  }
}

TEST(InverseSqrtEndpoint, HalvingToleranceStaysWithinPreviousTolerance) {
  for (const auto& c : singular_cases()) {
    for (double tol : {1e-6, 1e-8, 1e-10}) {
      const double a = integrate_inverse_sqrt_endpoint(c.f, c.lo, c.hi, c.end, {tol, 1e-14, 60});
      const double b = integrate_inverse_sqrt_endpoint(c.f, c.lo, c.hi, c.end, {tol / 2, 1e-14, 60});
      EXPECT_LE(std::abs(a - b), tol * std::abs(b));
    }
  }
}

TEST(InverseSqrtEndpoint, Errors) {
  auto stronger = [](double x) { return 1.0 / (1.0 - x); };
  EXPECT_THROW(integrate_inverse_sqrt_endpoint(stronger, 0.0, 1.0, SingularEnd::upper), NonIntegrable);
  auto wiggly = [](double x) { return std::sin(1e4 * x) / std::sqrt(1.0 - x); };
  EXPECT_THROW(integrate_inverse_sqrt_endpoint(wiggly, 0.0, 1.0, SingularEnd::upper, {1e-12, 1e-16, 4}),
               ToleranceNotReached);
  auto f = [](double x) { return x; };
  EXPECT_THROW(integrate_inverse_sqrt_endpoint(f, 1.0, 0.0, SingularEnd::upper), InvalidArgument);
  EXPECT_THROW(integrate_inverse_sqrt_endpoint(f, 0.0, 1.0, SingularEnd::upper, {0.0, 1e-14, 60}), InvalidArgument);
}

TEST(EndpointPower, FourthRootSubstitutionHandlesQuarterPowerDivergence) {
  auto f = [](double x) { return std::pow(x, -0.25); };
  const auto r = integrate_endpoint_power(f, 0.0, 1.0, SingularEnd::lower, 4, {1e-12, 1e-15, 60});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, 4.0 / 3.0, 1e-11);
}

TEST(RootFinding, ReferenceRoots) {
  auto g1 = [](double x) { return x * x - 2.0; };
  auto g2 = [](double x) { return std::cos(x); };
  auto g3 = [](double x) { return x * x * x - x - 2.0; };
  EXPECT_NEAR(find_root_bracketed(g1, 1, 2), std::sqrt(2.0), 1e-13);
  EXPECT_NEAR(find_root_bracketed(g2, 1, 2), std::numbers::pi / 2, 1e-13);
  EXPECT_NEAR(find_root_bracketed(g3, 1, 2), bisect(g3, 1, 2), 1e-12);
}

TEST(RootFinding, IndependentOfBracket) {
  auto g = [](double x) { return x * x * x - x - 2.0; };
  const double a = find_root_bracketed(g, 1.0, 2.0);
  const double b = find_root_bracketed(g, 1.5, 1.6);
  const double c = find_root_bracketed(g, 0.0, 10.0);
  EXPECT_NEAR(a, b, 1e-12);
  EXPECT_NEAR(a, c, 1e-12);
}

TEST(RootFinding, NoSignChange) {
  auto g = [](double x) { return x * x + 1.0; };
  EXPECT_THROW(find_root_bracketed(g, -1, 1), NoSignChange);
}

TEST(Derivative, ReferenceDerivatives) {
  auto sin_ = [](double x) { return std::sin(x); };
  auto exp_ = [](double x) { return std::exp(x); };
  auto cube = [](double x) { return x * x * x; };
  EXPECT_NEAR(derivative_central(sin_, 0.0), 1.0, 1e-10);
  EXPECT_NEAR(derivative_central(exp_, 1.0), std::exp(1.0), 1e-8);
  EXPECT_NEAR(derivative_central(cube, 2.0), 12.0, 1e-9);
}

TEST(Derivative, SmoothFunctionsReachTarget) {
  auto f = [](double x) { return std::log1p(x * x) + std::cos(3 * x); };
  auto df = [](double x) { return 2 * x / (1 + x * x) - 3 * std::sin(3 * x); };
  for (double x : {-2.0, -0.3, 0.7, 5.0}) EXPECT_NEAR(derivative_central(f, x), df(x), 1e-8 * (1 + std::abs(df(x))));
}

TEST(Derivative, PropagatesEvaluationFailure) {
  auto bad = [](double x) { return x > 0 ? std::numeric_limits<double>::quiet_NaN() : 0.0; };
  EXPECT_THROW(derivative_central(bad, 0.0), EvaluationFailed);
  auto f = [](double x) { return x; };
  EXPECT_THROW(derivative_central(f, 0.0, -1.0), InvalidArgument);
}
