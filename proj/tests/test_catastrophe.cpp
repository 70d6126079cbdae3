#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tunnelcat/catastrophe.hpp"

using namespace tunnelcat;

namespace {

constexpr double pi = std::numbers::pi;

const PathSolver& dw() {
  static const PathSolver s(Potential(DoubleWell{1, 1}));
  return s;
}

const WellDescriptor& dw_well() { return dw().landscape().wells.at(0); }

// Real roots of 4 s^3 + 2 u s + v by sign changes on a fine grid.
int brute_force_extrema(double u, double v) {
  auto g = [&](double s) { return 4 * s * s * s + 2 * u * s + v; };
  const double r = 2.0 + std::sqrt(std::abs(u)) + std::cbrt(std::abs(v));
  const int n = 200000;
  int count = 0;
  double prev = g(-r);
  for (int i = 1; i <= n; ++i) {
    const double cur = g(-r + 2 * r * i / n);
    if ((prev < 0) != (cur < 0)) ++count;
    prev = cur;
  }
  return count;
}

}  // namespace

TEST(Thresholds, DoubleWell) {
  const auto t = bifurcation_thresholds(dw_well(), 3);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_NEAR(t[0], pi / 2, 1e-12);
  EXPECT_NEAR(t[1], pi, 1e-12);
  EXPECT_NEAR(t[2], 3 * pi / 2, 1e-12);
}

TEST(Thresholds, UnitFrequencyAndScaling) {
  const auto w = find_wells(Potential(Polynomial{{0, 0, -0.5, 0, 0.25}}), -3, 3).at(0);
  const auto t = bifurcation_thresholds(w, 1);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_NEAR(t[0], pi, 1e-12);

  const auto w2 = find_wells(Potential(DoubleWell{1, 2}), -5, 5).at(0);
  const auto a = bifurcation_thresholds(dw_well(), 4), b = bifurcation_thresholds(w2, 4);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(b[i], 0.5 * a[i], 1e-12);
  EXPECT_THROW(bifurcation_thresholds(dw_well(), 0), InvalidArgument);
}

TEST(Cusp, Examples) {
  EXPECT_EQ(cusp_extrema_count(-3, 0), 3);
  EXPECT_EQ(cusp_extrema_count(1, 1), 1);
  // 4s^3 - 6s + 2 = 2(s - 1)(2s^2 + 2s - 1): three simple roots.
  EXPECT_EQ(cusp_extrema_count(-3, 2), 3);
  EXPECT_EQ(cusp_extrema_count(-3, std::sqrt(8.0)), 2);
  EXPECT_EQ(cusp_extrema_count(0, 0), 1);
}

TEST(Cusp, MatchesBruteForceRootCount) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const double u = d(rng), v = d(rng);
    EXPECT_EQ(cusp_extrema_count(u, v), brute_force_extrema(u, v)) << u << " " << v;
  }
}

TEST(CausticLocus, NoneBelowThreshold) { EXPECT_FALSE(caustic_locus(dw(), dw_well(), pi / 2 - 0.01).has_value()); }

TEST(CausticLocus, NarrowJustAboveThreshold) {
  const auto near = caustic_locus(dw(), dw_well(), pi / 2 + 1e-3);
  ASSERT_TRUE(near.has_value());
  EXPECT_LT(near->first, 0.0);
  EXPECT_GT(near->second, 0.0);
  const auto nearer = caustic_locus(dw(), dw_well(), pi / 2 + 1e-4);
  ASSERT_TRUE(nearer.has_value());
  EXPECT_LT(nearer->second - nearer->first, near->second - near->first);
}

TEST(CausticLocus, WidthGrowsAndStaysSymmetric) {
  const auto a = caustic_locus(dw(), dw_well(), 1.7);
  const auto b = caustic_locus(dw(), dw_well(), 2.0);
  ASSERT_TRUE(a && b);
  EXPECT_GT(a->second - a->first, 0.0);
  EXPECT_GT(b->second - b->first, a->second - a->first);
  EXPECT_LT(std::abs(a->first + a->second), 1e-8);
  EXPECT_LT(std::abs(b->first + b->second), 1e-8);
}

TEST(CausticLocus, FrontierSeparatesOneFromThreePaths) {
  const auto l = caustic_locus(dw(), dw_well(), 2.0);
  ASSERT_TRUE(l.has_value());
  const double eps = 1e-6;
  EXPECT_EQ(dw().enumerate(l->second - eps, 2.0).p, 3);
  EXPECT_EQ(dw().enumerate(l->second + eps, 2.0).p, 1);
  EXPECT_EQ(dw().enumerate(l->first + eps, 2.0).p, 3);
  EXPECT_EQ(dw().enumerate(l->first - eps, 2.0).p, 1);
}

TEST(CausticLocus, OnsetMatchesFirstThreshold) {
  const CausticTracer tracer(dw(), dw_well());
  double lo = 1.4, hi = 1.8;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (tracer.locus(mid) ? hi : lo) = mid;
  }
  EXPECT_NEAR(hi, pi / 2, 1e-4);
}

TEST(CausticCurve, SamplesStraddleTheTop) {
  const auto c = CausticTracer(dw(), dw_well()).curve(1.6, 3.0, 7);
  EXPECT_EQ(c.branch_index, 1);
  ASSERT_EQ(c.samples.size(), 8u);
  for (const auto& s : c.samples) {
    EXPECT_LE(s.x0_left, dw_well().x_m);
    EXPECT_GE(s.x0_right, dw_well().x_m);
  }
  for (std::size_t i = 1; i < c.samples.size(); ++i) {
    EXPECT_GT(c.samples[i].x0_right - c.samples[i].x0_left, c.samples[i - 1].x0_right - c.samples[i - 1].x0_left);
  }
}

TEST(RegionMap, BandsAtTheTopAndAgreementWithLocus) {
  const auto m = region_map(dw(), {-0.9, 0.9}, {0.1, 5.0}, 32);
  ASSERT_EQ(m.x0_grid.size(), 33u);
  ASSERT_EQ(m.beta_grid.size(), 33u);
  EXPECT_TRUE(m.failures.empty());
  const std::size_t ix0 = 16;
  ASSERT_NEAR(m.x0_grid[ix0], 0.0, 1e-15);
  int prev = 0;
  for (std::size_t ib = 0; ib < m.beta_grid.size(); ++ib) {
    const int p = m.p(ib, ix0);
    EXPECT_GE(p, prev);
    prev = p;
    const double b = m.beta_grid[ib];
    const int expected = 1 + 2 * static_cast<int>(std::floor(b / (pi / 2)));
    EXPECT_EQ(p, expected) << "beta=" << b;
  }
  for (std::size_t ib = 0; ib < m.beta_grid.size(); ++ib) {
    for (std::size_t ix = 0; ix < m.x0_grid.size(); ++ix) {
      EXPECT_LE(m.minima_counts[ib][ix], 2);
      EXPECT_EQ(m.counts[ib][ix] % 2, 1);
      if (m.beta_grid[ib] < pi / 2) EXPECT_EQ(m.counts[ib][ix], 1);
    }
  }
  // The 1 -> 3 line on a beta row sits within two x0 cells of the locus.
  const std::size_t ib = 14;  // beta ~ 2.24
  const auto l = caustic_locus(dw(), dw_well(), m.beta_grid[ib]);
  ASSERT_TRUE(l.has_value());
  const double dx = m.x0_grid[1] - m.x0_grid[0];
  for (std::size_t ix = 0; ix + 1 < m.x0_grid.size(); ++ix) {
    const int a = m.counts[ib][ix], b = m.counts[ib][ix + 1];
    if ((a == 1 && b == 3) || (a == 3 && b == 1)) {
      const double edge = 0.5 * (m.x0_grid[ix] + m.x0_grid[ix + 1]);
      const double nearest = std::min(std::abs(edge - l->first), std::abs(edge - l->second));
      EXPECT_LE(nearest, 2 * dx);
    }
  }
}

TEST(RegionMap, Validation) {
  EXPECT_THROW(region_map(dw(), {-1, 1}, {0.1, 1}, 8), InvalidArgument);
  EXPECT_THROW(region_map(dw(), {1, -1}, {0.1, 1}, 16), InvalidArgument);
  EXPECT_THROW(region_map(dw(), {-1, 1}, {0.0, 1}, 16), InvalidArgument);
}
