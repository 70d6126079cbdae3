#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tunnelcat/classical_paths.hpp"

using namespace tunnelcat;

namespace {

constexpr double pi = std::numbers::pi;

const PathSolver& dw_solver() {
  static const PathSolver s(Potential(DoubleWell{1, 1}));
  return s;
}

const PathSolver& harmonic_solver() {
  static const PathSolver s(Potential(Harmonic{1}));
  return s;
}

std::vector<ClassicalPath> of_kind(const PathInventory& inv, StabilityKind k) {
  std::vector<ClassicalPath> out;
  for (const auto& p : inv.paths) {
    if (p.stability.kind == k) out.push_back(p);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// time_of_flight

TEST(TimeOfFlight, HarmonicClosedForm) {
  const Potential pot(Harmonic{1});
  EXPECT_NEAR(time_of_flight(pot, 1.0, 1.0 / std::cosh(1.0)), 2.0, 1e-10);
  for (double x0 : {0.5, -2.0, 3.0}) {
    for (double beta : {0.2, 1.0, 5.0}) {
      EXPECT_NEAR(time_of_flight(pot, x0, x0 / std::cosh(0.5 * beta)), beta, 1e-9 * beta);
    }
  }
}

TEST(TimeOfFlight, CollapsesAsTurningPointApproachesStart) {
  const Potential pot(Harmonic{1});
  double prev = time_of_flight(pot, 1.0, 0.9);
  for (double d : {1e-2, 1e-4, 1e-6}) {
    const double b = time_of_flight(pot, 1.0, 1.0 - d);
    EXPECT_LT(b, prev);
    prev = b;
  }
  EXPECT_LT(prev, 1e-2);
  EXPECT_EQ(time_of_flight(pot, 1.0, 1.0), 0.0);
}

TEST(TimeOfFlight, DoubleWellSelfConsistency) {
  const auto sols = dw_solver().solve_turning_points(0.5, 1.0);
  ASSERT_FALSE(sols.empty());
  for (const auto& s : sols) {
    if (!s.single_turn()) continue;
    EXPECT_NEAR(time_of_flight(dw_solver().potential(), 0.5, s.x_turn), 1.0, 1e-9);
  }
}

TEST(TimeOfFlight, Errors) {
  const Potential dw(DoubleWell{1, 1});
  // V(-1) = 0 < V(0.5): V(x) - V(x_turn) changes sign along the way.
  EXPECT_THROW(time_of_flight(dw, -1.2, 0.5), InvalidBracket);
  // Turning point on the top of V itself.
  EXPECT_THROW(time_of_flight(dw, 0.5, 1.0), SingularTurningPoint);
}

TEST(TimeOfFlight, PeriodicPiecesAddUp) {
  const Potential pot(DoubleWell{1, 1});
  const auto well = find_wells(pot, -3, 3).at(0);
  const double e = pot.value(0.6);
  // The two one-way legs from x0 to the turning points span one full period.
  const double full = time_of_flight_periodic(pot, well, 0.2, e, 1, Side::left) -
                      time_of_flight_periodic(pot, well, 0.2, e, 0, Side::left);
  EXPECT_NEAR(full, period(pot, well, e), 1e-9);
  // Small oscillations about the well top have period 2 pi / omega_m.
  EXPECT_NEAR(period(pot, well, pot.value(1e-4)), 2 * pi / 2.0, 1e-6);
}

// ---------------------------------------------------------------------------
// solve_turning_points

TEST(Solve, HarmonicSinglePath) {
  const auto sols = harmonic_solver().solve_turning_points(1.0, 2.0);
  ASSERT_EQ(sols.size(), 1u);
  EXPECT_NEAR(sols[0].x_turn, 1.0 / std::cosh(1.0), 1e-10);
  EXPECT_EQ(sols[0].side, Side::left);
  EXPECT_EQ(sols[0].n_periods, 0);
}

TEST(Solve, DoubleWellStillPathBelowThreshold) {
  const auto sols = dw_solver().solve_turning_points(0.0, 1.0);
  ASSERT_EQ(sols.size(), 1u);
  EXPECT_TRUE(sols[0].still());
}

TEST(Solve, DoubleWellTriplePathRegime) {
  const auto sols = dw_solver().solve_turning_points(0.0, 2.0);
  ASSERT_EQ(sols.size(), 3u);
  std::vector<double> turns;
  int still = 0;
  for (const auto& s : sols) {
    if (s.still()) ++still;
    else turns.push_back(s.x_turn);
  }
  EXPECT_EQ(still, 1);
  ASSERT_EQ(turns.size(), 2u);
  EXPECT_NEAR(turns[0], -turns[1], 1e-8);
}

TEST(Solve, RoundTripReproducesBeta) {
  const auto& s = dw_solver();
  const auto well = s.landscape().wells.at(0);
  for (double x0 : {-1.4, -0.6, 0.0, 0.3, 0.8, 2.0}) {
    for (double beta : {0.5, 2.0, 4.0, 7.0}) {
      for (const auto& sol : s.solve_turning_points(x0, beta)) {
        if (sol.still()) continue;
        double b = 0.0;
        if (sol.single_turn()) {
          b = time_of_flight(s.potential(), x0, sol.x_turn);
        } else if (sol.turns % 2 == 1) {
          b = time_of_flight_periodic(s.potential(), well, x0, sol.energy, sol.n_periods, sol.side);
        } else {
          b = time_of_flight_periodic(s.potential(), well, x0, sol.energy, sol.n_periods - 1, Side::left) +
              time_of_flight_periodic(s.potential(), well, x0, sol.energy, 0, Side::right);
        }
        EXPECT_NEAR(b, beta, 1e-8 * beta) << "x0=" << x0 << " beta=" << beta << " turns=" << sol.turns;
      }
    }
  }
}

TEST(Solve, VelocityIsRealAlongSingleTurnPaths) {
  const auto& s = dw_solver();
  for (double x0 : {-1.3, -0.4, 0.2, 0.9}) {
    for (double beta : {1.0, 3.0, 6.0}) {
      for (const auto& sol : s.solve_turning_points(x0, beta)) {
        if (!sol.single_turn()) continue;
        if (sol.side == Side::left) EXPECT_LE(sol.x_turn, x0);
        if (sol.side == Side::right) EXPECT_GE(sol.x_turn, x0);
        for (int i = 1; i < 100; ++i) {
          const double x = sol.x_turn + (x0 - sol.x_turn) * i / 100.0;
          EXPECT_GE(s.potential().difference(x, sol.x_turn), 0.0);
        }
      }
    }
  }
}

TEST(Solve, RejectsNonPositiveBeta) { EXPECT_THROW(dw_solver().solve_turning_points(0.3, 0.0), InvalidArgument); }

// ---------------------------------------------------------------------------
// action and determinant

TEST(Action, HarmonicExample) {
  const auto inv = harmonic_solver().enumerate(1.0, 2.0);
  ASSERT_EQ(inv.p, 1);
  EXPECT_NEAR(inv.paths[0].action, std::tanh(1.0), 1e-10);
}

TEST(Action, StillPathOnTheDoubleWellTop) {
  const auto inv = dw_solver().enumerate(0.0, 2.0);
  const auto it = std::find_if(inv.paths.begin(), inv.paths.end(), [](const auto& p) { return p.still(); });
  ASSERT_NE(it, inv.paths.end());
  EXPECT_NEAR(it->action, 2.0, 1e-14);
}

TEST(Action, HighTemperatureLimit) {
  const auto& s = dw_solver();
  for (double beta : {1e-2, 1e-3}) {
    const auto inv = s.enumerate(0.4, beta);
    ASSERT_EQ(inv.p, 1);
    EXPECT_NEAR(inv.paths[0].action, beta * s.potential().value(0.4), 1e-3 * beta);
    EXPECT_NEAR(*inv.paths[0].determinant, 2 * pi * beta, 1e-2 * 2 * pi * beta);
  }
}

TEST(HarmonicPieces, ActionAndDeterminantAreExact) {
  for (double omega : {0.5, 1.0, 2.0}) {
    for (const UnitSystem units : {UnitSystem(), UnitSystem(0.7, 1.9)}) {
      const PathSolver s(Potential(Harmonic{omega}, units));
      const double m = units.mass(), hb = units.hbar();
      for (double x0 : {0.5, 1.0, 3.0}) {
        for (double beta : {0.2, 1.0, 2.0, 5.0}) {
          const auto inv = s.enumerate(x0, beta);
          ASSERT_EQ(inv.p, 1);
          const auto& p = inv.paths[0];
          const double s_exact = m * omega * x0 * x0 * std::tanh(0.5 * beta * hb * omega);
          const double d_exact = 2 * pi * hb * std::sinh(beta * hb * omega) / (m * omega);
          EXPECT_NEAR(p.x_turn, x0 / std::cosh(0.5 * beta * hb * omega), 1e-8 * x0);
          EXPECT_NEAR(p.action, s_exact, 1e-7 * s_exact);
          EXPECT_NEAR(*p.determinant, d_exact, 1e-7 * d_exact);
          EXPECT_EQ(p.stability.kind, StabilityKind::minimum);
        }
      }
    }
  }
}

TEST(Determinant, HarmonicExample) {
  const auto inv = harmonic_solver().enumerate(0.8, 2.0);
  EXPECT_NEAR(*inv.paths.at(0).determinant, 2 * pi * std::sinh(2.0), 1e-7 * 22.79);
}

TEST(Determinant, StillPathClosedForm) {
  const auto& s = dw_solver();
  EXPECT_NEAR(*s.enumerate(0.0, pi / 4).paths.at(0).determinant, pi, 1e-12);
  for (double beta : {0.3, 1.0, 2.0, 3.5}) {
    const auto inv = s.enumerate(0.0, beta);
    for (const auto& p : inv.paths) {
      if (p.still()) EXPECT_NEAR(*p.determinant, 2 * pi * std::sin(2 * beta) / 2, 1e-10);
    }
  }
  // At beta = pi / 2 the still path is marginal.
  const auto at = s.enumerate(0.0, pi / 2);
  const auto it = std::find_if(at.paths.begin(), at.paths.end(), [](const auto& p) { return p.still(); });
  ASSERT_NE(it, at.paths.end());
  EXPECT_NEAR(*it->determinant, 0.0, 1e-12);
  EXPECT_EQ(it->stability.kind, StabilityKind::marginal);
}

TEST(Determinant, UnavailableForWoundPaths) {
  const auto& s = dw_solver();
  const auto inv = s.enumerate(0.0, 4.0);
  bool seen = false;
  for (const auto& p : inv.paths) {
    if (p.n_periods >= 1) {
      seen = true;
      EXPECT_FALSE(p.determinant.has_value());
      EXPECT_THROW(s.fluctuation_determinant(p), Unavailable);
    }
  }
  EXPECT_TRUE(seen);
}

// ---------------------------------------------------------------------------
// stability

TEST(Stability, StillPathExamples) {
  const auto& s = dw_solver();
  auto still = [&](double beta) {
    for (const auto& p : s.enumerate(0.0, beta).paths) {
      if (p.still()) return p.stability;
    }
    return Stability{};
  };
  EXPECT_EQ(still(1.0).kind, StabilityKind::minimum);
  EXPECT_EQ(still(2.0).kind, StabilityKind::one_saddle);
  EXPECT_EQ(still(3.5).kind, StabilityKind::multi_saddle);
  EXPECT_EQ(still(3.5).index, 2);
}

TEST(Stability, StillPathIndexStepsAtEachThreshold) {
  const auto& s = dw_solver();
  for (int p = 1; p <= 4; ++p) {
    const double b = p * pi / 2;
    int below = -1, above = -1;
    for (const auto& path : s.enumerate(0.0, b - 1e-3).paths) {
      if (path.still()) below = path.stability.index;
    }
    for (const auto& path : s.enumerate(0.0, b + 1e-3).paths) {
      if (path.still()) above = path.stability.index;
    }
    EXPECT_EQ(below, p - 1);
    EXPECT_EQ(above, p);
  }
}

TEST(Stability, MinimaHavePositiveDeterminant) {
  const auto& s = dw_solver();
  for (double x0 : {-1.2, -0.5, 0.0, 0.25, 0.7}) {
    for (double beta : {0.5, 2.0, 4.0, 6.0}) {
      for (const auto& p : s.enumerate(x0, beta).paths) {
        if (p.stability.kind == StabilityKind::minimum) {
          ASSERT_TRUE(p.determinant.has_value());
          EXPECT_GT(*p.determinant, 0.0);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// enumerate

TEST(Enumerate, ReferenceExamples) {
  const auto& s = dw_solver();
  const auto one = s.enumerate(0.0, 1.0);
  EXPECT_EQ(one.p, 1);
  EXPECT_EQ(one.N, 1);

  const auto three = s.enumerate(0.0, 2.0);
  EXPECT_EQ(three.p, 3);
  EXPECT_EQ(three.N, 2);

  const auto five = s.enumerate(0.0, 4.0);
  EXPECT_EQ(five.p, 5);
  EXPECT_EQ(five.N, 2);
  EXPECT_EQ(of_kind(five, StabilityKind::minimum).size(), 2u);
  const auto saddles = of_kind(five, StabilityKind::one_saddle);
  ASSERT_EQ(saddles.size(), 2u);
  EXPECT_EQ(saddles[0].n_periods, 1);
  EXPECT_EQ(saddles[1].n_periods, 1);
  EXPECT_NEAR(saddles[0].action, saddles[1].action, 1e-10);
  const auto multi = of_kind(five, StabilityKind::multi_saddle);
  ASSERT_EQ(multi.size(), 1u);
  EXPECT_TRUE(multi[0].still());
  EXPECT_EQ(multi[0].stability.index, 2);
}

TEST(Enumerate, SortedByActionAndCountsConsistent) {
  const auto& s = dw_solver();
  for (double x0 : {-0.8, -0.1, 0.0, 0.5}) {
    for (double beta : {1.0, 3.0, 5.0, 8.0}) {
      const auto inv = s.enumerate(x0, beta);
      EXPECT_EQ(inv.p, static_cast<int>(inv.paths.size()));
      EXPECT_LE(inv.N, inv.p);
      EXPECT_LE(inv.N, 2);
      EXPECT_TRUE(std::is_sorted(inv.paths.begin(), inv.paths.end(),
                                 [](const auto& a, const auto& b) { return a.action < b.action; }));
    }
  }
}

TEST(Enumerate, OddCountInsideTheWell) {
  const auto& s = dw_solver();
  for (double x0 : {-0.7, -0.2, 0.0, 0.35, 0.9}) {
    for (double beta : {0.7, 1.9, 3.3, 4.5}) EXPECT_EQ(s.enumerate(x0, beta).p % 2, 1) << x0 << " " << beta;
  }
}

TEST(Enumerate, OutsideTheWellOnlySinglePaths) {
  const auto& s = dw_solver();
  for (double x0 : {-2.0, 1.5}) {
    for (double beta : {0.5, 3.0, 6.0}) {
      const auto inv = s.enumerate(x0, beta);
      EXPECT_EQ(inv.p, 1);
      EXPECT_EQ(inv.paths[0].n_periods, 0);
    }
  }
}

TEST(Enumerate, MirrorSymmetryForEvenPotential) {
  const auto& s = dw_solver();
  for (double x0 : {0.15, 0.6, 1.3}) {
    for (double beta : {1.0, 2.5, 4.0}) {
      const auto a = s.enumerate(x0, beta), b = s.enumerate(-x0, beta);
      ASSERT_EQ(a.p, b.p);
      for (std::size_t i = 0; i < a.paths.size(); ++i) {
        EXPECT_NEAR(a.paths[i].action, b.paths[i].action, 1e-10 * (1 + std::abs(a.paths[i].action)));
        if (a.paths[i].determinant) {
          ASSERT_TRUE(b.paths[i].determinant.has_value());
          EXPECT_NEAR(*a.paths[i].determinant, *b.paths[i].determinant, 1e-10 * (1 + std::abs(*a.paths[i].determinant)));
        }
      }
    }
  }
}

TEST(Enumerate, DegenerateTunnellingMinima) {
  const auto inv = dw_solver().enumerate(0.0, 2.0);
  const auto mins = of_kind(inv, StabilityKind::minimum);
  ASSERT_EQ(mins.size(), 2u);
  EXPECT_NEAR(mins[0].action, mins[1].action, 1e-10);
  EXPECT_NEAR(mins[0].x_turn, -mins[1].x_turn, 1e-8);
}

TEST(Enumerate, CausticConsistencyAtTheTop) {
  // The still path's determinant changes sign where the count jumps 1 -> 3.
  const auto& s = dw_solver();
  double lo = 1.0, hi = 2.0;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (s.enumerate(0.0, mid).p == 1 ? lo : hi) = mid;
  }
  EXPECT_NEAR(0.5 * (lo + hi), pi / 2, 1e-4);
}

TEST(Enumerate, NewbornPairIsMarginalAtTheJump) {
  // Off the top, the pair born at the jump starts with a vanishing determinant.
  const auto& s = dw_solver();
  const double x0 = 0.1;
  double lo = 1.5, hi = 3.0;
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    (s.enumerate(x0, mid).p == 1 ? lo : hi) = mid;
  }
  const auto inv = s.enumerate(x0, hi);
  ASSERT_EQ(inv.p, 3);
  double smallest = std::numeric_limits<double>::infinity();
  for (const auto& p : inv.paths) {
    if (p.determinant) smallest = std::min(smallest, std::abs(*p.determinant));
  }
  const double at_start = std::abs(*s.enumerate(x0, 1.0).paths.at(0).determinant);
  EXPECT_LT(smallest, 1e-2 * at_start);
}
