#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "torus_ma/solver.hpp"
#include "torus_ma/verify.hpp"

using namespace torus_ma;
using torus_ma::testing::TrigPoly;

namespace {

EquationSpec make(Family f) {
  EquationSpec s;
  s.family = f;
  if (f == Family::NDIM_FULL || f == Family::NDIM_HESSIAN || f == Family::NDIM_B) s.n = 3;
  if (f == Family::WARPED) s.c = 1.0;
  return s;
}

TorusGrid grid_for(const EquationSpec& s, int size) {
  return TorusGrid(std::vector<int>(base_dim(s), size));
}

ScalarField sample2(const TorusGrid& g, double (*fn)(double, double)) {
  return ScalarField::sample(g, [fn](std::span<const double> x) { return fn(x[0], x[1]); });
}

}  // namespace

TEST(Verify, ZeroPotentialIsExact) {
  for (Family f : kAllFamilies) {
    auto s = make(f);
    TorusGrid g = grid_for(s, 8);
    ScalarField u(g);
    auto r = verify_solution(u, ScalarField(g), s, 1e-12);
    EXPECT_TRUE(r.pass) << family_name(f);
    EXPECT_LT(r.anti_invariant_norm, 1e-14) << family_name(f);
    EXPECT_LT(r.topform_residual, 1e-14) << family_name(f);
    EXPECT_LT(r.volume_defect, 1e-14) << family_name(f);
    EXPECT_LT(r.potential_defect, 1e-14) << family_name(f);
    EXPECT_NEAR(r.positivity_margin, 1.0, 1e-14) << family_name(f);
  }
}

TEST(Verify, StdmaDisplayedCoefficients) {
  std::mt19937_64 rng(11);
  TorusGrid g({16, 16});
  auto p = TrigPoly::random(2, 2, 5, 0.01, rng);
  auto w = reconstruct_form(p.field(g), make(Family::STDMA));
  EXPECT_LT(max_abs_diff(w.coefficient({kE1, kF1}), 1.0 + p.d2(g, 0, 0)), 1e-11);
  EXPECT_LT(max_abs_diff(w.coefficient({kE2, kF2}), 1.0 + p.d2(g, 1, 1)), 1e-11);
  EXPECT_LT(max_abs_diff(w.coefficient({kE1, kF2}), p.d2(g, 0, 1)), 1e-11);
  EXPECT_LT(max_abs_diff(w.coefficient({kE2, kF1}), p.d2(g, 0, 1)), 1e-11);
  EXPECT_LT(w.coefficient({kE1, kE2}).max_abs(), 1e-12);
  EXPECT_LT(w.coefficient({kF1, kF2}).max_abs(), 1e-12);
}

TEST(Verify, VolumeIsPreservedForEveryPotential) {
  std::mt19937_64 rng(12);
  for (Family f : kAllFamilies) {
    auto s = make(f);
    TorusGrid g = grid_for(s, base_dim(s) == 2 ? 16 : 8);
    if (f == Family::WARPED)
      s.h = ScalarField::sample(g, [](std::span<const double> x) { return 0.3 * std::sin(kTwoPi * x[0]); });
    if (f == Family::WARPED_T3)
      s.h = ScalarField::sample(g, [](std::span<const double> x) { return 0.2 * std::cos(kTwoPi * x[1]); });
    for (int trial = 0; trial < 3; ++trial) {
      auto u = TrigPoly::random(base_dim(s), 1, 4, 0.004, rng).field(g);
      EXPECT_LT(volume_defect(u, s), 1e-10) << family_name(f) << " trial " << trial;
    }
  }
}

TEST(Verify, PositivityTracksEllipticity) {
  // scaling one potential up moves it out of the elliptic branch; both
  // indicators must flip at the same time
  TorusGrid g({16, 16});
  auto base = sample2(g, [](double x, double y) { return std::sin(kTwoPi * x) * std::cos(kTwoPi * y) / (kTwoPi * kTwoPi); });
  for (Family f : {Family::STDMA, Family::GENMA, Family::WARPED}) {
    auto s = make(f);
    for (double a : {0.1, 0.4, 0.8, 1.2, 2.0, 3.0}) {
      ScalarField u = a * base;
      const bool positive = positivity_margin(u, s) > 0.0;
      const bool elliptic = ellipticity_report(s, u).min_eigenvalue > 0.0;
      EXPECT_EQ(positive, elliptic) << family_name(f) << " amplitude " << a;
    }
  }
}

TEST(Verify, ConvergedStdmaRunPasses) {
  TorusGrid g({64, 64});
  auto s = make(Family::STDMA);
  auto F = normalize_datum(s, sample2(g, [](double x, double y) {
                             return 0.8 * std::sin(kTwoPi * x) * std::sin(kTwoPi * y);
                           }));
  SolverConfig cfg;
  auto run = continuity_solve(s, F, cfg);
  ASSERT_EQ(run.status, SolveStatus::Converged);
  auto r = verify_solution(run.u, F, s, 100 * cfg.newton_tolerance);
  EXPECT_TRUE(r.pass);
  EXPECT_LE(r.topform_residual, 1e-8);
  EXPECT_LE(r.potential_defect, 1e-8);
  EXPECT_LT(r.anti_invariant_norm, 1e-12);
  EXPECT_GT(r.positivity_margin, 0.0);
}

TEST(Verify, GenmaCorrectionFeedsTheEquation) {
  TorusGrid g({32, 32});
  auto s = make(Family::GENMA);
  auto F = normalize_datum(s, sample2(g, [](double x, double y) {
                             return 0.5 * std::cos(kTwoPi * x) * std::sin(kTwoPi * y);
                           }));
  auto run = continuity_solve(s, F, SolverConfig{});
  ASSERT_EQ(run.status, SolveStatus::Converged);
  auto r = verify_solution(run.u, F, s, 1e-8);
  EXPECT_TRUE(r.pass);
  EXPECT_GT(r.potential_defect, 1e-4);
}

TEST(Verify, WrongDatumFails) {
  TorusGrid g({16, 16});
  auto s = make(Family::STDMA);
  auto u_star = sample2(g, [](double x, double y) { return 0.01 * std::sin(kTwoPi * x) * std::cos(kTwoPi * y); });
  auto F = manufactured_datum(s, u_star);
  EXPECT_TRUE(verify_solution(u_star, F, s, 1e-10).pass);
  auto r = verify_solution(u_star, F + 0.01, s, 1e-10);
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.topform_residual, 5e-3);
  EXPECT_THROW(verify_solution(u_star, ScalarField(TorusGrid({8, 8})), s, 1e-10), EquationError);
}
