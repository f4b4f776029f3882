#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "torus_ma/equations.hpp"

using namespace torus_ma;
using torus_ma::testing::max_rel_error;
using torus_ma::testing::TrigPoly;

namespace {

// A 2-D polynomial read on a 3-D grid through the given axis pair.
ScalarField lift(const TrigPoly& p, const TorusGrid& g3, int a, int b, std::vector<int> orders = {0, 0}) {
  return ScalarField::sample(g3, [&](std::span<const double> x) { return p.eval({x[a], x[b]}, orders); });
}

EquationSpec make(Family f) {
  EquationSpec s;
  s.family = f;
  return s;
}

TorusGrid grid_for(const EquationSpec& s, int n) { return TorusGrid(std::vector<int>(base_dim(s), n)); }

// One spec per family with nontrivial parameters; h fields drawn from rng.
std::vector<EquationSpec> sample_specs(int n, std::mt19937_64& rng) {
  std::vector<EquationSpec> out;
  for (Family f : kAllFamilies) {
    EquationSpec s = make(f);
    if (f == Family::LAGR_X1X2) {
      s.l1 = 0.7;
      s.l2 = 1.6;
    }
    if (f == Family::LAGR_X2Y1) {
      s.l1 = -1.3;
      s.l2 = -0.8;
      s.m1 = 0.4;
      s.m2 = -0.9;
    }
    if (f == Family::WARPED) {
      s.c = 1.0;
      TorusGrid g = grid_for(s, n);
      auto hp = TrigPoly::random(1, 2, 3, 0.4, rng);
      s.h = ScalarField::sample(g, [&](std::span<const double> x) { return hp.eval({x[0]}, {0}); });
    }
    if (f == Family::WARPED_T3) {
      TorusGrid g = grid_for(s, n);
      s.h = lift(TrigPoly::random(2, 2, 4, 0.4, rng), g, 0, 2);
    }
    if (f == Family::NDIM_FULL || f == Family::NDIM_HESSIAN || f == Family::NDIM_B) s.n = 3;
    out.push_back(std::move(s));
  }
  return out;
}

int grid_n(const EquationSpec& s) { return base_dim(s) >= 4 ? 8 : 16; }

}  // namespace

TEST(Residual, FlatPointIsOne) {
  std::mt19937_64 rng(1);
  for (const auto& s : sample_specs(16, rng)) {
    TorusGrid g = grid_for(s, grid_n(s));
    ScalarField zero(g);
    ScalarField expect(g, 1.0);
    if (s.family == Family::WARPED) expect = exp(-*s.h);
    EXPECT_LT(max_abs_diff(residual(s, zero), expect), 1e-13) << family_name(s.family);
    EXPECT_LT(max_abs_diff(residual_geom(s, zero), expect), 1e-13) << family_name(s.family);
  }
}

TEST(Residual, GenmaSineInY1) {
  TorusGrid g({32, 32});
  const double a = 0.02;
  auto u = ScalarField::sample(g, [&](std::span<const double> x) { return a * std::sin(kTwoPi * x[1]); });
  auto expect = ScalarField::sample(g, [&](std::span<const double> x) {
    return 1.0 - kTwoPi * kTwoPi * a * std::sin(kTwoPi * x[1]) + kTwoPi * a * std::cos(kTwoPi * x[1]);
  });
  EXPECT_LT(max_abs_diff(residual(make(Family::GENMA), u), expect), 1e-13);
}

TEST(Residual, DetaT3MatchesAnalyticDeterminant) {
  std::mt19937_64 rng(2);
  TorusGrid g({16, 16, 16});
  auto p = TrigPoly::random(3, 3, 10, 0.05, rng);
  auto u = p.field(g);
  auto u11 = p.d2(g, 0, 0), u22 = p.d2(g, 1, 1), uyy = p.d2(g, 2, 2), uy = p.d1(g, 2);
  auto u12 = p.d2(g, 0, 1), u2y = p.d2(g, 1, 2);
  auto oracle = (1.0 + u11 + uyy + uy) * (1.0 + u22) - u12 * u12 - u2y * u2y;
  auto s = make(Family::DETA_T3);
  EXPECT_LT(max_rel_error(residual(s, u), oracle), 1e-10);
  EXPECT_LT(max_rel_error(residual_geom(s, u), oracle), 1e-10);
}

TEST(Residual, WarpedT3MatchesAnalyticDeterminant) {
  std::mt19937_64 rng(3);
  TorusGrid g({16, 16, 16});
  auto hp = TrigPoly::random(2, 2, 5, 0.5, rng);
  auto h = lift(hp, g, 0, 2), h1 = lift(hp, g, 0, 2, {1, 0}), hy = lift(hp, g, 0, 2, {0, 1});
  auto p = TrigPoly::random(3, 3, 10, 0.05, rng);
  auto u = p.field(g);
  auto eh = exp(h), emh = exp(-h);
  auto a11 = eh * p.d2(g, 0, 0) + emh * p.d2(g, 2, 2) + p.d1(g, 2) + eh * h1 * p.d1(g, 0) -
             emh * hy * p.d1(g, 2);
  auto u12 = p.d2(g, 0, 1), u2y = p.d2(g, 1, 2);
  auto oracle = (1.0 + a11) * (1.0 + p.d2(g, 1, 1)) - eh * u12 * u12 - emh * u2y * u2y;
  auto s = make(Family::WARPED_T3);
  s.h = h;
  EXPECT_LT(max_rel_error(residual(s, u), oracle), 1e-10);
  EXPECT_LT(max_rel_error(residual_geom(s, u), oracle), 1e-10);
}

TEST(Residual, OracleEquivalenceAllFamilies) {
  std::mt19937_64 rng(4);
  for (const auto& s : sample_specs(16, rng)) {
    if (s.family == Family::NDIM_FULL) continue;  // residual is the geometric route itself
    TorusGrid g = grid_for(s, grid_n(s));
    for (int trial = 0; trial < 3; ++trial) {
      auto u = TrigPoly::random(g.dim(), 2, 8, 0.02, rng).field(g);
      EXPECT_LT(max_rel_error(residual(s, u), residual_geom(s, u)), 1e-10) << family_name(s.family);
    }
  }
}

TEST(Residual, WarpedBothRealizationsAgreeAtZeroTwist) {
  std::mt19937_64 rng(5);
  TorusGrid g({16, 16});
  auto s = make(Family::WARPED);
  auto hp = TrigPoly::random(1, 2, 3, 0.5, rng);
  s.h = ScalarField::sample(g, [&](std::span<const double> x) { return hp.eval({x[0]}, {0}); });
  auto u = TrigPoly::random(2, 3, 8, 0.03, rng).field(g);
  EXPECT_LT(max_rel_error(residual_geom(s, u, WarpedRealization::BaseX1), residual(s, u)), 1e-10);
  EXPECT_LT(max_rel_error(residual_geom(s, u, WarpedRealization::FiberY1), residual(s, u)), 1e-10);
  s.c = 1.0;
  EXPECT_THROW(residual_geom(s, u, WarpedRealization::BaseX1), EquationError);
}

TEST(Residual, WarpedRewriteFromX1Reduction) {
  // h = h(x1), u = u(x1, x2): the 3-torus residual is e^h times WARPED(c = 0).
  std::mt19937_64 rng(6);
  TorusGrid g3({16, 16, 16}), g2({16, 16});
  auto hp = TrigPoly::random(1, 2, 3, 0.5, rng);
  auto up = TrigPoly::random(2, 3, 8, 0.03, rng);
  auto t3 = make(Family::WARPED_T3);
  t3.h = ScalarField::sample(g3, [&](std::span<const double> x) { return hp.eval({x[0]}, {0}); });
  auto w = make(Family::WARPED);
  w.h = ScalarField::sample(g2, [&](std::span<const double> x) { return hp.eval({x[0]}, {0}); });
  auto r3 = residual(t3, lift(up, g3, 0, 1));
  auto r2 = residual(w, up.field(g2));
  ScalarField r2_on_3(g3);
  for (std::size_t i = 0; i < g3.total(); ++i) {
    const std::size_t i0 = g3.index_along(i, 0), i1 = g3.index_along(i, 1);
    r2_on_3[i] = r2[i0 * g2.stride(0) + i1];
  }
  EXPECT_LT(max_rel_error(r3, exp(*t3.h) * r2_on_3), 1e-10);
}

TEST(Residual, WarpedRewriteFromY1Reduction) {
  // h = h(y1), u = u(x2, y1): the 3-torus residual is e^{-h} times WARPED
  // with h -> -h, c = 1 and (x, y) = (y1, x2).
  std::mt19937_64 rng(7);
  TorusGrid g3({16, 16, 16}), g2({16, 16});
  auto hp = TrigPoly::random(1, 2, 3, 0.5, rng);
  auto up = TrigPoly::random(2, 3, 8, 0.03, rng);  // variables (y1, x2)
  auto t3 = make(Family::WARPED_T3);
  t3.h = ScalarField::sample(g3, [&](std::span<const double> x) { return hp.eval({x[2]}, {0}); });
  auto w = make(Family::WARPED);
  w.c = 1.0;
  w.h = ScalarField::sample(g2, [&](std::span<const double> x) { return -hp.eval({x[0]}, {0}); });
  auto r3 = residual(t3, lift(up, g3, 2, 1));
  auto r2 = residual(w, up.field(g2));
  ScalarField r2_on_3(g3);
  for (std::size_t i = 0; i < g3.total(); ++i) {
    const std::size_t iy = g3.index_along(i, 2), ix2 = g3.index_along(i, 1);
    r2_on_3[i] = r2[iy * g2.stride(0) + ix2];
  }
  EXPECT_LT(max_rel_error(r3, exp(-*t3.h) * r2_on_3), 1e-10);
}

TEST(Residual, Aliases) {
  std::mt19937_64 rng(8);
  TorusGrid g({16, 16});
  auto lx = make(Family::LAGR_X1X2);
  auto ly = make(Family::LAGR_X2Y1);
  ly.m2 = 1.0;
  for (int t = 0; t < 3; ++t) {
    auto u = TrigPoly::random(2, 3, 8, 0.03, rng).field(g);
    EXPECT_LT(max_abs_diff(residual(make(Family::STDMA), u), residual(lx, u)), 1e-12);
    EXPECT_LT(max_abs_diff(residual(make(Family::GENMA), u), residual(ly, u)), 1e-12);
    EXPECT_LT(max_rel_error(residual_geom(make(Family::GENMA), u), residual_geom(ly, u)), 1e-11);
  }
}

TEST(Residual, NdimFamiliesMatchHermitianDeterminant) {
  // NDIM_HESSIAN: det(I + Hess u); NDIM_B on (y1, x2, x3): the y1 entry
  // gains u_y1, mixed y1 entries enter as imaginary parts (same determinant).
  std::mt19937_64 rng(9);
  TorusGrid g({8, 8, 8});
  auto p = TrigPoly::random(3, 2, 6, 0.05, rng);
  auto u = p.field(g);
  for (Family f : {Family::NDIM_HESSIAN, Family::NDIM_B}) {
    auto s = make(f);
    ScalarField oracle(g);
    std::vector<double> x(3);
    for (std::size_t i = 0; i < g.total(); ++i) {
      for (int a = 0; a < 3; ++a) x[a] = g.coordinate(i, a);
      Eigen::Matrix3d M = Eigen::Matrix3d::Identity();
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          std::vector<int> o(3, 0);
          o[a]++;
          o[b]++;
          M(a, b) += p.eval(x, o);
        }
      if (f == Family::NDIM_B) M(0, 0) += p.eval(x, {1, 0, 0});
      oracle[i] = M.determinant();
    }
    EXPECT_LT(max_rel_error(residual(s, u), oracle), 1e-10) << family_name(f);
    EXPECT_LT(max_rel_error(residual_geom(s, u), oracle), 1e-10) << family_name(f);
  }
}

TEST(Residual, NdimPrintedFormulaIsComputable) {
  std::mt19937_64 rng(10);
  TorusGrid g({8, 8, 8, 8});
  ScalarField zero(g);
  EXPECT_LT(max_abs_diff(ndim_printed(zero, 3, PrintedReading::Example), ScalarField(g, 1.0)), 1e-14);
  EXPECT_LT(max_abs_diff(ndim_printed(zero, 3, PrintedReading::Literal), ScalarField(g, 1.0)), 1e-14);
  // u without y1 dependence: every reading collapses to det(I + Hess)
  auto p = TrigPoly::random(3, 2, 6, 0.05, rng);
  auto u = ScalarField::sample(g, [&](std::span<const double> x) { return p.eval({x[0], x[1], x[2]}, {0, 0, 0}); });
  auto s = make(Family::NDIM_FULL);
  EXPECT_LT(max_rel_error(ndim_printed(u, 3, PrintedReading::Example), residual(s, u)), 1e-10);
  EXPECT_THROW(ndim_printed(u, 4, PrintedReading::Example), EquationError);
}

TEST(Residual, ValidationErrors) {
  EXPECT_THROW(residual(make(Family::STDMA), ScalarField(TorusGrid({8, 8, 8}))), EquationError);
  auto s = make(Family::LAGR_X1X2);
  s.l1 = -1.0;
  EXPECT_THROW(residual(s, ScalarField(TorusGrid({8, 8}))), EquationError);
  s.l1 = 0.0;
  EXPECT_THROW(residual(s, ScalarField(TorusGrid({8, 8}))), EquationError);
  auto w = make(Family::WARPED);
  w.h = ScalarField(TorusGrid({16, 16}));
  EXPECT_THROW(residual(w, ScalarField(TorusGrid({8, 8}))), EquationError);
  EXPECT_EQ(parse_family("WARPED_T3"), Family::WARPED_T3);
  EXPECT_FALSE(parse_family("warped").has_value());
}

TEST(Linearize, StdmaAtFlatPointIsLaplacian) {
  std::mt19937_64 rng(11);
  TorusGrid g({16, 16});
  auto w = TrigPoly::random(2, 4, 8, 1.0, rng);
  EXPECT_LT(max_abs_diff(linearize_apply(make(Family::STDMA), ScalarField(g), w.field(g)),
                         w.d2(g, 0, 0) + w.d2(g, 1, 1)),
            1e-9);
}

TEST(Linearize, WarpedMatchesDisplayedOperator) {
  std::mt19937_64 rng(12);
  TorusGrid g({16, 16});
  auto s = make(Family::WARPED);
  s.c = 1.0;
  auto hp = TrigPoly::random(1, 2, 3, 0.3, rng);
  auto h = ScalarField::sample(g, [&](std::span<const double> x) { return hp.eval({x[0]}, {0}); });
  auto hx = ScalarField::sample(g, [&](std::span<const double> x) { return hp.eval({x[0]}, {1}); });
  s.h = h;
  auto up = TrigPoly::random(2, 3, 8, 0.03, rng), wp = TrigPoly::random(2, 3, 8, 1.0, rng);
  auto first = s.c * exp(-h) + hx;
  auto uxx = up.d2(g, 0, 0), uyy = up.d2(g, 1, 1), uxy = up.d2(g, 0, 1), ux = up.d1(g, 0);
  auto expect = (wp.d2(g, 0, 0) + first * wp.d1(g, 0)) * (1.0 + uyy) +
                (exp(-h) + uxx + first * ux) * wp.d2(g, 1, 1) - 2.0 * uxy * wp.d2(g, 0, 1);
  EXPECT_LT(max_rel_error(linearize_apply(s, up.field(g), wp.field(g)), expect), 1e-10);
}

TEST(Linearize, TaylorRemainderIsQuadraticForEveryFamily) {
  std::mt19937_64 rng(13);
  for (const auto& s : sample_specs(16, rng)) {
    TorusGrid g = grid_for(s, grid_n(s));
    auto u = TrigPoly::random(g.dim(), 1, 6, 0.004, rng).field(g);
    ASSERT_GT(ellipticity_field(s, u).min(), 0.0) << family_name(s.family);
    auto w = TrigPoly::random(g.dim(), 2, 6, 0.01, rng).field(g);
    auto r0 = residual(s, u);
    auto lw = linearize_apply(s, u, w);
    std::vector<double> rem;
    for (double eps : {4e-3, 2e-3, 1e-3}) rem.push_back((residual(s, u + eps * w) - r0 - eps * lw).max_abs());
    for (std::size_t k = 0; k + 1 < rem.size(); ++k) {
      const double slope = std::log2(rem[k] / rem[k + 1]);
      EXPECT_GE(slope, 1.9) << family_name(s.family);
      EXPECT_LE(slope, 2.1) << family_name(s.family);
    }
  }
}

TEST(MassIdentity, StdmaResidualIntegratesToOne) {
  std::mt19937_64 rng(14);
  TorusGrid g({32, 32});
  for (int t = 0; t < 10; ++t) {
    auto u = TrigPoly::random(2, 4, 12, 0.05, rng).field(g);
    EXPECT_NEAR(integrate(residual(make(Family::STDMA), u)), 1.0, 1e-11);
  }
}

TEST(ManufacturedDatum, Examples) {
  TorusGrid g({32, 32});
  EXPECT_LT(manufactured_datum(make(Family::STDMA), ScalarField(g)).max_abs(), 1e-15);
  std::mt19937_64 rng(15);
  auto s = make(Family::WARPED);
  s.c = 1.0;
  s.h = ScalarField::sample(g, [](std::span<const double> x) { return 0.3 * std::sin(kTwoPi * x[0]); });
  auto u = TrigPoly::random(2, 1, 6, 0.02, rng).field(g);
  auto F = manufactured_datum(s, u);
  EXPECT_LT(max_rel_error(residual(s, u), exp(F - *s.h)), 1e-13);
  EXPECT_LT(max_abs_diff(datum_to_exponent(s, F), F - *s.h), 1e-15);
  // leaves the branch: u_xx = -3 somewhere
  auto bad = ScalarField::sample(g, [](std::span<const double> x) {
    return 3.0 / (kTwoPi * kTwoPi) * std::cos(kTwoPi * x[0]);
  });
  EXPECT_THROW(manufactured_datum(make(Family::STDMA), bad), EquationError);
}

TEST(NormalizeDatum, Examples) {
  TorusGrid g({32, 32});
  auto s = make(Family::STDMA);
  auto sine = ScalarField::sample(g, [](std::span<const double> x) { return std::sin(kTwoPi * x[0]); });
  // quadrature oracle: I0(1) from its power series
  double i0 = 0.0, term = 1.0;
  for (int k = 0; k < 30; ++k) {
    i0 += term;
    term *= 0.25 / ((k + 1.0) * (k + 1.0));
  }
  EXPECT_LT(max_abs_diff(normalize_datum(s, sine), sine - std::log(i0)), 1e-12);
  EXPECT_LT(max_abs_diff(normalize_datum(s, ScalarField(g, 2.5)), ScalarField(g)), 1e-15);
  auto n = normalize_datum(s, sine);
  EXPECT_LT(max_abs_diff(normalize_datum(s, n), n), 1e-14);
  EXPECT_NEAR(datum_mass(n), 1.0, 1e-14);
  // large offsets stay finite
  EXPECT_NEAR(datum_mass(normalize_datum(s, sine + 800.0)), 1.0, 1e-13);
}

TEST(Ellipticity, FlatPointAndNegativeCurvature) {
  TorusGrid g({32, 32});
  EXPECT_NEAR(ellipticity_field(make(Family::STDMA), ScalarField(g)).min(), 1.0, 1e-14);
  auto bad = ScalarField::sample(g, [](std::span<const double> x) {
    return 3.0 / (kTwoPi * kTwoPi) * std::cos(kTwoPi * x[0]);
  });
  EXPECT_NEAR(ellipticity_field(make(Family::STDMA), bad).min(), -2.0, 1e-12);
  auto neg = make(Family::LAGR_X1X2);
  neg.l1 = neg.l2 = -1.0;
  EXPECT_NEAR(ellipticity_field(neg, ScalarField(g)).min(), 1.0, 1e-14);
}
