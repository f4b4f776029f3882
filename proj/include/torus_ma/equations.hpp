#pragma once

// Catalog of the reduced scalar equations residual(u) = e^G on tori, each
// paired with a geometric realization on a nilmanifold coframe so that the
// scalar formula can be checked against (Omega + d alpha)^n / Omega^n.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "torus_ma/grid.hpp"
#include "torus_ma/nilframe.hpp"

namespace torus_ma {

enum class Family {
  STDMA,
  GENMA,
  LAGR_X1X2,
  LAGR_X2Y1,
  WARPED,
  DETA_T3,
  WARPED_T3,
  NDIM_FULL,
  NDIM_HESSIAN,
  NDIM_B,
};

inline constexpr std::array kAllFamilies = {
    Family::STDMA,   Family::GENMA,     Family::LAGR_X1X2, Family::LAGR_X2Y1,    Family::WARPED,
    Family::DETA_T3, Family::WARPED_T3, Family::NDIM_FULL, Family::NDIM_HESSIAN, Family::NDIM_B,
};

inline std::string family_name(Family f) {
  switch (f) {
    case Family::STDMA: return "STDMA";
    case Family::GENMA: return "GENMA";
    case Family::LAGR_X1X2: return "LAGR_X1X2";
    case Family::LAGR_X2Y1: return "LAGR_X2Y1";
    case Family::WARPED: return "WARPED";
    case Family::DETA_T3: return "DETA_T3";
    case Family::WARPED_T3: return "WARPED_T3";
    case Family::NDIM_FULL: return "NDIM_FULL";
    case Family::NDIM_HESSIAN: return "NDIM_HESSIAN";
    case Family::NDIM_B: return "NDIM_B";
  }
  return "?";
}

inline std::optional<Family> parse_family(const std::string& s) {
  for (Family f : kAllFamilies)
    if (family_name(f) == s) return f;
  return std::nullopt;
}

class EquationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EquationSpec {
  Family family = Family::STDMA;
  double l1 = 1.0, l2 = 1.0;
  double m1 = 0.0, m2 = 0.0;
  double c = 0.0;
  // WARPED: h(x) sampled on the 2-D grid; WARPED_T3: h(x1, y1) on the 3-D grid.
  std::optional<ScalarField> h;
  // half-dimension for the NDIM families
  int n = 3;
  // Explicit coframe for the LAGR families; derived from (l, m) when absent.
  std::optional<LagrangianCoframe> coframe;
};

inline int base_dim(const EquationSpec& s) {
  switch (s.family) {
    case Family::STDMA:
    case Family::GENMA:
    case Family::LAGR_X1X2:
    case Family::LAGR_X2Y1:
    case Family::WARPED: return 2;
    case Family::DETA_T3:
    case Family::WARPED_T3: return 3;
    case Family::NDIM_FULL: return s.n + 1;
    case Family::NDIM_HESSIAN:
    case Family::NDIM_B: return s.n;
  }
  return 0;
}

/// Names of the base coordinates, one per grid axis.
inline std::vector<std::string> coordinate_names(const EquationSpec& s) {
  switch (s.family) {
    case Family::STDMA:
    case Family::LAGR_X1X2: return {"x1", "x2"};
    case Family::GENMA:
    case Family::LAGR_X2Y1: return {"x2", "y1"};
    case Family::WARPED: return {"x", "y"};
    case Family::DETA_T3:
    case Family::WARPED_T3: return {"x1", "x2", "y1"};
    case Family::NDIM_FULL: {
      std::vector<std::string> v;
      for (int k = 1; k <= s.n; ++k) v.push_back("x" + std::to_string(k));
      v.push_back("y1");
      return v;
    }
    case Family::NDIM_HESSIAN: {
      std::vector<std::string> v;
      for (int k = 1; k <= s.n; ++k) v.push_back("x" + std::to_string(k));
      return v;
    }
    case Family::NDIM_B: {
      std::vector<std::string> v{"y1"};
      for (int k = 2; k <= s.n; ++k) v.push_back("x" + std::to_string(k));
      return v;
    }
  }
  return {};
}

/// Sign of the definite branch: -1 for the negative-l Lagrangian families.
inline int branch_sign(const EquationSpec& s) {
  if (s.family == Family::LAGR_X1X2 || s.family == Family::LAGR_X2Y1) return s.l1 < 0 ? -1 : 1;
  return 1;
}

inline void validate(const EquationSpec& s, const TorusGrid& g) {
  if (s.family == Family::NDIM_FULL || s.family == Family::NDIM_HESSIAN || s.family == Family::NDIM_B) {
    if (s.n < 2) throw EquationError("NDIM families need n >= 2");
  }
  if (g.dim() != base_dim(s))
    throw EquationError(family_name(s.family) + " needs a " + std::to_string(base_dim(s)) +
                        "-dimensional grid, got " + std::to_string(g.dim()));
  if (s.family == Family::LAGR_X1X2 || s.family == Family::LAGR_X2Y1) {
    if (!(s.l1 * s.l2 > 0.0)) throw EquationError("l1 and l2 must be nonzero with the same sign");
  }
  if (s.family == Family::WARPED || s.family == Family::WARPED_T3) {
    if (s.h && !(s.h->grid() == g)) throw EquationError("h lives on a different grid than u");
  }
}

/// All first and second partials of a field from one forward transform.
struct Derivatives {
  std::vector<ScalarField> d1;
  std::vector<std::vector<ScalarField>> d2;

  explicit Derivatives(const ScalarField& u) {
    const int d = u.grid().dim();
    Spectrum s(u);
    for (int a = 0; a < d; ++a) d1.push_back(s.derivative(a, 1));
    d2.assign(d, std::vector<ScalarField>(d));
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) {
        d2[a][b] = a == b ? s.derivative(a, 2) : s.mixed(a, b);
        if (a != b) d2[b][a] = d2[a][b];
      }
  }
};

namespace detail {

inline ScalarField h_or_zero(const EquationSpec& s, const TorusGrid& g) {
  return s.h ? *s.h : ScalarField(g, 0.0);
}

// P = p0 + u_xx + px u_x + py u_y,  Q = q0 + u_yy + qx u_x + qy u_y,
// residual = K (P Q - u_xy^2).
struct PlanarForm {
  double K = 1.0;
  ScalarField p0, px, py, q0, qx, qy;
};

inline PlanarForm planar_form(const EquationSpec& s, const TorusGrid& g) {
  PlanarForm f{1.0, ScalarField(g, 1.0), ScalarField(g), ScalarField(g),
               ScalarField(g, 1.0), ScalarField(g), ScalarField(g)};
  switch (s.family) {
    case Family::STDMA: break;
    case Family::GENMA: f.qy = ScalarField(g, 1.0); break;
    case Family::LAGR_X1X2:
      f.K = 1.0 / (s.l1 * s.l2);
      f.p0 = ScalarField(g, s.l1);
      f.q0 = ScalarField(g, s.l2);
      break;
    case Family::LAGR_X2Y1:
      f.K = 1.0 / (s.l1 * s.l2);
      f.p0 = ScalarField(g, s.l1);
      f.q0 = ScalarField(g, s.l2);
      f.qx = ScalarField(g, s.m1);
      f.qy = ScalarField(g, s.m2);
      break;
    case Family::WARPED: {
      ScalarField h = h_or_zero(s, g);
      ScalarField emh = exp(-h);
      f.p0 = emh;
      f.px = s.c * emh + derivative(h, 0, 1);
      break;
    }
    default: throw EquationError("not a planar family");
  }
  return f;
}

inline bool is_planar(Family f) {
  return f == Family::STDMA || f == Family::GENMA || f == Family::LAGR_X1X2 ||
         f == Family::LAGR_X2Y1 || f == Family::WARPED;
}
inline bool is_t3(Family f) { return f == Family::DETA_T3 || f == Family::WARPED_T3; }
inline bool is_matrix(Family f) { return f == Family::NDIM_HESSIAN || f == Family::NDIM_B; }

struct PlanarValues {
  ScalarField P, Q;
};

inline PlanarValues planar_values(const PlanarForm& f, const Derivatives& D) {
  ScalarField P = f.p0 + D.d2[0][0] + f.px * D.d1[0] + f.py * D.d1[1];
  ScalarField Q = f.q0 + D.d2[1][1] + f.qx * D.d1[0] + f.qy * D.d1[1];
  return {std::move(P), std::move(Q)};
}

// Axes (x1, x2, y1) = (0, 1, 2).
// A11 = e^h u11 + e^-h uyy + uy + e^h h1 u1 - e^-h hy uy,
// residual = (1 + A11)(1 + u22) - e^h u12^2 - e^-h u2y^2.
struct T3Form {
  ScalarField eh, emh, first1, firsty;
};

inline T3Form t3_form(const EquationSpec& s, const TorusGrid& g) {
  ScalarField h = h_or_zero(s, g);
  ScalarField eh = exp(h), emh = exp(-h);
  ScalarField first1 = eh * derivative(h, 0, 1);
  ScalarField firsty = 1.0 + (-1.0) * (emh * derivative(h, 2, 1));
  return {eh, emh, first1, firsty};
}

inline ScalarField t3_a11(const T3Form& f, const Derivatives& D) {
  return f.eh * D.d2[0][0] + f.emh * D.d2[2][2] + f.first1 * D.d1[0] + f.firsty * D.d1[2];
}

/// Pointwise I + B(u) for the Hessian-type families; NDIM_B adds u_{z1} to
/// the (1,1) entry.
inline Eigen::MatrixXd matrix_at(const EquationSpec& s, const Derivatives& D, std::size_t p) {
  const int d = static_cast<int>(D.d1.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) M(a, b) += D.d2[a][b][p];
  if (s.family == Family::NDIM_B) M(0, 0) += D.d1[0][p];
  return M;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Geometric realizations.

enum class WarpedRealization {
  // h = h(y1), u = u(x2, y1), x = y1: any c, via df2 = -c e1^e2.
  FiberY1,
  // h = h(x1), u = u(x1, x2): c = 0 only.
  BaseX1,
};

struct Geometry {
  NilStructure structure;
  AnsatzSpec ansatz;
  // residual_geom = weight * top_form_ratio
  ScalarField weight;
};

/// Coframe parameters realizing a LAGR family with the given (l, m) exactly.
inline LagrangianCoframe coframe_for(const EquationSpec& s) {
  if (s.coframe) return *s.coframe;
  LagrangianCoframe p;
  p.sign = s.l1 < 0 ? -1 : 1;
  p.A = 1.0 / std::sqrt(std::abs(s.l1));
  p.C = 1.0 / std::sqrt(std::abs(s.l2));
  p.B = 0.0;
  if (s.family == Family::LAGR_X2Y1) {
    p.lambda = s.m1 * p.C * p.C / p.A;
    p.kappa = -s.m2 * p.C;
  }
  return p;
}

inline Geometry geometry_for(const EquationSpec& s, const TorusGrid& g,
                             WarpedRealization warped = WarpedRealization::FiberY1) {
  validate(s, g);
  Geometry geo{NilStructure{}, AnsatzSpec{}, ScalarField(g, 1.0)};
  switch (s.family) {
    case Family::STDMA:
      geo.structure = kodaira_thurston(g, {kE1, kE2});
      geo.ansatz = kodaira_thurston_ansatz(g);
      break;
    case Family::GENMA:
      geo.structure = kodaira_thurston(g, {kE2, kF1});
      geo.ansatz = kodaira_thurston_ansatz(g);
      break;
    case Family::LAGR_X1X2: {
      auto p = coframe_for(s);
      geo.structure = lagrangian_x1x2(g, p);
      geo.ansatz = lagrangian_x1x2_ansatz(g, p);
      break;
    }
    case Family::LAGR_X2Y1: {
      auto p = coframe_for(s);
      geo.structure = lagrangian_x2y1(g, p);
      geo.ansatz = lagrangian_x2y1_ansatz(g, p);
      break;
    }
    case Family::WARPED: {
      ScalarField h = detail::h_or_zero(s, g);
      if (warped == WarpedRealization::FiberY1) {
        geo.structure = kodaira_thurston(g, {kF1, kE2}, -h, s.c);
        geo.ansatz = kodaira_thurston_ansatz(g, s.c);
      } else {
        if (s.c != 0.0) throw EquationError("the base-x1 realization of WARPED requires c = 0");
        geo.structure = kodaira_thurston(g, {kE1, kE2}, h);
        geo.ansatz = kodaira_thurston_ansatz(g);
      }
      geo.weight = exp(-h);
      break;
    }
    case Family::DETA_T3:
      geo.structure = kodaira_thurston(g, {kE1, kE2, kF1});
      geo.ansatz = kodaira_thurston_ansatz(g);
      break;
    case Family::WARPED_T3:
      geo.structure = kodaira_thurston(g, {kE1, kE2, kF1}, detail::h_or_zero(s, g));
      geo.ansatz = kodaira_thurston_ansatz(g);
      break;
    case Family::NDIM_FULL: {
      std::vector<int> axes;
      for (int k = 0; k < s.n; ++k) axes.push_back(k);
      axes.push_back(s.n);
      geo.structure = generalized_nilmanifold(g, s.n, axes);
      geo.ansatz = generalized_nilmanifold_ansatz(g);
      break;
    }
    case Family::NDIM_HESSIAN: {
      std::vector<int> axes;
      for (int k = 0; k < s.n; ++k) axes.push_back(k);
      geo.structure = generalized_nilmanifold(g, s.n, axes);
      geo.ansatz = generalized_nilmanifold_ansatz(g);
      break;
    }
    case Family::NDIM_B: {
      std::vector<int> axes{s.n};
      for (int k = 1; k < s.n; ++k) axes.push_back(k);
      geo.structure = generalized_nilmanifold(g, s.n, axes);
      geo.ansatz = generalized_nilmanifold_ansatz(g);
      break;
    }
  }
  return geo;
}

/// Omega + d(alpha(u)) on the family's coframe.
inline InvariantForm reconstruct_with(const Geometry& geo, const ScalarField& u) {
  return geo.structure.omega +
         exterior_derivative(ansatz_one_form(u, geo.structure, geo.ansatz), geo.structure);
}

// ---------------------------------------------------------------------------
// Residuals.

inline ScalarField residual_geom(const EquationSpec& s, const ScalarField& u,
                                 WarpedRealization warped = WarpedRealization::FiberY1) {
  Geometry geo = geometry_for(s, u.grid(), warped);
  return geo.weight * top_form_ratio(reconstruct_with(geo, u), geo.structure);
}

inline ScalarField residual(const EquationSpec& s, const ScalarField& u) {
  const TorusGrid& g = u.grid();
  validate(s, g);
  if (s.family == Family::NDIM_FULL) return residual_geom(s, u);
  Derivatives D(u);
  if (detail::is_planar(s.family)) {
    auto f = detail::planar_form(s, g);
    auto [P, Q] = detail::planar_values(f, D);
    return f.K * (P * Q - D.d2[0][1] * D.d2[0][1]);
  }
  if (detail::is_t3(s.family)) {
    auto f = detail::t3_form(s, g);
    ScalarField a = 1.0 + detail::t3_a11(f, D);
    ScalarField b = 1.0 + D.d2[1][1];
    return a * b - f.eh * D.d2[0][1] * D.d2[0][1] - f.emh * D.d2[1][2] * D.d2[1][2];
  }
  ScalarField r(g);
  parallel_for(g.total(), [&](std::size_t p) { r[p] = detail::matrix_at(s, D, p).determinant(); }, 512);
  return r;
}

enum class PrintedReading {
  // the worked n = 3 example
  Example,
  // the general-n summation read literally
  Literal,
};

/// The printed higher-dimensional residual, kept for comparison with the
/// exterior-algebra expansion. Axes are (x1..xn, y1); the (1,1) entry uses
/// u_{x1x1} + u_{y1y1} - u_{y1} as printed.
inline ScalarField ndim_printed(const ScalarField& u, int n, PrintedReading reading) {
  const TorusGrid& g = u.grid();
  if (g.dim() != n + 1) throw EquationError("ndim_printed needs an (n+1)-dimensional grid");
  if (reading == PrintedReading::Example && n != 3)
    throw EquationError("the worked example is for n = 3");
  Derivatives D(u);
  const int y = n;
  ScalarField r(g);
  for (std::size_t p = 0; p < g.total(); ++p) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) M(a, b) += D.d2[a][b][p];
    M(0, 0) += D.d2[y][y][p] - D.d1[y][p];
    double v = M.determinant();
    auto uxy = [&](int k) { return D.d2[k][y][p]; };  // k zero-based: x_{k+1}
    if (reading == PrintedReading::Example) {
      v -= D.d2[2][2][p] * uxy(1) * uxy(1) + D.d2[1][1][p] * uxy(2) * uxy(2) +
           2.0 * D.d2[1][2][p] * uxy(1) * uxy(2);
    } else {
      for (int k = 1; k < n; ++k)
        for (int m = 1; m < n; ++m) {
          double prod = 1.0;
          for (int rr = 1; rr < n; ++rr)
            for (int ss = 1; ss < n; ++ss)
              if (!(rr == k && ss == m)) prod *= D.d2[rr][ss][p];
          v -= prod * uxy(k) * uxy(m);
        }
    }
    r[p] = v;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Linearization.

/// Frechet derivative of residual at a fixed u, as a linear operator in w.
/// For all scalar-formula families it is a second-order differential
/// operator sum_{a<=b} A_ab w_ab + sum_a B_a w_a with coefficient fields
/// frozen at u.
class LinearizedResidual {
 public:
  struct SecondOrder {
    int a, b;
    ScalarField coeff;
  };
  struct FirstOrder {
    int a;
    ScalarField coeff;
  };

  LinearizedResidual(TorusGrid grid, std::vector<SecondOrder> second, std::vector<FirstOrder> first)
      : grid_(std::move(grid)), second_(std::move(second)), first_(std::move(first)) {}
  LinearizedResidual(TorusGrid grid, std::function<ScalarField(const ScalarField&)> custom)
      : grid_(std::move(grid)), custom_(std::move(custom)) {}

  ScalarField apply(const ScalarField& w) const {
    if (!(w.grid() == grid_)) throw EquationError("w lives on a different grid than u");
    if (custom_) return custom_(w);
    Spectrum sw(w);
    ScalarField r(grid_);
    for (const auto& t : second_) {
      ScalarField dw = t.a == t.b ? sw.derivative(t.a, 2) : sw.mixed(t.a, t.b);
      r += t.coeff * dw;
    }
    for (const auto& t : first_) r += t.coeff * sw.derivative(t.a, 1);
    return r;
  }

  bool has_coefficients() const { return !custom_; }
  const std::vector<SecondOrder>& second_order() const { return second_; }
  const std::vector<FirstOrder>& first_order() const { return first_; }

 private:
  TorusGrid grid_;
  std::vector<SecondOrder> second_;
  std::vector<FirstOrder> first_;
  std::function<ScalarField(const ScalarField&)> custom_;
};

inline LinearizedResidual linearize(const EquationSpec& s, const ScalarField& u) {
  const TorusGrid& g = u.grid();
  validate(s, g);
  if (s.family == Family::NDIM_FULL) {
    // d/de (omega + e d alpha(w))^n = n omega^{n-1} ^ d alpha(w)
    auto geo = std::make_shared<Geometry>(geometry_for(s, g));
    auto power = std::make_shared<InvariantForm>(
        wedge_power(reconstruct_with(*geo, u), geo->structure.n - 1));
    return LinearizedResidual(g, [geo, power](const ScalarField& w) {
      InvariantForm dalpha =
          exterior_derivative(ansatz_one_form(w, geo->structure, geo->ansatz), geo->structure);
      return static_cast<double>(geo->structure.n) *
             top_ratio_of(wedge(*power, dalpha), geo->structure);
    });
  }
  Derivatives D(u);
  std::vector<LinearizedResidual::SecondOrder> second;
  std::vector<LinearizedResidual::FirstOrder> first;
  if (detail::is_planar(s.family)) {
    auto f = detail::planar_form(s, g);
    auto [P, Q] = detail::planar_values(f, D);
    second.push_back({0, 0, f.K * Q});
    second.push_back({1, 1, f.K * P});
    second.push_back({0, 1, (-2.0 * f.K) * D.d2[0][1]});
    first.push_back({0, f.K * (f.px * Q + f.qx * P)});
    first.push_back({1, f.K * (f.py * Q + f.qy * P)});
  } else if (detail::is_t3(s.family)) {
    auto f = detail::t3_form(s, g);
    ScalarField a = 1.0 + detail::t3_a11(f, D);
    ScalarField b = 1.0 + D.d2[1][1];
    second.push_back({0, 0, f.eh * b});
    second.push_back({2, 2, f.emh * b});
    second.push_back({1, 1, a});
    second.push_back({0, 1, -2.0 * (f.eh * D.d2[0][1])});
    second.push_back({1, 2, -2.0 * (f.emh * D.d2[1][2])});
    first.push_back({0, f.first1 * b});
    first.push_back({2, f.firsty * b});
  } else {
    const int d = g.dim();
    std::vector<std::vector<ScalarField>> cof(d, std::vector<ScalarField>(d, ScalarField(g)));
    parallel_for(g.total(), [&](std::size_t p) {
      Eigen::MatrixXd M = detail::matrix_at(s, D, p);
      // adjugate of a symmetric matrix via LU: det * M^{-1}, falling back to
      // cofactors when M is singular.
      Eigen::MatrixXd adj(d, d);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
      if (lu.isInvertible()) {
        adj = lu.determinant() * lu.inverse();
      } else {
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) {
            Eigen::MatrixXd minor(d - 1, d - 1);
            for (int r = 0, rr = 0; r < d; ++r) {
              if (r == j) continue;
              for (int c = 0, cc = 0; c < d; ++c) {
                if (c == i) continue;
                minor(rr, cc++) = M(r, c);
              }
              ++rr;
            }
            adj(i, j) = ((i + j) % 2 ? -1.0 : 1.0) * (d > 1 ? minor.determinant() : 1.0);
          }
      }
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) cof[i][j][p] = adj(j, i);
    }, 512);
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) second.push_back({a, b, a == b ? cof[a][a] : cof[a][b] + cof[b][a]});
    if (s.family == Family::NDIM_B) first.push_back({0, cof[0][0]});
  }
  return LinearizedResidual(g, std::move(second), std::move(first));
}

inline ScalarField linearize_apply(const EquationSpec& s, const ScalarField& u, const ScalarField& w) {
  return linearize(s, u).apply(w);
}

// ---------------------------------------------------------------------------
// Ellipticity.

struct EllipticityReport {
  double min_eigenvalue = 0.0;
  // WARPED only: minima of e^h u_xx + (c + e^h h') u_x + 1 and of 1 + u_yy.
  std::optional<double> warped_x_quantity, warped_y_quantity;
};

/// Pointwise smallest eigenvalue of the family's symmetric coefficient
/// matrix, sign-adjusted so the solution branch is positive.
inline ScalarField ellipticity_field(const EquationSpec& s, const ScalarField& u) {
  const TorusGrid& g = u.grid();
  validate(s, g);
  ScalarField out(g);
  if (s.family == Family::NDIM_FULL) {
    Geometry geo = geometry_for(s, g);
    return compatibility_margin(reconstruct_with(geo, u), geo.structure);
  }
  Derivatives D(u);
  const double sign = branch_sign(s);
  if (detail::is_planar(s.family)) {
    auto f = detail::planar_form(s, g);
    auto [P, Q] = detail::planar_values(f, D);
    for (std::size_t p = 0; p < g.total(); ++p) {
      const double a = sign * P[p], c = sign * Q[p], b = sign * D.d2[0][1][p];
      out[p] = 0.5 * (a + c) - std::hypot(0.5 * (a - c), b);
    }
    return out;
  }
  if (detail::is_t3(s.family)) {
    auto f = detail::t3_form(s, g);
    ScalarField a = 1.0 + detail::t3_a11(f, D);
    ScalarField b = 1.0 + D.d2[1][1];
    parallel_for(g.total(), [&](std::size_t p) {
      Eigen::Matrix3d S;
      S << f.eh[p] * b[p], -f.eh[p] * D.d2[0][1][p], 0.0,
           -f.eh[p] * D.d2[0][1][p], a[p], -f.emh[p] * D.d2[1][2][p],
           0.0, -f.emh[p] * D.d2[1][2][p], f.emh[p] * b[p];
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
      es.computeDirect(S, Eigen::EigenvaluesOnly);
      out[p] = es.eigenvalues()(0);
    }, 512);
    return out;
  }
  parallel_for(g.total(), [&](std::size_t p) {
    Eigen::MatrixXd M = detail::matrix_at(s, D, p);
    Eigen::MatrixXd S = 0.5 * (M + M.transpose());
    out[p] = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S, Eigen::EigenvaluesOnly)
                 .eigenvalues()
                 .minCoeff();
  }, 512);
  return out;
}

inline EllipticityReport ellipticity_report(const EquationSpec& s, const ScalarField& u) {
  EllipticityReport r;
  r.min_eigenvalue = ellipticity_field(s, u).min();
  if (s.family == Family::WARPED) {
    auto f = detail::planar_form(s, u.grid());
    Derivatives D(u);
    auto [P, Q] = detail::planar_values(f, D);
    ScalarField h = detail::h_or_zero(s, u.grid());
    r.warped_x_quantity = (exp(h) * P).min();
    r.warped_y_quantity = Q.min();
  }
  return r;
}

// ---------------------------------------------------------------------------
// Data.

/// G such that the family's equation reads residual(u) = e^G.
inline ScalarField datum_to_exponent(const EquationSpec& s, const ScalarField& F) {
  if (s.family == Family::WARPED && s.h) return F - *s.h;
  return F;
}

/// F for which u_star solves the family's equation exactly on the grid.
inline ScalarField manufactured_datum(const EquationSpec& s, const ScalarField& u_star) {
  ScalarField r = residual(s, u_star);
  if (!(r.min() > 0.0))
    throw EquationError("manufactured candidate leaves the elliptic branch (residual <= 0)");
  ScalarField F = log(r);
  if (s.family == Family::WARPED && s.h) F += *s.h;
  return F;
}

/// Shifts F so that the integral of e^F over the unit torus is 1.
inline ScalarField normalize_datum(const EquationSpec&, const ScalarField& F) {
  // log-sum-exp for robustness against large F
  const double top = F.max();
  const double mass = integrate(F.map([top](double v) { return std::exp(v - top); }));
  return F + (-(top + std::log(mass)));
}

inline double datum_mass(const ScalarField& F) { return integrate(exp(F)); }

/// (l1, l2, m1, m2) exactly as the Lagrangian reductions print them in
/// terms of the coframe parameters.
struct PrintedLagrangianParams {
  double l1, l2, m1, m2;
};

inline PrintedLagrangianParams printed_params_x1x2(const LagrangianCoframe& p) {
  return {1.0 / (p.A * p.A), 1.0 / (p.C * p.C), 0.0, 0.0};
}

inline PrintedLagrangianParams printed_params_x2y1(const LagrangianCoframe& p) {
  const double c2 = p.C * p.C;
  return {-1.0 / (p.A * p.A), -1.0 / c2, -p.lambda * p.A / c2, -p.lambda * p.B / c2};
}

}  // namespace torus_ma
