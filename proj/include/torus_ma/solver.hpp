#pragma once

// Continuity-method solver: path-following in t from the flat solution
// u = 0 to the target datum, with a damped Newton corrector on the square
// system { residual(u) - e^G - b = 0, mean(u) = 0 } in the unknowns (u, b).

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "torus_ma/equations.hpp"
#include "torus_ma/krylov.hpp"

namespace torus_ma {

class SolverError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class SolveStatus { Converged, StepFailed, BranchLost, MaxIterations, LinearSolveStalled };

inline std::string status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::StepFailed: return "StepFailed";
    case SolveStatus::BranchLost: return "BranchLost";
    case SolveStatus::MaxIterations: return "MaxIterations";
    case SolveStatus::LinearSolveStalled: return "LinearSolveStalled";
  }
  return "?";
}

struct SolverConfig {
  // homotopy
  double initial_dt = 0.25;
  double min_dt = 1.0 / 1024;
  int max_steps = 200;
  double dt_growth = 1.5;
  // Newton
  int newton_max_iterations = 30;
  double newton_tolerance = 1e-10;  // max-norm of the equation residual
  double backtrack = 0.5;
  int max_backtracks = 30;
  // linear
  double linear_tolerance = 1e-12;
  int linear_max_iterations = 600;
  int linear_restart = 80;
  double preconditioner_shift = 1.0;
  // branch
  double ellipticity_floor = 1e-6;
  // |integral of e^F - 1| above this rejects the datum
  double mass_tolerance = 1e-9;

  void validate() const {
    if (!(initial_dt > 0.0 && initial_dt <= 1.0)) throw SolverError("initial_dt must lie in (0, 1]");
    if (!(min_dt > 0.0)) throw SolverError("min_dt must be positive");
    if (!(newton_tolerance > 0.0) || !(linear_tolerance > 0.0) || !(ellipticity_floor > 0.0))
      throw SolverError("tolerances must be positive");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw SolverError("backtrack factor must lie in (0, 1)");
    if (!(preconditioner_shift > 0.0)) throw SolverError("preconditioner shift must be positive");
    if (newton_max_iterations < 1 || linear_max_iterations < 1 || linear_restart < 1 || max_steps < 1)
      throw SolverError("iteration limits must be positive");
  }
};

struct NewtonResult {
  ScalarField u;
  double b = 0.0;
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  std::vector<double> residual_history;  // max-norm before each step and at exit
  double min_ellipticity = 0.0;
  double min_singular_value = std::numeric_limits<double>::quiet_NaN();
  int linear_iterations = 0;
};

struct HomotopyRecord {
  double t = 0.0;
  int newton_iterations = 0;
  double residual = 0.0;
  double min_ellipticity = 0.0;
  double u_max = 0.0;
  double grad_max = 0.0;
  double b = 0.0;
};

struct SolveReport {
  ScalarField u;
  double b = 0.0;
  SolveStatus status = SolveStatus::StepFailed;
  std::vector<HomotopyRecord> trace;
  std::vector<double> final_residual_history;
  double final_t = 0.0;
  double min_singular_value = std::numeric_limits<double>::quiet_NaN();
  int rejected_steps = 0;
  std::string message;
};

/// log(t e^F + 1 - t).
inline ScalarField homotopy_datum(const ScalarField& F, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw SolverError("homotopy parameter outside [0, 1]");
  return F.map([t](double f) { return std::log(t * std::exp(f) + 1.0 - t); });
}

/// Max over points of the Euclidean gradient norm.
inline double gradient_max(const ScalarField& u) {
  Spectrum s(u);
  ScalarField sq(u.grid());
  for (int a = 0; a < u.grid().dim(); ++a) {
    ScalarField d = s.derivative(a, 1);
    sq += d * d;
  }
  return std::sqrt(sq.max());
}

namespace detail {

inline Eigen::VectorXd pack(const ScalarField& f, double b) {
  Eigen::VectorXd v(f.size() + 1);
  for (std::size_t i = 0; i < f.size(); ++i) v(i) = f[i];
  v(f.size()) = b;
  return v;
}

inline ScalarField unpack_field(const Eigen::VectorXd& v, const TorusGrid& g) {
  ScalarField f(g);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = v(i);
  return f;
}

}  // namespace detail

/// Damped Newton on (u, b) for residual(u) = e^G + b with mean(u) = 0.
inline NewtonResult newton_solve(const EquationSpec& spec, const ScalarField& G, const ScalarField& u0,
                                 const SolverConfig& cfg, double b0 = 0.0) {
  cfg.validate();
  const TorusGrid& g = u0.grid();
  validate(spec, g);
  if (!(G.grid() == g)) throw SolverError("datum and initial guess live on different grids");
  const ScalarField eG = exp(G);
  const double sign = branch_sign(spec);
  const std::size_t N = g.total();

  NewtonResult res;
  res.u = project_mean_zero(u0);
  res.b = b0;
  auto equation = [&](const ScalarField& u, double b) { return residual(spec, u) - eG - b; };

  res.min_ellipticity = ellipticity_field(spec, res.u).min();
  if (res.min_ellipticity < cfg.ellipticity_floor) {
    res.status = SolveStatus::BranchLost;
    return res;
  }
  ScalarField R = equation(res.u, res.b);
  double rnorm = R.max_abs();
  res.residual_history.push_back(rnorm);

  for (int it = 0; it < cfg.newton_max_iterations; ++it) {
    if (rnorm <= cfg.newton_tolerance) {
      res.status = SolveStatus::Converged;
      return res;
    }
    LinearizedResidual L = linearize(spec, res.u);
    auto op = [&](const Eigen::VectorXd& v) {
      ScalarField w = detail::unpack_field(v, g);
      const double db = v(N);
      ScalarField lw = L.apply(w) - db;
      return detail::pack(lw, integrate(w));
    };
    auto prec = [&](const Eigen::VectorXd& v) {
      ScalarField z = detail::unpack_field(v, g);
      ScalarField w = (-sign) * invert_shifted_laplacian(z, cfg.preconditioner_shift);
      return detail::pack(w, v(N));
    };
    GmresOptions gopt{cfg.linear_tolerance, cfg.linear_max_iterations, cfg.linear_restart};
    // the constraint row asks mean(u + w) = 0
    GmresResult lin = gmres(op, prec, detail::pack(-1.0 * R, -integrate(res.u)), gopt);
    res.linear_iterations += lin.iterations;
    res.min_singular_value = lin.min_singular_value;
    if (!lin.converged && lin.relative_residual > 1e-3) {
      res.status = SolveStatus::LinearSolveStalled;
      return res;
    }
    ScalarField w = detail::unpack_field(lin.x, g);
    const double db = lin.x(N);

    double step = 1.0;
    bool accepted = false, branch_blocked = false;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt, step *= cfg.backtrack) {
      ScalarField trial = res.u + step * w;
      const double margin = ellipticity_field(spec, trial).min();
      if (margin < cfg.ellipticity_floor) {
        branch_blocked = true;
        continue;
      }
      ScalarField Rt = equation(trial, res.b + step * db);
      const double tn = Rt.max_abs();
      if (tn < rnorm || tn <= cfg.newton_tolerance) {
        res.u = project_mean_zero(trial);
        res.b += step * db;
        res.min_ellipticity = margin;
        R = equation(res.u, res.b);
        rnorm = R.max_abs();
        accepted = true;
        break;
      }
      branch_blocked = false;
    }
    ++res.iterations;
    res.residual_history.push_back(rnorm);
    if (!accepted) {
      res.status = branch_blocked ? SolveStatus::BranchLost : SolveStatus::MaxIterations;
      return res;
    }
  }
  res.status = rnorm <= cfg.newton_tolerance ? SolveStatus::Converged : SolveStatus::MaxIterations;
  return res;
}

/// Adaptive path-following in t from u = 0 at t = 0 to t = 1.
inline SolveReport continuity_solve(const EquationSpec& spec, const ScalarField& F, const SolverConfig& cfg,
                                    std::optional<ScalarField> u_start = std::nullopt) {
  cfg.validate();
  const TorusGrid& g = F.grid();
  validate(spec, g);
  const double mass = datum_mass(F);
  if (!(std::abs(mass - 1.0) <= cfg.mass_tolerance))
    throw SolverError("datum is not normalized: integral of e^F is " + std::to_string(mass));

  SolveReport rep;
  rep.u = ScalarField(g);
  double t = 0.0, dt = cfg.initial_dt;
  {
    HomotopyRecord rec;
    rec.min_ellipticity = ellipticity_field(spec, rep.u).min();
    rec.residual = (residual(spec, rep.u) - exp(datum_to_exponent(spec, homotopy_datum(F, 0.0)))).max_abs();
    rep.trace.push_back(rec);
  }
  int steps = 0;
  while (t < 1.0) {
    if (++steps > cfg.max_steps) {
      rep.status = SolveStatus::StepFailed;
      rep.message = "homotopy step budget exhausted at t = " + std::to_string(t);
      return rep;
    }
    const double t_next = std::min(1.0, t + dt);
    const ScalarField G = datum_to_exponent(spec, homotopy_datum(F, t_next));
    // an explicit start is only used for the final node, as a gauge test
    const ScalarField& guess = (u_start && t_next == 1.0) ? *u_start : rep.u;
    NewtonResult nr = newton_solve(spec, G, guess, cfg, rep.b);
    if (nr.status == SolveStatus::Converged) {
      t = t_next;
      rep.u = nr.u;
      rep.b = nr.b;
      rep.final_residual_history = nr.residual_history;
      rep.min_singular_value = nr.min_singular_value;
      HomotopyRecord rec;
      rec.t = t;
      rec.newton_iterations = nr.iterations;
      rec.residual = nr.residual_history.back();
      rec.min_ellipticity = nr.min_ellipticity;
      rec.u_max = rep.u.max_abs();
      rec.grad_max = gradient_max(rep.u);
      rec.b = rep.b;
      rep.trace.push_back(rec);
      dt = std::min(1.0, dt * cfg.dt_growth);
    } else {
      ++rep.rejected_steps;
      dt *= 0.5;
      if (dt < cfg.min_dt) {
        rep.status = SolveStatus::StepFailed;
        rep.message = "step size fell below the minimum at t = " + std::to_string(t) + " (last Newton status " +
                      status_name(nr.status) + ")";
        rep.final_t = t;
        return rep;
      }
    }
  }
  rep.final_t = 1.0;
  rep.status = SolveStatus::Converged;
  return rep;
}

// ---------------------------------------------------------------------------
// Monitors.

inline EllipticityReport ellipticity_monitor(const EquationSpec& spec, const ScalarField& u) {
  return ellipticity_report(spec, u);
}

struct GradientBoundResult {
  double bound_x = 0.0, bound_y = 0.0;        // constants from the lemma's integrals
  double observed_x = 0.0, observed_y = 0.0;  // max |u_x|, max |u_y|
  bool sign_change_x = true;                  // u_x changes sign on every line y = const
  bool pass = false;
};

namespace detail {

/// Values of the trigonometric interpolant of 1-D samples (and of its
/// derivative) on a finer uniform grid.
inline std::pair<std::vector<double>, std::vector<double>> refine_periodic(const std::vector<double>& v, int m) {
  const int n = static_cast<int>(v.size());
  ScalarField f(TorusGrid({n}));
  for (int i = 0; i < n; ++i) f[i] = v[i];
  Spectrum s(f);
  std::vector<double> val(m, 0.0), der(m, 0.0);
  for (int j = 0; j < n; ++j) {
    const std::complex<double> c = s.coefficient(j);
    const int k = wavenumber(j, n);
    const bool nyquist = j == n / 2;
    for (int i = 0; i < m; ++i) {
      const double x = static_cast<double>(i) / m;
      if (nyquist) {
        // real cosine part only, no derivative
        val[i] += c.real() * std::cos(kTwoPi * k * x);
        continue;
      }
      const std::complex<double> e = std::polar(1.0, kTwoPi * k * x);
      val[i] += (c * e).real();
      der[i] += (c * e * std::complex<double>(0.0, kTwoPi * k)).real();
    }
  }
  return {val, der};
}

}  // namespace detail

/// The lemma's constant for v' + (c e^{-h} + h') v > -e^{-h} with v(s0) = 0
/// for some s0: with G a primitive of c e^{-h} + h',
///   C = sup over s0 and |s - s0| <= 1 of e^{-G(s)} |int_{s0}^{s} e^{G - h}|.
/// h is given by samples on [0, 1).
inline double gradient_bound_constant(const std::vector<double>& h, double c, int refine = 2048) {
  if (h.size() < 2) throw SolverError("h needs at least two samples");
  const int m = std::max(refine, static_cast<int>(h.size()));
  auto [hv, hd] = detail::refine_periodic(h, m);
  std::vector<double> gprime(m);
  double mean = 0.0;
  for (int i = 0; i < m; ++i) {
    gprime[i] = c * std::exp(-hv[i]) + hd[i];
    mean += gprime[i] / m;
  }
  // G = mean * s + periodic part; the periodic part via its spectrum
  std::vector<double> periodic_part(m, 0.0);
  {
    ScalarField gp(TorusGrid({m}));
    for (int i = 0; i < m; ++i) gp[i] = gprime[i] - mean;
    Spectrum s(gp);
    ScalarField prim = s.apply_multiplier([&](std::size_t j) {
      const int k = detail::wavenumber(static_cast<int>(j), m);
      if (k == 0 || static_cast<int>(j) == m / 2) return std::complex<double>(0.0, 0.0);
      return 1.0 / std::complex<double>(0.0, kTwoPi * k);
    });
    periodic_part.assign(prim.values().begin(), prim.values().end());
  }
  // three periods [-1, 2) so every window around s0 in [0, 1) fits
  const int total = 3 * m;
  std::vector<double> Gs(total + 1), w(total + 1), prefix(total + 1, 0.0);
  const double ds = 1.0 / m;
  for (int i = 0; i <= total; ++i) {
    const int r = i % m;
    const double s = -1.0 + i * ds;
    Gs[i] = mean * s + periodic_part[r];
    w[i] = std::exp(Gs[i] - hv[r]);
  }
  // trapezoid prefix integral
  for (int i = 1; i <= total; ++i) prefix[i] = prefix[i - 1] + 0.5 * ds * (w[i - 1] + w[i]);
  double C = 0.0;
  for (int i0 = m; i0 < 2 * m; ++i0) {
    for (int i = i0; i <= i0 + m; ++i) C = std::max(C, std::exp(-Gs[i]) * (prefix[i] - prefix[i0]));
    for (int i = i0 - m; i <= i0; ++i) C = std::max(C, std::exp(-Gs[i]) * (prefix[i0] - prefix[i]));
  }
  return C;
}

/// Checks the first-derivative bounds for a WARPED solution on (x, y):
/// |u_x| <= C(c, h) and |u_y| <= C(0, 0) = 1.
inline GradientBoundResult gradient_bound_monitor(const ScalarField& u, const ScalarField& h, double c) {
  const TorusGrid& g = u.grid();
  if (g.dim() != 2) throw SolverError("gradient bounds are for fields on the 2-torus");
  if (!(h.grid() == g)) throw SolverError("h lives on a different grid than u");
  GradientBoundResult r;
  std::vector<double> hx(g.size(0));
  for (int i = 0; i < g.size(0); ++i) hx[i] = h[static_cast<std::size_t>(i) * g.stride(0)];
  r.bound_x = gradient_bound_constant(hx, c);
  r.bound_y = gradient_bound_constant(std::vector<double>(g.size(1), 0.0), 0.0);
  Spectrum s(u);
  ScalarField ux = s.derivative(0, 1), uy = s.derivative(1, 1);
  r.observed_x = ux.max_abs();
  r.observed_y = uy.max_abs();
  const double zero_tol = 1e-14 * std::max(1.0, r.observed_x);
  for (int j = 0; j < g.size(1); ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i = 0; i < g.size(0); ++i) {
      const double v = ux[static_cast<std::size_t>(i) * g.stride(0) + j];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(lo <= zero_tol && hi >= -zero_tol)) r.sign_change_x = false;
  }
  r.pass = r.observed_x <= r.bound_x && r.observed_y <= r.bound_y;
  return r;
}

}  // namespace torus_ma
