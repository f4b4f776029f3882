#pragma once

// A-posteriori checks on a computed potential: rebuild the 2-form
// Omega + d alpha(u) on the family's coframe and measure how far it is from
// an invariant, positive, closed-by-construction solution of the top-form
// equation.

#include "torus_ma/equations.hpp"

#include <cmath>

namespace torus_ma {

struct VerificationReport {
  double anti_invariant_norm = 0.0;  // max |J-anti-invariant part of omega~ - Omega|
  double positivity_margin = 0.0;    // min eigenvalue of omega~(., J .)
  double topform_residual = 0.0;     // max |omega~^n / Omega^n - e^F|
  double volume_defect = 0.0;        // |integral of omega~^n / Omega^n - 1|
  double potential_defect = 0.0;     // max |da ^ omega~^(n-1)| / Omega^n
  double tolerance = 0.0;
  bool pass = false;
};

namespace detail {

inline double correction_defect(const Geometry& geo, const ScalarField& u, const InvariantForm& w) {
  const auto& s = geo.structure;
  InvariantForm da = exterior_derivative(ansatz_correction(u, s, geo.ansatz), s);
  InvariantForm top = s.n == 1 ? da : wedge(da, wedge_power(w, s.n - 1));
  return top_ratio_of(top, s).max_abs();
}

}  // namespace detail

inline InvariantForm reconstruct_form(const ScalarField& u, const EquationSpec& spec,
                                      WarpedRealization warped = WarpedRealization::FiberY1) {
  return reconstruct_with(geometry_for(spec, u.grid(), warped), u);
}

inline double volume_defect(const ScalarField& u, const EquationSpec& spec,
                            WarpedRealization warped = WarpedRealization::FiberY1) {
  Geometry geo = geometry_for(spec, u.grid(), warped);
  return std::abs(integrate(top_form_ratio(reconstruct_with(geo, u), geo.structure)) - 1.0);
}

inline double positivity_margin(const ScalarField& u, const EquationSpec& spec,
                                WarpedRealization warped = WarpedRealization::FiberY1) {
  Geometry geo = geometry_for(spec, u.grid(), warped);
  return compatibility_margin(reconstruct_with(geo, u), geo.structure).min();
}

/// Size of da ^ omega~^(n-1) for the correction a = alpha + J du. Zero when the
/// correction does not feed into the top-form equation.
inline double potential_defect(const ScalarField& u, const EquationSpec& spec,
                               WarpedRealization warped = WarpedRealization::FiberY1) {
  Geometry geo = geometry_for(spec, u.grid(), warped);
  return detail::correction_defect(geo, u, reconstruct_with(geo, u));
}

inline VerificationReport verify_solution(const ScalarField& u, const ScalarField& F, const EquationSpec& spec,
                                          double tol,
                                          WarpedRealization warped = WarpedRealization::FiberY1) {
  if (!(u.grid() == F.grid())) throw EquationError("u and F live on different grids");
  Geometry geo = geometry_for(spec, u.grid(), warped);
  const auto& s = geo.structure;
  InvariantForm w = reconstruct_with(geo, u);
  VerificationReport r;
  r.tolerance = tol;
  r.anti_invariant_norm = type_split(w - s.omega, s).anti_invariant.max_abs();
  r.positivity_margin = compatibility_margin(w, s).min();
  // weight * ratio = e^G with G = F - h for WARPED, so ratio = e^F in all cases
  ScalarField ratio = top_form_ratio(w, s);
  r.topform_residual = (ratio - exp(F)).max_abs();
  r.volume_defect = std::abs(integrate(ratio) - 1.0);
  r.potential_defect = detail::correction_defect(geo, u, w);
  r.pass = r.anti_invariant_norm <= tol && r.topform_residual <= tol && r.volume_defect <= tol &&
           r.positivity_margin > 0.0;
  return r;
}

}  // namespace torus_ma
