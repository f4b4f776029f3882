#pragma once

// Structured run reports (YAML). Keys are emitted in a fixed order and all
// wall-clock values live under "timings", so two runs of one configuration
// differ only there.

#include "torus_ma/config.hpp"
#include "torus_ma/verify.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <fstream>
#include <string>

namespace torus_ma {

inline YAML::Node to_yaml(const SolverConfig& c) {
  YAML::Node n;
  n["initial_dt"] = c.initial_dt;
  n["min_dt"] = c.min_dt;
  n["max_steps"] = c.max_steps;
  n["dt_growth"] = c.dt_growth;
  n["newton_max_iterations"] = c.newton_max_iterations;
  n["newton_tolerance"] = c.newton_tolerance;
  n["backtrack"] = c.backtrack;
  n["max_backtracks"] = c.max_backtracks;
  n["linear_tolerance"] = c.linear_tolerance;
  n["linear_max_iterations"] = c.linear_max_iterations;
  n["linear_restart"] = c.linear_restart;
  n["preconditioner_shift"] = c.preconditioner_shift;
  n["ellipticity_floor"] = c.ellipticity_floor;
  n["mass_tolerance"] = c.mass_tolerance;
  return n;
}

inline YAML::Node to_yaml(const HomotopyRecord& r) {
  YAML::Node n;
  n["t"] = r.t;
  n["newton_iterations"] = r.newton_iterations;
  n["residual"] = r.residual;
  n["min_ellipticity"] = r.min_ellipticity;
  n["u_max"] = r.u_max;
  n["grad_max"] = r.grad_max;
  n["b"] = r.b;
  return n;
}

/// Everything but the field itself.
inline YAML::Node to_yaml(const SolveReport& r) {
  YAML::Node n;
  n["status"] = status_name(r.status);
  n["final_t"] = r.final_t;
  n["b"] = r.b;
  n["rejected_steps"] = r.rejected_steps;
  n["min_singular_value"] = r.min_singular_value;
  n["final_residual_history"] = YAML::Node(YAML::NodeType::Sequence);
  for (double v : r.final_residual_history) n["final_residual_history"].push_back(v);
  if (!r.message.empty()) n["message"] = r.message;
  n["trace"] = YAML::Node(YAML::NodeType::Sequence);
  for (const auto& rec : r.trace) n["trace"].push_back(to_yaml(rec));
  return n;
}

inline YAML::Node to_yaml(const VerificationReport& r) {
  YAML::Node n;
  n["pass"] = r.pass;
  n["tolerance"] = r.tolerance;
  n["anti_invariant_norm"] = r.anti_invariant_norm;
  n["positivity_margin"] = r.positivity_margin;
  n["topform_residual"] = r.topform_residual;
  n["volume_defect"] = r.volume_defect;
  n["potential_defect"] = r.potential_defect;
  return n;
}

inline YAML::Node to_yaml(const EllipticityReport& r) {
  YAML::Node n;
  n["min_eigenvalue"] = r.min_eigenvalue;
  if (r.warped_x_quantity) n["warped_x_quantity"] = *r.warped_x_quantity;
  if (r.warped_y_quantity) n["warped_y_quantity"] = *r.warped_y_quantity;
  return n;
}

inline YAML::Node to_yaml(const GradientBoundResult& r) {
  YAML::Node n;
  n["pass"] = r.pass;
  n["bound_x"] = r.bound_x;
  n["bound_y"] = r.bound_y;
  n["observed_x"] = r.observed_x;
  n["observed_y"] = r.observed_y;
  n["sign_change_x"] = r.sign_change_x;
  return n;
}

inline std::string emit_yaml(const YAML::Node& n) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << n;
  return std::string(out.c_str()) + "\n";
}

inline void write_report(const YAML::Node& report, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FieldIoError("cannot write report " + path.string());
  f << emit_yaml(report);
  if (!f) throw FieldIoError("write failed for " + path.string());
}

}  // namespace torus_ma
