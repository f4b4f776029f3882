#pragma once

// Run configurations (YAML). Parsing is strict: unknown keys, malformed
// expressions, missing files and grid/family mismatches are all rejected
// before any computation starts.
//
//   mode: solve                 # optional; must agree with the command line
//   family: STDMA
//   params: {l1: 1, l2: 1, m1: 0, m2: 0, c: 0, n: 3, h: "0.3*sin(2*pi*x)"}
//   coframe: {A: 1, B: 0, C: 1, lambda1: 0, lambda2: 0, lambda: 0, mu: 0, kappa: 0, sign: 1}
//   grid: 64                    # or [64, 64]
//   datum: "0.8*sin(2*pi*x)*sin(2*pi*y)"   # or {file: F.tma}
//   u_star: "..."               # manufacture mode
//   solution: {file: u.tma}     # verify mode
//   normalize: true
//   solver: {newton_tolerance: 1e-10, ...}
//   verify: {tolerance: 1e-8}
//   output: {dir: out, csv: false}
//   seed: 1

#include "torus_ma/expression.hpp"
#include "torus_ma/field_io.hpp"
#include "torus_ma/solver.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace torus_ma {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { Manufacture, Solve, Verify, Selftest };

inline std::string mode_name(RunMode m) {
  switch (m) {
    case RunMode::Manufacture: return "manufacture";
    case RunMode::Solve: return "solve";
    case RunMode::Verify: return "verify";
    case RunMode::Selftest: return "selftest";
  }
  return "?";
}

inline std::optional<RunMode> parse_mode(const std::string& s) {
  for (RunMode m : {RunMode::Manufacture, RunMode::Solve, RunMode::Verify, RunMode::Selftest})
    if (mode_name(m) == s) return m;
  return std::nullopt;
}

/// A field given either analytically or as a TMA1 dump.
struct FieldSource {
  std::optional<Expression> expression;
  std::filesystem::path file;

  bool present() const { return expression.has_value() || !file.empty(); }

  ScalarField materialize(const TorusGrid& g, const std::string& what) const {
    if (expression) return expression->sample(g);
    ScalarField f = [&] {
      try {
        return load_dump(file);
      } catch (const FieldIoError& e) {
        throw ConfigError(what + ": " + e.what());
      }
    }();
    if (!(f.grid() == g)) throw ConfigError(what + ": dump grid does not match the configured grid");
    return f;
  }

  std::string describe() const { return expression ? expression->text() : file.string(); }
};

struct RunConfig {
  std::optional<RunMode> mode;
  EquationSpec spec;
  std::optional<Expression> h_expression;
  std::vector<int> grid;
  FieldSource datum, u_star, solution;
  bool normalize = true;
  SolverConfig solver;
  std::optional<double> verify_tolerance;
  std::filesystem::path out_dir;
  bool write_csv = false;
  std::uint64_t seed = 0;
  YAML::Node echo;  // the configuration as read

  TorusGrid make_grid() const { return TorusGrid(grid); }
  double tolerance() const { return verify_tolerance.value_or(100.0 * solver.newton_tolerance); }

  /// The spec with h sampled on the grid.
  EquationSpec resolved_spec(const TorusGrid& g) const {
    EquationSpec s = spec;
    if (h_expression) s.h = h_expression->sample(g);
    return s;
  }
};

namespace detail {

inline void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T scalar_as(const YAML::Node& node, const std::string& where) {
  if (!node.IsScalar()) throw ConfigError(where + " must be a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + " has the wrong type: '" + node.Scalar() + "'");
  }
}

template <class T>
void read_if(const YAML::Node& map, const std::string& key, T& into, const std::string& where) {
  if (map[key]) into = scalar_as<T>(map[key], where + "." + key);
}

inline std::vector<std::pair<std::string, int>> aliases_for(const std::vector<std::string>& names) {
  std::vector<std::pair<std::string, int>> out;
  for (auto [alias, axis] : axis_aliases()) {
    // a genuine coordinate name always wins over an alias
    bool taken = false;
    for (const auto& n : names) taken = taken || n == alias;
    if (!taken && axis < static_cast<int>(names.size())) out.emplace_back(alias, axis);
  }
  return out;
}

inline Expression parse_expression(const std::string& text, const std::vector<std::string>& names,
                                   const std::string& where) {
  try {
    return Expression::parse(text, names, aliases_for(names));
  } catch (const ExpressionError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline FieldSource read_field_source(const YAML::Node& node, const std::vector<std::string>& names,
                                     const std::filesystem::path& base, const std::string& where) {
  FieldSource src;
  if (node.IsScalar()) {
    src.expression = parse_expression(node.Scalar(), names, where);
    return src;
  }
  check_keys(node, where, {"file", "expression"});
  if (node["file"] && node["expression"]) throw ConfigError(where + ": give either file or expression");
  if (node["expression"]) {
    src.expression = parse_expression(scalar_as<std::string>(node["expression"], where), names, where);
    return src;
  }
  if (!node["file"]) throw ConfigError(where + ": needs file or expression");
  std::filesystem::path p = scalar_as<std::string>(node["file"], where + ".file");
  if (p.is_relative()) p = base / p;
  if (!std::filesystem::is_regular_file(p)) throw ConfigError(where + ": file not found: " + p.string());
  src.file = p;
  return src;
}

inline void read_solver(const YAML::Node& node, SolverConfig& c) {
  check_keys(node, "solver",
             {"initial_dt", "min_dt", "max_steps", "dt_growth", "newton_max_iterations", "newton_tolerance",
              "backtrack", "max_backtracks", "linear_tolerance", "linear_max_iterations", "linear_restart",
              "preconditioner_shift", "ellipticity_floor", "mass_tolerance"});
  read_if(node, "initial_dt", c.initial_dt, "solver");
  read_if(node, "min_dt", c.min_dt, "solver");
  read_if(node, "max_steps", c.max_steps, "solver");
  read_if(node, "dt_growth", c.dt_growth, "solver");
  read_if(node, "newton_max_iterations", c.newton_max_iterations, "solver");
  read_if(node, "newton_tolerance", c.newton_tolerance, "solver");
  read_if(node, "backtrack", c.backtrack, "solver");
  read_if(node, "max_backtracks", c.max_backtracks, "solver");
  read_if(node, "linear_tolerance", c.linear_tolerance, "solver");
  read_if(node, "linear_max_iterations", c.linear_max_iterations, "solver");
  read_if(node, "linear_restart", c.linear_restart, "solver");
  read_if(node, "preconditioner_shift", c.preconditioner_shift, "solver");
  read_if(node, "ellipticity_floor", c.ellipticity_floor, "solver");
  read_if(node, "mass_tolerance", c.mass_tolerance, "solver");
  try {
    c.validate();
  } catch (const SolverError& e) {
    throw ConfigError(std::string("solver: ") + e.what());
  }
}

}  // namespace detail

/// Parses a configuration tree; relative file paths resolve against base.
inline RunConfig parse_config(const YAML::Node& root, const std::filesystem::path& base = ".") {
  using detail::check_keys;
  using detail::read_if;
  using detail::scalar_as;
  check_keys(root, "config",
             {"mode", "family", "params", "coframe", "grid", "datum", "u_star", "solution", "normalize", "solver",
              "verify", "output", "seed"});
  RunConfig cfg;
  cfg.echo = YAML::Clone(root);
  if (root["mode"]) {
    auto m = parse_mode(scalar_as<std::string>(root["mode"], "mode"));
    if (!m) throw ConfigError("unknown mode '" + root["mode"].Scalar() + "'");
    cfg.mode = m;
  }
  if (!root["family"]) throw ConfigError("missing key 'family'");
  auto fam = parse_family(scalar_as<std::string>(root["family"], "family"));
  if (!fam) throw ConfigError("unknown family '" + root["family"].Scalar() + "'");
  cfg.spec.family = *fam;

  std::optional<std::string> h_text;
  if (const auto p = root["params"]) {
    check_keys(p, "params", {"l1", "l2", "m1", "m2", "c", "n", "h"});
    read_if(p, "l1", cfg.spec.l1, "params");
    read_if(p, "l2", cfg.spec.l2, "params");
    read_if(p, "m1", cfg.spec.m1, "params");
    read_if(p, "m2", cfg.spec.m2, "params");
    read_if(p, "c", cfg.spec.c, "params");
    read_if(p, "n", cfg.spec.n, "params");
    if (p["h"]) h_text = scalar_as<std::string>(p["h"], "params.h");
  }
  if (const auto c = root["coframe"]) {
    check_keys(c, "coframe", {"A", "B", "C", "lambda1", "lambda2", "lambda", "mu", "kappa", "sign"});
    LagrangianCoframe cf;
    read_if(c, "A", cf.A, "coframe");
    read_if(c, "B", cf.B, "coframe");
    read_if(c, "C", cf.C, "coframe");
    read_if(c, "lambda1", cf.lambda1, "coframe");
    read_if(c, "lambda2", cf.lambda2, "coframe");
    read_if(c, "lambda", cf.lambda, "coframe");
    read_if(c, "mu", cf.mu, "coframe");
    read_if(c, "kappa", cf.kappa, "coframe");
    read_if(c, "sign", cf.sign, "coframe");
    if (cf.sign != 1 && cf.sign != -1) throw ConfigError("coframe.sign must be 1 or -1");
    cfg.spec.coframe = cf;
  }

  const auto names = coordinate_names(cfg.spec);
  const int dim = static_cast<int>(names.size());
  if (h_text) {
    if (cfg.spec.family != Family::WARPED && cfg.spec.family != Family::WARPED_T3)
      throw ConfigError("params.h only applies to the WARPED families");
    cfg.h_expression = detail::parse_expression(*h_text, names, "params.h");
  }

  if (!root["grid"]) throw ConfigError("missing key 'grid'");
  const auto g = root["grid"];
  if (g.IsScalar()) {
    cfg.grid.assign(dim, scalar_as<int>(g, "grid"));
  } else if (g.IsSequence()) {
    for (const auto& n : g) cfg.grid.push_back(scalar_as<int>(n, "grid[]"));
  } else {
    throw ConfigError("grid must be an integer or a list of integers");
  }
  if (static_cast<int>(cfg.grid.size()) != dim)
    throw ConfigError(family_name(cfg.spec.family) + " needs " + std::to_string(dim) + " grid sizes");
  TorusGrid grid = [&] {
    try {
      return cfg.make_grid();
    } catch (const GridError& e) {
      throw ConfigError(std::string("grid: ") + e.what());
    }
  }();
  try {
    validate(cfg.resolved_spec(grid), grid);
  } catch (const EquationError& e) {
    throw ConfigError(e.what());
  }
  if (cfg.spec.family == Family::WARPED && cfg.h_expression) {
    // h is a function of the first base coordinate only
    ScalarField h = cfg.h_expression->sample(grid);
    for (std::size_t i = 0; i < grid.total(); ++i)
      if (std::abs(h[i] - h[i - grid.index_along(i, 1) * grid.stride(1)]) > 1e-14 * (1.0 + std::abs(h[i])))
        throw ConfigError("params.h for WARPED must not depend on " + names[1]);
  }

  if (root["datum"]) cfg.datum = detail::read_field_source(root["datum"], names, base, "datum");
  if (root["u_star"]) cfg.u_star = detail::read_field_source(root["u_star"], names, base, "u_star");
  if (root["solution"]) cfg.solution = detail::read_field_source(root["solution"], names, base, "solution");
  read_if(root, "normalize", cfg.normalize, "config");
  if (root["solver"]) detail::read_solver(root["solver"], cfg.solver);
  if (const auto v = root["verify"]) {
    check_keys(v, "verify", {"tolerance"});
    if (v["tolerance"]) {
      cfg.verify_tolerance = scalar_as<double>(v["tolerance"], "verify.tolerance");
      if (!(*cfg.verify_tolerance > 0.0)) throw ConfigError("verify.tolerance must be positive");
    }
  }
  if (const auto o = root["output"]) {
    check_keys(o, "output", {"dir", "csv"});
    if (o["dir"]) {
      std::filesystem::path d = scalar_as<std::string>(o["dir"], "output.dir");
      cfg.out_dir = d.is_relative() ? base / d : d;
    }
    read_if(o, "csv", cfg.write_csv, "output");
  }
  read_if(root, "seed", cfg.seed, "config");
  return cfg;
}

/// Checks that the sources the given mode needs are present.
inline void require_inputs(const RunConfig& cfg, RunMode mode) {
  switch (mode) {
    case RunMode::Manufacture:
      if (!cfg.u_star.present()) throw ConfigError("manufacture mode needs 'u_star'");
      break;
    case RunMode::Solve:
      if (!cfg.datum.present()) throw ConfigError("solve mode needs 'datum'");
      break;
    case RunMode::Verify:
      if (!cfg.datum.present() || !cfg.solution.present())
        throw ConfigError("verify mode needs 'datum' and 'solution'");
      break;
    case RunMode::Selftest: break;
  }
}

inline RunConfig load_config(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot read config " + path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("config " + path.string() + " is not valid YAML: " + e.what());
  }
  if (!root.IsDefined() || root.IsNull()) throw ConfigError("config " + path.string() + " is empty");
  return parse_config(root, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace torus_ma
