#pragma once

// Batch driver behind the torus-ma executable:
//
//   torus-ma <manufacture|solve|verify|selftest> --config <path>... [--out <dir>] [--force] [--jobs N]
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure,
// 4 verification failure. With several configs the worst code wins.

#include "torus_ma/report.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <random>
#include <thread>

namespace torus_ma {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitSolver = 3, kExitVerification = 4 };

struct RunOptions {
  std::filesystem::path out_dir;  // overrides the config's output.dir
  bool force = false;
};

struct RunOutcome {
  int exit_code = kExitOk;
  std::string status;
  std::filesystem::path out_dir;
  std::string message;
};

// ---------------------------------------------------------------------------
// Selftest: the geometric reconstruction against the closed-form reductions.

struct IdentityCase {
  std::string name;
  EquationSpec spec;
  WarpedRealization realization = WarpedRealization::FiberY1;
};

inline ScalarField random_trig_field(const TorusGrid& g, int max_k, int modes, double amplitude,
                                     std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kd(-max_k, max_k);
  std::uniform_real_distribution<double> cd(-1.0, 1.0);
  ScalarField f(g);
  double total = 0.0;
  for (int m = 0; m < modes; ++m) {
    std::vector<int> k(g.dim());
    bool zero = true;
    for (auto& v : k) {
      v = kd(rng);
      zero = zero && v == 0;
    }
    if (zero) {
      --m;
      continue;
    }
    const double a = cd(rng), b = cd(rng);
    total += std::abs(a) + std::abs(b);
    f += ScalarField::sample(g, [&](std::span<const double> x) {
      double phase = 0.0;
      for (int i = 0; i < g.dim(); ++i) phase += kTwoPi * k[i] * x[i];
      return a * std::cos(phase) + b * std::sin(phase);
    });
  }
  return (amplitude / total) * f;
}

inline std::vector<IdentityCase> identity_cases(const TorusGrid& g2, const TorusGrid& g3) {
  std::vector<IdentityCase> out;
  auto add = [&](std::string name, EquationSpec s, WarpedRealization r = WarpedRealization::FiberY1) {
    out.push_back({std::move(name), std::move(s), r});
  };
  EquationSpec s;
  s.family = Family::STDMA;
  add("kodaira_thurston/STDMA", s);
  s.family = Family::GENMA;
  add("kodaira_thurston/GENMA", s);
  s.family = Family::DETA_T3;
  add("kodaira_thurston/DETA_T3", s);

  EquationSpec l;
  l.family = Family::LAGR_X1X2;
  l.l1 = 2.0;
  l.l2 = 0.5;
  add("lagrangian/LAGR_X1X2", l);
  l.family = Family::LAGR_X2Y1;
  l.l1 = -1.5;
  l.l2 = -0.8;
  l.m1 = 0.3;
  l.m2 = -0.2;
  add("lagrangian/LAGR_X2Y1", l);

  EquationSpec w;
  w.family = Family::WARPED;
  w.h = ScalarField::sample(g2, [](std::span<const double> x) { return 0.3 * std::sin(kTwoPi * x[0]); });
  w.c = 1.0;
  add("warped/WARPED c=1", w);
  w.c = 0.0;
  add("warped/WARPED c=0 base", w, WarpedRealization::BaseX1);
  EquationSpec w3;
  w3.family = Family::WARPED_T3;
  w3.h = ScalarField::sample(
      g3, [](std::span<const double> x) { return 0.2 * std::sin(kTwoPi * x[0]) * std::cos(kTwoPi * x[2]); });
  add("warped/WARPED_T3", w3);
  return out;
}

inline YAML::Node run_selftest(std::uint64_t seed, bool& all_pass) {
  const double tol = 1e-10;
  TorusGrid g2({32, 32}), g3({16, 16, 16});
  std::mt19937_64 rng(seed);
  YAML::Node suites(YAML::NodeType::Sequence);
  all_pass = true;
  for (const auto& c : identity_cases(g2, g3)) {
    const TorusGrid& g = base_dim(c.spec) == 2 ? g2 : g3;
    double identity_err = 0.0, anti = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      ScalarField u = random_trig_field(g, 2, 6, 0.02, rng);
      ScalarField geom = residual_geom(c.spec, u, c.realization);
      ScalarField closed = residual(c.spec, u);
      for (std::size_t i = 0; i < g.total(); ++i)
        identity_err = std::max(identity_err, std::abs(geom[i] - closed[i]) / std::max(1.0, std::abs(closed[i])));
      Geometry geo = geometry_for(c.spec, g, c.realization);
      anti = std::max(anti, type_split(reconstruct_with(geo, u) - geo.structure.omega, geo.structure)
                                .anti_invariant.max_abs());
    }
    const bool pass = identity_err <= tol && anti <= tol;
    all_pass = all_pass && pass;
    YAML::Node n;
    n["name"] = c.name;
    n["pass"] = pass;
    n["identity_error"] = identity_err;
    n["anti_invariant_norm"] = anti;
    suites.push_back(n);
  }
  return suites;
}

// ---------------------------------------------------------------------------
// Pipelines.

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Shifts F to unit mass when asked; returns the applied shift.
inline double maybe_normalize(ScalarField& F, const RunConfig& cfg, const EquationSpec& spec, YAML::Node& datum) {
  const double mass = datum_mass(F);
  datum["mass"] = mass;
  double shift = 0.0;
  if (cfg.normalize && std::abs(mass - 1.0) > 0.1 * cfg.solver.mass_tolerance) {
    ScalarField normalized = normalize_datum(spec, F);
    shift = normalized[0] - F[0];
    F = std::move(normalized);
  }
  datum["normalization_shift"] = shift;
  return shift;
}

inline void prepare_out_dir(const std::filesystem::path& dir, bool force) {
  namespace fs = std::filesystem;
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw ConfigError("output path exists and is not a directory: " + dir.string());
    if (!fs::is_empty(dir) && !force)
      throw ConfigError("output directory " + dir.string() + " is not empty; pass --force to overwrite");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

struct Artifacts {
  std::filesystem::path dir;
  bool csv = false;
  std::vector<std::string> coordinates;
  YAML::Node list{YAML::NodeType::Sequence};

  void field(const std::string& stem, const ScalarField& f) {
    save_dump(f, dir / (stem + ".tma"));
    list.push_back(stem + ".tma");
    if (csv) {
      save_csv(f, dir / (stem + ".csv"), coordinates);
      list.push_back(stem + ".csv");
    }
  }
};

inline YAML::Node monitors(const EquationSpec& spec, const ScalarField& u) {
  YAML::Node m;
  m["ellipticity"] = to_yaml(ellipticity_monitor(spec, u));
  if (spec.family == Family::WARPED)
    m["gradient_bound"] = to_yaml(gradient_bound_monitor(u, spec.h ? *spec.h : ScalarField(u.grid()), spec.c));
  return m;
}

}  // namespace detail

/// Runs one configuration in the given mode. Configuration problems
/// propagate as ConfigError; everything else is reported in the outcome.
inline RunOutcome run(const RunConfig& cfg, RunMode mode, const RunOptions& opt) {
  using detail::Clock;
  const auto t_start = Clock::now();
  if (cfg.mode && *cfg.mode != mode)
    throw ConfigError("config declares mode '" + mode_name(*cfg.mode) + "' but '" + mode_name(mode) +
                      "' was requested");
  require_inputs(cfg, mode);
  RunOutcome outcome;
  outcome.out_dir = opt.out_dir.empty() ? cfg.out_dir : opt.out_dir;

  YAML::Node report;
  report["format"] = "torus-ma report 1";
  report["mode"] = mode_name(mode);
  report["status"] = "";
  report["exit_code"] = 0;
  YAML::Node timings;

  if (mode == RunMode::Selftest) {
    if (!outcome.out_dir.empty()) detail::prepare_out_dir(outcome.out_dir, opt.force);
    bool pass = false;
    report["suites"] = run_selftest(cfg.seed, pass);
    outcome.status = pass ? "Passed" : "Failed";
    outcome.exit_code = pass ? kExitOk : kExitVerification;
    report["status"] = outcome.status;
    report["exit_code"] = outcome.exit_code;
    timings["total_seconds"] = detail::seconds_since(t_start);
    report["timings"] = timings;
    if (!outcome.out_dir.empty()) write_report(report, outcome.out_dir / "report.yaml");
    return outcome;
  }

  if (outcome.out_dir.empty()) throw ConfigError("no output directory: set output.dir or pass --out");
  const TorusGrid grid = cfg.make_grid();
  const EquationSpec spec = cfg.resolved_spec(grid);

  // materialize inputs before touching the output directory
  ScalarField F(grid), u_star(grid), u_given(grid);
  YAML::Node datum;
  if (mode == RunMode::Manufacture) {
    u_star = cfg.u_star.materialize(grid, "u_star");
    try {
      F = manufactured_datum(spec, u_star);
    } catch (const EquationError& e) {
      throw ConfigError(std::string("u_star: ") + e.what());
    }
    datum["source"] = "manufactured from u_star";
  } else {
    F = cfg.datum.materialize(grid, "datum");
    datum["source"] = cfg.datum.describe();
  }
  if (!F.all_finite()) throw ConfigError("datum is not finite on the grid");
  if (mode == RunMode::Verify) u_given = cfg.solution.materialize(grid, "solution");
  detail::maybe_normalize(F, cfg, spec, datum);

  detail::prepare_out_dir(outcome.out_dir, opt.force);
  detail::Artifacts art{outcome.out_dir, cfg.write_csv, coordinate_names(spec)};

  report["config"] = cfg.echo;
  YAML::Node resolved;
  resolved["family"] = family_name(spec.family);
  resolved["coordinates"] = coordinate_names(spec);
  resolved["grid"] = cfg.grid;
  resolved["verify_tolerance"] = cfg.tolerance();
  resolved["solver"] = to_yaml(cfg.solver);
  report["resolved"] = resolved;
  report["datum"] = datum;

  ScalarField u(grid);
  bool solver_ok = true;
  if (mode == RunMode::Verify) {
    u = u_given;
    report["solution"] = cfg.solution.describe();
  } else {
    const auto t0 = Clock::now();
    SolveReport sr;
    try {
      sr = continuity_solve(spec, F, cfg.solver);
    } catch (const SolverError& e) {
      sr.u = ScalarField(grid);
      sr.status = SolveStatus::StepFailed;
      sr.message = e.what();
    }
    timings["solve_seconds"] = detail::seconds_since(t0);
    report["solver"] = to_yaml(sr);
    u = sr.u;
    solver_ok = sr.status == SolveStatus::Converged;
    outcome.status = status_name(sr.status);
    if (!solver_ok) outcome.message = sr.message;
    if (mode == RunMode::Manufacture) {
      art.field("u_star", u_star);
      YAML::Node mf;
      mf["source"] = cfg.u_star.describe();
      // the solver fixes the additive constant by zero mean
      mf["max_error"] = max_abs_diff(u, project_mean_zero(u_star));
      report["manufactured"] = mf;
    }
  }
  art.field("datum", F);
  if (mode != RunMode::Verify) art.field("u", u);

  bool verified = false;
  if (solver_ok) {
    const auto t0 = Clock::now();
    try {
      report["monitors"] = detail::monitors(spec, u);
      VerificationReport vr = verify_solution(u, F, spec, cfg.tolerance());
      report["verification"] = to_yaml(vr);
      verified = vr.pass;
    } catch (const std::exception& e) {
      YAML::Node vn;
      vn["pass"] = false;
      vn["message"] = e.what();
      report["verification"] = vn;
    }
    timings["verify_seconds"] = detail::seconds_since(t0);
  }

  if (!solver_ok) {
    outcome.exit_code = kExitSolver;
  } else if (!verified) {
    outcome.exit_code = kExitVerification;
    if (mode == RunMode::Verify) outcome.status = "Failed";
    outcome.message = "verification failed";
  } else if (mode == RunMode::Verify) {
    outcome.status = "Passed";
  }
  report["status"] = outcome.status;
  report["exit_code"] = outcome.exit_code;
  if (outcome.exit_code != kExitOk) {
    YAML::Node err;
    err["code"] = outcome.exit_code;
    err["kind"] = outcome.exit_code == kExitSolver ? "solver_failure" : "verification_failure";
    err["message"] = outcome.message;
    report["error"] = err;
  }
  report["artifacts"] = art.list;
  report["artifacts"].push_back("report.yaml");
  timings["total_seconds"] = detail::seconds_since(t_start);
  report["timings"] = timings;
  write_report(report, outcome.out_dir / "report.yaml");
  return outcome;
}

// ---------------------------------------------------------------------------
// Command line.

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Spectral continuity-method solver for Monge-Ampere type equations on tori"};
  app.name("torus-ma");
  std::string mode_text;
  std::vector<std::string> configs;
  std::string out_dir;
  bool force = false;
  int jobs = 1;
  app.add_option("mode", mode_text, "manufacture | solve | verify | selftest")
      ->required()
      ->check(CLI::IsMember({"manufacture", "solve", "verify", "selftest"}));
  app.add_option("--config,-c", configs, "run configuration (YAML); may be repeated")->check(CLI::ExistingFile);
  app.add_option("--out,-o", out_dir, "output directory (one subdirectory per config when several are given)");
  app.add_flag("--force", force, "overwrite a non-empty output directory");
  app.add_option("--jobs,-j", jobs, "configs to run concurrently")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "torus-ma: " << e.what() << "\n";
    return kExitConfig;
  }
  const RunMode mode = *parse_mode(mode_text);
  if (configs.empty() && mode != RunMode::Selftest) {
    err << "torus-ma: --config is required for " << mode_text << "\n";
    return kExitConfig;
  }

  struct Job {
    std::string label;
    std::optional<RunConfig> cfg;
    RunOptions opt;
  };
  std::vector<Job> work;
  if (configs.empty()) {
    RunConfig c;
    c.mode = RunMode::Selftest;
    Job j{"selftest", c, {}};
    j.opt.out_dir = out_dir;
    j.opt.force = force;
    work.push_back(std::move(j));
  }
  std::set<std::filesystem::path> claimed;
  for (const auto& path : configs) {
    Job j{path, std::nullopt, {}};
    j.opt.force = force;
    try {
      j.cfg = load_config(path);
      if (!out_dir.empty())
        j.opt.out_dir = configs.size() == 1 ? std::filesystem::path(out_dir)
                                            : std::filesystem::path(out_dir) / std::filesystem::path(path).stem();
      const auto dir = j.opt.out_dir.empty() ? j.cfg->out_dir : j.opt.out_dir;
      if (!dir.empty() && !claimed.insert(std::filesystem::weakly_canonical(dir)).second)
        throw ConfigError("two configs share the output directory " + dir.string());
    } catch (const ConfigError& e) {
      err << "torus-ma: " << path << ": " << e.what() << "\n";
      return kExitConfig;
    }
    work.push_back(std::move(j));
  }

  std::mutex io;
  std::atomic<std::size_t> next{0};
  std::atomic<int> worst{kExitOk};
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      Job& j = work[i];
      int code = kExitOk;
      std::string line;
      try {
        RunOutcome o = run(*j.cfg, mode, j.opt);
        code = o.exit_code;
        line = j.label + ": " + mode_text + " " + o.status + " (exit " + std::to_string(code) + ")" +
               (o.out_dir.empty() ? "" : " -> " + o.out_dir.string());
        if (!o.message.empty()) line += ": " + o.message;
      } catch (const ConfigError& e) {
        code = kExitConfig;
        line = j.label + ": configuration error: " + e.what();
      } catch (const std::exception& e) {
        code = kExitConfig;
        line = j.label + ": " + e.what();
      }
      {
        std::lock_guard lock(io);
        (code == kExitOk ? out : err) << line << "\n";
      }
      int prev = worst.load();
      while (code > prev && !worst.compare_exchange_weak(prev, code)) {
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(work.size())));
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
  }
  return worst.load();
}

}  // namespace torus_ma
