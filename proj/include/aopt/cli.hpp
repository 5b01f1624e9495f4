#pragma once

// Command-line front end. Results go to stdout (or --out), diagnostics to
// stderr. Exit codes: 0 success, 2 invalid input or usage, 3 infeasible or
// singular problem, 4 non-convergence.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "aopt/design.hpp"
#include "aopt/errors.hpp"
#include "aopt/evaluation.hpp"
#include "aopt/forlion.hpp"
#include "aopt/io.hpp"
#include "aopt/liftone.hpp"
#include "aopt/parallel.hpp"
#include "aopt/rounding.hpp"

namespace aopt::cli {

enum ExitCode : int { kOk = 0, kInvalid = 2, kInfeasible = 3, kNonConvergence = 4 };

inline constexpr std::uint64_t kDefaultSeed = 20240601;

namespace detail {

/// Flag value, else $AOPT_SEED, else `fallback`.
inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback = kDefaultSeed) {
  if (flag) return *flag;
  if (const char* env = std::getenv("AOPT_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw InvalidArgument("AOPT_SEED is not a nonnegative integer");
  }
  return fallback;
}

inline void emit(const std::string& text, const std::string& file, std::ostream& out) {
  if (file.empty()) {
    out << text;
    return;
  }
  std::ofstream f(file);
  if (!f) throw InvalidArgument("cannot write " + file);
  f << text;
}

inline std::string dump(const io::Json& j) { return j.dump(2) + "\n"; }

/// Candidate points for lift-one: explicit candidates, else a fully discrete space.
inline std::vector<Point> finite_candidates(const io::ProblemSpec& spec) {
  if (spec.candidates) return *spec.candidates;
  if (spec.space->num_continuous() > 0)
    throw io::SchemaError("/space", "space has continuous factors; use 'forlion' or give 'candidates'");
  std::vector<Point> pts;
  for (const auto& combo : spec.space->discrete_combinations()) pts.push_back(spec.space->compose(Vector(0), combo));
  return pts;
}

}  // namespace detail

struct LiftoneArgs {
  std::string spec, out, init = "uniform";
  double epsilon = 1e-10;
  int max_sweeps = 10000;
  std::optional<std::uint64_t> seed;
};

struct ForlionArgs {
  std::string spec, out, trace;
  double delta = 0.1, epsilon = 1e-6;
  int multistart = 5, max_outer = 500;
  int threads = aopt::detail::default_threads();
  std::optional<std::uint64_t> seed;
};

struct RoundArgs {
  std::string design, out;
  long n = 0;
};

struct VerifyArgs {
  std::string design, spec, out;
  int grid = 0;
  double tol = 1e-6;
};

struct SimulateArgs {
  std::string study, out, summary;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  int threads = aopt::detail::default_threads();
};

inline int cmd_liftone(const LiftoneArgs& a, std::ostream& out) {
  const auto spec = io::read_spec(a.spec);
  const auto pts = detail::finite_candidates(spec);
  LiftOneOptions opt;
  opt.epsilon = a.epsilon;
  opt.max_sweeps = a.max_sweeps;
  opt.seed = detail::resolve_seed(a.seed);
  opt.init = a.init == "random" ? InitKind::RandomExponential : InitKind::Uniform;
  opt.initial_weights = spec.initial_weights;
  const auto r = liftone_optimize(spec.model, pts, opt);
  detail::emit(detail::dump(io::liftone_to_json(spec.model, r)), a.out, out);
  return kOk;
}

inline int cmd_forlion(const ForlionArgs& a, std::ostream& out) {
  const auto spec = io::read_spec(a.spec);
  if (!spec.space) throw io::SchemaError("/space", "forlion needs a design space");
  if (spec.candidates) throw io::SchemaError("/candidates", "forlion searches the space; remove 'candidates'");
  ForlionConfig cfg;
  cfg.delta = a.delta;
  cfg.epsilon = a.epsilon;
  cfg.multistart = a.multistart;
  cfg.max_outer = a.max_outer;
  cfg.threads = a.threads;
  cfg.seed = detail::resolve_seed(a.seed);
  const auto r = forlion_optimize(spec.model, *spec.space, cfg);
  detail::emit(detail::dump(io::forlion_to_json(spec.model, r, cfg.seed)), a.out, out);
  if (!a.trace.empty()) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "iter,h,m_t,phi_star,alpha_t\n";
    for (const auto& row : r.trace)
      csv << row.iter << ',' << row.h << ',' << row.m_t << ',' << row.phi_star << ',' << row.alpha_t << '\n';
    detail::emit(csv.str(), a.trace, out);
  }
  return kOk;
}

inline int cmd_round(const RoundArgs& a, std::ostream& out) {
  if (a.n < 1) throw InvalidArgument("--n must be at least 1");
  const auto f = io::parse_design(io::read_json_file(a.design));
  ApproximateDesign d = f.design;
  d.weights /= d.weights.sum();
  const auto e = round_allocation(f.model, d, a.n);
  detail::emit(detail::dump(io::exact_to_json(f.model, e)), a.out, out);
  return kOk;
}

inline int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  const auto f = io::parse_design(io::read_json_file(a.design));
  const auto spec = io::read_spec(a.spec);
  Certificate c;
  int grid = a.grid;
  if (spec.candidates) {
    c = certify(f.model, f.design, *spec.candidates, a.tol);
  } else {
    const int s = spec.space->num_continuous();
    if (grid == 0) grid = s == 0 ? 2 : std::max(3, static_cast<int>(std::floor(std::pow(1e5, 1.0 / s))));
    c = certify(f.model, f.design, *spec.space, grid, a.tol);
  }
  io::Json j{{"max_phi", c.max_phi},
             {"argmax", io::detail::to_json(c.argmax)},
             {"trace_inverse", c.trace_inverse},
             {"slack", c.slack},
             {"tolerance", a.tol},
             {"evaluations", c.evaluations},
             {"verdict", c.certified ? "A-optimal" : "not A-optimal"}};
  if (!spec.candidates) j["grid"] = grid;
  detail::emit(detail::dump(j), a.out, out);
  return kOk;
}

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const auto j = io::read_json_file(a.study);
  auto cfg = io::parse_study(j);
  if (a.reps) {
    if (*a.reps < 1) throw InvalidArgument("--reps must be positive");
    cfg.replications = *a.reps;
  }
  cfg.seed = a.seed ? *a.seed : j.contains("seed") ? cfg.seed : detail::resolve_seed(std::nullopt);
  cfg.threads = a.threads;
  const auto rep = run_stratified_study(cfg);
  std::ostringstream csv;
  write_study_csv(csv, rep);
  detail::emit(csv.str(), a.out, out);
  if (!a.summary.empty())
    detail::emit(detail::dump({{"seed", cfg.seed}, {"replications", cfg.replications},
                               {"samplers", io::study_summary_to_json(rep)}}),
                 a.summary, out);
  return kOk;
}

/// Maps library exceptions to exit codes; messages go to `err`.
template <class F>
int guarded(F&& f, std::ostream& err) {
  try {
    return f();
  } catch (const InfeasibleError& e) {
    err << "error: " << e.what() << '\n';
    return kInfeasible;
  } catch (const SingularError& e) {
    err << "error: " << e.what() << '\n';
    return kInfeasible;
  } catch (const RankError& e) {
    err << "error: " << e.what() << '\n';
    return kInfeasible;
  } catch (const NonConvergence& e) {
    err << "error: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"A-optimal designs for generalized linear models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "aopt 1.0.0");

  LiftoneArgs la;
  auto* lift = app.add_subcommand("liftone", "Optimize weights on a finite candidate set");
  lift->add_option("spec", la.spec, "Problem specification (JSON)")->required()->check(CLI::ExistingFile);
  lift->add_option("-o,--out", la.out, "Write the design here instead of stdout");
  lift->add_option("--epsilon", la.epsilon, "Stop when a sweep improves h by at most epsilon*h")->check(CLI::PositiveNumber);
  lift->add_option("--max-sweeps", la.max_sweeps, "Sweep cap")->check(CLI::PositiveNumber);
  lift->add_option("--init", la.init, "Initial weights")->check(CLI::IsMember({"uniform", "random"}));
  lift->add_option("--seed", la.seed, "Random seed (default: $AOPT_SEED)");

  ForlionArgs fa;
  auto* forl = app.add_subcommand("forlion", "Search a box x finite-grid design space");
  forl->add_option("spec", fa.spec, "Problem specification (JSON)")->required()->check(CLI::ExistingFile);
  forl->add_option("-o,--out", fa.out, "Write the design here instead of stdout");
  forl->add_option("--trace", fa.trace, "Write the iteration trace CSV here");
  forl->add_option("--delta", fa.delta, "Merge threshold")->check(CLI::PositiveNumber);
  forl->add_option("--epsilon", fa.epsilon, "Lift-one threshold")->check(CLI::PositiveNumber);
  forl->add_option("--multistart", fa.multistart, "Random starts per discrete combination")->check(CLI::PositiveNumber);
  forl->add_option("--max-outer", fa.max_outer, "Outer iteration cap")->check(CLI::PositiveNumber);
  forl->add_option("--threads", fa.threads, "Worker threads")->check(CLI::PositiveNumber);
  forl->add_option("--seed", fa.seed, "Random seed (default: $AOPT_SEED)");

  RoundArgs ra;
  auto* rnd = app.add_subcommand("round", "Round a design to an exact allocation of n units");
  rnd->add_option("design", ra.design, "Design (JSON)")->required()->check(CLI::ExistingFile);
  rnd->add_option("-n,--n", ra.n, "Number of units")->required();
  rnd->add_option("-o,--out", ra.out, "Write the allocation here instead of stdout");

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "Check the equivalence condition for a design");
  ver->add_option("design", va.design, "Design (JSON)")->required()->check(CLI::ExistingFile);
  ver->add_option("spec", va.spec, "Problem specification (JSON)")->required()->check(CLI::ExistingFile);
  ver->add_option("--grid", va.grid, "Grid points per continuous factor (default: about 1e5 cells)")
      ->check(CLI::Range(2, 100000));
  ver->add_option("--tol", va.tol, "Relative slack accepted")->check(CLI::NonNegativeNumber);
  ver->add_option("-o,--out", va.out, "Write the report here instead of stdout");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Run a stratified-sampling study");
  sim->add_option("study", sa.study, "Study specification (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--reps", sa.reps, "Replications (overrides the study file)");
  sim->add_option("--seed", sa.seed, "Master seed (overrides the study file, then $AOPT_SEED)");
  sim->add_option("--threads", sa.threads, "Worker threads")->check(CLI::PositiveNumber);
  sim->add_option("-o,--out", sa.out, "Write the per-replication CSV here instead of stdout");
  sim->add_option("--summary", sa.summary, "Write per-sampler means and sds (JSON) here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalid;
  }

  return guarded(
      [&] {
        if (*lift) return cmd_liftone(la, out);
        if (*forl) return cmd_forlion(fa, out);
        if (*rnd) return cmd_round(ra, out);
        if (*ver) return cmd_verify(va, out);
        return cmd_simulate(sa, out);
      },
      err);
}

}  // namespace aopt::cli
