#include "birksync/cli.hpp"

#include "birksync/bench.hpp"
#include "birksync/generator.hpp"
#include "birksync/io.hpp"
#include "birksync/optimizer.hpp"
#include "birksync/sampler.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <random>

namespace birksync {

using nlohmann::json;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kSchema = 3, kConvergence = 4, kIo = 5 };

void emit_json(const std::string& path, const json& j, std::ostream& out) {
  if (path == "-") {
    out << j.dump(2) << '\n';
  } else {
    write_json_file(path, j);
  }
}

void warn(std::ostream& err, const std::string& message) {
  err << json{{"warning", message}}.dump() << '\n';
}

ProblemFile load_problem(const std::string& path, std::ostream& err) {
  ProblemFile f = problem_from_json(read_json_file(path));
  if (!f.problem.is_connected()) warn(err, "problem graph is disconnected; recall is gauge-dependent");
  return f;
}

int resolve_threads(int requested) { return std::max(1, std::min(requested, thread_cap())); }

struct GenerateArgs {
  GeneratorConfig cfg;
  std::string connectivity = "full";
  std::string out = "-";
};

struct SolveArgs {
  std::string problem, out = "-", init = "spectral", init_file, line_search = "strong_wolfe";
  std::uint64_t seed = 0;
  bool steepest = false, anchor = false;
  OptimizerOptions opts;
};

struct SampleArgs {
  std::string problem, solution, out = "-";
  SamplerOptions opts;
};

struct EvalArgs {
  std::string problem, solution;
  int max_k = 3, trials = 1000;
  std::uint64_t seed = 0;
};

struct BenchArgs {
  std::string grid = "small", out = "-";
  std::uint64_t seed = 0;
  int max_iters = 500;
};

int do_generate(GenerateArgs& a, std::ostream& out) {
  a.cfg.connectivity = parse_connectivity(a.connectivity);
  SyntheticInstance s = generate_synthetic(a.cfg);
  emit_json(a.out, to_json(ProblemFile{std::move(s.problem), std::move(s.truth)}), out);
  return kOk;
}

int do_solve(SolveArgs& a, std::ostream& out, std::ostream& err) {
  const ProblemFile pf = load_problem(a.problem, err);
  const SyncProblem& p = pf.problem;
  if (a.line_search == "armijo") {
    a.opts.line_search = LineSearchKind::armijo;
  } else if (a.line_search != "strong_wolfe") {
    throw InvariantError("unknown line search '" + a.line_search + "'");
  }
  if (a.steepest) a.opts.direction = DirectionKind::steepest;
  a.opts.threads = resolve_threads(a.opts.threads);

  SyncState<double> init;
  if (a.init == "spectral") {
    SpectralOptions so;
    so.seed = a.seed;
    bool converged = true;
    init = spectral_init<double>(p, so, &converged);
    if (!converged) warn(err, "spectral initialisation did not converge; using a random state");
  } else if (a.init == "random") {
    init = random_state<double>(p.num_nodes(), p.universe(), a.seed);
  } else if (a.init == "identity") {
    init = identity_state<double>(p.num_nodes(), p.universe());
  } else if (a.init == "file") {
    if (a.init_file.empty()) throw InvariantError("--init file requires --init-file");
    const SolutionFile sf = solution_from_json(read_json_file(a.init_file));
    if (static_cast<int>(sf.perms.size()) != p.num_nodes() || sf.perms.front().size() != p.universe()) {
      throw SchemaError("init file does not match the problem dimensions");
    }
    init = dense_state<double>(sf.perms);
  } else {
    throw InvariantError("unknown init '" + a.init + "' (expected spectral, random, identity or file)");
  }

  const std::vector<Perm> init_round = round_state(init);
  const auto [state, report] = lrbfgs_solve(p, init, a.opts);

  SolutionFile sf;
  sf.perms = a.anchor ? anchor_to_first(report.rounded) : report.rounded;
  sf.final_energy = report.final_energy;
  sf.status = to_string(report.status);
  sf.iterations = report.iterations;
  sf.trace = report.trace;
  sf.relaxed = state;
  if (a.anchor && !state.empty()) {
    const Matrix<double> back = report.rounded.front().dense<double>().transpose();
    for (auto& x : *sf.relaxed) x = x * back;
  }
  if (pf.truth && !p.edges().empty()) {
    sf.recall = recall(sf.perms, *pf.truth, p);
    sf.initial_recall = recall(init_round, *pf.truth, p);
  }
  emit_json(a.out, to_json(sf), out);
  return kOk;
}

int do_sample(SampleArgs& a, std::ostream& out, std::ostream& err) {
  const ProblemFile pf = load_problem(a.problem, err);
  const SyncProblem& p = pf.problem;
  SolutionFile sf = solution_from_json(read_json_file(a.solution));
  if (static_cast<int>(sf.perms.size()) != p.num_nodes() || sf.perms.front().size() != p.universe()) {
    throw SchemaError("solution does not match the problem dimensions");
  }
  a.opts.threads = resolve_threads(a.opts.threads);
  const SyncState<double> init = sf.relaxed ? *sf.relaxed : dense_state<double>(sf.perms);
  const SampleSet<double> samples = rlmc_sample(p, init, a.opts);
  if (!samples.ok) {
    throw ConvergenceError("sampler aborted after " + std::to_string(samples.iterations_run) +
                               " iterations: " + samples.error,
                           0.0, samples.iterations_run);
  }
  sf.confidence = confidence_map(samples, p.edge_pairs());
  sf.sampler = {{"step", a.opts.step},
                {"beta", a.opts.beta},
                {"iterations", a.opts.iterations},
                {"burn_in_fraction", a.opts.burn_in_fraction},
                {"thin", a.opts.thin},
                {"seed", a.opts.seed},
                {"max_log_step", a.opts.max_log_step},
                {"capped_steps", samples.capped_steps},
                {"retained", samples.states.size()},
                {"clamped_entries", samples.retraction.clamped_entries},
                {"underflow_entries", samples.retraction.underflow_entries}};
  emit_json(a.out, to_json(sf), out);
  return kOk;
}

int do_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const ProblemFile pf = load_problem(a.problem, err);
  const SyncProblem& p = pf.problem;
  if (!pf.truth) throw SchemaError("eval requires a problem file with ground_truth");
  if (p.edges().empty()) throw InvariantError("eval requires at least one edge");
  const SolutionFile sf = solution_from_json(read_json_file(a.solution));
  if (static_cast<int>(sf.perms.size()) != p.num_nodes() || sf.perms.front().size() != p.universe()) {
    throw SchemaError("solution does not match the problem dimensions");
  }

  out << "metric,K,value\n";
  out << "recall,1," << recall(sf.perms, *pf.truth, p) << '\n';
  if (sf.initial_recall) out << "initial_recall,1," << *sf.initial_recall << '\n';
  if (!sf.confidence) return kOk;

  const int max_k = std::clamp(a.max_k, 1, p.universe());
  std::mt19937_64 rng(a.seed);
  const auto pairs = p.edge_pairs();
  for (int k = 1; k <= max_k; ++k) {
    out << "topk," << k << ',' << topk_recall(sf.perms, topk_hypotheses(*sf.confidence, k), *pf.truth)
        << '\n';
  }
  for (int k = 1; k <= max_k; ++k) {
    double acc = 0;
    for (int t = 0; t < a.trials; ++t) {
      acc += topk_recall(sf.perms, random_hypotheses(sf.perms, pairs, k, rng), *pf.truth);
    }
    out << "random_topk," << k << ',' << acc / std::max(1, a.trials) << '\n';
  }
  return kOk;
}

int do_bench(const BenchArgs& a, std::ostream& out) {
  OptimizerOptions opts;
  opts.max_iters = a.max_iters;
  const std::vector<BenchRow> rows = run_bench(bench_grid(a.grid, a.seed), opts, thread_cap());
  if (a.out == "-") {
    write_bench_csv(out, rows);
  } else {
    std::ofstream f(a.out);
    if (!f) throw IoError("cannot open '" + a.out + "' for writing");
    write_bench_csv(f, rows);
  }
  return kOk;
}

int report_error(std::ostream& err, const std::string& kind, const std::string& message, int code) {
  err << json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Permutation synchronisation on the Birkhoff polytope", "birksync"};
  app.require_subcommand(1);

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "write a synthetic problem");
  gen->add_option("--N", ga.cfg.num_nodes, "node count")->required();
  gen->add_option("--n", ga.cfg.n, "universe size")->required();
  gen->add_option("--swaps", ga.cfg.swap_fraction, "swap fraction in [0, 1]")->capture_default_str();
  gen->add_option("--seed", ga.cfg.seed)->capture_default_str();
  gen->add_option("--connectivity", ga.connectivity, "full or ring")->capture_default_str();
  gen->add_option("--density", ga.cfg.density, "chord probability for ring")->capture_default_str();
  gen->add_option("--out,-o", ga.out, "output path, - for stdout")->capture_default_str();

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "MAP estimate by LR-BFGS");
  solve->add_option("--problem,-p", sa.problem)->required();
  solve->add_option("--out,-o", sa.out)->capture_default_str();
  solve->add_option("--init", sa.init, "spectral, random, identity or file")->capture_default_str();
  solve->add_option("--init-file", sa.init_file, "solution file used by --init file");
  solve->add_option("--seed", sa.seed)->capture_default_str();
  solve->add_option("--memory", sa.opts.memory)->capture_default_str();
  solve->add_option("--max-iters", sa.opts.max_iters)->capture_default_str();
  solve->add_option("--grad-tol", sa.opts.grad_tol)->capture_default_str();
  solve->add_option("--c1", sa.opts.wolfe_c1)->capture_default_str();
  solve->add_option("--c2", sa.opts.wolfe_c2)->capture_default_str();
  solve->add_option("--line-search", sa.line_search, "strong_wolfe or armijo")->capture_default_str();
  solve->add_option("--max-ls-steps", sa.opts.max_ls_steps)->capture_default_str();
  solve->add_option("--threads", sa.opts.threads)->capture_default_str();
  solve->add_flag("--steepest", sa.steepest, "steepest descent instead of L-BFGS");
  solve->add_flag("--anchor", sa.anchor, "fix the gauge so that node 0 is the identity");

  SampleArgs ma;
  auto* sample = app.add_subcommand("sample", "posterior confidence by Langevin sampling");
  sample->add_option("--problem,-p", ma.problem)->required();
  sample->add_option("--solution,-s", ma.solution)->required();
  sample->add_option("--out,-o", ma.out)->capture_default_str();
  sample->add_option("--step", ma.opts.step)->capture_default_str();
  sample->add_option("--beta", ma.opts.beta)->capture_default_str();
  sample->add_option("--iterations", ma.opts.iterations)->capture_default_str();
  sample->add_option("--burn-in", ma.opts.burn_in_fraction)->capture_default_str();
  sample->add_option("--thin", ma.opts.thin)->capture_default_str();
  sample->add_option("--max-log-step", ma.opts.max_log_step)->capture_default_str();
  sample->add_option("--seed", ma.opts.seed)->capture_default_str();
  sample->add_option("--threads", ma.opts.threads)->capture_default_str();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "recall and top-K recall as CSV");
  eval->add_option("--problem,-p", ea.problem)->required();
  eval->add_option("--solution,-s", ea.solution)->required();
  eval->add_option("--max-k", ea.max_k)->capture_default_str();
  eval->add_option("--trials", ea.trials, "random baseline trials")->capture_default_str();
  eval->add_option("--seed", ea.seed)->capture_default_str();

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "timing and recall grid as CSV");
  bench->add_option("--grid", ba.grid, "small or full")->capture_default_str();
  bench->add_option("--seed", ba.seed)->capture_default_str();
  bench->add_option("--max-iters", ba.max_iters)->capture_default_str();
  bench->add_option("--out,-o", ba.out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    return report_error(err, "usage", e.what(), kUsage);
  }

  try {
    if (gen->parsed()) return do_generate(ga, out);
    if (solve->parsed()) return do_solve(sa, out, err);
    if (sample->parsed()) return do_sample(ma, out, err);
    if (eval->parsed()) return do_eval(ea, out, err);
    if (bench->parsed()) return do_bench(ba, out);
  } catch (const SchemaError& e) {
    return report_error(err, e.kind(), e.what(), kSchema);
  } catch (const IoError& e) {
    return report_error(err, e.kind(), e.what(), kIo);
  } catch (const ConvergenceError& e) {
    return report_error(err, e.kind(), e.what(), kConvergence);
  } catch (const NumericError& e) {
    return report_error(err, e.kind(), e.what(), kConvergence);
  } catch (const Error& e) {
    return report_error(err, e.kind(), e.what(), kFailure);
  } catch (const std::exception& e) {
    return report_error(err, "internal", e.what(), kFailure);
  }
  return report_error(err, "usage", "no subcommand given", kUsage);
}

}  // namespace birksync
