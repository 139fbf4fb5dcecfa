#include "birksync/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

namespace birksync {

std::vector<BenchInstance> bench_grid(const std::string& preset, std::uint64_t seed) {
  std::vector<BenchInstance> grid;
  if (preset == "small") {
    for (int nodes : {10, 20}) {
      for (int n : {16, 32}) grid.push_back({nodes, n, 0.25, seed + grid.size()});
    }
  } else if (preset == "full") {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> nodes(10, 100), size(16, 100);
    std::uniform_real_distribution<double> swaps(0.15, 0.35);
    for (int k = 0; k < 28; ++k) {
      const int a = nodes(rng), b = size(rng);
      const double s = std::round(swaps(rng) * 100) / 100;
      grid.push_back({a, b, s, seed + static_cast<std::uint64_t>(k)});
    }
  } else {
    throw InvariantError("unknown bench grid '" + preset + "' (expected small or full)");
  }
  return grid;
}

int thread_cap() {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BIRKSYNC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) cap = static_cast<int>(v);
  }
  return cap < 1 ? 1 : cap;
}

namespace {

std::pair<BenchRow, BenchRow> run_instance(const BenchInstance& inst, const OptimizerOptions& opts) {
  using clock = std::chrono::steady_clock;
  const SyntheticInstance s = generate_synthetic(
      {inst.num_nodes, inst.n, inst.swap_fraction, Connectivity::full, 0.0, inst.seed});

  const auto t0 = clock::now();
  SpectralOptions sopts;
  sopts.seed = inst.seed;
  const SyncState<double> init = spectral_init<double>(s.problem, sopts);
  const std::vector<Perm> init_round = round_state(init);
  const double init_seconds = std::chrono::duration<double>(clock::now() - t0).count();

  const auto t1 = clock::now();
  const auto [state, report] = lrbfgs_solve(s.problem, init, opts);
  const double solve_seconds = std::chrono::duration<double>(clock::now() - t1).count();

  return {BenchRow{inst, "spectral", init_seconds, recall(init_round, s.truth, s.problem)},
          BenchRow{inst, "lrbfgs", solve_seconds, recall(report.rounded, s.truth, s.problem)}};
}

}  // namespace

std::vector<BenchRow> run_bench(const std::vector<BenchInstance>& grid,
                                const OptimizerOptions& opts, int threads) {
  std::vector<std::pair<BenchRow, BenchRow>> results(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < grid.size(); k = next++) {
      try {
        results[k] = run_instance(grid[k], opts);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(grid.size())));
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<BenchRow> rows;
  for (auto& [a, b] : results) {
    rows.push_back(std::move(a));
    rows.push_back(std::move(b));
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << kBenchHeader << '\n';
  for (const auto& r : rows) {
    out << r.instance.num_nodes << ',' << r.instance.n << ',' << r.instance.swap_fraction << ','
        << r.method << ',' << r.seconds << ',' << r.recall << '\n';
  }
}

}  // namespace birksync
