#pragma once

#include "birksync/generator.hpp"
#include "birksync/optimizer.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace birksync {

inline constexpr const char* kBenchHeader = "N,n,swaps,method,seconds,recall";

struct BenchInstance {
  int num_nodes = 0;
  int n = 0;
  double swap_fraction = 0;
  std::uint64_t seed = 0;
};

struct BenchRow {
  BenchInstance instance;
  std::string method;  // "spectral" or "lrbfgs"
  double seconds = 0;
  double recall = 0;
};

/// `small`: N in {10, 20} x n in {16, 32} at 25% swaps. `full`: 28 tuples drawn
/// uniformly from N in [10, 100], n in [16, 100], swaps in [0.15, 0.35].
std::vector<BenchInstance> bench_grid(const std::string& preset, std::uint64_t seed);

/// Parallelism cap: BIRKSYNC_THREADS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
int thread_cap();

/// Runs every instance (up to `threads` at a time). Rows come back in grid order,
/// the spectral row of an instance before its solver row.
std::vector<BenchRow> run_bench(const std::vector<BenchInstance>& grid,
                                const OptimizerOptions& opts, int threads);

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace birksync
