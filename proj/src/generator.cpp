#include "birksync/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace birksync {

Connectivity parse_connectivity(const std::string& s) {
  if (s == "full") return Connectivity::full;
  if (s == "ring" || s == "ring+chords" || s == "ring_chords") return Connectivity::ring_chords;
  throw InvariantError("unknown connectivity '" + s + "' (expected full or ring)");
}

std::string to_string(Connectivity c) { return c == Connectivity::full ? "full" : "ring"; }

void GeneratorConfig::validate() const {
  if (num_nodes < 2) throw InvariantError("generator: need at least 2 nodes for a connected graph");
  if (n < 1) throw InvalidDimension("generator: n must be positive");
  if (!(swap_fraction >= 0 && swap_fraction <= 1)) {
    throw InvariantError("generator: swap_fraction must lie in [0, 1]");
  }
  if (!(density >= 0 && density <= 1)) throw InvariantError("generator: density must lie in [0, 1]");
}

int swaps_per_edge(int n, double swap_fraction) {
  const int wanted = static_cast<int>(std::ceil(swap_fraction * n / 2.0 - 1e-12));
  return std::clamp(wanted, 0, n / 2);
}

SyntheticInstance generate_synthetic(const GeneratorConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const int nodes = cfg.num_nodes, n = cfg.n;

  GroundTruth gt;
  for (int i = 0; i < nodes; ++i) gt.perms.push_back(Perm::random(n, rng));

  std::vector<std::pair<int, int>> pairs;
  if (cfg.connectivity == Connectivity::full) {
    for (int i = 0; i < nodes; ++i) {
      for (int j = i + 1; j < nodes; ++j) pairs.emplace_back(i, j);
    }
  } else {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int i = 0; i < nodes; ++i) {
      for (int j = i + 1; j < nodes; ++j) {
        const bool ring = j == i + 1 || (i == 0 && j == nodes - 1);
        const double draw = coin(rng);
        if (ring || draw < cfg.density) pairs.emplace_back(i, j);
      }
    }
  }

  const int swaps = swaps_per_edge(n, cfg.swap_fraction);
  std::vector<int> idx(n);
  std::vector<Edge> edges;
  for (const auto& [i, j] : pairs) {
    std::vector<int> map = relative(gt.perms[i], gt.perms[j]).mapping();
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int s = 0; s < swaps; ++s) std::swap(map[idx[2 * s]], map[idx[2 * s + 1]]);
    edges.push_back({i, j, Perm(std::move(map))});
  }

  SyncProblem problem(nodes, n, std::move(edges));
  if (!problem.is_connected()) throw InvariantError("generator: generated graph is disconnected");
  return {std::move(problem), std::move(gt)};
}

}  // namespace birksync
