#pragma once

#include "birksync/sync_model.hpp"

#include <cstdint>
#include <string>

namespace birksync {

enum class Connectivity { full, ring_chords };

Connectivity parse_connectivity(const std::string& s);
std::string to_string(Connectivity c);

struct GeneratorConfig {
  int num_nodes = 5;
  int n = 16;
  double swap_fraction = 0.25;
  Connectivity connectivity = Connectivity::full;
  double density = 0.3;  // chord probability for ring_chords
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticInstance {
  SyncProblem problem;
  GroundTruth truth;
};

/// Disjoint transpositions applied to every observed edge:
/// min(ceil(swap_fraction * n / 2), floor(n / 2)).
int swaps_per_edge(int n, double swap_fraction);

/// Random absolute permutations and, for each edge (i < j), the relative map
/// P_i P_j^T corrupted by swaps_per_edge() disjoint random transpositions.
/// Deterministic for a fixed config.
SyntheticInstance generate_synthetic(const GeneratorConfig& cfg);

}  // namespace birksync
