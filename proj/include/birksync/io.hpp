#pragma once

// JSON problem and solution files.
//
// Problem:  {"version": 1, "N": int, "n": int,
//            "edges": [{"i": int, "j": int, "perm": [int...]}...],
//            "ground_truth": [[int...]...]}            (ground_truth optional)
// Solution: {"version": 1, "perms": [[int...]...], "final_energy": number,
//            "recall"?, "initial_recall"?, "status"?, "iterations"?,
//            "trace"?: [{"iter", "energy", "gradnorm"}...],
//            "relaxed"?: [[[number...]...]...],
//            "confidence"?: [{"i", "j", "matrix": [[number...]...]}...],
//            "sampler"?: {...}}
// Permutation arrays are mappings (entry i is the image of i); matrices are
// nested row-major arrays.

#include "birksync/optimizer.hpp"
#include "birksync/sampler.hpp"
#include "birksync/sync_model.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace birksync {

inline constexpr int kFileVersion = 1;

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error("schema", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

struct ProblemFile {
  SyncProblem problem;
  std::optional<GroundTruth> truth;
};

struct SolutionFile {
  std::vector<Perm> perms;
  double final_energy = 0;
  std::optional<double> recall;
  std::optional<double> initial_recall;
  std::optional<std::string> status;
  std::optional<int> iterations;
  std::vector<TracePoint> trace;
  std::optional<SyncState<double>> relaxed;  // doubly stochastic state before rounding
  std::optional<ConfidenceMap<double>> confidence;
  nlohmann::json sampler;  // free-form sampler metadata, null when absent
};

nlohmann::json to_json(const ProblemFile& f);
ProblemFile problem_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SolutionFile& f);
SolutionFile solution_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::string& path);
/// `path` of "-" writes to stdout.
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace birksync
