#include "birksync/io.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace birksync {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(where + ": missing field '" + key + "'");
  return *it;
}

int as_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw SchemaError(where + ": expected an integer");
  return j.get<int>();
}

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw SchemaError(where + ": expected a number");
  return j.get<double>();
}

Perm as_perm(const json& j, int n, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": expected an integer array");
  if (static_cast<int>(j.size()) != n) {
    throw SchemaError(where + ": expected " + std::to_string(n) + " entries, got " +
                      std::to_string(j.size()));
  }
  std::vector<int> map;
  for (const auto& v : j) map.push_back(as_int(v, where));
  try {
    return Perm(std::move(map));
  } catch (const DomainError& e) {
    throw SchemaError(where + ": " + e.what());
  }
}

void check_version(const json& j, const std::string& where) {
  const int v = as_int(field(j, "version", where), where + ".version");
  if (v != kFileVersion) throw SchemaError(where + ": unsupported version " + std::to_string(v));
}

json matrix_to_json(const Matrix<double>& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix<double> matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw SchemaError(where + ": expected a non-empty matrix");
  const auto n = static_cast<Eigen::Index>(j.size());
  Matrix<double> m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const json& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      throw SchemaError(where + ": matrix must be square");
    }
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = as_number(row[c], where);
  }
  return m;
}

}  // namespace

json to_json(const ProblemFile& f) {
  const SyncProblem& p = f.problem;
  json j;
  j["version"] = kFileVersion;
  j["N"] = p.num_nodes();
  j["n"] = p.universe();
  json edges = json::array();
  for (const auto& e : p.edges()) {
    edges.push_back({{"i", e.i}, {"j", e.j}, {"perm", e.observed.mapping()}});
  }
  j["edges"] = std::move(edges);
  if (f.truth) {
    json gt = json::array();
    for (const auto& perm : f.truth->perms) gt.push_back(perm.mapping());
    j["ground_truth"] = std::move(gt);
  }
  return j;
}

ProblemFile problem_from_json(const json& j) {
  const std::string where = "problem";
  check_version(j, where);
  const int nodes = as_int(field(j, "N", where), "problem.N");
  const int n = as_int(field(j, "n", where), "problem.n");
  if (nodes < 1 || n < 1) throw SchemaError("problem: N and n must be positive");
  const json& ej = field(j, "edges", where);
  if (!ej.is_array()) throw SchemaError("problem.edges: expected an array");

  std::vector<Edge> edges;
  for (std::size_t k = 0; k < ej.size(); ++k) {
    const std::string w = "problem.edges[" + std::to_string(k) + "]";
    edges.push_back({as_int(field(ej[k], "i", w), w + ".i"), as_int(field(ej[k], "j", w), w + ".j"),
                     as_perm(field(ej[k], "perm", w), n, w + ".perm")});
  }

  std::optional<SyncProblem> problem;
  try {
    problem.emplace(nodes, n, std::move(edges));
  } catch (const Error& e) {
    throw SchemaError(std::string("problem: ") + e.what());
  }

  ProblemFile out{std::move(*problem), std::nullopt};
  if (auto it = j.find("ground_truth"); it != j.end() && !it->is_null()) {
    if (!it->is_array() || static_cast<int>(it->size()) != nodes) {
      throw SchemaError("problem.ground_truth: expected N permutations");
    }
    GroundTruth gt;
    for (std::size_t k = 0; k < it->size(); ++k) {
      gt.perms.push_back(as_perm((*it)[k], n, "problem.ground_truth[" + std::to_string(k) + "]"));
    }
    out.truth = std::move(gt);
  }
  return out;
}

json to_json(const SolutionFile& f) {
  json j;
  j["version"] = kFileVersion;
  json perms = json::array();
  for (const auto& p : f.perms) perms.push_back(p.mapping());
  j["perms"] = std::move(perms);
  j["final_energy"] = f.final_energy;
  if (f.recall) j["recall"] = *f.recall;
  if (f.initial_recall) j["initial_recall"] = *f.initial_recall;
  if (f.status) j["status"] = *f.status;
  if (f.iterations) j["iterations"] = *f.iterations;
  if (!f.trace.empty()) {
    json trace = json::array();
    for (const auto& t : f.trace) {
      trace.push_back({{"iter", t.iteration}, {"energy", t.energy}, {"gradnorm", t.grad_norm}});
    }
    j["trace"] = std::move(trace);
  }
  if (f.relaxed) {
    json relaxed = json::array();
    for (const auto& x : *f.relaxed) relaxed.push_back(matrix_to_json(x));
    j["relaxed"] = std::move(relaxed);
  }
  if (f.confidence) {
    json conf = json::array();
    for (const auto& e : f.confidence->edges) {
      conf.push_back({{"i", e.i}, {"j", e.j}, {"matrix", matrix_to_json(e.matrix)}});
    }
    j["confidence"] = std::move(conf);
  }
  if (!f.sampler.is_null()) j["sampler"] = f.sampler;
  return j;
}

SolutionFile solution_from_json(const json& j) {
  const std::string where = "solution";
  check_version(j, where);
  SolutionFile f;
  const json& pj = field(j, "perms", where);
  if (!pj.is_array() || pj.empty()) throw SchemaError("solution.perms: expected a non-empty array");
  const json& first = pj.front();
  if (!first.is_array() || first.empty()) throw SchemaError("solution.perms[0]: expected an array");
  const int n = static_cast<int>(first.size());
  for (std::size_t k = 0; k < pj.size(); ++k) {
    f.perms.push_back(as_perm(pj[k], n, "solution.perms[" + std::to_string(k) + "]"));
  }
  f.final_energy = as_number(field(j, "final_energy", where), "solution.final_energy");
  if (auto it = j.find("recall"); it != j.end()) f.recall = as_number(*it, "solution.recall");
  if (auto it = j.find("initial_recall"); it != j.end()) {
    f.initial_recall = as_number(*it, "solution.initial_recall");
  }
  if (auto it = j.find("status"); it != j.end()) {
    if (!it->is_string()) throw SchemaError("solution.status: expected a string");
    f.status = it->get<std::string>();
  }
  if (auto it = j.find("iterations"); it != j.end()) f.iterations = as_int(*it, "solution.iterations");
  if (auto it = j.find("trace"); it != j.end()) {
    if (!it->is_array()) throw SchemaError("solution.trace: expected an array");
    for (const auto& t : *it) {
      f.trace.push_back({as_int(field(t, "iter", "solution.trace"), "solution.trace.iter"),
                         as_number(field(t, "energy", "solution.trace"), "solution.trace.energy"),
                         as_number(field(t, "gradnorm", "solution.trace"), "solution.trace.gradnorm")});
    }
  }
  if (auto it = j.find("relaxed"); it != j.end()) {
    if (!it->is_array() || it->size() != f.perms.size()) {
      throw SchemaError("solution.relaxed: expected one matrix per node");
    }
    SyncState<double> xs;
    for (std::size_t k = 0; k < it->size(); ++k) {
      const std::string w = "solution.relaxed[" + std::to_string(k) + "]";
      Matrix<double> m = matrix_from_json((*it)[k], w);
      if (m.rows() != n) throw SchemaError(w + ": matrix size does not match perms");
      if (!is_doubly_stochastic(m, 1e-6)) throw SchemaError(w + ": not doubly stochastic");
      xs.push_back(std::move(m));
    }
    f.relaxed = std::move(xs);
  }
  if (auto it = j.find("confidence"); it != j.end()) {
    if (!it->is_array()) throw SchemaError("solution.confidence: expected an array");
    ConfidenceMap<double> cm;
    for (const auto& e : *it) {
      const std::string w = "solution.confidence";
      Matrix<double> m = matrix_from_json(field(e, "matrix", w), w + ".matrix");
      if (m.rows() != n) throw SchemaError(w + ": matrix size does not match perms");
      cm.edges.push_back({as_int(field(e, "i", w), w + ".i"), as_int(field(e, "j", w), w + ".j"),
                          std::move(m)});
    }
    f.confidence = std::move(cm);
  }
  if (auto it = j.find("sampler"); it != j.end()) f.sampler = *it;
  return f;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  if (path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace birksync
