#pragma once

// Riemannian Langevin Monte Carlo on the product of Birkhoff polytopes with the
// retraction Euler integrator, confidence maps and top-K hypothesis evaluation.

#include "birksync/common.hpp"
#include "birksync/manifold.hpp"
#include "birksync/sync_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace birksync {

struct SamplerOptions {
  double step = 1e-4;           // h
  double beta = 0.085;          // dispersion
  int iterations = 1000;
  double burn_in_fraction = 0.1;
  int thin = 1;
  std::uint64_t seed = 0;
  double init_perturbation = 0.01;  // blend of the initial state toward C_n
  double max_log_step = 2.0;        // V is scaled down so that |V ./ X| stays below this
  bool zero_noise = false;          // test hook: drop the Gaussian term entirely
  GradientMetric metric = GradientMetric::fisher;
  int threads = 1;
  SinkhornOptions sinkhorn{1e-9, 10000};

  void validate() const {
    if (!(step > 0)) throw InvariantError("SamplerOptions: step must be > 0");
    if (!(beta > 0)) throw InvariantError("SamplerOptions: beta must be > 0");
    if (iterations < 1) throw InvariantError("SamplerOptions: iterations must be >= 1");
    if (!(burn_in_fraction >= 0 && burn_in_fraction < 1)) {
      throw InvariantError("SamplerOptions: burn_in_fraction must lie in [0, 1)");
    }
    if (thin < 1) throw InvariantError("SamplerOptions: thin must be >= 1");
    if (!(max_log_step > 0)) throw InvariantError("SamplerOptions: max_log_step must be > 0");
    if (!(init_perturbation >= 0 && init_perturbation < 1)) {
      throw InvariantError("SamplerOptions: init_perturbation must lie in [0, 1)");
    }
  }
};

template <typename Scalar>
struct SampleSet {
  std::vector<SyncState<Scalar>> states;  // retained draws
  std::vector<Scalar> energies;           // U of each retained draw
  int iterations_run = 0;
  RetractDiagnostics retraction{};
  long capped_steps = 0;  // node updates shortened by max_log_step
  bool ok = true;
  std::string error;  // set when the chain aborted early
};

/// Burn-in and thinning: iteration k (1-based) is kept when k > burn-in and
/// (k - burn-in) is a multiple of `thin`.
inline bool is_retained(int k, const SamplerOptions& opts) {
  const int burn = static_cast<int>(std::floor(opts.burn_in_fraction * opts.iterations));
  return k > burn && (k - burn) % opts.thin == 0;
}

/// Chain with V_i = Pi_{X_i}(-h G^-1 grad_i U + (h / beta) div G^-1
/// + sqrt(2h / beta) G^-1/2 Z_i) and X_i <- R_{X_i}(V_i), all nodes updated
/// from the same iterate. G^-1 is the elementwise product with X_i for the
/// Fisher metric and the identity for the embedded one, whose divergence term
/// vanishes. V is shortened when some |V ./ X| exceeds max_log_step. The
/// zero-noise hook drops every 1/beta term.
template <typename Scalar>
SampleSet<Scalar> rlmc_sample(const SyncProblem& p, const SyncState<Scalar>& init,
                              const SamplerOptions& opts = {}) {
  opts.validate();
  check_state(p, init, "rlmc_sample");
  const int n = p.universe();
  const Scalar h = Scalar(opts.step);
  const Scalar noise_scale = std::sqrt(Scalar(2) * h / Scalar(opts.beta));

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SampleSet<Scalar> out;

  SyncState<Scalar> xs;
  for (const auto& x : init) {
    xs.push_back(sinkhorn_project(blend_to_center(x, Scalar(opts.init_perturbation)), opts.sinkhorn).matrix);
  }

  const bool fisher = opts.metric == GradientMetric::fisher;
  Matrix<Scalar> z(n, n);
  for (int k = 1; k <= opts.iterations; ++k) {
    const MatrixList<Scalar> eg = euclidean_grad(p, xs, opts.threads);
    SyncState<Scalar> next(xs.size());
    try {
      for (std::size_t i = 0; i < xs.size(); ++i) {
        Matrix<Scalar> drift = -h * eg[i];
        if (fisher) drift.array() *= xs[i].array();
        if (!opts.zero_noise) {
          for (Eigen::Index e = 0; e < z.size(); ++e) z.data()[e] = Scalar(gauss(rng));
          if (fisher) {
            z.array() *= xs[i].array().sqrt();
            drift += (h / Scalar(opts.beta)) * fisher_divergence(xs[i]);
          }
          drift += noise_scale * z;
        }
        Matrix<Scalar> v = tangent_project(xs[i], drift);
        const Scalar reach =
            v.cwiseQuotient(xs[i].cwiseMax(Scalar(kEpsDiv))).cwiseAbs().maxCoeff();
        if (reach > Scalar(opts.max_log_step)) {
          v *= Scalar(opts.max_log_step) / reach;
          ++out.capped_steps;
        }
        next[i] = retract(xs[i], v, opts.sinkhorn, &out.retraction);
      }
    } catch (const Error& err) {
      out.ok = false;
      out.error = err.what();
      break;
    }
    xs = std::move(next);
    out.iterations_run = k;
    if (is_retained(k, opts)) {
      out.energies.push_back(energy(p, xs, opts.threads));
      out.states.push_back(xs);
    }
  }
  return out;
}

/// Per-edge mean of X_i X_j^T over the retained samples.
template <typename Scalar>
struct ConfidenceMap {
  struct Entry {
    int i, j;
    Matrix<Scalar> matrix;
  };
  std::vector<Entry> edges;
};

template <typename Scalar>
ConfidenceMap<Scalar> confidence_map(const SampleSet<Scalar>& samples,
                                     const std::vector<std::pair<int, int>>& edges) {
  if (samples.states.empty()) throw InvariantError("confidence_map: no retained samples");
  ConfidenceMap<Scalar> cm;
  const Eigen::Index n = samples.states.front().front().rows();
  for (const auto& [i, j] : edges) {
    Matrix<Scalar> acc = Matrix<Scalar>::Zero(n, n);
    for (const auto& s : samples.states) acc.noalias() += s[i] * s[j].transpose();
    acc /= Scalar(samples.states.size());
    cm.edges.push_back({i, j, std::move(acc)});
  }
  return cm;
}

/// For one edge: per row, candidate columns in decreasing score order.
struct EdgeHypotheses {
  int i = 0, j = 0;
  std::vector<std::vector<int>> rows;
};

/// The K highest-scoring columns of every row, ties broken by smaller index.
template <typename Scalar>
std::vector<EdgeHypotheses> topk_hypotheses(const ConfidenceMap<Scalar>& cm, int k) {
  std::vector<EdgeHypotheses> out;
  for (const auto& e : cm.edges) {
    const int n = static_cast<int>(e.matrix.rows());
    if (k < 1 || k > n) throw InvariantError("topk_hypotheses: K must lie in [1, n]");
    EdgeHypotheses h{e.i, e.j, {}};
    for (int r = 0; r < n; ++r) {
      std::vector<int> cols(n);
      std::iota(cols.begin(), cols.end(), 0);
      std::stable_sort(cols.begin(), cols.end(),
                       [&](int a, int b) { return e.matrix(r, a) > e.matrix(r, b); });
      cols.resize(k);
      h.rows.push_back(std::move(cols));
    }
    out.push_back(std::move(h));
  }
  return out;
}

/// Baseline: the estimate's own column plus K-1 distinct uniformly random other
/// columns per row.
template <typename Rng>
std::vector<EdgeHypotheses> random_hypotheses(const std::vector<Perm>& est,
                                              const std::vector<std::pair<int, int>>& edges,
                                              int k, Rng& rng) {
  std::vector<EdgeHypotheses> out;
  for (const auto& [i, j] : edges) {
    const Perm rel = relative(est[i], est[j]);
    const int n = rel.size();
    if (k < 1 || k > n) throw InvariantError("random_hypotheses: K must lie in [1, n]");
    EdgeHypotheses h{i, j, {}};
    for (int r = 0; r < n; ++r) {
      std::vector<int> others;
      for (int c = 0; c < n; ++c) {
        if (c != rel[r]) others.push_back(c);
      }
      std::shuffle(others.begin(), others.end(), rng);
      std::vector<int> cols{rel[r]};
      cols.insert(cols.end(), others.begin(), others.begin() + (k - 1));
      h.rows.push_back(std::move(cols));
    }
    out.push_back(std::move(h));
  }
  return out;
}

/// Recall where a correspondence counts as found if the ground-truth column is
/// the estimate's column or one of the K - 1 best other hypotheses of that row.
inline double topk_recall(const std::vector<Perm>& est, const std::vector<EdgeHypotheses>& hyps,
                          const GroundTruth& gt) {
  if (hyps.empty()) throw InvariantError("topk_recall: no edges");
  check_same_size(static_cast<Eigen::Index>(est.size()),
                  static_cast<Eigen::Index>(gt.perms.size()), "topk_recall");
  long correct = 0, total = 0;
  for (const auto& h : hyps) {
    const Perm g = relative(gt.perms[h.i], gt.perms[h.j]);
    const Perm e = relative(est[h.i], est[h.j]);
    check_same_size(static_cast<Eigen::Index>(h.rows.size()), g.size(), "topk_recall");
    for (int r = 0; r < g.size(); ++r) {
      const auto& cols = h.rows[r];
      const int extra = static_cast<int>(cols.size()) - 1;
      bool hit = g[r] == e[r];
      int taken = 0;
      for (int c : cols) {
        if (hit || taken == extra) break;
        if (c == e[r]) continue;
        hit = c == g[r];
        ++taken;
      }
      correct += hit;
      ++total;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace birksync
