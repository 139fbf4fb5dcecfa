#pragma once

// Permutation synchronization problem, cycle-consistency energy
// U(X) = sum_{(i,j)} ||P_ij - X_i X_j^T||_F^2, its gradients, rounding and the
// recall metric.

#include "birksync/common.hpp"
#include "birksync/hungarian.hpp"
#include "birksync/manifold.hpp"
#include "birksync/perm.hpp"

#include <algorithm>
#include <set>
#include <thread>
#include <utility>
#include <vector>

namespace birksync {

struct Edge {
  int i = 0;
  int j = 0;
  Perm observed;  // P_ij, approximately P_i P_j^T

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Directed multiway-matching graph with observed relative permutations.
class SyncProblem {
 public:
  SyncProblem() = default;

  /// Throws InvariantError on out-of-range nodes, self loops, duplicate (i, j)
  /// pairs, a permutation of the wrong size, or an empty edge list when there
  /// is more than one node.
  SyncProblem(int num_nodes, int universe, std::vector<Edge> edges)
      : num_nodes_(num_nodes), n_(universe), edges_(std::move(edges)) {
    if (num_nodes_ <= 0) throw InvariantError("SyncProblem: need at least one node");
    if (n_ <= 0) throw InvalidDimension("SyncProblem: universe size must be positive");
    if (edges_.empty() && num_nodes_ > 1) throw InvariantError("SyncProblem: edge list is empty");
    std::set<std::pair<int, int>> seen;
    out_.assign(num_nodes_, {});
    in_.assign(num_nodes_, {});
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const Edge& ed = edges_[e];
      if (ed.i < 0 || ed.i >= num_nodes_ || ed.j < 0 || ed.j >= num_nodes_) {
        throw InvariantError("SyncProblem: edge node index out of range");
      }
      if (ed.i == ed.j) throw InvariantError("SyncProblem: self loop");
      if (!seen.insert({ed.i, ed.j}).second) throw InvariantError("SyncProblem: duplicate edge");
      if (ed.observed.size() != n_) {
        throw InvariantError("SyncProblem: edge permutation has wrong dimension");
      }
      out_[ed.i].push_back(static_cast<int>(e));
      in_[ed.j].push_back(static_cast<int>(e));
    }
  }

  int num_nodes() const { return num_nodes_; }
  int universe() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  /// Edges whose source / target is `node`, in edge-list order.
  const std::vector<int>& outgoing(int node) const { return out_[node]; }
  const std::vector<int>& incoming(int node) const { return in_[node]; }

  /// Connectivity of the undirected view.
  bool is_connected() const {
    std::vector<int> parent(num_nodes_);
    for (int k = 0; k < num_nodes_; ++k) parent[k] = k;
    auto find = [&](int a) {
      while (parent[a] != a) a = parent[a] = parent[parent[a]];
      return a;
    };
    int components = num_nodes_;
    for (const Edge& e : edges_) {
      const int a = find(e.i), b = find(e.j);
      if (a != b) {
        parent[a] = b;
        --components;
      }
    }
    return components == 1;
  }

  std::vector<std::pair<int, int>> edge_pairs() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(edges_.size());
    for (const Edge& e : edges_) out.emplace_back(e.i, e.j);
    return out;
  }

  friend bool operator==(const SyncProblem& a, const SyncProblem& b) {
    return a.num_nodes_ == b.num_nodes_ && a.n_ == b.n_ && a.edges_ == b.edges_;
  }

 private:
  int num_nodes_ = 0;
  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> out_, in_;
};

/// The relaxed absolute permutations X_i, one DS matrix per node.
template <typename Scalar>
using SyncState = MatrixList<Scalar>;

struct GroundTruth {
  std::vector<Perm> perms;
};

template <typename Scalar>
void check_state(const SyncProblem& p, const SyncState<Scalar>& xs, const char* who) {
  check_same_size(static_cast<Eigen::Index>(xs.size()), p.num_nodes(), who);
  for (const auto& x : xs) {
    check_same_size(x.rows(), p.universe(), who);
    check_same_size(x.cols(), p.universe(), who);
  }
}

template <typename Scalar>
bool state_is_valid(const SyncState<Scalar>& xs, Scalar tol = Scalar(kTolDs)) {
  return std::all_of(xs.begin(), xs.end(), [&](const auto& x) { return is_doubly_stochastic(x, tol); });
}

template <typename Scalar>
SyncState<Scalar> dense_state(const std::vector<Perm>& perms) {
  SyncState<Scalar> out;
  out.reserve(perms.size());
  for (const Perm& p : perms) out.push_back(p.template dense<Scalar>());
  return out;
}

template <typename Scalar>
SyncState<Scalar> blend_state(const SyncState<Scalar>& xs, Scalar lambda) {
  SyncState<Scalar> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(blend_to_center(x, lambda));
  return out;
}

// Product-manifold helpers ---------------------------------------------------------

template <typename Scalar>
Scalar inner(const MatrixList<Scalar>& a, const MatrixList<Scalar>& b) {
  Scalar s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k].cwiseProduct(b[k]).sum();
  return s;
}

template <typename Scalar>
Scalar norm(const MatrixList<Scalar>& a) {
  return std::sqrt(inner(a, a));
}

namespace detail {

template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int k = 0; k < count; ++k) fn(k);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int k = t; k < count; k += threads) fn(k);
    });
  }
}

}  // namespace detail

// Energy and gradients -----------------------------------------------------------

/// U(X). Edge terms are reduced in edge-list order, so the value does not
/// depend on `threads`.
template <typename Scalar>
Scalar energy(const SyncProblem& p, const SyncState<Scalar>& xs, int threads = 1) {
  check_state(p, xs, "energy");
  const auto& edges = p.edges();
  std::vector<Scalar> terms(edges.size());
  detail::parallel_for(static_cast<int>(edges.size()), threads, [&](int e) {
    const Edge& ed = edges[e];
    Matrix<Scalar> r = -(xs[ed.i] * xs[ed.j].transpose());
    for (int a = 0; a < p.universe(); ++a) r(a, ed.observed[a]) += Scalar(1);
    terms[e] = r.squaredNorm();
  });
  Scalar total = 0;
  for (Scalar t : terms) total += t;
  return total;
}

/// Euclidean gradient of U with respect to every X_i. Each node sums its
/// incident edges in edge-list order (outgoing first, then incoming).
template <typename Scalar>
MatrixList<Scalar> euclidean_grad(const SyncProblem& p, const SyncState<Scalar>& xs,
                                  int threads = 1) {
  check_state(p, xs, "euclidean_grad");
  const int n = p.universe();
  const auto& edges = p.edges();
  auto residual = [&](const Edge& ed) {
    Matrix<Scalar> r = -(xs[ed.i] * xs[ed.j].transpose());
    for (int a = 0; a < n; ++a) r(a, ed.observed[a]) += Scalar(1);
    return r;
  };

  MatrixList<Scalar> res(edges.size());
  detail::parallel_for(static_cast<int>(edges.size()), threads, [&](int e) { res[e] = residual(edges[e]); });
  MatrixList<Scalar> grads(p.num_nodes(), Matrix<Scalar>::Zero(n, n));
  detail::parallel_for(p.num_nodes(), threads, [&](int node) {
    for (int e : p.outgoing(node)) grads[node].noalias() -= Scalar(2) * res[e] * xs[edges[e].j];
    for (int e : p.incoming(node)) grads[node].noalias() -= Scalar(2) * res[e].transpose() * xs[edges[e].i];
  });
  return grads;
}

/// How a Euclidean gradient becomes a tangent vector. `fisher` raises the index
/// with the Fisher information metric, Pi_X(X .* G); `embedded` projects the
/// Euclidean gradient directly, Pi_X(G).
enum class GradientMetric { fisher, embedded };

template <typename Scalar>
Matrix<Scalar> to_riemannian(const Matrix<Scalar>& x, const Matrix<Scalar>& egrad,
                             GradientMetric metric = GradientMetric::fisher) {
  if (metric == GradientMetric::embedded) return tangent_project(x, egrad);
  return tangent_project(x, Matrix<Scalar>(x.cwiseProduct(egrad)));
}

/// Riemannian gradient at each node. The steepest descent direction is its
/// negation.
template <typename Scalar>
MatrixList<Scalar> riemannian_grad(const SyncProblem& p, const SyncState<Scalar>& xs,
                                   GradientMetric metric = GradientMetric::fisher, int threads = 1) {
  MatrixList<Scalar> g = euclidean_grad(p, xs, threads);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = to_riemannian(xs[k], g[k], metric);
  return g;
}

// Rounding and metrics -------------------------------------------------------------

/// tr(dense(P)^T X).
template <typename Derived>
typename Derived::Scalar soft_hamming(const Perm& perm, const Eigen::MatrixBase<Derived>& x) {
  check_square(x.rows(), x.cols(), "soft_hamming");
  check_same_size(perm.size(), x.rows(), "soft_hamming");
  typename Derived::Scalar s = 0;
  for (int i = 0; i < perm.size(); ++i) s += x(i, perm[i]);
  return s;
}

/// Per node, the permutation maximising tr(P^T X_i).
template <typename Scalar>
std::vector<Perm> round_state(const SyncState<Scalar>& xs) {
  std::vector<Perm> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(solve_assignment(x, Sense::maximize).perm);
  return out;
}

/// Re-express every estimate relative to node 0 so that node 0 is the identity.
inline std::vector<Perm> anchor_to_first(const std::vector<Perm>& est) {
  std::vector<Perm> out;
  if (est.empty()) return out;
  const Perm inv0 = est.front().inverse();
  for (const Perm& e : est) out.push_back(e.then(inv0));
  return out;
}

/// Fraction of relative correspondences P_i P_j^T that agree with the ground
/// truth, averaged over the given edges and the universe.
inline double recall(const std::vector<Perm>& est, const GroundTruth& gt,
                     const std::vector<std::pair<int, int>>& edges) {
  if (edges.empty()) throw InvariantError("recall: empty edge set");
  check_same_size(static_cast<Eigen::Index>(est.size()),
                  static_cast<Eigen::Index>(gt.perms.size()), "recall");
  const int n = gt.perms.front().size();
  long correct = 0;
  for (const auto& [i, j] : edges) {
    const Perm g = relative(gt.perms[i], gt.perms[j]);
    const Perm e = relative(est[i], est[j]);
    check_same_size(e.size(), n, "recall");
    for (int a = 0; a < n; ++a) correct += g[a] == e[a];
  }
  return static_cast<double>(correct) / (static_cast<double>(n) * static_cast<double>(edges.size()));
}

inline double recall(const std::vector<Perm>& est, const GroundTruth& gt, const SyncProblem& p) {
  return recall(est, gt, p.edge_pairs());
}

}  // namespace birksync
