#pragma once

// Limited-memory Riemannian BFGS on the product of Birkhoff polytopes for the
// cycle-consistency energy, plus the fixed-step retraction gradient descent and
// a spectral initialiser.

#include "birksync/common.hpp"
#include "birksync/manifold.hpp"
#include "birksync/sync_model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <string>

namespace birksync {

enum class LineSearchKind { armijo, strong_wolfe };
enum class DirectionKind { lbfgs, steepest };
// How stored pairs and the previous gradient move to the new tangent space:
// orthogonal re-projection or the differential of the retraction.
enum class TransportKind { projection, differential };

struct OptimizerOptions {
  int memory = 8;
  int max_iters = 500;
  double grad_tol = 1e-6;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  LineSearchKind line_search = LineSearchKind::strong_wolfe;
  int max_ls_steps = 30;
  // Reductions are always performed in a fixed order; the flag is carried for
  // callers that record it alongside traces.
  bool deterministic = true;

  DirectionKind direction = DirectionKind::lbfgs;
  GradientMetric metric = GradientMetric::fisher;
  GradientMetric memory_metric = GradientMetric::fisher;  // inner product of the two-loop recursion
  TransportKind transport = TransportKind::differential;
  double interior_blend = 0.01;    // lambda in (1 - lambda) X + lambda C_n
  double rel_energy_tol = 1e-12;   // stop when the relative change over
  int rel_energy_window = 5;       //   this many iterations falls below tol
  double curvature_eps = 1e-14;    // pairs with <Y, S> below this are dropped
  double max_log_step = 5.0;       // first trial keeps |step * dir ./ X| below this
  double interior_floor = kEpsDiv;  // trial points with a smaller entry are rejected
#ifdef NDEBUG
  bool validate_iterates = false;
#else
  bool validate_iterates = true;
#endif
  int threads = 1;
  SinkhornOptions sinkhorn{};

  void validate() const {
    if (memory < 1) throw InvariantError("OptimizerOptions: memory must be >= 1");
    if (!(wolfe_c1 > 0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1)) {
      throw InvariantError("OptimizerOptions: need 0 < c1 < c2 < 1");
    }
    if (max_iters < 0 || max_ls_steps < 1) throw InvariantError("OptimizerOptions: bad limits");
    if (!(grad_tol >= 0)) throw InvariantError("OptimizerOptions: grad_tol must be >= 0");
    if (!(interior_blend >= 0 && interior_blend < 1)) {
      throw InvariantError("OptimizerOptions: interior_blend must lie in [0, 1)");
    }
  }
};

struct TracePoint {
  int iteration = 0;
  double energy = 0;
  double grad_norm = 0;
};

enum class SolveStatus { converged_gradient, converged_energy, max_iterations, stalled };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged_gradient: return "converged_gradient";
    case SolveStatus::converged_energy: return "converged_energy";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::stalled: return "stalled";
  }
  return "unknown";
}

struct SolveReport {
  std::vector<Perm> rounded;
  double final_energy = 0;
  std::vector<TracePoint> trace;  // one entry per accepted iterate, starting at 0
  int iterations = 0;
  std::chrono::duration<double> wall_time{};
  SolveStatus status = SolveStatus::max_iterations;
  int steepest_fallbacks = 0;     // iterations that fell back to steepest + Armijo
  int lbfgs_resets = 0;           // non-descent L-BFGS directions replaced by -grad
  long energy_evaluations = 0;
  RetractDiagnostics retraction{};
};

// Limited-memory pairs --------------------------------------------------------------

/// Ring buffer of (S, Y) pairs kept in the tangent space of the current iterate.
/// Inner products are Frobenius for the embedded metric and
/// <A, B>_X = sum A .* B ./ X for the Fisher metric, evaluated at the point last
/// passed to transport().
template <typename Scalar>
class LbfgsMemory {
 public:
  struct Pair {
    MatrixList<Scalar> s, y;
    Scalar rho;
  };

  LbfgsMemory(int capacity, double curvature_eps, GradientMetric metric = GradientMetric::embedded)
      : capacity_(capacity), eps_(curvature_eps), metric_(metric) {}

  int size() const { return static_cast<int>(pairs_.size()); }
  bool empty() const { return pairs_.empty(); }
  void clear() { pairs_.clear(); }
  const std::deque<Pair>& pairs() const { return pairs_; }

  Scalar dot(const MatrixList<Scalar>& a, const MatrixList<Scalar>& b) const {
    if (metric_ == GradientMetric::embedded || weights_.empty()) return inner(a, b);
    Scalar s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k].cwiseProduct(b[k]).cwiseProduct(weights_[k]).sum();
    return s;
  }

  /// Stores the pair unless it violates the curvature condition.
  bool push(MatrixList<Scalar> s, MatrixList<Scalar> y) {
    const Scalar sy = dot(s, y);
    if (!(sy > Scalar(eps_)) || !std::isfinite(static_cast<double>(sy))) return false;
    if (static_cast<int>(pairs_.size()) == capacity_) pairs_.pop_front();
    pairs_.push_back({std::move(s), std::move(y), Scalar(1) / sy});
    return true;
  }

  /// Re-projects every stored pair onto the tangent spaces at `xs`, refreshes
  /// rho and drops pairs that no longer satisfy the curvature condition.
  void transport(const SyncState<Scalar>& from, const SyncState<Scalar>& xs, TransportKind kind) {
    const bool scaled = kind == TransportKind::differential;
    if (metric_ == GradientMetric::fisher) {
      weights_.clear();
      for (const auto& x : xs) weights_.push_back(x.cwiseMax(Scalar(kEpsDiv)).cwiseInverse());
    }
    std::deque<Pair> kept;
    for (auto& pr : pairs_) {
      for (std::size_t k = 0; k < xs.size(); ++k) {
        if (scaled) {
          pr.s[k] = retract_velocity(from[k], pr.s[k], xs[k]);
          pr.y[k] = retract_velocity(from[k], pr.y[k], xs[k]);
        } else {
          pr.s[k] = tangent_project(xs[k], pr.s[k]);
          pr.y[k] = tangent_project(xs[k], pr.y[k]);
        }
      }
      const Scalar sy = dot(pr.s, pr.y);
      if (sy > Scalar(eps_) && std::isfinite(static_cast<double>(sy))) {
        pr.rho = Scalar(1) / sy;
        kept.push_back(std::move(pr));
      }
    }
    pairs_ = std::move(kept);
  }

  /// Two-loop recursion: returns -H grad with H0 = gamma I,
  /// gamma = <S, Y> / <Y, Y> of the newest pair.
  MatrixList<Scalar> direction(const MatrixList<Scalar>& grad) const {
    MatrixList<Scalar> q = grad;
    std::vector<Scalar> alpha(pairs_.size());
    for (int k = size() - 1; k >= 0; --k) {
      const Pair& pr = pairs_[k];
      alpha[k] = pr.rho * dot(pr.s, q);
      for (std::size_t m = 0; m < q.size(); ++m) q[m] -= alpha[k] * pr.y[m];
    }
    if (!pairs_.empty()) {
      const Pair& last = pairs_.back();
      const Scalar gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (auto& m : q) m *= gamma;
    }
    for (int k = 0; k < size(); ++k) {
      const Pair& pr = pairs_[k];
      const Scalar beta = pr.rho * dot(pr.y, q);
      for (std::size_t m = 0; m < q.size(); ++m) q[m] += (alpha[k] - beta) * pr.s[m];
    }
    for (auto& m : q) m = -m;
    return q;
  }

 private:
  int capacity_;
  double eps_;
  GradientMetric metric_;
  MatrixList<Scalar> weights_;
  std::deque<Pair> pairs_;
};

// Line search -----------------------------------------------------------------------

class LineSearchError : public Error {
 public:
  explicit LineSearchError(const std::string& what) : Error("line_search", what) {}
};

/// An accepted trial point R_X(step * direction) with everything the outer loop
/// needs at the new iterate.
template <typename Scalar>
struct LineSearchResult {
  Scalar step{};
  SyncState<Scalar> state;
  Scalar energy{};
  MatrixList<Scalar> egrad;  // Euclidean gradient at `state`, empty if not evaluated
  int evaluations = 0;
};

namespace detail {

template <typename Scalar>
struct Trial {
  Scalar step{};
  SyncState<Scalar> state;
  Scalar phi = std::numeric_limits<Scalar>::infinity();
  Scalar dphi = std::numeric_limits<Scalar>::quiet_NaN();
  MatrixList<Scalar> egrad;
  bool ok = false;
};

template <typename Scalar>
class LineFunction {
 public:
  LineFunction(const SyncProblem& p, const SyncState<Scalar>& xs, const MatrixList<Scalar>& dir,
               const OptimizerOptions& opts, RetractDiagnostics* diag)
      : p_(p), xs_(xs), dir_(dir), opts_(opts), diag_(diag) {}

  /// phi(step) = U(R_X(step * dir)). Failed retractions and points with an
  /// entry below interior_floor evaluate to +inf.
  Trial<Scalar> value(Scalar step) {
    ++evaluations;
    Trial<Scalar> t;
    t.step = step;
    try {
      t.state.reserve(xs_.size());
      for (std::size_t k = 0; k < xs_.size(); ++k) {
        t.state.push_back(retract(xs_[k], step * dir_[k], opts_.sinkhorn, diag_));
      }
      const bool interior = std::all_of(t.state.begin(), t.state.end(), [&](const auto& x) {
        return x.minCoeff() >= Scalar(opts_.interior_floor);
      });
      if (interior) {
        t.phi = energy(p_, t.state, opts_.threads);
        t.ok = std::isfinite(static_cast<double>(t.phi));
      }
    } catch (const ConvergenceError&) {
      t.ok = false;
    } catch (const DomainError&) {
      t.ok = false;
    }
    if (!t.ok) t.phi = std::numeric_limits<Scalar>::infinity();
    return t;
  }

  /// d/dstep at the trial point: the gradient against the retraction curve's
  /// velocity. A failed projection marks the trial as failed.
  void slope(Trial<Scalar>& t) {
    t.egrad = euclidean_grad(p_, t.state, opts_.threads);
    Scalar d = 0;
    try {
      for (std::size_t k = 0; k < xs_.size(); ++k) {
        d += t.egrad[k].cwiseProduct(retract_velocity(xs_[k], dir_[k], t.state[k])).sum();
      }
    } catch (const NumericError&) {
      t.ok = false;
      t.phi = std::numeric_limits<Scalar>::infinity();
      t.egrad.clear();
      return;
    }
    t.dphi = d;
  }

  /// value() followed by slope() when the value is finite.
  Trial<Scalar> probe(Scalar step) {
    Trial<Scalar> t = value(step);
    if (t.ok) slope(t);
    return t;
  }

  int evaluations = 0;

 private:
  const SyncProblem& p_;
  const SyncState<Scalar>& xs_;
  const MatrixList<Scalar>& dir_;
  const OptimizerOptions& opts_;
  RetractDiagnostics* diag_;
};

// Minimiser of the cubic interpolating (a, fa, da) and (b, fb, db), kept inside
// the middle 80% of the bracket; falls back to bisection.
template <typename Scalar>
Scalar interpolate(Scalar a, Scalar fa, Scalar da, Scalar b, Scalar fb, Scalar db) {
  const Scalar lo = std::min(a, b), hi = std::max(a, b);
  const Scalar margin = Scalar(0.1) * (hi - lo);
  Scalar x = (a + b) / 2;
  if (std::isfinite(static_cast<double>(fb)) && std::isfinite(static_cast<double>(db)) &&
      std::isfinite(static_cast<double>(da))) {
    const Scalar d1 = da + db - 3 * (fa - fb) / (a - b);
    const Scalar disc = d1 * d1 - da * db;
    if (disc >= 0) {
      const Scalar d2 = std::copysign(std::sqrt(disc), static_cast<double>(b - a));
      const Scalar c = b - (b - a) * (db + d2 - d1) / (db - da + 2 * d2);
      if (std::isfinite(static_cast<double>(c))) x = c;
    }
  }
  return std::clamp(x, lo + margin, hi - margin);
}

}  // namespace detail

/// Strong Wolfe (bracketing + zoom) or Armijo backtracking along `dir`.
/// `phi0` and `slope0` are U(X) and <grad U(X), dir>; slope0 must be negative.
/// Throws LineSearchError when no acceptable step is found in max_ls_steps
/// energy evaluations.
template <typename Scalar>
LineSearchResult<Scalar> line_search(const SyncProblem& p, const SyncState<Scalar>& xs,
                                     const MatrixList<Scalar>& dir, Scalar phi0, Scalar slope0,
                                     Scalar initial_step, const OptimizerOptions& opts,
                                     LineSearchKind kind, RetractDiagnostics* diag = nullptr) {
  if (!(slope0 < 0)) throw LineSearchError("line_search: not a descent direction");
  detail::LineFunction<Scalar> line(p, xs, dir, opts, diag);
  const Scalar c1 = Scalar(opts.wolfe_c1), c2 = Scalar(opts.wolfe_c2);
  auto armijo_ok = [&](const detail::Trial<Scalar>& t) {
    return t.ok && t.phi <= phi0 + c1 * t.step * slope0;
  };
  auto accept = [&](detail::Trial<Scalar>& t) {
    return LineSearchResult<Scalar>{t.step, std::move(t.state), t.phi, std::move(t.egrad),
                                    line.evaluations};
  };

  if (kind == LineSearchKind::armijo) {
    Scalar step = initial_step;
    while (line.evaluations < opts.max_ls_steps) {
      auto t = line.value(step);
      if (armijo_ok(t)) return accept(t);
      step /= 2;
    }
    throw LineSearchError("line_search: Armijo backtracking exhausted");
  }

  // Strong Wolfe. A failed trial marks the end of the usable step range; when
  // the energy still decreases there, the largest sufficient-decrease step found
  // so far is taken.
  detail::Trial<Scalar> prev;
  prev.step = 0;
  prev.phi = phi0;
  prev.dphi = slope0;
  prev.ok = true;
  Scalar step = initial_step;
  const Scalar max_step = initial_step * Scalar(1e6);

  auto zoom = [&](detail::Trial<Scalar> lo, detail::Trial<Scalar> hi) -> LineSearchResult<Scalar> {
    while (line.evaluations < opts.max_ls_steps) {
      if (!hi.ok && lo.step > 0) return accept(lo);
      const Scalar a = detail::interpolate(lo.step, lo.phi, lo.dphi, hi.step, hi.phi, hi.dphi);
      auto t = line.probe(a);
      if (!t.ok || !armijo_ok(t) || t.phi >= lo.phi) {
        hi = std::move(t);
        continue;
      }
      if (std::abs(t.dphi) <= -c2 * slope0) return accept(t);
      if (t.dphi * (hi.step - lo.step) >= 0) hi = std::move(lo);
      lo = std::move(t);
    }
    throw LineSearchError("line_search: zoom exhausted");
  };

  for (int i = 0; line.evaluations < opts.max_ls_steps; ++i) {
    auto t = line.probe(step);
    if (!t.ok && i > 0) return accept(prev);
    if (!armijo_ok(t) || (i > 0 && t.phi >= prev.phi)) return zoom(std::move(prev), std::move(t));
    if (std::abs(t.dphi) <= -c2 * slope0) return accept(t);
    if (t.dphi >= 0) return zoom(std::move(t), std::move(prev));
    prev = std::move(t);
    step = std::min(step * 2, max_step);
  }
  throw LineSearchError("line_search: bracketing exhausted");
}

// LR-BFGS ----------------------------------------------------------------------------

template <typename Scalar>
void check_iterate(const SyncState<Scalar>& xs, int iteration) {
  for (const auto& x : xs) {
    if (!is_doubly_stochastic(x, Scalar(kTolDs))) {
      throw InvariantError("lrbfgs_solve: iterate " + std::to_string(iteration) +
                           " left the Birkhoff polytope (violation " +
                           std::to_string(static_cast<double>(ds_violation(x))) + ")");
    }
  }
}

/// Norm of the Riemannian gradient `g` in its own metric. For the Fisher metric
/// <g, g>_X equals <egrad, g> because the projection is orthogonal in that metric.
template <typename Scalar>
Scalar gradient_norm(const MatrixList<Scalar>& egrad, const MatrixList<Scalar>& g, GradientMetric metric) {
  if (metric == GradientMetric::embedded) return norm(g);
  return std::sqrt(std::max(Scalar(0), inner(egrad, g)));
}

/// Largest step t with |t * dir_k ./ X_k| <= cap for every node.
template <typename Scalar>
Scalar log_step_cap(const SyncState<Scalar>& xs, const MatrixList<Scalar>& dir, Scalar cap) {
  Scalar worst = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    worst = std::max(worst, dir[k].cwiseQuotient(xs[k].cwiseMax(Scalar(kEpsDiv))).cwiseAbs().maxCoeff());
  }
  return worst > 0 ? cap / worst : std::numeric_limits<Scalar>::infinity();
}

/// Minimises U over the product of Birkhoff polytopes. The input is first
/// blended toward the centre so every entry is positive. Returns the final
/// relaxed state; the report carries the rounded permutations and the trace.
template <typename Scalar>
std::pair<SyncState<Scalar>, SolveReport> lrbfgs_solve(const SyncProblem& p,
                                                       const SyncState<Scalar>& init,
                                                       const OptimizerOptions& opts = {}) {
  opts.validate();
  check_state(p, init, "lrbfgs_solve");
  for (const auto& x : init) {
    if (!is_doubly_stochastic(x, Scalar(1e-6))) {
      throw DomainError("lrbfgs_solve: initial state is not doubly stochastic");
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  SolveReport report;
  RetractDiagnostics* diag = &report.retraction;

  SyncState<Scalar> xs;
  for (const auto& x : init) {
    xs.push_back(sinkhorn_project(blend_to_center(x, Scalar(opts.interior_blend)), opts.sinkhorn).matrix);
  }
  Scalar u = energy(p, xs, opts.threads);
  MatrixList<Scalar> eg = euclidean_grad(p, xs, opts.threads);
  MatrixList<Scalar> g(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) g[k] = to_riemannian(xs[k], eg[k], opts.metric);
  Scalar gnorm = gradient_norm(eg, g, opts.metric);
  report.trace.push_back({0, static_cast<double>(u), static_cast<double>(gnorm)});

  LbfgsMemory<Scalar> memory(opts.memory, opts.curvature_eps, opts.memory_metric);
  const bool use_lbfgs = opts.direction == DirectionKind::lbfgs;
  Scalar last_step = 0;
  report.status = SolveStatus::max_iterations;

  int k = 0;
  for (; k < opts.max_iters; ++k) {
    if (gnorm <= Scalar(opts.grad_tol)) {
      report.status = SolveStatus::converged_gradient;
      break;
    }
    const int w = opts.rel_energy_window;
    if (static_cast<int>(report.trace.size()) > w) {
      const double older = report.trace[report.trace.size() - 1 - w].energy;
      const double rel = (older - static_cast<double>(u)) /
                         std::max(std::abs(static_cast<double>(u)), std::numeric_limits<double>::min());
      if (rel < opts.rel_energy_tol) {
        report.status = SolveStatus::converged_energy;
        break;
      }
    }

    MatrixList<Scalar> dir;
    bool steepest = !use_lbfgs || memory.empty();
    if (steepest) {
      dir = g;
      for (auto& d : dir) d = -d;
    } else {
      dir = memory.direction(g);
    }
    Scalar slope = inner(eg, dir);
    if (!steepest && !(slope < 0)) {
      ++report.lbfgs_resets;
      memory.clear();
      steepest = true;
      dir = g;
      for (auto& d : dir) d = -d;
      slope = inner(eg, dir);
    }

    // Quasi-Newton directions are scaled, so try the unit step; steepest descent
    // starts from a unit-length move, or from twice the last accepted step.
    Scalar step0 = Scalar(1);
    if (steepest) {
      step0 = (!use_lbfgs && last_step > 0) ? Scalar(2) * last_step : Scalar(1) / norm(dir);
    }

    step0 = std::min(step0, log_step_cap(xs, dir, Scalar(opts.max_log_step)));

    std::optional<LineSearchResult<Scalar>> res;
    try {
      res = line_search(p, xs, dir, u, slope, step0, opts, opts.line_search, diag);
    } catch (const LineSearchError&) {
      ++report.steepest_fallbacks;
      memory.clear();
      dir = g;
      for (auto& d : dir) d = -d;
      slope = inner(eg, dir);
      try {
        const Scalar fallback0 =
            std::min(Scalar(1) / norm(dir), log_step_cap(xs, dir, Scalar(opts.max_log_step)));
        res = line_search(p, xs, dir, u, slope, fallback0, opts, LineSearchKind::armijo, diag);
      } catch (const LineSearchError&) {
        report.status = SolveStatus::stalled;
        break;
      }
    }
    report.energy_evaluations += res->evaluations;

    SyncState<Scalar> next = std::move(res->state);
    if (opts.validate_iterates) check_iterate(next, k + 1);
    MatrixList<Scalar> eg_next =
        res->egrad.empty() ? euclidean_grad(p, next, opts.threads) : std::move(res->egrad);
    MatrixList<Scalar> g_next(xs.size()), s(xs.size()), y(xs.size());
    try {
      for (std::size_t m = 0; m < xs.size(); ++m) {
        g_next[m] = to_riemannian(next[m], eg_next[m], opts.metric);
        if (opts.transport == TransportKind::differential) {
          s[m] = retract_velocity(xs[m], Matrix<Scalar>(res->step * dir[m]), next[m]);
          y[m] = g_next[m] - retract_velocity(xs[m], g[m], next[m]);
        } else {
          s[m] = tangent_project(next[m], res->step * dir[m]);
          y[m] = g_next[m] - tangent_project(next[m], g[m]);
        }
      }
    } catch (const NumericError&) {
      report.status = SolveStatus::stalled;
      break;
    }
    if (use_lbfgs) {
      memory.transport(xs, next, opts.transport);
      memory.push(std::move(s), std::move(y));
    }

    last_step = res->step;
    xs = std::move(next);
    eg = std::move(eg_next);
    g = std::move(g_next);
    u = res->energy;
    gnorm = gradient_norm(eg, g, opts.metric);
    report.trace.push_back({k + 1, static_cast<double>(u), static_cast<double>(gnorm)});
  }

  report.iterations = static_cast<int>(report.trace.size()) - 1;
  report.final_energy = static_cast<double>(u);
  report.rounded = round_state(xs);
  report.wall_time = std::chrono::steady_clock::now() - t0;
  return {std::move(xs), std::move(report)};
}

// Fixed-step retraction gradient descent ------------------------------------------------

template <typename Scalar>
struct DescentTrajectory {
  std::vector<SyncState<Scalar>> states;  // states[0] is the start
  std::vector<Scalar> energies;
};

/// X_i <- R_{X_i}(-h grad_i U) for every node simultaneously, with the
/// Riemannian gradient taken in `metric`.
template <typename Scalar>
DescentTrajectory<Scalar> retraction_gradient_descent(const SyncProblem& p,
                                                      const SyncState<Scalar>& start, Scalar h,
                                                      int iterations,
                                                      GradientMetric metric = GradientMetric::fisher,
                                                      const SinkhornOptions& sk = {},
                                                      RetractDiagnostics* diag = nullptr) {
  check_state(p, start, "retraction_gradient_descent");
  DescentTrajectory<Scalar> out;
  SyncState<Scalar> xs = start;
  out.states.push_back(xs);
  out.energies.push_back(energy(p, xs));
  for (int it = 0; it < iterations; ++it) {
    const MatrixList<Scalar> eg = euclidean_grad(p, xs);
    SyncState<Scalar> next(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) {
      Matrix<Scalar> drift = -h * eg[k];
      if (metric == GradientMetric::fisher) drift.array() *= xs[k].array();
      next[k] = retract(xs[k], tangent_project(xs[k], drift), sk, diag);
    }
    xs = std::move(next);
    out.states.push_back(xs);
    out.energies.push_back(energy(p, xs));
  }
  return out;
}

// Initialisers -----------------------------------------------------------------------------

struct SpectralOptions {
  int max_iter = 1000;
  double tol = 1e-9;       // on the change of the subspace between sweeps
  double blend = 0.1;      // weight of C_n in the returned blocks
  std::uint64_t seed = 0;  // start basis and the random fallback
  int dense_limit = 2048;  // N * n up to which W is diagonalised directly
  SinkhornOptions sinkhorn{};
};

template <typename Scalar>
SyncState<Scalar> random_state(int num_nodes, int n, std::uint64_t seed) {
  SyncState<Scalar> out;
  for (int k = 0; k < num_nodes; ++k) {
    out.push_back(random_ds<Scalar>(n, seed * 1000003ULL + static_cast<std::uint64_t>(k)));
  }
  return out;
}

template <typename Scalar>
SyncState<Scalar> identity_state(int num_nodes, int n, Scalar blend = Scalar(0.01)) {
  return SyncState<Scalar>(num_nodes, blend_to_center(Matrix<Scalar>::Identity(n, n), blend));
}

namespace detail {

// Node blocks of the eigenbasis anchored to node 0, made positive, projected and
// blended with the centre.
template <typename Scalar>
SyncState<Scalar> spectral_blocks(const SyncProblem& p, const Matrix<Scalar>& v,
                                  const SpectralOptions& opts) {
  const int nodes = p.num_nodes(), n = p.universe();
  SyncState<Scalar> out;
  const Matrix<Scalar> v0 = v.topRows(n);
  for (int i = 0; i < nodes; ++i) {
    Matrix<Scalar> b = Scalar(nodes) * v.middleRows(static_cast<Eigen::Index>(i) * n, n) * v0.transpose();
    const Scalar lo = b.minCoeff(), hi = b.maxCoeff();
    b.array() -= lo;
    b.array() += Scalar(0.01) * (hi - lo) + std::numeric_limits<Scalar>::min();
    const Matrix<Scalar> ds = sinkhorn_project(b, opts.sinkhorn).matrix;
    out.push_back(blend_to_center(ds, Scalar(opts.blend)));
  }
  return out;
}

}  // namespace detail

/// Spectral synchronisation: top-n eigenspace of the block matrix W with
/// W_ii = I, W_ij = P_ij and W_ji = P_ij^T, by block power iteration (or a dense eigensolver for
/// small problems). Each node
/// block is anchored to node 0 (N V_i V_0^T), shifted positive, Sinkhorn-
/// projected and blended with the centre. When the iteration does not converge
/// the result is random_state() and `*converged` is set to false.
template <typename Scalar>
SyncState<Scalar> spectral_init(const SyncProblem& p, const SpectralOptions& opts = {},
                                bool* converged = nullptr) {
  const int nodes = p.num_nodes(), n = p.universe();
  const Eigen::Index dim = static_cast<Eigen::Index>(nodes) * n;

  // W + d_max I is positive definite (Gershgorin), so power iteration picks out
  // the algebraically largest eigenvalues of W.
  std::vector<int> degree(nodes, 0);
  for (const Edge& e : p.edges()) {
    ++degree[e.i];
    ++degree[e.j];
  }
  const int max_degree = nodes > 0 ? *std::max_element(degree.begin(), degree.end()) : 0;
  auto apply = [&](const Matrix<Scalar>& v) {
    Matrix<Scalar> out = (Scalar(1) + Scalar(max_degree)) * v;
    for (const Edge& e : p.edges()) {
      for (int a = 0; a < n; ++a) {
        const int b = e.observed[a];
        out.row(static_cast<Eigen::Index>(e.i) * n + a) += v.row(static_cast<Eigen::Index>(e.j) * n + b);
        out.row(static_cast<Eigen::Index>(e.j) * n + b) += v.row(static_cast<Eigen::Index>(e.i) * n + a);
      }
    }
    return out;
  };

  Matrix<Scalar> v(dim, n);
  if (dim <= opts.dense_limit) {
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(apply(Matrix<Scalar>::Identity(dim, dim)));
    if (eig.info() == Eigen::Success) {
      if (converged) *converged = true;
      v = eig.eigenvectors().rightCols(n);
      return detail::spectral_blocks(p, v, opts);
    }
  }

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss;
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = Scalar(gauss(rng));
  auto orthonormalize = [&](const Matrix<Scalar>& m) {
    Eigen::HouseholderQR<Matrix<Scalar>> qr(m);
    return Matrix<Scalar>(qr.householderQ() * Matrix<Scalar>::Identity(m.rows(), m.cols()));
  };
  v = orthonormalize(v);
  bool ok = false;
  for (int it = 0; it < opts.max_iter; ++it) {
    Matrix<Scalar> next = orthonormalize(apply(v));
    const Scalar change = (next - v * (v.transpose() * next)).norm();
    v = std::move(next);
    if (change <= Scalar(opts.tol) * std::sqrt(Scalar(n))) {
      ok = true;
      break;
    }
  }
  if (converged) *converged = ok;
  if (!ok) return random_state<Scalar>(nodes, n, opts.seed);

  return detail::spectral_blocks(p, v, opts);
}

}  // namespace birksync
