#pragma once

// Geometry of the Birkhoff polytope DP_n: Sinkhorn projection, tangent-space
// projection, the exponential-type retraction, projection-based vector
// transport, Birkhoff-von Neumann decomposition and random interior points.

#include "birksync/common.hpp"
#include "birksync/hungarian.hpp"
#include "birksync/perm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace birksync {

inline constexpr double kTolDs = 1e-8;
inline constexpr double kTolTangent = 1e-8;
inline constexpr double kEpsDiv = 1e-12;
inline constexpr double kTikhonov = 1e-12;

// Invariant checks -------------------------------------------------------------

/// Largest violation of the doubly-stochastic constraints: max of |row sum - 1|,
/// |col sum - 1| and the magnitude of the most negative entry.
template <typename Derived>
typename Derived::Scalar ds_violation(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar rows = (x.rowwise().sum().array() - Scalar(1)).abs().maxCoeff();
  const Scalar cols = (x.colwise().sum().array() - Scalar(1)).abs().maxCoeff();
  const Scalar neg = std::max(Scalar(0), -x.minCoeff());
  return std::max({rows, cols, neg});
}

template <typename Derived>
bool is_doubly_stochastic(const Eigen::MatrixBase<Derived>& x,
                          typename Derived::Scalar tol = typename Derived::Scalar(kTolDs)) {
  return x.rows() == x.cols() && x.rows() > 0 && x.allFinite() && ds_violation(x) <= tol;
}

template <typename Derived>
typename Derived::Scalar tangent_violation(const Eigen::MatrixBase<Derived>& z) {
  return std::max(z.rowwise().sum().cwiseAbs().maxCoeff(), z.colwise().sum().cwiseAbs().maxCoeff());
}

template <typename Derived>
bool is_tangent(const Eigen::MatrixBase<Derived>& z,
                typename Derived::Scalar tol = typename Derived::Scalar(kTolTangent)) {
  return z.rows() == z.cols() && z.allFinite() && tangent_violation(z) <= tol;
}

// Points -----------------------------------------------------------------------

/// Center of mass of all n x n permutation matrices, every entry 1/n.
template <typename Scalar = double>
DsMatrix<Scalar> center(int n) {
  if (n <= 0) throw InvalidDimension("center: n must be positive, got " + std::to_string(n));
  return DsMatrix<Scalar>::Constant(n, n, Scalar(1) / Scalar(n));
}

/// (1 - lambda) X + lambda C_n.
template <typename Derived>
Matrix<typename Derived::Scalar> blend_to_center(const Eigen::MatrixBase<Derived>& x,
                                                 typename Derived::Scalar lambda) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) - lambda) * x +
         Matrix<Scalar>::Constant(x.rows(), x.cols(), lambda / Scalar(x.rows()));
}

// Sinkhorn ---------------------------------------------------------------------

struct SinkhornOptions {
  double tol = 1e-9;  // on the max row/column-sum residual
  int max_iter = 1000;
};

template <typename Scalar>
struct SinkhornResult {
  DsMatrix<Scalar> matrix;
  int iterations = 0;
  Scalar residual{};
};

/// Sinkhorn-Knopp: alternate row and column normalisation of a strictly
/// positive matrix until every row and column sums to one within `tol`. A
/// non-negative input that is already doubly stochastic is returned as is.
template <typename Derived>
SinkhornResult<typename Derived::Scalar> sinkhorn_project(const Eigen::MatrixBase<Derived>& m,
                                                          const SinkhornOptions& opts = {}) {
  using Scalar = typename Derived::Scalar;
  check_square(m.rows(), m.cols(), "sinkhorn_project");
  const bool positive = m.allFinite() && m.minCoeff() > Scalar(0);
  if (!positive && !(m.allFinite() && m.minCoeff() >= Scalar(0) && ds_violation(m) <= Scalar(opts.tol))) {
    throw DomainError("sinkhorn_project: all entries must be finite and strictly positive");
  }
  SinkhornResult<Scalar> out{m, 0, Scalar(0)};
  Matrix<Scalar>& x = out.matrix;
  for (int it = 0;; ++it) {
    const Scalar res = std::max((x.rowwise().sum().array() - Scalar(1)).abs().maxCoeff(),
                                (x.colwise().sum().array() - Scalar(1)).abs().maxCoeff());
    out.iterations = it;
    out.residual = res;
    if (res <= Scalar(opts.tol)) return out;
    if (it >= opts.max_iter) {
      throw ConvergenceError("sinkhorn_project: no convergence", static_cast<double>(res), it);
    }
    const Vector<Scalar> r = x.rowwise().sum().cwiseInverse();
    x = r.asDiagonal() * x;
    const Vector<Scalar> c = x.colwise().sum().transpose().cwiseInverse();
    x = x * c.asDiagonal();
  }
}

// Tangent space ----------------------------------------------------------------

/// Projection onto T_X DP_n: Y - (alpha 1^T + 1 beta^T) .* X, where (alpha, beta)
/// solve [I X; X^T I][alpha; beta] = [Y 1; Y^T 1]. The block matrix is singular
/// along (1, -1); it is shifted by a Tikhonov term and that direction is removed
/// from the solution afterwards (it does not change the projection).
template <typename DerivedX, typename DerivedY>
TangentVec<typename DerivedX::Scalar> tangent_project(const Eigen::MatrixBase<DerivedX>& x,
                                                      const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  check_square(x.rows(), x.cols(), "tangent_project");
  check_square(y.rows(), y.cols(), "tangent_project");
  check_same_size(x.rows(), y.rows(), "tangent_project");
  const Eigen::Index n = x.rows();

  Matrix<Scalar> a(2 * n, 2 * n);
  a.topLeftCorner(n, n).setIdentity();
  a.bottomRightCorner(n, n).setIdentity();
  a.topRightCorner(n, n) = x;
  a.bottomLeftCorner(n, n) = x.transpose();
  a.diagonal().array() += Scalar(kTikhonov);

  Vector<Scalar> b(2 * n);
  b.head(n) = y.rowwise().sum();
  b.tail(n) = y.colwise().sum().transpose();

  const Eigen::LDLT<Matrix<Scalar>> ldlt(a);
  Vector<Scalar> null_dir(2 * n);
  null_dir.head(n).setOnes();
  null_dir.tail(n).setConstant(Scalar(-1));
  const Vector<Scalar> ones = Vector<Scalar>::Ones(n);

  // Each pass removes the row and column sums left by the previous one.
  TangentVec<Scalar> z = y;
  for (int pass = 0; pass < 3; ++pass) {
    Vector<Scalar> sol = ldlt.solve(b);
    sol -= (null_dir.dot(sol) / Scalar(2 * n)) * null_dir;
    z -= (sol.head(n) * ones.transpose() + ones * sol.tail(n).transpose()).cwiseProduct(x);
    b.head(n) = z.rowwise().sum();
    b.tail(n) = z.colwise().sum().transpose();
    if (b.cwiseAbs().maxCoeff() <= std::numeric_limits<Scalar>::epsilon() * (1 + y.cwiseAbs().maxCoeff())) break;
  }

  const auto d = ldlt.vectorD().cwiseAbs();
  const Scalar cond = d.maxCoeff() / std::max(d.minCoeff(), std::numeric_limits<Scalar>::min());
  if (ldlt.info() != Eigen::Success || !z.allFinite()) {
    throw NumericError("tangent_project: linear solve failed", static_cast<double>(cond));
  }
  const Scalar scale = Scalar(1) + y.cwiseAbs().maxCoeff();
  if (tangent_violation(z) > Scalar(1e-6) * scale) {
    throw NumericError("tangent_project: projection residual too large (ill-conditioned X)",
                       static_cast<double>(cond));
  }
  return z;
}

/// Divergence of the Fisher inverse metric Pi_X(X .* .) taken along the affine
/// hull of the polytope: Pi_X(c 1 - d) with c = ((n - 1) / n)^2 and d the
/// diagonal of P X G, where P is the Euclidean tangent projector and
/// G = A^T K^+ A for the sum constraints A and K = [I X; X^T I].
template <typename Derived>
TangentVec<typename Derived::Scalar> fisher_divergence(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  check_square(x.rows(), x.cols(), "fisher_divergence");
  const Eigen::Index n = x.rows();
  Matrix<Scalar> k(2 * n, 2 * n);
  k.topLeftCorner(n, n).setIdentity();
  k.bottomRightCorner(n, n).setIdentity();
  k.topRightCorner(n, n) = x;
  k.bottomLeftCorner(n, n) = x.transpose();
  Vector<Scalar> u(2 * n);
  u.head(n).setOnes();
  u.tail(n).setConstant(Scalar(-1));
  u /= std::sqrt(Scalar(2 * n));
  k.noalias() += u * u.transpose();
  Matrix<Scalar> kp = k.partialPivLu().inverse();
  kp.noalias() -= u * u.transpose();
  if (!kp.allFinite()) throw NumericError("fisher_divergence: singular constraint system", 0.0);

  const auto krr = kp.topLeftCorner(n, n);
  const auto krc = kp.topRightCorner(n, n);
  const auto kcc = kp.bottomRightCorner(n, n);
  const Vector<Scalar> ones = Vector<Scalar>::Ones(n);
  const Vector<Scalar> rr = krr.diagonal();
  const Vector<Scalar> cc = kcc.diagonal();
  const Matrix<Scalar> xm = x;
  const Vector<Scalar> xkcr = (xm * krc.transpose()).diagonal();
  const Vector<Scalar> xtkrc = (xm.transpose() * krc).diagonal();

  const Matrix<Scalar> gii = rr * ones.transpose() + Scalar(2) * krc + ones * cc.transpose();
  const Matrix<Scalar> s1 = rr * ones.transpose() + krc + xkcr * ones.transpose() + xm * kcc;
  const Matrix<Scalar> s2 = krr * xm + ones * xtkrc.transpose() + krc + ones * cc.transpose();
  const Scalar inv_n = Scalar(1) / Scalar(n);
  Matrix<Scalar> d = xm.cwiseProduct(gii) - inv_n * (s1 + s2);
  d.array() += inv_n * inv_n;

  const Scalar c = (Scalar(1) - inv_n) * (Scalar(1) - inv_n);
  Matrix<Scalar> src = -d;
  src.array() += c;
  return tangent_project(xm, src);
}

// Retraction -------------------------------------------------------------------

/// Per-call-site counters for guarded retractions.
struct RetractDiagnostics {
  long retractions = 0;
  long clamped_entries = 0;    // entries of X below eps_div before the division
  long underflow_entries = 0;  // entries of X .* exp(.) floored to stay positive
};

/// R_X(xi) = Sinkhorn(X .* exp(xi ./ X)). Entries of X below eps_div are
/// clamped before dividing. Exponents are shifted per row (Sinkhorn is
/// invariant to row scaling), so large steps do not overflow.
template <typename DerivedX, typename DerivedXi>
DsMatrix<typename DerivedX::Scalar> retract(const Eigen::MatrixBase<DerivedX>& x,
                                            const Eigen::MatrixBase<DerivedXi>& xi,
                                            const SinkhornOptions& opts = {},
                                            RetractDiagnostics* diag = nullptr,
                                            double eps_div = kEpsDiv) {
  using Scalar = typename DerivedX::Scalar;
  check_square(x.rows(), x.cols(), "retract");
  check_same_size(x.rows(), xi.rows(), "retract");
  check_same_size(x.cols(), xi.cols(), "retract");

  Matrix<Scalar> base = x;
  long clamped = 0;
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    if (base.data()[i] < Scalar(eps_div)) {
      base.data()[i] = Scalar(eps_div);
      ++clamped;
    }
  }
  Matrix<Scalar> expo = xi.cwiseQuotient(base);
  if (!expo.allFinite()) throw DomainError("retract: non-finite tangent vector");
  const Vector<Scalar> shift = expo.rowwise().maxCoeff();
  expo.colwise() -= shift;
  Matrix<Scalar> m = base.cwiseProduct(expo.array().exp().matrix());

  long floored = 0;
  const Scalar tiny = std::numeric_limits<Scalar>::min();
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (!(m.data()[i] >= tiny)) {
      m.data()[i] = tiny;
      ++floored;
    }
  }
  if (diag) {
    ++diag->retractions;
    diag->clamped_entries += clamped;
    diag->underflow_entries += floored;
  }
  return sinkhorn_project(m, opts).matrix;
}

/// T_eta(zeta): project zeta onto the tangent space at R_X(eta).
template <typename DerivedX, typename DerivedE, typename DerivedZ>
TangentVec<typename DerivedX::Scalar> vector_transport(const Eigen::MatrixBase<DerivedX>& x,
                                                       const Eigen::MatrixBase<DerivedE>& eta,
                                                       const Eigen::MatrixBase<DerivedZ>& zeta,
                                                       const SinkhornOptions& opts = {},
                                                       RetractDiagnostics* diag = nullptr) {
  return tangent_project(retract(x, eta, opts, diag), zeta);
}

/// Velocity of the curve t -> R_X(t xi) at the point y = R_X(t xi). Sinkhorn
/// scaling only adds row and column terms to log(X .* exp(t xi ./ X)), so the
/// velocity is Pi_y(y .* xi ./ X).
template <typename DerivedX, typename DerivedXi, typename DerivedY>
TangentVec<typename DerivedX::Scalar> retract_velocity(const Eigen::MatrixBase<DerivedX>& x,
                                                       const Eigen::MatrixBase<DerivedXi>& xi,
                                                       const Eigen::MatrixBase<DerivedY>& y,
                                                       double eps_div = kEpsDiv) {
  using Scalar = typename DerivedX::Scalar;
  const Matrix<Scalar> base = x.cwiseMax(Scalar(eps_div));
  return tangent_project(y, Matrix<Scalar>(y.cwiseProduct(xi.cwiseQuotient(base))));
}

// Generators -------------------------------------------------------------------

/// Sinkhorn projection of exp(G) for a standard Gaussian G drawn from a
/// mt19937_64 seeded with `seed`.
template <typename Scalar = double>
DsMatrix<Scalar> random_ds(int n, std::uint64_t seed, const SinkhornOptions& opts = {}) {
  if (n <= 0) throw InvalidDimension("random_ds: n must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix<Scalar> g(n, n);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = Scalar(gauss(rng));
  return sinkhorn_project(Matrix<Scalar>(g.array().exp()), opts).matrix;
}

/// l(x) = ((1 + x) / n) 1 1^T - x I: the ray from C_n away from the identity
/// vertex. Rows and columns sum to one for every x; entries stay non-negative
/// up to x = 1 / (n - 1).
template <typename Scalar = double>
Matrix<Scalar> ray_point(int n, Scalar x) {
  if (n <= 0) throw InvalidDimension("ray_point: n must be positive");
  Matrix<Scalar> out = Matrix<Scalar>::Constant(n, n, (Scalar(1) + x) / Scalar(n));
  out.diagonal().array() -= x;
  return out;
}

// Birkhoff-von Neumann -----------------------------------------------------------

template <typename Scalar>
struct BvnTerm {
  Scalar weight;
  Perm perm;
};

template <typename Scalar>
struct BvnDecomposition {
  std::vector<BvnTerm<Scalar>> terms;
  int count() const { return static_cast<int>(terms.size()); }

  Matrix<Scalar> reconstruct() const {
    const int n = terms.empty() ? 0 : terms.front().perm.size();
    Matrix<Scalar> out = Matrix<Scalar>::Zero(n, n);
    for (const auto& t : terms) {
      for (int i = 0; i < n; ++i) out(i, t.perm[i]) += t.weight;
    }
    return out;
  }
};

/// Greedy Birkhoff decomposition: repeatedly pick the heaviest permutation
/// supported on the positive residual entries, peel off its smallest entry and
/// stop once the residual mass is below `tol`. Every step zeroes at least one
/// entry.
template <typename Derived>
BvnDecomposition<typename Derived::Scalar> bvn_decompose(const Eigen::MatrixBase<Derived>& x,
                                                         double tol = 1e-9) {
  using Scalar = typename Derived::Scalar;
  if (!is_doubly_stochastic(x)) {
    throw DomainError("bvn_decompose: input is not doubly stochastic");
  }
  const int n = static_cast<int>(x.rows());
  const Scalar support_eps = Scalar(tol) / Scalar(n * n);
  const Scalar forbidden = Scalar(n + 1);
  const Scalar stop_slack = std::max(Scalar(tol), ds_violation(x));

  BvnDecomposition<Scalar> out;
  Matrix<Scalar> residual = x;
  residual = residual.cwiseMax(Scalar(0));
  const int limit = n * n + 1;
  while (residual.sum() / Scalar(n) > Scalar(tol)) {
    if (out.count() >= limit) throw InternalError("bvn_decompose: too many terms");
    Matrix<Scalar> cost(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        cost(i, j) = residual(i, j) > support_eps ? -residual(i, j) : forbidden;
      }
    }
    const auto assignment = solve_assignment(cost);
    Scalar theta = std::numeric_limits<Scalar>::infinity();
    for (int i = 0; i < n; ++i) theta = std::min(theta, residual(i, assignment.perm[i]));
    if (!(theta > support_eps)) {
      if (residual.sum() / Scalar(n) <= Scalar(n) * stop_slack) break;
      throw InternalError("bvn_decompose: no permutation supported on the residual");
    }
    for (int i = 0; i < n; ++i) {
      Scalar& r = residual(i, assignment.perm[i]);
      r -= theta;
      if (r <= support_eps) r = Scalar(0);
    }
    out.terms.push_back({theta, assignment.perm});
  }
  return out;
}

}  // namespace birksync
