#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace birksync {

/// Dense row-major matrix used for every point and tangent vector on the
/// Birkhoff polytope.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// A point of DP_n;
/// the invariants are checked with is_doubly_stochastic().
template <typename Scalar>
using DsMatrix = Matrix<Scalar>;

/// An element of T_X DP_n (zero row and column sums), see is_tangent().
template <typename Scalar>
using TangentVec = Matrix<Scalar>;

/// One matrix per graph node; used for states, gradients and directions on the
/// product manifold.
template <typename Scalar>
using MatrixList = std::vector<Matrix<Scalar>>;

// Errors ----------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class InvalidDimension : public Error {
 public:
  explicit InvalidDimension(const std::string& what) : Error("invalid_dimension", what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error("domain", what) {}
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what) : Error("invariant", what) {}
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error("convergence", what), residual_(residual), iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

class NumericError : public Error {
 public:
  NumericError(const std::string& what, double condition_estimate)
      : Error("numeric", what), condition_(condition_estimate) {}
  double condition_estimate() const noexcept { return condition_; }

 private:
  double condition_;
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what) : Error("internal", what) {}
};

inline void check_square(Eigen::Index rows, Eigen::Index cols, const char* who) {
  if (rows != cols || rows == 0) {
    throw InvalidDimension(std::string(who) + ": expected a non-empty square matrix, got " +
                           std::to_string(rows) + "x" + std::to_string(cols));
  }
}

inline void check_same_size(Eigen::Index a, Eigen::Index b, const char* who) {
  if (a != b) {
    throw InvalidDimension(std::string(who) + ": dimension mismatch (" + std::to_string(a) +
                           " vs " + std::to_string(b) + ")");
  }
}

}  // namespace birksync
