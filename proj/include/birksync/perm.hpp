#pragma once

#include "birksync/common.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

namespace birksync {

/// A total permutation on n elements: mapping[i] = j means element i maps to
/// element j, i.e. the dense form has a one at (i, j).
class Perm {
 public:
  Perm() = default;

  /// Throws DomainError unless `mapping` is a bijection on [0, n).
  explicit Perm(std::vector<int> mapping) : map_(std::move(mapping)) {
    std::vector<char> seen(map_.size(), 0);
    for (int j : map_) {
      if (j < 0 || j >= static_cast<int>(map_.size()) || seen[j]) {
        throw DomainError("Perm: mapping is not a bijection on [0, " +
                          std::to_string(map_.size()) + ")");
      }
      seen[j] = 1;
    }
  }

  static Perm identity(int n) {
    std::vector<int> m(n);
    std::iota(m.begin(), m.end(), 0);
    return Perm(std::move(m));
  }

  template <typename Rng>
  static Perm random(int n, Rng& rng) {
    std::vector<int> m(n);
    std::iota(m.begin(), m.end(), 0);
    std::shuffle(m.begin(), m.end(), rng);
    return Perm(std::move(m));
  }

  /// Reads the permutation off a 0/1 matrix; entries are compared against 0.5.
  template <typename Derived>
  static Perm from_dense(const Eigen::MatrixBase<Derived>& m) {
    check_square(m.rows(), m.cols(), "Perm::from_dense");
    std::vector<int> map(m.rows(), -1);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (m(i, j) > 0.5) {
          if (map[i] != -1) throw DomainError("Perm::from_dense: row has several ones");
          map[i] = static_cast<int>(j);
        }
      }
    }
    return Perm(std::move(map));
  }

  int size() const { return static_cast<int>(map_.size()); }
  int operator[](int i) const { return map_[i]; }
  const std::vector<int>& mapping() const { return map_; }

  template <typename Scalar = double>
  Matrix<Scalar> dense() const {
    Matrix<Scalar> m = Matrix<Scalar>::Zero(size(), size());
    for (int i = 0; i < size(); ++i) m(i, map_[i]) = Scalar(1);
    return m;
  }

  Perm inverse() const {
    std::vector<int> inv(map_.size());
    for (int i = 0; i < size(); ++i) inv[map_[i]] = i;
    return Perm(std::move(inv));
  }

  /// Matrix product dense(*this) * dense(other): i -> other[this[i]].
  Perm then(const Perm& other) const {
    check_same_size(size(), other.size(), "Perm::then");
    std::vector<int> m(map_.size());
    for (int i = 0; i < size(); ++i) m[i] = other[map_[i]];
    return Perm(std::move(m));
  }

  /// Number of positions where the two mappings disagree.
  int hamming(const Perm& other) const {
    check_same_size(size(), other.size(), "Perm::hamming");
    int d = 0;
    for (int i = 0; i < size(); ++i) d += map_[i] != other[i];
    return d;
  }

  friend bool operator==(const Perm&, const Perm&) = default;
  friend auto operator<=>(const Perm& a, const Perm& b) { return a.map_ <=> b.map_; }

 private:
  std::vector<int> map_;
};

/// The relative permutation P_i P_j^T (dense product), as a mapping.
inline Perm relative(const Perm& pi, const Perm& pj) { return pi.then(pj.inverse()); }

}  // namespace birksync
