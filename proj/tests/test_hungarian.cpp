#include "birksync/hungarian.hpp"
#include "birksync/manifold.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

using namespace birksync;

namespace {

struct BruteForce {
  std::vector<int> perm;
  double objective;
};

// Exhaustive search in lexicographic order; the first optimum found is the
// lexicographically smallest.
BruteForce brute_force(const Matrix<double>& c, Sense sense) {
  const int n = static_cast<int>(c.rows());
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  BruteForce best{p, sense == Sense::minimize ? std::numeric_limits<double>::infinity()
                                              : -std::numeric_limits<double>::infinity()};
  do {
    double v = 0;
    for (int i = 0; i < n; ++i) v += c(i, p[i]);
    if (sense == Sense::minimize ? v < best.objective : v > best.objective) best = {p, v};
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

Matrix<double> integer_costs(int n, int range, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, range);
  Matrix<double> c(n, n);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = d(rng);
  return c;
}

}  // namespace

TEST(Hungarian, PermutationMatrixMaximizeRecoversPerm) {
  const Perm p({3, 1, 0, 4, 2});
  const auto a = solve_assignment(p.dense<double>(), Sense::maximize);
  EXPECT_EQ(a.perm, p);
  EXPECT_DOUBLE_EQ(a.objective, 5.0);
}

TEST(Hungarian, TwoByTwoMinimize) {
  Matrix<double> c(2, 2);
  c << 1, 2, 2, 1;
  const auto a = solve_assignment(c);
  EXPECT_EQ(a.perm, Perm::identity(2));
  EXPECT_DOUBLE_EQ(a.objective, 2.0);
}

TEST(Hungarian, CostMatrixOverload) {
  Matrix<double> c(2, 2);
  c << 1, 2, 2, 1;
  const auto a = solve_assignment(CostMatrix<double>{c, Sense::maximize});
  EXPECT_EQ(a.perm, Perm({1, 0}));
  EXPECT_DOUBLE_EQ(a.objective, 4.0);
}

TEST(Hungarian, OneByOne) {
  Matrix<double> c(1, 1);
  c << -3.5;
  const auto a = solve_assignment(c);
  EXPECT_EQ(a.perm, Perm::identity(1));
  EXPECT_DOUBLE_EQ(a.objective, -3.5);
}

TEST(Hungarian, MatchesBruteForceOnRealCosts) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 100; ++trial) {
      Matrix<double> c(n, n);
      for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = g(rng);
      for (Sense sense : {Sense::minimize, Sense::maximize}) {
        const auto a = solve_assignment(c, sense);
        const auto oracle = brute_force(c, sense);
        EXPECT_NEAR(a.objective, oracle.objective, 1e-9) << "n=" << n << " trial=" << trial;
        EXPECT_EQ(a.perm.mapping(), oracle.perm) << "n=" << n << " trial=" << trial;
      }
    }
  }
}

TEST(Hungarian, TiesResolveToLexicographicallySmallest) {
  std::mt19937_64 rng(17);
  for (int n = 2; n <= 6; ++n) {
    for (int trial = 0; trial < 100; ++trial) {
      const Matrix<double> c = integer_costs(n, 2, rng);
      for (Sense sense : {Sense::minimize, Sense::maximize}) {
        const auto a = solve_assignment(c, sense);
        const auto oracle = brute_force(c, sense);
        EXPECT_DOUBLE_EQ(a.objective, oracle.objective);
        EXPECT_EQ(a.perm.mapping(), oracle.perm) << "n=" << n << " trial=" << trial << "\n" << c;
      }
    }
  }
}

TEST(Hungarian, ConstantCostGivesIdentity) {
  for (int n : {3, 7, 12}) {
    EXPECT_EQ(solve_assignment(Matrix<double>::Constant(n, n, 2.5)).perm, Perm::identity(n));
  }
}

TEST(Hungarian, SenseDualityOnDoublyStochastic) {
  for (int n : {2, 4, 8, 16}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto x = random_ds<double>(n, seed);
      const auto up = solve_assignment(x, Sense::maximize);
      const auto down = solve_assignment(Matrix<double>(-x), Sense::minimize);
      EXPECT_EQ(up.perm, down.perm);
      EXPECT_NEAR(up.objective, -down.objective, 1e-12);
    }
  }
}

TEST(Hungarian, Deterministic) {
  const auto x = random_ds<double>(20, 3);
  EXPECT_EQ(solve_assignment(x, Sense::maximize).perm, solve_assignment(x, Sense::maximize).perm);
}

TEST(Hungarian, RejectsNonFinite) {
  Matrix<double> c = Matrix<double>::Ones(3, 3);
  c(2, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(solve_assignment(c), DomainError);
  c(2, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(solve_assignment(c), DomainError);
}

TEST(Hungarian, RejectsNonSquare) {
  EXPECT_THROW(solve_assignment(Matrix<double>::Zero(2, 3)), InvalidDimension);
}
