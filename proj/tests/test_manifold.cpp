#include "birksync/manifold.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace birksync;

namespace {

Matrix<double> gaussian(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix<double> m(n, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Orthonormal basis of {Z : Z 1 = 0, Z^T 1 = 0}, one column per basis matrix
// in row-major order.
Matrix<double> tangent_basis(int n) {
  Matrix<double> a = Matrix<double>::Zero(2 * n, n * n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      a(r, r * n + c) = 1;
      a(n + c, r * n + c) = 1;
    }
  }
  Eigen::JacobiSVD<Matrix<double>> svd(a, Eigen::ComputeFullV);
  const int rank = 2 * n - 1;
  return svd.matrixV().rightCols(n * n - rank);
}

Matrix<double> unflatten(const Vector<double>& v, int n) {
  Matrix<double> m(n, n);
  for (int k = 0; k < n * n; ++k) m.data()[k] = v(k);
  return m;
}

double fisher_inner(const Matrix<double>& x, const Matrix<double>& a, const Matrix<double>& b) {
  return a.cwiseProduct(b).cwiseQuotient(x).sum();
}

}  // namespace

TEST(Sinkhorn, IdentityIsFixedPoint) {
  const auto r = sinkhorn_project(Matrix<double>::Identity(3, 3));
  EXPECT_EQ(r.iterations, 0);
  EXPECT_TRUE(r.matrix.isApprox(Matrix<double>::Identity(3, 3)));
}

TEST(Sinkhorn, AllOnesBecomesUniform) {
  const auto r = sinkhorn_project(Matrix<double>::Ones(2, 2));
  EXPECT_NEAR((r.matrix - Matrix<double>::Constant(2, 2, 0.5)).cwiseAbs().maxCoeff(), 0, 1e-12);
}

TEST(Sinkhorn, MatchesNaiveFixedPoint) {
  Matrix<double> m(2, 2);
  m << 2, 1, 1, 2;
  Matrix<double> oracle = m;
  for (int it = 0; it < 10000; ++it) {
    for (int r = 0; r < 2; ++r) oracle.row(r) /= oracle.row(r).sum();
    for (int c = 0; c < 2; ++c) oracle.col(c) /= oracle.col(c).sum();
    if (ds_violation(oracle) < 1e-12) break;
  }
  const auto r = sinkhorn_project(m);
  EXPECT_NEAR((r.matrix - oracle).cwiseAbs().maxCoeff(), 0, 1e-9);
  EXPECT_NEAR(r.matrix(0, 0), 2.0 / 3.0, 1e-9);
  EXPECT_NEAR(r.matrix(0, 1), 1.0 / 3.0, 1e-9);
}

TEST(Sinkhorn, RejectsNonPositiveEntries) {
  Matrix<double> m = Matrix<double>::Ones(3, 3);
  m(1, 2) = 0;
  EXPECT_THROW(sinkhorn_project(m), DomainError);
}

TEST(Sinkhorn, ReportsNonConvergence) {
  const Matrix<double> m = gaussian(6, 3).array().exp();
  try {
    sinkhorn_project(m, {1e-9, 1});
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.residual(), 1e-9);
  }
}

TEST(TangentProject, TangentInputIsUnchanged) {
  Matrix<double> y(2, 2);
  y << 1, -1, -1, 1;
  EXPECT_NEAR((tangent_project(center<double>(2), y) - y).cwiseAbs().maxCoeff(), 0, 1e-12);
}

TEST(TangentProject, OnesAtCenterVanish) {
  for (int n : {2, 3, 5, 8}) {
    const auto z = tangent_project(center<double>(n), Matrix<double>::Ones(n, n));
    EXPECT_NEAR(z.cwiseAbs().maxCoeff(), 0, 1e-12) << "n=" << n;
  }
}

TEST(TangentProject, OutputHasZeroSumsAndIsIdempotent) {
  for (int n : {2, 3, 8, 16}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto x = random_ds<double>(n, seed);
      const auto y = gaussian(n, seed + 100);
      const auto z = tangent_project(x, y);
      EXPECT_LT(z.rowwise().sum().cwiseAbs().maxCoeff(), 1e-8);
      EXPECT_LT(z.colwise().sum().cwiseAbs().maxCoeff(), 1e-8);
      EXPECT_LT((tangent_project(x, z) - z).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(TangentProject, SelfAdjointInFisherMetric) {
  for (int n : {3, 8}) {
    const auto x = random_ds<double>(n, 11);
    const auto a = gaussian(n, 1), b = gaussian(n, 2);
    const double lhs = fisher_inner(x, tangent_project(x, a), b);
    const double rhs = fisher_inner(x, a, tangent_project(x, b));
    EXPECT_NEAR(lhs, rhs, 1e-9 * (1 + std::abs(lhs)));
  }
}

TEST(TangentProject, DimensionMismatchThrows) {
  EXPECT_THROW(tangent_project(center<double>(3), Matrix<double>::Zero(4, 4)), InvalidDimension);
}

TEST(Retract, ZeroStepReturnsPoint) {
  for (int n : {2, 3, 8, 16}) {
    const auto x = random_ds<double>(n, 5);
    EXPECT_LT((retract(x, Matrix<double>::Zero(n, n)) - x).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Retract, TwoByTwoClosedForm) {
  const double t = 0.1;
  Matrix<double> xi(2, 2);
  xi << t, -t, -t, t;
  const auto y = retract(center<double>(2), xi);
  const double sigma = std::exp(2 * t) / (std::exp(2 * t) + std::exp(-2 * t));
  EXPECT_NEAR(y(0, 0), sigma, 1e-9);
  EXPECT_NEAR(y(0, 1), 1 - sigma, 1e-9);
  EXPECT_NEAR(y(1, 1), sigma, 1e-9);
}

TEST(Retract, FirstOrderRigidity) {
  const SinkhornOptions tight{1e-14, 100000};
  for (int n : {2, 3, 8, 16}) {
    const auto x = random_ds<double>(n, 21, tight);
    const auto xi = tangent_project(x, gaussian(n, 22));
    double prev = 0;
    for (double t : {1e-3, 1e-4, 1e-5}) {
      const double err = ((retract(x, t * xi, tight) - x) / t - xi).norm();
      if (prev > 0) {
        EXPECT_LT(err, 0.2 * prev) << "n=" << n << " t=" << t;
      }
      prev = err;
    }
  }
}

TEST(Retract, ClampsTinyEntries) {
  Matrix<double> x = Matrix<double>::Identity(3, 3);
  RetractDiagnostics diag;
  const auto y = retract(x, Matrix<double>::Zero(3, 3), {}, &diag);
  EXPECT_TRUE(is_doubly_stochastic(y));
  EXPECT_EQ(diag.clamped_entries, 6);
}

TEST(Retract, VelocityMatchesFiniteDifference) {
  const SinkhornOptions tight{1e-12, 100000};
  const int n = 5;
  const auto x = random_ds<double>(n, 31);
  const auto xi = tangent_project(x, Matrix<double>(x.cwiseProduct(gaussian(n, 32))));
  const double t = 0.3, h = 1e-4;
  const auto y = retract(x, t * xi, tight);
  const Matrix<double> fd = (retract(x, (t + h) * xi, tight) - retract(x, (t - h) * xi, tight)) / (2 * h);
  EXPECT_LT((retract_velocity(x, xi, y) - fd).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(VectorTransport, ZeroStepKeepsVector) {
  const auto x = random_ds<double>(4, 41);
  const auto zeta = tangent_project(x, gaussian(4, 42));
  EXPECT_LT((vector_transport(x, Matrix<double>::Zero(4, 4), zeta) - zeta).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(VectorTransport, OutputIsTangentAtRetractedPoint) {
  const auto x = random_ds<double>(6, 43);
  const auto eta = tangent_project(x, 0.05 * gaussian(6, 44));
  const auto zeta = tangent_project(x, gaussian(6, 45));
  const auto moved = vector_transport(x, eta, zeta);
  EXPECT_TRUE(is_tangent(moved));
  EXPECT_LT((tangent_project(retract(x, eta), moved) - moved).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(VectorTransport, RoundTripRecoversVector) {
  const int n = 5;
  const auto x = random_ds<double>(n, 51);
  const auto dir = tangent_project(x, gaussian(n, 52));
  const auto zeta = tangent_project(x, gaussian(n, 53));
  for (double s : {1e-3, 1e-2, 1e-1}) {
    const Matrix<double> eta = s * dir;
    const auto y = retract(x, eta);
    const auto there = tangent_project(y, zeta);
    const auto back_step = tangent_project(y, Matrix<double>(-eta));
    EXPECT_LT((vector_transport(y, back_step, there) - zeta).norm(), 1e-8 * zeta.norm()) << "s=" << s;
  }
}

TEST(FisherDivergence, MatchesFiniteDifferences) {
  for (int n : {3, 4, 6}) {
    const auto x = blend_to_center(random_ds<double>(n, 60 + n), 0.5);
    const Matrix<double> basis = tangent_basis(n);
    auto apply_m = [&](const Matrix<double>& at, const Matrix<double>& v) {
      return tangent_project(at, Matrix<double>(at.cwiseProduct(v)));
    };
    const double h = 1e-6;
    Matrix<double> oracle = Matrix<double>::Zero(n, n);
    for (Eigen::Index k = 0; k < basis.cols(); ++k) {
      const Matrix<double> q = unflatten(basis.col(k), n);
      oracle += (apply_m(x + h * q, q) - apply_m(x - h * q, q)) / (2 * h);
    }
    const auto div = fisher_divergence(x);
    EXPECT_LT((div - oracle).cwiseAbs().maxCoeff(), 1e-6) << "n=" << n;
    EXPECT_TRUE(is_tangent(div));
  }
}

TEST(FisherDivergence, VanishesAtCenter) {
  for (int n : {2, 3, 7}) {
    EXPECT_LT(fisher_divergence(center<double>(n)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RandomDs, OneByOne) {
  const auto x = random_ds<double>(1, 9);
  ASSERT_EQ(x.rows(), 1);
  EXPECT_NEAR(x(0, 0), 1.0, 1e-12);
}

TEST(RandomDs, DeterministicAndInterior) {
  const auto a = random_ds<double>(8, 77), b = random_ds<double>(8, 77);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(is_doubly_stochastic(a));
  EXPECT_GT(a.minCoeff(), 0);
  EXPECT_THROW(random_ds<double>(0, 1), InvalidDimension);
}

TEST(Bvn, VertexIsSingleTerm) {
  const Perm p({2, 0, 3, 1});
  const auto d = bvn_decompose(p.dense<double>());
  ASSERT_EQ(d.count(), 1);
  EXPECT_NEAR(d.terms[0].weight, 1.0, 1e-12);
  EXPECT_EQ(d.terms[0].perm.mapping(), p.mapping());
}

TEST(Bvn, CenterOfTwo) {
  const auto d = bvn_decompose(center<double>(2));
  ASSERT_EQ(d.count(), 2);
  EXPECT_NEAR(d.terms[0].weight, 0.5, 1e-12);
  EXPECT_NEAR(d.terms[1].weight, 0.5, 1e-12);
  EXPECT_NE(d.terms[0].perm.mapping(), d.terms[1].perm.mapping());
}

TEST(Bvn, RandomReconstruction) {
  for (int n = 2; n <= 8; ++n) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto x = random_ds<double>(n, 1000 + seed);
      const auto d = bvn_decompose(x);
      EXPECT_LT((d.reconstruct() - x).norm(), 1e-6);
      EXPECT_LE(d.count(), (n - 1) * (n - 1) + 1);
      double total = 0;
      for (const auto& t : d.terms) {
        total += t.weight;
        EXPECT_GT(t.weight, 0);
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(Bvn, RejectsNonDoublyStochastic) {
  EXPECT_THROW(bvn_decompose(Matrix<double>::Ones(3, 3)), DomainError);
}

TEST(Geometry, ScaledCenterLeavesPolytope) {
  for (int n : {2, 3, 10}) {
    EXPECT_TRUE(is_doubly_stochastic(center<double>(n)));
    EXPECT_FALSE(is_doubly_stochastic(Matrix<double>(1.01 * center<double>(n))));
  }
}

TEST(Geometry, RayExitAtOneOverNMinusOne) {
  for (int n : {3, 5, 10}) {
    const double edge = 1.0 / (n - 1);
    const auto inside = ray_point<double>(n, edge - 1e-6);
    const auto outside = ray_point<double>(n, edge + 1e-6);
    EXPECT_GE(inside.minCoeff(), 0) << "n=" << n;
    EXPECT_LT(outside.minCoeff(), 0) << "n=" << n;
    EXPECT_LT(ds_violation(inside), 1e-12);
  }
}

TEST(Geometry, BlendToCenter) {
  const Perm p({1, 0, 2});
  const auto b = blend_to_center(p.dense<double>(), 0.25);
  EXPECT_NEAR(b(0, 1), 0.75 + 0.25 / 3, 1e-12);
  EXPECT_NEAR(b(0, 0), 0.25 / 3, 1e-12);
  EXPECT_TRUE(is_doubly_stochastic(b));
}
