#include "birksync/generator.hpp"
#include "birksync/optimizer.hpp"
#include "birksync/sampler.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace birksync;

namespace {

SyntheticInstance instance(int num_nodes, int n, double swaps, std::uint64_t seed) {
  GeneratorConfig cfg;
  cfg.num_nodes = num_nodes;
  cfg.n = n;
  cfg.swap_fraction = swaps;
  cfg.seed = seed;
  return generate_synthetic(cfg);
}

ConfidenceMap<double> single_map(const Matrix<double>& m) {
  ConfidenceMap<double> cm;
  cm.edges.push_back({0, 1, m});
  return cm;
}

// Anchored rounded state of a draw: node k relative to node 0.
std::vector<Perm> anchored(const SyncState<double>& s) { return anchor_to_first(round_state(s)); }

}  // namespace

TEST(SamplerOptions, Validation) {
  SamplerOptions o;
  EXPECT_NO_THROW(o.validate());
  o.step = 0;
  EXPECT_THROW(o.validate(), InvariantError);
  o = {};
  o.beta = -1;
  EXPECT_THROW(o.validate(), InvariantError);
  o = {};
  o.iterations = 0;
  EXPECT_THROW(o.validate(), InvariantError);
  o = {};
  o.burn_in_fraction = 1;
  EXPECT_THROW(o.validate(), InvariantError);
}

TEST(RlmcSample, DeterministicForFixedSeed) {
  const auto inst = instance(4, 6, 0.25, 1);
  const auto init = dense_state<double>(inst.truth.perms);
  SamplerOptions o;
  o.iterations = 300;
  o.seed = 11;
  const auto a = rlmc_sample(inst.problem, init, o);
  const auto b = rlmc_sample(inst.problem, init, o);
  ASSERT_TRUE(a.ok);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.energies, b.energies);
  o.seed = 12;
  EXPECT_NE(rlmc_sample(inst.problem, init, o).states, a.states);
}

TEST(RlmcSample, RetainsAfterBurnInWithThinning) {
  const auto inst = instance(3, 4, 0.25, 2);
  SamplerOptions o;
  o.iterations = 100;
  o.burn_in_fraction = 0.1;
  o.thin = 3;
  const auto s = rlmc_sample(inst.problem, dense_state<double>(inst.truth.perms), o);
  EXPECT_EQ(s.iterations_run, 100);
  EXPECT_EQ(s.states.size(), 30u);
  EXPECT_EQ(s.energies.size(), 30u);
  for (std::size_t k = 0; k < s.states.size(); ++k) {
    EXPECT_NEAR(s.energies[k], energy(inst.problem, s.states[k]), 1e-12);
  }
}

TEST(RlmcSample, StatesStayDoublyStochastic) {
  const auto inst = instance(5, 8, 0.25, 3);
  SamplerOptions o;
  o.iterations = 2000;
  o.step = 1e-3;
  const auto s = rlmc_sample(inst.problem, dense_state<double>(inst.truth.perms), o);
  ASSERT_TRUE(s.ok) << s.error;
  double worst = 0;
  for (const auto& st : s.states) {
    for (const auto& x : st) worst = std::max(worst, ds_violation(x));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(RlmcSample, ZeroNoiseMatchesGradientDescentBitwise) {
  const auto inst = instance(4, 6, 0.25, 4);
  const auto init = random_state<double>(4, 6, 4);
  SamplerOptions o;
  o.iterations = 200;
  o.burn_in_fraction = 0;
  o.zero_noise = true;
  o.step = 1e-3;
  const auto s = rlmc_sample(inst.problem, init, o);
  ASSERT_TRUE(s.ok);
  EXPECT_EQ(s.capped_steps, 0);

  SyncState<double> start;
  for (const auto& x : init) {
    start.push_back(sinkhorn_project(blend_to_center(x, o.init_perturbation), o.sinkhorn).matrix);
  }
  const auto gd = retraction_gradient_descent(inst.problem, start, o.step, o.iterations, o.metric, o.sinkhorn);
  ASSERT_EQ(s.states.size() + 1, gd.states.size());
  for (std::size_t k = 0; k < s.states.size(); ++k) {
    EXPECT_EQ(s.states[k], gd.states[k + 1]) << "iteration " << k + 1;
    EXPECT_EQ(s.energies[k], gd.energies[k + 1]);
  }
  for (std::size_t k = 1; k < gd.energies.size(); ++k) EXPECT_LE(gd.energies[k], gd.energies[k - 1]);
}

TEST(RlmcSample, AbortReturnsPartialResult) {
  const auto inst = instance(3, 5, 0.25, 5);
  SamplerOptions o;
  o.iterations = 500;
  o.burn_in_fraction = 0;
  o.step = 10;
  o.max_log_step = 1e3;
  o.sinkhorn = {1e-12, 2};
  const auto s = rlmc_sample(inst.problem, dense_state<double>(inst.truth.perms), o);
  EXPECT_FALSE(s.ok);
  EXPECT_FALSE(s.error.empty());
  EXPECT_LT(s.iterations_run, 500);
  EXPECT_EQ(static_cast<int>(s.states.size()), s.iterations_run);
}

TEST(RlmcSample, DoublingBetaConcentratesOnMode) {
  GeneratorConfig cfg;
  cfg.num_nodes = 3;
  cfg.n = 3;
  cfg.swap_fraction = 0.34;
  cfg.seed = 7;
  const auto inst = generate_synthetic(cfg);
  const auto init = dense_state<double>(inst.truth.perms);
  const auto [relaxed, rep] = lrbfgs_solve(inst.problem, init);
  const auto mode = anchor_to_first(rep.rounded);

  auto frequency = [&](double beta) {
    double total = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      SamplerOptions o;
      o.beta = beta;
      o.step = 1e-3;
      o.iterations = 20000;
      o.seed = seed;
      const auto s = rlmc_sample(inst.problem, init, o);
      EXPECT_TRUE(s.ok) << s.error;
      long hits = 0;
      for (const auto& st : s.states) hits += anchored(st) == mode;
      total += static_cast<double>(hits) / static_cast<double>(s.states.size());
    }
    return total / 5;
  };
  const double low = frequency(0.5), high = frequency(1.0);
  EXPECT_GT(high, low);
}

TEST(ConfidenceMap, SingleSampleIsItsProduct) {
  const auto inst = instance(3, 5, 0.25, 6);
  SampleSet<double> s;
  s.states.push_back(random_state<double>(3, 5, 6));
  const auto cm = confidence_map(s, inst.problem.edge_pairs());
  ASSERT_EQ(cm.edges.size(), inst.problem.edges().size());
  for (const auto& e : cm.edges) {
    EXPECT_TRUE(e.matrix.isApprox(s.states[0][e.i] * s.states[0][e.j].transpose()));
  }
}

TEST(ConfidenceMap, IdenticalSamplesAndBounds) {
  const auto x = random_state<double>(2, 4, 7);
  SampleSet<double> s;
  for (int k = 0; k < 5; ++k) s.states.push_back(x);
  const auto cm = confidence_map(s, {{0, 1}, {1, 0}});
  const Matrix<double> prod = x[0] * x[1].transpose();
  EXPECT_LT((cm.edges[0].matrix - prod).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((cm.edges[1].matrix - prod.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  for (const auto& e : cm.edges) {
    EXPECT_GE(e.matrix.minCoeff(), 0);
    EXPECT_LE(e.matrix.maxCoeff(), 1);
  }
  EXPECT_THROW(confidence_map(SampleSet<double>{}, {{0, 1}}), InvariantError);
}

TEST(TopkHypotheses, Examples) {
  Matrix<double> m(3, 3);
  m << 0.6, 0.3, 0.1, 0.2, 0.2, 0.6, 0.2, 0.5, 0.3;
  const auto h = topk_hypotheses(single_map(m), 2);
  EXPECT_EQ(h[0].rows[0], (std::vector<int>{0, 1}));
  EXPECT_EQ(h[0].rows[1], (std::vector<int>{2, 0}));
  EXPECT_EQ(h[0].rows[2], (std::vector<int>{1, 2}));

  const Perm p({2, 0, 1});
  const auto vertex = topk_hypotheses(single_map(p.dense<double>()), 1);
  for (int r = 0; r < 3; ++r) EXPECT_EQ(vertex[0].rows[r], std::vector<int>{p[r]});

  const auto all = topk_hypotheses(single_map(m), 3);
  for (const auto& row : all[0].rows) EXPECT_EQ(row.size(), 3u);
  EXPECT_THROW(topk_hypotheses(single_map(m), 0), InvariantError);
  EXPECT_THROW(topk_hypotheses(single_map(m), 4), InvariantError);
}

TEST(TopkRecall, KOneIsRecallAndKnIsOne) {
  const auto inst = instance(5, 8, 0.25, 8);
  const auto est = round_state(random_state<double>(5, 8, 8));
  SampleSet<double> s;
  s.states.push_back(random_state<double>(5, 8, 9));
  const auto cm = confidence_map(s, inst.problem.edge_pairs());
  EXPECT_DOUBLE_EQ(topk_recall(est, topk_hypotheses(cm, 1), inst.truth), recall(est, inst.truth, inst.problem));
  EXPECT_DOUBLE_EQ(topk_recall(est, topk_hypotheses(cm, 8), inst.truth), 1.0);
}

TEST(TopkRecall, MonotoneInK) {
  const auto inst = instance(5, 10, 0.25, 9);
  const auto [relaxed, rep] = lrbfgs_solve(inst.problem, spectral_init<double>(inst.problem));
  SamplerOptions o;
  o.iterations = 500;
  o.step = 1e-3;
  const auto s = rlmc_sample(inst.problem, relaxed, o);
  ASSERT_TRUE(s.ok);
  const auto cm = confidence_map(s, inst.problem.edge_pairs());
  double prev = 0;
  for (int k = 1; k <= 10; ++k) {
    const double r = topk_recall(rep.rounded, topk_hypotheses(cm, k), inst.truth);
    EXPECT_GE(r, prev) << "K=" << k;
    prev = r;
  }
  EXPECT_DOUBLE_EQ(prev, 1.0);
}

TEST(TopkRecall, RandomBaselineMatchesClosedForm) {
  const auto inst = instance(6, 12, 0.25, 10);
  const auto est = round_state(spectral_init<double>(inst.problem));
  const auto edges = inst.problem.edge_pairs();
  const double r = recall(est, inst.truth, edges);
  const int n = 12;
  std::mt19937_64 rng(10);
  for (int k : {1, 2, 3, 6, 12}) {
    double mean = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      mean += topk_recall(est, random_hypotheses(est, edges, k, rng), inst.truth);
    }
    mean /= 1000;
    const double expected = r + (1 - r) * (k - 1) / static_cast<double>(n - 1);
    EXPECT_NEAR(mean, expected, 0.02) << "K=" << k;
  }
}

TEST(TopkRecall, DimensionMismatchThrows) {
  const auto inst = instance(3, 4, 0.25, 11);
  const auto est = inst.truth.perms;
  std::mt19937_64 rng(1);
  const auto hyps = random_hypotheses(est, inst.problem.edge_pairs(), 2, rng);
  GroundTruth short_gt{{inst.truth.perms[0], inst.truth.perms[1]}};
  EXPECT_THROW(topk_recall(est, hyps, short_gt), InvalidDimension);
  EXPECT_THROW(topk_recall(est, {}, inst.truth), InvariantError);
}
