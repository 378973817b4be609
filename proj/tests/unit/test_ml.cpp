#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "drf/ml.hpp"

using namespace drf;
using namespace drf::ml;

namespace {

// Two informative columns shifted by class plus `noise` pure-noise columns.
Dataset separable(std::size_t n, std::size_t noise, unsigned seed, double gap = 4.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  Dataset d;
  d.n = n;
  d.p = 2 + noise;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    d.labels.push_back(y);
    d.x.push_back(g(rng) * 0.5 + (y ? gap : 0.0));
    d.x.push_back(g(rng) * 0.5 - (y ? gap : 0.0));
    for (std::size_t k = 0; k < noise; ++k) d.x.push_back(g(rng));
  }
  return d;
}

Dataset pure_noise(std::size_t n, std::size_t p, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  Dataset d;
  d.n = n;
  d.p = p;
  for (std::size_t i = 0; i < n * p; ++i) d.x.push_back(g(rng));
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(i % 2));
  std::shuffle(d.labels.begin(), d.labels.end(), rng);
  return d;
}

ForestConfig forest(std::size_t trees, std::uint64_t seed) {
  ForestConfig c;
  c.n_trees = trees;
  c.seed = seed;
  return c;
}

Tree leaf(std::size_t c0, std::size_t c1) {
  Tree t;
  TreeNode n;
  n.count0 = c0;
  n.count1 = c1;
  t.nodes.push_back(n);
  return t;
}

// Independent traversal of the stored node table.
int traverse(const Tree& t, std::span<const double> row) {
  int i = 0;
  while (t.nodes[i].feature >= 0) i = row[t.nodes[i].feature] <= t.nodes[i].threshold ? t.nodes[i].left : t.nodes[i].right;
  return t.nodes[i].count1 > t.nodes[i].count0;
}

}  // namespace

TEST(Imputation, MeanOfLaterDeaths) {
  const std::vector<SurvivalSample> s{{10, false}, {8, true}, {12, true}, {20, true}};
  EXPECT_EQ(impute_censored(s), (std::vector<double>{16, 8, 12, 20}));
}

TEST(Imputation, NothingCensoredIsIdentity) {
  const std::vector<SurvivalSample> s{{5, true}, {1, true}, {9, true}};
  EXPECT_EQ(impute_censored(s), (std::vector<double>{5, 1, 9}));
}

TEST(Imputation, EmptyEligibleSetKeepsTime) {
  const std::vector<SurvivalSample> s{{25, false}, {8, true}, {12, true}, {20, true}};
  EXPECT_EQ(impute_censored(s), (std::vector<double>{25, 8, 12, 20}));
}

TEST(Imputation, ReferenceSetSuppliesDeaths) {
  const std::vector<SurvivalSample> target{{10, false}, {30, true}};
  const std::vector<SurvivalSample> reference{{11, true}, {13, true}, {9, true}, {50, false}};
  EXPECT_EQ(impute_censored(target, reference), (std::vector<double>{12, 30}));
}

TEST(Imputation, NeverDecreasesCensoredTimes) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0, 1000);
  std::vector<SurvivalSample> s(200);
  for (auto& x : s) x = {std::round(u(rng)), rng() % 3 != 0};
  const auto out = impute_censored(s);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].event) {
      EXPECT_EQ(out[i], s[i].time);
    } else {
      EXPECT_GE(out[i], s[i].time);
    }
  }
}

TEST(SurvivalLabels, MedianCutOff) {
  EXPECT_EQ(make_survival_labels(std::vector<double>{10, 20, 30, 40}).labels, (std::vector<int>{0, 0, 1, 1}));
  const auto flat = make_survival_labels(std::vector<double>{7, 7, 7});
  EXPECT_EQ(flat.labels, (std::vector<int>{1, 1, 1}));
  EXPECT_TRUE(flat.degenerate);
  EXPECT_EQ(make_survival_labels(std::vector<double>{5, 15, 25}).labels, (std::vector<int>{0, 1, 1}));
}

TEST(Forest, SeparableTrainingAccuracy) {
  const Dataset d = separable(40, 0, 1);
  const auto m = rf_train(d, forest(100, 3));
  for (std::size_t i = 0; i < d.n; ++i) EXPECT_EQ(rf_predict_score(m, d.row(i)) >= 0.5, d.labels[i] == 1);
}

TEST(Forest, SameSeedSameTrees) {
  const Dataset d = separable(50, 6, 2, 0.7);
  const auto a = rf_train(d, forest(60, 9)), b = rf_train(d, forest(60, 9)), c = rf_train(d, forest(60, 10));
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_NE(a.fingerprint(), c.fingerprint());
  ForestConfig threaded = forest(60, 9);
  threaded.threads = 3;
  EXPECT_EQ(rf_train(d, threaded).fingerprint(), a.fingerprint());
}

TEST(Forest, PermutedLabelsGiveChanceOob) {
  const Dataset d = pure_noise(60, 10, 4);
  const auto m = rf_train(d, forest(500, 5));
  const double acc = rf_oob_accuracy(m, d.x, d.labels);
  EXPECT_GE(acc, 0.35);
  EXPECT_LE(acc, 0.65);
}

TEST(Forest, StructuralInvariants) {
  const Dataset d = separable(60, 8, 6, 1.0);
  ForestConfig cfg = forest(30, 7);
  cfg.min_leaf = 3;
  const auto m = rf_train(d, cfg);
  for (const Tree& t : m.trees) {
    EXPECT_FALSE(t.out_of_bag.empty());
    for (const TreeNode& n : t.nodes) {
      if (n.is_leaf()) {
        EXPECT_GE(n.count0 + n.count1, cfg.min_leaf);
      } else {
        EXPECT_LT(static_cast<std::size_t>(n.feature), d.p);
        EXPECT_GE(n.impurity_decrease, 0.0);
      }
    }
  }
}

TEST(Forest, ScoreIsVoteFraction) {
  ForestModel unanimous;
  unanimous.p = 1;
  unanimous.trees = {leaf(0, 3), leaf(1, 2), leaf(0, 1)};
  const std::vector<double> row{0.0};
  EXPECT_EQ(rf_predict_score(unanimous, row), 1.0);

  ForestModel split;
  split.p = 1;
  split.trees = {leaf(0, 2), leaf(2, 0)};
  EXPECT_EQ(rf_predict_score(split, row), 0.5);
}

TEST(Forest, ScoreMatchesDirectTraversal) {
  const Dataset d = separable(60, 4, 11, 0.8);
  const auto m = rf_train(d, forest(200, 12));
  double class1_scores = 0.0;
  std::size_t class1 = 0;
  for (std::size_t i = 0; i < d.n; ++i) {
    std::size_t votes = 0;
    for (const Tree& t : m.trees) votes += traverse(t, d.row(i));
    const double s = rf_predict_score(m, d.row(i));
    EXPECT_EQ(s, static_cast<double>(votes) / m.trees.size());
    if (d.labels[i] == 1) {
      class1_scores += s;
      ++class1;
    }
  }
  // Memorisation: training points of class 1 score high on average.
  EXPECT_GE(class1_scores / class1, 0.9);
}

TEST(Forest, Errors) {
  const Dataset d = separable(20, 0, 13);
  const auto m = rf_train(d, forest(5, 1));
  EXPECT_THROW(rf_predict_score(m, std::vector<double>{1.0}), DimensionError);
  Dataset one = d;
  std::fill(one.labels.begin(), one.labels.end(), 1);
  EXPECT_THROW(rf_train(one, forest(5, 1)), SingleClassError);
}

TEST(Importance, InformativeFeatureRanksFirst) {
  std::mt19937 rng(15);
  std::normal_distribution<double> g;
  Dataset d;
  d.n = 120;
  d.p = 8;
  for (std::size_t i = 0; i < d.n; ++i) {
    const double signal = g(rng);
    for (std::size_t k = 0; k < d.p; ++k) d.x.push_back(k == 5 ? signal : g(rng));
    d.labels.push_back(signal > 0 ? 1 : 0);
  }
  const auto imp = rf_importance(rf_train(d, forest(200, 16)));
  EXPECT_EQ(std::max_element(imp.begin(), imp.end()) - imp.begin(), 5);
  EXPECT_NEAR(std::accumulate(imp.begin(), imp.end(), 0.0), 1.0, 1e-9);

  const auto perm = rf_permutation_importance(rf_train(d, forest(200, 16)), d.x, d.labels, 3);
  EXPECT_EQ(std::max_element(perm.begin(), perm.end()) - perm.begin(), 5);
}

TEST(Importance, NoiseFeaturesStayFlat) {
  const Dataset d = pure_noise(100, 10, 17);
  const auto imp = rf_importance(rf_train(d, forest(500, 18)));
  const double mean = 1.0 / static_cast<double>(imp.size());
  EXPECT_LT(*std::max_element(imp.begin(), imp.end()), 3.0 * mean);
  EXPECT_NEAR(std::accumulate(imp.begin(), imp.end(), 0.0), 1.0, 1e-9);
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(auc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, std::vector<int>{0, 1, 0, 1}), 0.5);

  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<int> l{0, 0, 1, 1};
  double pairs = 0.0, correct = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (l[i] == 1 && l[j] == 0) {
        pairs += 1.0;
        correct += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  EXPECT_EQ(correct / pairs, 0.75);
  EXPECT_EQ(auc(s, l), 0.75);
}

TEST(Auc, SingleClassIsUndefined) {
  EXPECT_THROW(auc(std::vector<double>{0.2, 0.3}, std::vector<int>{1, 1}), UndefinedAuc);
}

TEST(Auc, TransformAndFlipProperties) {
  std::mt19937 rng(19);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> s(50);
  std::vector<int> l(50), flipped(50);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = std::round(u(rng) * 20) / 20;  // include ties
    l[i] = static_cast<int>(i % 3 == 0);
    flipped[i] = 1 - l[i];
  }
  std::vector<double> t(s.size());
  std::transform(s.begin(), s.end(), t.begin(), [](double v) { return std::log1p(v) * 9 - 4; });
  EXPECT_NEAR(auc(t, l), auc(s, l), 1e-12);
  EXPECT_NEAR(auc(s, flipped), 1.0 - auc(s, l), 1e-12);
}

TEST(Loocv, SeparableDataScoresHigh) {
  const Dataset d = separable(60, 10, 21, 1.5);
  EvalConfig cfg;
  cfg.forest = forest(200, 22);
  const auto r = evaluate_loocv(d, cfg);
  EXPECT_GE(r.auc, 0.95);
  EXPECT_EQ(r.scored.size(), 60u);
  EXPECT_EQ(r.importance.size(), d.p);
  EXPECT_NEAR(std::accumulate(r.importance.begin(), r.importance.end(), 0.0), 1.0, 1e-9);
}

TEST(Loocv, PermutedLabelsAtChance) {
  Dataset d = separable(60, 10, 23, 1.5);
  std::mt19937 rng(24);
  std::shuffle(d.labels.begin(), d.labels.end(), rng);
  EvalConfig cfg;
  cfg.forest = forest(200, 25);
  const auto r = evaluate_loocv(d, cfg);
  EXPECT_GE(r.auc, 0.35);
  EXPECT_LE(r.auc, 0.65);
}

TEST(Loocv, SameSeedSameReport) {
  const Dataset d = separable(30, 3, 26, 0.5);
  EvalConfig cfg;
  cfg.forest = forest(50, 27);
  const auto a = evaluate_loocv(d, cfg), b = evaluate_loocv(d, cfg);
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_EQ(a.importance, b.importance);
  EXPECT_EQ(a.auc, b.auc);
}

TEST(Loocv, SurvivalLabelsAndPredictedGroupLogRank) {
  std::mt19937 rng(28);
  std::normal_distribution<double> g;
  Dataset d;
  d.n = 40;
  d.p = 3;
  std::vector<SurvivalSample> surv;
  for (std::size_t i = 0; i < d.n; ++i) {
    const bool long_group = i % 2 == 0;
    d.x.push_back(g(rng) + (long_group ? 3 : 0));
    d.x.push_back(g(rng));
    d.x.push_back(g(rng));
    surv.push_back({long_group ? 800.0 + 10 * i : 100.0 + 5 * i, i % 5 != 0});
  }
  d.survival = surv;
  EvalConfig cfg;
  cfg.forest = forest(100, 29);
  const auto r = evaluate_loocv(d, cfg);
  EXPECT_GE(r.auc, 0.9);
  ASSERT_TRUE(r.logrank.has_value());
  EXPECT_LT(r.logrank->p_raw, 0.05);
  // Predicted-short vs predicted-long: the short group dies sooner.
  ASSERT_TRUE(r.logrank->hazard.has_value());
  EXPECT_GT(r.logrank->hazard->hr, 1.0);
  for (std::size_t i : r.scored) EXPECT_TRUE(r.labels[i] == 0 || r.labels[i] == 1);
}

TEST(Loocv, LoneMinoritySampleLeavesNothingToRank) {
  // Only one positive: the fold holding it out trains on a single class.
  Dataset d = separable(12, 0, 30);
  std::fill(d.labels.begin(), d.labels.end(), 0);
  d.labels[0] = 1;
  d.labels[1] = 1;
  EvalConfig cfg;
  cfg.forest = forest(20, 31);
  d.labels[1] = 0;
  EXPECT_THROW(evaluate_loocv(d, cfg), UndefinedAuc);
  d.labels[1] = 1;
  const auto r = evaluate_loocv(d, cfg);
  EXPECT_EQ(r.skipped_folds, 0u);
}

TEST(Split, HundredOfHundredFiftyOne) {
  const Dataset d = separable(151, 5, 32, 1.0);
  EvalConfig cfg;
  cfg.forest = forest(100, 33);
  const auto a = evaluate_split(d, 100, 34, cfg);
  EXPECT_EQ(a.scored.size(), 51u);
  const auto b = evaluate_split(d, 100, 34, cfg);
  EXPECT_EQ(a.scored, b.scored);
  EXPECT_EQ(a.auc, b.auc);
  const auto c = evaluate_split(d, 100, 35, cfg);
  EXPECT_NE(a.scored, c.scored);
}

TEST(Split, HoldingOutOneSampleLeavesASingleClassTestFold) {
  const Dataset d = separable(20, 2, 36);
  EvalConfig cfg;
  cfg.forest = forest(20, 37);
  EXPECT_THROW(evaluate_split(d, d.n - 1, 1, cfg), UndefinedAuc);
  EXPECT_THROW(evaluate_split(d, d.n, 1, cfg), Error);
  EXPECT_THROW(evaluate_split(d, 1, 1, cfg), Error);
}

TEST(Split, TestSamplesNeverReachTraining) {
  const Dataset d = separable(80, 6, 38, 0.8);
  EvalConfig cfg;
  cfg.forest = forest(80, 39);
  const auto base = evaluate_split(d, 50, 40, cfg);
  Dataset moved = d;
  for (std::size_t i : base.scored)
    for (std::size_t f = 0; f < d.p; ++f) moved.x[i * d.p + f] = 1000.0 + f;
  const auto r = evaluate_split(moved, 50, 40, cfg);
  EXPECT_EQ(r.scored, base.scored);
  EXPECT_EQ(r.importance, base.importance);

  // The same forest, trained directly on the training rows, is unaffected by the move.
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < d.n; ++i)
    if (std::find(base.scored.begin(), base.scored.end(), i) == base.scored.end()) train.push_back(i);
  EXPECT_EQ(rf_train(d.subset(train), cfg.forest).fingerprint(), rf_train(moved.subset(train), cfg.forest).fingerprint());
}

TEST(Forest, OobErrorVanishesOnLargeSeparableData) {
  const Dataset d = separable(200, 4, 41, 3.0);
  const auto m = rf_train(d, forest(500, 42));
  EXPECT_GE(rf_oob_accuracy(m, d.x, d.labels), 0.99);
}
