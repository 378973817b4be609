#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drf/stats.hpp"

namespace drf::ml {

using stats::SurvivalSample;

/// Row-major n x p feature matrix with binary labels. When `survival` is set, evaluation
/// derives labels per training fold (imputation + median cut-off) and `labels` is ignored.
struct Dataset {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<double> x;
  std::vector<std::string> columns;
  std::vector<int> labels;
  std::optional<std::vector<SurvivalSample>> survival;

  double at(std::size_t row, std::size_t col) const { return x[row * p + col]; }
  std::span<const double> row(std::size_t r) const { return {x.data() + r * p, p}; }
  /// Throws DimensionError/Error on inconsistent sizes, non-finite values or n < 4.
  void validate() const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

struct ForestConfig {
  std::size_t n_trees = 500;
  std::size_t mtry = 0;  // 0 = floor(sqrt(p))
  std::size_t min_leaf = 1;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0 = default pool size
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::size_t count0 = 0;  // bootstrap class counts reaching the node
  std::size_t count1 = 0;
  double impurity_decrease = 0.0;  // weighted Gini decrease of this split

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<std::size_t> out_of_bag;

  /// 1 when the reached leaf holds more class-1 than class-0 samples.
  int vote(std::span<const double> row) const;
};

struct ForestModel {
  std::vector<Tree> trees;
  ForestConfig config;
  std::size_t p = 0;
  std::size_t n_train = 0;

  /// Order-sensitive FNV-1a hash over every node; equal models hash equal.
  std::uint64_t fingerprint() const;
};

/// Seeded per-tree streams: tree t uses seed_seq{seed, t}.
ForestModel rf_train(std::span<const double> x, std::size_t n, std::size_t p, std::span<const int> labels,
                     const ForestConfig& cfg);
ForestModel rf_train(const Dataset& d, const ForestConfig& cfg);

/// Fraction of trees voting class 1.
double rf_predict_score(const ForestModel& m, std::span<const double> row);

/// Out-of-bag accuracy over samples that are out of bag for at least one tree.
double rf_oob_accuracy(const ForestModel& m, std::span<const double> x, std::span<const int> labels);

/// Mean Gini decrease per feature, normalised to sum to 1.
std::vector<double> rf_importance(const ForestModel& m);

/// Mean out-of-bag accuracy drop when a feature column is permuted. Not normalised.
std::vector<double> rf_permutation_importance(const ForestModel& m, std::span<const double> x,
                                              std::span<const int> labels, std::uint64_t seed);

/// P(score+ > score-) + 0.5 P(tie). Throws UndefinedAuc with a single class.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Censored times become the mean of uncensored times >= their own; kept when none qualify.
std::vector<double> impute_censored(std::span<const SurvivalSample> s);
/// Imputes `targets` using the uncensored subjects of `reference` only.
std::vector<double> impute_censored(std::span<const SurvivalSample> targets,
                                    std::span<const SurvivalSample> reference);

struct SurvivalLabels {
  std::vector<int> labels;  // 1 = longer survival (time >= median)
  double median = 0.0;
  bool degenerate = false;
};
SurvivalLabels make_survival_labels(std::span<const double> imputed_times);

struct EvalConfig {
  ForestConfig forest;
  /// Score threshold separating predicted long (>=) from short survival groups.
  double group_threshold = 0.5;
};

struct EvalReport {
  double auc = 0.5;
  std::vector<double> scores;     // per sample; NaN where the sample was not scored
  std::vector<int> labels;        // label each scored sample was evaluated against (-1 if unscored)
  std::vector<std::size_t> scored;
  std::vector<double> importance;  // length p, averaged over trained models
  std::optional<stats::TestResult> logrank;
  std::vector<std::string> warnings;
  std::size_t skipped_folds = 0;
};

EvalReport evaluate_loocv(const Dataset& d, const EvalConfig& cfg);
EvalReport evaluate_split(const Dataset& d, std::size_t n_train, std::uint64_t seed, const EvalConfig& cfg);

unsigned default_thread_count();

}  // namespace drf::ml
