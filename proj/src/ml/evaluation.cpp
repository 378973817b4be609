#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "drf/ml.hpp"
#include "drf/parallel.hpp"

namespace drf::ml {

std::vector<double> impute_censored(std::span<const SurvivalSample> targets,
                                    std::span<const SurvivalSample> reference) {
  std::vector<double> deaths;
  for (const auto& s : reference)
    if (s.event) deaths.push_back(s.time);
  std::sort(deaths.begin(), deaths.end());
  // Suffix sums so each censored subject costs one binary search.
  std::vector<double> suffix(deaths.size() + 1, 0.0);
  for (std::size_t i = deaths.size(); i-- > 0;) suffix[i] = suffix[i + 1] + deaths[i];

  std::vector<double> out;
  out.reserve(targets.size());
  for (const auto& s : targets) {
    if (s.event) {
      out.push_back(s.time);
      continue;
    }
    const auto first = static_cast<std::size_t>(std::lower_bound(deaths.begin(), deaths.end(), s.time) - deaths.begin());
    const std::size_t eligible = deaths.size() - first;
    out.push_back(eligible == 0 ? s.time : suffix[first] / static_cast<double>(eligible));
  }
  return out;
}

std::vector<double> impute_censored(std::span<const SurvivalSample> s) { return impute_censored(s, s); }

SurvivalLabels make_survival_labels(std::span<const double> imputed_times) {
  const auto split = stats::median_split(imputed_times);
  return {split.labels, split.median, split.degenerate};
}

namespace {

struct FoldLabels {
  std::vector<int> train;
  std::vector<int> test;
  bool single_class = false;
};

// Labels for one train/test partition. Survival labels use imputation and the median cut-off
// of the training rows only.
FoldLabels fold_labels(const Dataset& d, std::span<const std::size_t> train, std::span<const std::size_t> test) {
  FoldLabels f;
  if (d.survival) {
    std::vector<SurvivalSample> tr, te;
    for (std::size_t i : train) tr.push_back((*d.survival)[i]);
    for (std::size_t i : test) te.push_back((*d.survival)[i]);
    const auto train_times = impute_censored(tr, tr);
    const auto labels = make_survival_labels(train_times);
    f.train = labels.labels;
    for (double t : impute_censored(te, tr)) f.test.push_back(t >= labels.median ? 1 : 0);
  } else {
    for (std::size_t i : train) f.train.push_back(d.labels[i]);
    for (std::size_t i : test) f.test.push_back(d.labels[i]);
  }
  const auto pos = std::count(f.train.begin(), f.train.end(), 1);
  f.single_class = pos == 0 || pos == static_cast<long>(f.train.size());
  return f;
}

std::vector<double> gather_rows(const Dataset& d, std::span<const std::size_t> rows) {
  std::vector<double> x;
  x.reserve(rows.size() * d.p);
  for (std::size_t r : rows) {
    const auto rr = d.row(r);
    x.insert(x.end(), rr.begin(), rr.end());
  }
  return x;
}

std::uint64_t fold_seed(std::uint64_t root, std::uint64_t fold) {
  // splitmix64 finaliser over (root, fold)
  std::uint64_t z = root + 0x9e3779b97f4a7c15ull * (fold + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void finish_report(const Dataset& d, const EvalConfig& cfg, EvalReport& r) {
  std::vector<double> s;
  std::vector<int> l;
  for (std::size_t i : r.scored) {
    s.push_back(r.scores[i]);
    l.push_back(r.labels[i]);
  }
  r.auc = auc(s, l);

  const double total = std::accumulate(r.importance.begin(), r.importance.end(), 0.0);
  if (total > 0.0)
    for (double& v : r.importance) v /= total;

  if (d.survival) {
    std::vector<SurvivalSample> predicted_short, predicted_long;
    for (std::size_t i : r.scored)
      (r.scores[i] >= cfg.group_threshold ? predicted_long : predicted_short).push_back((*d.survival)[i]);
    if (!predicted_short.empty() && !predicted_long.empty()) {
      try {
        r.logrank = stats::logrank(predicted_short, predicted_long);
      } catch (const UndefinedTest& e) {
        r.warnings.push_back(std::string("log-rank on predicted groups: ") + e.what());
      }
    } else {
      r.warnings.push_back("all scored samples fall in one predicted survival group; log-rank skipped");
    }
  }
}

}  // namespace

EvalReport evaluate_loocv(const Dataset& d, const EvalConfig& cfg) {
  d.validate();
  const std::size_t n = d.n;
  EvalReport r;
  r.scores.assign(n, std::numeric_limits<double>::quiet_NaN());
  r.labels.assign(n, -1);
  r.importance.assign(d.p, 0.0);

  struct FoldResult {
    bool skipped = false;
    double score = 0.0;
    int label = -1;
    std::vector<double> importance;
  };
  std::vector<FoldResult> folds(n);

  detail::parallel_for(n, cfg.forest.threads, [&](std::size_t i) {
    std::vector<std::size_t> train;
    train.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) train.push_back(j);
    const std::size_t test[1] = {i};
    const FoldLabels labels = fold_labels(d, train, test);
    if (labels.single_class) {
      folds[i].skipped = true;
      return;
    }
    ForestConfig fc = cfg.forest;
    fc.seed = fold_seed(cfg.forest.seed, i);
    fc.threads = 1;
    const auto x = gather_rows(d, train);
    const ForestModel model = rf_train(x, train.size(), d.p, labels.train, fc);
    folds[i].score = rf_predict_score(model, d.row(i));
    folds[i].label = labels.test[0];
    folds[i].importance = rf_importance(model);
  });

  for (std::size_t i = 0; i < n; ++i) {
    if (folds[i].skipped) {
      ++r.skipped_folds;
      r.warnings.push_back("fold " + std::to_string(i) + " skipped: training labels contain a single class");
      continue;
    }
    r.scores[i] = folds[i].score;
    r.labels[i] = folds[i].label;
    r.scored.push_back(i);
    for (std::size_t f = 0; f < d.p; ++f) r.importance[f] += folds[i].importance[f];
  }
  finish_report(d, cfg, r);
  return r;
}

EvalReport evaluate_split(const Dataset& d, std::size_t n_train, std::uint64_t seed, const EvalConfig& cfg) {
  d.validate();
  if (n_train < 2 || n_train >= d.n)
    throw Error("split needs 2 <= n_train < n (n_train=" + std::to_string(n_train) + ", n=" + std::to_string(d.n) + ")");
  std::vector<std::size_t> order(d.n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<long>(n_train), order.end());

  const FoldLabels labels = fold_labels(d, train, test);
  if (labels.single_class) throw SingleClassError("training split contains a single class");

  EvalReport r;
  r.scores.assign(d.n, std::numeric_limits<double>::quiet_NaN());
  r.labels.assign(d.n, -1);
  const auto x = gather_rows(d, train);
  const ForestModel model = rf_train(x, train.size(), d.p, labels.train, cfg.forest);
  for (std::size_t k = 0; k < test.size(); ++k) {
    r.scores[test[k]] = rf_predict_score(model, d.row(test[k]));
    r.labels[test[k]] = labels.test[k];
  }
  r.scored = test;
  std::sort(r.scored.begin(), r.scored.end());
  r.importance = rf_importance(model);
  finish_report(d, cfg, r);
  return r;
}

}  // namespace drf::ml
