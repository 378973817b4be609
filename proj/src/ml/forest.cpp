#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include "drf/ml.hpp"
#include "drf/parallel.hpp"

namespace drf::ml {

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double decrease = -1.0;
};

double weighted_gini(double c0, double c1) {
  const double n = c0 + c1;
  return n > 0.0 ? n - (c0 * c0 + c1 * c1) / n : 0.0;
}

// Bootstrap duplicates are folded into per-sample weights, so each node holds distinct rows.
class TreeBuilder {
 public:
  TreeBuilder(std::span<const double> columns, std::size_t n, std::span<const int> labels,
              std::span<const std::uint32_t> weights, const ForestConfig& cfg, std::size_t mtry,
              std::mt19937_64& rng)
      : cols_(columns), n_(n), p_(columns.size() / n), labels_(labels), weights_(weights), cfg_(cfg), mtry_(mtry),
        rng_(rng), features_(p_) {
    std::iota(features_.begin(), features_.end(), 0);
  }

  std::vector<TreeNode> build(std::vector<std::size_t> samples) {
    samples_ = std::move(samples);
    nodes_.clear();
    struct Pending {
      int node;
      std::size_t begin, end;
    };
    std::vector<Pending> stack;
    nodes_.push_back(make_node(0, samples_.size()));
    stack.push_back({0, 0, samples_.size()});
    while (!stack.empty()) {
      const Pending cur = stack.back();
      stack.pop_back();
      const TreeNode& node = nodes_[static_cast<std::size_t>(cur.node)];
      if (node.count0 == 0 || node.count1 == 0 || node.count0 + node.count1 < 2 * cfg_.min_leaf) continue;

      const Split best = find_split(cur.begin, cur.end, node);
      if (best.feature < 0) continue;

      const double* col = column(static_cast<std::size_t>(best.feature));
      const auto mid_it =
          std::partition(samples_.begin() + static_cast<long>(cur.begin), samples_.begin() + static_cast<long>(cur.end),
                         [&](std::size_t s) { return col[s] <= best.threshold; });
      const auto mid = static_cast<std::size_t>(mid_it - samples_.begin());

      const int left = static_cast<int>(nodes_.size());
      nodes_.push_back(make_node(cur.begin, mid));
      const int right = static_cast<int>(nodes_.size());
      nodes_.push_back(make_node(mid, cur.end));
      TreeNode& parent = nodes_[static_cast<std::size_t>(cur.node)];
      parent.feature = best.feature;
      parent.threshold = best.threshold;
      parent.left = left;
      parent.right = right;
      parent.impurity_decrease = best.decrease;
      stack.push_back({right, mid, cur.end});
      stack.push_back({left, cur.begin, mid});
    }
    return std::move(nodes_);
  }

 private:
  struct Entry {
    double value;
    int label;
    std::uint32_t weight;
  };

  const double* column(std::size_t f) const { return cols_.data() + f * n_; }

  TreeNode make_node(std::size_t begin, std::size_t end) const {
    TreeNode n;
    for (std::size_t i = begin; i < end; ++i) (labels_[samples_[i]] ? n.count1 : n.count0) += weights_[samples_[i]];
    return n;
  }

  // Draws candidate features without replacement; keeps drawing past mtry while every
  // candidate so far is constant within the node.
  Split find_split(std::size_t begin, std::size_t end, const TreeNode& node) {
    const double c0 = static_cast<double>(node.count0), c1 = static_cast<double>(node.count1);
    const double parent = weighted_gini(c0, c1);
    const std::size_t m = node.count0 + node.count1;

    Split best;
    std::size_t tried = 0;
    for (std::size_t k = 0; k < p_; ++k) {
      if (tried >= mtry_ && best.feature >= 0) break;
      std::uniform_int_distribution<std::size_t> pick(k, p_ - 1);
      std::swap(features_[k], features_[pick(rng_)]);
      const std::size_t f = features_[k];
      ++tried;

      const double* col = column(f);
      buf_.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t s = samples_[i];
        buf_.push_back({col[s], labels_[s], weights_[s]});
      }
      std::sort(buf_.begin(), buf_.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });
      if (buf_.front().value == buf_.back().value) continue;

      double l0 = 0.0, l1 = 0.0;
      for (std::size_t i = 0; i + 1 < buf_.size(); ++i) {
        (buf_[i].label ? l1 : l0) += buf_[i].weight;
        if (buf_[i].value == buf_[i + 1].value) continue;
        const auto nl = static_cast<std::size_t>(l0 + l1);
        if (nl < cfg_.min_leaf || m - nl < cfg_.min_leaf) continue;
        const double dec = parent - weighted_gini(l0, l1) - weighted_gini(c0 - l0, c1 - l1);
        if (dec > best.decrease) {
          double thr = 0.5 * (buf_[i].value + buf_[i + 1].value);
          if (!(thr < buf_[i + 1].value)) thr = buf_[i].value;
          best = {static_cast<int>(f), thr, dec};
        }
      }
    }
    if (best.feature >= 0) best.decrease = std::max(0.0, best.decrease);
    return best;
  }

  std::span<const double> cols_;
  std::size_t n_;
  std::size_t p_;
  std::span<const int> labels_;
  std::span<const std::uint32_t> weights_;
  const ForestConfig& cfg_;
  std::size_t mtry_;
  std::mt19937_64& rng_;
  std::vector<std::size_t> features_;
  std::vector<std::size_t> samples_;
  std::vector<TreeNode> nodes_;
  std::vector<Entry> buf_;
};

std::size_t effective_mtry(const ForestConfig& cfg, std::size_t p) {
  std::size_t m = cfg.mtry;
  if (m == 0) m = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p))));
  return std::clamp<std::size_t>(m, 1, p);
}

}  // namespace

int Tree::vote(std::span<const double> row) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].count1 > nodes[i].count0 ? 1 : 0;
}

std::uint64_t ForestModel::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  for (const Tree& t : trees) {
    mix(t.nodes.size());
    for (const TreeNode& n : t.nodes) {
      mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(n.feature)));
      mix(std::bit_cast<std::uint64_t>(n.threshold));
      mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(n.left)));
      mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(n.right)));
      mix(n.count0);
      mix(n.count1);
    }
  }
  return h;
}

void Dataset::validate() const {
  if (x.size() != n * p) throw DimensionError("dataset matrix has " + std::to_string(x.size()) + " values, expected " +
                                              std::to_string(n) + "x" + std::to_string(p));
  if (!columns.empty() && columns.size() != p) throw DimensionError("column name count does not match p");
  if (n < 4) throw Error("dataset needs at least 4 samples");
  if (p == 0) throw DimensionError("dataset has no features");
  for (double v : x)
    if (!std::isfinite(v)) throw Error("dataset contains non-finite values");
  if (survival) {
    if (survival->size() != n) throw DimensionError("survival vector length does not match n");
  } else {
    if (labels.size() != n) throw DimensionError("label vector length does not match n");
    for (int l : labels)
      if (l != 0 && l != 1) throw Error("labels must be 0 or 1");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.n = rows.size();
  out.p = p;
  out.columns = columns;
  out.x.reserve(rows.size() * p);
  for (std::size_t r : rows) {
    const auto rr = row(r);
    out.x.insert(out.x.end(), rr.begin(), rr.end());
    if (!labels.empty()) out.labels.push_back(labels[r]);
  }
  if (survival) {
    out.survival.emplace();
    for (std::size_t r : rows) out.survival->push_back((*survival)[r]);
  }
  return out;
}

ForestModel rf_train(std::span<const double> x, std::size_t n, std::size_t p, std::span<const int> labels,
                     const ForestConfig& cfg) {
  if (x.size() != n * p || labels.size() != n) throw DimensionError("training matrix and labels disagree");
  if (n < 4) throw Error("random forest needs at least 4 samples");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0 || positives == n) throw SingleClassError("training labels contain a single class");
  if (cfg.n_trees == 0) throw Error("forest needs at least one tree");
  if (cfg.min_leaf == 0) throw Error("min_leaf must be >= 1");

  ForestModel model;
  model.config = cfg;
  model.p = p;
  model.n_train = n;
  model.trees.resize(cfg.n_trees);
  const std::size_t mtry = effective_mtry(cfg, p);

  std::vector<double> columns(n * p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < p; ++f) columns[f * n + i] = x[i * p + f];

  detail::parallel_for(cfg.n_trees, cfg.threads, [&](std::size_t t) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    std::vector<std::uint32_t> weight(n, 0);
    for (std::size_t b = 0; b < n; ++b) ++weight[draw(rng)];
    std::vector<std::size_t> distinct;
    Tree tree;
    for (std::size_t i = 0; i < n; ++i) (weight[i] ? distinct : tree.out_of_bag).push_back(i);
    TreeBuilder builder(columns, n, labels, weight, cfg, mtry, rng);
    tree.nodes = builder.build(std::move(distinct));
    model.trees[t] = std::move(tree);
  });
  return model;
}

ForestModel rf_train(const Dataset& d, const ForestConfig& cfg) {
  d.validate();
  if (d.survival) throw Error("rf_train needs explicit labels; derive survival labels first");
  return rf_train(d.x, d.n, d.p, d.labels, cfg);
}

double rf_predict_score(const ForestModel& m, std::span<const double> row) {
  if (row.size() != m.p)
    throw DimensionError("feature vector has " + std::to_string(row.size()) + " values, model expects " +
                         std::to_string(m.p));
  if (m.trees.empty()) throw Error("forest has no trees");
  std::size_t votes = 0;
  for (const Tree& t : m.trees) votes += static_cast<std::size_t>(t.vote(row));
  return static_cast<double>(votes) / static_cast<double>(m.trees.size());
}

double rf_oob_accuracy(const ForestModel& m, std::span<const double> x, std::span<const int> labels) {
  const std::size_t n = labels.size();
  if (x.size() != n * m.p) throw DimensionError("OOB matrix does not match model");
  std::vector<std::size_t> votes(n, 0), total(n, 0);
  for (const Tree& t : m.trees)
    for (std::size_t i : t.out_of_bag) {
      votes[i] += static_cast<std::size_t>(t.vote(x.subspan(i * m.p, m.p)));
      ++total[i];
    }
  std::size_t correct = 0, counted = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (total[i] == 0) continue;
    ++counted;
    const int pred = 2 * votes[i] > total[i] ? 1 : 0;
    if (pred == labels[i]) ++correct;
  }
  if (counted == 0) throw Error("no sample was out of bag");
  return static_cast<double>(correct) / static_cast<double>(counted);
}

std::vector<double> rf_importance(const ForestModel& m) {
  std::vector<double> imp(m.p, 0.0);
  for (const Tree& t : m.trees)
    for (const TreeNode& n : t.nodes)
      if (!n.is_leaf()) imp[static_cast<std::size_t>(n.feature)] += n.impurity_decrease;
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (total > 0.0) {
    for (double& v : imp) v /= total;
  } else if (!imp.empty()) {
    std::fill(imp.begin(), imp.end(), 1.0 / static_cast<double>(imp.size()));
  }
  return imp;
}

std::vector<double> rf_permutation_importance(const ForestModel& m, std::span<const double> x,
                                              std::span<const int> labels, std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (x.size() != n * m.p) throw DimensionError("permutation-importance matrix does not match model");
  const double base = rf_oob_accuracy(m, x, labels);
  std::vector<double> out(m.p, 0.0);
  std::vector<double> work(x.begin(), x.end());
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(n);
  for (std::size_t f = 0; f < m.p; ++f) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < n; ++i) work[i * m.p + f] = x[perm[i] * m.p + f];
    out[f] = base - rf_oob_accuracy(m, work, labels);
    for (std::size_t i = 0; i < n; ++i) work[i * m.p + f] = x[i * m.p + f];
  }
  return out;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
  const auto ranks = stats::midranks(scores);
  double pos = 0.0, neg = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      pos += 1.0;
      rank_sum += ranks[i];
    } else {
      neg += 1.0;
    }
  }
  if (pos == 0.0 || neg == 0.0) throw UndefinedAuc("AUC needs both classes present");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

unsigned default_thread_count() { return detail::pool_size(0); }

}  // namespace drf::ml
