#include "gsae/tree.hpp"

#include <algorithm>
#include <cmath>

#include "gsae/parallel.hpp"

namespace gsae {

double gini_impurity(std::int64_t count0, std::int64_t count1) {
  if (count0 < 0 || count1 < 0) throw ValidationError("negative class count");
  const std::int64_t n = count0 + count1;
  if (n == 0) throw ValidationError("gini impurity of an empty node");
  const double p0 = static_cast<double>(count0) / static_cast<double>(n);
  const double p1 = static_cast<double>(count1) / static_cast<double>(n);
  return p0 * (1.0 - p0) + p1 * (1.0 - p1);
}

namespace {

double split_quality(std::int64_t l0, std::int64_t l1, std::int64_t r0, std::int64_t r1) {
  const auto nl = static_cast<double>(l0 + l1);
  const auto nr = static_cast<double>(r0 + r1);
  return (nl * gini_impurity(l0, l1) + nr * gini_impurity(r0, r1)) / (nl + nr);
}

using ValueLabel = std::pair<double, std::uint8_t>;

// Exact search over one sorted feature column: candidate thresholds are the
// midpoints of consecutive distinct values.
SplitCandidate scan_sorted_column(const std::vector<ValueLabel>& column, int feature,
                                  std::int64_t total0, std::int64_t total1) {
  SplitCandidate best;
  std::int64_t l0 = 0, l1 = 0;
  const std::size_t n = column.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (column[i].second) ++l1; else ++l0;
    if (column[i + 1].first > column[i].first) {
      const double q = split_quality(l0, l1, total0 - l0, total1 - l1);
      if (q < best.quality) {
        best.quality = q;
        best.feature = feature;
        best.threshold = (column[i].first + column[i + 1].first) / 2.0;
      }
    }
  }
  return best;
}

struct NodeView {
  const Eigen::MatrixXd& latents;
  const std::vector<std::uint8_t>& labels;
  const std::vector<std::uint8_t>& excluded;
  const TreeFitConfig& config;
  bool use_histogram;
};

SplitCandidate scan_histogram_column(const NodeView& view, const std::vector<Eigen::Index>& rows,
                                     int feature, std::int64_t total0, std::int64_t total1) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index r : rows) {
    const double v = view.latents(r, feature);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  SplitCandidate best;
  if (!(hi > lo)) return best;

  const int bins = view.config.histogram_bins;
  std::vector<std::int64_t> bin0(static_cast<std::size_t>(bins), 0);
  std::vector<std::int64_t> bin1(static_cast<std::size_t>(bins), 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (Eigen::Index r : rows) {
    auto b = static_cast<int>((view.latents(r, feature) - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    if (view.labels[static_cast<std::size_t>(r)]) ++bin1[static_cast<std::size_t>(b)];
    else ++bin0[static_cast<std::size_t>(b)];
  }
  std::int64_t l0 = 0, l1 = 0;
  for (int b = 0; b + 1 < bins; ++b) {
    l0 += bin0[static_cast<std::size_t>(b)];
    l1 += bin1[static_cast<std::size_t>(b)];
    if (l0 + l1 == 0 || l0 + l1 == total0 + total1) continue;
    const double q = split_quality(l0, l1, total0 - l0, total1 - l1);
    if (q < best.quality) {
      best.quality = q;
      best.feature = feature;
      best.threshold = lo + width * static_cast<double>(b + 1);
    }
  }
  return best;
}

SplitCandidate best_split(const NodeView& view, const std::vector<Eigen::Index>& rows,
                          std::int64_t total0, std::int64_t total1) {
  const auto m = static_cast<int>(view.latents.cols());
  std::vector<SplitCandidate> chunk_best(
      static_cast<std::size_t>(std::max(1, view.config.threads)));

  const std::int64_t chunk_count = static_cast<std::int64_t>(chunk_best.size());
  const std::int64_t per_chunk = (m + chunk_count - 1) / chunk_count;
  parallel_for(chunk_count, view.config.threads, [&](std::int64_t cb, std::int64_t ce) {
    std::vector<ValueLabel> column;
    for (std::int64_t c = cb; c < ce; ++c) {
      SplitCandidate local;
      const int f_begin = static_cast<int>(c * per_chunk);
      const int f_end = static_cast<int>(std::min<std::int64_t>(m, (c + 1) * per_chunk));
      for (int f = f_begin; f < f_end; ++f) {
        if (view.excluded[static_cast<std::size_t>(f)]) continue;
        SplitCandidate cand;
        if (view.use_histogram) {
          cand = scan_histogram_column(view, rows, f, total0, total1);
        } else {
          column.clear();
          column.reserve(rows.size());
          for (Eigen::Index r : rows) {
            column.emplace_back(view.latents(r, f), view.labels[static_cast<std::size_t>(r)]);
          }
          std::sort(column.begin(), column.end(),
                    [](const ValueLabel& a, const ValueLabel& b) { return a.first < b.first; });
          cand = scan_sorted_column(column, f, total0, total1);
        }
        if (cand.found() && cand.better_than(local)) local = cand;
      }
      chunk_best[static_cast<std::size_t>(c)] = local;
    }
  });

  SplitCandidate best;
  for (const auto& cand : chunk_best) {
    if (cand.found() && cand.better_than(best)) best = cand;
  }
  return best;
}

std::unique_ptr<TreeNode> build_node(const NodeView& view, std::vector<Eigen::Index>& rows,
                                     int depth) {
  auto node = std::make_unique<TreeNode>();
  for (Eigen::Index r : rows) ++node->counts[view.labels[static_cast<std::size_t>(r)]];
  node->gini = gini_impurity(node->counts[0], node->counts[1]);
  node->majority = node->counts[1] > node->counts[0] ? 1 : 0;

  if (depth >= view.config.max_depth || node->counts[0] == 0 || node->counts[1] == 0 ||
      static_cast<std::int64_t>(rows.size()) < view.config.min_samples_split) {
    return node;
  }
  const SplitCandidate split = best_split(view, rows, node->counts[0], node->counts[1]);
  if (!split.found()) return node;

  node->feature = split.feature;
  node->threshold = split.threshold;
  std::vector<Eigen::Index> left_rows, right_rows;
  for (Eigen::Index r : rows) {
    if (view.latents(r, split.feature) <= split.threshold) left_rows.push_back(r);
    else right_rows.push_back(r);
  }
  rows.clear();
  rows.shrink_to_fit();
  node->left = build_node(view, left_rows, depth + 1);
  node->right = build_node(view, right_rows, depth + 1);
  return node;
}

}  // namespace

DecisionTree fit_tree(const Eigen::MatrixXd& latents, const std::vector<std::uint8_t>& labels,
                      const std::vector<Eigen::Index>& rows, const TreeFitConfig& config,
                      const std::vector<std::uint8_t>& excluded_mask) {
  if (labels.size() != static_cast<std::size_t>(latents.rows())) {
    throw ValidationError("label count does not match latent rows");
  }
  if (excluded_mask.size() != static_cast<std::size_t>(latents.cols())) {
    throw ValidationError("exclusion mask size does not match feature count");
  }
  if (config.max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (std::all_of(excluded_mask.begin(), excluded_mask.end(),
                  [](std::uint8_t e) { return e != 0; })) {
    throw ConfigError("all features are excluded");
  }

  std::int64_t totals[2] = {0, 0};
  for (Eigen::Index r : rows) ++totals[labels[static_cast<std::size_t>(r)]];
  if (totals[0] == 0 || totals[1] == 0) {
    throw ValidationError("tree fitting requires both classes");
  }

  NodeView view{latents, labels, excluded_mask, config,
                latents.cols() > config.histogram_feature_threshold};
  std::vector<Eigen::Index> work = rows;
  DecisionTree tree;
  tree.root = build_node(view, work, 0);
  return tree;
}

DecisionTree fit_tree(const Eigen::MatrixXd& latents, const std::vector<std::uint8_t>& labels,
                      const TreeFitConfig& config, const std::vector<int>& excluded) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(latents.cols()), 0);
  for (int f : excluded) {
    if (f < 0 || f >= latents.cols()) throw ValidationError("excluded feature index out of range");
    mask[static_cast<std::size_t>(f)] = 1;
  }
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(latents.rows()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<Eigen::Index>(i);
  return fit_tree(latents, labels, rows, config, mask);
}

int predict_at_depth(const TreeNode& root, const Eigen::MatrixXd& latents, Eigen::Index row,
                     int depth_limit) {
  const TreeNode* node = &root;
  int depth = 0;
  while (!node->is_leaf() && depth < depth_limit) {
    node = latents(row, node->feature) <= node->threshold ? node->left.get() : node->right.get();
    ++depth;
  }
  return node->majority;
}

std::vector<double> cumulative_capacity(const DecisionTree& tree, const Eigen::MatrixXd& latents,
                                        const std::vector<std::uint8_t>& labels,
                                        const std::vector<Eigen::Index>& rows, int max_depth) {
  if (!tree.root) throw ValidationError("tree is empty");
  if (rows.empty()) throw ValidationError("cumulative capacity needs a non-empty eval set");
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");

  std::vector<std::int64_t> correct(static_cast<std::size_t>(max_depth), 0);
  for (Eigen::Index r : rows) {
    const TreeNode* node = tree.root.get();
    const int truth = labels[static_cast<std::size_t>(r)];
    for (int depth = 1; depth <= max_depth; ++depth) {
      if (!node->is_leaf()) {
        node = latents(r, node->feature) <= node->threshold ? node->left.get()
                                                            : node->right.get();
      }
      if (node->majority == truth) ++correct[static_cast<std::size_t>(depth - 1)];
    }
  }
  std::vector<double> acc(static_cast<std::size_t>(max_depth));
  for (std::size_t i = 0; i < acc.size(); ++i) {
    acc[i] = static_cast<double>(correct[i]) / static_cast<double>(rows.size());
  }
  return acc;
}

RootScanCache::RootScanCache(const Eigen::MatrixXd& latents,
                             const std::vector<std::uint8_t>& labels,
                             const std::vector<Eigen::Index>& rows, int threads)
    : threads_(threads) {
  const auto m = latents.cols();
  columns_.resize(static_cast<std::size_t>(m));
  for (Eigen::Index r : rows) ++totals_[labels[static_cast<std::size_t>(r)]];

  parallel_for(m, threads, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t f = begin; f < end; ++f) {
      auto& column = columns_[static_cast<std::size_t>(f)];
      column.reserve(rows.size());
      for (Eigen::Index r : rows) {
        column.emplace_back(latents(r, f), labels[static_cast<std::size_t>(r)]);
      }
      std::sort(column.begin(), column.end(),
                [](const ValueLabel& a, const ValueLabel& b) { return a.first < b.first; });
    }
  });
}

SplitCandidate RootScanCache::best_root(const std::vector<std::uint8_t>& excluded_mask) const {
  const auto m = static_cast<std::int64_t>(columns_.size());
  if (excluded_mask.size() != columns_.size()) {
    throw ValidationError("exclusion mask size does not match feature count");
  }
  const std::int64_t workers = std::max(1, threads_);
  std::vector<SplitCandidate> chunk_best(static_cast<std::size_t>(workers));
  const std::int64_t per_chunk = (m + workers - 1) / workers;

  parallel_for(workers, threads_, [&](std::int64_t cb, std::int64_t ce) {
    for (std::int64_t c = cb; c < ce; ++c) {
      SplitCandidate local;
      const auto f_begin = c * per_chunk;
      const auto f_end = std::min(m, (c + 1) * per_chunk);
      for (std::int64_t f = f_begin; f < f_end; ++f) {
        if (excluded_mask[static_cast<std::size_t>(f)]) continue;
        const SplitCandidate cand = scan_sorted_column(columns_[static_cast<std::size_t>(f)],
                                                       static_cast<int>(f), totals_[0], totals_[1]);
        if (cand.found() && cand.better_than(local)) local = cand;
      }
      chunk_best[static_cast<std::size_t>(c)] = local;
    }
  });

  SplitCandidate best;
  for (const auto& cand : chunk_best) {
    if (cand.found() && cand.better_than(best)) best = cand;
  }
  return best;
}

RootScanCache::Stump RootScanCache::stump_for(const SplitCandidate& split) const {
  if (!split.found()) throw ValidationError("stump requested for an empty split");
  Stump stump;
  stump.feature = split.feature;
  stump.threshold = split.threshold;
  std::int64_t l0 = 0, l1 = 0, r0 = 0, r1 = 0;
  for (const auto& [value, label] : columns_[static_cast<std::size_t>(split.feature)]) {
    if (value <= split.threshold) (label ? ++l1 : ++l0);
    else (label ? ++r1 : ++r0);
  }
  stump.left_majority = l1 > l0 ? 1 : 0;
  stump.right_majority = r1 > r0 ? 1 : 0;
  return stump;
}

double stump_accuracy(const RootScanCache::Stump& stump, const Eigen::MatrixXd& latents,
                      const std::vector<std::uint8_t>& labels,
                      const std::vector<Eigen::Index>& rows) {
  if (rows.empty()) throw ValidationError("stump accuracy over an empty row set");
  std::int64_t correct = 0;
  for (Eigen::Index r : rows) {
    const int pred = latents(r, stump.feature) <= stump.threshold ? stump.left_majority
                                                                  : stump.right_majority;
    if (pred == labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

}  // namespace gsae
