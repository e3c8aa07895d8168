// Binary Gini decision trees over latent features. Splits minimize the
// count-weighted child impurity over midpoint thresholds of consecutive
// distinct values; ties break to the lower feature index, then the lower
// threshold. Rows with feature <= threshold go left.
#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "gsae/errors.hpp"

namespace gsae {

struct TreeNode {
  int feature = -1;  // split feature; -1 on leaves
  double threshold = 0.0;
  double gini = 0.0;  // node impurity H(Q_m)
  std::int64_t counts[2] = {0, 0};
  int majority = 0;
  std::unique_ptr<TreeNode> left, right;

  bool is_leaf() const { return left == nullptr; }
};

struct DecisionTree {
  std::unique_ptr<TreeNode> root;
};

struct TreeFitConfig {
  int max_depth = 12;
  int min_samples_split = 2;
  // Histogram threshold search keeps wide latent spaces tractable; exact
  // midpoint search is used when the feature count is at or below the gate.
  int histogram_bins = 256;
  int histogram_feature_threshold = 4096;
  int threads = 1;
};

// Sum_k p_k (1 - p_k) for a binary count pair.
double gini_impurity(std::int64_t count0, std::int64_t count1);

struct SplitCandidate {
  double quality = std::numeric_limits<double>::infinity();  // weighted child impurity
  int feature = -1;
  double threshold = 0.0;

  bool found() const { return feature >= 0; }
  // Order-independent reduction rule: lower impurity, then lower feature
  // index, then lower threshold.
  bool better_than(const SplitCandidate& other) const {
    if (quality != other.quality) return quality < other.quality;
    if (feature != other.feature) return feature < other.feature;
    return threshold < other.threshold;
  }
};

DecisionTree fit_tree(const Eigen::MatrixXd& latents, const std::vector<std::uint8_t>& labels,
                      const TreeFitConfig& config = {}, const std::vector<int>& excluded = {});

// Row-subset variant used by the measurement pipeline; `rows` indexes into
// `latents`/`labels`, and excluded_mask has one byte per feature.
DecisionTree fit_tree(const Eigen::MatrixXd& latents, const std::vector<std::uint8_t>& labels,
                      const std::vector<Eigen::Index>& rows, const TreeFitConfig& config,
                      const std::vector<std::uint8_t>& excluded_mask);

// Majority prediction of the node reached after at most depth_limit splits.
int predict_at_depth(const TreeNode& root, const Eigen::MatrixXd& latents, Eigen::Index row,
                     int depth_limit);

// Accuracy of the depth-i truncated tree for i = 1..max_depth, evaluated on
// the given rows in one traversal per row.
std::vector<double> cumulative_capacity(const DecisionTree& tree, const Eigen::MatrixXd& latents,
                                        const std::vector<std::uint8_t>& labels,
                                        const std::vector<Eigen::Index>& rows, int max_depth);

// Reusable presorted feature columns for repeated root searches over a fixed
// row set (the ablation loop refits only roots, with a growing exclusion set).
class RootScanCache {
 public:
  RootScanCache(const Eigen::MatrixXd& latents, const std::vector<std::uint8_t>& labels,
                const std::vector<Eigen::Index>& rows, int threads = 1);

  SplitCandidate best_root(const std::vector<std::uint8_t>& excluded_mask) const;

  struct Stump {
    int feature = -1;
    double threshold = 0.0;
    int left_majority = 0;
    int right_majority = 0;
  };
  Stump stump_for(const SplitCandidate& split) const;

  std::int64_t total(int cls) const { return totals_[cls]; }
  Eigen::Index n_features() const { return static_cast<Eigen::Index>(columns_.size()); }

 private:
  std::vector<std::vector<std::pair<double, std::uint8_t>>> columns_;  // sorted per feature
  std::int64_t totals_[2] = {0, 0};
  int threads_ = 1;
};

double stump_accuracy(const RootScanCache::Stump& stump, const Eigen::MatrixXd& latents,
                      const std::vector<std::uint8_t>& labels,
                      const std::vector<Eigen::Index>& rows);

}  // namespace gsae
