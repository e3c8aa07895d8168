#include <doctest.h>

#include <functional>
#include <random>
#include <set>

#include "gsae/tree.hpp"

using namespace gsae;

namespace {

// Independent exhaustive stump search used as the fit_tree oracle: every
// feature, every midpoint of consecutive distinct sorted values, weighted
// Gini from integer counts, ties to (lower impurity, feature, threshold).
struct BruteStump {
  double quality = std::numeric_limits<double>::infinity();
  int feature = -1;
  double threshold = 0.0;
};

double brute_gini(std::int64_t a, std::int64_t b) {
  const double n = static_cast<double>(a + b);
  const double p0 = static_cast<double>(a) / n;
  const double p1 = static_cast<double>(b) / n;
  return p0 * (1.0 - p0) + p1 * (1.0 - p1);
}

BruteStump brute_force_stump(const Eigen::MatrixXd& latents,
                             const std::vector<std::uint8_t>& labels) {
  BruteStump best;
  for (int f = 0; f < latents.cols(); ++f) {
    std::vector<double> values;
    for (Eigen::Index r = 0; r < latents.rows(); ++r) values.push_back(latents(r, f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      const double threshold = (values[i] + values[i + 1]) / 2.0;
      std::int64_t l0 = 0, l1 = 0, r0 = 0, r1 = 0;
      for (Eigen::Index r = 0; r < latents.rows(); ++r) {
        const bool left = latents(r, f) <= threshold;
        if (labels[static_cast<std::size_t>(r)]) (left ? ++l1 : ++r1);
        else (left ? ++l0 : ++r0);
      }
      const double nl = static_cast<double>(l0 + l1);
      const double nr = static_cast<double>(r0 + r1);
      const double quality = (nl * brute_gini(l0, l1) + nr * brute_gini(r0, r1)) / (nl + nr);
      if (quality < best.quality) {
        best.quality = quality;
        best.feature = f;
        best.threshold = threshold;
      }
    }
  }
  return best;
}

std::pair<Eigen::MatrixXd, std::vector<std::uint8_t>> random_instance(std::mt19937_64& rng,
                                                                      int max_rows, int max_cols) {
  std::uniform_int_distribution<int> rows_dist(4, max_rows);
  std::uniform_int_distribution<int> cols_dist(1, max_cols);
  // A small value alphabet provokes ties and duplicate thresholds.
  std::uniform_int_distribution<int> value_dist(0, 6);
  std::uniform_int_distribution<int> label_dist(0, 1);
  for (;;) {
    const int rows = rows_dist(rng);
    const int cols = cols_dist(rng);
    Eigen::MatrixXd latents(rows, cols);
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        latents(r, c) = static_cast<double>(value_dist(rng)) / 3.0;
      }
      labels[static_cast<std::size_t>(r)] = static_cast<std::uint8_t>(label_dist(rng));
    }
    const bool has_both = std::count(labels.begin(), labels.end(), 1) > 0 &&
                          std::count(labels.begin(), labels.end(), 0) > 0;
    if (has_both && brute_force_stump(latents, labels).feature >= 0) return {latents, labels};
  }
}

}  // namespace

TEST_CASE("gini impurity matches the closed form") {
  CHECK(gini_impurity(5, 5) == 0.5);
  CHECK(gini_impurity(7, 0) == 0.0);
  CHECK(gini_impurity(1, 3) == doctest::Approx(0.375).epsilon(1e-15));
  CHECK_THROWS_AS(gini_impurity(0, 0), ValidationError);
  CHECK_THROWS_AS(gini_impurity(-1, 2), ValidationError);
}

TEST_CASE("gini impurity is symmetric and maximal at equal counts") {
  for (std::int64_t a = 0; a <= 20; ++a) {
    for (std::int64_t b = 0; b <= 20; ++b) {
      if (a + b == 0) continue;
      CHECK(gini_impurity(a, b) == gini_impurity(b, a));
      const double hand = 2.0 * static_cast<double>(a) * static_cast<double>(b) /
                          (static_cast<double>(a + b) * static_cast<double>(a + b));
      CHECK(gini_impurity(a, b) == doctest::Approx(hand).epsilon(1e-12));
      CHECK(gini_impurity(a, b) <= 0.5);
    }
  }
}

TEST_CASE("the documented two-feature example splits on feature 0 at 0.5") {
  Eigen::MatrixXd latents(4, 2);
  latents << 0.1, 0.5, 0.9, 0.4, 0.2, 0.6, 0.8, 0.5;
  const std::vector<std::uint8_t> labels = {0, 1, 0, 1};

  const DecisionTree tree = fit_tree(latents, labels);
  REQUIRE(!tree.root->is_leaf());
  CHECK(tree.root->feature == 0);
  CHECK(tree.root->threshold == 0.5);

  std::vector<Eigen::Index> rows = {0, 1, 2, 3};
  const auto accs = cumulative_capacity(tree, latents, labels, rows, 1);
  CHECK(accs[0] == 1.0);
}

TEST_CASE("a single separating split stops at depth one") {
  Eigen::MatrixXd latents(6, 1);
  latents << 0.0, 0.1, 0.2, 0.8, 0.9, 1.0;
  const std::vector<std::uint8_t> labels = {0, 0, 0, 1, 1, 1};
  const DecisionTree tree = fit_tree(latents, labels);
  REQUIRE(!tree.root->is_leaf());
  CHECK(tree.root->left->is_leaf());
  CHECK(tree.root->right->is_leaf());
  CHECK(tree.root->left->majority == 0);
  CHECK(tree.root->right->majority == 1);
}

TEST_CASE("fit_tree root equals the exhaustive best stump") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const auto [latents, labels] = random_instance(rng, 64, 8);
    const BruteStump expected = brute_force_stump(latents, labels);
    const DecisionTree tree = fit_tree(latents, labels);
    REQUIRE(!tree.root->is_leaf());
    CHECK(tree.root->feature == expected.feature);
    CHECK(tree.root->threshold == expected.threshold);
  }
}

TEST_CASE("excluded features never appear in the tree") {
  std::mt19937_64 rng(7);
  const auto [latents, labels] = random_instance(rng, 40, 6);
  if (latents.cols() < 2) return;
  const int banned = brute_force_stump(latents, labels).feature;

  const DecisionTree tree = fit_tree(latents, labels, TreeFitConfig{}, {banned});
  std::set<int> used;
  const std::function<void(const TreeNode*)> walk = [&](const TreeNode* node) {
    if (!node || node->is_leaf()) return;
    used.insert(node->feature);
    walk(node->left.get());
    walk(node->right.get());
  };
  walk(tree.root.get());
  CHECK(used.count(banned) == 0);
}

TEST_CASE("degenerate fits raise the documented errors") {
  Eigen::MatrixXd latents(4, 2);
  latents << 0.0, 1.0, 0.1, 0.9, 0.2, 0.8, 0.3, 0.7;
  SUBCASE("single class") {
    CHECK_THROWS_AS(fit_tree(latents, {1, 1, 1, 1}), ValidationError);
  }
  SUBCASE("all features excluded") {
    CHECK_THROWS_AS(fit_tree(latents, {0, 1, 0, 1}, TreeFitConfig{}, {0, 1}), ConfigError);
  }
}

TEST_CASE("cumulative capacity of a depth-one tree repeats the stump accuracy") {
  Eigen::MatrixXd latents(6, 1);
  latents << 0.0, 0.1, 0.2, 0.8, 0.9, 1.0;
  const std::vector<std::uint8_t> labels = {0, 0, 1, 1, 1, 1};
  const DecisionTree tree = fit_tree(latents, labels);
  std::vector<Eigen::Index> rows = {0, 1, 2, 3, 4, 5};
  const auto accs = cumulative_capacity(tree, latents, labels, rows, 5);
  for (double a : accs) CHECK(a == accs[0]);
}

TEST_CASE("a perfectly separable feature keeps the curve at one") {
  Eigen::MatrixXd latents(8, 3);
  std::vector<std::uint8_t> labels(8);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int r = 0; r < 8; ++r) {
    labels[static_cast<std::size_t>(r)] = r % 2 ? 1 : 0;
    latents(r, 0) = labels[static_cast<std::size_t>(r)] ? 0.9 + 0.01 * r : 0.1 + 0.01 * r;
    latents(r, 1) = unit(rng);
    latents(r, 2) = unit(rng);
  }
  const DecisionTree tree = fit_tree(latents, labels);
  std::vector<Eigen::Index> rows = {0, 1, 2, 3, 4, 5, 6, 7};
  for (double a : cumulative_capacity(tree, latents, labels, rows, 6)) CHECK(a == 1.0);
}

TEST_CASE("hand-built depth-two tree truncates as computed by hand") {
  auto tree = DecisionTree{};
  tree.root = std::make_unique<TreeNode>();
  tree.root->feature = 0;
  tree.root->threshold = 0.5;
  tree.root->majority = 0;

  auto left = std::make_unique<TreeNode>();
  left->feature = 1;
  left->threshold = 0.5;
  left->majority = 0;
  left->left = std::make_unique<TreeNode>();
  left->left->majority = 0;
  left->right = std::make_unique<TreeNode>();
  left->right->majority = 1;

  auto right = std::make_unique<TreeNode>();
  right->majority = 1;

  tree.root->left = std::move(left);
  tree.root->right = std::move(right);

  Eigen::MatrixXd latents(8, 2);
  latents << 0.2, 0.2,   // left-left,  label 0
             0.2, 0.8,   // left-right, label 1
             0.4, 0.1,   // left-left,  label 0
             0.3, 0.9,   // left-right, label 1
             0.8, 0.5,   // right, label 1
             0.9, 0.5,   // right, label 1
             0.7, 0.5,   // right, label 0
             0.6, 0.5;   // right, label 1
  const std::vector<std::uint8_t> labels = {0, 1, 0, 1, 1, 1, 0, 1};
  std::vector<Eigen::Index> rows = {0, 1, 2, 3, 4, 5, 6, 7};

  const auto accs = cumulative_capacity(tree, latents, labels, rows, 3);
  CHECK(accs[0] == doctest::Approx(0.625));  // depth 1: left predicts 0, right 1
  CHECK(accs[1] == doctest::Approx(0.875));  // depth 2: left split resolves
  CHECK(accs[2] == doctest::Approx(0.875));  // no deeper nodes
}

TEST_CASE("the root scan cache agrees with fit_tree under exclusions") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const auto [latents, labels] = random_instance(rng, 48, 6);
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(latents.rows()));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<Eigen::Index>(i);

    const RootScanCache cache(latents, labels, rows);
    std::vector<std::uint8_t> excluded(static_cast<std::size_t>(latents.cols()), 0);
    for (int round = 0; round < latents.cols(); ++round) {
      const SplitCandidate cached = cache.best_root(excluded);
      if (!cached.found()) break;
      const DecisionTree tree = fit_tree(latents, labels, rows, TreeFitConfig{}, excluded);
      if (tree.root->is_leaf()) break;
      CHECK(tree.root->feature == cached.feature);
      CHECK(tree.root->threshold == cached.threshold);
      excluded[static_cast<std::size_t>(cached.feature)] = 1;
    }
  }
}

TEST_CASE("histogram threshold search still separates clean data") {
  Eigen::MatrixXd latents(40, 2);
  std::vector<std::uint8_t> labels(40);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int r = 0; r < 40; ++r) {
    labels[static_cast<std::size_t>(r)] = r % 2 ? 1 : 0;
    latents(r, 0) = labels[static_cast<std::size_t>(r)] ? 2.0 + unit(rng) : unit(rng);
    latents(r, 1) = unit(rng);
  }
  TreeFitConfig cfg;
  cfg.histogram_feature_threshold = 0;  // force histogram mode
  const DecisionTree tree = fit_tree(latents, labels, cfg, {});
  REQUIRE(!tree.root->is_leaf());
  CHECK(tree.root->feature == 0);
  std::vector<Eigen::Index> rows(40);
  for (int i = 0; i < 40; ++i) rows[static_cast<std::size_t>(i)] = i;
  CHECK(cumulative_capacity(tree, latents, labels, rows, 1)[0] == 1.0);
}

TEST_CASE("parallel split search matches the sequential result") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const auto [latents, labels] = random_instance(rng, 64, 8);
    TreeFitConfig sequential, parallel;
    parallel.threads = 4;
    const DecisionTree tree_seq = fit_tree(latents, labels, sequential, {});
    const DecisionTree tree_par = fit_tree(latents, labels, parallel, {});
    REQUIRE(!tree_seq.root->is_leaf());
    CHECK(tree_seq.root->feature == tree_par.root->feature);
    CHECK(tree_seq.root->threshold == tree_par.root->threshold);

    std::vector<Eigen::Index> rows(static_cast<std::size_t>(latents.rows()));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<Eigen::Index>(i);
    const auto acc_seq = cumulative_capacity(tree_seq, latents, labels, rows, 6);
    const auto acc_par = cumulative_capacity(tree_par, latents, labels, rows, 6);
    CHECK(acc_seq == acc_par);
  }
}
