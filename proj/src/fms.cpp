#include "gsae/fms.hpp"

#include <algorithm>
#include <cmath>

#include "gsae/rng.hpp"

namespace gsae {

std::string to_string(MeanMode mode) {
  return mode == MeanMode::arithmetic ? "arithmetic" : "harmonic";
}

MeanMode mean_mode_from_string(const std::string& name) {
  if (name == "arithmetic") return MeanMode::arithmetic;
  if (name == "harmonic") return MeanMode::harmonic;
  throw ConfigError("unknown mean mode \"" + name + "\"");
}

void FmsConfig::validate() const {
  if (p_values.empty()) throw ConfigError("p_values must not be empty");
  for (int p : p_values) {
    if (p < 1) throw ConfigError("p values must be positive");
  }
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw ConfigError("epsilon must lie in (0, 0.5)");
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (max_ablation_rounds < 1) throw ConfigError("max_ablation_rounds must be >= 1");
  if (!(convergence_band >= 0.0 && convergence_band < 0.5)) {
    throw ConfigError("convergence_band must lie in [0, 0.5)");
  }
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw ConfigError("eval_fraction must lie in (0, 1)");
  }
  if (min_samples_split < 2) throw ConfigError("min_samples_split must be >= 2");
}

FmsCurves ablation_curve(const Eigen::MatrixXd& latents, const std::vector<std::uint8_t>& labels,
                         const std::vector<Eigen::Index>& train_rows,
                         const std::vector<Eigen::Index>& eval_rows, const FmsConfig& config) {
  config.validate();
  if (train_rows.empty() || eval_rows.empty()) {
    throw ValidationError("ablation needs non-empty train and eval rows");
  }

  TreeFitConfig tree_config;
  tree_config.max_depth = config.max_depth;
  tree_config.min_samples_split = config.min_samples_split;
  tree_config.histogram_feature_threshold = config.histogram_feature_threshold;
  tree_config.threads = config.threads;

  std::vector<std::uint8_t> excluded(static_cast<std::size_t>(latents.cols()), 0);
  const DecisionTree first_tree = fit_tree(latents, labels, train_rows, tree_config, excluded);
  if (first_tree.root->is_leaf()) {
    throw ValidationError("no feature admits a split; latents are degenerate");
  }

  FmsCurves curves;
  curves.accs_cum = cumulative_capacity(first_tree, latents, labels, eval_rows, config.max_depth);
  curves.n_star = capacity_depth(curves.accs_cum, config.epsilon, &curves.n_star_reached);

  // Round zero reuses the first tree's root; later rounds refit roots only,
  // over feature columns presorted once.
  curves.accs_0 = curves.accs_cum.front();
  curves.accs.push_back(curves.accs_cum.front());
  curves.removed_features.push_back(first_tree.root->feature);
  excluded[static_cast<std::size_t>(first_tree.root->feature)] = 1;

  const RootScanCache cache(latents, labels, train_rows, config.threads);
  while (static_cast<int>(curves.accs.size()) < config.max_ablation_rounds &&
         std::abs(curves.accs.back() - 0.5) > config.convergence_band) {
    const SplitCandidate split = cache.best_root(excluded);
    if (!split.found()) break;
    const RootScanCache::Stump stump = cache.stump_for(split);
    curves.accs.push_back(stump_accuracy(stump, latents, labels, eval_rows));
    curves.removed_features.push_back(split.feature);
    excluded[static_cast<std::size_t>(split.feature)] = 1;
  }
  return curves;
}

FmsCurves ablation_curve(const Eigen::MatrixXd& latents, const std::vector<std::uint8_t>& labels,
                         const FmsConfig& config) {
  auto [train_rows, eval_rows] =
      split_stratified_indices(labels, config.eval_fraction, mix_seed(config.seed, 0));
  if (config.oversample) {
    train_rows = oversample_indices(train_rows, labels, mix_seed(config.seed, 1));
    eval_rows = oversample_indices(eval_rows, labels, mix_seed(config.seed, 2));
  }
  return ablation_curve(latents, labels, train_rows, eval_rows, config);
}

double fms_local(double accs_0, double accs_p) {
  if (!(accs_0 >= 0.0 && accs_0 <= 1.0 && accs_p >= 0.0 && accs_p <= 1.0)) {
    throw ValidationError("accuracies must lie in [0, 1]");
  }
  return std::clamp(2.0 * (accs_0 - accs_p), 0.0, 1.0);
}

int capacity_depth(const std::vector<double>& accs_cum, double epsilon, bool* reached) {
  if (accs_cum.empty()) throw ValidationError("empty cumulative accuracy curve");
  for (std::size_t i = 0; i < accs_cum.size(); ++i) {
    if (accs_cum[i] >= 1.0 - epsilon) {
      if (reached) *reached = true;
      return static_cast<int>(i + 1);
    }
  }
  if (reached) *reached = false;
  return static_cast<int>(accs_cum.size());
}

double fms_global(const FmsCurves& curves, double epsilon) {
  const int n = capacity_depth(curves.accs_cum, epsilon);
  double gain = 0.0;
  for (int i = 1; i <= n; ++i) {
    gain += curves.accs_cum[static_cast<std::size_t>(i - 1)] - curves.accs_0;
  }
  return std::clamp(1.0 - gain / static_cast<double>(n), 0.0, 1.0);
}

namespace {

double combine_scores(double local, double global, MeanMode mode) {
  if (mode == MeanMode::arithmetic) return (local + global) / 2.0;
  const double sum = local + global;
  return sum == 0.0 ? 0.0 : 2.0 * local * global / sum;
}

}  // namespace

double fms_aggregate(const std::vector<ConceptScore>& per_concept, MeanMode mode) {
  if (per_concept.empty()) throw ValidationError("aggregate over zero concepts");
  double total = 0.0;
  for (const ConceptScore& s : per_concept) {
    if (!(s.accs_0 >= 0.0 && s.accs_0 <= 1.0 && s.local >= 0.0 && s.local <= 1.0 &&
          s.global >= 0.0 && s.global <= 1.0)) {
      throw ValidationError("concept scores must lie in [0, 1]");
    }
    total += s.accs_0 * combine_scores(s.local, s.global, mode);
  }
  return total / static_cast<double>(per_concept.size());
}

nlohmann::json FmsReport::to_json() const {
  nlohmann::json local_json, at_json;
  for (const auto& [p, v] : fms_local_at) local_json[std::to_string(p)] = v;
  for (const auto& [p, v] : fms_at) at_json[std::to_string(p)] = v;
  return nlohmann::json{{"concept", concept_name},
                        {"concept_index", concept_index},
                        {"accs_0", curves.accs_0},
                        {"accs", curves.accs},
                        {"accs_cum", curves.accs_cum},
                        {"removed_features", curves.removed_features},
                        {"n_star", curves.n_star},
                        {"n_star_reached", curves.n_star_reached},
                        {"fms_local", local_json},
                        {"fms_global", fms_global_score},
                        {"fms_at", at_json},
                        {"mean_mode", to_string(mean_mode)}};
}

std::vector<FmsReport> run_fms(const ActivationDataset& dataset, const GsaeModel& model,
                               const FmsConfig& config) {
  config.validate();
  dataset.validate();
  if (dataset.dim() != model.input_dim()) {
    throw ValidationError("dataset dimension does not match model");
  }

  const Eigen::MatrixXd latents =
      encode(model, dataset.activations.cast<double>(), config.threads).values;

  std::vector<FmsReport> reports;
  reports.reserve(static_cast<std::size_t>(dataset.n_concepts()));
  for (Eigen::Index ci = 0; ci < dataset.n_concepts(); ++ci) {
    const std::vector<std::uint8_t> y = binarize_labels(dataset.labels, ci);

    const auto salt = static_cast<std::uint64_t>(ci);
    auto [train_rows, eval_rows] =
        split_stratified_indices(y, config.eval_fraction, mix_seed(config.seed, salt * 4));
    if (config.oversample) {
      train_rows = oversample_indices(train_rows, y, mix_seed(config.seed, salt * 4 + 1));
      eval_rows = oversample_indices(eval_rows, y, mix_seed(config.seed, salt * 4 + 2));
    }

    FmsReport report;
    report.concept_name = dataset.concept_names[static_cast<std::size_t>(ci)];
    report.concept_index = static_cast<int>(ci);
    report.mean_mode = config.mean_mode;
    report.curves = ablation_curve(latents, y, train_rows, eval_rows, config);
    report.fms_global_score = fms_global(report.curves, config.epsilon);
    for (int p : config.p_values) {
      // Past the recorded rounds, the loop already converged to chance; the
      // last accuracy stands in for deeper removals.
      const auto idx = std::min<std::size_t>(static_cast<std::size_t>(p),
                                             report.curves.accs.size() - 1);
      const double local = fms_local(report.curves.accs_0, report.curves.accs[idx]);
      report.fms_local_at[p] = local;
      report.fms_at[p] = report.curves.accs_0 *
                         combine_scores(local, report.fms_global_score, config.mean_mode);
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

double aggregate_reports(const std::vector<FmsReport>& reports, int p, MeanMode mode) {
  std::vector<ConceptScore> scores;
  scores.reserve(reports.size());
  for (const FmsReport& r : reports) {
    const auto it = r.fms_local_at.find(p);
    if (it == r.fms_local_at.end()) {
      throw ConfigError("reports carry no local score for p = " + std::to_string(p));
    }
    scores.push_back({r.curves.accs_0, it->second, r.fms_global_score});
  }
  return fms_aggregate(scores, mode);
}

}  // namespace gsae
