// Feature monosemanticity measurement: root-ablation loop over Gini trees,
// cumulative depth-truncation capacity curves, and the local/global scores
// with arithmetic or harmonic aggregation. Tree accuracies are held-out eval
// accuracies; train and eval splits are class-balanced by oversampling so
// chance sits at 0.5.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gsae/dataset.hpp"
#include "gsae/model.hpp"
#include "gsae/tree.hpp"

namespace gsae {

enum class MeanMode { arithmetic, harmonic };

std::string to_string(MeanMode mode);
MeanMode mean_mode_from_string(const std::string& name);

struct FmsConfig {
  std::vector<int> p_values = {1, 5};
  double epsilon = 0.02;            // capacity target accs_cum_n >= 1 - epsilon
  int max_depth = 12;
  int max_ablation_rounds = 50;
  double convergence_band = 0.02;   // stop once the last accuracy is this close to 0.5
  MeanMode mean_mode = MeanMode::arithmetic;
  int min_samples_split = 2;
  double eval_fraction = 0.2;
  bool oversample = true;
  int histogram_feature_threshold = 4096;
  int threads = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FmsCurves {
  double accs_0 = 0.0;
  std::vector<double> accs;          // accs[p]: root-stump eval accuracy, p roots removed
  std::vector<double> accs_cum;      // accs_cum[i-1]: first tree truncated at depth i
  std::vector<int> removed_features;
  int n_star = 0;                    // first depth reaching 1 - epsilon, else max depth
  bool n_star_reached = false;
};

// Root-ablation loop of the measurement procedure: repeatedly refit, record
// the root-stump eval accuracy, and exclude the root, until convergence to
// chance, the round cap, or no splittable feature remains.
FmsCurves ablation_curve(const Eigen::MatrixXd& latents, const std::vector<std::uint8_t>& labels,
                         const std::vector<Eigen::Index>& train_rows,
                         const std::vector<Eigen::Index>& eval_rows, const FmsConfig& config);

// Convenience form that splits (and, per config, oversamples) internally.
FmsCurves ablation_curve(const Eigen::MatrixXd& latents, const std::vector<std::uint8_t>& labels,
                         const FmsConfig& config);

// clamp(2 * (accs_0 - accs_p), 0, 1).
double fms_local(double accs_0, double accs_p);

// First depth whose cumulative accuracy reaches 1 - epsilon; falls back to
// the deepest entry with *reached = false.
int capacity_depth(const std::vector<double>& accs_cum, double epsilon, bool* reached = nullptr);

// clamp(1 - A(n)/n, 0, 1) with A(n) the cumulative gain over accs_0.
double fms_global(const FmsCurves& curves, double epsilon);

struct ConceptScore {
  double accs_0 = 0.0;
  double local = 0.0;
  double global = 0.0;
};

// Mean over concepts of accs_0 * combine(local, global), where combine is the
// arithmetic or harmonic mean of the two disentanglement scores.
double fms_aggregate(const std::vector<ConceptScore>& per_concept, MeanMode mode);

struct FmsReport {
  std::string concept_name;
  int concept_index = 0;
  FmsCurves curves;
  std::map<int, double> fms_local_at;  // keyed by p
  double fms_global_score = 0.0;
  std::map<int, double> fms_at;        // keyed by p
  MeanMode mean_mode = MeanMode::arithmetic;

  nlohmann::json to_json() const;
};

// Full pipeline: encode the dataset once, then per concept binarize labels,
// split, oversample, and measure.
std::vector<FmsReport> run_fms(const ActivationDataset& dataset, const GsaeModel& model,
                               const FmsConfig& config);

// FMS@p across the reports of one run.
double aggregate_reports(const std::vector<FmsReport>& reports, int p, MeanMode mode);

}  // namespace gsae
