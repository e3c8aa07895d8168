// Encoder-only concept detection on the conditioned latent block, plus the
// Mann-Whitney U / rank-biserial separation statistics.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gsae/dataset.hpp"
#include "gsae/model.hpp"

namespace gsae {

struct MannWhitneyResult {
  double u = 0.0;        // wins of `present` over `absent`, ties counted half
  double p_value = 1.0;  // two-sided normal approximation with tie and continuity correction
  double rbc = 0.0;      // 2U/(n1 n2) - 1
};

MannWhitneyResult mann_whitney_rbc(std::span<const double> present,
                                   std::span<const double> absent);

struct ConceptDetection {
  std::string concept_name;
  std::int64_t n_present = 0;
  std::int64_t n_absent = 0;
  double u = 0.0;
  double p_value = 1.0;
  double rbc = 0.0;
  double accuracy = 0.0;
};

struct DetectionReport {
  double threshold = 0.5;
  Eigen::MatrixXd conditioned;  // N x (c+1) conditioned activations
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> decisions;  // f >= threshold
  std::vector<ConceptDetection> concepts;

  nlohmann::json to_json() const;
};

// Runs the encoder only and thresholds the conditioned block; activations are
// never reconstructed. Separation statistics are NaN for single-class concepts.
DetectionReport detect_concepts(const GsaeModel& model, const ActivationDataset& dataset,
                                double threshold = 0.5, int threads = 1);

}  // namespace gsae
