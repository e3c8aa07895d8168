// Activation steering: decoder columns as steering vectors, rescaled to the
// input magnitude and balanced by the concept's current presence.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gsae/dataset.hpp"
#include "gsae/model.hpp"

namespace gsae {

enum class SteerDirection { increase, decrease };

struct SteeringTarget {
  int concept_index = 0;
  SteerDirection direction = SteerDirection::increase;
  double alpha = 1.0;
};

enum class GammaMode { balanced, constant_one };

struct SteeringConfig {
  std::vector<SteeringTarget> targets;
  // Single-concept steering uses gamma = 1; multi-concept balances by the
  // concept's current presence. An explicit mode overrides the default.
  std::optional<GammaMode> gamma_mode;

  GammaMode resolved_gamma_mode() const {
    return gamma_mode.value_or(targets.size() > 1 ? GammaMode::balanced
                                                  : GammaMode::constant_one);
  }
  void validate(const GsaeModel& model) const;
};

// Decoder column for the conditioned concept, unmodified.
Eigen::VectorXd steering_vector(const GsaeModel& model, int concept_index);

// x + sum_i alpha_i * beta_i * gamma_i * D_i with beta_i = |x| / |D_i| and
// gamma from the unsteered encoding of x. Zero-norm x steers to itself.
Eigen::VectorXd apply_steering(const Eigen::VectorXd& x, const GsaeModel& model,
                               const SteeringConfig& config);

// Row-wise apply_steering; labels pass through unchanged.
ActivationDataset steer_dataset(const ActivationDataset& dataset, const GsaeModel& model,
                                const SteeringConfig& config, int threads = 1);

// CLI syntax: comma list of "+i:alpha" / "-i:alpha"; the sign selects the
// direction and alpha defaults to 1.
std::vector<SteeringTarget> parse_steering_targets(const std::string& text);

}  // namespace gsae
