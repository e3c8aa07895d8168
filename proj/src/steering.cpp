#include "gsae/steering.hpp"

#include <cmath>
#include <set>

#include "gsae/parallel.hpp"

namespace gsae {

void SteeringConfig::validate(const GsaeModel& model) const {
  std::set<int> seen;
  for (const SteeringTarget& t : targets) {
    if (t.concept_index < 0 || t.concept_index >= model.n_conditioned) {
      throw ValidationError("steering target " + std::to_string(t.concept_index) +
                            " outside the conditioned range [0, " +
                            std::to_string(model.n_conditioned) + ")");
    }
    if (!seen.insert(t.concept_index).second) {
      throw ValidationError("duplicate steering target " + std::to_string(t.concept_index));
    }
    if (!std::isfinite(t.alpha)) throw ValidationError("steering strength must be finite");
  }
}

Eigen::VectorXd steering_vector(const GsaeModel& model, int concept_index) {
  model.validate();
  if (concept_index < 0 || concept_index >= model.n_conditioned) {
    throw ValidationError("steering vector index " + std::to_string(concept_index) +
                          " outside the conditioned range [0, " +
                          std::to_string(model.n_conditioned) + ")");
  }
  return model.w_dec.col(concept_index);
}

namespace {

Eigen::VectorXd steer_row(const Eigen::VectorXd& x, const GsaeModel& model,
                          const SteeringConfig& config, GammaMode gamma_mode) {
  bool any_effective = false;
  for (const SteeringTarget& t : config.targets) any_effective |= (t.alpha != 0.0);
  if (!any_effective) return x;  // exact identity, including signed zeros

  const double x_norm = x.norm();
  const LatentBatch latents = encode(model, x);

  Eigen::VectorXd steered = x;
  for (const SteeringTarget& t : config.targets) {
    if (t.alpha == 0.0) continue;
    const Eigen::VectorXd column = model.w_dec.col(t.concept_index);
    const double column_norm = column.norm();
    if (column_norm == 0.0) {
      throw DegenerateInputError("steering vector for concept " +
                                 std::to_string(t.concept_index) + " has zero norm");
    }
    const double beta = x_norm / column_norm;
    double gamma = 1.0;
    if (gamma_mode == GammaMode::balanced) {
      const double f = latents.values(0, t.concept_index);
      gamma = t.direction == SteerDirection::decrease ? f : 1.0 - f;
    }
    steered += (t.alpha * beta * gamma) * column;
  }
  return steered;
}

}  // namespace

Eigen::VectorXd apply_steering(const Eigen::VectorXd& x, const GsaeModel& model,
                               const SteeringConfig& config) {
  model.validate();
  config.validate(model);
  if (x.size() != model.input_dim()) {
    throw ValidationError("steering input width does not match model dimension");
  }
  if (!x.allFinite()) throw ValidationError("steering input contains non-finite values");
  return steer_row(x, model, config, config.resolved_gamma_mode());
}

ActivationDataset steer_dataset(const ActivationDataset& dataset, const GsaeModel& model,
                                const SteeringConfig& config, int threads) {
  model.validate();
  dataset.validate();
  config.validate(model);
  if (dataset.dim() != model.input_dim()) {
    throw ValidationError("dataset dimension does not match model");
  }
  // Surface degenerate directions before the parallel section.
  for (const SteeringTarget& t : config.targets) {
    if (t.alpha != 0.0 && model.w_dec.col(t.concept_index).norm() == 0.0) {
      throw DegenerateInputError("steering vector for concept " +
                                 std::to_string(t.concept_index) + " has zero norm");
    }
  }

  const GammaMode gamma_mode = config.resolved_gamma_mode();
  ActivationDataset out = dataset;
  parallel_for(dataset.n_rows(), threads, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t r = begin; r < end; ++r) {
      const Eigen::VectorXd x = dataset.activations.row(r).transpose().cast<double>();
      out.activations.row(r) = steer_row(x, model, config, gamma_mode).cast<float>();
    }
  });
  return out;
}

std::vector<SteeringTarget> parse_steering_targets(const std::string& text) {
  std::vector<SteeringTarget> targets;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const std::string entry = text.substr(pos, comma - pos);
    pos = comma + 1;
    if (entry.empty()) throw ValidationError("empty steering target entry");

    SteeringTarget target;
    if (entry[0] == '+') target.direction = SteerDirection::increase;
    else if (entry[0] == '-') target.direction = SteerDirection::decrease;
    else throw ValidationError("steering target \"" + entry + "\" must start with + or -");

    const std::size_t colon = entry.find(':');
    const std::string index_text = entry.substr(1, colon == std::string::npos
                                                       ? std::string::npos
                                                       : colon - 1);
    try {
      std::size_t used = 0;
      target.concept_index = std::stoi(index_text, &used);
      if (used != index_text.size() || target.concept_index < 0) throw std::invalid_argument("");
      if (colon != std::string::npos) {
        const std::string alpha_text = entry.substr(colon + 1);
        target.alpha = std::stod(alpha_text, &used);
        if (used != alpha_text.size()) throw std::invalid_argument("");
      }
    } catch (const std::exception&) {
      throw ValidationError("cannot parse steering target \"" + entry + "\"");
    }
    targets.push_back(target);
  }
  if (targets.empty()) throw ValidationError("no steering targets given");
  return targets;
}

}  // namespace gsae
