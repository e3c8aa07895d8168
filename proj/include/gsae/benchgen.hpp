// Synthetic benchmark: activations built from seeded orthonormal concept and
// nuisance directions, plus the analytic oracle autoencoder whose conditioned
// latents read the planted concepts directly.
#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>

#include <Eigen/Dense>

#include "gsae/dataset.hpp"
#include "gsae/model.hpp"

namespace gsae {

struct SyntheticConfig {
  int dim = 64;
  int n_concepts = 4;
  int n_nuisance = 16;
  int n_samples = 20000;
  double concept_prob = 0.3;
  double signal_scale = 1.0;
  double noise_std = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PlantedGroundTruth {
  Eigen::MatrixXd concept_directions;   // d x n_concepts, orthonormal columns
  Eigen::MatrixXd nuisance_directions;  // d x n_nuisance, orthogonal to the concepts
  SyntheticConfig config;
};

// Rows are concept_directions * (signal_scale * z) + nuisance_directions * g
// + noise, with z ~ Bernoulli(concept_prob)^n_concepts, g standard normal,
// and isotropic noise of the configured std. Labels column j equals z_j.
std::pair<ActivationDataset, PlantedGroundTruth> generate_planted(const SyntheticConfig& config);

// Oracle autoencoder: conditioned latent i reads gain * <concept_i, x> with a
// bias centering the sigmoid between presence and absence; decoder column i
// restores signal_scale * concept_i. Realizes the ideal-disentanglement upper
// bound on the planted benchmark.
GsaeModel oracle_model(const PlantedGroundTruth& truth, int latent_dim, double gain = 10.0);

// Ground-truth sidecar in the GSAD container: one row per direction, a single
// is_concept label column, and the generator config in the trailer.
void save_ground_truth(const PlantedGroundTruth& truth, const std::filesystem::path& path);
PlantedGroundTruth load_ground_truth(const std::filesystem::path& path);

}  // namespace gsae
