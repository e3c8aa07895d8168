// Joint training of reconstruction and conditioning losses with analytic
// gradients and Adam. The top-k selection is treated as constant within a
// step; clamped BCE saturations and masked latents carry no gradient.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gsae/dataset.hpp"
#include "gsae/model.hpp"

namespace gsae {

struct TrainConfig {
  double learning_rate = 1e-3;  // desk scale; the reference setup uses 1e-5
  int batch_size = 256;         // reference setup: 2048
  int epochs = 30;              // reference setup: 100
  double condition_weight = 1.0;  // lambda_c in {0, 1}; 0 trains a vanilla SAE
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double bce_clamp = 1e-7;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> warm_start;  // resume from a checkpoint

  void validate() const;

  // Hyperparameters used for full-scale activation dumps.
  static TrainConfig paper_preset();
};

struct ModelArch {
  int d = 0;
  int m = 0;
  int k = 16;
  int n_conditioned = 0;
};

struct GradientRecord {
  Eigen::MatrixXd w_enc;
  Eigen::VectorXd b_enc;
  Eigen::MatrixXd w_dec;
  Eigen::VectorXd b_dec;
  double loss_recon = 0.0;
  double loss_cond = 0.0;
  double loss_total = 0.0;
};

// Analytic gradient of L_r + lambda_c * L_c for one batch. `y` is ignored
// (and may be empty) when condition_weight is zero.
GradientRecord gradients(const GsaeModel& model, const Eigen::MatrixXd& x,
                         const Eigen::MatrixXd& y, const TrainConfig& config);

struct TrainHistory {
  std::vector<double> recon;  // per-epoch mean batch L_r
  std::vector<double> cond;   // per-epoch mean batch L_c (zero when vanilla)
};

std::pair<GsaeModel, TrainHistory> train(const ActivationDataset& dataset,
                                         const TrainConfig& config, const ModelArch& arch);

}  // namespace gsae
