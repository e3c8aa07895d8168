// Guided sparse autoencoder model: affine encoder, top-k selection unioned
// with the conditioned block, sigmoid activation, affine decoder. Weights are
// kept in double precision; the GSAM checkpoint stores binary32.
#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>

#include <Eigen/Dense>

#include "gsae/errors.hpp"

namespace gsae {

constexpr std::uint32_t kGsamVersion = 1;

struct GsaeModel {
  Eigen::MatrixXd w_enc;  // m x d
  Eigen::VectorXd b_enc;  // m
  Eigen::MatrixXd w_dec;  // d x m
  Eigen::VectorXd b_dec;  // d
  int k = 1;              // sparsity budget, 1 <= k <= m
  int n_conditioned = 0;  // c+1 supervised latents; 0 means vanilla

  Eigen::Index latent_dim() const { return w_enc.rows(); }
  Eigen::Index input_dim() const { return w_enc.cols(); }

  void validate() const;
};

struct LatentBatch {
  Eigen::MatrixXd values;  // B x m; sigmoid(h) on active latents, 0 elsewhere
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> active;  // B x m
  Eigen::MatrixXd preactivations;  // B x m, h = W_enc x + b_enc
};

struct ModelHeader {
  std::uint32_t version = 0;
  std::uint32_t dim = 0;
  std::uint32_t latent_dim = 0;
  std::uint32_t k = 0;
  std::uint32_t n_conditioned = 0;
};

inline double sigmoid(double h) {
  if (h >= 0.0) return 1.0 / (1.0 + std::exp(-h));
  const double e = std::exp(h);
  return e / (1.0 + e);
}

// Tied-transpose initialization: W_enc uniform in (-1/sqrt(d), 1/sqrt(d)),
// W_dec its transpose, zero biases.
GsaeModel init_model(int d, int m, int k, int n_conditioned, std::uint64_t seed);

// Marks the k largest preactivations (ties to the lower index) plus the
// conditioned block as active. Shared by encode and the training forward.
void select_active_row(const Eigen::VectorXd& preactivations, int k, int n_conditioned,
                       std::uint8_t* active_out);

LatentBatch encode_batch(const GsaeModel& model, const Eigen::MatrixXd& x, int threads = 1);

// Column vectors encode as a single row; anything else is a B x d batch.
template <typename Derived>
LatentBatch encode(const GsaeModel& model, const Eigen::MatrixBase<Derived>& x, int threads = 1) {
  if constexpr (Derived::ColsAtCompileTime == 1) {
    return encode_batch(model, Eigen::MatrixXd(x.derived().transpose()), threads);
  } else if constexpr (std::is_same_v<Derived, Eigen::MatrixXd>) {
    return encode_batch(model, x.derived(), threads);
  } else {
    return encode_batch(model, Eigen::MatrixXd(x.derived()), threads);
  }
}

Eigen::MatrixXd decode(const GsaeModel& model, const Eigen::MatrixXd& latent_values);
Eigen::MatrixXd decode(const GsaeModel& model, const LatentBatch& latents);

// Mean over rows of ||reconstructed - original||^2 / ||original||^2.
double loss_reconstruction(const Eigen::MatrixXd& reconstructed, const Eigen::MatrixXd& original);

// Mean over rows of the width-normalized binary cross-entropy between the
// conditioned block and targets, with activations clamped into
// [clamp_eps, 1 - clamp_eps].
double loss_condition(const Eigen::MatrixXd& conditioned, const Eigen::MatrixXd& targets,
                      double clamp_eps = 1e-7);

std::size_t write_model(const GsaeModel& model, std::ostream& out);
GsaeModel read_model(std::istream& in);
ModelHeader read_model_header(std::istream& in);
void save_model(const GsaeModel& model, const std::filesystem::path& path);
GsaeModel load_model(const std::filesystem::path& path);

}  // namespace gsae
