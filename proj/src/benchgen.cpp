#include "gsae/benchgen.hpp"

#include <random>
#include <string>

namespace gsae {

void SyntheticConfig::validate() const {
  if (dim < 1) throw ConfigError("dim must be positive");
  if (n_concepts < 1) throw ConfigError("n_concepts must be >= 1");
  if (n_nuisance < 0) throw ConfigError("n_nuisance must be >= 0");
  if (n_concepts + n_nuisance > dim) {
    throw ConfigError("n_concepts + n_nuisance = " + std::to_string(n_concepts + n_nuisance) +
                      " exceeds dim = " + std::to_string(dim));
  }
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  if (!(concept_prob > 0.0 && concept_prob < 1.0)) {
    throw ConfigError("concept_prob must lie in (0, 1)");
  }
  if (!(signal_scale > 0.0)) throw ConfigError("signal_scale must be positive");
  if (noise_std < 0.0) throw ConfigError("noise_std must be non-negative");
}

std::pair<ActivationDataset, PlantedGroundTruth> generate_planted(const SyntheticConfig& config) {
  config.validate();
  const int d = config.dim;
  const int nc = config.n_concepts;
  const int nn = config.n_nuisance;

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> unit_normal(0.0, 1.0);

  // Orthonormalize a seeded Gaussian matrix; the planted directions are the
  // thin-Q columns, so a perfectly monosemantic solution exists.
  Eigen::MatrixXd gaussian(d, nc + nn);
  for (Eigen::Index c = 0; c < gaussian.cols(); ++c) {
    for (Eigen::Index r = 0; r < gaussian.rows(); ++r) gaussian(r, c) = unit_normal(rng);
  }
  Eigen::MatrixXd q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian).householderQ() *
      Eigen::MatrixXd::Identity(d, nc + nn);

  PlantedGroundTruth truth;
  truth.concept_directions = q.leftCols(nc);
  truth.nuisance_directions = q.rightCols(nn);
  truth.config = config;

  ActivationDataset ds;
  ds.activations.resize(config.n_samples, d);
  ds.labels.resize(config.n_samples, nc);
  ds.concept_names.reserve(static_cast<std::size_t>(nc));
  for (int j = 0; j < nc; ++j) ds.concept_names.push_back("concept_" + std::to_string(j));

  std::bernoulli_distribution presence(config.concept_prob);
  Eigen::VectorXd z(nc), g(nn), x(d);
  for (int row = 0; row < config.n_samples; ++row) {
    for (int j = 0; j < nc; ++j) z(j) = presence(rng) ? 1.0 : 0.0;
    for (int j = 0; j < nn; ++j) g(j) = unit_normal(rng);
    x.noalias() = truth.concept_directions * (config.signal_scale * z);
    if (nn > 0) x.noalias() += truth.nuisance_directions * g;
    if (config.noise_std > 0.0) {
      for (int j = 0; j < d; ++j) x(j) += config.noise_std * unit_normal(rng);
    }
    ds.activations.row(row) = x.cast<float>();
    ds.labels.row(row) = z.cast<float>();
  }
  return {std::move(ds), std::move(truth)};
}

GsaeModel oracle_model(const PlantedGroundTruth& truth, int latent_dim, double gain) {
  const auto nc = static_cast<int>(truth.concept_directions.cols());
  const auto nn = static_cast<int>(truth.nuisance_directions.cols());
  const auto d = static_cast<int>(truth.concept_directions.rows());
  if (latent_dim < nc + nn) {
    throw ConfigError("oracle latent dimension " + std::to_string(latent_dim) +
                      " is smaller than the " + std::to_string(nc + nn) + " planted directions");
  }
  if (!(gain > 0.0)) throw ConfigError("oracle gain must be positive");

  const double s = truth.config.signal_scale;
  GsaeModel model;
  model.w_enc = Eigen::MatrixXd::Zero(latent_dim, d);
  model.b_enc = Eigen::VectorXd::Zero(latent_dim);
  model.w_dec = Eigen::MatrixXd::Zero(d, latent_dim);
  model.b_dec = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < nc; ++i) {
    model.w_enc.row(i) = gain * truth.concept_directions.col(i).transpose();
    model.b_enc(i) = -gain * s / 2.0;  // sigmoid centered between absent and present
    model.w_dec.col(i) = s * truth.concept_directions.col(i);
  }
  for (int j = 0; j < nn; ++j) {
    model.w_enc.row(nc + j) = gain * truth.nuisance_directions.col(j).transpose();
  }
  model.k = nc + nn;
  model.n_conditioned = nc;
  model.validate();
  return model;
}

void save_ground_truth(const PlantedGroundTruth& truth, const std::filesystem::path& path) {
  const auto nc = truth.concept_directions.cols();
  const auto nn = truth.nuisance_directions.cols();

  ActivationDataset ds;
  ds.activations.resize(nc + nn, truth.concept_directions.rows());
  ds.labels.resize(nc + nn, 1);
  for (Eigen::Index i = 0; i < nc; ++i) {
    ds.activations.row(i) = truth.concept_directions.col(i).transpose().cast<float>();
    ds.labels(i, 0) = 1.0f;
  }
  for (Eigen::Index j = 0; j < nn; ++j) {
    ds.activations.row(nc + j) = truth.nuisance_directions.col(j).transpose().cast<float>();
    ds.labels(nc + j, 0) = 0.0f;
  }
  ds.concept_names = {"is_concept"};

  nlohmann::json extra;
  extra["planted"] = {{"dim", truth.config.dim},
                      {"n_concepts", truth.config.n_concepts},
                      {"n_nuisance", truth.config.n_nuisance},
                      {"n_samples", truth.config.n_samples},
                      {"concept_prob", truth.config.concept_prob},
                      {"signal_scale", truth.config.signal_scale},
                      {"noise_std", truth.config.noise_std},
                      {"seed", truth.config.seed}};
  save_dataset(ds, path, &extra);
}

PlantedGroundTruth load_ground_truth(const std::filesystem::path& path) {
  nlohmann::json trailer;
  const ActivationDataset ds = load_dataset(path, &trailer);
  if (!trailer.contains("planted")) {
    throw FormatError(path.string() + " is not a ground-truth sidecar (no planted config)");
  }
  const auto& p = trailer["planted"];

  PlantedGroundTruth truth;
  truth.config.dim = p.at("dim").get<int>();
  truth.config.n_concepts = p.at("n_concepts").get<int>();
  truth.config.n_nuisance = p.at("n_nuisance").get<int>();
  truth.config.n_samples = p.at("n_samples").get<int>();
  truth.config.concept_prob = p.at("concept_prob").get<double>();
  truth.config.signal_scale = p.at("signal_scale").get<double>();
  truth.config.noise_std = p.at("noise_std").get<double>();
  truth.config.seed = p.at("seed").get<std::uint64_t>();

  const int nc = truth.config.n_concepts;
  const int nn = truth.config.n_nuisance;
  if (ds.n_rows() != nc + nn || ds.dim() != truth.config.dim) {
    throw FormatError("sidecar direction matrix does not match its planted config");
  }
  truth.concept_directions.resize(ds.dim(), nc);
  truth.nuisance_directions.resize(ds.dim(), nn);
  for (int i = 0; i < nc; ++i) {
    truth.concept_directions.col(i) = ds.activations.row(i).transpose().cast<double>();
  }
  for (int j = 0; j < nn; ++j) {
    truth.nuisance_directions.col(j) = ds.activations.row(nc + j).transpose().cast<double>();
  }
  return truth;
}

}  // namespace gsae
