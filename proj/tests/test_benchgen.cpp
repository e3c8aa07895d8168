#include <doctest.h>

#include "gsae/benchgen.hpp"
#include "test_support.hpp"

using namespace gsae;

namespace {

SyntheticConfig small_config() {
  SyntheticConfig cfg;
  cfg.dim = 16;
  cfg.n_concepts = 2;
  cfg.n_nuisance = 4;
  cfg.n_samples = 200;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("planted directions form an orthonormal system") {
  auto [ds, truth] = generate_planted(small_config());
  Eigen::MatrixXd all(truth.concept_directions.rows(),
                      truth.concept_directions.cols() + truth.nuisance_directions.cols());
  all << truth.concept_directions, truth.nuisance_directions;
  const Eigen::MatrixXd gram = all.transpose() * all;
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(all.cols(), all.cols());
  CHECK((gram - identity).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("noise-free single-concept rows equal the scaled direction exactly") {
  SyntheticConfig cfg;
  cfg.dim = 8;
  cfg.n_concepts = 1;
  cfg.n_nuisance = 0;
  cfg.n_samples = 60;
  cfg.noise_std = 0.0;
  cfg.signal_scale = 1.5;
  cfg.seed = 9;
  auto [ds, truth] = generate_planted(cfg);

  const Eigen::RowVectorXf direction =
      (cfg.signal_scale * truth.concept_directions.col(0)).transpose().cast<float>();
  const Eigen::RowVectorXf zero = Eigen::RowVectorXf::Zero(cfg.dim);
  int positives = 0;
  for (Eigen::Index r = 0; r < ds.n_rows(); ++r) {
    if (ds.labels(r, 0) >= 0.5f) {
      CHECK(ds.activations.row(r) == direction);
      ++positives;
    } else {
      CHECK(ds.activations.row(r) == zero);
    }
  }
  CHECK(positives > 0);
}

TEST_CASE("positive rates concentrate around concept_prob") {
  SyntheticConfig cfg;
  cfg.dim = 8;
  cfg.n_concepts = 2;
  cfg.n_nuisance = 2;
  cfg.n_samples = 10000;
  cfg.concept_prob = 0.5;
  cfg.seed = 17;
  auto [ds, truth] = generate_planted(cfg);
  for (Eigen::Index j = 0; j < ds.n_concepts(); ++j) {
    const double rate = static_cast<double>((ds.labels.col(j).array() >= 0.5f).count()) /
                        static_cast<double>(ds.n_rows());
    CHECK(std::abs(rate - 0.5) < 0.03);
  }
}

TEST_CASE("generation is bit-deterministic in the seed") {
  auto [ds_a, truth_a] = generate_planted(small_config());
  auto [ds_b, truth_b] = generate_planted(small_config());
  CHECK(ds_a.activations == ds_b.activations);
  CHECK(ds_a.labels == ds_b.labels);
  CHECK(truth_a.concept_directions == truth_b.concept_directions);
}

TEST_CASE("config violations are configuration errors") {
  SyntheticConfig cfg = small_config();
  SUBCASE("too many directions") {
    cfg.n_concepts = 10;
    cfg.n_nuisance = 10;
    CHECK_THROWS_AS(generate_planted(cfg), ConfigError);
  }
  SUBCASE("empty sample") {
    cfg.n_samples = 0;
    CHECK_THROWS_AS(generate_planted(cfg), ConfigError);
  }
  SUBCASE("degenerate probability") {
    cfg.concept_prob = 1.0;
    CHECK_THROWS_AS(generate_planted(cfg), ConfigError);
  }
}

TEST_CASE("oracle conditioned latents sit within 1% of presence and absence") {
  SyntheticConfig cfg = small_config();
  cfg.noise_std = 0.0;
  cfg.n_samples = 120;
  auto [ds, truth] = generate_planted(cfg);
  const GsaeModel oracle = oracle_model(truth, cfg.n_concepts + cfg.n_nuisance);

  const LatentBatch latents = encode(oracle, ds.activations.cast<double>(), 1);
  for (Eigen::Index r = 0; r < ds.n_rows(); ++r) {
    for (int j = 0; j < cfg.n_concepts; ++j) {
      if (ds.labels(r, j) >= 0.5f) CHECK(latents.values(r, j) >= 0.99);
      else CHECK(latents.values(r, j) <= 0.01);
    }
  }
}

TEST_CASE("oracle reconstruction recovers the concept component on noise-free data") {
  SyntheticConfig cfg = small_config();
  cfg.noise_std = 0.0;
  cfg.n_samples = 150;
  auto [ds, truth] = generate_planted(cfg);
  const GsaeModel oracle = oracle_model(truth, cfg.n_concepts + cfg.n_nuisance);

  const Eigen::MatrixXd x = ds.activations.cast<double>();
  const Eigen::MatrixXd reconstructed = decode(oracle, encode(oracle, x));
  int checked = 0;
  for (Eigen::Index r = 0; r < ds.n_rows(); ++r) {
    const Eigen::VectorXd component =
        truth.concept_directions *
        (cfg.signal_scale * ds.labels.row(r).transpose().cast<double>());
    if (component.norm() == 0.0) continue;
    const double rel = (reconstructed.row(r).transpose() - component).norm() / component.norm();
    CHECK(rel <= 0.02);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("oracle latent dimension must cover the planted directions") {
  auto [ds, truth] = generate_planted(small_config());
  CHECK_THROWS_AS(oracle_model(truth, 3), ConfigError);
}

TEST_CASE("ground-truth sidecar round trips through the container") {
  test_support::TempDir dir;
  auto [ds, truth] = generate_planted(small_config());
  save_ground_truth(truth, dir.file("t.gsad"));
  const PlantedGroundTruth back = load_ground_truth(dir.file("t.gsad"));

  CHECK(back.config.n_concepts == truth.config.n_concepts);
  CHECK(back.config.n_nuisance == truth.config.n_nuisance);
  CHECK(back.config.signal_scale == truth.config.signal_scale);
  CHECK(back.config.seed == truth.config.seed);
  // Directions survive the binary32 container within float precision.
  CHECK((back.concept_directions - truth.concept_directions).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((back.nuisance_directions - truth.nuisance_directions).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("a plain dataset is not a ground-truth sidecar") {
  test_support::TempDir dir;
  auto [ds, truth] = generate_planted(small_config());
  save_dataset(ds, dir.file("d.gsad"));
  CHECK_THROWS_AS(load_ground_truth(dir.file("d.gsad")), FormatError);
}
