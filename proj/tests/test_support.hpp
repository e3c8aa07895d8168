// Shared test helpers: scratch directories and randomized dataset builders.
#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "gsae/dataset.hpp"

namespace test_support {

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    const auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    path = base / ("gsae_test_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path file(const std::string& name) const { return path / name; }
};

inline gsae::ActivationDataset make_random_dataset(std::uint64_t seed, Eigen::Index max_rows = 24,
                                                   Eigen::Index max_dim = 8,
                                                   Eigen::Index max_concepts = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> rows_dist(0, max_rows);
  std::uniform_int_distribution<Eigen::Index> dim_dist(1, max_dim);
  std::uniform_int_distribution<Eigen::Index> concept_dist(1, max_concepts);
  std::uniform_real_distribution<float> value(-5.0f, 5.0f);
  std::uniform_real_distribution<float> label(0.0f, 1.0f);

  gsae::ActivationDataset ds;
  const Eigen::Index n = rows_dist(rng);
  const Eigen::Index d = dim_dist(rng);
  const Eigen::Index c = concept_dist(rng);
  ds.activations.resize(n, d);
  ds.labels.resize(n, c);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index j = 0; j < d; ++j) ds.activations(r, j) = value(rng);
    for (Eigen::Index j = 0; j < c; ++j) ds.labels(r, j) = label(rng);
  }
  for (Eigen::Index j = 0; j < c; ++j) ds.concept_names.push_back("c" + std::to_string(j));
  return ds;
}

inline bool datasets_bit_equal(const gsae::ActivationDataset& a,
                               const gsae::ActivationDataset& b) {
  return a.activations.rows() == b.activations.rows() &&
         a.activations.cols() == b.activations.cols() && a.labels.cols() == b.labels.cols() &&
         a.activations == b.activations && a.labels == b.labels &&
         a.concept_names == b.concept_names;
}

}  // namespace test_support
