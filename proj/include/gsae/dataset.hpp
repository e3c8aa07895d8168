// Activation dataset model and the GSAD binary container: header, row-major
// binary32 payloads, and a JSON trailer carrying concept names. Also the
// stratified split and minority oversampling used before tree fitting.
#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gsae/errors.hpp"

namespace gsae {

constexpr std::uint32_t kGsadVersion = 1;
constexpr std::uint8_t kDtypeFloat32 = 0;

struct ActivationDataset {
  Eigen::MatrixXf activations;             // N x d, finite
  Eigen::MatrixXf labels;                  // N x (c+1), values in [0, 1]
  std::vector<std::string> concept_names;  // c+1 unique names

  Eigen::Index n_rows() const { return activations.rows(); }
  Eigen::Index dim() const { return activations.cols(); }
  Eigen::Index n_concepts() const { return labels.cols(); }

  void validate() const;
};

struct DatasetHeader {
  std::uint32_t version = 0;
  std::uint32_t n_rows = 0;
  std::uint32_t dim = 0;
  std::uint32_t n_concepts = 0;
  std::uint8_t dtype_code = 0;
};

// Serializes the dataset; extra_trailer keys (if any) are merged into the
// JSON trailer next to concept_names. Returns the total byte count.
std::size_t write_dataset(const ActivationDataset& dataset, std::ostream& out,
                          const nlohmann::json* extra_trailer = nullptr);

// Inverse of write_dataset, bit-exact. trailer_out (if given) receives the
// full trailer document including any extra keys.
ActivationDataset read_dataset(std::istream& in, nlohmann::json* trailer_out = nullptr);

// Header only; leaves the stream positioned at the activation payload.
DatasetHeader read_dataset_header(std::istream& in);

void save_dataset(const ActivationDataset& dataset, const std::filesystem::path& path,
                  const nlohmann::json* extra_trailer = nullptr);
ActivationDataset load_dataset(const std::filesystem::path& path,
                               nlohmann::json* trailer_out = nullptr);

// Labels thresholded at 0.5 for one concept column.
std::vector<std::uint8_t> binarize_labels(const Eigen::MatrixXf& labels,
                                          Eigen::Index concept_index);

// Disjoint (train, eval) row-index partition preserving the positive rate of
// each class stratum; indices are returned in ascending order.
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_stratified_indices(
    const std::vector<std::uint8_t>& binary_labels, double eval_fraction, std::uint64_t seed);

std::pair<ActivationDataset, ActivationDataset> split_stratified(const ActivationDataset& dataset,
                                                                 double eval_fraction,
                                                                 Eigen::Index concept_index,
                                                                 std::uint64_t seed);

// Appends seeded with-replacement duplicates of minority-class rows until the
// classes balance. Original rows keep their order; duplicates follow.
std::vector<Eigen::Index> oversample_indices(const std::vector<Eigen::Index>& rows,
                                             const std::vector<std::uint8_t>& binary_labels,
                                             std::uint64_t seed);

ActivationDataset oversample_minority(const ActivationDataset& dataset,
                                      Eigen::Index concept_index, std::uint64_t seed);

ActivationDataset take_rows(const ActivationDataset& dataset,
                            const std::vector<Eigen::Index>& rows);

}  // namespace gsae
