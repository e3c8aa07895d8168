#include "gsae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "gsae/io_util.hpp"

namespace gsae {

namespace {

constexpr char kGsadMagic[4] = {'G', 'S', 'A', 'D'};

using RowMajorF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void write_matrix_f32(std::ostream& out, const Eigen::MatrixXf& m) {
  RowMajorF row_major = m;
  write_f32le_array(out, row_major.data(), static_cast<std::size_t>(row_major.size()));
}

Eigen::MatrixXf read_matrix_f32(std::istream& in, Eigen::Index rows, Eigen::Index cols,
                                const char* what) {
  RowMajorF row_major(rows, cols);
  read_f32le_array(in, row_major.data(), static_cast<std::size_t>(row_major.size()), what);
  return row_major;
}

}  // namespace

void ActivationDataset::validate() const {
  if (labels.rows() != activations.rows()) {
    throw ValidationError("label rows (" + std::to_string(labels.rows()) +
                          ") do not match activation rows (" + std::to_string(activations.rows()) +
                          ")");
  }
  if (labels.cols() < 1) throw ValidationError("dataset needs at least one concept column");
  if (static_cast<Eigen::Index>(concept_names.size()) != labels.cols()) {
    throw ValidationError("concept_names size (" + std::to_string(concept_names.size()) +
                          ") does not match label columns (" + std::to_string(labels.cols()) + ")");
  }
  std::set<std::string> unique(concept_names.begin(), concept_names.end());
  if (unique.size() != concept_names.size()) {
    throw ValidationError("concept_names contains duplicates");
  }
  if (!activations.allFinite()) throw ValidationError("activations contain non-finite values");
  if (!((labels.array() >= 0.0f).all() && (labels.array() <= 1.0f).all())) {
    throw ValidationError("labels must lie in [0, 1]");
  }
}

std::size_t write_dataset(const ActivationDataset& dataset, std::ostream& out,
                          const nlohmann::json* extra_trailer) {
  dataset.validate();
  const auto n = static_cast<std::uint32_t>(dataset.n_rows());
  const auto d = static_cast<std::uint32_t>(dataset.dim());
  const auto c = static_cast<std::uint32_t>(dataset.n_concepts());

  write_bytes(out, kGsadMagic, 4);
  write_u32le(out, kGsadVersion);
  write_u32le(out, n);
  write_u32le(out, d);
  write_u32le(out, c);
  write_u8(out, kDtypeFloat32);

  write_matrix_f32(out, dataset.activations);
  write_matrix_f32(out, dataset.labels);

  nlohmann::json trailer;
  if (extra_trailer) trailer = *extra_trailer;
  trailer["concept_names"] = dataset.concept_names;
  const std::string trailer_text = trailer.dump();
  write_u32le(out, static_cast<std::uint32_t>(trailer_text.size()));
  write_bytes(out, trailer_text.data(), trailer_text.size());

  return 21 + std::size_t{4} * n * d + std::size_t{4} * n * c + 4 + trailer_text.size();
}

DatasetHeader read_dataset_header(std::istream& in) {
  char magic[4];
  read_exact(in, magic, 4, "magic");
  if (std::memcmp(magic, kGsadMagic, 4) != 0) {
    throw FormatError("bad magic: expected \"GSAD\", got \"" + std::string(magic, 4) + "\"");
  }
  DatasetHeader h;
  h.version = read_u32le(in, "version");
  if (h.version != kGsadVersion) {
    throw UnsupportedVersionError("unsupported GSAD version " + std::to_string(h.version));
  }
  h.n_rows = read_u32le(in, "row count");
  h.dim = read_u32le(in, "dimension");
  h.n_concepts = read_u32le(in, "concept count");
  h.dtype_code = read_u8(in, "dtype code");
  if (h.dtype_code != kDtypeFloat32) {
    throw FormatError("unsupported dtype code " + std::to_string(h.dtype_code));
  }
  if (h.n_concepts < 1) throw FormatError("GSAD header declares zero concepts");
  return h;
}

ActivationDataset read_dataset(std::istream& in, nlohmann::json* trailer_out) {
  const DatasetHeader h = read_dataset_header(in);

  ActivationDataset ds;
  ds.activations = read_matrix_f32(in, h.n_rows, h.dim, "activations");
  ds.labels = read_matrix_f32(in, h.n_rows, h.n_concepts, "labels");

  const std::uint32_t trailer_size = read_u32le(in, "trailer length");
  std::string trailer_text(trailer_size, '\0');
  read_exact(in, trailer_text.data(), trailer_size, "trailer");
  nlohmann::json trailer;
  try {
    trailer = nlohmann::json::parse(trailer_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("trailer is not valid JSON: ") + e.what());
  }
  if (!trailer.contains("concept_names") || !trailer["concept_names"].is_array()) {
    throw FormatError("trailer lacks a concept_names array");
  }
  ds.concept_names = trailer["concept_names"].get<std::vector<std::string>>();
  if (ds.concept_names.size() != h.n_concepts) {
    throw FormatError("trailer names " + std::to_string(ds.concept_names.size()) +
                      " concepts, header declares " + std::to_string(h.n_concepts));
  }
  try {
    ds.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("payload violates dataset invariants: ") + e.what());
  }
  if (trailer_out) *trailer_out = std::move(trailer);
  return ds;
}

void save_dataset(const ActivationDataset& dataset, const std::filesystem::path& path,
                  const nlohmann::json* extra_trailer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset(dataset, out, extra_trailer);
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

ActivationDataset load_dataset(const std::filesystem::path& path, nlohmann::json* trailer_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return read_dataset(in, trailer_out);
}

std::vector<std::uint8_t> binarize_labels(const Eigen::MatrixXf& labels,
                                          Eigen::Index concept_index) {
  if (concept_index < 0 || concept_index >= labels.cols()) {
    throw ConfigError("concept index " + std::to_string(concept_index) + " out of range for " +
                      std::to_string(labels.cols()) + " concepts");
  }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(labels.rows()));
  for (Eigen::Index r = 0; r < labels.rows(); ++r) {
    out[static_cast<std::size_t>(r)] = labels(r, concept_index) >= 0.5f ? 1 : 0;
  }
  return out;
}

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_stratified_indices(
    const std::vector<std::uint8_t>& binary_labels, double eval_fraction, std::uint64_t seed) {
  if (binary_labels.empty()) throw ConfigError("cannot split an empty dataset");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw ConfigError("eval_fraction must lie in (0, 1)");
  }

  std::vector<Eigen::Index> strata[2];
  for (std::size_t i = 0; i < binary_labels.size(); ++i) {
    strata[binary_labels[i] ? 1 : 0].push_back(static_cast<Eigen::Index>(i));
  }

  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> train, eval;
  for (auto& stratum : strata) {
    if (stratum.empty()) continue;
    const auto n_eval = static_cast<std::size_t>(
        std::llround(static_cast<double>(stratum.size()) * eval_fraction));
    if (n_eval == 0) throw ConfigError("eval_fraction leaves an eval stratum empty");
    if (n_eval >= stratum.size()) throw ConfigError("eval_fraction leaves a train stratum empty");
    std::shuffle(stratum.begin(), stratum.end(), rng);
    eval.insert(eval.end(), stratum.begin(), stratum.begin() + static_cast<std::ptrdiff_t>(n_eval));
    train.insert(train.end(), stratum.begin() + static_cast<std::ptrdiff_t>(n_eval),
                 stratum.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(eval.begin(), eval.end());
  return {std::move(train), std::move(eval)};
}

std::pair<ActivationDataset, ActivationDataset> split_stratified(const ActivationDataset& dataset,
                                                                 double eval_fraction,
                                                                 Eigen::Index concept_index,
                                                                 std::uint64_t seed) {
  dataset.validate();
  if (dataset.n_rows() == 0) throw ConfigError("cannot split an empty dataset");
  const auto y = binarize_labels(dataset.labels, concept_index);
  auto [train_idx, eval_idx] = split_stratified_indices(y, eval_fraction, seed);
  return {take_rows(dataset, train_idx), take_rows(dataset, eval_idx)};
}

std::vector<Eigen::Index> oversample_indices(const std::vector<Eigen::Index>& rows,
                                             const std::vector<std::uint8_t>& binary_labels,
                                             std::uint64_t seed) {
  std::vector<Eigen::Index> classes[2];
  for (Eigen::Index r : rows) {
    classes[binary_labels[static_cast<std::size_t>(r)] ? 1 : 0].push_back(r);
  }
  if (classes[0].empty() || classes[1].empty()) {
    throw ValidationError("oversampling requires both classes to be present");
  }

  const int minority = classes[0].size() < classes[1].size() ? 0 : 1;
  const std::size_t deficit = classes[1 - minority].size() - classes[minority].size();

  std::vector<Eigen::Index> out = rows;
  out.reserve(rows.size() + deficit);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, classes[minority].size() - 1);
  for (std::size_t i = 0; i < deficit; ++i) {
    out.push_back(classes[minority][pick(rng)]);
  }
  return out;
}

ActivationDataset oversample_minority(const ActivationDataset& dataset,
                                      Eigen::Index concept_index, std::uint64_t seed) {
  dataset.validate();
  const auto y = binarize_labels(dataset.labels, concept_index);
  std::vector<Eigen::Index> all(static_cast<std::size_t>(dataset.n_rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Eigen::Index>(i);
  return take_rows(dataset, oversample_indices(all, y, seed));
}

ActivationDataset take_rows(const ActivationDataset& dataset,
                            const std::vector<Eigen::Index>& rows) {
  ActivationDataset out;
  out.activations.resize(static_cast<Eigen::Index>(rows.size()), dataset.dim());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()), dataset.n_concepts());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.activations.row(static_cast<Eigen::Index>(i)) = dataset.activations.row(rows[i]);
    out.labels.row(static_cast<Eigen::Index>(i)) = dataset.labels.row(rows[i]);
  }
  out.concept_names = dataset.concept_names;
  return out;
}

}  // namespace gsae
