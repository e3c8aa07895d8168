#include "gsae/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <vector>

#include "gsae/io_util.hpp"
#include "gsae/parallel.hpp"

namespace gsae {

namespace {

constexpr char kGsamMagic[4] = {'G', 'S', 'A', 'M'};

using RowMajorF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void write_matrix_f32(std::ostream& out, const Eigen::MatrixXd& m) {
  RowMajorF row_major = m.cast<float>();
  write_f32le_array(out, row_major.data(), static_cast<std::size_t>(row_major.size()));
}

Eigen::MatrixXd read_matrix_f32(std::istream& in, Eigen::Index rows, Eigen::Index cols,
                                const char* what) {
  RowMajorF row_major(rows, cols);
  read_f32le_array(in, row_major.data(), static_cast<std::size_t>(row_major.size()), what);
  return row_major.cast<double>();
}

}  // namespace

void GsaeModel::validate() const {
  const Eigen::Index m = w_enc.rows();
  const Eigen::Index d = w_enc.cols();
  if (m < 1 || d < 1) throw ValidationError("model must have positive dimensions");
  if (b_enc.size() != m || w_dec.rows() != d || w_dec.cols() != m || b_dec.size() != d) {
    throw ValidationError("model parameter shapes are inconsistent");
  }
  if (k < 1 || k > m) {
    throw ValidationError("sparsity budget k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(m) + "]");
  }
  if (n_conditioned < 0 || n_conditioned > m) {
    throw ValidationError("n_conditioned outside [0, m]");
  }
  if (!w_enc.allFinite() || !b_enc.allFinite() || !w_dec.allFinite() || !b_dec.allFinite()) {
    throw ValidationError("model parameters contain non-finite values");
  }
}

GsaeModel init_model(int d, int m, int k, int n_conditioned, std::uint64_t seed) {
  if (d < 1 || m < 1) throw ConfigError("model dimensions must be positive");
  if (k < 1 || k > m) {
    throw ConfigError("sparsity budget k = " + std::to_string(k) + " outside [1, " +
                      std::to_string(m) + "]");
  }
  if (n_conditioned < 0 || n_conditioned > m) {
    throw ConfigError("n_conditioned must lie in [0, m]");
  }

  GsaeModel model;
  model.k = k;
  model.n_conditioned = n_conditioned;
  model.w_enc.resize(m, d);
  model.b_enc = Eigen::VectorXd::Zero(m);
  model.b_dec = Eigen::VectorXd::Zero(d);

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(std::nextafter(-scale, 0.0), scale);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) model.w_enc(i, j) = dist(rng);
  }
  model.w_dec = model.w_enc.transpose();
  return model;
}

void select_active_row(const Eigen::VectorXd& preactivations, int k, int n_conditioned,
                       std::uint8_t* active_out) {
  const auto m = static_cast<int>(preactivations.size());
  if (k >= m) {
    std::fill(active_out, active_out + m, std::uint8_t{1});
    return;
  }
  std::fill(active_out, active_out + m, std::uint8_t{0});

  thread_local std::vector<int> order;
  order.resize(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  const double* h = preactivations.data();
  std::nth_element(order.begin(), order.begin() + (k - 1), order.end(),
                   [h](int a, int b) { return h[a] > h[b] || (h[a] == h[b] && a < b); });
  for (int i = 0; i < k; ++i) active_out[order[static_cast<std::size_t>(i)]] = 1;
  for (int i = 0; i < n_conditioned; ++i) active_out[i] = 1;
}

LatentBatch encode_batch(const GsaeModel& model, const Eigen::MatrixXd& x, int threads) {
  model.validate();
  if (x.cols() != model.input_dim()) {
    throw ValidationError("encode input width " + std::to_string(x.cols()) +
                          " does not match model dimension " + std::to_string(model.input_dim()));
  }
  if (!x.allFinite()) throw ValidationError("encode input contains non-finite values");

  const Eigen::Index rows = x.rows();
  const Eigen::Index m = model.latent_dim();
  LatentBatch batch;
  batch.values.resize(rows, m);
  batch.active.resize(rows, m);
  batch.preactivations.resize(rows, m);

  // Per-row evaluation keeps results identical for every thread count.
  parallel_for(rows, threads, [&](std::int64_t begin, std::int64_t end) {
    Eigen::VectorXd h(m);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(m));
    for (std::int64_t r = begin; r < end; ++r) {
      h.noalias() = model.w_enc * x.row(r).transpose();
      h += model.b_enc;
      select_active_row(h, model.k, model.n_conditioned, mask.data());
      for (Eigen::Index j = 0; j < m; ++j) {
        batch.preactivations(r, j) = h(j);
        batch.active(r, j) = mask[static_cast<std::size_t>(j)];
        batch.values(r, j) = mask[static_cast<std::size_t>(j)] ? sigmoid(h(j)) : 0.0;
      }
    }
  });
  return batch;
}

Eigen::MatrixXd decode(const GsaeModel& model, const Eigen::MatrixXd& latent_values) {
  model.validate();
  if (latent_values.cols() != model.latent_dim()) {
    throw ValidationError("decode input width " + std::to_string(latent_values.cols()) +
                          " does not match latent dimension " +
                          std::to_string(model.latent_dim()));
  }
  Eigen::MatrixXd out = latent_values * model.w_dec.transpose();
  out.rowwise() += model.b_dec.transpose();
  return out;
}

Eigen::MatrixXd decode(const GsaeModel& model, const LatentBatch& latents) {
  return decode(model, latents.values);
}

double loss_reconstruction(const Eigen::MatrixXd& reconstructed, const Eigen::MatrixXd& original) {
  if (reconstructed.rows() != original.rows() || reconstructed.cols() != original.cols()) {
    throw ValidationError("reconstruction and original shapes differ");
  }
  if (original.rows() == 0) throw ValidationError("loss over an empty batch");
  double total = 0.0;
  for (Eigen::Index r = 0; r < original.rows(); ++r) {
    const double denom = original.row(r).squaredNorm();
    if (denom == 0.0) {
      throw DegenerateInputError("zero-norm input row " + std::to_string(r) +
                                 " in normalized reconstruction loss");
    }
    total += (reconstructed.row(r) - original.row(r)).squaredNorm() / denom;
  }
  return total / static_cast<double>(original.rows());
}

double loss_condition(const Eigen::MatrixXd& conditioned, const Eigen::MatrixXd& targets,
                      double clamp_eps) {
  if (conditioned.rows() != targets.rows() || conditioned.cols() != targets.cols()) {
    throw ValidationError("conditioned block and target shapes differ");
  }
  if (conditioned.cols() < 1) throw ValidationError("conditioning loss needs >= 1 concept");
  if (conditioned.rows() == 0) throw ValidationError("loss over an empty batch");
  if (!((targets.array() >= 0.0).all() && (targets.array() <= 1.0).all())) {
    throw ValidationError("conditioning targets must lie in [0, 1]");
  }

  const double width = static_cast<double>(conditioned.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < conditioned.rows(); ++r) {
    double row_loss = 0.0;
    for (Eigen::Index j = 0; j < conditioned.cols(); ++j) {
      const double f = std::clamp(conditioned(r, j), clamp_eps, 1.0 - clamp_eps);
      const double y = targets(r, j);
      row_loss -= y * std::log(f) + (1.0 - y) * std::log(1.0 - f);
    }
    total += row_loss / width;
  }
  return total / static_cast<double>(conditioned.rows());
}

std::size_t write_model(const GsaeModel& model, std::ostream& out) {
  model.validate();
  const auto d = static_cast<std::uint32_t>(model.input_dim());
  const auto m = static_cast<std::uint32_t>(model.latent_dim());

  write_bytes(out, kGsamMagic, 4);
  write_u32le(out, kGsamVersion);
  write_u32le(out, d);
  write_u32le(out, m);
  write_u32le(out, static_cast<std::uint32_t>(model.k));
  write_u32le(out, static_cast<std::uint32_t>(model.n_conditioned));

  write_matrix_f32(out, model.w_enc);
  write_matrix_f32(out, model.b_enc);
  write_matrix_f32(out, model.w_dec);
  write_matrix_f32(out, model.b_dec);

  return 24 + std::size_t{4} * (2 * std::size_t{m} * d + m + d);
}

ModelHeader read_model_header(std::istream& in) {
  char magic[4];
  read_exact(in, magic, 4, "magic");
  if (std::memcmp(magic, kGsamMagic, 4) != 0) {
    throw FormatError("bad magic: expected \"GSAM\", got \"" + std::string(magic, 4) + "\"");
  }
  ModelHeader h;
  h.version = read_u32le(in, "version");
  if (h.version != kGsamVersion) {
    throw UnsupportedVersionError("unsupported GSAM version " + std::to_string(h.version));
  }
  h.dim = read_u32le(in, "dimension");
  h.latent_dim = read_u32le(in, "latent dimension");
  h.k = read_u32le(in, "sparsity budget");
  h.n_conditioned = read_u32le(in, "conditioned count");
  return h;
}

GsaeModel read_model(std::istream& in) {
  const ModelHeader h = read_model_header(in);
  GsaeModel model;
  model.k = static_cast<int>(h.k);
  model.n_conditioned = static_cast<int>(h.n_conditioned);
  model.w_enc = read_matrix_f32(in, h.latent_dim, h.dim, "encoder weights");
  model.b_enc = read_matrix_f32(in, h.latent_dim, 1, "encoder bias");
  model.w_dec = read_matrix_f32(in, h.dim, h.latent_dim, "decoder weights");
  model.b_dec = read_matrix_f32(in, h.dim, 1, "decoder bias");
  try {
    model.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("payload violates model invariants: ") + e.what());
  }
  return model;
}

void save_model(const GsaeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_model(model, out);
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

GsaeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return read_model(in);
}

}  // namespace gsae
