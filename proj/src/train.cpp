#include "gsae/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gsae/rng.hpp"

namespace gsae {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (condition_weight != 0.0 && condition_weight != 1.0) {
    throw ConfigError("condition_weight must be 0 or 1");
  }
  if (!(bce_clamp > 0.0 && bce_clamp < 0.5)) throw ConfigError("bce_clamp must lie in (0, 0.5)");
}

TrainConfig TrainConfig::paper_preset() {
  TrainConfig cfg;
  cfg.learning_rate = 1e-5;
  cfg.batch_size = 2048;
  cfg.epochs = 100;
  return cfg;
}

GradientRecord gradients(const GsaeModel& model, const Eigen::MatrixXd& x,
                         const Eigen::MatrixXd& y, const TrainConfig& config) {
  model.validate();
  config.validate();
  const Eigen::Index batch = x.rows();
  const Eigen::Index m = model.latent_dim();
  const bool conditioned = config.condition_weight > 0.0 && model.n_conditioned > 0;
  if (x.cols() != model.input_dim()) throw ValidationError("batch width does not match model");
  if (batch == 0) throw ValidationError("gradient over an empty batch");
  if (conditioned && (y.rows() != batch || y.cols() != model.n_conditioned)) {
    throw ValidationError("label block shape does not match the conditioned latents");
  }

  // Forward, keeping the per-row active mask fixed for the backward pass.
  Eigen::MatrixXd h = x * model.w_enc.transpose();
  h.rowwise() += model.b_enc.transpose();
  Eigen::MatrixXd f(batch, m);
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> mask(batch, m);
  {
    Eigen::VectorXd h_row(m);
    std::vector<std::uint8_t> mask_row(static_cast<std::size_t>(m));
    for (Eigen::Index r = 0; r < batch; ++r) {
      h_row = h.row(r).transpose();
      select_active_row(h_row, model.k, model.n_conditioned, mask_row.data());
      for (Eigen::Index j = 0; j < m; ++j) {
        mask(r, j) = mask_row[static_cast<std::size_t>(j)];
        f(r, j) = mask(r, j) ? sigmoid(h(r, j)) : 0.0;
      }
    }
  }
  Eigen::MatrixXd x_hat = f * model.w_dec.transpose();
  x_hat.rowwise() += model.b_dec.transpose();

  GradientRecord rec;
  const double inv_batch = 1.0 / static_cast<double>(batch);

  Eigen::VectorXd inv_sq_norm(batch);
  double loss_recon = 0.0;
  for (Eigen::Index r = 0; r < batch; ++r) {
    const double denom = x.row(r).squaredNorm();
    if (denom == 0.0) {
      throw DegenerateInputError("zero-norm input row " + std::to_string(r) + " in batch");
    }
    inv_sq_norm(r) = 1.0 / denom;
    loss_recon += (x_hat.row(r) - x.row(r)).squaredNorm() * inv_sq_norm(r);
  }
  rec.loss_recon = loss_recon * inv_batch;

  Eigen::MatrixXd d_xhat =
      (2.0 * inv_batch) * (inv_sq_norm.asDiagonal() * (x_hat - x)).eval();
  rec.w_dec.noalias() = d_xhat.transpose() * f;
  rec.b_dec = d_xhat.colwise().sum().transpose();
  Eigen::MatrixXd d_f = d_xhat * model.w_dec;

  if (conditioned) {
    const auto c1 = static_cast<Eigen::Index>(model.n_conditioned);
    const double eps = config.bce_clamp;
    const double coef = config.condition_weight * inv_batch / static_cast<double>(c1);
    double loss_cond = 0.0;
    for (Eigen::Index r = 0; r < batch; ++r) {
      for (Eigen::Index j = 0; j < c1; ++j) {
        const double raw = f(r, j);
        const double fc = std::clamp(raw, eps, 1.0 - eps);
        const double yv = y(r, j);
        loss_cond -= yv * std::log(fc) + (1.0 - yv) * std::log(1.0 - fc);
        if (raw > eps && raw < 1.0 - eps) {
          d_f(r, j) += coef * (-yv / fc + (1.0 - yv) / (1.0 - fc));
        }
      }
    }
    rec.loss_cond = loss_cond * inv_batch / static_cast<double>(c1);
  }

  // Sigmoid derivative on active latents; masked latents carry no signal.
  Eigen::MatrixXd d_h =
      d_f.array() * mask.array().cast<double>() * f.array() * (1.0 - f.array());
  rec.w_enc.noalias() = d_h.transpose() * x;
  rec.b_enc = d_h.colwise().sum().transpose();

  rec.loss_total = rec.loss_recon + config.condition_weight * rec.loss_cond;
  return rec;
}

namespace {

struct AdamState {
  Eigen::ArrayXXd m, v;
  explicit AdamState(Eigen::Index rows, Eigen::Index cols)
      : m(Eigen::ArrayXXd::Zero(rows, cols)), v(Eigen::ArrayXXd::Zero(rows, cols)) {}
};

void adam_step(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad, AdamState& state,
               const TrainConfig& cfg, long step) {
  state.m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * grad.array();
  state.v = cfg.adam_beta2 * state.v + (1.0 - cfg.adam_beta2) * grad.array().square();
  const double m_corr = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
  const double v_corr = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
  param.array() -=
      cfg.learning_rate * (state.m / m_corr) / ((state.v / v_corr).sqrt() + cfg.adam_eps);
}

}  // namespace

std::pair<GsaeModel, TrainHistory> train(const ActivationDataset& dataset,
                                         const TrainConfig& config, const ModelArch& arch) {
  config.validate();
  dataset.validate();
  if (dataset.n_rows() == 0) throw ConfigError("cannot train on an empty dataset");
  if (arch.d != dataset.dim()) {
    throw ConfigError("architecture dimension " + std::to_string(arch.d) +
                      " does not match dataset dimension " + std::to_string(dataset.dim()));
  }
  const bool conditioned = config.condition_weight > 0.0;
  if (conditioned && arch.n_conditioned != dataset.n_concepts()) {
    throw ConfigError("n_conditioned = " + std::to_string(arch.n_conditioned) +
                      " does not match the dataset's " + std::to_string(dataset.n_concepts()) +
                      " concepts");
  }

  GsaeModel model;
  if (config.warm_start) {
    model = load_model(*config.warm_start);
    if (model.input_dim() != arch.d || model.latent_dim() != arch.m || model.k != arch.k ||
        model.n_conditioned != arch.n_conditioned) {
      throw ConfigError("warm-start checkpoint does not match the requested architecture");
    }
  } else {
    model = init_model(arch.d, arch.m, arch.k, arch.n_conditioned, mix_seed(config.seed, 0));
  }

  const Eigen::MatrixXd x_all = dataset.activations.cast<double>();
  Eigen::MatrixXd y_all;
  if (conditioned) y_all = dataset.labels.cast<double>();  // vanilla runs never read labels

  const Eigen::Index n = x_all.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 shuffle_rng(mix_seed(config.seed, 1));

  AdamState s_w_enc(model.w_enc.rows(), model.w_enc.cols());
  AdamState s_b_enc(model.b_enc.size(), 1);
  AdamState s_w_dec(model.w_dec.rows(), model.w_dec.cols());
  AdamState s_b_dec(model.b_dec.size(), 1);

  TrainHistory history;
  long step = 0;
  Eigen::MatrixXd xb, yb;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_recon = 0.0, epoch_cond = 0.0;
    long n_batches = 0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index size = std::min<Eigen::Index>(config.batch_size, n - start);
      xb.resize(size, x_all.cols());
      if (conditioned) yb.resize(size, y_all.cols());
      for (Eigen::Index i = 0; i < size; ++i) {
        xb.row(i) = x_all.row(order[static_cast<std::size_t>(start + i)]);
        if (conditioned) yb.row(i) = y_all.row(order[static_cast<std::size_t>(start + i)]);
      }

      const GradientRecord g = gradients(model, xb, yb, config);
      ++step;
      adam_step(model.w_enc, g.w_enc, s_w_enc, config, step);
      adam_step(model.b_enc, g.b_enc, s_b_enc, config, step);
      adam_step(model.w_dec, g.w_dec, s_w_dec, config, step);
      adam_step(model.b_dec, g.b_dec, s_b_dec, config, step);

      epoch_recon += g.loss_recon;
      epoch_cond += g.loss_cond;
      ++n_batches;
    }
    history.recon.push_back(epoch_recon / static_cast<double>(n_batches));
    history.cond.push_back(epoch_cond / static_cast<double>(n_batches));
  }
  return {std::move(model), std::move(history)};
}

}  // namespace gsae
