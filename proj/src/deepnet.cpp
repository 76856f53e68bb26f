#include "deeppam/deepnet.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "deeppam/json_util.hpp"
#include "deeppam/model_io.hpp"
#include "deeppam/synth.hpp"
#include "deeppam/text.hpp"

namespace deeppam {

namespace {

std::atomic<std::size_t> g_encode_calls{0};

struct EncodeCache {
  std::vector<Eigen::MatrixXd> pacts;  // pacts[0] = cloud, then per point layer
  std::vector<Eigen::VectorXd> gacts;  // gacts[0] = pooled vector
  std::vector<Eigen::Index> argmax;    // winning point per pooled coordinate
};

Eigen::VectorXd encode_impl(const CloudMatrix& cloud, const EncoderSpec& spec,
                            const EncoderParams& params, EncodeCache* cache) {
  spec.validate();
  if (cloud.rows() == 0) throw std::invalid_argument("empty cloud");
  if (cloud.cols() != 3) throw std::invalid_argument("cloud must have three columns");
  if (!cloud.allFinite()) throw std::invalid_argument("non-finite cloud coordinates");
  g_encode_calls.fetch_add(1, std::memory_order_relaxed);

  // The shared MLP runs one point at a time through fixed preallocated
  // buffers, so every point takes the exact same arithmetic path.  A
  // whole-cloud GEMM would round vector lanes and the scalar tail
  // differently, breaking bitwise invariance to point order and duplication.
  const std::size_t n_point_layers = params.point_layers.size();
  std::vector<Eigen::MatrixXd> pacts(n_point_layers + 1);
  pacts[0] = cloud;
  for (std::size_t l = 0; l < n_point_layers; ++l)
    pacts[l + 1].resize(cloud.rows(), params.point_layers[l].W.rows());

  std::vector<Eigen::VectorXd> buf(n_point_layers + 1);
  buf[0].resize(3);
  for (std::size_t l = 0; l < n_point_layers; ++l)
    buf[l + 1].resize(params.point_layers[l].W.rows());
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    buf[0] = cloud.row(i).transpose();
    for (std::size_t l = 0; l < n_point_layers; ++l) {
      const auto& layer = params.point_layers[l];
      buf[l + 1].noalias() = layer.W * buf[l];
      buf[l + 1] += layer.b;
      buf[l + 1] = buf[l + 1].cwiseMax(0.0);
      pacts[l + 1].row(i) = buf[l + 1].transpose();
    }
  }

  const Eigen::MatrixXd* act_ptr = &pacts.back();
  if (cache) {
    cache->pacts = std::move(pacts);
    cache->gacts.clear();
    act_ptr = &cache->pacts.back();
  }
  const Eigen::MatrixXd& act = *act_ptr;

  const Eigen::Index dim = act.cols();
  Eigen::VectorXd pooled(dim);
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(dim));
  for (Eigen::Index u = 0; u < dim; ++u) {
    Eigen::Index best = 0;
    double value = act(0, u);
    for (Eigen::Index i = 1; i < act.rows(); ++i)
      if (act(i, u) > value) {  // strict: ties keep the lowest index
        value = act(i, u);
        best = i;
      }
    pooled[u] = value;
    argmax[static_cast<std::size_t>(u)] = best;
  }

  Eigen::VectorXd g = pooled;
  if (cache) {
    cache->argmax = std::move(argmax);
    cache->gacts.push_back(g);
  }
  for (std::size_t m = 0; m < params.global_layers.size(); ++m) {
    const auto& layer = params.global_layers[m];
    g = layer.W * g + layer.b;
    if (m + 1 < params.global_layers.size()) g = g.cwiseMax(0.0);
    if (cache) cache->gacts.push_back(g);
  }
  return g;
}

// Accumulates encoder gradients for one subject given d(loss)/d(zeta).
void encoder_backward(const Eigen::VectorXd& dzeta, const EncodeCache& cache,
                      const EncoderParams& params, EncoderParams& grads) {
  const std::size_t n_global = params.global_layers.size();
  Eigen::VectorXd dcur = dzeta;
  for (std::size_t m = n_global; m-- > 0;) {
    Eigen::VectorXd dpre = dcur;
    if (m + 1 < n_global) {  // rectifier applied on all but the last layer
      const Eigen::VectorXd& out = cache.gacts[m + 1];
      for (Eigen::Index i = 0; i < dpre.size(); ++i)
        if (out[i] <= 0.0) dpre[i] = 0.0;
    }
    grads.global_layers[m].W.noalias() += dpre * cache.gacts[m].transpose();
    grads.global_layers[m].b += dpre;
    dcur = params.global_layers[m].W.transpose() * dpre;
  }

  // max-pool: route each coordinate's gradient to its winning point
  std::vector<Eigen::Index> rows;  // unique winning rows, ascending
  for (Eigen::Index r : cache.argmax)
    if (std::find(rows.begin(), rows.end(), r) == rows.end()) rows.push_back(r);
  std::sort(rows.begin(), rows.end());
  auto compact_of = [&rows](Eigen::Index r) {
    return static_cast<Eigen::Index>(
        std::lower_bound(rows.begin(), rows.end(), r) - rows.begin());
  };

  const Eigen::Index n_rows = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd dact = Eigen::MatrixXd::Zero(n_rows, dcur.size());
  for (Eigen::Index u = 0; u < dcur.size(); ++u)
    dact(compact_of(cache.argmax[static_cast<std::size_t>(u)]), u) += dcur[u];

  const std::size_t n_point = params.point_layers.size();
  for (std::size_t l = n_point; l-- > 0;) {
    const Eigen::MatrixXd& out = cache.pacts[l + 1];
    Eigen::MatrixXd dpre = dact;
    for (Eigen::Index k = 0; k < n_rows; ++k)
      for (Eigen::Index c = 0; c < dpre.cols(); ++c)
        if (out(rows[static_cast<std::size_t>(k)], c) <= 0.0) dpre(k, c) = 0.0;

    Eigen::MatrixXd in(n_rows, cache.pacts[l].cols());
    for (Eigen::Index k = 0; k < n_rows; ++k)
      in.row(k) = cache.pacts[l].row(rows[static_cast<std::size_t>(k)]);

    grads.point_layers[l].W.noalias() += dpre.transpose() * in;
    grads.point_layers[l].b += dpre.colwise().sum().transpose();
    dact = dpre * params.point_layers[l].W;
  }
}

double spline_penalty(const Eigen::VectorXd& w, std::span<const double> psi,
                      const DesignInfo& info) {
  double val = 0.0;
  for (const auto& block : info.blocks) {
    if (block.psi_index < 0) continue;
    auto theta = w.segment(block.col_start, block.n_cols);
    val += psi[static_cast<std::size_t>(block.psi_index)] * theta.dot(block.penalty * theta);
  }
  return val;
}

void add_spline_penalty_gradient(Eigen::VectorXd& g, const Eigen::VectorXd& w,
                                 std::span<const double> psi, const DesignInfo& info,
                                 double scale) {
  for (const auto& block : info.blocks) {
    if (block.psi_index < 0) continue;
    auto theta = w.segment(block.col_start, block.n_cols);
    g.segment(block.col_start, block.n_cols) +=
        scale * 2.0 * psi[static_cast<std::size_t>(block.psi_index)] *
        (block.penalty * theta);
  }
}

}  // namespace

void EncoderSpec::validate() const {
  if (point_mlp_dims.size() < 2 || global_mlp_dims.size() < 2)
    throw std::invalid_argument("encoder needs at least one point and one global layer");
  if (point_mlp_dims.front() != 3)
    throw std::invalid_argument("point MLP must start at dimension 3");
  if (point_mlp_dims.back() != global_mlp_dims.front())
    throw std::invalid_argument("point MLP output must match global MLP input");
  for (int d : point_mlp_dims)
    if (d <= 0) throw std::invalid_argument("encoder dimensions must be positive");
  for (int d : global_mlp_dims)
    if (d <= 0) throw std::invalid_argument("encoder dimensions must be positive");
  if (!(l2 >= 0.0)) throw std::invalid_argument("l2 must be nonnegative");
}

nlohmann::json encoder_spec_to_json(const EncoderSpec& spec) {
  return {{"point_mlp_dims", spec.point_mlp_dims},
          {"global_mlp_dims", spec.global_mlp_dims},
          {"l2", spec.l2}};
}

EncoderSpec encoder_spec_from_json(const nlohmann::json& j) {
  EncoderSpec spec;
  spec.point_mlp_dims = j.value("point_mlp_dims", spec.point_mlp_dims);
  spec.global_mlp_dims = j.value("global_mlp_dims", spec.global_mlp_dims);
  spec.l2 = j.value("l2", spec.l2);
  spec.validate();
  return spec;
}

EncoderParams EncoderParams::zeros(const EncoderSpec& spec) {
  spec.validate();
  EncoderParams p;
  auto fill = [](const std::vector<int>& dims, std::vector<DenseLayer>& layers) {
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
      layers.push_back({Eigen::MatrixXd::Zero(dims[l + 1], dims[l]),
                        Eigen::VectorXd::Zero(dims[l + 1])});
  };
  fill(spec.point_mlp_dims, p.point_layers);
  fill(spec.global_mlp_dims, p.global_layers);
  return p;
}

EncoderParams EncoderParams::random_fan_in(const EncoderSpec& spec, Rng& rng) {
  EncoderParams p = zeros(spec);
  auto init = [&rng](std::vector<DenseLayer>& layers) {
    for (auto& layer : layers) {
      double bound = 1.0 / std::sqrt(static_cast<double>(layer.W.cols()));
      for (Eigen::Index r = 0; r < layer.W.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.W.cols(); ++c)
          layer.W(r, c) = rng.uniform(-bound, bound);
    }
  };
  init(p.point_layers);
  init(p.global_layers);
  return p;
}

Eigen::VectorXd encode(const CloudMatrix& cloud, const EncoderSpec& spec,
                       const EncoderParams& params) {
  return encode_impl(cloud, spec, params, nullptr);
}

std::size_t encode_call_count() { return g_encode_calls.load(std::memory_order_relaxed); }
void reset_encode_call_count() { g_encode_calls.store(0, std::memory_order_relaxed); }

PedBatch gather_batch(const PedData& ped, const Eigen::MatrixXd& X,
                      std::span<const std::size_t> subjects,
                      std::span<const CloudMatrix> clouds, int batch_id) {
  if (clouds.size() != ped.n_subjects())
    throw std::invalid_argument("one cloud per subject required");
  if (X.rows() != static_cast<Eigen::Index>(ped.n_rows()))
    throw std::invalid_argument("design row count mismatch");

  Eigen::Index total = 0;
  for (std::size_t s : subjects) {
    auto [b, e] = ped.subject_spans.at(s);
    total += static_cast<Eigen::Index>(e - b);
  }

  PedBatch batch;
  batch.batch_id = batch_id;
  batch.X.resize(total, X.cols());
  batch.t_risk.resize(total);
  batch.status.resize(total);
  batch.spans.reserve(subjects.size());
  batch.clouds.reserve(subjects.size());
  Eigen::Index at = 0;
  for (std::size_t s : subjects) {
    auto [b, e] = ped.subject_spans[s];
    const auto len = static_cast<Eigen::Index>(e - b);
    batch.X.middleRows(at, len) = X.middleRows(static_cast<Eigen::Index>(b), len);
    for (Eigen::Index k = 0; k < len; ++k) {
      batch.t_risk[at + k] = ped.t_risk[b + static_cast<std::size_t>(k)];
      batch.status[at + k] = ped.status[b + static_cast<std::size_t>(k)];
    }
    batch.spans.emplace_back(at, at + len);
    batch.clouds.push_back(clouds[s]);
    at += len;
  }
  return batch;
}

Eigen::VectorXd forward_batch(const PedBatch& batch, const DeepPamModel& model) {
  if (batch.spans.size() != batch.clouds.size())
    throw std::invalid_argument("batch spans and clouds disagree");
  Eigen::VectorXd eta = batch.X * model.w;
  for (std::size_t s = 0; s < batch.spans.size(); ++s) {
    Eigen::VectorXd zeta = encode_impl(batch.clouds[s], model.encoder_spec,
                                       model.encoder, nullptr);
    auto [b, e] = batch.spans[s];
    eta.segment(b, e - b).array() += zeta.dot(model.gamma);
  }
  return eta.array().exp();
}

double loss_and_grads(const PedBatch& batch, const DeepPamModel& model,
                      std::span<const double> psi, double penalty_scale,
                      DeepGrads& grads) {
  if (batch.spans.size() != batch.clouds.size())
    throw std::invalid_argument("batch spans and clouds disagree");
  const Eigen::Index n_rows = batch.X.rows();
  if (batch.t_risk.size() != n_rows || batch.status.size() != n_rows)
    throw std::invalid_argument("batch row arrays disagree");

  grads.w = Eigen::VectorXd::Zero(model.w.size());
  grads.gamma = Eigen::VectorXd::Zero(model.gamma.size());
  grads.encoder = EncoderParams::zeros(model.encoder_spec);

  // forward: eta = B w + zeta' gamma broadcast over each subject's rows
  Eigen::VectorXd eta = batch.X * model.w;
  std::vector<EncodeCache> caches(batch.clouds.size());
  std::vector<Eigen::VectorXd> zetas(batch.clouds.size());
  for (std::size_t s = 0; s < batch.clouds.size(); ++s) {
    zetas[s] = encode_impl(batch.clouds[s], model.encoder_spec, model.encoder, &caches[s]);
    auto [b, e] = batch.spans[s];
    eta.segment(b, e - b).array() += zetas[s].dot(model.gamma);
  }

  Eigen::VectorXd mu = batch.t_risk.array() * eta.array().exp();
  double loss = poisson_nll(eta, batch.t_risk, batch.status) +
                penalty_scale * spline_penalty(model.w, psi, model.design);
  for (const auto& stack : {model.encoder.point_layers, model.encoder.global_layers})
    for (const auto& layer : stack) loss += model.encoder_spec.l2 * layer.W.squaredNorm();
  if (!std::isfinite(loss))
    throw std::runtime_error("non-finite loss in batch " + std::to_string(batch.batch_id));

  // backward
  Eigen::VectorXd residual = mu - batch.status;
  grads.w.noalias() = batch.X.transpose() * residual;
  add_spline_penalty_gradient(grads.w, model.w, psi, model.design, penalty_scale);

  for (std::size_t s = 0; s < batch.clouds.size(); ++s) {
    auto [b, e] = batch.spans[s];
    double subject_residual = residual.segment(b, e - b).sum();
    grads.gamma.noalias() += subject_residual * zetas[s];
    Eigen::VectorXd dzeta = subject_residual * model.gamma;
    encoder_backward(dzeta, caches[s], model.encoder, grads.encoder);
  }

  for (std::size_t stack = 0; stack < 2; ++stack) {
    auto& src = stack == 0 ? model.encoder.point_layers : model.encoder.global_layers;
    auto& dst = stack == 0 ? grads.encoder.point_layers : grads.encoder.global_layers;
    for (std::size_t l = 0; l < src.size(); ++l)
      dst[l].W += 2.0 * model.encoder_spec.l2 * src[l].W;
  }
  return loss;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (max_epochs <= 0) throw std::invalid_argument("max_epochs must be positive");
  if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (!(noise_halfwidth >= 0.0))
    throw std::invalid_argument("noise_halfwidth must be nonnegative");
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return {{"lr", cfg.lr},
          {"max_epochs", cfg.max_epochs},
          {"batch_size", cfg.batch_size},
          {"patience", cfg.patience},
          {"adam_beta1", cfg.adam_beta1},
          {"adam_beta2", cfg.adam_beta2},
          {"adam_eps", cfg.adam_eps},
          {"noise_halfwidth", cfg.noise_halfwidth},
          {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.lr = j.value("lr", cfg.lr);
  cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.patience = j.value("patience", cfg.patience);
  cfg.adam_beta1 = j.value("adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = j.value("adam_beta2", cfg.adam_beta2);
  cfg.adam_eps = j.value("adam_eps", cfg.adam_eps);
  cfg.noise_halfwidth = j.value("noise_halfwidth", cfg.noise_halfwidth);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

namespace {

// Flat views over all trainable blocks, in a fixed order.
std::vector<std::pair<double*, Eigen::Index>> trainable_blocks(
    Eigen::VectorXd& w, Eigen::VectorXd& gamma, EncoderParams& enc) {
  std::vector<std::pair<double*, Eigen::Index>> blocks;
  blocks.emplace_back(w.data(), w.size());
  blocks.emplace_back(gamma.data(), gamma.size());
  for (auto* stack : {&enc.point_layers, &enc.global_layers})
    for (auto& layer : *stack) {
      blocks.emplace_back(layer.W.data(), layer.W.size());
      blocks.emplace_back(layer.b.data(), layer.b.size());
    }
  return blocks;
}

class Adam {
 public:
  Adam(const TrainConfig& cfg, const std::vector<std::pair<double*, Eigen::Index>>& blocks)
      : cfg_(cfg) {
    for (const auto& [ptr, len] : blocks) {
      (void)ptr;
      m_.push_back(Eigen::ArrayXd::Zero(len));
      v_.push_back(Eigen::ArrayXd::Zero(len));
    }
  }

  void step(std::vector<std::pair<double*, Eigen::Index>>& params,
            std::vector<std::pair<double*, Eigen::Index>>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      Eigen::Map<Eigen::ArrayXd> p(params[k].first, params[k].second);
      Eigen::Map<const Eigen::ArrayXd> g(grads[k].first, grads[k].second);
      m_[k] = cfg_.adam_beta1 * m_[k] + (1.0 - cfg_.adam_beta1) * g;
      v_[k] = cfg_.adam_beta2 * v_[k] + (1.0 - cfg_.adam_beta2) * g.square();
      p -= cfg_.lr * (m_[k] / c1) / ((v_[k] / c2).sqrt() + cfg_.adam_eps);
    }
  }

 private:
  TrainConfig cfg_;
  int t_ = 0;
  std::vector<Eigen::ArrayXd> m_, v_;
};

Eigen::VectorXd column(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd column(const std::vector<int>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = v[static_cast<std::size_t>(i)];
  return out;
}

std::vector<CloudMatrix> collect_clouds(std::span<const SurvivalRecord> records) {
  std::vector<CloudMatrix> clouds;
  clouds.reserve(records.size());
  for (const auto& rec : records) {
    if (!rec.cloud)
      throw std::invalid_argument("record without cloud: id " + std::to_string(rec.id));
    clouds.push_back(*rec.cloud);
  }
  return clouds;
}

double validation_nll(const Eigen::MatrixXd& Xval, const Eigen::VectorXd& tval,
                      const Eigen::VectorXd& dval, const PedData& ped_val,
                      std::span<const CloudMatrix> clouds, const DeepPamModel& model) {
  Eigen::VectorXd eta = Xval * model.w;
  for (std::size_t s = 0; s < ped_val.n_subjects(); ++s) {
    Eigen::VectorXd zeta = encode_impl(clouds[s], model.encoder_spec, model.encoder, nullptr);
    auto [b, e] = ped_val.subject_spans[s];
    eta.segment(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b)).array() +=
        zeta.dot(model.gamma);
  }
  return poisson_nll(eta, tval, dval);
}

}  // namespace

DeepPamModel fit_deeppam(std::span<const SurvivalRecord> train,
                         std::span<const SurvivalRecord> val,
                         const StructuredSpec& spec, const TrainConfig& cfg,
                         const PamFit& warm, const EncoderSpec& encoder_spec) {
  cfg.validate();
  encoder_spec.validate();
  spec.validate();
  if (train.empty() || val.empty()) throw std::invalid_argument("empty split");

  PedData ped_train = transform_to_ped(train, warm.cuts, warm.design.feature_names);
  PedData ped_val = transform_to_ped(val, warm.cuts, warm.design.feature_names);
  Eigen::MatrixXd Xtrain = assemble_design(warm.design, ped_train);
  Eigen::MatrixXd Xval = assemble_design(warm.design, ped_val);
  Eigen::VectorXd tval = column(ped_val.t_risk);
  Eigen::VectorXd dval = column(ped_val.status);

  std::vector<CloudMatrix> base_clouds = collect_clouds(train);
  std::vector<CloudMatrix> val_clouds = collect_clouds(val);
  const std::size_t n_subjects = ped_train.n_subjects();

  DeepPamModel model;
  model.spec = spec;
  model.design = warm.design;
  model.cuts = warm.cuts;
  model.w = warm.w;
  model.gamma = Eigen::VectorXd::Zero(encoder_spec.latent_dim());
  model.encoder_spec = encoder_spec;
  {
    Rng init_rng(mix_seed(cfg.seed, 0x1217'5EEDull));
    model.encoder = EncoderParams::random_fan_in(encoder_spec, init_rng);
  }
  model.psi = warm.psi;
  model.warm_start_hash = content_hash(pam_to_json(warm));

  // epoch 0: the warm start itself, before any gradient step
  double val_nll = validation_nll(Xval, tval, dval, ped_val, val_clouds, model);
  double train_loss0;
  {
    std::vector<std::size_t> all(n_subjects);
    for (std::size_t s = 0; s < n_subjects; ++s) all[s] = s;
    PedBatch full = gather_batch(ped_train, Xtrain, all, base_clouds, 0);
    DeepGrads scratch;
    train_loss0 = loss_and_grads(full, model, model.psi, 1.0, scratch);
  }
  model.train_log.push_back({0, train_loss0, val_nll});

  struct Snapshot {
    Eigen::VectorXd w, gamma;
    EncoderParams encoder;
  };
  Snapshot best{model.w, model.gamma, model.encoder};
  double best_val = val_nll;
  int best_epoch = 0;
  int since_best = 0;

  auto params = trainable_blocks(model.w, model.gamma, model.encoder);
  Adam adam(cfg, params);

  std::vector<std::size_t> order(n_subjects);
  for (std::size_t s = 0; s < n_subjects; ++s) order[s] = s;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng epoch_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));

    // fresh jitter of the stored clouds, then re-normalize
    std::vector<CloudMatrix> epoch_clouds = base_clouds;
    for (auto& cloud : epoch_clouds) {
      jitter_cloud(cloud, cfg.noise_halfwidth, epoch_rng);
      normalize_cloud(cloud);
    }

    for (std::size_t s = 0; s < n_subjects; ++s) order[s] = s;
    epoch_rng.shuffle(order);

    double epoch_loss = 0.0;
    int batch_id = 0;
    for (std::size_t start = 0; start < n_subjects; start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t stop = std::min(n_subjects, start + static_cast<std::size_t>(cfg.batch_size));
      std::span<const std::size_t> subjects(order.data() + start, stop - start);
      PedBatch batch = gather_batch(ped_train, Xtrain, subjects, epoch_clouds, batch_id++);
      DeepGrads grads;
      double scale = static_cast<double>(subjects.size()) / static_cast<double>(n_subjects);
      epoch_loss += loss_and_grads(batch, model, model.psi, scale, grads);
      auto grad_blocks = trainable_blocks(grads.w, grads.gamma, grads.encoder);
      adam.step(params, grad_blocks);
    }

    val_nll = validation_nll(Xval, tval, dval, ped_val, val_clouds, model);
    if (!std::isfinite(val_nll))
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                               ": non-finite validation loss");
    model.train_log.push_back({epoch, epoch_loss, val_nll});

    if (val_nll < best_val) {
      best_val = val_nll;
      best = {model.w, model.gamma, model.encoder};
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  model.w = std::move(best.w);
  model.gamma = std::move(best.gamma);
  model.encoder = std::move(best.encoder);
  model.best_epoch = best_epoch;
  return model;
}

Eigen::VectorXd interval_log_hazards(const DeepPamModel& model,
                                     std::span<const double> features,
                                     const CloudMatrix& cloud) {
  Eigen::VectorXd curve = structured_log_hazards(model.design, model.w, model.cuts, features);
  Eigen::VectorXd zeta = encode_impl(cloud, model.encoder_spec, model.encoder, nullptr);
  return curve.array() + zeta.dot(model.gamma);
}

double predict_survival(const DeepPamModel& model, std::span<const double> features,
                        const CloudMatrix& cloud, double t) {
  Eigen::VectorXd hazards = interval_log_hazards(model, features, cloud).array().exp();
  return survival_from_hazards(model.cuts, hazards, t);
}

namespace {

nlohmann::json layer_to_json(const DenseLayer& layer) {
  return {{"W", matrix_to_json(layer.W)}, {"b", vector_to_json(layer.b)}};
}

DenseLayer layer_from_json(const nlohmann::json& j) {
  return {matrix_from_json(j.at("W")), vector_from_json(j.at("b"))};
}

}  // namespace

std::string deeppam_to_json(const DeepPamModel& model) {
  nlohmann::json j;
  j["kind"] = "deeppam";
  j["terms"] = terms_to_json(model.spec.terms);
  j["design"] = design_info_to_json(model.design);
  j["cuts"] = model.cuts.cuts;
  j["w"] = vector_to_json(model.w);
  j["gamma"] = vector_to_json(model.gamma);
  j["psi"] = model.psi;
  j["encoder_spec"] = encoder_spec_to_json(model.encoder_spec);
  nlohmann::json enc;
  auto& pl = enc["point_layers"] = nlohmann::json::array();
  for (const auto& layer : model.encoder.point_layers) pl.push_back(layer_to_json(layer));
  auto& gl = enc["global_layers"] = nlohmann::json::array();
  for (const auto& layer : model.encoder.global_layers) gl.push_back(layer_to_json(layer));
  j["encoder"] = std::move(enc);
  auto& log = j["train_log"] = nlohmann::json::array();
  for (const auto& entry : model.train_log)
    log.push_back({{"epoch", entry.epoch},
                   {"train_loss", entry.train_loss},
                   {"val_nll", entry.val_nll}});
  j["best_epoch"] = model.best_epoch;
  j["warm_start_hash"] = model.warm_start_hash;
  return j.dump(2);
}

DeepPamModel deeppam_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("kind").get<std::string>() != "deeppam")
    throw std::invalid_argument("not a joint model file");
  DeepPamModel model;
  model.spec.terms = terms_from_json(j.at("terms"));
  model.design = design_info_from_json(j.at("design"));
  model.cuts.cuts = j.at("cuts").get<std::vector<double>>();
  model.cuts.validate();
  model.w = vector_from_json(j.at("w"));
  model.gamma = vector_from_json(j.at("gamma"));
  model.psi = j.at("psi").get<std::vector<double>>();
  model.encoder_spec = encoder_spec_from_json(j.at("encoder_spec"));
  for (const auto& layer : j.at("encoder").at("point_layers"))
    model.encoder.point_layers.push_back(layer_from_json(layer));
  for (const auto& layer : j.at("encoder").at("global_layers"))
    model.encoder.global_layers.push_back(layer_from_json(layer));
  for (const auto& entry : j.at("train_log"))
    model.train_log.push_back({entry.at("epoch").get<int>(),
                               entry.at("train_loss").get<double>(),
                               entry.at("val_nll").get<double>()});
  model.best_epoch = j.value("best_epoch", 0);
  model.warm_start_hash = j.value("warm_start_hash", std::string());
  return model;
}

void save_deeppam(const DeepPamModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file: " + path.string());
  out << deeppam_to_json(model) << '\n';
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
}

DeepPamModel load_deeppam(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deeppam_from_json(buf.str());
}

void save_train_log_csv(const DeepPamModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file: " + path.string());
  out << "epoch,train_loss,val_nll\n";
  for (const auto& entry : model.train_log)
    out << entry.epoch << ',' << format_double(entry.train_loss) << ','
        << format_double(entry.val_nll) << '\n';
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
}

}  // namespace deeppam
