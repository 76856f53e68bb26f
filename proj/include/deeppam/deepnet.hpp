#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "deeppam/pam.hpp"
#include "deeppam/rng.hpp"

namespace deeppam {

/// Point-cloud encoder layout: a per-point MLP with shared weights, a
/// coordinate-wise max pool over points, then a global MLP.  Rectifier on
/// every layer except the final global one, which is linear.
struct EncoderSpec {
  std::vector<int> point_mlp_dims{3, 32, 64};
  std::vector<int> global_mlp_dims{64, 32, 8};
  double l2 = 1e-4;  // weight penalty, applied to weights only

  int latent_dim() const { return global_mlp_dims.back(); }
  void validate() const;
};

nlohmann::json encoder_spec_to_json(const EncoderSpec& spec);
EncoderSpec encoder_spec_from_json(const nlohmann::json& j);

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;
};

struct EncoderParams {
  std::vector<DenseLayer> point_layers;
  std::vector<DenseLayer> global_layers;

  static EncoderParams zeros(const EncoderSpec& spec);
  /// Weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0.
  static EncoderParams random_fan_in(const EncoderSpec& spec, Rng& rng);
};

/// Latent representation of one cloud.  Max-pool ties resolve to the lowest
/// point index, which makes the backward pass deterministic.
Eigen::VectorXd encode(const CloudMatrix& cloud, const EncoderSpec& spec,
                       const EncoderParams& params);

/// encode() invocations since the last reset; lets tests pin the
/// one-encode-per-subject-per-batch contract.
std::size_t encode_call_count();
void reset_encode_call_count();

/// Joint model: log h_ij = B_ij w + zeta_i' gamma, with zeta_i encoded from
/// the subject's cloud and broadcast over its intervals.
struct DeepPamModel {
  StructuredSpec spec;
  DesignInfo design;
  CutPoints cuts;
  Eigen::VectorXd w;      // structured coefficients
  Eigen::VectorXd gamma;  // latent head
  EncoderSpec encoder_spec;
  EncoderParams encoder;
  std::vector<double> psi;  // frozen smoothing parameters from the warm start

  struct EpochEntry {
    int epoch;
    double train_loss;  // summed batch objectives over the epoch
    double val_nll;     // Poisson nll on unjittered validation data
  };
  std::vector<EpochEntry> train_log;
  int best_epoch = 0;
  std::string warm_start_hash;
};

/// Gathered PED rows of a subject subset plus their clouds, one per subject.
struct PedBatch {
  int batch_id = -1;
  Eigen::MatrixXd X;  // structured design rows
  Eigen::VectorXd t_risk;
  Eigen::VectorXd status;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> spans;  // per subject [begin, end)
  std::vector<CloudMatrix> clouds;
};

/// Builds a PedBatch from PED data (rows gathered from an assembled design).
PedBatch gather_batch(const PedData& ped, const Eigen::MatrixXd& X,
                      std::span<const std::size_t> subjects,
                      std::span<const CloudMatrix> clouds, int batch_id = -1);

/// Hazard per PED row: exp(B_ij w + zeta_i' gamma); one encode per subject.
Eigen::VectorXd forward_batch(const PedBatch& batch, const DeepPamModel& model);

struct DeepGrads {
  Eigen::VectorXd w;
  Eigen::VectorXd gamma;
  EncoderParams encoder;
};

/// Batch objective value and its exact gradients:
///   sum Poisson nll + penalty_scale * sum psi_l theta_l' S_l theta_l
///   + l2 * squared norm of all encoder weights.
/// Reverse accumulation routes the max-pool subgradient to the argmax point.
double loss_and_grads(const PedBatch& batch, const DeepPamModel& model,
                      std::span<const double> psi, double penalty_scale,
                      DeepGrads& grads);

struct TrainConfig {
  double lr = 0.001;
  int max_epochs = 75;
  int batch_size = 32;  // subjects
  int patience = 5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double noise_halfwidth = 0.01;  // per-epoch training jitter
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Warm-started joint training: w from `warm`, gamma = 0, encoder random;
/// Adam over subject mini-batches, early stopping on validation nll with the
/// best checkpoint retained.  Training clouds are re-jittered every epoch;
/// validation clouds are used as-is.
DeepPamModel fit_deeppam(std::span<const SurvivalRecord> train,
                         std::span<const SurvivalRecord> val,
                         const StructuredSpec& spec, const TrainConfig& cfg,
                         const PamFit& warm, const EncoderSpec& encoder_spec = {});

Eigen::VectorXd interval_log_hazards(const DeepPamModel& model,
                                     std::span<const double> features,
                                     const CloudMatrix& cloud);
double predict_survival(const DeepPamModel& model, std::span<const double> features,
                        const CloudMatrix& cloud, double t);

std::string deeppam_to_json(const DeepPamModel& model);
DeepPamModel deeppam_from_json(const std::string& text);
void save_deeppam(const DeepPamModel& model, const std::filesystem::path& path);
DeepPamModel load_deeppam(const std::filesystem::path& path);

/// CSV with header epoch,train_loss,val_nll.
void save_train_log_csv(const DeepPamModel& model, const std::filesystem::path& path);

}  // namespace deeppam
