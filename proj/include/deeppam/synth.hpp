#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <json.hpp>

#include "deeppam/ped.hpp"
#include "deeppam/rng.hpp"

namespace deeppam {

/// Synthetic benchmark: three latent shape classes whose identity enters the
/// hazard through dummy effects, two uniform tabular features, and right
/// censoring (exponential plus administrative).
struct SimConfig {
  int n_train = 1008;
  int n_val = 144;
  int n_test = 216;
  int n_points = 1024;
  double beta1 = -0.25;
  double beta2 = 0.3;
  double gamma1 = 0.5;
  double gamma2 = -1.0;
  // log baseline hazard: base_level + base_curv * (t - base_center)^2
  double base_level = -0.5;
  double base_curv = -0.1;
  double base_center = 4.0;
  double admin_cens = 10.0;
  double cens_rate = 0.02;
  double noise_halfwidth = 0.01;
  double grid_step = 0.005;  // hazard discretization for time sampling
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json sim_config_to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const nlohmann::json& j);

struct Dataset {
  SimConfig config;
  std::vector<SurvivalRecord> train;
  std::vector<SurvivalRecord> val;
  std::vector<SurvivalRecord> test;
};

/// Uniform surface samples: class 0 unit sphere, class 1 cube of half-width 1,
/// class 2 cylinder (radius 0.6, height 2).
CloudMatrix sample_shape(int class_id, int n_points, Rng& rng);

/// Adds i.i.d. uniform noise on [-halfwidth, halfwidth] to every coordinate.
void jitter_cloud(CloudMatrix& cloud, double halfwidth, Rng& rng);

/// Centers the centroid at the origin and scales so the largest point norm
/// is exactly 1.
void normalize_cloud(CloudMatrix& cloud);

/// sample_shape + jitter + normalize.
CloudMatrix generate_cloud(int class_id, int n_points, double noise_halfwidth, Rng& rng);

double log_hazard_true(const SimConfig& cfg, double t, double x1, double x2, int class_id);
double hazard_true(const SimConfig& cfg, double t, double x1, double x2, int class_id);

/// Survival-time draw by inverting the cumulative hazard of a piecewise
/// constant (midpoint rule, step cfg.grid_step) approximation over
/// [0, admin_cens], with exponential censoring at cfg.cens_rate and
/// administrative censoring at admin_cens.  Returns (time, status).
std::pair<double, int> simulate_time(const SimConfig& cfg, double x1, double x2,
                                     int class_id, Rng& rng);

/// Full benchmark draw.  Deterministic given cfg.seed; subject i uses its own
/// RNG stream split from the seed, so any generation order reproduces the
/// same records.  Stored clouds are noise-free and normalized; training-time
/// jitter is the trainer's job.
Dataset generate_dataset(const SimConfig& cfg);

/// Writes manifest.json, {train,val,test}.csv (id,time,status,x1,x2,true_class)
/// and clouds/<id>.bin (float64 little-endian, row-major n_points x 3).
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace deeppam
