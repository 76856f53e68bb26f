#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "deeppam/deepnet.hpp"
#include "deeppam/eval.hpp"
#include "deeppam/pam.hpp"
#include "deeppam/synth.hpp"

namespace deeppam {

/// Everything one replicated benchmark run needs.  JSON-serializable; CLI
/// flags override individual keys.
struct ExperimentConfig {
  SimConfig sim;
  TrainConfig train;
  SplineSpec baseline;  // baseline smooth layout; range frozen per fit
  std::vector<double> psi_grid = default_psi_grid();
  CutStrategy cuts = CutStrategy::event_times();
  std::vector<double> horizon_quantiles{0.25, 0.5, 0.75};
  double curve_step = 0.125;
  int n_replicates = 10;
  int jobs = 1;
  std::vector<std::string> models{"km", "pam_baseline", "pam_correct", "deeppam"};
  std::filesystem::path output_dir = "experiment_out";

  void validate() const;
};

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct ModelEval {
  std::string model;
  std::vector<double> tau;
  std::vector<double> ibs;
  std::vector<double> rel_ibs;         // vs pam_correct, in percent
  std::vector<std::size_t> max_dropped;  // worst grid point per horizon
  bool converged = true;
};

struct ReplicateResult {
  int replicate = 0;
  std::uint64_t seed = 0;
  std::vector<double> horizons;
  std::vector<ModelEval> models;
  bool ok = false;
  std::string error;
};

/// Full single-seed pipeline: simulate, fit the requested models, evaluate,
/// and write results.csv, curves_<model>.csv, and report.json into out_dir.
ReplicateResult run_replicate(const ExperimentConfig& cfg, int replicate,
                              const std::filesystem::path& out_dir);

/// Runs all replicates (optionally across cfg.jobs threads), aggregates mean
/// and standard deviation of the relative IBS into table2.csv plus a summary
/// report.json.  Returns 0 when every replicate converged, 2 otherwise;
/// completed replicate outputs are kept either way.
int run_experiment(const ExperimentConfig& cfg);

/// Subcommand bodies; they throw on failure (callers map exceptions to exit
/// codes).
void cmd_simulate(const SimConfig& cfg, const std::filesystem::path& out_dir);
void cmd_fit(const std::filesystem::path& data_dir, const std::string& model_kind,
             const ExperimentConfig& cfg, const std::filesystem::path& out_file,
             const std::optional<std::filesystem::path>& export_ped_path = {});
void cmd_evaluate(const std::filesystem::path& data_dir,
                  const std::vector<std::filesystem::path>& model_files,
                  const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace deeppam
