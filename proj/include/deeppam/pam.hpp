#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "deeppam/basis.hpp"
#include "deeppam/ped.hpp"

namespace deeppam {

// ---------------------------------------------------------------------------
// Additive predictor description
// ---------------------------------------------------------------------------

struct TermIntercept {};
struct TermLinear {
  std::string feature;
};
struct TermSmooth {
  std::string feature;
  SplineSpec spline;
};
struct TermBaseline {  // smooth of the interval endpoint t_j
  SplineSpec spline;
};

using Term = std::variant<TermIntercept, TermBaseline, TermLinear, TermSmooth>;

/// log h_ij = beta_0 + f_0(t_j) + sum_p x_p beta_p + sum_l f_l(x_l).
struct StructuredSpec {
  std::vector<Term> terms;

  void validate() const;  // exactly one intercept, exactly one baseline

  /// intercept + baseline smooth + linear effects, the workhorse layout
  static StructuredSpec baseline_linear(const std::vector<std::string>& linear_features,
                                        SplineSpec baseline = SplineSpec{});
};

// ---------------------------------------------------------------------------
// Design matrix
// ---------------------------------------------------------------------------

enum class BlockKind { Intercept, Baseline, Linear, Smooth };

/// One column block of the design plus everything needed to rebuild rows for
/// new data: frozen spline range and the centering transform Z.
struct DesignBlock {
  BlockKind kind = BlockKind::Intercept;
  std::string feature;     // empty for intercept/baseline
  int feature_index = -1;  // column of PedData::features, -1 if none
  SplineSpec spline;       // meaningful for Baseline/Smooth; lo/hi frozen
  Eigen::MatrixXd Z;       // M x (M-1) centering transform, empty if none
  Eigen::MatrixXd penalty; // centered penalty, empty if unpenalized
  int psi_index = -1;      // which smoothing parameter applies, -1 if none
  int col_start = 0;
  int n_cols = 0;
};

struct DesignInfo {
  std::vector<DesignBlock> blocks;
  std::vector<std::string> feature_names;
  int n_cols = 0;
  int n_psi = 0;
};

struct Design {
  DesignInfo info;
  Eigen::MatrixXd X;
};

/// Builds the design for the PED rows.  Column order: intercept, centered
/// baseline basis, linear terms, centered smooth bases.  Smooth ranges come
/// from the training data; a 1-basis (degenerate) smooth is suppressed.
Design build_design(const PedData& ped, const StructuredSpec& spec);

/// Rows for new PED data under a frozen design (same transforms and ranges).
Eigen::MatrixXd assemble_design(const DesignInfo& info, const PedData& ped);

/// Single design row at interval time t_j with the given feature vector.
Eigen::RowVectorXd design_row(const DesignInfo& info, double t_j,
                              std::span<const double> features);

// ---------------------------------------------------------------------------
// Penalized Poisson likelihood
// ---------------------------------------------------------------------------

/// Unpenalized Poisson negative log-likelihood with offsets log(t_risk):
/// sum_r [ t_r e^{eta_r} - delta_r (eta_r + log t_r) ].
double poisson_nll(const Eigen::VectorXd& eta, const Eigen::VectorXd& t_risk,
                   const Eigen::VectorXd& status);

/// Adds the quadratic roughness penalties sum_l psi_l theta_l' S_l theta_l.
double penalized_nll(const Eigen::VectorXd& w, const Eigen::MatrixXd& X,
                     const Eigen::VectorXd& t_risk, const Eigen::VectorXd& status,
                     std::span<const double> psi, const DesignInfo& info);

Eigen::VectorXd penalized_nll_gradient(const Eigen::VectorXd& w,
                                       const Eigen::MatrixXd& X,
                                       const Eigen::VectorXd& t_risk,
                                       const Eigen::VectorXd& status,
                                       std::span<const double> psi,
                                       const DesignInfo& info);

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

struct FitOptions {
  int max_iter = 200;
  double rel_tol = 1e-9;   // relative change of the objective
  double grad_tol = 1e-8;  // gradient norm
  double eta_clamp = 30.0; // linear-predictor guard during iterations only
};

struct PamFit {
  StructuredSpec spec;
  DesignInfo design;
  CutPoints cuts;
  Eigen::VectorXd w;
  std::vector<double> psi;
  bool converged = false;
  double final_penalized_nll = 0.0;
  int n_iter = 0;
};

/// Newton minimization of the penalized Poisson nll with step halving.
PamFit fit_pam(const PedData& ped, const StructuredSpec& spec,
               std::vector<double> psi, const FitOptions& opts = {});

/// Grid for smoothing-parameter search: 13 log10-equidistant points on
/// 10^-4 .. 10^4.
std::vector<double> default_psi_grid();

/// Coordinate-wise grid search minimizing the unpenalized Poisson nll on the
/// validation PED (same cuts as training); ties go to the larger psi.
PamFit fit_pam_select_psi(const PedData& train, const PedData& val,
                          const StructuredSpec& spec,
                          std::vector<double> grid = default_psi_grid(),
                          const FitOptions& opts = {});

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

/// log-hazard per interval (length J) from a frozen design and coefficients;
/// shared by the plain and the encoder-augmented model.
Eigen::VectorXd structured_log_hazards(const DesignInfo& design, const Eigen::VectorXd& w,
                                       const CutPoints& cuts,
                                       std::span<const double> features);

/// log-hazard per interval (length J) for one feature vector.
Eigen::VectorXd interval_log_hazards(const PamFit& fit, std::span<const double> features);

/// Piecewise-constant hazard at time t; t beyond the last cut uses the last
/// interval's hazard.
double predict_hazard(const PamFit& fit, std::span<const double> features, double t);

/// S(t) = exp(-Lambda(t)) with Lambda summed interval-wise from `hazards`
/// (hazard per interval j, extended by the last value beyond the final cut).
double survival_from_hazards(const CutPoints& cuts, const Eigen::VectorXd& hazards,
                             double t);

double predict_survival(const PamFit& fit, std::span<const double> features, double t);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string pam_to_json(const PamFit& fit);
PamFit pam_from_json(const std::string& text);
void save_pam(const PamFit& fit, const std::filesystem::path& path);
PamFit load_pam(const std::filesystem::path& path);

/// FNV-1a hash of a serialized document, hex-encoded; used for provenance.
std::string content_hash(const std::string& text);

}  // namespace deeppam
