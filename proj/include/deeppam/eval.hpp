#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "deeppam/ped.hpp"

namespace deeppam {

/// Right-continuous step function on [0, inf), extended by its last value.
/// values has one more entry than knots: values[k] holds on [knots[k-1], knots[k]).
struct StepFunction {
  std::vector<double> knots;
  std::vector<double> values;

  double operator()(double t) const;
  double left_limit(double t) const;
  void validate() const;
};

/// Product-limit estimator. At tied times events precede censorings, so a
/// subject censored at an event time is still at risk for it.
StepFunction kaplan_meier(std::span<const double> time, std::span<const int> status);
StepFunction kaplan_meier(std::span<const SurvivalRecord> records);

/// Kaplan-Meier of the censoring distribution: same estimator, status flipped.
StepFunction censoring_kaplan_meier(std::span<const double> time, std::span<const int> status);
StepFunction censoring_kaplan_meier(std::span<const SurvivalRecord> records);

struct BrierPoint {
  double bs = 0.0;
  std::size_t n_dropped = 0;  // subjects whose IPCW weight divides by G = 0
};

/// Inverse-probability-of-censoring weighted Brier score at time t.
/// survival_prob[i] = predicted S(t | subject i).  Past events weight by
/// 1/G(t_i-), survivors by 1/G(t); subjects censored by t contribute zero.
/// Subjects whose weight is undefined (G = 0) are dropped from the average.
BrierPoint brier_score(std::span<const double> time, std::span<const int> status,
                       std::span<const double> survival_prob, double t,
                       const StepFunction& cens_km);

/// {0} followed by the distinct event times in (0, tau]; errors when there
/// is no event time at or below tau.
std::vector<double> ibs_grid(std::span<const double> time, std::span<const int> status,
                             double tau);

struct BrierResult {
  std::vector<double> times;
  std::vector<double> bs;
  std::vector<std::size_t> dropped;
  double tau = 0.0;
  double ibs = 0.0;
};

/// Trapezoidal integral of BS(t) over `grid`, divided by tau.
/// survival(i, g) = predicted S(grid[g] | subject i).
BrierResult integrated_brier(std::span<const double> time, std::span<const int> status,
                             const Eigen::MatrixXd& survival,
                             std::span<const double> grid, double tau,
                             const StepFunction& cens_km);

/// Convenience wrapper: evaluates the predictor on the default grid.
BrierResult integrated_brier(std::span<const SurvivalRecord> test,
                             const std::function<double(const SurvivalRecord&, double)>& survival,
                             double tau, const StepFunction& cens_km);

/// 100 * (model - reference) / reference.
double relative_ibs(double model_ibs, double reference_ibs);

/// Linear-interpolation quantile (the common statistical default) of the
/// values in x; q in [0, 1].
double quantile_type7(std::vector<double> x, double q);

/// CSV with header t,bs,dropped.
void save_brier_csv(const BrierResult& result, const std::filesystem::path& path);

}  // namespace deeppam
