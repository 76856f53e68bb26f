#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace deeppam {

using CloudMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// One subject of a right-censored survival sample.
struct SurvivalRecord {
  std::int64_t id = 0;
  double time = 0.0;  // event or censoring time, > 0
  int status = 0;     // 1 = event, 0 = censored
  std::vector<double> features;
  std::optional<CloudMatrix> cloud;
  std::optional<int> true_class;  // simulation ground truth, never a feature
};

/// Interval cut points kappa_0 = 0 < kappa_1 < ... < kappa_J.
struct CutPoints {
  std::vector<double> cuts;

  int n_intervals() const { return static_cast<int>(cuts.size()) - 1; }
  double last() const { return cuts.back(); }
  double width(int j) const { return cuts[j] - cuts[j - 1]; }

  /// 1-based index j with t in (kappa_{j-1}, kappa_j]; t beyond the last cut
  /// maps to the last interval.
  int interval_index(double t) const;

  void validate() const;  // throws std::invalid_argument
};

struct CutStrategy {
  enum class Kind { EventTimes, Grid };
  Kind kind = Kind::EventTimes;
  int grid_intervals = 0;
  double grid_t_max = 0.0;

  static CutStrategy event_times() { return {}; }
  static CutStrategy grid(int n_intervals, double t_max) {
    return {Kind::Grid, n_intervals, t_max};
  }
};

/// View of one augmented row (subject x interval).
struct PedRow {
  std::int64_t id;
  int j;          // 1-based interval index
  double t_j;     // interval time representation, kappa_j
  double t_risk;  // time at risk within the interval, offset on the log scale
  int status;     // interval status delta_ij
  std::vector<double> features;
};

/// Piecewise exponential data: the Poisson-ready augmented layout, stored
/// column-wise.  Rows of one subject are contiguous (see subject_spans).
struct PedData {
  std::vector<std::int64_t> id;
  std::vector<int> interval;
  std::vector<double> t_j;
  std::vector<double> t_risk;
  std::vector<int> status;
  Eigen::MatrixXd features;  // n_rows x n_features
  std::vector<std::string> feature_names;
  CutPoints cuts;
  std::vector<std::pair<std::size_t, std::size_t>> subject_spans;  // [begin, end)

  std::size_t n_rows() const { return t_risk.size(); }
  std::size_t n_subjects() const { return subject_spans.size(); }
  PedRow row(std::size_t r) const;
  double total_events() const;
  double total_exposure() const;
};

/// Cut points from the observed sample.  `event-times` returns {0} plus the
/// de-duplicated sorted event times; `grid(J, t_max)` returns J+1 equidistant
/// points on [0, t_max].
CutPoints make_cut_points(std::span<const SurvivalRecord> records,
                          const CutStrategy& strategy);

/// PED augmentation: one row per interval a subject was at risk in.  Subjects
/// with time beyond the last cut are administratively truncated there with
/// status forced to 0.
PedData transform_to_ped(std::span<const SurvivalRecord> records,
                         const CutPoints& cuts,
                         std::vector<std::string> feature_names = {});

/// CSV with header id,j,t_j,t_risk,status,<feature_names...>, rows ordered by
/// (id, j).  Doubles are written with 17 significant digits.
void export_ped(const PedData& ped, const std::filesystem::path& path);

/// Reads the export_ped schema back.  Cut points are reconstructed from the
/// distinct t_j values.
PedData import_ped(const std::filesystem::path& path);

}  // namespace deeppam
