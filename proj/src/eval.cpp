#include "deeppam/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "deeppam/text.hpp"

namespace deeppam {

double StepFunction::operator()(double t) const {
  // value index = number of knots <= t (right-continuous)
  auto it = std::upper_bound(knots.begin(), knots.end(), t);
  return values[static_cast<std::size_t>(it - knots.begin())];
}

double StepFunction::left_limit(double t) const {
  auto it = std::lower_bound(knots.begin(), knots.end(), t);
  return values[static_cast<std::size_t>(it - knots.begin())];
}

void StepFunction::validate() const {
  if (values.size() != knots.size() + 1)
    throw std::invalid_argument("step function needs one more value than knots");
  for (std::size_t k = 1; k < knots.size(); ++k)
    if (!(knots[k] > knots[k - 1]))
      throw std::invalid_argument("step function knots must increase");
}

StepFunction kaplan_meier(std::span<const double> time, std::span<const int> status) {
  if (time.empty()) throw std::invalid_argument("empty sample");
  if (time.size() != status.size()) throw std::invalid_argument("time/status size mismatch");

  std::vector<std::size_t> order(time.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return time[a] < time[b]; });

  StepFunction km;
  km.values.push_back(1.0);
  double surv = 1.0;
  std::size_t at_risk = time.size();
  std::size_t pos = 0;
  while (pos < order.size()) {
    double t = time[order[pos]];
    std::size_t events = 0, total = 0;
    while (pos < order.size() && time[order[pos]] == t) {
      events += status[order[pos]] == 1;
      ++total;
      ++pos;
    }
    if (events > 0) {
      surv *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
      km.knots.push_back(t);
      km.values.push_back(surv);
    }
    at_risk -= total;
  }
  return km;
}

namespace {

std::pair<std::vector<double>, std::vector<int>> unpack(
    std::span<const SurvivalRecord> records) {
  std::vector<double> time(records.size());
  std::vector<int> status(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    time[i] = records[i].time;
    status[i] = records[i].status;
  }
  return {std::move(time), std::move(status)};
}

std::vector<int> flip(std::span<const int> status) {
  std::vector<int> out(status.size());
  for (std::size_t i = 0; i < status.size(); ++i) out[i] = 1 - status[i];
  return out;
}

}  // namespace

StepFunction kaplan_meier(std::span<const SurvivalRecord> records) {
  auto [time, status] = unpack(records);
  return kaplan_meier(time, status);
}

StepFunction censoring_kaplan_meier(std::span<const double> time,
                                    std::span<const int> status) {
  return kaplan_meier(time, flip(status));
}

StepFunction censoring_kaplan_meier(std::span<const SurvivalRecord> records) {
  auto [time, status] = unpack(records);
  return censoring_kaplan_meier(time, status);
}

BrierPoint brier_score(std::span<const double> time, std::span<const int> status,
                       std::span<const double> survival_prob, double t,
                       const StepFunction& cens_km) {
  if (time.empty()) throw std::invalid_argument("empty sample");
  if (time.size() != status.size() || time.size() != survival_prob.size())
    throw std::invalid_argument("brier input size mismatch");

  const double g_t = cens_km(t);
  double sum = 0.0;
  std::size_t n_dropped = 0;
  std::size_t n_defined = 0;  // subjects with a defined (possibly zero) contribution
  for (std::size_t i = 0; i < time.size(); ++i) {
    double s = survival_prob[i];
    if (time[i] <= t && status[i] == 1) {
      double g = cens_km.left_limit(time[i]);
      if (g <= 0.0) {
        ++n_dropped;
        continue;
      }
      sum += s * s / g;
      ++n_defined;
    } else if (time[i] > t) {
      if (g_t <= 0.0) {
        ++n_dropped;
        continue;
      }
      sum += (1.0 - s) * (1.0 - s) / g_t;
      ++n_defined;
    } else {
      ++n_defined;  // censored by t: zero weight by construction
    }
  }
  if (n_defined == 0) throw std::runtime_error("no mass");
  return {sum / static_cast<double>(n_defined), n_dropped};
}

std::vector<double> ibs_grid(std::span<const double> time, std::span<const int> status,
                             double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  std::set<double> events;
  for (std::size_t i = 0; i < time.size(); ++i)
    if (status[i] == 1 && time[i] > 0.0 && time[i] <= tau) events.insert(time[i]);
  if (events.empty()) throw std::runtime_error("no event times below the horizon");
  std::vector<double> grid;
  grid.reserve(events.size() + 1);
  grid.push_back(0.0);
  grid.insert(grid.end(), events.begin(), events.end());
  return grid;
}

BrierResult integrated_brier(std::span<const double> time, std::span<const int> status,
                             const Eigen::MatrixXd& survival,
                             std::span<const double> grid, double tau,
                             const StepFunction& cens_km) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (grid.size() < 2) throw std::invalid_argument("grid needs at least two points");
  if (survival.rows() != static_cast<Eigen::Index>(time.size()) ||
      survival.cols() != static_cast<Eigen::Index>(grid.size()))
    throw std::invalid_argument("survival matrix shape mismatch");

  BrierResult result;
  result.tau = tau;
  result.times.assign(grid.begin(), grid.end());
  result.bs.resize(grid.size());
  result.dropped.resize(grid.size());
  std::vector<double> col(time.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t i = 0; i < time.size(); ++i)
      col[i] = survival(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g));
    BrierPoint point = brier_score(time, status, col, grid[g], cens_km);
    result.bs[g] = point.bs;
    result.dropped[g] = point.n_dropped;
  }

  double integral = 0.0;
  for (std::size_t g = 1; g < grid.size(); ++g)
    integral += 0.5 * (result.bs[g] + result.bs[g - 1]) * (grid[g] - grid[g - 1]);
  result.ibs = integral / tau;
  return result;
}

BrierResult integrated_brier(std::span<const SurvivalRecord> test,
                             const std::function<double(const SurvivalRecord&, double)>& survival,
                             double tau, const StepFunction& cens_km) {
  auto [time, status] = unpack(test);
  std::vector<double> grid = ibs_grid(time, status, tau);
  Eigen::MatrixXd s(test.size(), grid.size());
  for (std::size_t i = 0; i < test.size(); ++i)
    for (std::size_t g = 0; g < grid.size(); ++g)
      s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g)) =
          survival(test[i], grid[g]);
  return integrated_brier(time, status, s, grid, tau, cens_km);
}

double relative_ibs(double model_ibs, double reference_ibs) {
  if (!(reference_ibs > 0.0)) throw std::invalid_argument("reference ibs must be positive");
  return 100.0 * (model_ibs - reference_ibs) / reference_ibs;
}

double quantile_type7(std::vector<double> x, double q) {
  if (x.empty()) throw std::invalid_argument("empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("q must be in [0, 1]");
  std::sort(x.begin(), x.end());
  double h = (static_cast<double>(x.size()) - 1.0) * q;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo]);
}

void save_brier_csv(const BrierResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "t,bs,dropped\n";
  for (std::size_t g = 0; g < result.times.size(); ++g)
    out << format_double(result.times[g]) << ',' << format_double(result.bs[g]) << ','
        << result.dropped[g] << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace deeppam
