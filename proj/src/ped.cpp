#include "deeppam/ped.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "deeppam/text.hpp"

namespace deeppam {

int CutPoints::interval_index(double t) const {
  // first j with t <= kappa_j; intervals are (kappa_{j-1}, kappa_j]
  auto it = std::lower_bound(cuts.begin() + 1, cuts.end(), t);
  if (it == cuts.end()) return n_intervals();
  return static_cast<int>(it - cuts.begin());
}

void CutPoints::validate() const {
  if (cuts.size() < 2) throw std::invalid_argument("cut points: need at least one interval");
  if (cuts.front() != 0.0) throw std::invalid_argument("cut points: first cut must be 0");
  for (std::size_t k = 1; k < cuts.size(); ++k)
    if (!(cuts[k] > cuts[k - 1]))
      throw std::invalid_argument("cut points: not strictly increasing");
}

PedRow PedData::row(std::size_t r) const {
  PedRow out{id[r], interval[r], t_j[r], t_risk[r], status[r], {}};
  out.features.resize(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index c = 0; c < features.cols(); ++c)
    out.features[static_cast<std::size_t>(c)] = features(static_cast<Eigen::Index>(r), c);
  return out;
}

double PedData::total_events() const {
  return std::accumulate(status.begin(), status.end(), 0.0);
}

double PedData::total_exposure() const {
  return std::accumulate(t_risk.begin(), t_risk.end(), 0.0);
}

CutPoints make_cut_points(std::span<const SurvivalRecord> records,
                          const CutStrategy& strategy) {
  CutPoints out;
  if (strategy.kind == CutStrategy::Kind::Grid) {
    if (strategy.grid_intervals <= 0 || !(strategy.grid_t_max > 0.0))
      throw std::invalid_argument("invalid grid");
    out.cuts.resize(static_cast<std::size_t>(strategy.grid_intervals) + 1);
    for (int k = 0; k <= strategy.grid_intervals; ++k)
      out.cuts[static_cast<std::size_t>(k)] =
          strategy.grid_t_max * static_cast<double>(k) / strategy.grid_intervals;
    out.cuts.front() = 0.0;
    out.validate();
    return out;
  }
  std::set<double> times;
  for (const auto& rec : records)
    if (rec.status == 1) times.insert(rec.time);
  if (times.empty()) throw std::invalid_argument("no events");
  out.cuts.reserve(times.size() + 1);
  out.cuts.push_back(0.0);
  out.cuts.insert(out.cuts.end(), times.begin(), times.end());
  out.validate();
  return out;
}

PedData transform_to_ped(std::span<const SurvivalRecord> records,
                         const CutPoints& cuts,
                         std::vector<std::string> feature_names) {
  cuts.validate();
  const std::size_t n_features = records.empty() ? feature_names.size()
                                                 : records.front().features.size();
  if (feature_names.empty()) {
    feature_names.resize(n_features);
    for (std::size_t p = 0; p < n_features; ++p)
      feature_names[p] = "x" + std::to_string(p + 1);
  }
  if (feature_names.size() != n_features)
    throw std::invalid_argument("feature name count does not match feature count");

  // pass 1: row count
  std::size_t total_rows = 0;
  for (const auto& rec : records) {
    if (!(rec.time > 0.0)) throw std::invalid_argument("nonpositive time");
    if (rec.features.size() != n_features)
      throw std::invalid_argument("inconsistent feature count across records");
    total_rows += static_cast<std::size_t>(
        cuts.interval_index(std::min(rec.time, cuts.last())));
  }

  PedData ped;
  ped.cuts = cuts;
  ped.feature_names = std::move(feature_names);
  ped.id.reserve(total_rows);
  ped.interval.reserve(total_rows);
  ped.t_j.reserve(total_rows);
  ped.t_risk.reserve(total_rows);
  ped.status.reserve(total_rows);
  ped.features.resize(static_cast<Eigen::Index>(total_rows),
                      static_cast<Eigen::Index>(n_features));
  ped.subject_spans.reserve(records.size());

  std::size_t r = 0;
  for (const auto& rec : records) {
    const bool truncated = rec.time > cuts.last();
    const double t_end = truncated ? cuts.last() : rec.time;
    const int last_status = truncated ? 0 : rec.status;
    const int j_last = cuts.interval_index(t_end);
    const std::size_t begin = r;
    for (int j = 1; j <= j_last; ++j) {
      ped.id.push_back(rec.id);
      ped.interval.push_back(j);
      ped.t_j.push_back(cuts.cuts[static_cast<std::size_t>(j)]);
      const bool is_last = (j == j_last);
      ped.t_risk.push_back(is_last ? t_end - cuts.cuts[static_cast<std::size_t>(j - 1)]
                                   : cuts.width(j));
      ped.status.push_back(is_last ? last_status : 0);
      for (std::size_t p = 0; p < n_features; ++p)
        ped.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p)) =
            rec.features[p];
      ++r;
    }
    ped.subject_spans.emplace_back(begin, r);
  }
  return ped;
}

void export_ped(const PedData& ped, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());

  out << "id,j,t_j,t_risk,status";
  for (const auto& name : ped.feature_names) out << ',' << name;
  out << '\n';

  std::vector<std::size_t> order(ped.n_rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ped.id[a] != ped.id[b]) return ped.id[a] < ped.id[b];
    return ped.interval[a] < ped.interval[b];
  });

  for (std::size_t r : order) {
    out << ped.id[r] << ',' << ped.interval[r] << ',' << format_double(ped.t_j[r])
        << ',' << format_double(ped.t_risk[r]) << ',' << ped.status[r];
    for (Eigen::Index c = 0; c < ped.features.cols(); ++c)
      out << ',' << format_double(ped.features(static_cast<Eigen::Index>(r), c));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

PedData import_ped(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty PED file: " + path.string());

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 5 || header[0] != "id")
    throw std::runtime_error("unexpected PED header in " + path.string());
  const std::size_t n_features = header.size() - 5;

  PedData ped;
  ped.feature_names.assign(header.begin() + 5, header.end());

  std::vector<std::vector<double>> feat_rows;
  std::set<double> tj_values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size())
      throw std::runtime_error("ragged PED row in " + path.string());
    ped.id.push_back(std::stoll(cells[0]));
    ped.interval.push_back(std::stoi(cells[1]));
    ped.t_j.push_back(std::stod(cells[2]));
    ped.t_risk.push_back(std::stod(cells[3]));
    ped.status.push_back(std::stoi(cells[4]));
    tj_values.insert(ped.t_j.back());
    std::vector<double> feats(n_features);
    for (std::size_t p = 0; p < n_features; ++p) feats[p] = std::stod(cells[5 + p]);
    feat_rows.push_back(std::move(feats));
  }

  ped.features.resize(static_cast<Eigen::Index>(feat_rows.size()),
                      static_cast<Eigen::Index>(n_features));
  for (std::size_t r = 0; r < feat_rows.size(); ++r)
    for (std::size_t p = 0; p < n_features; ++p)
      ped.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p)) =
          feat_rows[r][p];

  ped.cuts.cuts.push_back(0.0);
  ped.cuts.cuts.insert(ped.cuts.cuts.end(), tj_values.begin(), tj_values.end());

  // subject spans: rows are sorted by (id, j) on export
  std::size_t begin = 0;
  for (std::size_t r = 1; r <= ped.n_rows(); ++r) {
    if (r == ped.n_rows() || ped.id[r] != ped.id[begin]) {
      ped.subject_spans.emplace_back(begin, r);
      begin = r;
    }
  }
  return ped;
}

}  // namespace deeppam
