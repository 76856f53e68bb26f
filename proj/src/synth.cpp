#include "deeppam/synth.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "deeppam/text.hpp"

namespace deeppam {

namespace {

constexpr double kCylinderRadius = 0.6;
constexpr double kCylinderHalfHeight = 1.0;

void sphere_point(Rng& rng, double* p) {
  double z = rng.uniform(-1.0, 1.0);
  double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  p[0] = r * std::cos(phi);
  p[1] = r * std::sin(phi);
  p[2] = z;
}

void cube_point(Rng& rng, double* p) {
  // six faces of equal area; axis = face / 2, sign from face parity
  std::uint64_t face = rng.below(6);
  double u = rng.uniform(-1.0, 1.0);
  double v = rng.uniform(-1.0, 1.0);
  int axis = static_cast<int>(face / 2);
  double sign = (face % 2 == 0) ? 1.0 : -1.0;
  p[axis] = sign;
  p[(axis + 1) % 3] = u;
  p[(axis + 2) % 3] = v;
}

void cylinder_point(Rng& rng, double* p) {
  // surface areas: lateral 2*pi*r*h vs two caps 2*pi*r^2
  const double lateral_fraction =
      2.0 * kCylinderHalfHeight / (2.0 * kCylinderHalfHeight + kCylinderRadius);
  if (rng.uniform() < lateral_fraction) {
    double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    p[0] = kCylinderRadius * std::cos(phi);
    p[1] = kCylinderRadius * std::sin(phi);
    p[2] = rng.uniform(-kCylinderHalfHeight, kCylinderHalfHeight);
  } else {
    double z = (rng.below(2) == 0) ? kCylinderHalfHeight : -kCylinderHalfHeight;
    double rho = kCylinderRadius * std::sqrt(rng.uniform());
    double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    p[0] = rho * std::cos(phi);
    p[1] = rho * std::sin(phi);
    p[2] = z;
  }
}

}  // namespace

void SimConfig::validate() const {
  if (n_train <= 0 || n_val <= 0 || n_test <= 0)
    throw std::invalid_argument("sample sizes must be positive");
  if (n_points <= 0) throw std::invalid_argument("n_points must be positive");
  if (!(cens_rate >= 0.0)) throw std::invalid_argument("cens_rate must be nonnegative");
  if (!(admin_cens > 0.0)) throw std::invalid_argument("admin_cens must be positive");
  if (!(noise_halfwidth >= 0.0))
    throw std::invalid_argument("noise_halfwidth must be nonnegative");
  if (!(grid_step > 0.0)) throw std::invalid_argument("grid_step must be positive");
}

nlohmann::json sim_config_to_json(const SimConfig& cfg) {
  return {{"n_train", cfg.n_train},
          {"n_val", cfg.n_val},
          {"n_test", cfg.n_test},
          {"n_points", cfg.n_points},
          {"beta", {cfg.beta1, cfg.beta2}},
          {"gamma", {cfg.gamma1, cfg.gamma2}},
          {"baseline_coefs", {cfg.base_level, cfg.base_curv, cfg.base_center}},
          {"admin_cens", cfg.admin_cens},
          {"cens_rate", cfg.cens_rate},
          {"noise_halfwidth", cfg.noise_halfwidth},
          {"grid_step", cfg.grid_step},
          {"seed", cfg.seed}};
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig cfg;
  cfg.n_train = j.value("n_train", cfg.n_train);
  cfg.n_val = j.value("n_val", cfg.n_val);
  cfg.n_test = j.value("n_test", cfg.n_test);
  cfg.n_points = j.value("n_points", cfg.n_points);
  if (j.contains("beta")) {
    cfg.beta1 = j.at("beta").at(0).get<double>();
    cfg.beta2 = j.at("beta").at(1).get<double>();
  }
  if (j.contains("gamma")) {
    cfg.gamma1 = j.at("gamma").at(0).get<double>();
    cfg.gamma2 = j.at("gamma").at(1).get<double>();
  }
  if (j.contains("baseline_coefs")) {
    cfg.base_level = j.at("baseline_coefs").at(0).get<double>();
    cfg.base_curv = j.at("baseline_coefs").at(1).get<double>();
    cfg.base_center = j.at("baseline_coefs").at(2).get<double>();
  }
  cfg.admin_cens = j.value("admin_cens", cfg.admin_cens);
  cfg.cens_rate = j.value("cens_rate", cfg.cens_rate);
  cfg.noise_halfwidth = j.value("noise_halfwidth", cfg.noise_halfwidth);
  cfg.grid_step = j.value("grid_step", cfg.grid_step);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

CloudMatrix sample_shape(int class_id, int n_points, Rng& rng) {
  if (class_id < 0 || class_id > 2) throw std::invalid_argument("class_id must be 0, 1, or 2");
  if (n_points <= 0) throw std::invalid_argument("n_points must be positive");
  CloudMatrix cloud(n_points, 3);
  double p[3];
  for (int i = 0; i < n_points; ++i) {
    switch (class_id) {
      case 0: sphere_point(rng, p); break;
      case 1: cube_point(rng, p); break;
      default: cylinder_point(rng, p); break;
    }
    cloud(i, 0) = p[0];
    cloud(i, 1) = p[1];
    cloud(i, 2) = p[2];
  }
  return cloud;
}

void jitter_cloud(CloudMatrix& cloud, double halfwidth, Rng& rng) {
  if (halfwidth == 0.0) return;
  for (Eigen::Index i = 0; i < cloud.rows(); ++i)
    for (Eigen::Index c = 0; c < 3; ++c)
      cloud(i, c) += rng.uniform(-halfwidth, halfwidth);
}

void normalize_cloud(CloudMatrix& cloud) {
  if (cloud.rows() == 0) return;
  Eigen::RowVector3d centroid = cloud.colwise().mean();
  cloud.rowwise() -= centroid;
  double max_norm = cloud.rowwise().norm().maxCoeff();
  if (max_norm > 0.0) cloud /= max_norm;
}

CloudMatrix generate_cloud(int class_id, int n_points, double noise_halfwidth, Rng& rng) {
  CloudMatrix cloud = sample_shape(class_id, n_points, rng);
  jitter_cloud(cloud, noise_halfwidth, rng);
  normalize_cloud(cloud);
  return cloud;
}

double log_hazard_true(const SimConfig& cfg, double t, double x1, double x2, int class_id) {
  double dt = t - cfg.base_center;
  double eta = cfg.base_level + cfg.base_curv * dt * dt + cfg.beta1 * x1 + cfg.beta2 * x2;
  if (class_id == 1) eta += cfg.gamma1;
  if (class_id == 2) eta += cfg.gamma2;
  return eta;
}

double hazard_true(const SimConfig& cfg, double t, double x1, double x2, int class_id) {
  return std::exp(log_hazard_true(cfg, t, x1, x2, class_id));
}

std::pair<double, int> simulate_time(const SimConfig& cfg, double x1, double x2,
                                     int class_id, Rng& rng) {
  const double target = rng.exponential(1.0);
  const double censor = cfg.cens_rate > 0.0
                            ? rng.exponential(cfg.cens_rate)
                            : std::numeric_limits<double>::infinity();

  // invert the cumulative hazard of the midpoint-rule step approximation
  double event = std::numeric_limits<double>::infinity();
  double cum = 0.0;
  const int n_cells = static_cast<int>(std::ceil(cfg.admin_cens / cfg.grid_step));
  for (int k = 0; k < n_cells; ++k) {
    double lo = k * cfg.grid_step;
    double hi = std::min(lo + cfg.grid_step, cfg.admin_cens);
    double h = hazard_true(cfg, 0.5 * (lo + hi), x1, x2, class_id);
    double cell = h * (hi - lo);
    if (cum + cell >= target) {
      event = lo + (target - cum) / h;
      break;
    }
    cum += cell;
  }

  double time = std::min({event, censor, cfg.admin_cens});
  int status = event <= std::min(censor, cfg.admin_cens) ? 1 : 0;
  return {time, status};
}

Dataset generate_dataset(const SimConfig& cfg) {
  cfg.validate();
  Dataset dataset;
  dataset.config = cfg;

  auto make_record = [&cfg](std::int64_t global_index) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(global_index)));
    SurvivalRecord rec;
    rec.id = global_index + 1;
    int class_id = static_cast<int>(rng.below(3));
    double x1 = rng.uniform();
    double x2 = rng.uniform();
    rec.cloud = generate_cloud(class_id, cfg.n_points, 0.0, rng);
    auto [time, status] = simulate_time(cfg, x1, x2, class_id, rng);
    rec.time = time;
    rec.status = status;
    rec.features = {x1, x2};
    rec.true_class = class_id;
    return rec;
  };

  std::int64_t index = 0;
  dataset.train.reserve(static_cast<std::size_t>(cfg.n_train));
  for (int i = 0; i < cfg.n_train; ++i) dataset.train.push_back(make_record(index++));
  dataset.val.reserve(static_cast<std::size_t>(cfg.n_val));
  for (int i = 0; i < cfg.n_val; ++i) dataset.val.push_back(make_record(index++));
  dataset.test.reserve(static_cast<std::size_t>(cfg.n_test));
  for (int i = 0; i < cfg.n_test; ++i) dataset.test.push_back(make_record(index++));
  return dataset;
}

namespace {

void write_split_csv(const std::vector<SurvivalRecord>& records,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "id,time,status,x1,x2,true_class\n";
  for (const auto& rec : records) {
    if (rec.features.size() != 2)
      throw std::invalid_argument("benchmark records carry exactly two features");
    out << rec.id << ',' << format_double(rec.time) << ',' << rec.status << ','
        << format_double(rec.features[0]) << ',' << format_double(rec.features[1]) << ','
        << rec.true_class.value_or(-1) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<SurvivalRecord> read_split_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "id,time,status,x1,x2,true_class")
    throw std::runtime_error("unexpected header in " + path.string());
  std::vector<SurvivalRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != 6) throw std::runtime_error("ragged row in " + path.string());
    SurvivalRecord rec;
    rec.id = std::stoll(cells[0]);
    rec.time = std::stod(cells[1]);
    rec.status = std::stoi(cells[2]);
    rec.features = {std::stod(cells[3]), std::stod(cells[4])};
    int cls = std::stoi(cells[5]);
    if (cls >= 0) rec.true_class = cls;
    records.push_back(std::move(rec));
  }
  return records;
}

void write_cloud(const CloudMatrix& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    double row[3] = {cloud(i, 0), cloud(i, 1), cloud(i, 2)};
    out.write(reinterpret_cast<const char*>(row), sizeof(row));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

CloudMatrix read_cloud(const std::filesystem::path& path, int n_points) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  CloudMatrix cloud(n_points, 3);
  for (int i = 0; i < n_points; ++i) {
    double row[3];
    in.read(reinterpret_cast<char*>(row), sizeof(row));
    if (!in) throw std::runtime_error("truncated cloud file: " + path.string());
    cloud(i, 0) = row[0];
    cloud(i, 1) = row[1];
    cloud(i, 2) = row[2];
  }
  return cloud;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "clouds");

  nlohmann::json manifest;
  manifest["config"] = sim_config_to_json(dataset.config);
  manifest["splits"] = {
      {"train", {{"file", "train.csv"}, {"n", dataset.train.size()}}},
      {"val", {{"file", "val.csv"}, {"n", dataset.val.size()}}},
      {"test", {{"file", "test.csv"}, {"n", dataset.test.size()}}}};
  manifest["clouds"] = {{"dir", "clouds"},
                        {"format", "float64-le-row-major"},
                        {"n_points", dataset.config.n_points}};
  std::ofstream mf(dir / "manifest.json");
  if (!mf) throw std::runtime_error("cannot open for writing: " + (dir / "manifest.json").string());
  mf << manifest.dump(2) << '\n';

  write_split_csv(dataset.train, dir / "train.csv");
  write_split_csv(dataset.val, dir / "val.csv");
  write_split_csv(dataset.test, dir / "test.csv");
  for (const auto* split : {&dataset.train, &dataset.val, &dataset.test})
    for (const auto& rec : *split) {
      if (!rec.cloud) throw std::invalid_argument("record without cloud cannot be saved");
      write_cloud(*rec.cloud, dir / "clouds" / (std::to_string(rec.id) + ".bin"));
    }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw std::runtime_error("cannot open for reading: " + (dir / "manifest.json").string());
  nlohmann::json manifest = nlohmann::json::parse(mf);

  Dataset dataset;
  dataset.config = sim_config_from_json(manifest.at("config"));
  const int n_points = manifest.at("clouds").at("n_points").get<int>();
  const std::filesystem::path clouds =
      dir / manifest.at("clouds").at("dir").get<std::string>();

  auto load_split = [&](const char* name) {
    auto file = manifest.at("splits").at(name).at("file").get<std::string>();
    auto records = read_split_csv(dir / file);
    for (auto& rec : records)
      rec.cloud = read_cloud(clouds / (std::to_string(rec.id) + ".bin"), n_points);
    return records;
  };
  dataset.train = load_split("train");
  dataset.val = load_split("val");
  dataset.test = load_split("test");
  return dataset;
}

}  // namespace deeppam
