#include "deeppam/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "deeppam/text.hpp"

namespace deeppam {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kKnownModels = {"km", "pam_baseline", "pam_correct",
                                               "deeppam"};

nlohmann::json spline_layout_to_json(const SplineSpec& s) {
  return {{"degree", s.degree}, {"n_basis", s.n_basis}, {"penalty_order", s.penalty_order}};
}

SplineSpec spline_layout_from_json(const nlohmann::json& j, SplineSpec base) {
  base.degree = j.value("degree", base.degree);
  base.n_basis = j.value("n_basis", base.n_basis);
  base.penalty_order = j.value("penalty_order", base.penalty_order);
  return base;
}

nlohmann::json cuts_to_json(const CutStrategy& cuts) {
  if (cuts.kind == CutStrategy::Kind::EventTimes) return {{"strategy", "event-times"}};
  return {{"strategy", "grid"},
          {"intervals", cuts.grid_intervals},
          {"t_max", cuts.grid_t_max}};
}

CutStrategy cuts_from_json(const nlohmann::json& j) {
  const std::string strategy = j.value("strategy", std::string("event-times"));
  if (strategy == "event-times") return CutStrategy::event_times();
  if (strategy == "grid")
    return CutStrategy::grid(j.at("intervals").get<int>(), j.at("t_max").get<double>());
  throw std::invalid_argument("unknown cut strategy: " + strategy);
}

}  // namespace

void ExperimentConfig::validate() const {
  sim.validate();
  train.validate();
  if (n_replicates < 1) throw std::invalid_argument("n_replicates must be at least 1");
  if (jobs < 1) throw std::invalid_argument("jobs must be at least 1");
  if (models.empty()) throw std::invalid_argument("no models requested");
  for (const auto& m : models)
    if (std::find(kKnownModels.begin(), kKnownModels.end(), m) == kKnownModels.end())
      throw std::invalid_argument("unknown model: " + m);
  if (std::find(models.begin(), models.end(), "pam_correct") == models.end())
    throw std::invalid_argument("models must include pam_correct (the relative-IBS reference)");
  if (horizon_quantiles.empty()) throw std::invalid_argument("no horizon quantiles");
  for (double q : horizon_quantiles)
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("horizon quantiles must be in (0, 1)");
  if (!(curve_step > 0.0)) throw std::invalid_argument("curve_step must be positive");
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
  return {{"sim", sim_config_to_json(cfg.sim)},
          {"train", train_config_to_json(cfg.train)},
          {"baseline", spline_layout_to_json(cfg.baseline)},
          {"psi_grid", cfg.psi_grid},
          {"cuts", cuts_to_json(cfg.cuts)},
          {"horizon_quantiles", cfg.horizon_quantiles},
          {"curve_step", cfg.curve_step},
          {"n_replicates", cfg.n_replicates},
          {"jobs", cfg.jobs},
          {"models", cfg.models},
          {"output_dir", cfg.output_dir.string()}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (j.contains("sim")) cfg.sim = sim_config_from_json(j.at("sim"));
  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
  if (j.contains("baseline")) cfg.baseline = spline_layout_from_json(j.at("baseline"), cfg.baseline);
  cfg.psi_grid = j.value("psi_grid", cfg.psi_grid);
  if (j.contains("cuts")) cfg.cuts = cuts_from_json(j.at("cuts"));
  cfg.horizon_quantiles = j.value("horizon_quantiles", cfg.horizon_quantiles);
  cfg.curve_step = j.value("curve_step", cfg.curve_step);
  cfg.n_replicates = j.value("n_replicates", cfg.n_replicates);
  cfg.jobs = j.value("jobs", cfg.jobs);
  cfg.models = j.value("models", cfg.models);
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  cfg.validate();
  return cfg;
}

namespace {

// ---------------------------------------------------------------------------
// Shared fitting/evaluation core
// ---------------------------------------------------------------------------

struct FittedModel {
  std::string label;
  std::optional<PamFit> pam;
  std::optional<DeepPamModel> deep;
  std::optional<StepFunction> km;
  bool converged = true;
};

// Builds the feature vector a design expects, deriving the class dummies
// from the simulation ground truth where required.
std::vector<double> feature_vector(const SurvivalRecord& rec,
                                   const std::vector<std::string>& names) {
  std::vector<double> out;
  out.reserve(names.size());
  for (const auto& name : names) {
    if (name == "d1" || name == "d2") {
      if (!rec.true_class)
        throw std::invalid_argument("record without class label: id " +
                                    std::to_string(rec.id));
      out.push_back(name == "d1" ? (*rec.true_class == 1 ? 1.0 : 0.0)
                                 : (*rec.true_class == 2 ? 1.0 : 0.0));
    } else if (name == "x1" || name == "x2") {
      std::size_t idx = name == "x1" ? 0 : 1;
      if (rec.features.size() <= idx)
        throw std::invalid_argument("record lacks feature " + name);
      out.push_back(rec.features[idx]);
    } else {
      throw std::invalid_argument("unknown feature in design: " + name);
    }
  }
  return out;
}

std::vector<SurvivalRecord> with_class_dummies(std::span<const SurvivalRecord> records) {
  std::vector<SurvivalRecord> out(records.begin(), records.end());
  for (auto& rec : out) {
    if (!rec.true_class)
      throw std::invalid_argument("record without class label: id " + std::to_string(rec.id));
    rec.features.push_back(*rec.true_class == 1 ? 1.0 : 0.0);
    rec.features.push_back(*rec.true_class == 2 ? 1.0 : 0.0);
  }
  return out;
}

const std::vector<std::string> kBaseFeatures = {"x1", "x2"};
const std::vector<std::string> kAugFeatures = {"x1", "x2", "d1", "d2"};

// Per-subject log-hazard curves over the model's intervals (empty for KM).
Eigen::MatrixXd subject_log_hazards(const FittedModel& model,
                                    std::span<const SurvivalRecord> test) {
  if (model.km) return {};
  const DesignInfo& design = model.pam ? model.pam->design : model.deep->design;
  const CutPoints& cuts = model.pam ? model.pam->cuts : model.deep->cuts;
  Eigen::MatrixXd log_h(static_cast<Eigen::Index>(test.size()), cuts.n_intervals());
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::vector<double> features = feature_vector(test[i], design.feature_names);
    if (model.pam) {
      log_h.row(static_cast<Eigen::Index>(i)) = interval_log_hazards(*model.pam, features);
    } else {
      if (!test[i].cloud)
        throw std::invalid_argument("record without cloud: id " + std::to_string(test[i].id));
      log_h.row(static_cast<Eigen::Index>(i)) =
          interval_log_hazards(*model.deep, features, *test[i].cloud);
    }
  }
  return log_h;
}

// S(t) at the grid points for every test subject.
Eigen::MatrixXd survival_matrix(const FittedModel& model, const Eigen::MatrixXd& log_h,
                                std::span<const SurvivalRecord> test,
                                std::span<const double> grid) {
  const auto n = static_cast<Eigen::Index>(test.size());
  const auto G = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd S(n, G);
  if (model.km) {
    for (Eigen::Index g = 0; g < G; ++g)
      S.col(g).setConstant((*model.km)(grid[static_cast<std::size_t>(g)]));
    return S;
  }

  const CutPoints& cuts = model.pam ? model.pam->cuts : model.deep->cuts;
  const int J = cuts.n_intervals();
  Eigen::VectorXd hazard(J), cum(J + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    hazard = log_h.row(i).array().exp();
    cum[0] = 0.0;
    for (int j = 1; j <= J; ++j) cum[j] = cum[j - 1] + hazard[j - 1] * cuts.width(j);
    for (Eigen::Index g = 0; g < G; ++g) {
      double t = grid[static_cast<std::size_t>(g)];
      double lambda;
      if (t <= 0.0) {
        lambda = 0.0;
      } else if (t > cuts.last()) {
        lambda = cum[J] + hazard[J - 1] * (t - cuts.last());
      } else {
        int j = cuts.interval_index(t);
        lambda = cum[j - 1] + hazard[j - 1] * (t - cuts.cuts[static_cast<std::size_t>(j - 1)]);
      }
      S(i, g) = std::exp(-lambda);
    }
  }
  return S;
}

std::vector<double> uncensored_times(std::span<const SurvivalRecord> records) {
  std::vector<double> out;
  for (const auto& rec : records)
    if (rec.status == 1) out.push_back(rec.time);
  return out;
}

void write_results_csv(const std::vector<ModelEval>& evals,
                       std::span<const double> quantiles, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "model,quartile,tau,ibs,rel_ibs,max_dropped\n";
  for (const auto& eval : evals)
    for (std::size_t q = 0; q < eval.tau.size(); ++q)
      out << eval.model << ',' << format_double(quantiles[q]) << ','
          << format_double(eval.tau[q]) << ',' << format_double(eval.ibs[q]) << ','
          << format_double(eval.rel_ibs[q]) << ',' << eval.max_dropped[q] << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_curves_csv(const FittedModel& model, const Eigen::MatrixXd& log_h,
                      std::span<const SurvivalRecord> test, const SimConfig& sim,
                      double curve_step, const fs::path& path) {
  const CutPoints& cuts = model.pam ? model.pam->cuts : model.deep->cuts;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "class,t,q05,median,q95,true_hazard\n";
  for (int cls = 0; cls < 3; ++cls) {
    std::vector<Eigen::Index> members;
    for (std::size_t i = 0; i < test.size(); ++i)
      if (test[i].true_class && *test[i].true_class == cls)
        members.push_back(static_cast<Eigen::Index>(i));
    if (members.empty()) continue;
    for (int k = 0;; ++k) {
      double t = k * curve_step;
      if (t > sim.admin_cens + 1e-9) break;
      int j = cuts.interval_index(std::min(std::max(t, cuts.cuts[1] * 0.5), cuts.last()));
      std::vector<double> values;
      values.reserve(members.size());
      for (Eigen::Index i : members) values.push_back(log_h(i, j - 1));
      out << cls << ',' << format_double(t) << ','
          << format_double(quantile_type7(values, 0.05)) << ','
          << format_double(quantile_type7(values, 0.5)) << ','
          << format_double(quantile_type7(values, 0.95)) << ','
          << format_double(log_hazard_true(sim, t, 0.5, 0.5, cls)) << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Evaluates every fitted model on the test split and writes the per-run
// artifacts.  `evals` comes back in the same order as `models`.
std::vector<ModelEval> evaluate_models(const std::vector<FittedModel>& models,
                                       const Dataset& data,
                                       const ExperimentConfig& cfg,
                                       std::span<const double> horizons,
                                       const fs::path& out_dir) {
  const auto& test = data.test;
  std::vector<double> time(test.size());
  std::vector<int> status(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    time[i] = test[i].time;
    status[i] = test[i].status;
  }
  StepFunction cens_km = censoring_kaplan_meier(data.train);

  const double tau_max = *std::max_element(horizons.begin(), horizons.end());
  std::vector<double> grid = ibs_grid(time, status, tau_max);

  const FittedModel* reference = nullptr;
  for (const auto& m : models)
    if (m.label == "pam_correct") reference = &m;
  if (!reference)
    throw std::invalid_argument("evaluation needs a pam_correct model (the reference)");

  struct PerModel {
    Eigen::MatrixXd log_h;
    std::vector<BrierResult> per_horizon;
  };
  std::vector<PerModel> per_model(models.size());
  std::vector<double> ref_ibs(horizons.size());

  auto evaluate_one = [&](const FittedModel& m, PerModel& slot) {
    slot.log_h = subject_log_hazards(m, test);
    Eigen::MatrixXd S = survival_matrix(m, slot.log_h, test, grid);
    for (std::size_t q = 0; q < horizons.size(); ++q) {
      double tau = horizons[q];
      std::size_t len = 0;
      while (len < grid.size() && grid[len] <= tau) ++len;
      std::span<const double> sub(grid.data(), len);
      slot.per_horizon.push_back(integrated_brier(
          time, status, S.leftCols(static_cast<Eigen::Index>(len)), sub, tau, cens_km));
    }
  };

  // reference first so relative scores are available for everyone
  PerModel ref_slot;
  evaluate_one(*reference, ref_slot);
  for (std::size_t q = 0; q < horizons.size(); ++q) ref_ibs[q] = ref_slot.per_horizon[q].ibs;

  std::vector<ModelEval> evals;
  fs::create_directories(out_dir);
  for (std::size_t k = 0; k < models.size(); ++k) {
    const FittedModel& m = models[k];
    PerModel& slot = per_model[k];
    if (&m == reference)
      slot = ref_slot;
    else
      evaluate_one(m, slot);

    ModelEval eval;
    eval.model = m.label;
    eval.converged = m.converged;
    for (std::size_t q = 0; q < horizons.size(); ++q) {
      const BrierResult& r = slot.per_horizon[q];
      eval.tau.push_back(r.tau);
      eval.ibs.push_back(r.ibs);
      eval.rel_ibs.push_back(relative_ibs(r.ibs, ref_ibs[q]));
      eval.max_dropped.push_back(*std::max_element(r.dropped.begin(), r.dropped.end()));
    }
    evals.push_back(std::move(eval));

    if (!m.km)
      write_curves_csv(m, slot.log_h, test, data.config, cfg.curve_step,
                       out_dir / ("curves_" + m.label + ".csv"));
  }
  write_results_csv(evals, cfg.horizon_quantiles, out_dir / "results.csv");
  return evals;
}

FittedModel fit_model(const std::string& kind, const Dataset& data, const CutPoints& cuts,
                      const ExperimentConfig& cfg, const TrainConfig& train_cfg,
                      const PamFit* warm) {
  FittedModel out;
  out.label = kind;
  if (kind == "km") {
    out.km = kaplan_meier(data.train);
    return out;
  }
  if (kind == "pam_baseline") {
    PedData ped_train = transform_to_ped(data.train, cuts, kBaseFeatures);
    PedData ped_val = transform_to_ped(data.val, cuts, kBaseFeatures);
    out.pam = fit_pam_select_psi(ped_train, ped_val,
                                 StructuredSpec::baseline_linear(kBaseFeatures, cfg.baseline),
                                 cfg.psi_grid);
    out.converged = out.pam->converged;
    return out;
  }
  if (kind == "pam_correct") {
    auto train_aug = with_class_dummies(data.train);
    auto val_aug = with_class_dummies(data.val);
    PedData ped_train = transform_to_ped(train_aug, cuts, kAugFeatures);
    PedData ped_val = transform_to_ped(val_aug, cuts, kAugFeatures);
    out.pam = fit_pam_select_psi(ped_train, ped_val,
                                 StructuredSpec::baseline_linear(kAugFeatures, cfg.baseline),
                                 cfg.psi_grid);
    out.converged = out.pam->converged;
    return out;
  }
  if (kind == "deeppam") {
    if (!warm) throw std::logic_error("deeppam needs a warm start");
    out.deep = fit_deeppam(data.train, data.val,
                           StructuredSpec::baseline_linear(kBaseFeatures, cfg.baseline),
                           train_cfg, *warm);
    return out;
  }
  throw std::invalid_argument("unknown model: " + kind);
}

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

ReplicateResult run_replicate(const ExperimentConfig& cfg, int replicate,
                              const fs::path& out_dir) {
  cfg.validate();
  ReplicateResult result;
  result.replicate = replicate;

  SimConfig sim = cfg.sim;
  sim.seed = cfg.sim.seed + static_cast<std::uint64_t>(replicate);
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = cfg.train.seed + static_cast<std::uint64_t>(replicate);
  result.seed = sim.seed;

  Dataset data = generate_dataset(sim);
  CutPoints cuts = make_cut_points(data.train, cfg.cuts);

  std::vector<double> events = uncensored_times(data.train);
  if (events.empty()) throw std::runtime_error("no events");
  for (double q : cfg.horizon_quantiles)
    result.horizons.push_back(quantile_type7(events, q));

  const bool wants_deep =
      std::find(cfg.models.begin(), cfg.models.end(), "deeppam") != cfg.models.end();
  const bool wants_baseline =
      std::find(cfg.models.begin(), cfg.models.end(), "pam_baseline") != cfg.models.end();

  std::vector<FittedModel> fitted;
  const PamFit* warm = nullptr;
  FittedModel baseline_holder;  // fitted for the warm start even when unlisted
  if (wants_baseline || wants_deep) {
    baseline_holder = fit_model("pam_baseline", data, cuts, cfg, train_cfg, nullptr);
    warm = &*baseline_holder.pam;
  }
  for (const auto& kind : cfg.models) {
    if (kind == "pam_baseline")
      fitted.push_back(baseline_holder);
    else
      fitted.push_back(fit_model(kind, data, cuts, cfg, train_cfg, warm));
  }

  result.models = evaluate_models(fitted, data, cfg, result.horizons, out_dir);
  result.ok = true;
  for (const auto& m : result.models) result.ok = result.ok && m.converged;

  nlohmann::json report;
  report["replicate"] = replicate;
  report["seed"] = sim.seed;
  report["train_seed"] = train_cfg.seed;
  report["horizons"] = result.horizons;
  report["horizon_quantiles"] = cfg.horizon_quantiles;
  report["horizon_quantile_basis"] = "uncensored training event times";
  report["n_intervals"] = cuts.n_intervals();
  auto& models_json = report["models"] = nlohmann::json::array();
  for (std::size_t k = 0; k < fitted.size(); ++k) {
    nlohmann::json m;
    m["model"] = fitted[k].label;
    m["converged"] = fitted[k].converged;
    if (fitted[k].pam) {
      m["psi"] = fitted[k].pam->psi;
      m["n_iter"] = fitted[k].pam->n_iter;
    }
    if (fitted[k].deep) {
      m["best_epoch"] = fitted[k].deep->best_epoch;
      m["epochs_run"] = fitted[k].deep->train_log.back().epoch;
      m["warm_start_hash"] = fitted[k].deep->warm_start_hash;
    }
    m["ibs"] = result.models[k].ibs;
    m["rel_ibs"] = result.models[k].rel_ibs;
    models_json.push_back(std::move(m));
  }
  report["ok"] = result.ok;
  std::ofstream rf(out_dir / "report.json");
  if (!rf) throw std::runtime_error("cannot open for writing: " + (out_dir / "report.json").string());
  rf << report.dump(2) << '\n';
  return result;
}

int run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.output_dir);

  const int R = cfg.n_replicates;
  std::vector<ReplicateResult> results(static_cast<std::size_t>(R));
  auto run_one = [&cfg, &results](int r) {
    fs::path out = cfg.output_dir / ("replicate_" + std::to_string(r));
    try {
      results[static_cast<std::size_t>(r)] = run_replicate(cfg, r, out);
    } catch (const std::exception& e) {
      auto& slot = results[static_cast<std::size_t>(r)];
      slot.replicate = r;
      slot.seed = cfg.sim.seed + static_cast<std::uint64_t>(r);
      slot.ok = false;
      slot.error = e.what();
    }
  };

  if (cfg.jobs <= 1) {
    for (int r = 0; r < R; ++r) run_one(r);
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (int r = next.fetch_add(1); r < R; r = next.fetch_add(1)) run_one(r);
    };
    std::vector<std::thread> pool;
    int n_threads = std::min(cfg.jobs, R);
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int k = 0; k < n_threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // aggregate relative IBS over the replicates that completed
  std::vector<std::string> table_models;
  for (const auto& m : cfg.models)
    if (m != "pam_correct") table_models.push_back(m);

  std::ofstream table(cfg.output_dir / "table2.csv");
  if (!table)
    throw std::runtime_error("cannot open for writing: " +
                             (cfg.output_dir / "table2.csv").string());
  table << "model";
  for (double q : cfg.horizon_quantiles) {
    int pct = static_cast<int>(std::lround(q * 100.0));
    table << ",q" << pct << "_mean,q" << pct << "_sd";
  }
  table << '\n';
  for (const auto& name : table_models) {
    table << name;
    for (std::size_t q = 0; q < cfg.horizon_quantiles.size(); ++q) {
      std::vector<double> values;
      for (const auto& rep : results) {
        if (!rep.ok && rep.models.empty()) continue;
        for (const auto& m : rep.models)
          if (m.model == name && q < m.rel_ibs.size()) values.push_back(m.rel_ibs[q]);
      }
      if (values.empty())
        table << ",nan,nan";
      else
        table << ',' << format_double(mean_of(values)) << ',' << format_double(sd_of(values));
    }
    table << '\n';
  }
  table.close();

  bool all_ok = true;
  nlohmann::json report;
  report["config"] = experiment_config_to_json(cfg);
  auto& reps = report["replicates"] = nlohmann::json::array();
  for (const auto& rep : results) {
    all_ok = all_ok && rep.ok;
    nlohmann::json r;
    r["replicate"] = rep.replicate;
    r["seed"] = rep.seed;
    r["ok"] = rep.ok;
    if (!rep.error.empty()) r["error"] = rep.error;
    reps.push_back(std::move(r));
  }
  report["all_converged"] = all_ok;
  std::ofstream rf(cfg.output_dir / "report.json");
  if (!rf)
    throw std::runtime_error("cannot open for writing: " +
                             (cfg.output_dir / "report.json").string());
  rf << report.dump(2) << '\n';

  return all_ok ? 0 : 2;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_simulate(const SimConfig& cfg, const fs::path& out_dir) {
  Dataset data = generate_dataset(cfg);
  save_dataset(data, out_dir);
}

namespace {

void save_labeled(const std::string& json_text, const std::string& label,
                  const fs::path& path) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  j["label"] = label;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
}

FittedModel load_model_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  nlohmann::json j = nlohmann::json::parse(buf.str());
  const std::string kind = j.at("kind").get<std::string>();

  FittedModel model;
  model.label = j.value("label", kind);
  if (kind == "pam") {
    model.pam = pam_from_json(buf.str());
    model.converged = model.pam->converged;
  } else if (kind == "deeppam") {
    model.deep = deeppam_from_json(buf.str());
  } else if (kind == "km") {
    StepFunction km;
    km.knots = j.at("knots").get<std::vector<double>>();
    km.values = j.at("values").get<std::vector<double>>();
    km.validate();
    model.km = std::move(km);
  } else {
    throw std::invalid_argument("unknown model kind in " + path.string());
  }
  return model;
}

}  // namespace

void cmd_fit(const fs::path& data_dir, const std::string& model_kind,
             const ExperimentConfig& cfg, const fs::path& out_file,
             const std::optional<fs::path>& export_ped_path) {
  if (std::find(kKnownModels.begin(), kKnownModels.end(), model_kind) == kKnownModels.end())
    throw std::invalid_argument("unknown model: " + model_kind);

  Dataset data = load_dataset(data_dir);
  CutPoints cuts = make_cut_points(data.train, cfg.cuts);

  if (export_ped_path) {
    if (model_kind == "pam_correct") {
      auto aug = with_class_dummies(data.train);
      export_ped(transform_to_ped(aug, cuts, kAugFeatures), *export_ped_path);
    } else {
      export_ped(transform_to_ped(data.train, cuts, kBaseFeatures), *export_ped_path);
    }
  }

  if (model_kind == "km") {
    StepFunction km = kaplan_meier(data.train);
    nlohmann::json j{{"kind", "km"}, {"knots", km.knots}, {"values", km.values}};
    save_labeled(j.dump(), "km", out_file);
    return;
  }
  if (model_kind == "deeppam") {
    FittedModel warm = fit_model("pam_baseline", data, cuts, cfg, cfg.train, nullptr);
    FittedModel deep = fit_model("deeppam", data, cuts, cfg, cfg.train, &*warm.pam);
    save_labeled(deeppam_to_json(*deep.deep), "deeppam", out_file);
    fs::path log_path = out_file;
    log_path += ".train_log.csv";
    save_train_log_csv(*deep.deep, log_path);
    return;
  }
  FittedModel fitted = fit_model(model_kind, data, cuts, cfg, cfg.train, nullptr);
  save_labeled(pam_to_json(*fitted.pam), model_kind, out_file);
}

void cmd_evaluate(const fs::path& data_dir, const std::vector<fs::path>& model_files,
                  const ExperimentConfig& cfg, const fs::path& out_dir) {
  Dataset data = load_dataset(data_dir);
  std::vector<FittedModel> models;
  models.reserve(model_files.size());
  for (const auto& file : model_files) models.push_back(load_model_file(file));

  std::vector<double> events = uncensored_times(data.train);
  if (events.empty()) throw std::runtime_error("no events");
  std::vector<double> horizons;
  for (double q : cfg.horizon_quantiles) horizons.push_back(quantile_type7(events, q));

  std::vector<ModelEval> evals = evaluate_models(models, data, cfg, horizons, out_dir);

  nlohmann::json report;
  report["horizons"] = horizons;
  report["horizon_quantiles"] = cfg.horizon_quantiles;
  report["horizon_quantile_basis"] = "uncensored training event times";
  auto& models_json = report["models"] = nlohmann::json::array();
  for (const auto& eval : evals) {
    models_json.push_back({{"model", eval.model},
                           {"converged", eval.converged},
                           {"ibs", eval.ibs},
                           {"rel_ibs", eval.rel_ibs},
                           {"max_dropped", eval.max_dropped}});
  }
  std::ofstream rf(out_dir / "report.json");
  if (!rf) throw std::runtime_error("cannot open for writing: " + (out_dir / "report.json").string());
  rf << report.dump(2) << '\n';
}

}  // namespace deeppam
