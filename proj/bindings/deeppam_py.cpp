#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <optional>
#include <sstream>

#include "deeppam/basis.hpp"
#include "deeppam/experiment.hpp"

#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)

namespace py = pybind11;

namespace {

using namespace deeppam;

ExperimentConfig config_from_file(const std::optional<std::string>& path) {
  if (!path) return {};
  std::ifstream in(*path);
  if (!in) throw std::runtime_error("cannot open file: " + *path);
  return experiment_config_from_json(nlohmann::json::parse(in));
}

std::vector<SurvivalRecord> make_records(const std::vector<double>& time,
                                         const std::vector<int>& status) {
  if (time.size() != status.size())
    throw std::invalid_argument("time and status lengths differ");
  std::vector<SurvivalRecord> records(time.size());
  for (std::size_t i = 0; i < time.size(); ++i) {
    records[i].id = static_cast<std::int64_t>(i) + 1;
    records[i].time = time[i];
    records[i].status = status[i];
  }
  return records;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "piecewise exponential additive models with a point-cloud encoder";

  // ---- pipeline commands ---------------------------------------------------
  m.def(
      "simulate",
      [](const std::string& out_dir, std::uint64_t seed, int n_train, int n_val,
         int n_test, int n_points) {
        SimConfig cfg;
        cfg.seed = seed;
        cfg.n_train = n_train;
        cfg.n_val = n_val;
        cfg.n_test = n_test;
        cfg.n_points = n_points;
        cfg.validate();
        cmd_simulate(cfg, out_dir);
      },
      py::arg("out_dir"), py::arg("seed") = 1, py::arg("n_train") = 1008,
      py::arg("n_val") = 144, py::arg("n_test") = 216, py::arg("n_points") = 1024,
      "Generate and save a synthetic point-cloud survival dataset.");

  m.def(
      "fit",
      [](const std::string& data_dir, const std::string& model, const std::string& out_file,
         std::optional<std::uint64_t> seed, const std::optional<std::string>& config) {
        ExperimentConfig cfg = config_from_file(config);
        if (seed) cfg.train.seed = *seed;
        cmd_fit(data_dir, model, cfg, out_file);
      },
      py::arg("data_dir"), py::arg("model"), py::arg("out_file"),
      py::arg("seed") = std::nullopt, py::arg("config") = std::nullopt,
      "Fit km, pam_baseline, pam_correct, or deeppam on a saved dataset.");

  m.def(
      "evaluate",
      [](const std::string& data_dir, const std::vector<std::string>& model_files,
         const std::string& out_dir, const std::optional<std::string>& config) {
        ExperimentConfig cfg = config_from_file(config);
        std::vector<std::filesystem::path> files(model_files.begin(), model_files.end());
        cmd_evaluate(data_dir, files, cfg, out_dir);
      },
      py::arg("data_dir"), py::arg("model_files"), py::arg("out_dir"),
      py::arg("config") = std::nullopt,
      "Score fitted models on the dataset's test split (needs a pam_correct reference).");

  m.def(
      "experiment",
      [](const std::string& out_dir, std::uint64_t seed, int replicates, int jobs,
         const std::optional<std::vector<std::string>>& models,
         const std::optional<std::string>& config) {
        ExperimentConfig cfg = config_from_file(config);
        cfg.output_dir = out_dir;
        cfg.sim.seed = seed;
        cfg.n_replicates = replicates;
        cfg.jobs = jobs;
        if (models) cfg.models = *models;
        cfg.validate();
        return run_experiment(cfg);
      },
      py::arg("out_dir"), py::arg("seed") = 1, py::arg("replicates") = 10,
      py::arg("jobs") = 1, py::arg("models") = std::nullopt,
      py::arg("config") = std::nullopt,
      "Run the replicated benchmark; returns 0 when every replicate converged.");

  // ---- core numeric operations ----------------------------------------------
  m.def(
      "make_cuts",
      [](const std::vector<double>& time, const std::vector<int>& status,
         const std::string& strategy, int intervals, double t_max) {
        CutStrategy s = strategy == "grid" ? CutStrategy::grid(intervals, t_max)
                                           : CutStrategy::event_times();
        if (strategy != "grid" && strategy != "event-times")
          throw std::invalid_argument("unknown cut strategy: " + strategy);
        return make_cut_points(make_records(time, status), s).cuts;
      },
      py::arg("time"), py::arg("status"), py::arg("strategy") = "event-times",
      py::arg("intervals") = 0, py::arg("t_max") = 0.0,
      "Interval cut points for the given sample.");

  m.def(
      "ped_augment",
      [](const std::vector<double>& time, const std::vector<int>& status,
         const std::vector<double>& cuts) {
        CutPoints cp{cuts};
        cp.validate();
        PedData ped = transform_to_ped(make_records(time, status), cp);
        py::dict out;
        out["id"] = ped.id;
        out["interval"] = ped.interval;
        out["t_j"] = ped.t_j;
        out["t_risk"] = ped.t_risk;
        out["status"] = ped.status;
        return out;
      },
      py::arg("time"), py::arg("status"), py::arg("cuts"),
      "Piecewise exponential augmentation: one row per subject-interval at risk.");

  m.def(
      "bspline_design",
      [](const std::vector<double>& x, double lo, double hi, int degree, int n_basis) {
        SplineSpec spec;
        spec.lo = lo;
        spec.hi = hi;
        spec.degree = degree;
        spec.n_basis = n_basis;
        spec.validate();
        return bspline_design(x, spec);
      },
      py::arg("x"), py::arg("lo"), py::arg("hi"), py::arg("degree") = 3,
      py::arg("n_basis") = 10, "B-spline design matrix on an equidistant knot grid.");

  m.def("difference_penalty", &difference_penalty, py::arg("n_basis"), py::arg("order") = 2,
        "Difference penalty matrix D^T D.");

  m.def(
      "kaplan_meier",
      [](const std::vector<double>& time, const std::vector<int>& status) {
        StepFunction km = kaplan_meier(std::span<const double>(time),
                                       std::span<const int>(status));
        std::vector<double> at_knots(km.values.begin() + 1, km.values.end());
        return py::make_tuple(km.knots, at_knots);
      },
      py::arg("time"), py::arg("status"),
      "Product-limit estimator; returns (times, survival) with survival[k] the "
      "right-continuous value at times[k]; survival is 1 before the first time.");

  m.def(
      "quantile",
      [](std::vector<double> x, double q) { return quantile_type7(std::move(x), q); },
      py::arg("x"), py::arg("q"), "Linear-interpolation sample quantile.");

#ifdef VERSION_INFO
  m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
  m.attr("__version__") = "dev";
#endif
}
