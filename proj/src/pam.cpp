#include "deeppam/pam.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "deeppam/json_util.hpp"
#include "deeppam/model_io.hpp"

namespace deeppam {

namespace {

int find_feature(const std::vector<std::string>& names, const std::string& feature) {
  auto it = std::find(names.begin(), names.end(), feature);
  if (it == names.end())
    throw std::invalid_argument("unknown feature: " + feature);
  return static_cast<int>(it - names.begin());
}

std::pair<double, double> column_range(const Eigen::MatrixXd& features, int col) {
  if (features.rows() == 0) throw std::invalid_argument("empty data");
  return {features.col(col).minCoeff(), features.col(col).maxCoeff()};
}

// Freezes one spline block: range, centering transform, centered penalty.
DesignBlock make_spline_block(BlockKind kind, const std::string& feature,
                              int feature_index, SplineSpec spline, double lo,
                              double hi, std::span<const double> x) {
  spline.lo = lo;
  spline.hi = hi;
  spline.validate();
  DesignBlock block;
  block.kind = kind;
  block.feature = feature;
  block.feature_index = feature_index;
  block.spline = spline;
  Eigen::MatrixXd basis = bspline_design(x, spline);
  auto [centered, Z] = center_constraint(basis);
  (void)centered;
  block.Z = Z;
  Eigen::MatrixXd S = difference_penalty(spline.n_basis, spline.penalty_order);
  block.penalty = Z.transpose() * S * Z;
  block.n_cols = static_cast<int>(Z.cols());
  return block;
}

double penalty_value(const Eigen::VectorXd& w, std::span<const double> psi,
                     const DesignInfo& info) {
  double val = 0.0;
  for (const auto& block : info.blocks) {
    if (block.psi_index < 0) continue;
    auto theta = w.segment(block.col_start, block.n_cols);
    val += psi[static_cast<std::size_t>(block.psi_index)] *
           theta.dot(block.penalty * theta);
  }
  return val;
}

void add_penalty_gradient(Eigen::VectorXd& g, const Eigen::VectorXd& w,
                          std::span<const double> psi, const DesignInfo& info) {
  for (const auto& block : info.blocks) {
    if (block.psi_index < 0) continue;
    auto theta = w.segment(block.col_start, block.n_cols);
    g.segment(block.col_start, block.n_cols) +=
        2.0 * psi[static_cast<std::size_t>(block.psi_index)] * (block.penalty * theta);
  }
}

void add_penalty_hessian(Eigen::MatrixXd& H, std::span<const double> psi,
                         const DesignInfo& info) {
  for (const auto& block : info.blocks) {
    if (block.psi_index < 0) continue;
    H.block(block.col_start, block.col_start, block.n_cols, block.n_cols) +=
        2.0 * psi[static_cast<std::size_t>(block.psi_index)] * block.penalty;
  }
}

void check_psi(std::span<const double> psi, const DesignInfo& info) {
  if (static_cast<int>(psi.size()) != info.n_psi)
    throw std::invalid_argument("psi count does not match the number of penalized terms");
  for (double p : psi)
    if (!(p >= 0.0)) throw std::invalid_argument("psi must be nonnegative");
}

struct NewtonResult {
  Eigen::VectorXd w;
  bool converged = false;
  double objective = 0.0;  // penalized nll at w, unclamped
  int n_iter = 0;
};

double clamped_objective(const Eigen::VectorXd& eta, const Eigen::VectorXd& t,
                         const Eigen::VectorXd& delta, const Eigen::VectorXd& w,
                         std::span<const double> psi, const DesignInfo& info,
                         double clamp) {
  Eigen::VectorXd etac = eta.cwiseMax(-clamp).cwiseMin(clamp);
  return poisson_nll(etac, t, delta) + penalty_value(w, psi, info);
}

NewtonResult newton_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& t,
                        const Eigen::VectorXd& delta, std::span<const double> psi,
                        const DesignInfo& info, const FitOptions& opts,
                        Eigen::VectorXd w) {
  check_psi(psi, info);
  if (delta.sum() <= 0.0) throw std::invalid_argument("no events");
  if (w.size() == 0) w = Eigen::VectorXd::Zero(X.cols());
  if (w.size() != X.cols()) throw std::invalid_argument("start value size mismatch");

  const double clamp = opts.eta_clamp;
  Eigen::VectorXd eta = X * w;
  double obj = clamped_objective(eta, t, delta, w, psi, info, clamp);

  NewtonResult out;
  out.converged = false;
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    out.n_iter = iter;
    Eigen::VectorXd etac = eta.cwiseMax(-clamp).cwiseMin(clamp);
    Eigen::VectorXd mu = t.array() * etac.array().exp();
    Eigen::VectorXd grad = X.transpose() * (mu - delta);
    add_penalty_gradient(grad, w, psi, info);
    if (grad.norm() < opts.grad_tol) {
      out.n_iter = iter - 1;
      out.converged = true;
      break;
    }

    Eigen::MatrixXd H = X.transpose() * (mu.asDiagonal() * X);
    add_penalty_hessian(H, psi, info);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    Eigen::VectorXd p = ldlt.solve(-grad);
    if (ldlt.info() != Eigen::Success || !p.allFinite()) {
      H.diagonal().array() += 1e-8;
      ldlt.compute(H);
      p = ldlt.solve(-grad);
      if (ldlt.info() != Eigen::Success || !p.allFinite())
        throw std::runtime_error("fitting error: Hessian is singular");
    }

    Eigen::VectorXd Xp = X * p;
    double alpha = 1.0;
    double new_obj = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int half = 0; half < 60; ++half) {
      Eigen::VectorXd eta_try = eta + alpha * Xp;
      Eigen::VectorXd w_try = w + alpha * p;
      new_obj = clamped_objective(eta_try, t, delta, w_try, psi, info, clamp);
      if (std::isfinite(new_obj) && new_obj <= obj) {
        accepted = true;
        w = std::move(w_try);
        eta = std::move(eta_try);
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // no step improves: at the numerical floor

    double rel = std::abs(obj - new_obj) / (1.0 + std::abs(new_obj));
    obj = new_obj;
    if (rel < opts.rel_tol) {
      out.converged = true;
      break;
    }
  }

  out.w = std::move(w);
  out.objective = poisson_nll(X * out.w, t, delta) + penalty_value(out.w, psi, info);
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd status_vector(const std::vector<int>& status) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(status.size()));
  for (Eigen::Index r = 0; r < d.size(); ++r) d[r] = status[static_cast<std::size_t>(r)];
  return d;
}

PamFit make_fit(const StructuredSpec& spec, const Design& design, const CutPoints& cuts,
                NewtonResult&& core, std::vector<double> psi) {
  PamFit fit;
  fit.spec = spec;
  fit.design = design.info;
  fit.cuts = cuts;
  fit.w = std::move(core.w);
  fit.psi = std::move(psi);
  fit.converged = core.converged;
  fit.final_penalized_nll = core.objective;
  fit.n_iter = core.n_iter;
  return fit;
}

}  // namespace

void StructuredSpec::validate() const {
  int n_intercept = 0, n_baseline = 0;
  for (const auto& term : terms) {
    if (std::holds_alternative<TermIntercept>(term)) ++n_intercept;
    if (std::holds_alternative<TermBaseline>(term)) ++n_baseline;
  }
  if (n_intercept != 1) throw std::invalid_argument("model needs exactly one intercept");
  if (n_baseline != 1) throw std::invalid_argument("model needs exactly one baseline term");
}

StructuredSpec StructuredSpec::baseline_linear(const std::vector<std::string>& linear_features,
                                               SplineSpec baseline) {
  StructuredSpec spec;
  spec.terms.emplace_back(TermIntercept{});
  spec.terms.emplace_back(TermBaseline{baseline});
  for (const auto& f : linear_features) spec.terms.emplace_back(TermLinear{f});
  return spec;
}

Design build_design(const PedData& ped, const StructuredSpec& spec) {
  spec.validate();
  if (ped.n_rows() == 0) throw std::invalid_argument("empty data");

  DesignInfo info;
  info.feature_names = ped.feature_names;

  auto add_block = [&info](DesignBlock block) {
    block.col_start = info.n_cols;
    info.n_cols += block.n_cols;
    info.blocks.push_back(std::move(block));
  };

  DesignBlock intercept;
  intercept.kind = BlockKind::Intercept;
  intercept.n_cols = 1;
  add_block(std::move(intercept));

  // canonical column order: intercept, baseline, linear terms, smooths
  for (const auto& term : spec.terms) {
    if (const auto* bl = std::get_if<TermBaseline>(&term)) {
      if (bl->spline.n_basis <= 1) continue;  // constant baseline: intercept only
      double lo = ped.cuts.cuts[1];
      double hi = ped.cuts.last();
      if (!(hi > lo))
        throw std::invalid_argument("baseline spline needs at least two intervals");
      DesignBlock block = make_spline_block(BlockKind::Baseline, "", -1, bl->spline,
                                            lo, hi, std::span<const double>(ped.t_j));
      block.psi_index = info.n_psi++;
      add_block(std::move(block));
    }
  }
  for (const auto& term : spec.terms) {
    if (const auto* lin = std::get_if<TermLinear>(&term)) {
      DesignBlock block;
      block.kind = BlockKind::Linear;
      block.feature = lin->feature;
      block.feature_index = find_feature(ped.feature_names, lin->feature);
      block.n_cols = 1;
      add_block(std::move(block));
    }
  }
  for (const auto& term : spec.terms) {
    if (const auto* sm = std::get_if<TermSmooth>(&term)) {
      if (sm->spline.n_basis <= 1) continue;
      int idx = find_feature(ped.feature_names, sm->feature);
      auto [lo, hi] = column_range(ped.features, idx);
      if (!(hi > lo))
        throw std::invalid_argument("smooth term over a constant feature: " + sm->feature);
      std::span<const double> x(ped.features.col(idx).data(), ped.n_rows());
      DesignBlock block =
          make_spline_block(BlockKind::Smooth, sm->feature, idx, sm->spline, lo, hi, x);
      block.psi_index = info.n_psi++;
      add_block(std::move(block));
    }
  }

  Design design;
  design.X = assemble_design(info, ped);
  design.info = std::move(info);
  return design;
}

Eigen::MatrixXd assemble_design(const DesignInfo& info, const PedData& ped) {
  const auto n = static_cast<Eigen::Index>(ped.n_rows());
  Eigen::MatrixXd X(n, info.n_cols);
  for (const auto& block : info.blocks) {
    switch (block.kind) {
      case BlockKind::Intercept:
        X.col(block.col_start).setOnes();
        break;
      case BlockKind::Baseline:
        X.middleCols(block.col_start, block.n_cols).noalias() =
            bspline_design(std::span<const double>(ped.t_j), block.spline) * block.Z;
        break;
      case BlockKind::Linear: {
        int idx = find_feature(ped.feature_names, block.feature);
        X.col(block.col_start) = ped.features.col(idx);
        break;
      }
      case BlockKind::Smooth: {
        int idx = find_feature(ped.feature_names, block.feature);
        std::span<const double> x(ped.features.col(idx).data(), ped.n_rows());
        X.middleCols(block.col_start, block.n_cols).noalias() =
            bspline_design(x, block.spline) * block.Z;
        break;
      }
    }
  }
  return X;
}

Eigen::RowVectorXd design_row(const DesignInfo& info, double t_j,
                              std::span<const double> features) {
  if (features.size() != info.feature_names.size())
    throw std::invalid_argument("feature count does not match the design");
  Eigen::RowVectorXd row(info.n_cols);
  for (const auto& block : info.blocks) {
    switch (block.kind) {
      case BlockKind::Intercept:
        row[block.col_start] = 1.0;
        break;
      case BlockKind::Baseline: {
        Eigen::MatrixXd b = bspline_design(std::span<const double>(&t_j, 1), block.spline);
        row.segment(block.col_start, block.n_cols) = b.row(0) * block.Z;
        break;
      }
      case BlockKind::Linear:
        row[block.col_start] = features[static_cast<std::size_t>(block.feature_index)];
        break;
      case BlockKind::Smooth: {
        double x = features[static_cast<std::size_t>(block.feature_index)];
        Eigen::MatrixXd b = bspline_design(std::span<const double>(&x, 1), block.spline);
        row.segment(block.col_start, block.n_cols) = b.row(0) * block.Z;
        break;
      }
    }
  }
  return row;
}

double poisson_nll(const Eigen::VectorXd& eta, const Eigen::VectorXd& t_risk,
                   const Eigen::VectorXd& status) {
  if (eta.size() != t_risk.size() || eta.size() != status.size())
    throw std::invalid_argument("nll input size mismatch");
  return (t_risk.array() * eta.array().exp() -
          status.array() * (eta.array() + t_risk.array().log()))
      .sum();
}

double penalized_nll(const Eigen::VectorXd& w, const Eigen::MatrixXd& X,
                     const Eigen::VectorXd& t_risk, const Eigen::VectorXd& status,
                     std::span<const double> psi, const DesignInfo& info) {
  check_psi(psi, info);
  return poisson_nll(X * w, t_risk, status) + penalty_value(w, psi, info);
}

Eigen::VectorXd penalized_nll_gradient(const Eigen::VectorXd& w,
                                       const Eigen::MatrixXd& X,
                                       const Eigen::VectorXd& t_risk,
                                       const Eigen::VectorXd& status,
                                       std::span<const double> psi,
                                       const DesignInfo& info) {
  check_psi(psi, info);
  Eigen::VectorXd mu = t_risk.array() * (X * w).array().exp();
  Eigen::VectorXd g = X.transpose() * (mu - status);
  add_penalty_gradient(g, w, psi, info);
  return g;
}

PamFit fit_pam(const PedData& ped, const StructuredSpec& spec,
               std::vector<double> psi, const FitOptions& opts) {
  Design design = build_design(ped, spec);
  Eigen::VectorXd t = to_vector(ped.t_risk);
  Eigen::VectorXd delta = status_vector(ped.status);
  NewtonResult core =
      newton_fit(design.X, t, delta, psi, design.info, opts, Eigen::VectorXd());
  return make_fit(spec, design, ped.cuts, std::move(core), std::move(psi));
}

std::vector<double> default_psi_grid() {
  std::vector<double> grid(13);
  for (int i = 0; i < 13; ++i) grid[static_cast<std::size_t>(i)] = std::pow(10.0, -4.0 + i * (2.0 / 3.0));
  return grid;
}

PamFit fit_pam_select_psi(const PedData& train, const PedData& val,
                          const StructuredSpec& spec, std::vector<double> grid,
                          const FitOptions& opts) {
  if (grid.empty()) throw std::invalid_argument("empty smoothing grid");
  std::sort(grid.begin(), grid.end());

  Design design = build_design(train, spec);
  Eigen::VectorXd t = to_vector(train.t_risk);
  Eigen::VectorXd delta = status_vector(train.status);
  Eigen::MatrixXd Xval = assemble_design(design.info, val);
  Eigen::VectorXd tval = to_vector(val.t_risk);
  Eigen::VectorXd dval = status_vector(val.status);

  std::vector<double> psi(static_cast<std::size_t>(design.info.n_psi), 1.0);
  NewtonResult best = newton_fit(design.X, t, delta, psi, design.info, opts,
                                 Eigen::VectorXd());
  if (design.info.n_psi == 0)
    return make_fit(spec, design, train.cuts, std::move(best), std::move(psi));

  double best_val = poisson_nll(Xval * best.w, tval, dval);
  const int max_sweeps = 3;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (std::size_t l = 0; l < psi.size(); ++l) {
      double chosen = psi[l];
      for (double g : grid) {
        std::vector<double> candidate = psi;
        candidate[l] = g;
        NewtonResult fit =
            newton_fit(design.X, t, delta, candidate, design.info, opts, best.w);
        double val_nll = poisson_nll(Xval * fit.w, tval, dval);
        // grid is ascending, so <= resolves ties toward the larger psi
        if (val_nll <= best_val) {
          best_val = val_nll;
          best = std::move(fit);
          chosen = g;
        }
      }
      if (chosen != psi[l]) {
        psi[l] = chosen;
        changed = true;
      }
    }
    if (!changed) break;
  }

  // refit at the selected psi so the stored fit matches it exactly
  NewtonResult final_fit = newton_fit(design.X, t, delta, psi, design.info, opts, best.w);
  return make_fit(spec, design, train.cuts, std::move(final_fit), std::move(psi));
}

Eigen::VectorXd structured_log_hazards(const DesignInfo& design, const Eigen::VectorXd& w,
                                       const CutPoints& cuts,
                                       std::span<const double> features) {
  if (features.size() != design.feature_names.size())
    throw std::invalid_argument("feature count does not match the design");
  if (w.size() != design.n_cols) throw std::invalid_argument("coefficient size mismatch");
  const int J = cuts.n_intervals();

  // feature terms are constant across intervals; only the baseline varies
  double offset = 0.0;
  Eigen::VectorXd curve = Eigen::VectorXd::Zero(J);
  for (const auto& block : design.blocks) {
    auto w_seg = w.segment(block.col_start, block.n_cols);
    switch (block.kind) {
      case BlockKind::Intercept:
        offset += w_seg[0];
        break;
      case BlockKind::Baseline: {
        std::span<const double> tj(cuts.cuts.data() + 1, static_cast<std::size_t>(J));
        curve.noalias() += bspline_design(tj, block.spline) * (block.Z * w_seg);
        break;
      }
      case BlockKind::Linear:
        offset += features[static_cast<std::size_t>(block.feature_index)] * w_seg[0];
        break;
      case BlockKind::Smooth: {
        double x = features[static_cast<std::size_t>(block.feature_index)];
        Eigen::MatrixXd b = bspline_design(std::span<const double>(&x, 1), block.spline);
        offset += (b.row(0) * (block.Z * w_seg))(0);
        break;
      }
    }
  }
  return curve.array() + offset;
}

Eigen::VectorXd interval_log_hazards(const PamFit& fit, std::span<const double> features) {
  return structured_log_hazards(fit.design, fit.w, fit.cuts, features);
}

double predict_hazard(const PamFit& fit, std::span<const double> features, double t) {
  int j = fit.cuts.interval_index(std::max(t, 0.0));
  if (j < 1) j = 1;
  double tj = fit.cuts.cuts[static_cast<std::size_t>(j)];
  Eigen::RowVectorXd row = design_row(fit.design, tj, features);
  return std::exp(row.dot(fit.w));
}

double survival_from_hazards(const CutPoints& cuts, const Eigen::VectorXd& hazards,
                             double t) {
  const int J = cuts.n_intervals();
  if (hazards.size() != J) throw std::invalid_argument("hazard count does not match cuts");
  if (t <= 0.0) return 1.0;
  double cum = 0.0;
  for (int j = 1; j <= J; ++j) {
    if (t > cuts.cuts[static_cast<std::size_t>(j)]) {
      cum += hazards[j - 1] * cuts.width(j);
    } else {
      cum += hazards[j - 1] * (t - cuts.cuts[static_cast<std::size_t>(j - 1)]);
      return std::exp(-cum);
    }
  }
  cum += hazards[J - 1] * (t - cuts.last());  // extend the last hazard
  return std::exp(-cum);
}

double predict_survival(const PamFit& fit, std::span<const double> features, double t) {
  Eigen::VectorXd hazards = interval_log_hazards(fit, features).array().exp();
  return survival_from_hazards(fit.cuts, hazards, t);
}

namespace {

nlohmann::json spline_to_json(const SplineSpec& s) {
  return {{"degree", s.degree},
          {"n_basis", s.n_basis},
          {"lo", s.lo},
          {"hi", s.hi},
          {"penalty_order", s.penalty_order}};
}

SplineSpec spline_from_json(const nlohmann::json& j) {
  SplineSpec s;
  s.degree = j.at("degree").get<int>();
  s.n_basis = j.at("n_basis").get<int>();
  s.lo = j.at("lo").get<double>();
  s.hi = j.at("hi").get<double>();
  s.penalty_order = j.at("penalty_order").get<int>();
  return s;
}

nlohmann::json term_to_json(const Term& term) {
  nlohmann::json j;
  std::visit(
      [&j](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, TermIntercept>) {
          j["type"] = "intercept";
        } else if constexpr (std::is_same_v<T, TermBaseline>) {
          j["type"] = "baseline";
          j["spline"] = spline_to_json(t.spline);
        } else if constexpr (std::is_same_v<T, TermLinear>) {
          j["type"] = "linear";
          j["feature"] = t.feature;
        } else {
          j["type"] = "smooth";
          j["feature"] = t.feature;
          j["spline"] = spline_to_json(t.spline);
        }
      },
      term);
  return j;
}

Term term_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "intercept") return TermIntercept{};
  if (type == "baseline") return TermBaseline{spline_from_json(j.at("spline"))};
  if (type == "linear") return TermLinear{j.at("feature").get<std::string>()};
  if (type == "smooth")
    return TermSmooth{j.at("feature").get<std::string>(), spline_from_json(j.at("spline"))};
  throw std::invalid_argument("unknown term type: " + type);
}

const char* block_kind_name(BlockKind kind) {
  switch (kind) {
    case BlockKind::Intercept: return "intercept";
    case BlockKind::Baseline: return "baseline";
    case BlockKind::Linear: return "linear";
    case BlockKind::Smooth: return "smooth";
  }
  throw std::logic_error("unreachable");
}

BlockKind block_kind_from_name(const std::string& name) {
  if (name == "intercept") return BlockKind::Intercept;
  if (name == "baseline") return BlockKind::Baseline;
  if (name == "linear") return BlockKind::Linear;
  if (name == "smooth") return BlockKind::Smooth;
  throw std::invalid_argument("unknown block kind: " + name);
}

nlohmann::json block_to_json(const DesignBlock& b) {
  nlohmann::json j;
  j["kind"] = block_kind_name(b.kind);
  j["feature"] = b.feature;
  j["feature_index"] = b.feature_index;
  j["spline"] = spline_to_json(b.spline);
  j["Z"] = matrix_to_json(b.Z);
  j["penalty"] = matrix_to_json(b.penalty);
  j["psi_index"] = b.psi_index;
  j["col_start"] = b.col_start;
  j["n_cols"] = b.n_cols;
  return j;
}

DesignBlock block_from_json(const nlohmann::json& j) {
  DesignBlock b;
  b.kind = block_kind_from_name(j.at("kind").get<std::string>());
  b.feature = j.at("feature").get<std::string>();
  b.feature_index = j.at("feature_index").get<int>();
  b.spline = spline_from_json(j.at("spline"));
  b.Z = matrix_from_json(j.at("Z"));
  b.penalty = matrix_from_json(j.at("penalty"));
  b.psi_index = j.at("psi_index").get<int>();
  b.col_start = j.at("col_start").get<int>();
  b.n_cols = j.at("n_cols").get<int>();
  return b;
}

}  // namespace

nlohmann::json terms_to_json(const std::vector<Term>& terms) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& term : terms) arr.push_back(term_to_json(term));
  return arr;
}

std::vector<Term> terms_from_json(const nlohmann::json& j) {
  std::vector<Term> terms;
  for (const auto& item : j) terms.push_back(term_from_json(item));
  return terms;
}

nlohmann::json design_info_to_json(const DesignInfo& info) {
  nlohmann::json j;
  j["feature_names"] = info.feature_names;
  j["n_cols"] = info.n_cols;
  j["n_psi"] = info.n_psi;
  auto& blocks = j["blocks"] = nlohmann::json::array();
  for (const auto& block : info.blocks) blocks.push_back(block_to_json(block));
  return j;
}

DesignInfo design_info_from_json(const nlohmann::json& j) {
  DesignInfo info;
  info.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  info.n_cols = j.at("n_cols").get<int>();
  info.n_psi = j.at("n_psi").get<int>();
  for (const auto& block : j.at("blocks")) info.blocks.push_back(block_from_json(block));
  return info;
}

std::string pam_to_json(const PamFit& fit) {
  nlohmann::json j;
  j["kind"] = "pam";
  j["terms"] = terms_to_json(fit.spec.terms);
  j["design"] = design_info_to_json(fit.design);
  j["cuts"] = fit.cuts.cuts;
  j["w"] = vector_to_json(fit.w);
  j["psi"] = fit.psi;
  j["converged"] = fit.converged;
  j["final_penalized_nll"] = fit.final_penalized_nll;
  j["n_iter"] = fit.n_iter;
  return j.dump(2);
}

PamFit pam_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("kind").get<std::string>() != "pam")
    throw std::invalid_argument("not a hazard model file");
  PamFit fit;
  fit.spec.terms = terms_from_json(j.at("terms"));
  fit.design = design_info_from_json(j.at("design"));
  fit.cuts.cuts = j.at("cuts").get<std::vector<double>>();
  fit.cuts.validate();
  fit.w = vector_from_json(j.at("w"));
  fit.psi = j.at("psi").get<std::vector<double>>();
  fit.converged = j.at("converged").get<bool>();
  fit.final_penalized_nll = j.at("final_penalized_nll").get<double>();
  fit.n_iter = j.at("n_iter").get<int>();
  return fit;
}

void save_pam(const PamFit& fit, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file: " + path.string());
  out << pam_to_json(fit) << '\n';
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
}

PamFit load_pam(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return pam_from_json(buf.str());
}

std::string content_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace deeppam
