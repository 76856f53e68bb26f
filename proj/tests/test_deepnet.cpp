#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "deeppam/deepnet.hpp"
#include "deeppam/synth.hpp"

using namespace deeppam;
namespace fs = std::filesystem;

namespace {

EncoderSpec toy_spec() {
  EncoderSpec spec;
  spec.point_mlp_dims = {3, 4, 5};
  spec.global_mlp_dims = {5, 4, 2};
  spec.l2 = 1e-3;
  return spec;
}

CloudMatrix random_cloud(Rng& rng, int n_points) {
  CloudMatrix cloud(n_points, 3);
  for (Eigen::Index r = 0; r < cloud.rows(); ++r)
    for (Eigen::Index c = 0; c < 3; ++c) cloud(r, c) = rng.uniform() * 2.0 - 1.0;
  return cloud;
}

SurvivalRecord cloud_record(std::int64_t id, double time, int status,
                            std::vector<double> features, CloudMatrix cloud) {
  SurvivalRecord r;
  r.id = id;
  r.time = time;
  r.status = status;
  r.features = std::move(features);
  r.cloud = std::move(cloud);
  return r;
}

// toy joint model over 2 subjects with small clouds; shared by several tests
struct ToyProblem {
  PedData ped;
  Eigen::MatrixXd X;
  std::vector<CloudMatrix> clouds;
  DeepPamModel model;
  std::vector<double> psi;
  PedBatch batch;
};

ToyProblem make_toy(Rng& rng) {
  ToyProblem toy;
  std::vector<SurvivalRecord> records = {
      cloud_record(1, 1.4, 1, {0.3}, random_cloud(rng, 8)),
      cloud_record(2, 2.0, 0, {0.8}, random_cloud(rng, 8)),
  };
  CutPoints cuts{{0.0, 0.8, 1.6, 2.4}};
  toy.ped = transform_to_ped(records, cuts);

  SplineSpec baseline;
  baseline.degree = 1;
  baseline.n_basis = 3;
  StructuredSpec spec;
  spec.terms = {TermIntercept{}, TermBaseline{baseline}, TermLinear{"x1"}};
  Design design = build_design(toy.ped, spec);
  toy.X = design.X;

  toy.model.spec = spec;
  toy.model.design = design.info;
  toy.model.cuts = cuts;
  toy.model.encoder_spec = toy_spec();
  toy.model.encoder = EncoderParams::random_fan_in(toy.model.encoder_spec, rng);
  toy.model.w = Eigen::VectorXd::Zero(design.info.n_cols);
  for (Eigen::Index k = 0; k < toy.model.w.size(); ++k)
    toy.model.w[k] = rng.uniform() - 0.5;
  toy.model.gamma = Eigen::VectorXd::Zero(toy.model.encoder_spec.latent_dim());
  for (Eigen::Index k = 0; k < toy.model.gamma.size(); ++k)
    toy.model.gamma[k] = rng.uniform() - 0.5;
  toy.model.psi = {0.4};
  toy.psi = toy.model.psi;

  for (const auto& r : records) toy.clouds.push_back(*r.cloud);
  std::vector<std::size_t> subjects = {0, 1};
  toy.batch = gather_batch(toy.ped, toy.X, subjects, toy.clouds, 0);
  return toy;
}

// flat views over every trainable block, mirroring the optimizer's layout
std::vector<std::pair<double*, Eigen::Index>> param_blocks(DeepPamModel& m) {
  std::vector<std::pair<double*, Eigen::Index>> blocks;
  blocks.emplace_back(m.w.data(), m.w.size());
  blocks.emplace_back(m.gamma.data(), m.gamma.size());
  for (auto* stack : {&m.encoder.point_layers, &m.encoder.global_layers})
    for (auto& layer : *stack) {
      blocks.emplace_back(layer.W.data(), layer.W.size());
      blocks.emplace_back(layer.b.data(), layer.b.size());
    }
  return blocks;
}

std::vector<std::pair<const double*, Eigen::Index>> grad_blocks(const DeepGrads& g) {
  std::vector<std::pair<const double*, Eigen::Index>> blocks;
  blocks.emplace_back(g.w.data(), g.w.size());
  blocks.emplace_back(g.gamma.data(), g.gamma.size());
  for (const auto* stack : {&g.encoder.point_layers, &g.encoder.global_layers})
    for (const auto& layer : *stack) {
      blocks.emplace_back(layer.W.data(), layer.W.size());
      blocks.emplace_back(layer.b.data(), layer.b.size());
    }
  return blocks;
}

std::vector<SurvivalRecord> small_benchmark(Rng& rng, const SimConfig& cfg, int n,
                                            std::int64_t id0) {
  std::vector<SurvivalRecord> records;
  for (int i = 0; i < n; ++i) {
    int cls = static_cast<int>(rng.below(3));
    double x1 = rng.uniform();
    double x2 = rng.uniform();
    auto [time, status] = simulate_time(cfg, x1, x2, cls, rng);
    SurvivalRecord r = cloud_record(id0 + i, time, status, {x1, x2},
                                    generate_cloud(cls, cfg.n_points, 0.0, rng));
    r.true_class = cls;
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

TEST_CASE("encoding is invariant to point order and duplication") {
  Rng rng(11);
  EncoderSpec spec = toy_spec();
  for (int trial = 0; trial < 30; ++trial) {
    EncoderParams params = EncoderParams::random_fan_in(spec, rng);
    CloudMatrix cloud = random_cloud(rng, 16);
    Eigen::VectorXd zeta = encode(cloud, spec, params);

    std::vector<Eigen::Index> perm(16);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    CloudMatrix shuffled(16, 3);
    for (Eigen::Index r = 0; r < 16; ++r) shuffled.row(r) = cloud.row(perm[r]);
    Eigen::VectorXd zeta_perm = encode(shuffled, spec, params);
    CHECK((zeta - zeta_perm).cwiseAbs().maxCoeff() == 0.0);

    CloudMatrix doubled(32, 3);
    doubled << cloud, cloud;
    Eigen::VectorXd zeta_dup = encode(doubled, spec, params);
    CHECK((zeta - zeta_dup).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("zero parameters encode to zero") {
  Rng rng(12);
  EncoderSpec spec = toy_spec();
  EncoderParams params = EncoderParams::zeros(spec);
  Eigen::VectorXd zeta = encode(random_cloud(rng, 10), spec, params);
  CHECK(zeta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero gamma reduces the forward pass to the structured model") {
  Rng rng(13);
  ToyProblem toy = make_toy(rng);
  toy.model.gamma.setZero();
  Eigen::VectorXd hazards = forward_batch(toy.batch, toy.model);
  Eigen::VectorXd structured = (toy.batch.X * toy.model.w).array().exp();
  CHECK((hazards - structured).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("the latent contribution is constant over a subject's intervals") {
  Rng rng(14);
  ToyProblem toy = make_toy(rng);
  Eigen::VectorXd before = forward_batch(toy.batch, toy.model).array().log();

  PedBatch moved = toy.batch;
  moved.clouds[0] = random_cloud(rng, 8);
  Eigen::VectorXd after = forward_batch(moved, toy.model).array().log();

  auto [begin, end] = toy.batch.spans[0];
  double shift = after[begin] - before[begin];
  CHECK(end - begin >= 2);
  for (Eigen::Index r = begin; r < end; ++r)
    CHECK(after[r] - before[r] == doctest::Approx(shift).epsilon(1e-12));
  // subject 2 untouched
  auto [b2, e2] = toy.batch.spans[1];
  for (Eigen::Index r = b2; r < e2; ++r) CHECK(after[r] == before[r]);
}

TEST_CASE("each subject is encoded exactly once per batch") {
  Rng rng(15);
  ToyProblem toy = make_toy(rng);
  reset_encode_call_count();
  forward_batch(toy.batch, toy.model);
  CHECK(encode_call_count() == toy.batch.clouds.size());

  reset_encode_call_count();
  DeepGrads grads;
  loss_and_grads(toy.batch, toy.model, toy.psi, 1.0, grads);
  CHECK(encode_call_count() == toy.batch.clouds.size());
}

TEST_CASE("every gradient block matches central finite differences") {
  Rng rng(16);
  ToyProblem toy = make_toy(rng);
  const double penalty_scale = 0.7;

  DeepGrads grads;
  loss_and_grads(toy.batch, toy.model, toy.psi, penalty_scale, grads);

  auto params = param_blocks(toy.model);
  auto analytic = grad_blocks(grads);
  REQUIRE(params.size() == analytic.size());

  const double h = 1e-6;
  for (std::size_t blk = 0; blk < params.size(); ++blk) {
    auto [data, len] = params[blk];
    for (Eigen::Index k = 0; k < len; ++k) {
      double saved = data[k];
      DeepGrads scratch;
      data[k] = saved + h;
      double up = loss_and_grads(toy.batch, toy.model, toy.psi, penalty_scale, scratch);
      data[k] = saved - h;
      double down = loss_and_grads(toy.batch, toy.model, toy.psi, penalty_scale, scratch);
      data[k] = saved;
      double fd = (up - down) / (2 * h);
      double got = analytic[blk].first[k];
      CHECK(std::abs(got - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("at zero gamma the structured gradient equals the PAM gradient") {
  Rng rng(17);
  ToyProblem toy = make_toy(rng);
  toy.model.gamma.setZero();
  const double scale = 0.37;

  DeepGrads grads;
  loss_and_grads(toy.batch, toy.model, toy.psi, scale, grads);

  std::vector<double> scaled_psi = {toy.psi[0] * scale};
  Eigen::VectorXd pam_grad = penalized_nll_gradient(
      toy.model.w, toy.batch.X, toy.batch.t_risk, toy.batch.status, scaled_psi,
      toy.model.design);
  CHECK((grads.w - pam_grad).cwiseAbs().maxCoeff() <= 1e-10);

  // with gamma = 0 the encoder only feels its own weight decay
  for (std::size_t s = 0; s < grads.encoder.point_layers.size(); ++s) {
    const auto& gl = grads.encoder.point_layers[s];
    const auto& wl = toy.model.encoder.point_layers[s];
    CHECK((gl.W - 2.0 * toy.model.encoder_spec.l2 * wl.W).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(gl.b.cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("joint training warm starts at the PAM optimum and checkpoints the best epoch") {
  Rng rng(18);
  SimConfig cfg;
  cfg.n_points = 48;
  auto train = small_benchmark(rng, cfg, 48, 1);
  auto val = small_benchmark(rng, cfg, 24, 1000);

  CutPoints cuts = make_cut_points(train, CutStrategy::grid(8, 10.0));
  PedData ped_train = transform_to_ped(train, cuts, {"x1", "x2"});
  PedData ped_val = transform_to_ped(val, cuts, {"x1", "x2"});
  SplineSpec baseline;
  baseline.n_basis = 6;
  StructuredSpec spec = StructuredSpec::baseline_linear({"x1", "x2"}, baseline);
  PamFit warm = fit_pam(ped_train, spec, {1.0});

  TrainConfig tc;
  tc.max_epochs = 6;
  tc.batch_size = 16;
  tc.seed = 5;
  EncoderSpec enc = toy_spec();
  DeepPamModel model = fit_deeppam(train, val, spec, tc, warm, enc);

  // epoch 0 equals the warm start's validation nll
  Eigen::MatrixXd Xval = assemble_design(warm.design, ped_val);
  Eigen::VectorXd t_risk(static_cast<Eigen::Index>(ped_val.n_rows()));
  Eigen::VectorXd status(static_cast<Eigen::Index>(ped_val.n_rows()));
  for (std::size_t r = 0; r < ped_val.n_rows(); ++r) {
    t_risk[static_cast<Eigen::Index>(r)] = ped_val.t_risk[r];
    status[static_cast<Eigen::Index>(r)] = ped_val.status[r];
  }
  double warm_val = poisson_nll(Xval * warm.w, t_risk, status);
  REQUIRE(!model.train_log.empty());
  CHECK(model.train_log[0].epoch == 0);
  CHECK(model.train_log[0].val_nll == doctest::Approx(warm_val).epsilon(1e-8));

  // the returned parameters are the best checkpoint
  double best_logged = model.train_log[0].val_nll;
  for (const auto& e : model.train_log) best_logged = std::min(best_logged, e.val_nll);
  CHECK(model.train_log[static_cast<std::size_t>(model.best_epoch)].val_nll ==
        doctest::Approx(best_logged).epsilon(1e-12));
  CHECK(model.train_log[static_cast<std::size_t>(model.best_epoch)].val_nll <=
        model.train_log.back().val_nll + 1e-12);
  CHECK(model.warm_start_hash == content_hash(pam_to_json(warm)));
}

TEST_CASE("training is deterministic for a fixed seed") {
  Rng rng(19);
  SimConfig cfg;
  cfg.n_points = 32;
  auto train = small_benchmark(rng, cfg, 30, 1);
  auto val = small_benchmark(rng, cfg, 12, 500);
  CutPoints cuts = make_cut_points(train, CutStrategy::grid(6, 10.0));
  PedData ped_train = transform_to_ped(train, cuts, {"x1", "x2"});
  SplineSpec baseline;
  baseline.n_basis = 5;
  StructuredSpec spec = StructuredSpec::baseline_linear({"x1", "x2"}, baseline);
  PamFit warm = fit_pam(ped_train, spec, {1.0});

  TrainConfig tc;
  tc.max_epochs = 3;
  tc.batch_size = 8;
  tc.seed = 77;
  EncoderSpec enc = toy_spec();
  DeepPamModel a = fit_deeppam(train, val, spec, tc, warm, enc);
  DeepPamModel b = fit_deeppam(train, val, spec, tc, warm, enc);

  CHECK((a.w - b.w).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.gamma - b.gamma).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t l = 0; l < a.encoder.point_layers.size(); ++l)
    CHECK((a.encoder.point_layers[l].W - b.encoder.point_layers[l].W)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  REQUIRE(a.train_log.size() == b.train_log.size());
  for (std::size_t e = 0; e < a.train_log.size(); ++e) {
    CHECK(a.train_log[e].train_loss == b.train_log[e].train_loss);
    CHECK(a.train_log[e].val_nll == b.train_log[e].val_nll);
  }
}

TEST_CASE("training loss trends down over the first epochs") {
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(9000 + seed);
    SimConfig cfg;
    cfg.n_points = 64;
    auto train = small_benchmark(rng, cfg, 60, 1);
    auto val = small_benchmark(rng, cfg, 24, 2000);
    CutPoints cuts = make_cut_points(train, CutStrategy::grid(8, 10.0));
    PedData ped_train = transform_to_ped(train, cuts, {"x1", "x2"});
    SplineSpec baseline;
    baseline.n_basis = 6;
    StructuredSpec spec = StructuredSpec::baseline_linear({"x1", "x2"}, baseline);
    PamFit warm = fit_pam(ped_train, spec, {1.0});

    TrainConfig tc;
    tc.max_epochs = 5;
    tc.patience = 5;
    tc.batch_size = 16;
    tc.seed = seed;
    DeepPamModel model = fit_deeppam(train, val, spec, tc, warm, toy_spec());
    REQUIRE(model.train_log.size() >= 6);  // epoch 0 plus five epochs
    if (model.train_log[5].train_loss < model.train_log[1].train_loss) ++wins;
  }
  CHECK(wins >= 9);
}

TEST_CASE("serialized deep models reproduce predictions exactly") {
  Rng rng(20);
  SimConfig cfg;
  cfg.n_points = 32;
  auto train = small_benchmark(rng, cfg, 24, 1);
  auto val = small_benchmark(rng, cfg, 12, 600);
  CutPoints cuts = make_cut_points(train, CutStrategy::grid(5, 10.0));
  PedData ped_train = transform_to_ped(train, cuts, {"x1", "x2"});
  SplineSpec baseline;
  baseline.n_basis = 5;
  StructuredSpec spec = StructuredSpec::baseline_linear({"x1", "x2"}, baseline);
  PamFit warm = fit_pam(ped_train, spec, {1.0});
  TrainConfig tc;
  tc.max_epochs = 2;
  tc.batch_size = 8;
  DeepPamModel model = fit_deeppam(train, val, spec, tc, warm, toy_spec());

  fs::path path = fs::temp_directory_path() / "deeppam_test_deepnet" / "model.json";
  fs::create_directories(path.parent_path());
  save_deeppam(model, path);
  DeepPamModel back = load_deeppam(path);

  CHECK(back.warm_start_hash == model.warm_start_hash);
  CHECK(back.best_epoch == model.best_epoch);
  REQUIRE(back.train_log.size() == model.train_log.size());
  std::vector<double> features = {0.4, 0.7};
  CloudMatrix cloud = *train[0].cloud;
  Eigen::VectorXd lh_a = interval_log_hazards(model, features, cloud);
  Eigen::VectorXd lh_b = interval_log_hazards(back, features, cloud);
  CHECK((lh_a - lh_b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(predict_survival(back, features, cloud, 3.3) ==
        predict_survival(model, features, cloud, 3.3));

  fs::path log_path = fs::temp_directory_path() / "deeppam_test_deepnet" / "log.csv";
  save_train_log_csv(model, log_path);
  std::ifstream in(log_path);
  std::string header;
  REQUIRE(std::getline(in, header));
  CHECK(header == "epoch,train_loss,val_nll");
}
