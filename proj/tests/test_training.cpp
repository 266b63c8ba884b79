#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "spdnet/features.hpp"
#include "spdnet/generators.hpp"
#include "spdnet/training.hpp"
#include "test_util.hpp"

using namespace spdnet;

namespace {

double brute_force_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double num = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) num += 1.0;
      else if (scores[i] == scores[j]) num += 0.5;
    }
  }
  return num / static_cast<double>(pairs);
}

LabeledFeatures covariance_features(const Dataset& d) {
  LabeledFeatures out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    out.features.push_back(sample_cov(d.epochs[i]));
    out.labels.push_back(d.labels[i]);
  }
  return out;
}

}  // namespace

TEST_CASE("tangent projection lands in the tangent space and is idempotent") {
  Rng rng(81);
  const Eigen::MatrixXd w = random_stiefel(4, 9, rng);
  const Eigen::MatrixXd g = test_util::random_gaussian(4, 9, rng);
  const Eigen::MatrixXd xi = stiefel_tangent_project(w, g);
  // tangent condition at a point with orthonormal rows: W xi^T + xi W^T = 0
  CHECK((w * xi.transpose() + xi * w.transpose()).norm() < 1e-12);
  // idempotence
  CHECK((stiefel_tangent_project(w, xi) - xi).norm() < 1e-12);
  // orthogonality of the residual to the tangent space
  const Eigen::MatrixXd h = test_util::random_gaussian(4, 9, rng);
  const Eigen::MatrixXd ph = stiefel_tangent_project(w, h);
  CHECK(std::abs(((g - xi).array() * ph.array()).sum()) < 1e-10);
  CHECK_THROWS_AS(stiefel_tangent_project(w, Eigen::MatrixXd::Zero(3, 9)), DimMismatch);
}

TEST_CASE("qr retraction stays on the manifold and is second order") {
  Rng rng(82);
  const Eigen::MatrixXd w = random_stiefel(4, 9, rng);
  // zero step is a fixed point
  CHECK((stiefel_retract(w, Eigen::MatrixXd::Zero(4, 9)) - w).norm() < 1e-12);

  const Eigen::MatrixXd xi =
      stiefel_tangent_project(w, test_util::random_gaussian(4, 9, rng));
  double prev = -1.0;
  for (double t : {0.1, 0.05, 0.025}) {
    const Eigen::MatrixXd r = stiefel_retract(w, t * xi);
    CHECK((r * r.transpose() - Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-12);
    const double err = (r - (w + t * xi)).norm();
    if (prev >= 0.0) CHECK(err < prev / 3.0);  // O(t^2): halving t quarters the error
    prev = err;
  }
}

TEST_CASE("first adam step has the closed form on euclidean parameters") {
  ModelConfig cfg;
  cfg.seed = 83;
  SpdNetModel m = make_model(cfg, 6);
  const SpdNetModel before = m;
  OptimizerState opt = OptimizerState::init(m);
  Gradients g = Gradients::zero(m);
  Rng rng(84);
  g.dense_w = test_util::random_gaussian(static_cast<int>(m.dense.w.rows()),
                                         static_cast<int>(m.dense.w.cols()), rng);
  g.dense_b = test_util::random_gaussian(static_cast<int>(m.dense.b.size()), 1, rng).col(0);
  g.bimap_w = test_util::random_gaussian(static_cast<int>(m.bimap.w.rows()),
                                         static_cast<int>(m.bimap.w.cols()), rng);
  riemann_adam_step(opt, m, g);

  // with zero moments, step 1 reduces to -lr * g / (|g| + eps)
  const Eigen::ArrayXXd expected =
      before.dense.w.array() -
      opt.cfg.lr * g.dense_w.array() / (g.dense_w.array().abs() + opt.cfg.eps);
  CHECK((m.dense.w.array() - expected).abs().maxCoeff() < 1e-14);
  CHECK(m.version == before.version + 1);
  CHECK(m.bimap.orthonormality_residual() < 1e-12);
}

TEST_CASE("zero gradient leaves every parameter unchanged") {
  ModelConfig cfg;
  cfg.seed = 85;
  SpdNetModel m = make_model(cfg, 6);
  const SpdNetModel before = m;
  OptimizerState opt = OptimizerState::init(m);
  riemann_adam_step(opt, m, Gradients::zero(m));
  CHECK((m.bimap.w - before.bimap.w).norm() < 1e-12);
  CHECK((m.dense.w - before.dense.w).norm() == 0.0);
  CHECK((m.dense.b - before.dense.b).norm() == 0.0);
}

TEST_CASE("adam keeps the bimap orthonormal over many noisy steps") {
  ModelConfig cfg;
  cfg.seed = 86;
  SpdNetModel m = make_model(cfg, 10);
  OptimizerState opt = OptimizerState::init(m);
  Rng rng(87);
  for (int i = 0; i < 100; ++i) {
    Gradients g = Gradients::zero(m);
    g.bimap_w = test_util::random_gaussian(5, 10, rng);
    g.dense_w = test_util::random_gaussian(2, 15, rng);
    g.dense_b = test_util::random_gaussian(2, 1, rng).col(0);
    riemann_adam_step(opt, m, g);
    CHECK(m.bimap.orthonormality_residual() < 1e-10);
  }
  CHECK(m.version == 100);
}

TEST_CASE("non-finite gradients are rejected") {
  ModelConfig cfg;
  SpdNetModel m = make_model(cfg, 4);
  OptimizerState opt = OptimizerState::init(m);
  Gradients g = Gradients::zero(m);
  g.dense_b(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(riemann_adam_step(opt, m, g), DivergenceDetected);
}

TEST_CASE("roc_auc hand values") {
  CHECK(roc_auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == doctest::Approx(1.0));
  CHECK(roc_auc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}) == doctest::Approx(0.0));
  CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == doctest::Approx(0.5));
  CHECK(roc_auc({0.2, 0.5, 0.5, 0.9}, {0, 0, 1, 1}) == doctest::Approx(0.875));  // 3 wins + 1 tie over 4 pairs
  CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {1, 1}), UndefinedAUC);
  CHECK_THROWS_AS(roc_auc({0.1}, {1, 0}), DimMismatch);
}

TEST_CASE("roc_auc matches the quadratic mann-whitney oracle with ties") {
  Rng rng(88);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 300; ++i) {
      scores.push_back(static_cast<double>(rng.uniform_int(20)) / 20.0);  // heavy ties
      labels.push_back(static_cast<int>(rng.uniform_int(2)));
    }
    labels[0] = 0;
    labels[1] = 1;  // both classes present
    CHECK(roc_auc(scores, labels) ==
          doctest::Approx(brute_force_auc(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("stratified k-fold partitions the data with balanced classes") {
  std::vector<int> labels;
  for (int i = 0; i < 47; ++i) labels.push_back(i % 3 == 0 ? 1 : 0);  // 16 pos, 31 neg
  const auto folds = stratified_kfold(labels, 5, 90);
  REQUIRE(folds.size() == 5);

  std::set<int> seen;
  for (const auto& f : folds)
    for (int i : f) CHECK(seen.insert(i).second);  // disjoint
  CHECK(seen.size() == labels.size());             // exhaustive

  // per-fold class counts differ by at most one
  std::vector<int> pos_counts, sizes;
  for (const auto& f : folds) {
    int p = 0;
    for (int i : f) p += labels[static_cast<std::size_t>(i)];
    pos_counts.push_back(p);
    sizes.push_back(static_cast<int>(f.size()));
  }
  CHECK(*std::max_element(pos_counts.begin(), pos_counts.end()) -
            *std::min_element(pos_counts.begin(), pos_counts.end()) <= 1);
  CHECK(*std::max_element(sizes.begin(), sizes.end()) -
            *std::min_element(sizes.begin(), sizes.end()) <= 2);

  // determinism and seed sensitivity
  CHECK(stratified_kfold(labels, 5, 90) == folds);
  CHECK(stratified_kfold(labels, 5, 91) != folds);

  CHECK_THROWS_AS(stratified_kfold(labels, 1, 90), InvalidInput);
  CHECK_THROWS_AS(stratified_kfold({0, 0, 0, 1, 1}, 3, 90), StratifyError);
}

TEST_CASE("stratified split holds out the requested fraction per class") {
  std::vector<int> labels;
  std::vector<int> indices;
  for (int i = 0; i < 40; ++i) {
    labels.push_back(i < 30 ? 0 : 1);
    indices.push_back(i);
  }
  const auto [train, held] = stratified_split(indices, labels, 0.1, 92);
  CHECK(train.size() + held.size() == indices.size());
  std::set<int> all(train.begin(), train.end());
  for (int i : held) CHECK(all.insert(i).second);
  int held_pos = 0, held_neg = 0;
  for (int i : held) (labels[static_cast<std::size_t>(i)] == 1 ? held_pos : held_neg)++;
  CHECK(held_neg == 3);  // floor(0.1 * 30)
  CHECK(held_pos == 1);  // floor(0.1 * 10)
  // clamps keep at least one sample on each side
  const auto [t2, h2] = stratified_split({0, 1, 30, 31}, labels, 0.01, 92);
  CHECK(h2.size() == 2);
  CHECK(t2.size() == 2);
}

TEST_CASE("training separates a spatial two-class problem") {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::SpatialTwoClass;
  spec.n_trials_per_class = 40;
  spec.channels = 4;
  spec.samples = 256;
  spec.seed = 93;
  const Dataset d = gen_spatial_twoclass(spec);

  std::vector<int> indices(d.size());
  std::iota(indices.begin(), indices.end(), 0);
  const auto [tr_idx, va_idx] = stratified_split(indices, d.labels, 0.2, 94);
  const LabeledFeatures tr = covariance_features(d.subset(tr_idx));
  const LabeledFeatures va = covariance_features(d.subset(va_idx));

  ModelConfig mcfg;
  mcfg.feature.kind = FeatureKind::Covariance;
  mcfg.halve_bimap = false;
  mcfg.seed = 95;
  SpdNetModel model = make_model(mcfg, 4);

  TrainConfig tcfg;
  tcfg.max_epochs = 60;
  tcfg.batch_size = 16;
  tcfg.seed = 96;
  const Curves curves = train(model, tr, va, tcfg);

  REQUIRE(!curves.val_loss.empty());
  CHECK(curves.train_loss.size() == curves.val_loss.size());
  CHECK(curves.train_auc.size() == curves.train_loss.size());
  CHECK(curves.val_auc.back() > 0.9);

  // the returned model is the best-validation one
  const double final_val = detail::epoch_metrics(model, va).first;
  const double best_seen = *std::min_element(curves.val_loss.begin(), curves.val_loss.end());
  CHECK(final_val == doctest::Approx(best_seen).epsilon(1e-12));

  // bit-level determinism of the whole loop
  SpdNetModel model2 = make_model(mcfg, 4);
  const Curves curves2 = train(model2, tr, va, tcfg);
  CHECK(curves2.val_loss == curves.val_loss);
  CHECK(curves2.train_auc == curves.train_auc);
  CHECK((model2.bimap.w - model.bimap.w).norm() == 0.0);
  CHECK((model2.dense.w - model.dense.w).norm() == 0.0);
}

TEST_CASE("train edge cases") {
  ModelConfig mcfg;
  SpdNetModel model = make_model(mcfg, 3);
  Rng rng(97);
  LabeledFeatures both;
  both.features.push_back(test_util::random_spd(3, 10, rng));
  both.features.push_back(test_util::random_spd(3, 10, rng));
  both.labels = {0, 1};

  TrainConfig tcfg;
  tcfg.max_epochs = 0;
  const Curves c = train(model, both, both, tcfg);
  CHECK(c.train_loss.empty());

  LabeledFeatures mono;
  mono.features = both.features;
  mono.labels = {1, 1};
  tcfg.max_epochs = 1;
  CHECK_THROWS_AS(train(model, mono, both, tcfg), InvalidInput);
}
