#ifndef SPDNET_TRAINING_HPP
#define SPDNET_TRAINING_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "spdnet/errors.hpp"
#include "spdnet/network.hpp"
#include "spdnet/rng.hpp"
#include "spdnet/spd_core.hpp"

namespace spdnet {

// ---------------------------------------------------------------------------
// Stiefel geometry

/// Projection of an ambient gradient onto the tangent space at W (orthonormal
/// rows): xi = G - W sym(W^T G).
inline Eigen::MatrixXd stiefel_tangent_project(const Eigen::MatrixXd& w,
                                               const Eigen::MatrixXd& g) {
  if (w.rows() != g.rows() || w.cols() != g.cols())
    throw DimMismatch("stiefel_tangent_project: shape mismatch");
  const Eigen::MatrixXd a = w * g.transpose();  // d_out x d_out
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  return g - sym * w;
}

/// QR retraction: W' = qf(W + xi) with the R diagonal forced positive.
inline Eigen::MatrixXd stiefel_retract(const Eigen::MatrixXd& w, const Eigen::MatrixXd& xi) {
  if (w.rows() != xi.rows() || w.cols() != xi.cols())
    throw DimMismatch("stiefel_retract: shape mismatch");
  // thin QR of the transposed (tall) matrix
  const Eigen::MatrixXd a = (w + xi).transpose();  // d_in x d_out
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  const Eigen::MatrixXd r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (int i = 0; i < a.cols(); ++i) {
    if (r(i, i) == 0.0) throw RetractFailure("stiefel_retract: rank-deficient step");
    if (r(i, i) < 0.0) q.col(i) *= -1.0;
  }
  return q.transpose();
}

// ---------------------------------------------------------------------------
// RiemannAdam

struct OptimizerConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  OptimizerConfig cfg;
  long step = 0;
  Eigen::MatrixXd m_bimap, v_bimap;
  Eigen::MatrixXd m_dense_w, v_dense_w;
  Eigen::VectorXd m_dense_b, v_dense_b;

  static OptimizerState init(const SpdNetModel& model, const OptimizerConfig& cfg = {}) {
    OptimizerState s;
    s.cfg = cfg;
    s.m_bimap = Eigen::MatrixXd::Zero(model.bimap.w.rows(), model.bimap.w.cols());
    s.v_bimap = s.m_bimap;
    s.m_dense_w = Eigen::MatrixXd::Zero(model.dense.w.rows(), model.dense.w.cols());
    s.v_dense_w = s.m_dense_w;
    s.m_dense_b = Eigen::VectorXd::Zero(model.dense.b.size());
    s.v_dense_b = s.m_dense_b;
    return s;
  }
};

/// One RiemannAdam step. The Stiefel parameter uses tangent-projected
/// gradients, a QR retraction, and projection transport of the first moment;
/// Euclidean parameters take a standard bias-corrected Adam step.
inline void riemann_adam_step(OptimizerState& s, SpdNetModel& model, const Gradients& g) {
  if (!g.all_finite()) throw DivergenceDetected("riemann_adam_step: non-finite gradient");
  const OptimizerConfig& c = s.cfg;
  ++s.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.step));

  // Stiefel parameter
  {
    const Eigen::MatrixXd& w = model.bimap.w;
    const Eigen::MatrixXd rg = stiefel_tangent_project(w, g.bimap_w);
    s.m_bimap = c.beta1 * s.m_bimap + (1.0 - c.beta1) * rg;
    s.v_bimap = c.beta2 * s.v_bimap.array().matrix() +
                (1.0 - c.beta2) * rg.cwiseProduct(rg);
    const Eigen::MatrixXd m_hat = s.m_bimap / bc1;
    const Eigen::MatrixXd v_hat = s.v_bimap / bc2;
    const Eigen::MatrixXd step =
        -c.lr * m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + c.eps).matrix());
    const Eigen::MatrixXd w_new = stiefel_retract(w, stiefel_tangent_project(w, step));
    // transport the first moment by re-projection at the new point
    s.m_bimap = stiefel_tangent_project(w_new, s.m_bimap);
    model.bimap.w = w_new;
  }

  // Euclidean parameters
  auto adam = [&](auto& m, auto& v, auto& param, const auto& grad) {
    m = c.beta1 * m + (1.0 - c.beta1) * grad;
    v = (c.beta2 * v.array() + (1.0 - c.beta2) * grad.array().square()).matrix();
    param.array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  };
  adam(s.m_dense_w, s.v_dense_w, model.dense.w, g.dense_w);
  adam(s.m_dense_b, s.v_dense_b, model.dense.b, g.dense_b);

  ++model.version;
}

// ---------------------------------------------------------------------------
// metrics

/// ROC-AUC by the Mann-Whitney formulation:
/// (#concordant pairs + 0.5 * #ties) / (n_pos * n_neg), computed exactly.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DimMismatch("roc_auc: size mismatch");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i)
    (labels[i] == 1 ? pos : neg).push_back(scores[i]);
  if (pos.empty() || neg.empty()) throw UndefinedAUC("roc_auc: single class");
  std::sort(neg.begin(), neg.end());
  double concordant = 0.0, ties = 0.0;
  for (double p : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), p);
    concordant += static_cast<double>(lo - neg.begin());
    ties += static_cast<double>(hi - lo);
  }
  return (concordant + 0.5 * ties) /
         (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// Stratified k-fold: per class, shuffled indices are dealt round-robin, so
/// per-fold class proportions stay within one sample of the global ones.
inline std::vector<std::vector<int>> stratified_kfold(const std::vector<int>& labels, int k,
                                                      std::uint64_t seed) {
  if (k < 2) throw InvalidInput("stratified_kfold: k must be >= 2");
  std::vector<int> classes(labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == classes[ci]) idx.push_back(static_cast<int>(i));
    if (static_cast<int>(idx.size()) < k)
      throw StratifyError("stratified_kfold: class " + std::to_string(classes[ci]) +
                          " has fewer than k samples");
    Rng rng = Rng::keyed(seed, 0xF0 + ci);
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i)
      folds[i % static_cast<std::size_t>(k)].push_back(idx[i]);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

/// Stratified holdout split of `indices` (by label): returns {train, held}.
inline std::pair<std::vector<int>, std::vector<int>> stratified_split(
    const std::vector<int>& indices, const std::vector<int>& labels, double held_fraction,
    std::uint64_t seed) {
  std::vector<int> classes;
  for (int i : indices) classes.push_back(labels[static_cast<std::size_t>(i)]);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::vector<int> train, held;
  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    std::vector<int> idx;
    for (int i : indices)
      if (labels[static_cast<std::size_t>(i)] == classes[ci]) idx.push_back(i);
    Rng rng = Rng::keyed(seed, 0xA0 + ci);
    rng.shuffle(idx);
    std::size_t n_held = static_cast<std::size_t>(
        std::max(1.0, std::floor(held_fraction * static_cast<double>(idx.size()))));
    n_held = std::min(n_held, idx.size() - 1);
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_held ? held : train).push_back(idx[i]);
  }
  std::sort(train.begin(), train.end());
  std::sort(held.begin(), held.end());
  return {train, held};
}

// ---------------------------------------------------------------------------
// training loop

struct TrainConfig {
  int max_epochs = 300;
  int batch_size = 64;
  double val_split = 0.1;
  int early_stop_patience = 75;
  int lr_patience = 75;
  double lr_factor = 0.5;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
};

struct Curves {
  std::vector<double> train_loss, val_loss, train_auc, val_auc;
};

struct DivergenceDetectedWithCurves : DivergenceDetected {
  Curves partial;
  DivergenceDetectedWithCurves(const std::string& msg, Curves c)
      : DivergenceDetected(msg), partial(std::move(c)) {}
};

struct LabeledFeatures {
  std::vector<SPDMatrix> features;
  std::vector<int> labels;
  std::size_t size() const { return features.size(); }
};

namespace detail {

inline std::pair<double, double> epoch_metrics(const SpdNetModel& model,
                                               const LabeledFeatures& data) {
  double loss = 0.0;
  std::vector<double> scores;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const ForwardCache c = forward_from_feature(model, data.features[i]);
    loss += softmax_xent(c.logits, data.labels[i]).first;
    // class-1 softmax probability as the ranking score
    const double m = c.logits.maxCoeff();
    const Eigen::VectorXd e = (c.logits.array() - m).exp();
    scores.push_back(e(1) / e.sum());
  }
  loss /= static_cast<double>(data.size());
  return {loss, roc_auc(scores, data.labels)};
}

}  // namespace detail

/// Mini-batch training with RiemannAdam, early stopping on validation loss,
/// lr halving on plateau, and best-validation weight restoration.
inline Curves train(SpdNetModel& model, const LabeledFeatures& train_set,
                    const LabeledFeatures& val_set, const TrainConfig& cfg) {
  {
    std::vector<int> classes(train_set.labels);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.size() < 2) throw InvalidInput("train: need at least 2 classes");
  }
  Curves curves;
  if (cfg.max_epochs == 0) return curves;

  OptimizerState opt = OptimizerState::init(model, cfg.optimizer);
  SpdNetModel best_model = model;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0, since_lr = 0;

  std::vector<int> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng rng = Rng::keyed(cfg.seed, 0xE0 + static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Gradients acc = Gradients::zero(model);
      for (std::size_t i = start; i < end; ++i) {
        const int idx = order[i];
        const ForwardCache c =
            forward_from_feature(model, train_set.features[static_cast<std::size_t>(idx)]);
        const auto [loss, dlogits] =
            softmax_xent(c.logits, train_set.labels[static_cast<std::size_t>(idx)]);
        if (!std::isfinite(loss))
          throw DivergenceDetectedWithCurves("train: non-finite loss", curves);
        acc += model_backward(model, c, dlogits);
      }
      acc *= 1.0 / static_cast<double>(end - start);
      try {
        riemann_adam_step(opt, model, acc);
      } catch (const DivergenceDetected& e) {
        throw DivergenceDetectedWithCurves(e.what(), curves);
      }
    }

    const auto [tr_loss, tr_auc] = detail::epoch_metrics(model, train_set);
    const auto [va_loss, va_auc] = detail::epoch_metrics(model, val_set);
    curves.train_loss.push_back(tr_loss);
    curves.train_auc.push_back(tr_auc);
    curves.val_loss.push_back(va_loss);
    curves.val_auc.push_back(va_auc);

    if (va_loss < best_val) {
      best_val = va_loss;
      best_model = model;
      since_best = 0;
      since_lr = 0;
    } else {
      ++since_best;
      ++since_lr;
    }
    if (since_best >= cfg.early_stop_patience) break;
    if (since_lr >= cfg.lr_patience) {
      opt.cfg.lr *= cfg.lr_factor;
      since_lr = 0;
    }
  }

  model = best_model;
  ++model.version;
  return curves;
}

}  // namespace spdnet

#endif
