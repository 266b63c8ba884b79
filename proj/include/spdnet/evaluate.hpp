#ifndef SPDNET_EVALUATE_HPP
#define SPDNET_EVALUATE_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "spdnet/embedding.hpp"
#include "spdnet/errors.hpp"
#include "spdnet/features.hpp"
#include "spdnet/network.hpp"
#include "spdnet/rng.hpp"
#include "spdnet/signal.hpp"
#include "spdnet/training.hpp"

namespace spdnet {

enum class PipelineKind { SpdNet, SpdNetPsi };
enum class EmbeddingMode { Mdop, Fixed };

inline std::string to_string(PipelineKind p) {
  return p == PipelineKind::SpdNet ? "spdnet" : "spdnet_psi";
}
inline PipelineKind pipeline_from_string(const std::string& s) {
  if (s == "spdnet") return PipelineKind::SpdNet;
  if (s == "spdnet_psi") return PipelineKind::SpdNetPsi;
  throw InvalidInput("unknown pipeline: " + s);
}

struct EvalConfig {
  PipelineKind pipeline = PipelineKind::SpdNetPsi;
  FeatureKind feature = FeatureKind::Covariance;
  EmbeddingMode embedding_mode = EmbeddingMode::Mdop;
  EmbeddingParams fixed_embedding{1, 2};
  MdopConfig mdop;
  WelchConfig welch;
  TrainConfig train_cfg;
  double reeig_eps = 1e-4;
  int k_folds = 5;
  std::optional<std::pair<double, double>> band;  // pre-processing band-pass, off by default
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct FoldReport {
  int session = 0;
  int fold = 0;
  double test_auc = 0.0;
  EmbeddingParams embedding{1, 1};
  Curves curves;
  std::vector<int> train_indices, val_indices, test_indices;
  std::vector<int> mdop_indices;  // trials consumed by embedding selection
  double mdop_seconds = 0.0, feature_seconds = 0.0, train_seconds = 0.0,
         inference_seconds = 0.0;
};

struct CVReport {
  std::vector<FoldReport> folds;  // ordered by (session, fold)
  double mean_auc = 0.0;
  double std_auc = 0.0;
  double total_seconds = 0.0;
  double mdop_seconds = 0.0, feature_seconds = 0.0, train_seconds = 0.0,
         inference_seconds = 0.0;
};

namespace detail {

inline double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

/// Shrinks (psi, then tau) until the embedded epoch leaves enough samples
/// for covariance estimation: T - psi*tau >= psi*C.
inline EmbeddingParams clamp_embedding(EmbeddingParams p, int channels, int samples) {
  auto feasible = [&](const EmbeddingParams& q) {
    return samples - q.psi * q.tau >= std::max(2, q.psi * channels);
  };
  while (p.psi > 1 && !feasible(p)) --p.psi;
  while (p.tau > 1 && !feasible(p)) --p.tau;
  if (!feasible(p)) throw EpochTooShort("clamp_embedding: epoch too short for any embedding");
  return p;
}

}  // namespace detail

/// Within-session evaluation: stratified k-fold per session; embedding
/// parameters are estimated on the training portion only, so test trials
/// never leak into MDOP.
inline CVReport evaluate_within_session(const Dataset& dataset, const EvalConfig& cfg) {
  dataset.validate();
  if (cfg.pipeline == PipelineKind::SpdNetPsi && cfg.feature != FeatureKind::Covariance)
    throw InvalidInput("evaluate: spdnet_psi supports the covariance feature");

  const double t_start = detail::now_seconds();

  // pre-processing: optional band-pass, then per-channel standardization
  Dataset data = dataset;
  for (Epoch& e : data.epochs) {
    if (cfg.band) e = bandpass(e, cfg.band->first, cfg.band->second);
    e = standardize(e);
  }

  // binary label coding for AUC scores
  std::vector<int> classes(data.labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() != 2) throw InvalidInput("evaluate: binary classification expected");
  std::vector<int> coded(data.labels.size());
  for (std::size_t i = 0; i < data.labels.size(); ++i)
    coded[i] = (data.labels[i] == classes[1]) ? 1 : 0;

  std::vector<int> session_ids(data.sessions);
  std::sort(session_ids.begin(), session_ids.end());
  session_ids.erase(std::unique(session_ids.begin(), session_ids.end()), session_ids.end());

  // fold task list
  struct Task {
    int session;
    int fold;
    std::vector<int> test, trainval;  // dataset-global indices
  };
  std::vector<Task> tasks;
  for (int sid : session_ids) {
    std::vector<int> sess_idx;
    for (std::size_t i = 0; i < data.sessions.size(); ++i)
      if (data.sessions[i] == sid) sess_idx.push_back(static_cast<int>(i));
    std::vector<int> sess_labels;
    for (int i : sess_idx) sess_labels.push_back(coded[static_cast<std::size_t>(i)]);
    const auto folds = stratified_kfold(sess_labels, cfg.k_folds,
                                        derive_seed(cfg.seed, 0x5E, static_cast<std::uint64_t>(sid)));
    for (int f = 0; f < cfg.k_folds; ++f) {
      Task t;
      t.session = sid;
      t.fold = f;
      std::set<int> in_test(folds[static_cast<std::size_t>(f)].begin(),
                            folds[static_cast<std::size_t>(f)].end());
      for (std::size_t li = 0; li < sess_idx.size(); ++li) {
        if (in_test.count(static_cast<int>(li)))
          t.test.push_back(sess_idx[li]);
        else
          t.trainval.push_back(sess_idx[li]);
      }
      tasks.push_back(std::move(t));
    }
  }

  std::vector<FoldReport> reports(tasks.size());

  auto run_task = [&](std::size_t ti) {
    const Task& task = tasks[ti];
    FoldReport rep;
    rep.session = task.session;
    rep.fold = task.fold;
    rep.test_indices = task.test;
    const std::uint64_t fold_seed =
        derive_seed(cfg.seed, static_cast<std::uint64_t>(task.session) + 1,
                    static_cast<std::uint64_t>(task.fold));

    auto [train_idx, val_idx] =
        stratified_split(task.trainval, coded, cfg.train_cfg.val_split, fold_seed);
    rep.train_indices = train_idx;
    rep.val_indices = val_idx;

    const int c = data.epochs[0].channels;
    const int t_len = data.epochs[0].samples;

    // embedding selection on the training portion only
    FeatureConfig feat_cfg;
    feat_cfg.kind = cfg.feature;
    feat_cfg.welch = cfg.welch;
    if (cfg.pipeline == PipelineKind::SpdNetPsi) {
      feat_cfg.kind = FeatureKind::AugmentedCovariance;
      double t0 = detail::now_seconds();
      if (cfg.embedding_mode == EmbeddingMode::Mdop) {
        rep.mdop_indices = task.trainval;
        feat_cfg.embedding = mdop_epochs(data.subset(task.trainval), cfg.mdop);
      } else {
        feat_cfg.embedding = cfg.fixed_embedding;
      }
      feat_cfg.embedding = detail::clamp_embedding(feat_cfg.embedding, c, t_len);
      rep.mdop_seconds = detail::now_seconds() - t0;
      rep.embedding = feat_cfg.embedding;
    }

    // feature extraction for every session trial under the fold's params
    double t0 = detail::now_seconds();
    auto extract_set = [&](const std::vector<int>& idx) {
      LabeledFeatures lf;
      for (int i : idx) {
        lf.features.push_back(extract_feature(data.epochs[static_cast<std::size_t>(i)], feat_cfg));
        lf.labels.push_back(coded[static_cast<std::size_t>(i)]);
      }
      return lf;
    };
    LabeledFeatures train_set = extract_set(train_idx);
    LabeledFeatures val_set = extract_set(val_idx);
    LabeledFeatures test_set = extract_set(task.test);
    rep.feature_seconds = detail::now_seconds() - t0;

    ModelConfig mc;
    mc.feature = feat_cfg;
    mc.halve_bimap = (cfg.pipeline == PipelineKind::SpdNetPsi);
    mc.reeig_eps = cfg.reeig_eps;
    mc.n_classes = 2;
    mc.seed = fold_seed;
    SpdNetModel model = make_model(mc, train_set.features[0].dim());

    TrainConfig tc = cfg.train_cfg;
    tc.seed = fold_seed;
    t0 = detail::now_seconds();
    rep.curves = train(model, train_set, val_set, tc);
    rep.train_seconds = detail::now_seconds() - t0;

    t0 = detail::now_seconds();
    std::vector<double> scores;
    for (const auto& s : test_set.features) {
      const ForwardCache fc = forward_from_feature(model, s);
      const double m = fc.logits.maxCoeff();
      const Eigen::VectorXd e = (fc.logits.array() - m).exp();
      scores.push_back(e(1) / e.sum());
    }
    rep.inference_seconds = detail::now_seconds() - t0;
    rep.test_auc = roc_auc(scores, test_set.labels);
    reports[ti] = std::move(rep);
  };

  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w)
      workers.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
          run_task(i);
      });
    for (auto& th : workers) th.join();
  }

  CVReport report;
  report.folds = std::move(reports);
  double sum = 0.0, sum2 = 0.0;
  for (const FoldReport& r : report.folds) {
    sum += r.test_auc;
    sum2 += r.test_auc * r.test_auc;
    report.mdop_seconds += r.mdop_seconds;
    report.feature_seconds += r.feature_seconds;
    report.train_seconds += r.train_seconds;
    report.inference_seconds += r.inference_seconds;
  }
  const double n = static_cast<double>(report.folds.size());
  report.mean_auc = sum / n;
  report.std_auc = std::sqrt(std::max(0.0, sum2 / n - report.mean_auc * report.mean_auc));
  report.total_seconds = detail::now_seconds() - t_start;
  return report;
}

// ---------------------------------------------------------------------------
// serialization

inline nlohmann::ordered_json cv_report_to_json(const CVReport& r, bool include_timings = true) {
  nlohmann::ordered_json j;
  j["mean_auc"] = r.mean_auc;
  j["std_auc"] = r.std_auc;
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const FoldReport& f : r.folds) {
    nlohmann::ordered_json jf;
    jf["session"] = f.session;
    jf["fold"] = f.fold;
    jf["test_auc"] = f.test_auc;
    jf["embedding"] = {{"tau", f.embedding.tau}, {"psi", f.embedding.psi}};
    jf["train_indices"] = f.train_indices;
    jf["val_indices"] = f.val_indices;
    jf["test_indices"] = f.test_indices;
    jf["mdop_indices"] = f.mdop_indices;
    jf["curves"] = {{"train_loss", f.curves.train_loss},
                    {"val_loss", f.curves.val_loss},
                    {"train_auc", f.curves.train_auc},
                    {"val_auc", f.curves.val_auc}};
    if (include_timings) {
      jf["timing"] = {{"mdop_seconds", f.mdop_seconds},
                      {"feature_seconds", f.feature_seconds},
                      {"train_seconds", f.train_seconds},
                      {"inference_seconds", f.inference_seconds}};
    }
    folds.push_back(std::move(jf));
  }
  j["folds"] = std::move(folds);
  if (include_timings) {
    j["timing"] = {{"mdop_seconds", r.mdop_seconds},
                   {"feature_seconds", r.feature_seconds},
                   {"train_seconds", r.train_seconds},
                   {"inference_seconds", r.inference_seconds},
                   {"total_seconds", r.total_seconds}};
  }
  return j;
}

/// Per-epoch curves as CSV: epoch, train_loss, val_loss, train_auc, val_auc.
inline void write_curves_csv(const Curves& c, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("write_curves_csv: cannot open " + path.string());
  f.precision(17);
  f << "epoch,train_loss,val_loss,train_auc,val_auc\n";
  for (std::size_t i = 0; i < c.train_loss.size(); ++i)
    f << i << "," << c.train_loss[i] << "," << c.val_loss[i] << "," << c.train_auc[i] << ","
      << c.val_auc[i] << "\n";
}

}  // namespace spdnet

#endif
