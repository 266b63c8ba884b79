// Command-line front end: dataset generation, embedding-parameter
// estimation, training, evaluation, explanation, benchmarking.
//
// Exit codes: 0 success, 2 usage/config error, 1 runtime failure.
// Every run writes run.json with the fully resolved config and root seed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spdnet/spdnet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace spdnet;

namespace {

/// Raised for malformed configs and unusable inputs; mapped to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AppConfig {
  ordered_json resolved;  // what run.json records
  std::uint64_t seed = 0;
  int jobs = 1;
  fs::path out = ".";

  std::optional<fs::path> dataset_path;
  std::optional<GeneratorSpec> generator;
  std::optional<fs::path> checkpoint;

  EvalConfig eval;
  int explain_class = 1;
};

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

GeneratorSpec parse_generator(const json& j) {
  GeneratorSpec g;
  g.kind = generator_kind_from_string(j.at("kind").get<std::string>());
  g.n_trials_per_class = get_or(j, "n_trials_per_class", g.n_trials_per_class);
  g.channels = get_or(j, "channels", g.channels);
  g.samples = get_or(j, "samples", g.samples);
  g.fs_hz = get_or(j, "fs_hz", g.fs_hz);
  g.coupling_lag = get_or(j, "coupling_lag", g.coupling_lag);
  g.coupling_strength = get_or(j, "coupling_strength", g.coupling_strength);
  g.noise_std = get_or(j, "noise_std", g.noise_std);
  g.source_channel = get_or(j, "source_channel", g.source_channel);
  g.target_channel = get_or(j, "target_channel", g.target_channel);
  g.dt = get_or(j, "dt", g.dt);
  g.mixing_corr = get_or(j, "mixing_corr", g.mixing_corr);
  if (g.n_trials_per_class < 1 || g.channels < 1 || g.samples < 2 || g.fs_hz <= 0.0)
    throw ConfigError("generator: trials/channels/samples/fs_hz out of range");
  return g;
}

/// Reads the JSON config file, applies flag overrides, and records the fully
/// resolved values.
AppConfig resolve_config(const std::string& config_path, std::optional<std::uint64_t> seed_flag,
                         std::optional<std::string> out_flag, std::optional<int> jobs_flag) {
  json j = json::object();
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) throw ConfigError("cannot open config: " + config_path);
    try {
      f >> j;
    } catch (const json::exception& e) {
      throw ConfigError(std::string("malformed config: ") + e.what());
    }
    if (get_or(j, "version", 1) != 1) throw ConfigError("config: unsupported version");
  }

  AppConfig cfg;
  cfg.seed = seed_flag ? *seed_flag : get_or<std::uint64_t>(j, "seed", 0);
  cfg.jobs = jobs_flag ? *jobs_flag : get_or(j, "jobs", 1);
  cfg.out = out_flag ? fs::path(*out_flag) : fs::path(get_or<std::string>(j, "out", "."));
  if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");

  if (j.contains("dataset")) cfg.dataset_path = fs::path(j.at("dataset").get<std::string>());
  if (j.contains("generator")) {
    try {
      cfg.generator = parse_generator(j.at("generator"));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("generator: ") + e.what());
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("checkpoint")) cfg.checkpoint = fs::path(j.at("checkpoint").get<std::string>());

  EvalConfig& e = cfg.eval;
  try {
    e.pipeline = pipeline_from_string(get_or<std::string>(j, "pipeline", "spdnet_psi"));
    e.feature = feature_kind_from_string(get_or<std::string>(j, "feature", "covariance"));
  } catch (const InvalidInput& err) {
    throw ConfigError(err.what());
  }
  e.k_folds = get_or(j, "k_folds", e.k_folds);
  e.reeig_eps = get_or(j, "reeig_eps", e.reeig_eps);
  if (j.contains("band")) {
    const auto band = j.at("band").get<std::vector<double>>();
    if (band.size() != 2) throw ConfigError("band must be [lo_hz, hi_hz]");
    e.band = {band[0], band[1]};
  }
  if (j.contains("embedding")) {
    const json& emb = j.at("embedding");
    const std::string mode = get_or<std::string>(emb, "mode", "mdop");
    if (mode == "mdop") {
      e.embedding_mode = EmbeddingMode::Mdop;
    } else if (mode == "fixed") {
      e.embedding_mode = EmbeddingMode::Fixed;
      e.fixed_embedding.tau = get_or(emb, "tau", 1);
      e.fixed_embedding.psi = get_or(emb, "psi", 2);
      if (e.fixed_embedding.tau < 1 || e.fixed_embedding.psi < 1)
        throw ConfigError("fixed embedding requires tau >= 1 and psi >= 1");
    } else {
      throw ConfigError("embedding mode must be mdop or fixed");
    }
  }
  if (j.contains("mdop")) {
    const json& m = j.at("mdop");
    e.mdop.tau_max = get_or(m, "tau_max", e.mdop.tau_max);
    e.mdop.psi_max = get_or(m, "psi_max", e.mdop.psi_max);
    e.mdop.fnn_threshold = get_or(m, "fnn_threshold", e.mdop.fnn_threshold);
    e.mdop.theiler = get_or(m, "theiler", e.mdop.theiler);
  }
  if (j.contains("welch")) {
    const json& w = j.at("welch");
    e.welch.segment = get_or(w, "segment", e.welch.segment);
    e.welch.overlap = get_or(w, "overlap", e.welch.overlap);
    e.welch.band_lo_hz = get_or(w, "band_lo_hz", e.welch.band_lo_hz);
    e.welch.band_hi_hz = get_or(w, "band_hi_hz", e.welch.band_hi_hz);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    TrainConfig& tc = e.train_cfg;
    tc.max_epochs = get_or(t, "max_epochs", tc.max_epochs);
    tc.batch_size = get_or(t, "batch_size", tc.batch_size);
    tc.val_split = get_or(t, "val_split", tc.val_split);
    tc.early_stop_patience = get_or(t, "early_stop_patience", tc.early_stop_patience);
    tc.lr_patience = get_or(t, "lr_patience", tc.lr_patience);
    tc.lr_factor = get_or(t, "lr_factor", tc.lr_factor);
    tc.optimizer.lr = get_or(t, "lr", tc.optimizer.lr);
    if (tc.max_epochs < 0 || tc.batch_size < 1 || tc.val_split <= 0.0 || tc.val_split >= 1.0)
      throw ConfigError("train: epochs/batch/val_split out of range");
  }
  cfg.explain_class = get_or(j, "explain_class", cfg.explain_class);
  e.seed = cfg.seed;
  e.jobs = cfg.jobs;

  // resolved snapshot (all randomness derives from "seed")
  ordered_json r;
  r["version"] = 1;
  r["seed"] = cfg.seed;
  r["jobs"] = cfg.jobs;
  r["out"] = cfg.out.string();
  if (cfg.dataset_path) r["dataset"] = cfg.dataset_path->string();
  if (cfg.checkpoint) r["checkpoint"] = cfg.checkpoint->string();
  if (cfg.generator) {
    const GeneratorSpec& g = *cfg.generator;
    r["generator"] = {{"kind", to_string(g.kind)},
                      {"n_trials_per_class", g.n_trials_per_class},
                      {"channels", g.channels},
                      {"samples", g.samples},
                      {"fs_hz", g.fs_hz},
                      {"coupling_lag", g.coupling_lag},
                      {"coupling_strength", g.coupling_strength},
                      {"noise_std", g.noise_std},
                      {"source_channel", g.source_channel},
                      {"target_channel", g.target_channel},
                      {"dt", g.dt},
                      {"mixing_corr", g.mixing_corr}};
  }
  r["pipeline"] = to_string(e.pipeline);
  r["feature"] = to_string(e.feature);
  r["embedding"] = {{"mode", e.embedding_mode == EmbeddingMode::Mdop ? "mdop" : "fixed"},
                    {"tau", e.fixed_embedding.tau},
                    {"psi", e.fixed_embedding.psi}};
  r["mdop"] = {{"tau_max", e.mdop.tau_max},
               {"psi_max", e.mdop.psi_max},
               {"fnn_threshold", e.mdop.fnn_threshold},
               {"theiler", e.mdop.theiler}};
  r["k_folds"] = e.k_folds;
  r["reeig_eps"] = e.reeig_eps;
  if (e.band) r["band"] = {e.band->first, e.band->second};
  r["train"] = {{"max_epochs", e.train_cfg.max_epochs},
                {"batch_size", e.train_cfg.batch_size},
                {"val_split", e.train_cfg.val_split},
                {"early_stop_patience", e.train_cfg.early_stop_patience},
                {"lr_patience", e.train_cfg.lr_patience},
                {"lr_factor", e.train_cfg.lr_factor},
                {"lr", e.train_cfg.optimizer.lr}};
  r["explain_class"] = cfg.explain_class;
  cfg.resolved = std::move(r);
  return cfg;
}

void write_run_json(const AppConfig& cfg, const std::string& command) {
  fs::create_directories(cfg.out);
  ordered_json r = cfg.resolved;
  r["command"] = command;
  std::ofstream f(cfg.out / "run.json");
  if (!f) throw ConfigError("cannot write " + (cfg.out / "run.json").string());
  f << r.dump(2) << "\n";
}

Dataset load_input(const AppConfig& cfg) {
  if (cfg.dataset_path) {
    if (!fs::exists(*cfg.dataset_path / "meta.json"))
      throw ConfigError("dataset not found: " + cfg.dataset_path->string());
    return load_dataset(*cfg.dataset_path);
  }
  if (cfg.generator) {
    GeneratorSpec g = *cfg.generator;
    g.seed = cfg.seed;
    return generate(g);
  }
  throw ConfigError("config needs either \"dataset\" or \"generator\"");
}

/// Pre-processing mirrors the evaluation pipeline: optional band-pass, then
/// per-channel standardization.
void preprocess(Dataset& d, const EvalConfig& cfg) {
  for (Epoch& e : d.epochs) {
    if (cfg.band) e = bandpass(e, cfg.band->first, cfg.band->second);
    e = standardize(e);
  }
}

FeatureConfig make_feature_config(const AppConfig& cfg, const Dataset& data,
                                  const std::vector<int>& embed_indices) {
  const EvalConfig& e = cfg.eval;
  FeatureConfig fc;
  fc.kind = e.feature;
  fc.welch = e.welch;
  if (e.pipeline == PipelineKind::SpdNetPsi) {
    if (e.feature != FeatureKind::Covariance)
      throw ConfigError("spdnet_psi supports the covariance feature");
    fc.kind = FeatureKind::AugmentedCovariance;
    fc.embedding = (e.embedding_mode == EmbeddingMode::Mdop)
                       ? mdop_epochs(data.subset(embed_indices), e.mdop)
                       : e.fixed_embedding;
    fc.embedding = spdnet::detail::clamp_embedding(fc.embedding, data.epochs[0].channels,
                                                   data.epochs[0].samples);
  }
  return fc;
}

LabeledFeatures extract_set(const Dataset& d, const std::vector<int>& idx,
                            const FeatureConfig& fc) {
  LabeledFeatures lf;
  for (int i : idx) {
    lf.features.push_back(extract_feature(d.epochs[static_cast<std::size_t>(i)], fc));
    lf.labels.push_back(d.labels[static_cast<std::size_t>(i)]);
  }
  return lf;
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_gen(const AppConfig& cfg) {
  if (!cfg.generator) throw ConfigError("gen needs a \"generator\" block");
  GeneratorSpec g = *cfg.generator;
  g.seed = cfg.seed;
  const Dataset d = generate(g);
  write_run_json(cfg, "gen");
  save_dataset(d, cfg.out / "dataset");
  std::printf("wrote %zu trials (%d x %d) to %s\n", d.size(), d.epochs[0].channels,
              d.epochs[0].samples, (cfg.out / "dataset").string().c_str());
  return 0;
}

int cmd_embed_params(const AppConfig& cfg) {
  const Dataset d = load_input(cfg);
  const EmbeddingParams p = mdop_epochs(d, cfg.eval.mdop);
  write_run_json(cfg, "embed-params");
  ordered_json j{{"tau", p.tau}, {"psi", p.psi}};
  std::ofstream f(cfg.out / "embed_params.json");
  f << j.dump(2) << "\n";
  std::printf("tau = %d, psi = %d\n", p.tau, p.psi);
  return 0;
}

int cmd_train(const AppConfig& cfg) {
  Dataset d = load_input(cfg);
  preprocess(d, cfg.eval);
  std::vector<int> indices(d.size());
  std::iota(indices.begin(), indices.end(), 0);
  const std::uint64_t split_seed = derive_seed(cfg.seed, 0x7A);
  auto [train_idx, val_idx] =
      stratified_split(indices, d.labels, cfg.eval.train_cfg.val_split, split_seed);

  const FeatureConfig fc = make_feature_config(cfg, d, train_idx);
  const LabeledFeatures tr = extract_set(d, train_idx, fc);
  const LabeledFeatures va = extract_set(d, val_idx, fc);

  ModelConfig mc;
  mc.feature = fc;
  mc.halve_bimap = (cfg.eval.pipeline == PipelineKind::SpdNetPsi);
  mc.reeig_eps = cfg.eval.reeig_eps;
  mc.seed = cfg.seed;
  SpdNetModel model = make_model(mc, tr.features[0].dim());

  TrainConfig tc = cfg.eval.train_cfg;
  tc.seed = cfg.seed;
  const Curves curves = train(model, tr, va, tc);

  write_run_json(cfg, "train");
  save_model(model, cfg.out / "model");
  write_curves_csv(curves, cfg.out / "curves.csv");
  const std::size_t best =
      static_cast<std::size_t>(std::min_element(curves.val_loss.begin(), curves.val_loss.end()) -
                               curves.val_loss.begin());
  std::printf("trained %zu epochs, best val loss %.6f (epoch %zu), val AUC %.4f\n",
              curves.val_loss.size(), curves.val_loss[best], best, curves.val_auc[best]);
  return 0;
}

int cmd_evaluate(const AppConfig& cfg, bool timings_only) {
  const Dataset d = load_input(cfg);
  const CVReport r = evaluate_within_session(d, cfg.eval);
  write_run_json(cfg, timings_only ? "bench" : "evaluate");
  if (timings_only) {
    ordered_json j{{"mdop_seconds", r.mdop_seconds},
                   {"feature_seconds", r.feature_seconds},
                   {"train_seconds", r.train_seconds},
                   {"inference_seconds", r.inference_seconds},
                   {"total_seconds", r.total_seconds},
                   {"mean_auc", r.mean_auc}};
    std::ofstream f(cfg.out / "bench.json");
    f << j.dump(2) << "\n";
    std::printf("total %.2f s (mdop %.2f, feature %.2f, train %.2f, inference %.2f)\n",
                r.total_seconds, r.mdop_seconds, r.feature_seconds, r.train_seconds,
                r.inference_seconds);
    return 0;
  }
  std::ofstream f(cfg.out / "report.json");
  f << cv_report_to_json(r, true).dump(2) << "\n";
  for (const FoldReport& fold : r.folds)
    write_curves_csv(fold.curves, cfg.out / ("curves_s" + std::to_string(fold.session) + "_f" +
                                             std::to_string(fold.fold) + ".csv"));
  std::printf("mean AUC %.4f +/- %.4f over %zu folds\n", r.mean_auc, r.std_auc, r.folds.size());
  return 0;
}

int cmd_explain(const AppConfig& cfg) {
  if (!cfg.checkpoint) throw ConfigError("explain needs a \"checkpoint\" path");
  if (!fs::exists(*cfg.checkpoint / "manifest.json"))
    throw ConfigError("checkpoint not found: " + cfg.checkpoint->string());
  const SpdNetModel model = load_model(*cfg.checkpoint);

  Dataset d = load_input(cfg);
  preprocess(d, cfg.eval);

  // per-class feature groups and mean relevance maps
  std::vector<std::vector<SymMatrix>> groups(2);
  std::vector<Eigen::MatrixXd> mean_maps;
  std::vector<int> counts{0, 0};
  const int d_out = model.bimap.d_out();
  mean_maps.assign(2, Eigen::MatrixXd::Zero(d_out, d_out));
  for (std::size_t i = 0; i < d.size(); ++i) {
    const int label = d.labels[i];
    if (label < 0 || label > 1) throw ConfigError("explain expects binary labels");
    const SPDMatrix feat = extract_feature(d.epochs[i], model.config.feature);
    groups[static_cast<std::size_t>(label)].emplace_back(feat.mat());
    const RelevanceMap map = gradcam_pp(model, feat, label);
    mean_maps[static_cast<std::size_t>(label)] += map.values;
    ++counts[static_cast<std::size_t>(label)];
  }
  if (counts[0] == 0 || counts[1] == 0) throw ConfigError("explain needs both classes present");
  for (int c = 0; c < 2; ++c) mean_maps[static_cast<std::size_t>(c)] /= counts[static_cast<std::size_t>(c)];

  write_run_json(cfg, "explain");
  for (int c = 0; c < 2; ++c) {
    const std::string stem = "relevance_class" + std::to_string(c);
    write_matrix_csv(mean_maps[static_cast<std::size_t>(c)], cfg.out / (stem + ".csv"));
    write_pgm(mean_maps[static_cast<std::size_t>(c)], cfg.out / (stem + ".pgm"));
  }

  const SignificanceResult sig = welch_ttest(groups[0], groups[1]);
  write_matrix_csv(sig.t_stat, cfg.out / "t_stat.csv");
  write_matrix_csv(sig.p_value, cfg.out / "p_value.csv");
  write_mask_csv(sig.mask, cfg.out / "mask.csv");
  std::printf("wrote relevance maps (%d x %d) and t-test masks for %zu + %zu trials\n", d_out,
              d_out, groups[0].size(), groups[1].size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPD-manifold EEG decoding pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> out_flag;
  std::optional<int> jobs_flag;
  std::string command;
  for (const char* name : {"gen", "embed-params", "train", "evaluate", "explain", "bench"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed_flag, "root RNG seed (overrides config)");
    sub->add_option("--out", out_flag, "output directory (overrides config)");
    sub->add_option("--jobs", jobs_flag, "worker pool size (overrides config)");
    sub->callback([&command, name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // help/version exit 0; usage errors exit 2
  }

  AppConfig cfg;
  try {
    cfg = resolve_config(config_path, seed_flag, out_flag, jobs_flag);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (command == "gen") return cmd_gen(cfg);
    if (command == "embed-params") return cmd_embed_params(cfg);
    if (command == "train") return cmd_train(cfg);
    if (command == "evaluate") return cmd_evaluate(cfg, false);
    if (command == "bench") return cmd_evaluate(cfg, true);
    if (command == "explain") return cmd_explain(cfg);
    std::cerr << "unknown subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
