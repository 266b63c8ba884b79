#ifndef SPDNET_MODEL_IO_HPP
#define SPDNET_MODEL_IO_HPP

#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "spdnet/errors.hpp"
#include "spdnet/network.hpp"

namespace spdnet {

// Checkpoint: manifest.json + weights.bin (little-endian float64, row-major,
// BiMap W then dense W then dense b).

inline void save_model(const SpdNetModel& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["input_dim"] = m.input_dim;
  j["bimap_out"] = m.bimap.d_out();
  j["n_classes"] = m.config.n_classes;
  j["halve_bimap"] = m.config.halve_bimap;
  j["reeig_eps"] = m.reeig.epsilon;
  j["feature"] = to_string(m.config.feature.kind);
  j["tau"] = m.config.feature.embedding.tau;
  j["psi"] = m.config.feature.embedding.psi;
  j["seed"] = m.config.seed;
  std::ofstream mf(dir / "manifest.json");
  mf << j.dump(2) << "\n";

  std::ofstream bf(dir / "weights.bin", std::ios::binary);
  auto dump = [&](const double* p, std::size_t n) {
    bf.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  };
  // Eigen is column-major; serialize row-major for a layout-independent format
  auto dump_matrix = [&](const Eigen::MatrixXd& w) {
    for (int i = 0; i < w.rows(); ++i)
      for (int j2 = 0; j2 < w.cols(); ++j2) {
        const double v = w(i, j2);
        dump(&v, 1);
      }
  };
  dump_matrix(m.bimap.w);
  dump_matrix(m.dense.w);
  dump(m.dense.b.data(), static_cast<std::size_t>(m.dense.b.size()));
}

inline SpdNetModel load_model(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw InvalidInput("load_model: cannot open manifest.json in " + dir.string());
  nlohmann::json j;
  mf >> j;
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw VersionMismatch("load_model: unsupported version");

  SpdNetModel m;
  m.input_dim = j.at("input_dim").get<int>();
  const int d_out = j.at("bimap_out").get<int>();
  m.config.n_classes = j.at("n_classes").get<int>();
  m.config.halve_bimap = j.at("halve_bimap").get<bool>();
  m.config.reeig_eps = j.at("reeig_eps").get<double>();
  m.reeig.epsilon = m.config.reeig_eps;
  m.config.feature.kind = feature_kind_from_string(j.at("feature").get<std::string>());
  m.config.feature.embedding.tau = j.at("tau").get<int>();
  m.config.feature.embedding.psi = j.at("psi").get<int>();
  m.config.seed = j.at("seed").get<std::uint64_t>();

  const int n_feat = d_out * (d_out + 1) / 2;
  m.bimap.w.resize(d_out, m.input_dim);
  m.dense.w.resize(m.config.n_classes, n_feat);
  m.dense.b.resize(m.config.n_classes);

  std::ifstream bf(dir / "weights.bin", std::ios::binary);
  if (!bf) throw InvalidInput("load_model: cannot open weights.bin");
  bf.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::uint64_t>(bf.tellg());
  const std::uint64_t expected =
      static_cast<std::uint64_t>(m.bimap.w.size() + m.dense.w.size() + m.dense.b.size()) *
      sizeof(double);
  if (bytes != expected) throw SizeMismatch("load_model: weights.bin size mismatch");
  bf.seekg(0);
  auto read_matrix = [&](Eigen::MatrixXd& w) {
    double v;
    for (int i = 0; i < w.rows(); ++i)
      for (int j2 = 0; j2 < w.cols(); ++j2) {
        bf.read(reinterpret_cast<char*>(&v), sizeof(double));
        w(i, j2) = v;
      }
  };
  read_matrix(m.bimap.w);
  read_matrix(m.dense.w);
  bf.read(reinterpret_cast<char*>(m.dense.b.data()),
          static_cast<std::streamsize>(sizeof(double) * m.dense.b.size()));
  return m;
}

}  // namespace spdnet

#endif
