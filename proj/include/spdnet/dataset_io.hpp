#ifndef SPDNET_DATASET_IO_HPP
#define SPDNET_DATASET_IO_HPP

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spdnet/errors.hpp"
#include "spdnet/signal.hpp"

namespace spdnet {

// Dataset on disk: meta.json + data.bin (little-endian float64, row-major
// [trial][channel][time]).

static_assert(std::endian::native == std::endian::little,
              "dataset payload assumes a little-endian host");

inline void save_dataset(const Dataset& d, const std::filesystem::path& dir) {
  d.validate();
  if (d.epochs.empty()) throw InvalidInput("save_dataset: empty dataset");
  std::filesystem::create_directories(dir);
  const int c = d.epochs[0].channels, t = d.epochs[0].samples;

  nlohmann::ordered_json meta;
  meta["version"] = 1;
  meta["n_trials"] = d.epochs.size();
  meta["n_channels"] = c;
  meta["n_times"] = t;
  meta["fs_hz"] = d.epochs[0].fs_hz;
  meta["labels"] = d.labels;
  meta["sessions"] = d.sessions;
  if (!d.channel_names.empty()) meta["channel_names"] = d.channel_names;
  if (d.seed) meta["seed"] = *d.seed;
  std::ofstream mf(dir / "meta.json");
  mf << meta.dump(2) << "\n";

  std::ofstream bf(dir / "data.bin", std::ios::binary);
  std::vector<double> row(static_cast<std::size_t>(t));
  for (const Epoch& e : d.epochs) {
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < t; ++i) row[static_cast<std::size_t>(i)] = e.data(ch, i);
      bf.write(reinterpret_cast<const char*>(row.data()),
               static_cast<std::streamsize>(sizeof(double) * row.size()));
    }
  }
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "meta.json");
  if (!mf) throw InvalidInput("load_dataset: cannot open meta.json in " + dir.string());
  nlohmann::json meta;
  try {
    mf >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidHeader(std::string("load_dataset: bad meta.json: ") + e.what());
  }
  if (!meta.contains("version") || meta["version"].get<int>() != 1)
    throw VersionMismatch("load_dataset: unsupported version");
  const auto n = meta.at("n_trials").get<std::size_t>();
  const int c = meta.at("n_channels").get<int>();
  const int t = meta.at("n_times").get<int>();
  const double fs = meta.at("fs_hz").get<double>();
  if (c < 1 || t < 1 || n < 1 || fs <= 0.0) throw InvalidHeader("load_dataset: bad header fields");

  Dataset d;
  d.labels = meta.at("labels").get<std::vector<int>>();
  d.sessions = meta.at("sessions").get<std::vector<int>>();
  if (meta.contains("channel_names"))
    d.channel_names = meta["channel_names"].get<std::vector<std::string>>();
  if (meta.contains("seed")) d.seed = meta["seed"].get<std::int64_t>();
  if (d.labels.size() != n || d.sessions.size() != n)
    throw InvalidHeader("load_dataset: labels/sessions length mismatch");

  std::ifstream bf(dir / "data.bin", std::ios::binary);
  if (!bf) throw InvalidInput("load_dataset: cannot open data.bin");
  bf.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::uint64_t>(bf.tellg());
  const std::uint64_t expected = n * static_cast<std::uint64_t>(c) * t * sizeof(double);
  if (bytes != expected)
    throw SizeMismatch("load_dataset: payload has " + std::to_string(bytes) + " bytes, expected " +
                       std::to_string(expected));
  bf.seekg(0);

  std::vector<double> row(static_cast<std::size_t>(t));
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::MatrixXd m(c, t);
    for (int ch = 0; ch < c; ++ch) {
      bf.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(sizeof(double) * row.size()));
      for (int k = 0; k < t; ++k) m(ch, k) = row[static_cast<std::size_t>(k)];
    }
    if (!m.allFinite()) throw InvalidInput("load_dataset: non-finite payload");
    d.epochs.emplace_back(m, fs);
  }
  d.validate();
  return d;
}

}  // namespace spdnet

#endif
