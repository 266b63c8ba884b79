#ifndef SPDNET_EMBEDDING_HPP
#define SPDNET_EMBEDDING_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "spdnet/errors.hpp"
#include "spdnet/signal.hpp"

namespace spdnet {

/// Delay-embedding parameters: lag tau (samples) and dimension psi.
struct EmbeddingParams {
  int tau = 1;
  int psi = 1;
};

/// Delay-embedding transform: output row (c*psi + p) is channel c shifted by
/// p*tau, restricted to the common support of length T - psi*tau
/// (channel-major lag ordering).
inline Epoch delay_embed(const Epoch& x, const EmbeddingParams& p) {
  if (p.tau < 1 || p.psi < 1) throw InvalidInput("delay_embed: tau and psi must be >= 1");
  const int out_t = x.samples - p.psi * p.tau;
  if (out_t < 2) throw EpochTooShort("delay_embed: T - psi*tau < 2");
  Eigen::MatrixXd out(x.channels * p.psi, out_t);
  for (int c = 0; c < x.channels; ++c)
    for (int q = 0; q < p.psi; ++q)
      out.row(c * p.psi + q) = x.data.row(c).segment(q * p.tau, out_t);
  return Epoch(out, x.fs_hz);
}

struct MdopConfig {
  int tau_max = 0;           // 0 -> min(T/10, 100)
  int psi_max = 10;
  double fnn_threshold = 0.01;
  double rtol = 10.0;
  double atol = 2.0;
  int theiler = -1;          // -1 -> tau_max
  enum class ChannelMode { BestChannel, PerChannelAverage };
  ChannelMode channel_mode = ChannelMode::BestChannel;

  int resolved_tau_max(int t) const {
    return tau_max > 0 ? tau_max : std::max(1, std::min(t / 10, 100));
  }
  int resolved_theiler(int t) const { return theiler >= 0 ? theiler : resolved_tau_max(t); }
};

namespace detail {

/// Exact nearest neighbor per point of the lag reconstruction of x over
/// t in [0, n_points), excluding a Theiler window. Returns -1 where no
/// admissible neighbor exists.
inline std::vector<int> nearest_neighbors(const Eigen::VectorXd& x, const std::vector<int>& lags,
                                          int n_points, int theiler) {
  const int d = static_cast<int>(lags.size());
  Eigen::MatrixXd pts(d, n_points);
  for (int k = 0; k < d; ++k)
    pts.row(k) = x.segment(lags[static_cast<std::size_t>(k)], n_points).transpose();
  std::vector<int> nn(static_cast<std::size_t>(n_points), -1);
  for (int i = 0; i < n_points; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_j = -1;
    for (int j = 0; j < n_points; ++j) {
      if (std::abs(i - j) <= theiler) continue;
      const double dist2 = (pts.col(i) - pts.col(j)).squaredNorm();
      if (dist2 < best) {
        best = dist2;
        best_j = j;
      }
    }
    nn[static_cast<std::size_t>(i)] = best_j;
  }
  return nn;
}

/// Mean log10 directional-derivative magnitude for one candidate lag, given
/// precomputed neighbors in the current reconstruction.
inline double beta_from_neighbors(const Eigen::VectorXd& x, const std::vector<int>& lags,
                                  const std::vector<int>& nn, int n_points, int candidate) {
  const int d = static_cast<int>(lags.size());
  double acc = 0.0;
  int used = 0;
  for (int i = 0; i < n_points; ++i) {
    const int j = nn[static_cast<std::size_t>(i)];
    if (j < 0) continue;
    double dist2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const double diff = x(i + lags[static_cast<std::size_t>(k)]) -
                          x(j + lags[static_cast<std::size_t>(k)]);
      dist2 += diff * diff;
    }
    const double dist = std::sqrt(dist2);
    if (dist < 1e-12) continue;  // coincident pair
    const double gap = std::abs(x(i + candidate) - x(j + candidate));
    if (gap <= 0.0) continue;
    acc += std::log10(gap / dist);
    ++used;
  }
  if (used == 0) throw DegenerateGeometry("beta_statistic: all neighbor pairs degenerate");
  return acc / used;
}

}  // namespace detail

/// Beta statistic of a candidate lag over the current lag reconstruction of
/// a scalar series. Larger beta means the candidate coordinate expands the
/// attractor most along its nearest-neighbor directions.
inline double beta_statistic(const Eigen::VectorXd& x, const std::vector<int>& lags,
                             int candidate, const MdopConfig& cfg = {}) {
  const int t = static_cast<int>(x.size());
  const int max_lag = std::max(candidate, *std::max_element(lags.begin(), lags.end()));
  const int n_points = t - max_lag;
  if (n_points < 50) throw InvalidInput("beta_statistic: need >= 50 reconstructed points");
  const auto nn =
      detail::nearest_neighbors(x, lags, n_points, cfg.resolved_theiler(t));
  return detail::beta_from_neighbors(x, lags, nn, n_points, candidate);
}

/// Fraction of nearest neighbors that become false when the candidate
/// coordinate is appended. False if the added-coordinate gap dominates the
/// current distance (rtol) or the new distance is large against the data
/// scale (atol).
inline double fnn_fraction(const Eigen::VectorXd& x, const std::vector<int>& lags,
                           int candidate, const MdopConfig& cfg = {}) {
  const int t = static_cast<int>(x.size());
  const int max_lag = std::max(candidate, *std::max_element(lags.begin(), lags.end()));
  const int n_points = t - max_lag;
  if (n_points < 50) throw InvalidInput("fnn_fraction: need >= 50 reconstructed points");
  const double mean = x.mean();
  const double sigma = std::sqrt((x.array() - mean).square().sum() / (x.size() - 1));
  if (sigma < 1e-12) throw DegenerateGeometry("fnn_fraction: constant series");
  const auto nn =
      detail::nearest_neighbors(x, lags, n_points, cfg.resolved_theiler(t));
  const int d = static_cast<int>(lags.size());
  int false_count = 0, used = 0;
  for (int i = 0; i < n_points; ++i) {
    const int j = nn[static_cast<std::size_t>(i)];
    if (j < 0) continue;
    double dist2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const double diff = x(i + lags[static_cast<std::size_t>(k)]) -
                          x(j + lags[static_cast<std::size_t>(k)]);
      dist2 += diff * diff;
    }
    const double dist = std::sqrt(dist2);
    if (dist < 1e-12) continue;
    const double gap = std::abs(x(i + candidate) - x(j + candidate));
    const double new_dist = std::sqrt(dist2 + gap * gap);
    if (gap / dist > cfg.rtol || new_dist / sigma > cfg.atol) ++false_count;
    ++used;
  }
  if (used == 0) throw DegenerateGeometry("fnn_fraction: all neighbor pairs degenerate");
  return static_cast<double>(false_count) / used;
}

namespace detail {

struct ChannelMdop {
  std::vector<int> lags;
  double first_beta = -std::numeric_limits<double>::infinity();
};

/// MDOP embedding cycles for one scalar series. Each cycle appends the
/// unused lag in [1, tau_max] with the largest beta; the returned list is
/// sorted, so it is strictly increasing.
inline ChannelMdop mdop_channel(const Eigen::VectorXd& x, const MdopConfig& cfg) {
  const int t = static_cast<int>(x.size());
  const int tau_max = cfg.resolved_tau_max(t);
  const int theiler = cfg.resolved_theiler(t);
  const int n_points = t - tau_max;
  if (n_points < 50) throw InvalidInput("mdop: epoch too short for tau_max");

  ChannelMdop result;
  std::vector<int> lags{0};
  std::vector<char> chosen(static_cast<std::size_t>(tau_max) + 1, 0);
  while (static_cast<int>(result.lags.size()) < cfg.psi_max) {
    const auto nn = nearest_neighbors(x, lags, n_points, theiler);
    double best_beta = -std::numeric_limits<double>::infinity();
    int best_lag = -1;
    for (int c = 1; c <= tau_max; ++c) {
      if (chosen[static_cast<std::size_t>(c)]) continue;
      const double beta = beta_from_neighbors(x, lags, nn, n_points, c);
      if (beta > best_beta) {
        best_beta = beta;
        best_lag = c;
      }
    }
    if (best_lag < 0) break;  // candidate lags exhausted
    if (result.lags.empty()) result.first_beta = best_beta;
    const double fnn = fnn_fraction(x, lags, best_lag, cfg);
    result.lags.push_back(best_lag);
    lags.push_back(best_lag);
    chosen[static_cast<std::size_t>(best_lag)] = 1;
    if (fnn < cfg.fnn_threshold) break;
  }
  if (result.lags.empty()) throw DegenerateGeometry("mdop: no lag could be selected");
  std::sort(result.lags.begin(), result.lags.end());
  return result;
}

}  // namespace detail

/// MDOP lag selection for one epoch. Multichannel epochs run per channel;
/// BestChannel returns the lag list of the channel with the largest
/// first-cycle beta maximum, PerChannelAverage returns the uniform grid of
/// the floored per-channel averages.
inline std::vector<int> mdop_lags(const Epoch& x, const MdopConfig& cfg = {}) {
  std::vector<detail::ChannelMdop> per_channel;
  per_channel.reserve(static_cast<std::size_t>(x.channels));
  for (int c = 0; c < x.channels; ++c)
    per_channel.push_back(detail::mdop_channel(x.data.row(c).transpose(), cfg));

  if (cfg.channel_mode == MdopConfig::ChannelMode::BestChannel || x.channels == 1) {
    const auto best = std::max_element(
        per_channel.begin(), per_channel.end(),
        [](const auto& a, const auto& b) { return a.first_beta < b.first_beta; });
    return best->lags;
  }

  // PerChannelAverage: floored mean lag and floored mean count over channels
  long tau_sum = 0, psi_sum = 0;
  for (const auto& ch : per_channel) {
    double mean = 0.0;
    for (int l : ch.lags) mean += l;
    tau_sum += static_cast<long>(std::floor(mean / ch.lags.size()));
    psi_sum += static_cast<long>(ch.lags.size());
  }
  const int tau = std::max(1, static_cast<int>(tau_sum / x.channels));
  const int psi = std::max(1, static_cast<int>(psi_sum / x.channels));
  std::vector<int> grid;
  for (int q = 1; q <= psi; ++q) grid.push_back(q * tau);
  return grid;
}

/// Multi-epoch MDOP: accumulates floor(mean(lags)) and len(lags) over epochs
/// and floors the per-epoch averages, both clamped to >= 1.
inline EmbeddingParams mdop_epochs(const Dataset& d, const MdopConfig& cfg = {}) {
  if (d.epochs.empty()) throw InvalidInput("mdop_epochs: empty dataset");
  long tau_acc = 0, psi_acc = 0;
  for (const Epoch& e : d.epochs) {
    const std::vector<int> lags = mdop_lags(e, cfg);
    double mean = 0.0;
    for (int l : lags) mean += l;
    tau_acc += static_cast<long>(std::floor(mean / lags.size()));
    psi_acc += static_cast<long>(lags.size());
  }
  const long n = static_cast<long>(d.epochs.size());
  EmbeddingParams p;
  p.tau = std::max(1, static_cast<int>(tau_acc / n));
  p.psi = std::max(1, static_cast<int>(psi_acc / n));
  return p;
}

}  // namespace spdnet

#endif
