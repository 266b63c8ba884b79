#ifndef SPDNET_FEATURES_HPP
#define SPDNET_FEATURES_HPP

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "spdnet/embedding.hpp"
#include "spdnet/errors.hpp"
#include "spdnet/fft.hpp"
#include "spdnet/signal.hpp"
#include "spdnet/spd_core.hpp"

namespace spdnet {

enum class FeatureKind {
  Covariance,
  AugmentedCovariance,
  InstantaneousCoherence,
  ImaginaryCoherence,
};

inline std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::Covariance: return "covariance";
    case FeatureKind::AugmentedCovariance: return "augmented_covariance";
    case FeatureKind::InstantaneousCoherence: return "instantaneous_coherence";
    case FeatureKind::ImaginaryCoherence: return "imaginary_coherence";
  }
  return "?";
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "covariance") return FeatureKind::Covariance;
  if (s == "augmented_covariance") return FeatureKind::AugmentedCovariance;
  if (s == "instantaneous_coherence") return FeatureKind::InstantaneousCoherence;
  if (s == "imaginary_coherence") return FeatureKind::ImaginaryCoherence;
  throw InvalidInput("unknown feature kind: " + s);
}

struct WelchConfig {
  int segment = 256;
  double overlap = 0.5;  // in [0, 1)
  double band_lo_hz = 8.0;
  double band_hi_hz = 32.0;
};

/// Sample covariance (1/(T-1)) X X^T. No mean subtraction; inputs are
/// standardized upstream. Rank deficiency is repaired explicitly.
inline SPDMatrix sample_cov(const Epoch& x, const SpdRepairPolicy& policy = {}) {
  const Eigen::MatrixXd c = x.data * x.data.transpose() / (x.samples - 1);
  return ensure_spd(SymMatrix(c), policy);
}

/// Covariance of the delay-embedded epoch: (C*psi) x (C*psi).
inline SPDMatrix augmented_cov(const Epoch& x, const EmbeddingParams& p,
                               const SpdRepairPolicy& policy = {}) {
  return sample_cov(delay_embed(x, p), policy);
}

namespace detail {

/// Welch cross-spectral density matrix per frequency bin (Hann window).
inline std::vector<Eigen::MatrixXcd> welch_csd(const Epoch& x, const WelchConfig& cfg,
                                               int* n_bins_out) {
  const int seg = cfg.segment;
  if (seg < 64) throw InsufficientData("coherence: welch segment must be >= 64");
  if (seg > x.samples) throw InsufficientData("coherence: welch segment exceeds epoch length");
  if (!(cfg.overlap >= 0.0 && cfg.overlap < 1.0))
    throw InvalidInput("coherence: overlap must be in [0, 1)");
  const int step = std::max(1, static_cast<int>(seg * (1.0 - cfg.overlap)));
  const int n_seg = (x.samples - seg) / step + 1;
  if (n_seg < 4) throw InsufficientData("coherence: need at least 4 welch segments");

  constexpr double kPi = 3.141592653589793238462643383279502884;
  const std::size_t nfft = next_pow2(static_cast<std::size_t>(seg));
  std::vector<double> window(static_cast<std::size_t>(seg));
  for (int i = 0; i < seg; ++i)
    window[static_cast<std::size_t>(i)] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / (seg - 1)));

  const int n_bins = static_cast<int>(nfft / 2) + 1;
  *n_bins_out = n_bins;
  const int c = x.channels;
  std::vector<Eigen::MatrixXcd> csd(static_cast<std::size_t>(n_bins),
                                    Eigen::MatrixXcd::Zero(c, c));
  std::vector<std::vector<std::complex<double>>> spec(static_cast<std::size_t>(c));
  for (int s = 0; s < n_seg; ++s) {
    const int off = s * step;
    for (int ch = 0; ch < c; ++ch) {
      auto& buf = spec[static_cast<std::size_t>(ch)];
      buf.assign(nfft, std::complex<double>(0.0, 0.0));
      for (int i = 0; i < seg; ++i)
        buf[static_cast<std::size_t>(i)] =
            x.data(ch, off + i) * window[static_cast<std::size_t>(i)];
      fft(buf);
    }
    for (int f = 0; f < n_bins; ++f)
      for (int a = 0; a < c; ++a)
        for (int b = 0; b < c; ++b)
          csd[static_cast<std::size_t>(f)](a, b) +=
              spec[static_cast<std::size_t>(a)][static_cast<std::size_t>(f)] *
              std::conj(spec[static_cast<std::size_t>(b)][static_cast<std::size_t>(f)]);
  }
  for (auto& m : csd) m /= static_cast<double>(n_seg);
  return csd;
}

}  // namespace detail

/// Coherence feature: normalized cross-spectrum averaged over the analysis
/// band; instantaneous uses |Re|, imaginary uses |Im|. Diagonal is set to 1
/// and the (generally indefinite) matrix is repaired into an SPD one.
inline SPDMatrix coherence(const Epoch& x, FeatureKind kind, const WelchConfig& cfg = {},
                           const SpdRepairPolicy& policy = {}) {
  if (kind != FeatureKind::InstantaneousCoherence && kind != FeatureKind::ImaginaryCoherence)
    throw InvalidInput("coherence: kind must be a coherence estimator");
  int n_bins = 0;
  const auto csd = detail::welch_csd(x, cfg, &n_bins);
  const std::size_t nfft = (static_cast<std::size_t>(n_bins) - 1) * 2;
  const double bin_hz = x.fs_hz / static_cast<double>(nfft);

  const int c = x.channels;
  Eigen::MatrixXcd gamma_sum = Eigen::MatrixXcd::Zero(c, c);
  int band_bins = 0;
  for (int f = 0; f < n_bins; ++f) {
    const double hz = f * bin_hz;
    if (hz < cfg.band_lo_hz || hz > cfg.band_hi_hz) continue;
    const Eigen::MatrixXcd& s = csd[static_cast<std::size_t>(f)];
    Eigen::MatrixXcd gamma(c, c);
    for (int a = 0; a < c; ++a)
      for (int b = 0; b < c; ++b) {
        const double denom = std::sqrt(s(a, a).real() * s(b, b).real());
        gamma(a, b) = denom > 0.0 ? s(a, b) / denom : std::complex<double>(0.0, 0.0);
      }
    gamma_sum += gamma;
    ++band_bins;
  }
  if (band_bins == 0) throw InsufficientData("coherence: analysis band contains no bins");
  const Eigen::MatrixXcd gamma = gamma_sum / static_cast<double>(band_bins);

  Eigen::MatrixXd out(c, c);
  for (int a = 0; a < c; ++a)
    for (int b = 0; b < c; ++b)
      out(a, b) = (kind == FeatureKind::InstantaneousCoherence) ? std::abs(gamma(a, b).real())
                                                                : std::abs(gamma(a, b).imag());
  out.diagonal().setOnes();
  return ensure_spd(SymMatrix(out), policy);
}

/// Trace-preserving shrinkage toward the scaled identity.
inline SPDMatrix shrink(const SPDMatrix& s, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidInput("shrink: gamma must be in [0,1]");
  const int n = s.dim();
  const double mean_diag = s.mat().trace() / n;
  return SPDMatrix(SymMatrix((1.0 - gamma) * s.mat() +
                             gamma * mean_diag * Eigen::MatrixXd::Identity(n, n)));
}

struct FeatureConfig {
  FeatureKind kind = FeatureKind::Covariance;
  EmbeddingParams embedding;  // used by AugmentedCovariance
  WelchConfig welch;          // used by coherence kinds
  SpdRepairPolicy repair;
};

inline SPDMatrix extract_feature(const Epoch& x, const FeatureConfig& cfg) {
  switch (cfg.kind) {
    case FeatureKind::Covariance: return sample_cov(x, cfg.repair);
    case FeatureKind::AugmentedCovariance: return augmented_cov(x, cfg.embedding, cfg.repair);
    case FeatureKind::InstantaneousCoherence:
    case FeatureKind::ImaginaryCoherence: return coherence(x, cfg.kind, cfg.welch, cfg.repair);
  }
  throw InvalidInput("extract_feature: unknown kind");
}

}  // namespace spdnet

#endif
