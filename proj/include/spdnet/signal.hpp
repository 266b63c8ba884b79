#ifndef SPDNET_SIGNAL_HPP
#define SPDNET_SIGNAL_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spdnet/errors.hpp"
#include "spdnet/fft.hpp"

namespace spdnet {

/// One multichannel trial: C x T, channel-major, with its sampling rate.
struct Epoch {
  int channels = 0;
  int samples = 0;
  double fs_hz = 0.0;
  Eigen::MatrixXd data;  // channels x samples

  Epoch() = default;
  Epoch(const Eigen::MatrixXd& d, double fs)
      : channels(static_cast<int>(d.rows())),
        samples(static_cast<int>(d.cols())),
        fs_hz(fs),
        data(d) {
    if (channels < 1 || samples < 1) throw InvalidInput("Epoch: empty data");
    if (fs <= 0.0) throw InvalidInput("Epoch: nonpositive sampling rate");
    if (!d.allFinite()) throw InvalidInput("Epoch: non-finite data");
  }
};

/// Labeled collection of epochs with uniform shape and sampling rate.
struct Dataset {
  std::vector<Epoch> epochs;
  std::vector<int> labels;
  std::vector<int> sessions;
  std::vector<std::string> channel_names;  // optional, may be empty
  std::optional<std::int64_t> seed;

  std::size_t size() const { return epochs.size(); }

  void validate() const {
    if (labels.size() != epochs.size() || sessions.size() != epochs.size())
      throw InvalidInput("Dataset: epochs/labels/sessions lengths differ");
    for (std::size_t i = 1; i < epochs.size(); ++i) {
      if (epochs[i].channels != epochs[0].channels || epochs[i].samples != epochs[0].samples ||
          epochs[i].fs_hz != epochs[0].fs_hz)
        throw InvalidInput("Dataset: non-uniform epoch shapes");
    }
  }

  Dataset subset(const std::vector<int>& indices) const {
    Dataset d;
    d.channel_names = channel_names;
    d.seed = seed;
    for (int i : indices) {
      d.epochs.push_back(epochs[static_cast<std::size_t>(i)]);
      d.labels.push_back(labels[static_cast<std::size_t>(i)]);
      d.sessions.push_back(sessions[static_cast<std::size_t>(i)]);
    }
    return d;
  }
};

/// Per-channel zero mean, unit standard deviation (unbiased, T-1 divisor).
inline Epoch standardize(const Epoch& x) {
  const int t = x.samples;
  if (t < 2) throw InvalidInput("standardize: need at least 2 samples");
  Eigen::MatrixXd out = x.data;
  for (int c = 0; c < x.channels; ++c) {
    const double mean = out.row(c).mean();
    out.row(c).array() -= mean;
    const double sd = std::sqrt(out.row(c).squaredNorm() / (t - 1));
    if (sd <= 1e-12)
      throw DegenerateChannel("standardize: channel " + std::to_string(c) +
                              " is (near-)constant");
    out.row(c) /= sd;
  }
  return Epoch(out, x.fs_hz);
}

namespace detail {

/// Linear-phase band-pass FIR, windowed-sinc (Hamming), odd length.
inline std::vector<double> design_bandpass_fir(double lo_hz, double hi_hz, double fs_hz) {
  constexpr double kPi = 3.141592653589793238462643383279502884;
  const double transition = std::min({lo_hz, fs_hz / 2.0 - hi_hz, 2.0});
  // Hamming window main-lobe rule of thumb
  int n = static_cast<int>(std::ceil(3.3 * fs_hz / transition));
  if (n % 2 == 0) ++n;  // odd length -> integer group delay
  const int half = n / 2;
  const double f1 = lo_hz / fs_hz, f2 = hi_hz / fs_hz;
  std::vector<double> h(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int m = i - half;
    double ideal;
    if (m == 0) {
      ideal = 2.0 * (f2 - f1);
    } else {
      ideal = (std::sin(2.0 * kPi * f2 * m) - std::sin(2.0 * kPi * f1 * m)) / (kPi * m);
    }
    const double w = 0.54 - 0.46 * std::cos(2.0 * kPi * i / (n - 1));
    h[static_cast<std::size_t>(i)] = ideal * w;
  }
  return h;
}

/// Linear convolution of x with kernel h via FFT overlap-add.
inline std::vector<double> overlap_add(const std::vector<double>& x, const std::vector<double>& h) {
  const std::size_t nh = h.size();
  const std::size_t nfft = next_pow2(std::max<std::size_t>(4 * nh, 1024));
  const std::size_t block = nfft - nh + 1;

  std::vector<std::complex<double>> hf(nfft, 0.0);
  for (std::size_t i = 0; i < nh; ++i) hf[i] = h[i];
  fft(hf);

  std::vector<double> y(x.size() + nh - 1, 0.0);
  std::vector<std::complex<double>> buf(nfft);
  for (std::size_t start = 0; start < x.size(); start += block) {
    const std::size_t len = std::min(block, x.size() - start);
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (std::size_t i = 0; i < len; ++i) buf[i] = x[start + i];
    fft(buf);
    for (std::size_t i = 0; i < nfft; ++i) buf[i] *= hf[i];
    fft(buf, true);
    const std::size_t out_len = std::min(nfft, y.size() - start);
    for (std::size_t i = 0; i < out_len; ++i) y[start + i] += buf[i].real();
  }
  return y;
}

}  // namespace detail

/// Zero-phase-aligned band-pass via FFT overlap-add. Group delay of the
/// linear-phase kernel is compensated; output has the input length, with
/// (kernel/2) edge samples attenuated by the implicit zero padding.
inline Epoch bandpass(const Epoch& x, double lo_hz, double hi_hz) {
  if (!(lo_hz > 0.0) || !(hi_hz > lo_hz) || !(hi_hz < x.fs_hz / 2.0))
    throw InvalidBand("bandpass: need 0 < lo < hi < fs/2");
  const std::vector<double> h = detail::design_bandpass_fir(lo_hz, hi_hz, x.fs_hz);
  const std::size_t delay = h.size() / 2;
  Eigen::MatrixXd out(x.channels, x.samples);
  std::vector<double> row(static_cast<std::size_t>(x.samples));
  for (int c = 0; c < x.channels; ++c) {
    for (int i = 0; i < x.samples; ++i) row[static_cast<std::size_t>(i)] = x.data(c, i);
    const std::vector<double> y = detail::overlap_add(row, h);
    for (int i = 0; i < x.samples; ++i) out(c, i) = y[static_cast<std::size_t>(i) + delay];
  }
  return Epoch(out, x.fs_hz);
}

}  // namespace spdnet

#endif
