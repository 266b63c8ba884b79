#ifndef SPDNET_GENERATORS_HPP
#define SPDNET_GENERATORS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "spdnet/errors.hpp"
#include "spdnet/rng.hpp"
#include "spdnet/signal.hpp"

namespace spdnet {

enum class GeneratorKind { Lorenz, VarLaggedTwoClass, SpatialTwoClass };

inline std::string to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::Lorenz: return "lorenz";
    case GeneratorKind::VarLaggedTwoClass: return "var_lagged_twoclass";
    case GeneratorKind::SpatialTwoClass: return "spatial_twoclass";
  }
  return "?";
}

inline GeneratorKind generator_kind_from_string(const std::string& s) {
  if (s == "lorenz") return GeneratorKind::Lorenz;
  if (s == "var_lagged_twoclass") return GeneratorKind::VarLaggedTwoClass;
  if (s == "spatial_twoclass") return GeneratorKind::SpatialTwoClass;
  throw InvalidInput("unknown generator kind: " + s);
}

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::SpatialTwoClass;
  int n_trials_per_class = 100;
  int channels = 3;
  int samples = 512;
  double fs_hz = 250.0;
  std::uint64_t seed = 0;

  // var_lagged_twoclass
  int coupling_lag = 3;           // tau*
  double coupling_strength = 0.8; // in (0,1)
  double noise_std = 1.0;
  int source_channel = 0;
  int target_channel = 1;

  // lorenz
  double dt = 0.01;

  // spatial_twoclass
  double mixing_corr = 0.8;

  void validate() const {
    if (channels < 1 || samples < 2 || n_trials_per_class < 1 || fs_hz <= 0.0)
      throw InvalidInput("GeneratorSpec: bad shape");
    if (kind == GeneratorKind::VarLaggedTwoClass) {
      if (coupling_lag < 1 || coupling_lag >= samples / 4)
        throw InvalidInput("GeneratorSpec: coupling lag must be in [1, T/4)");
      if (!(coupling_strength > 0.0 && coupling_strength < 1.0))
        throw InvalidInput("GeneratorSpec: coupling strength must be in (0,1)");
      if (!(noise_std > 0.0)) throw InvalidInput("GeneratorSpec: noise std must be > 0");
      if (source_channel == target_channel || source_channel >= channels ||
          target_channel >= channels)
        throw InvalidInput("GeneratorSpec: bad coupling channel pair");
    }
  }
};

/// Lorenz-63 trajectory (sigma=10, rho=28, beta=8/3), fixed-step RK4 after a
/// discarded transient of 1000 steps. The seed perturbs the initial condition.
inline Epoch gen_lorenz(const GeneratorSpec& spec, std::uint64_t trial = 0) {
  const double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;
  const double dt = spec.dt;
  Rng rng = Rng::keyed(spec.seed, 0x10 + trial);
  Eigen::Vector3d s(1.0 + 0.1 * rng.normal(), 1.0 + 0.1 * rng.normal(),
                    20.0 + 0.1 * rng.normal());
  auto deriv = [&](const Eigen::Vector3d& v) {
    return Eigen::Vector3d(sigma * (v(1) - v(0)), v(0) * (rho - v(2)) - v(1),
                           v(0) * v(1) - beta * v(2));
  };
  auto rk4 = [&](Eigen::Vector3d& v) {
    const Eigen::Vector3d k1 = deriv(v);
    const Eigen::Vector3d k2 = deriv(v + 0.5 * dt * k1);
    const Eigen::Vector3d k3 = deriv(v + 0.5 * dt * k2);
    const Eigen::Vector3d k4 = deriv(v + dt * k3);
    v += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };
  for (int i = 0; i < 1000; ++i) rk4(s);
  Eigen::MatrixXd data(3, spec.samples);
  for (int t = 0; t < spec.samples; ++t) {
    data.col(t) = s;
    rk4(s);
  }
  return Epoch(data, 1.0 / dt);
}

/// Two classes of lag-coupled noise processes whose zero-lag covariances
/// match by construction while the cross-covariance at the coupling lag
/// differs in sign. The source channel is white, so the coupling leaves no
/// trace at lag zero; every epoch is re-standardized.
inline Dataset gen_var_lagged_twoclass(const GeneratorSpec& spec) {
  spec.validate();
  const int c = spec.channels, t = spec.samples;
  const int pad = spec.coupling_lag;
  const double g = spec.coupling_strength;
  Dataset d;
  d.seed = static_cast<std::int64_t>(spec.seed);
  for (int cls = 0; cls < 2; ++cls) {
    const double sign = (cls == 0) ? 1.0 : -1.0;
    for (int trial = 0; trial < spec.n_trials_per_class; ++trial) {
      Rng rng = Rng::keyed(spec.seed,
                           static_cast<std::uint64_t>(cls) * spec.n_trials_per_class + trial);
      Eigen::MatrixXd raw(c, t + pad);
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < t + pad; ++i) raw(ch, i) = spec.noise_std * rng.normal();
      // overwrite the target: lagged copy of the source plus fresh innovation
      for (int i = pad; i < t + pad; ++i) {
        raw(spec.target_channel, i) = sign * g * raw(spec.source_channel, i - pad) +
                                      std::sqrt(1.0 - g * g) * raw(spec.target_channel, i);
      }
      Epoch e(raw.rightCols(t), spec.fs_hz);
      d.epochs.push_back(standardize(e));
      d.labels.push_back(cls);
      d.sessions.push_back(0);
    }
  }
  d.validate();
  return d;
}

/// Two classes that differ by spatial mixing: class 1 correlates channels 0
/// and 1, class 0 leaves channels independent. Plain covariance separates.
inline Dataset gen_spatial_twoclass(const GeneratorSpec& spec) {
  spec.validate();
  const int c = spec.channels, t = spec.samples;
  const double r = spec.mixing_corr;
  Eigen::MatrixXd mix = Eigen::MatrixXd::Identity(c, c);
  if (c >= 2) {
    // Cholesky factor of [[1, r], [r, 1]] on the first channel pair
    mix(1, 0) = r;
    mix(1, 1) = std::sqrt(1.0 - r * r);
  }
  Dataset d;
  d.seed = static_cast<std::int64_t>(spec.seed);
  for (int cls = 0; cls < 2; ++cls) {
    for (int trial = 0; trial < spec.n_trials_per_class; ++trial) {
      Rng rng = Rng::keyed(spec.seed,
                           static_cast<std::uint64_t>(cls) * spec.n_trials_per_class + trial);
      Eigen::MatrixXd raw(c, t);
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < t; ++i) raw(ch, i) = rng.normal();
      if (cls == 1) raw = mix * raw;
      d.epochs.push_back(standardize(Epoch(raw, spec.fs_hz)));
      d.labels.push_back(cls);
      d.sessions.push_back(0);
    }
  }
  d.validate();
  return d;
}

/// Unlabeled Lorenz dataset; keeps the first `channels` state coordinates
/// (1 = x only, up to 3 = full state).
inline Dataset gen_lorenz_dataset(const GeneratorSpec& spec) {
  spec.validate();
  if (spec.channels > 3) throw InvalidInput("gen_lorenz_dataset: at most 3 channels");
  Dataset d;
  d.seed = static_cast<std::int64_t>(spec.seed);
  for (int trial = 0; trial < spec.n_trials_per_class; ++trial) {
    Epoch full = gen_lorenz(spec, static_cast<std::uint64_t>(trial));
    Epoch e(full.data.topRows(spec.channels), full.fs_hz);
    d.epochs.push_back(standardize(e));
    d.labels.push_back(0);
    d.sessions.push_back(0);
  }
  d.validate();
  return d;
}

inline Dataset generate(const GeneratorSpec& spec) {
  switch (spec.kind) {
    case GeneratorKind::Lorenz: return gen_lorenz_dataset(spec);
    case GeneratorKind::VarLaggedTwoClass: return gen_var_lagged_twoclass(spec);
    case GeneratorKind::SpatialTwoClass: return gen_spatial_twoclass(spec);
  }
  throw InvalidInput("generate: unknown kind");
}

}  // namespace spdnet

#endif
