#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <vector>

#include "spdnet/embedding.hpp"
#include "spdnet/generators.hpp"
#include "test_util.hpp"

using namespace spdnet;

namespace {

Epoch ramp_epoch(int channels, int t) {
  Eigen::MatrixXd d(channels, t);
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < t; ++i) d(c, i) = 1000.0 * c + i;
  return Epoch(d, 100.0);
}

Eigen::VectorXd lorenz_x(int t, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::Lorenz;
  spec.samples = t;
  spec.seed = seed;
  return gen_lorenz(spec, 0).data.row(0).transpose();
}

Eigen::VectorXd noise_series(int t, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd x(t);
  for (int i = 0; i < t; ++i) x(i) = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("delay_embed worked example") {
  // C=1, T=10, x = 0..9, psi=2, tau=3 -> rows x[0..3] and x[3..6]
  Eigen::MatrixXd d(1, 10);
  for (int i = 0; i < 10; ++i) d(0, i) = i;
  const Epoch out = delay_embed(Epoch(d, 1.0), {3, 2});
  REQUIRE(out.channels == 2);
  REQUIRE(out.samples == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(out.data(0, i) == doctest::Approx(i));
    CHECK(out.data(1, i) == doctest::Approx(i + 3));
  }
}

TEST_CASE("delay_embed shape and channel-major lag ordering") {
  const Epoch x = ramp_epoch(3, 1537);
  const Epoch out = delay_embed(x, {24, 6});
  REQUIRE(out.channels == 18);
  REQUIRE(out.samples == 1393);
  for (int c = 0; c < 3; ++c)
    for (int q = 0; q < 6; ++q)
      CHECK((out.data.row(c * 6 + q) - x.data.row(c).segment(q * 24, 1393)).norm() == 0.0);
}

TEST_CASE("delay_embed with psi=1 only truncates") {
  const Epoch x = ramp_epoch(2, 100);
  const Epoch out = delay_embed(x, {7, 1});
  CHECK(out.channels == 2);
  CHECK(out.samples == 93);
  CHECK((out.data - x.data.leftCols(93)).norm() == 0.0);
}

TEST_CASE("delay_embed rejects bad parameters") {
  const Epoch x = ramp_epoch(1, 20);
  CHECK_THROWS_AS(delay_embed(x, {0, 2}), InvalidInput);
  CHECK_THROWS_AS(delay_embed(x, {2, 0}), InvalidInput);
  CHECK_THROWS_AS(delay_embed(x, {10, 2}), EpochTooShort);  // 20 - 20 < 2
}

TEST_CASE("beta statistic separates structured from white series") {
  const int t = 1200;
  const Eigen::VectorXd lor = lorenz_x(t, 31);
  const Eigen::VectorXd wn = noise_series(t, 32);
  MdopConfig cfg;
  cfg.tau_max = 60;
  cfg.theiler = 60;

  auto beta_range = [&](const Eigen::VectorXd& x) {
    double lo = 1e300, hi = -1e300;
    for (int cand = 1; cand <= 60; ++cand) {
      const double b = beta_statistic(x, {0}, cand, cfg);
      lo = std::min(lo, b);
      hi = std::max(hi, b);
    }
    return hi - lo;
  };
  const double range_lor = beta_range(lor);
  const double range_wn = beta_range(wn);
  // the attractor expands unevenly across lags; white noise is isotropic
  CHECK(range_lor > 2.0 * range_wn);
  CHECK(range_wn < 0.5);
}

TEST_CASE("fnn drops once the reconstruction unfolds") {
  const int t = 1500;
  const Eigen::VectorXd lor = lorenz_x(t, 33);
  MdopConfig cfg;
  cfg.tau_max = 60;
  cfg.theiler = 60;
  // scalar reconstruction of a 3-D flow: many false neighbors
  const double fnn1 = fnn_fraction(lor, {0}, 10, cfg);
  // three delay coordinates: attractor mostly unfolded
  const double fnn3 = fnn_fraction(lor, {0, 10, 20}, 30, cfg);
  CHECK(fnn1 > 0.2);
  CHECK(fnn3 < 0.05);
  CHECK(fnn3 < fnn1);
}

TEST_CASE("fnn and beta reject degenerate input") {
  Eigen::VectorXd flat = Eigen::VectorXd::Ones(300);
  MdopConfig cfg;
  cfg.tau_max = 10;
  cfg.theiler = 2;
  CHECK_THROWS_AS(fnn_fraction(flat, {0}, 5, cfg), DegenerateGeometry);
  CHECK_THROWS_AS(beta_statistic(Eigen::VectorXd::Zero(60), {0}, 5, cfg), DegenerateGeometry);
  CHECK_THROWS_AS(beta_statistic(noise_series(40, 1), {0}, 5, cfg), InvalidInput);  // too short
}

TEST_CASE("mdop produces a strictly increasing bounded lag list") {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::Lorenz;
  spec.samples = 1200;
  spec.channels = 1;
  spec.n_trials_per_class = 1;
  spec.seed = 34;
  const Dataset d = gen_lorenz_dataset(spec);
  MdopConfig cfg;
  cfg.tau_max = 50;
  const std::vector<int> lags = mdop_lags(d.epochs[0], cfg);
  REQUIRE(!lags.empty());
  CHECK(static_cast<int>(lags.size()) <= cfg.psi_max);
  int prev = 0;
  for (int l : lags) {
    CHECK(l > prev);
    CHECK(l <= cfg.tau_max);
    prev = l;
  }
}

TEST_CASE("mdop_epochs aggregates per-epoch results with floored means") {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::Lorenz;
  spec.samples = 900;
  spec.channels = 1;
  spec.n_trials_per_class = 3;
  spec.seed = 35;
  const Dataset d = gen_lorenz_dataset(spec);
  MdopConfig cfg;
  cfg.tau_max = 40;

  // oracle: apply the aggregation formula to the per-epoch lag lists
  long tau_acc = 0, psi_acc = 0;
  for (const Epoch& e : d.epochs) {
    const std::vector<int> lags = mdop_lags(e, cfg);
    const long sum = std::accumulate(lags.begin(), lags.end(), 0L);
    tau_acc += static_cast<long>(std::floor(static_cast<double>(sum) / lags.size()));
    psi_acc += static_cast<long>(lags.size());
  }
  const EmbeddingParams p = mdop_epochs(d, cfg);
  CHECK(p.tau == std::max(1L, tau_acc / 3));
  CHECK(p.psi == std::max(1L, psi_acc / 3));
  CHECK(p.tau >= 1);
  CHECK(p.psi >= 1);
}

TEST_CASE("mdop_epochs is invariant to epoch order and deterministic") {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::Lorenz;
  spec.samples = 900;
  spec.channels = 1;
  spec.n_trials_per_class = 3;
  spec.seed = 36;
  const Dataset d = gen_lorenz_dataset(spec);
  MdopConfig cfg;
  cfg.tau_max = 40;
  const EmbeddingParams p1 = mdop_epochs(d, cfg);
  const EmbeddingParams p2 = mdop_epochs(d.subset({2, 0, 1}), cfg);
  CHECK(p1.tau == p2.tau);
  CHECK(p1.psi == p2.psi);
  const EmbeddingParams p3 = mdop_epochs(d, cfg);
  CHECK(p1.tau == p3.tau);
  CHECK(p1.psi == p3.psi);
  CHECK_THROWS_AS(mdop_epochs(Dataset{}, cfg), InvalidInput);
}

TEST_CASE("mdop channel modes agree on single-channel data") {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::Lorenz;
  spec.samples = 900;
  spec.channels = 1;
  spec.n_trials_per_class = 1;
  spec.seed = 37;
  const Dataset d = gen_lorenz_dataset(spec);
  MdopConfig best, avg;
  best.tau_max = avg.tau_max = 40;
  best.channel_mode = MdopConfig::ChannelMode::BestChannel;
  avg.channel_mode = MdopConfig::ChannelMode::PerChannelAverage;
  CHECK(mdop_lags(d.epochs[0], best) == mdop_lags(d.epochs[0], avg));
}
