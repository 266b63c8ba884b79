#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "spdnet/spd_core.hpp"
#include "test_util.hpp"

using namespace spdnet;
using test_util::random_spd;
using test_util::random_sym;

TEST_CASE("sym_eig reconstructs and sorts descending") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const SymMatrix s = random_sym(9, rng);
    const EigPair p = sym_eig(s);
    for (int i = 1; i < 9; ++i) CHECK(p.values(i) <= p.values(i - 1));
    const Eigen::MatrixXd rec = p.vectors * p.values.asDiagonal() * p.vectors.transpose();
    CHECK((rec - s.mat()).norm() < 1e-10 * (1.0 + s.mat().norm()));
    CHECK((p.vectors.transpose() * p.vectors - Eigen::MatrixXd::Identity(9, 9)).norm() < 1e-10);
  }
}

TEST_CASE("SymMatrix rejects bad input") {
  CHECK_THROWS_AS(SymMatrix{Eigen::MatrixXd::Zero(2, 3)}, InvalidInput);
  Eigen::MatrixXd nanful = Eigen::MatrixXd::Zero(2, 2);
  nanful(0, 1) = std::nan("");
  CHECK_THROWS_AS(SymMatrix{nanful}, InvalidInput);
}

TEST_CASE("SPDMatrix rejects indefinite input") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(SPDMatrix{m}, NotSPD);
  CHECK_NOTHROW(SPDMatrix{Eigen::MatrixXd::Identity(3, 3)});
}

TEST_CASE("spd_log and spd_exp on diagonal matrices") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = std::exp(1.0);
  d(1, 1) = std::exp(2.0);
  const SymMatrix l = spd_log(SPDMatrix(d));
  CHECK(l(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(l(1, 1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(l(0, 1)) < 1e-12);

  CHECK(spd_log(SPDMatrix::identity(4)).mat().norm() < 1e-12);
  CHECK((spd_exp(SymMatrix::zero(4)).mat() - Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-12);
}

TEST_CASE("spd_exp overflow guard") {
  Eigen::MatrixXd big = 800.0 * Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(spd_exp(SymMatrix(big)), Overflow);
}

TEST_CASE("log/exp round trip on random SPD matrices") {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const SPDMatrix s = random_spd(7, 1e4, rng);
    const SPDMatrix back = spd_exp(spd_log(s));
    CHECK((back.mat() - s.mat()).norm() < 1e-8 * (1.0 + s.mat().norm()));
    const SymMatrix t = random_sym(7, rng);
    const SymMatrix back2 = spd_log(spd_exp(t));
    CHECK((back2.mat() - t.mat()).norm() < 1e-8 * (1.0 + t.mat().norm()));
  }
}

TEST_CASE("logeuclid_dist closed form for scaled identities") {
  // d(aI_n, b I_n) = sqrt(n) |log(b/a)|; n = 4, b/a = e gives exactly 2
  const SPDMatrix s1(SymMatrix(3.0 * Eigen::MatrixXd::Identity(4, 4)));
  const SPDMatrix s2(SymMatrix(3.0 * std::exp(1.0) * Eigen::MatrixXd::Identity(4, 4)));
  CHECK(logeuclid_dist(s1, s2) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("logeuclid_dist metric axioms") {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const SPDMatrix a = random_spd(5, 1e3, rng);
    const SPDMatrix b = random_spd(5, 1e3, rng);
    const SPDMatrix c = random_spd(5, 1e3, rng);
    const double dab = logeuclid_dist(a, b);
    const double dba = logeuclid_dist(b, a);
    CHECK(dab == doctest::Approx(dba).epsilon(1e-12));
    CHECK(logeuclid_dist(a, a) < 1e-10);
    CHECK(dab <= logeuclid_dist(a, c) + logeuclid_dist(c, b) + 1e-10);
  }
  CHECK_THROWS_AS(logeuclid_dist(random_spd(3, 10, rng), random_spd(4, 10, rng)), DimMismatch);
}

TEST_CASE("sym_vectorize basic values and sizes") {
  const Eigen::VectorXd v = sym_vectorize(SymMatrix::identity(2));
  REQUIRE(v.size() == 3);
  CHECK(v(0) == doctest::Approx(1.0));
  CHECK(v(1) == doctest::Approx(0.0));
  CHECK(v(2) == doctest::Approx(1.0));

  Rng rng(14);
  CHECK(sym_vectorize(random_sym(9, rng)).size() == 45);
}

TEST_CASE("sym_vectorize is an isometry with exact inverse") {
  Rng rng(15);
  for (int trial = 0; trial < 30; ++trial) {
    const SymMatrix s = random_sym(6, rng);
    const Eigen::VectorXd v = sym_vectorize(s);
    CHECK(v.norm() == doctest::Approx(s.mat().norm()).epsilon(1e-12));
    const SymMatrix back = sym_unvectorize(v, 6);
    CHECK((back.mat() - s.mat()).norm() < 1e-12 * (1.0 + s.mat().norm()));
    // adjoint identity: <vec(A), vec(B)> == <A, B>_F
    const SymMatrix t = random_sym(6, rng);
    CHECK(v.dot(sym_vectorize(t)) ==
          doctest::Approx((s.mat().array() * t.mat().array()).sum()).epsilon(1e-10));
  }
  CHECK_THROWS_AS(sym_unvectorize(Eigen::VectorXd::Zero(5), 3), DimMismatch);
}

TEST_CASE("loewner_matrix handles repeated and distinct eigenvalues") {
  auto flog = [](double x) { return std::log(x); };
  auto flog_p = [](double x) { return 1.0 / x; };

  Eigen::VectorXd rep(2);
  rep << 2.0, 2.0;
  const SymMatrix l = loewner_matrix(rep, flog, flog_p);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(l(i, j) == doctest::Approx(0.5).epsilon(1e-15));

  Eigen::VectorXd two(2);
  two << std::exp(1.0), 1.0;
  const SymMatrix l2 = loewner_matrix(two, flog, flog_p);
  CHECK(l2(0, 1) == doctest::Approx(1.0 / (std::exp(1.0) - 1.0)).epsilon(1e-12));
  CHECK(l2(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(l2(1, 1) == doctest::Approx(1.0).epsilon(1e-12));

  // near-degenerate pair: divided difference must approach the derivative
  Eigen::VectorXd close(2);
  close << 2.0, 2.0 + 1e-9;
  const SymMatrix l3 = loewner_matrix(close, flog, flog_p);
  CHECK(std::abs(l3(0, 1) - 0.5) < 1e-6);
}

TEST_CASE("ensure_spd repairs borderline matrices explicitly") {
  // already SPD: returned unchanged
  Rng rng(16);
  const SPDMatrix s = random_spd(5, 100, rng);
  const SPDMatrix r = ensure_spd(s.sym());
  CHECK((r.mat() - s.mat()).norm() == 0.0);

  // rank-1 PSD matrix gets the smallest sufficient ridge
  Eigen::MatrixXd rank1(2, 2);
  rank1 << 1.0, 1.0, 1.0, 1.0;
  const SPDMatrix fixed = ensure_spd(SymMatrix(rank1));
  CHECK(fixed.min_eig() > 0.0);
  CHECK((fixed.mat() - rank1).norm() < 0.2);  // ridge stays small relative to trace

  // nonpositive trace is unrepairable
  CHECK_THROWS_AS(ensure_spd(SymMatrix(-Eigen::MatrixXd::Identity(3, 3))), NotRepairable);
  CHECK_THROWS_AS(ensure_spd(SymMatrix::zero(3)), NotRepairable);
}

TEST_CASE("ensure_spd handles strongly indefinite input via large ridge") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 0.0, 0.0, -0.2;  // trace positive, min eig clearly negative
  const SPDMatrix r = ensure_spd(SymMatrix(m));
  CHECK(r.min_eig() > 0.0);

  // min eig too negative for even the largest scheduled ridge
  m << 1.0, 0.0, 0.0, -0.9;
  CHECK_THROWS_AS(ensure_spd(SymMatrix(m)), NotRepairable);
}
