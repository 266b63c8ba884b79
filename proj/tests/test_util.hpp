#ifndef SPDNET_TEST_UTIL_HPP
#define SPDNET_TEST_UTIL_HPP

#include <Eigen/Dense>
#include <cmath>

#include "spdnet/network.hpp"
#include "spdnet/rng.hpp"
#include "spdnet/spd_core.hpp"

namespace test_util {

inline Eigen::MatrixXd random_gaussian(int rows, int cols, spdnet::Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

inline spdnet::SymMatrix random_sym(int dim, spdnet::Rng& rng) {
  return spdnet::SymMatrix(random_gaussian(dim, dim, rng));
}

/// Random SPD matrix with condition number <= cond (log-uniform spectrum).
inline spdnet::SPDMatrix random_spd(int dim, double cond, spdnet::Rng& rng) {
  const Eigen::MatrixXd u = spdnet::random_stiefel(dim, dim, rng).transpose();
  Eigen::VectorXd vals(dim);
  const double half = 0.5 * std::log(cond);
  for (int i = 0; i < dim; ++i) vals(i) = std::exp(-half + 2.0 * half * rng.uniform());
  return spdnet::SPDMatrix(
      spdnet::SymMatrix(u * vals.asDiagonal() * u.transpose()));
}

}  // namespace test_util

#endif
