#ifndef SPDNET_SPD_CORE_HPP
#define SPDNET_SPD_CORE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "spdnet/errors.hpp"

namespace spdnet {

/// Symmetric real matrix. Inputs are symmetrized as (A + A^T)/2 on
/// construction so floating-point asymmetry cannot propagate.
class SymMatrix {
 public:
  explicit SymMatrix(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols() || a.rows() < 1)
      throw InvalidInput("SymMatrix: input must be square with dim >= 1");
    if (!a.allFinite()) throw InvalidInput("SymMatrix: non-finite entries");
    mat_ = 0.5 * (a + a.transpose());
  }

  static SymMatrix zero(int n) { return SymMatrix(Eigen::MatrixXd::Zero(n, n)); }
  static SymMatrix identity(int n) { return SymMatrix(Eigen::MatrixXd::Identity(n, n)); }

  int dim() const { return static_cast<int>(mat_.rows()); }
  const Eigen::MatrixXd& mat() const { return mat_; }
  double operator()(int i, int j) const { return mat_(i, j); }

 private:
  Eigen::MatrixXd mat_;
};

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
struct EigPair {
  Eigen::MatrixXd vectors;  // columns are eigenvectors
  Eigen::VectorXd values;   // descending
};

/// Symmetric eigendecomposition (tridiagonalization + implicit-shift QL via
/// Eigen's self-adjoint solver). Never a general nonsymmetric routine.
inline EigPair sym_eig(const SymMatrix& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.mat());
  if (es.info() != Eigen::Success) throw InvalidInput("sym_eig: decomposition failed");
  const int n = s.dim();
  EigPair p;
  p.values = es.eigenvalues().reverse();
  p.vectors.resize(n, n);
  for (int i = 0; i < n; ++i) p.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  return p;
}

/// Symmetric positive definite matrix.
class SPDMatrix {
 public:
  explicit SPDMatrix(const SymMatrix& s) : inner_(s) {
    const EigPair p = sym_eig(s);
    // tolerance policy: reject only below -1e-12*||S||_F; values in the
    // grey zone are lifted exclusively through ensure_spd, never here
    const double tol = 1e-12 * s.mat().norm();
    min_eig_ = p.values(s.dim() - 1);
    if (min_eig_ <= -tol)
      throw NotSPD("SPDMatrix: smallest eigenvalue " + std::to_string(min_eig_) +
                   " is not positive");
  }
  explicit SPDMatrix(const Eigen::MatrixXd& a) : SPDMatrix(SymMatrix(a)) {}

  static SPDMatrix identity(int n) { return SPDMatrix(SymMatrix::identity(n)); }

  int dim() const { return inner_.dim(); }
  const SymMatrix& sym() const { return inner_; }
  const Eigen::MatrixXd& mat() const { return inner_.mat(); }
  double min_eig() const { return min_eig_; }

 private:
  SymMatrix inner_;
  double min_eig_;
};

/// Matrix logarithm of an SPD matrix: U log(Sigma) U^T.
inline SymMatrix spd_log(const SPDMatrix& s) {
  const EigPair p = sym_eig(s.sym());
  if (p.values(s.dim() - 1) <= 0.0) throw NotSPD("spd_log: nonpositive eigenvalue");
  const Eigen::VectorXd logs = p.values.array().log();
  return SymMatrix(p.vectors * logs.asDiagonal() * p.vectors.transpose());
}

/// Matrix exponential of a symmetric matrix: U exp(Sigma) U^T. Always SPD.
inline SPDMatrix spd_exp(const SymMatrix& s) {
  const EigPair p = sym_eig(s);
  const double max_log = std::log(std::numeric_limits<double>::max()) - 8.0;
  if (p.values(0) > max_log) throw Overflow("spd_exp: eigenvalue too large");
  const Eigen::VectorXd exps = p.values.array().exp();
  return SPDMatrix(SymMatrix(p.vectors * exps.asDiagonal() * p.vectors.transpose()));
}

/// Log-Euclidean distance ||log(S2) - log(S1)||_F.
inline double logeuclid_dist(const SPDMatrix& s1, const SPDMatrix& s2) {
  if (s1.dim() != s2.dim()) throw DimMismatch("logeuclid_dist: dimension mismatch");
  return (spd_log(s2).mat() - spd_log(s1).mat()).norm();
}

/// Half-vectorization of a symmetric matrix (upper triangle, row-major) with
/// off-diagonal entries scaled by sqrt(2), so the Euclidean inner product of
/// vectors equals the Frobenius inner product of matrices.
inline Eigen::VectorXd sym_vectorize(const SymMatrix& s) {
  const int n = s.dim();
  Eigen::VectorXd v(n * (n + 1) / 2);
  const double sq2 = std::sqrt(2.0);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) v(k++) = (i == j) ? s(i, j) : sq2 * s(i, j);
  return v;
}

/// Inverse of sym_vectorize. Also the adjoint, since the map is an isometry.
inline SymMatrix sym_unvectorize(const Eigen::VectorXd& v, int n) {
  if (v.size() != n * (n + 1) / 2) throw DimMismatch("sym_unvectorize: length mismatch");
  Eigen::MatrixXd m(n, n);
  const double inv_sq2 = 1.0 / std::sqrt(2.0);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double x = (i == j) ? v(k) : inv_sq2 * v(k);
      m(i, j) = x;
      m(j, i) = x;
      ++k;
    }
  return SymMatrix(m);
}

/// First divided differences of f on the spectrum:
///   L[i][j] = (f(s_i) - f(s_j)) / (s_i - s_j)   if s_i != s_j
///   L[i][i] = f'(s_i)
/// Total at repeated eigenvalues; backs the eig-layer backward passes.
inline SymMatrix loewner_matrix(const Eigen::VectorXd& values,
                                const std::function<double(double)>& f,
                                const std::function<double(double)>& fprime) {
  if (!values.allFinite()) throw InvalidInput("loewner_matrix: non-finite values");
  const int n = static_cast<int>(values.size());
  Eigen::MatrixXd l(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double a = values(i), b = values(j);
      double x;
      if (a == b) {
        x = fprime(a);
      } else {
        x = (f(a) - f(b)) / (a - b);
      }
      l(i, j) = x;
      l(j, i) = x;
    }
  }
  return SymMatrix(l);
}

struct SpdRepairPolicy {
  /// abs floor for the smallest eigenvalue, as a fraction of trace/dim
  double floor_scale = 1e-12;
  /// ridge schedule, as fractions of trace/dim
  std::vector<double> gamma_schedule{0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1e-1, 1.0, 10.0};
};

/// Repairs a symmetric matrix into an SPD one by adding the smallest ridge
/// gamma * trace(A)/dim * I from the schedule that lifts the minimum
/// eigenvalue above the floor. Repair is always explicit, never silent.
inline SPDMatrix ensure_spd(const SymMatrix& a, const SpdRepairPolicy& policy = {}) {
  const int n = a.dim();
  const double mean_diag = a.mat().trace() / n;
  if (mean_diag <= 0.0) throw NotRepairable("ensure_spd: nonpositive trace");
  const double floor = policy.floor_scale * mean_diag;
  const EigPair p = sym_eig(a);
  const double min_eig = p.values(n - 1);
  for (double gamma : policy.gamma_schedule) {
    if (min_eig + gamma * mean_diag >= floor) {
      if (gamma == 0.0) return SPDMatrix(a);
      return SPDMatrix(SymMatrix(a.mat() + gamma * mean_diag * Eigen::MatrixXd::Identity(n, n)));
    }
  }
  throw NotRepairable("ensure_spd: ridge schedule exhausted");
}

}  // namespace spdnet

#endif
