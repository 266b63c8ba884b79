#ifndef SPDNET_EXPLAIN_HPP
#define SPDNET_EXPLAIN_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "spdnet/errors.hpp"
#include "spdnet/network.hpp"
#include "spdnet/spd_core.hpp"

namespace spdnet {

/// Nonnegative symmetric relevance map over the ReEig activation.
struct RelevanceMap {
  Eigen::MatrixXd values;
  bool normalized = false;  // max-normalized to [0, 1]
  int dim() const { return static_cast<int>(values.rows()); }
};

/// GradCAM++ adapted to a single symmetric 2-D feature map (the ReEig
/// output, no channels, no spatial pooling): per-entry alpha weights with
/// the exp-score convention, relevance alpha * relu(grad) * activation,
/// symmetrized and max-normalized.
inline RelevanceMap gradcam_pp(const SpdNetModel& model, const SPDMatrix& feature,
                               int target_class) {
  if (target_class < 0 || target_class >= model.config.n_classes)
    throw InvalidInput("gradcam_pp: bad target class");
  const ForwardCache cache = forward_from_feature(model, feature);
  Eigen::VectorXd dlogits = Eigen::VectorXd::Zero(model.config.n_classes);
  dlogits(target_class) = 1.0;  // gradient of the pre-softmax class score
  const Gradients grads = model_backward(model, cache, dlogits);
  const Eigen::MatrixXd& g = grads.reeig_out;  // dy_c / dA
  const Eigen::MatrixXd& a = cache.z2;
  if (g.norm() == 0.0) throw ZeroSaliency("gradcam_pp: zero gradient everywhere");

  // exp-score convention: the exp(y_c) factors cancel inside alpha
  const double a_sum = a.sum();
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd rel(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double g1 = g(i, j);
      const double g2 = g1 * g1;
      const double g3 = g2 * g1;
      const double denom = 2.0 * g2 + a_sum * g3;
      const double alpha = (denom != 0.0) ? g2 / denom : 0.0;
      rel(i, j) = std::max(0.0, alpha * std::max(0.0, g1) * a(i, j));
    }
  rel = 0.5 * (rel + rel.transpose()).eval();
  RelevanceMap map;
  const double mx = rel.maxCoeff();
  if (mx > 0.0) {
    rel /= mx;
    map.normalized = true;
  }
  map.values = rel;
  return map;
}

inline RelevanceMap gradcam_pp(const SpdNetModel& model, const Epoch& x, int target_class) {
  return gradcam_pp(model, extract_feature(x, model.config.feature), target_class);
}

/// Extracts the p=0 block of an augmented-dimension map: entries at row/col
/// indices {c*psi : c = 0..C-1}.
inline Eigen::MatrixXd submatrix_zoom(const Eigen::MatrixXd& map, int channels, int psi) {
  if (map.rows() != map.cols() || map.rows() != channels * psi)
    throw DimMismatch("submatrix_zoom: map dims incompatible with C*psi");
  Eigen::MatrixXd out(channels, channels);
  for (int i = 0; i < channels; ++i)
    for (int j = 0; j < channels; ++j) out(i, j) = map(i * psi, j * psi);
  return out;
}

/// Mean relevance over the (ci, cj) lag block (both orientations) of a
/// Cpsi x Cpsi map.
inline double lag_block_mass(const Eigen::MatrixXd& map, int channels, int psi, int ci, int cj) {
  if (map.rows() != channels * psi) throw DimMismatch("lag_block_mass: bad dims");
  double acc = 0.0;
  for (int p = 0; p < psi; ++p)
    for (int q = 0; q < psi; ++q)
      acc += map(ci * psi + p, cj * psi + q) + map(cj * psi + p, ci * psi + q);
  return acc / (2.0 * psi * psi);
}

// ---------------------------------------------------------------------------
// significance testing

namespace detail {

inline double betacf(double a, double b, double x) {
  // continued fraction for the incomplete beta (modified Lentz)
  const int max_iter = 300;
  const double eps = 1e-14, fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

/// Regularized incomplete beta I_x(a, b), relative accuracy ~1e-12.
inline double betai(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log(1.0 - x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

/// Two-sided Student-t p-value with `dof` degrees of freedom.
inline double student_t_pvalue(double t, double dof) {
  if (dof <= 0.0) throw InvalidInput("student_t_pvalue: dof must be positive");
  if (t == 0.0) return 1.0;
  return detail::betai(0.5 * dof, 0.5, dof / (dof + t * t));
}

struct SignificanceResult {
  Eigen::MatrixXd t_stat;
  Eigen::MatrixXd p_value;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> flagged;  // zero-variance entries
  double alpha = 0.05;
};

inline Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> significance_mask(
    const Eigen::MatrixXd& p, double alpha = 0.05) {
  return p.array() < alpha;
}

/// Entrywise paired t-test between two equal-sized groups of symmetric
/// matrices (pairing by trial index). Zero-variance entries get p = 0 when
/// the mean difference is nonzero, p = 1 otherwise, and are flagged.
inline SignificanceResult paired_ttest(const std::vector<SymMatrix>& group_a,
                                       const std::vector<SymMatrix>& group_b,
                                       double alpha = 0.05) {
  if (group_a.size() != group_b.size() || group_a.size() < 2)
    throw InvalidInput("paired_ttest: need equal group sizes n >= 2");
  const std::size_t n = group_a.size();
  const int d = group_a[0].dim();
  SignificanceResult res;
  res.alpha = alpha;
  res.t_stat.setZero(d, d);
  res.p_value.setOnes(d, d);
  res.flagged.setConstant(d, d, false);
  const double dof = static_cast<double>(n) - 1.0;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t k = 0; k < n; ++k) mean += group_a[k](i, j) - group_b[k](i, j);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double dd = group_a[k](i, j) - group_b[k](i, j) - mean;
        var += dd * dd;
      }
      var /= dof;
      double t, p;
      if (var == 0.0) {
        res.flagged(i, j) = res.flagged(j, i) = true;
        t = 0.0;
        p = (mean != 0.0) ? 0.0 : 1.0;
      } else {
        t = mean / std::sqrt(var / static_cast<double>(n));
        p = student_t_pvalue(t, dof);
      }
      res.t_stat(i, j) = res.t_stat(j, i) = t;
      res.p_value(i, j) = res.p_value(j, i) = p;
    }
  res.mask = significance_mask(res.p_value, alpha);
  return res;
}

/// Unpaired Welch variant for unequal group sizes (Welch-Satterthwaite dof).
inline SignificanceResult welch_ttest(const std::vector<SymMatrix>& group_a,
                                      const std::vector<SymMatrix>& group_b,
                                      double alpha = 0.05) {
  if (group_a.size() < 2 || group_b.size() < 2)
    throw InvalidInput("welch_ttest: need n >= 2 per group");
  const std::size_t na = group_a.size(), nb = group_b.size();
  const int d = group_a[0].dim();
  SignificanceResult res;
  res.alpha = alpha;
  res.t_stat.setZero(d, d);
  res.p_value.setOnes(d, d);
  res.flagged.setConstant(d, d, false);
  auto moments = [](const std::vector<SymMatrix>& g, int i, int j) {
    double mean = 0.0;
    for (const auto& m : g) mean += m(i, j);
    mean /= static_cast<double>(g.size());
    double var = 0.0;
    for (const auto& m : g) {
      const double dd = m(i, j) - mean;
      var += dd * dd;
    }
    var /= static_cast<double>(g.size()) - 1.0;
    return std::pair<double, double>(mean, var);
  };
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      const auto [ma, va] = moments(group_a, i, j);
      const auto [mb, vb] = moments(group_b, i, j);
      const double se2 = va / static_cast<double>(na) + vb / static_cast<double>(nb);
      double t, p;
      if (se2 == 0.0) {
        res.flagged(i, j) = res.flagged(j, i) = true;
        t = 0.0;
        p = (ma != mb) ? 0.0 : 1.0;
      } else {
        t = (ma - mb) / std::sqrt(se2);
        const double dof =
            se2 * se2 /
            (va * va / (static_cast<double>(na) * na * (na - 1.0)) +
             vb * vb / (static_cast<double>(nb) * nb * (nb - 1.0)));
        p = student_t_pvalue(t, dof);
      }
      res.t_stat(i, j) = res.t_stat(j, i) = t;
      res.p_value(i, j) = res.p_value(j, i) = p;
    }
  res.mask = significance_mask(res.p_value, alpha);
  return res;
}

// ---------------------------------------------------------------------------
// exports

inline void write_matrix_csv(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("write_matrix_csv: cannot open " + path.string());
  f.precision(17);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) f << ",";
      f << m(i, j);
    }
    f << "\n";
  }
}

inline void write_mask_csv(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& m,
                           const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("write_mask_csv: cannot open " + path.string());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) f << ",";
      f << (m(i, j) ? 1 : 0);
    }
    f << "\n";
  }
}

/// 8-bit binary PGM heatmap, row-major, max-normalized.
inline void write_pgm(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("write_pgm: cannot open " + path.string());
  const double mx = m.maxCoeff();
  f << "P5\n" << m.cols() << " " << m.rows() << "\n255\n";
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) {
      const double x = mx > 0.0 ? m(i, j) / mx : 0.0;
      const auto byte = static_cast<unsigned char>(
          std::clamp(static_cast<int>(std::lround(255.0 * x)), 0, 255));
      f.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

}  // namespace spdnet

#endif
