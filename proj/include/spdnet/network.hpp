#ifndef SPDNET_NETWORK_HPP
#define SPDNET_NETWORK_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "spdnet/errors.hpp"
#include "spdnet/features.hpp"
#include "spdnet/rng.hpp"
#include "spdnet/signal.hpp"
#include "spdnet/spd_core.hpp"

namespace spdnet {

/// Bilinear layer Z -> W Z W^T with W on the compact Stiefel manifold
/// (orthonormal rows, d_out <= d_in).
struct BiMapLayer {
  Eigen::MatrixXd w;  // d_out x d_in

  int d_out() const { return static_cast<int>(w.rows()); }
  int d_in() const { return static_cast<int>(w.cols()); }
  double orthonormality_residual() const {
    return (w * w.transpose() - Eigen::MatrixXd::Identity(w.rows(), w.rows())).norm();
  }
};

struct ReEigLayer {
  double epsilon = 1e-4;
};

struct DenseLayer {
  Eigen::MatrixXd w;  // n_classes x n_features
  Eigen::VectorXd b;  // n_classes
};

/// Uniformly random point on the Stiefel manifold: orthonormal factor of the
/// QR of a Gaussian matrix with the R diagonal forced positive, first d_out
/// rows kept.
inline Eigen::MatrixXd random_stiefel(int d_out, int d_in, Rng& rng) {
  if (d_out > d_in) throw InvalidInput("random_stiefel: d_out > d_in");
  Eigen::MatrixXd g(d_in, d_in);
  for (int i = 0; i < d_in; ++i)
    for (int j = 0; j < d_in; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < d_in; ++i)
    if (r(i, i) < 0.0) q.col(i) *= -1.0;
  return q.leftCols(d_out).transpose();
}

struct ModelConfig {
  FeatureConfig feature;
  bool halve_bimap = true;  // SPDNet-psi halves; plain SPDNet keeps d_out = d_in
  double reeig_eps = 1e-4;
  int n_classes = 2;
  std::uint64_t seed = 0;
};

/// SPDNet(-psi) stack: BiMap -> ReEig -> LogEig/vectorize -> Linear.
struct SpdNetModel {
  ModelConfig config;
  BiMapLayer bimap;
  ReEigLayer reeig;
  DenseLayer dense;
  int input_dim = 0;
  /// bumped on every weight mutation; guards stale forward caches
  std::uint64_t version = 0;

  int bimap_out_dim() const { return bimap.d_out(); }
  int logeig_dim() const {
    const int d = bimap.d_out();
    return d * (d + 1) / 2;
  }
};

inline SpdNetModel make_model(const ModelConfig& cfg, int input_dim) {
  if (input_dim < 1) throw InvalidInput("make_model: input_dim must be >= 1");
  SpdNetModel m;
  m.config = cfg;
  m.input_dim = input_dim;
  const int d_out = cfg.halve_bimap ? std::max(1, input_dim / 2) : input_dim;
  Rng rng = Rng::keyed(cfg.seed, 0xB1);
  m.bimap.w = random_stiefel(d_out, input_dim, rng);
  m.reeig.epsilon = cfg.reeig_eps;
  const int n_feat = d_out * (d_out + 1) / 2;
  Rng rng_d = Rng::keyed(cfg.seed, 0xDE);
  m.dense.w.resize(cfg.n_classes, n_feat);
  const double std = 1.0 / std::sqrt(static_cast<double>(n_feat));
  for (int i = 0; i < m.dense.w.rows(); ++i)
    for (int j = 0; j < m.dense.w.cols(); ++j) m.dense.w(i, j) = std * rng_d.normal();
  m.dense.b = Eigen::VectorXd::Zero(cfg.n_classes);
  return m;
}

// ---------------------------------------------------------------------------
// forward

inline SPDMatrix bimap_forward(const BiMapLayer& layer, const SPDMatrix& z) {
  if (z.dim() != layer.d_in()) throw DimMismatch("bimap_forward: dimension mismatch");
  return SPDMatrix(SymMatrix(layer.w * z.mat() * layer.w.transpose()));
}

inline SPDMatrix reeig_forward(const ReEigLayer& layer, const SPDMatrix& z) {
  const EigPair p = sym_eig(z.sym());
  const Eigen::VectorXd clamped = p.values.array().max(layer.epsilon);
  return SPDMatrix(SymMatrix(p.vectors * clamped.asDiagonal() * p.vectors.transpose()));
}

inline Eigen::VectorXd logeig_forward(const SPDMatrix& z) { return sym_vectorize(spd_log(z)); }

inline Eigen::VectorXd dense_forward(const DenseLayer& layer, const Eigen::VectorXd& v) {
  return layer.w * v + layer.b;
}

/// Numerically stabilized cross-entropy. Returns the loss and the gradient
/// with respect to the logits (softmax - onehot).
inline std::pair<double, Eigen::VectorXd> softmax_xent(const Eigen::VectorXd& logits, int label) {
  if (label < 0 || label >= logits.size()) throw InvalidInput("softmax_xent: bad label");
  const double m = logits.maxCoeff();
  const Eigen::VectorXd e = (logits.array() - m).exp();
  const double z = e.sum();
  Eigen::VectorXd grad = e / z;
  const double loss = -std::log(grad(label));
  grad(label) -= 1.0;
  return {loss, grad};
}

struct ForwardCache {
  Eigen::MatrixXd feature;  // SPD input to the stack
  Eigen::MatrixXd z1;       // BiMap output
  EigPair eig1;             // eig of z1 (ReEig)
  Eigen::MatrixXd z2;       // ReEig output
  EigPair eig2;             // eig of z2 (LogEig)
  Eigen::VectorXd v;        // LogEig vectorization
  Eigen::VectorXd logits;
  std::uint64_t model_version = 0;
};

inline ForwardCache forward_from_feature(const SpdNetModel& m, const SPDMatrix& s) {
  if (s.dim() != m.input_dim) throw DimMismatch("forward_from_feature: feature dim mismatch");
  ForwardCache c;
  c.model_version = m.version;
  c.feature = s.mat();
  c.z1 = m.bimap.w * c.feature * m.bimap.w.transpose();
  c.z1 = 0.5 * (c.z1 + c.z1.transpose()).eval();
  c.eig1 = sym_eig(SymMatrix(c.z1));
  const Eigen::VectorXd clamped = c.eig1.values.array().max(m.reeig.epsilon);
  c.z2 = c.eig1.vectors * clamped.asDiagonal() * c.eig1.vectors.transpose();
  c.z2 = 0.5 * (c.z2 + c.z2.transpose()).eval();
  c.eig2 = sym_eig(SymMatrix(c.z2));
  const Eigen::VectorXd logs = c.eig2.values.array().log();
  c.v = sym_vectorize(
      SymMatrix(c.eig2.vectors * logs.asDiagonal() * c.eig2.vectors.transpose()));
  c.logits = dense_forward(m.dense, c.v);
  return c;
}

inline ForwardCache model_forward(const SpdNetModel& m, const Epoch& x) {
  return forward_from_feature(m, extract_feature(x, m.config.feature));
}

// ---------------------------------------------------------------------------
// backward

struct Gradients {
  Eigen::MatrixXd bimap_w;   // Euclidean gradient; projected by the optimizer
  Eigen::MatrixXd dense_w;
  Eigen::VectorXd dense_b;
  Eigen::MatrixXd reeig_out; // dL/d(ReEig output); consumed by GradCAM++

  static Gradients zero(const SpdNetModel& m) {
    Gradients g;
    g.bimap_w = Eigen::MatrixXd::Zero(m.bimap.w.rows(), m.bimap.w.cols());
    g.dense_w = Eigen::MatrixXd::Zero(m.dense.w.rows(), m.dense.w.cols());
    g.dense_b = Eigen::VectorXd::Zero(m.dense.b.size());
    g.reeig_out = Eigen::MatrixXd::Zero(m.bimap.d_out(), m.bimap.d_out());
    return g;
  }

  Gradients& operator+=(const Gradients& o) {
    bimap_w += o.bimap_w;
    dense_w += o.dense_w;
    dense_b += o.dense_b;
    reeig_out += o.reeig_out;
    return *this;
  }

  Gradients& operator*=(double a) {
    bimap_w *= a;
    dense_w *= a;
    dense_b *= a;
    reeig_out *= a;
    return *this;
  }

  bool all_finite() const {
    return bimap_w.allFinite() && dense_w.allFinite() && dense_b.allFinite();
  }
};

namespace detail {

/// Backward through a spectral map Y = U f(Sigma) U^T:
///   dL/dZ = U [ L o (U^T G U) ] U^T,  L the Loewner matrix of f.
inline Eigen::MatrixXd eig_layer_backward(const EigPair& p, const Eigen::MatrixXd& grad_out,
                                          const std::function<double(double)>& f,
                                          const std::function<double(double)>& fprime) {
  const Eigen::MatrixXd g_sym = 0.5 * (grad_out + grad_out.transpose());
  const Eigen::MatrixXd l = loewner_matrix(p.values, f, fprime).mat();
  const Eigen::MatrixXd inner = p.vectors.transpose() * g_sym * p.vectors;
  Eigen::MatrixXd out = p.vectors * inner.cwiseProduct(l) * p.vectors.transpose();
  return 0.5 * (out + out.transpose()).eval();
}

}  // namespace detail

/// Structured backward through the full stack. The eig-layer passes use the
/// Loewner (divided-difference) calculus, which stays total at the repeated
/// eigenvalues that ReEig clamping creates.
inline Gradients model_backward(const SpdNetModel& m, const ForwardCache& cache,
                                const Eigen::VectorXd& dlogits) {
  if (cache.model_version != m.version)
    throw CacheMismatch("model_backward: cache predates a weight update");

  Gradients g;
  // dense
  g.dense_w = dlogits * cache.v.transpose();
  g.dense_b = dlogits;
  const Eigen::VectorXd dv = m.dense.w.transpose() * dlogits;

  // undo vectorization (isometry: the adjoint is the inverse map)
  const int d = m.bimap.d_out();
  const Eigen::MatrixXd g_log = sym_unvectorize(dv, d).mat();

  // LogEig
  const Eigen::MatrixXd g_z2 = detail::eig_layer_backward(
      cache.eig2, g_log, [](double x) { return std::log(x); },
      [](double x) { return 1.0 / x; });
  g.reeig_out = g_z2;

  // ReEig
  const double eps = m.reeig.epsilon;
  const Eigen::MatrixXd g_z1 = detail::eig_layer_backward(
      cache.eig1, g_z2, [eps](double x) { return std::max(eps, x); },
      [eps](double x) { return x > eps ? 1.0 : 0.0; });

  // BiMap: Z1 = W S W^T, so dL/dW = (G + G^T) W S = 2 G W S for symmetric G
  g.bimap_w = 2.0 * g_z1 * m.bimap.w * cache.feature;
  return g;
}

// ---------------------------------------------------------------------------
// reporting

struct ShapeRow {
  std::string stage;
  std::string layer;
  std::vector<int> output;
  long params = 0;
};

inline long param_count(const SpdNetModel& m) {
  return static_cast<long>(m.bimap.w.size()) + static_cast<long>(m.dense.w.size()) +
         static_cast<long>(m.dense.b.size());
}

/// Layer-by-layer shape table for a C x T input.
inline std::vector<ShapeRow> shape_report(const SpdNetModel& m, int channels, int samples) {
  std::vector<ShapeRow> rows;
  rows.push_back({"Input", "", {1, channels, samples}, 0});
  int d = channels;
  if (m.config.feature.kind == FeatureKind::AugmentedCovariance) {
    const EmbeddingParams& p = m.config.feature.embedding;
    d = channels * p.psi;
    rows.push_back({"Augmentation", "AugmentedDataset", {1, d, samples - p.psi * p.tau}, 0});
  }
  rows.push_back({"Covariance", "Covariances", {1, d, d}, 0});
  const int d_out = m.bimap.d_out();
  rows.push_back({"SPDNet", "BiMap", {1, d_out, d_out}, static_cast<long>(m.bimap.w.size())});
  rows.push_back({"SPDNet", "ReEig", {1, d_out, d_out}, 0});
  rows.push_back({"SPDNet", "LogEig", {1, m.logeig_dim()}, 0});
  rows.push_back({"Classification", "Linear", {1, m.config.n_classes},
                  static_cast<long>(m.dense.w.size()) + static_cast<long>(m.dense.b.size())});
  return rows;
}

}  // namespace spdnet

#endif
