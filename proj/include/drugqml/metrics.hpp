#pragma once

#include <vector>

#include <Eigen/Dense>

#include "drugqml/common.hpp"
#include "drugqml/molgraph.hpp"

namespace drugqml::metrics {

template <typename Scalar = double>
struct BasicGaussianStats {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cov;
};

using GaussianStats = BasicGaussianStats<double>;

/// Sample mean and unbiased covariance of the rows of `samples` (n x d).
template <typename Derived>
BasicGaussianStats<typename Derived::Scalar> fit_gaussian(const Eigen::MatrixBase<Derived>& samples) {
  using Scalar = typename Derived::Scalar;
  require(samples.rows() >= 2, "fit_gaussian: need at least 2 samples");
  BasicGaussianStats<Scalar> g;
  g.mean = samples.colwise().mean().transpose();
  const auto centered = (samples.rowwise() - g.mean.transpose()).eval();
  g.cov = (centered.transpose() * centered) / Scalar(samples.rows() - 1);
  g.cov = ((g.cov + g.cov.transpose()) / Scalar(2)).eval();
  return g;
}

GaussianStats fit_gaussian(const std::vector<Eigen::VectorXd>& features);

/// Symmetric PSD square root via eigendecomposition, negative eigenvalues
/// clamped to zero.
template <typename Derived>
typename Derived::PlainObject psd_sqrt(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const typename Derived::PlainObject sym = (m + m.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<typename Derived::PlainObject> es(sym);
  const auto roots = es.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with the trace of
/// the cross term taken from the eigenvalues of S_a^{1/2} S_b S_a^{1/2}.
template <typename Scalar>
Scalar frechet_distance(const BasicGaussianStats<Scalar>& a, const BasicGaussianStats<Scalar>& b) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto d = a.mean.size();
  if (b.mean.size() != d || a.cov.rows() != d || a.cov.cols() != d || b.cov.rows() != d || b.cov.cols() != d)
    throw ContractError("frechet_distance: dimension mismatch");
  if (!a.mean.allFinite() || !b.mean.allFinite() || !a.cov.allFinite() || !b.cov.allFinite())
    throw NumericalError("frechet_distance: non-finite statistics");
  const Mat ra = psd_sqrt(a.cov);
  const Mat inner = ra * b.cov * ra;
  Eigen::SelfAdjointEigenSolver<Mat> es((inner + inner.transpose()) / Scalar(2), Eigen::EigenvaluesOnly);
  const Scalar tr_cross = es.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt().sum();
  const Scalar fd = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - Scalar(2) * tr_cross;
  return std::max(fd, Scalar(0));
}

inline constexpr int kDescriptorDim = 10;

/// Counts of {C, N, O, F}, counts of {SINGLE, DOUBLE, TRIPLE, AROMATIC},
/// ring count, validity flag.
Eigen::VectorXd descriptor(const mol::MoleculeGraph& mol);
std::vector<Eigen::VectorXd> batch_descriptors(const std::vector<mol::MoleculeGraph>& mols);

/// FD between descriptor Gaussians of two molecule batches.
double descriptor_fd(const std::vector<mol::MoleculeGraph>& a, const std::vector<mol::MoleculeGraph>& b);

struct ClassificationMetrics {
  double cross_entropy = 0.0;
  double accuracy = 0.0;
};

/// logits: n x k. Mean softmax cross-entropy; argmax ties go to the lowest
/// index.
ClassificationMetrics classification_metrics(const Eigen::MatrixXd& logits, const std::vector<int>& labels);

/// Row-wise log-softmax, numerically stable.
Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits);

}  // namespace drugqml::metrics
