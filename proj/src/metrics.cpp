#include "drugqml/metrics.hpp"

#include <cmath>

namespace drugqml::metrics {

GaussianStats fit_gaussian(const std::vector<Eigen::VectorXd>& features) {
  require(features.size() >= 2, "fit_gaussian: need at least 2 samples");
  const auto d = features.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(features.size()), d);
  for (size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != d) throw ContractError("fit_gaussian: feature dimension mismatch");
    m.row(static_cast<Eigen::Index>(i)) = features[i].transpose();
  }
  return fit_gaussian(m);
}

Eigen::VectorXd descriptor(const mol::MoleculeGraph& m) {
  using mol::BondKind;
  using mol::Element;
  Eigen::VectorXd d = Eigen::VectorXd::Zero(kDescriptorDim);
  const int n = m.max_atoms();
  for (int i = 0; i < n; ++i) {
    switch (m.atom(i)) {
      case Element::C: d(0) += 1; break;
      case Element::N: d(1) += 1; break;
      case Element::O: d(2) += 1; break;
      case Element::F: d(3) += 1; break;
      default: break;
    }
    for (int j = i + 1; j < n; ++j) {
      const BondKind b = m.bond(i, j);
      if (b != BondKind::None) d(3 + static_cast<int>(b)) += 1;
    }
  }
  d(8) = mol::count_rings(m);
  d(9) = mol::is_valid(m).valid ? 1.0 : 0.0;
  return d;
}

std::vector<Eigen::VectorXd> batch_descriptors(const std::vector<mol::MoleculeGraph>& mols) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(mols.size());
  for (const auto& m : mols) out.push_back(descriptor(m));
  return out;
}

double descriptor_fd(const std::vector<mol::MoleculeGraph>& a, const std::vector<mol::MoleculeGraph>& b) {
  return frechet_distance(fit_gaussian(batch_descriptors(a)), fit_gaussian(batch_descriptors(b)));
}

Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits) {
  const Eigen::VectorXd mx = logits.rowwise().maxCoeff();
  Eigen::MatrixXd shifted = logits.colwise() - mx;
  const Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log();
  return shifted.colwise() - lse;
}

ClassificationMetrics classification_metrics(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  require(static_cast<Eigen::Index>(labels.size()) == logits.rows(), "classification_metrics: label count mismatch");
  require(!labels.empty(), "classification_metrics: empty batch");
  const Eigen::MatrixXd lsm = log_softmax_rows(logits);
  ClassificationMetrics m;
  int correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= logits.cols())
      throw ContractError("classification_metrics: label " + std::to_string(y) + " out of range");
    m.cross_entropy -= lsm(i, y);
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = c;
    correct += best == y;
  }
  m.cross_entropy /= double(logits.rows());
  m.accuracy = double(correct) / double(logits.rows());
  return m;
}

}  // namespace drugqml::metrics
