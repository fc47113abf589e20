#include "lpvsyn/linalg.hpp"

#include <stdexcept>

namespace lpvsyn {

Eigen::MatrixXd khatri_rao_columns(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("khatri_rao_columns: column counts differ (" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.cols()) + ")");
  }
  const Eigen::Index m = a.rows(), p = b.rows(), t = a.cols();
  Eigen::MatrixXd out(m * p, t);
  for (Eigen::Index c = 0; c < t; ++c) {
    for (Eigen::Index q = 0; q < p; ++q) {
      out.block(q * m, c, m, 1) = b(q, c) * a.col(c);
    }
  }
  return out;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

double min_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double asymmetry(const Eigen::MatrixXd& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double rel_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cut = rel_tol * (sv.size() > 0 ? sv(0) : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cut) inv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::MatrixXd schur_complement_lower(const Eigen::MatrixXd& m, Eigen::Index head) {
  if (m.rows() != m.cols() || head < 0 || head > m.rows()) {
    throw std::invalid_argument("schur_complement_lower: bad partition");
  }
  const Eigen::Index k = m.rows() - head;
  const Eigen::MatrixXd m11 = m.topLeftCorner(head, head);
  const Eigen::MatrixXd m12 = m.topRightCorner(head, k);
  const Eigen::MatrixXd m22 = m.bottomRightCorner(k, k);
  return m11 - m12 * pseudo_inverse(m22) * m12.transpose();
}

}  // namespace lpvsyn
