#include "lpvsyn/sdp/problem.hpp"

#include <stdexcept>

#include "lpvsyn/linalg.hpp"

namespace lpvsyn::sdp {

namespace {
// Exact symmetrization: (m + m^T)/2 entrywise is bitwise symmetric because
// IEEE addition is commutative.
Eigen::MatrixXd exact_sym(const Eigen::MatrixXd& m, const char* what) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (asymmetry(m) > 1e-9 * scale) {
    throw std::invalid_argument(std::string(what) + ": coefficient matrix is not symmetric");
  }
  return 0.5 * (m + m.transpose());
}
}  // namespace

Eigen::MatrixXd AffineBlock::eval(const Eigen::VectorXd& y) const {
  Eigen::MatrixXd v = constant;
  for (const auto& [var, coeff] : coeffs) v += y[var] * coeff;
  return v;
}

int SdpProblem::add_scalars(int count, ScalarSign sign, const std::string& label_prefix) {
  const int first = num_scalars();
  for (int i = 0; i < count; ++i) {
    signs_.push_back(sign);
    labels_.push_back(count == 1 ? label_prefix : label_prefix + "[" + std::to_string(i) + "]");
  }
  return first;
}

int SdpProblem::add_block(Eigen::Index dim, const std::string& label, bool margin_exempt) {
  if (dim <= 0) throw std::invalid_argument("add_block: dimension must be positive");
  AffineBlock b;
  b.dim = dim;
  b.constant = Eigen::MatrixXd::Zero(dim, dim);
  b.label = label;
  b.margin_exempt = margin_exempt;
  blocks_.push_back(std::move(b));
  return static_cast<int>(blocks_.size()) - 1;
}

AffineBlock& SdpProblem::block_at(int block) {
  if (block < 0 || block >= static_cast<int>(blocks_.size())) {
    throw std::out_of_range("block index out of range");
  }
  return blocks_[static_cast<size_t>(block)];
}

void SdpProblem::place(Eigen::MatrixXd& target, Eigen::Index row, Eigen::Index col,
                       const Eigen::MatrixXd& m) const {
  if (row < 0 || col < 0 || row + m.rows() > target.rows() || col + m.cols() > target.cols()) {
    throw std::out_of_range("placement exceeds block bounds");
  }
  if (row == col && m.rows() == m.cols()) {
    target.block(row, col, m.rows(), m.cols()) += exact_sym(m, "diagonal placement");
    return;
  }
  target.block(row, col, m.rows(), m.cols()) += m;
  target.block(col, row, m.cols(), m.rows()) += m.transpose();
}

void SdpProblem::add_constant(int block, Eigen::Index row, Eigen::Index col,
                              const Eigen::MatrixXd& m) {
  place(block_at(block).constant, row, col, m);
}

void SdpProblem::add_coeff(int block, int var, Eigen::Index row, Eigen::Index col,
                           const Eigen::MatrixXd& m) {
  if (var < 0 || var >= num_scalars()) throw std::out_of_range("decision index out of range");
  AffineBlock& b = block_at(block);
  auto [it, inserted] = b.coeffs.try_emplace(var, Eigen::MatrixXd::Zero(b.dim, b.dim));
  place(it->second, row, col, m);
}

void SdpProblem::set_block_coeff(int block, int var, const Eigen::MatrixXd& sym) {
  if (var < 0 || var >= num_scalars()) throw std::out_of_range("decision index out of range");
  AffineBlock& b = block_at(block);
  if (sym.rows() != b.dim || sym.cols() != b.dim) {
    throw std::invalid_argument("set_block_coeff: dimension mismatch with block");
  }
  b.coeffs[var] = exact_sym(sym, "set_block_coeff");
}

void SdpProblem::set_objective(const Eigen::VectorXd& c) {
  if (c.size() != 0 && c.size() != num_scalars()) {
    throw std::invalid_argument("objective length must match scalar count");
  }
  objective_ = c;
}

void SdpProblem::add_objective_term(int var, double weight) {
  if (objective_.size() == 0) objective_ = Eigen::VectorXd::Zero(num_scalars());
  if (objective_.size() != num_scalars()) {
    throw std::logic_error("objective allocated before all scalars were added");
  }
  objective_[var] += weight;
}

bool SdpProblem::structurally_equal(const SdpProblem& other, double tol) const {
  if (num_scalars() != other.num_scalars() || blocks_.size() != other.blocks_.size()) return false;
  if (signs_ != other.signs_ || labels_ != other.labels_) return false;
  auto close = [tol](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           ((a - b).cwiseAbs().maxCoeff() <= tol || (a.size() == 0 && b.size() == 0));
  };
  Eigen::VectorXd c0 = objective_.size() ? objective_ : Eigen::VectorXd::Zero(num_scalars());
  Eigen::VectorXd c1 =
      other.objective_.size() ? other.objective_ : Eigen::VectorXd::Zero(other.num_scalars());
  if ((c0 - c1).cwiseAbs().maxCoeff() > tol) return false;
  for (size_t j = 0; j < blocks_.size(); ++j) {
    const auto& a = blocks_[j];
    const auto& b = other.blocks_[j];
    if (a.dim != b.dim || a.label != b.label || a.margin_exempt != b.margin_exempt) return false;
    if (!close(a.constant, b.constant)) return false;
    if (a.coeffs.size() != b.coeffs.size()) return false;
    for (auto ita = a.coeffs.begin(), itb = b.coeffs.begin(); ita != a.coeffs.end();
         ++ita, ++itb) {
      if (ita->first != itb->first || !close(ita->second, itb->second)) return false;
    }
  }
  return true;
}

void SdpProblem::validate() const {
  for (const auto& b : blocks_) {
    if (b.constant.rows() != b.dim || b.constant.cols() != b.dim) {
      throw std::logic_error("block constant dimension mismatch");
    }
    for (const auto& [var, coeff] : b.coeffs) {
      if (var < 0 || var >= num_scalars()) throw std::logic_error("coefficient variable index");
      if (coeff.rows() != b.dim || coeff.cols() != b.dim) {
        throw std::logic_error("coefficient dimension mismatch");
      }
    }
  }
  if (objective_.size() != 0 && objective_.size() != num_scalars()) {
    throw std::logic_error("objective length mismatch");
  }
}

ResidualReport residual_report(const SdpProblem& problem, const Eigen::VectorXd& candidate,
                               double strict_floor) {
  if (candidate.size() != problem.num_scalars()) {
    throw std::invalid_argument("residual_report: candidate length mismatch");
  }
  ResidualReport report;
  report.block_min_eigs.resize(problem.num_blocks());
  for (Eigen::Index j = 0; j < problem.num_blocks(); ++j) {
    report.block_min_eigs[j] =
        min_eigenvalue(problem.blocks()[static_cast<size_t>(j)].eval(candidate));
  }
  report.sign_violations = Eigen::VectorXd::Zero(problem.num_scalars());
  for (int i = 0; i < problem.num_scalars(); ++i) {
    switch (problem.scalar_signs()[static_cast<size_t>(i)]) {
      case ScalarSign::kFree:
        break;
      case ScalarSign::kNonNegative:
        report.sign_violations[i] = std::max(0.0, -candidate[i]);
        break;
      case ScalarSign::kStrictPositive:
        report.sign_violations[i] = std::max(0.0, strict_floor - candidate[i]);
        break;
    }
  }
  report.worst_block_eig =
      report.block_min_eigs.size() ? report.block_min_eigs.minCoeff() : 0.0;
  report.worst_sign_violation =
      report.sign_violations.size() ? report.sign_violations.maxCoeff() : 0.0;
  return report;
}

}  // namespace lpvsyn::sdp
