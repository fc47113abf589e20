#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lpvsyn::sdp {

enum class ScalarSign {
  kFree,
  kNonNegative,
  kStrictPositive,  // realized as x >= strict_floor at solve time
};

/// Affine symmetric-matrix-valued map of the decision vector:
///   V(y) = constant + sum_i y_i coeff[i],
/// required positive semidefinite. Coefficients are stored exactly symmetric
/// so evaluations are symmetric to the last bit.
struct AffineBlock {
  Eigen::Index dim = 0;
  Eigen::MatrixXd constant;
  std::map<int, Eigen::MatrixXd> coeffs;  // decision index -> symmetric matrix
  std::string label;
  bool margin_exempt = false;  // excluded from feasibility margin shifts

  Eigen::MatrixXd eval(const Eigen::VectorXd& y) const;
};

/// Block-diagonal PSD-constrained problem over scalar decision variables:
/// minimize objective . y (or pure feasibility when the objective is empty)
/// subject to every block being PSD and per-scalar sign constraints.
class SdpProblem {
 public:
  SdpProblem() = default;

  /// Adds `count` scalars, returns the index of the first.
  int add_scalars(int count, ScalarSign sign, const std::string& label_prefix);

  /// Adds an empty PSD block of the given dimension, returns its index.
  int add_block(Eigen::Index dim, const std::string& label, bool margin_exempt = false);

  /// Accumulates `m` into the constant term at offset (row, col); the mirror
  /// transpose is added automatically for off-diagonal placements. Diagonal
  /// placements (row == col) must pass a symmetric matrix.
  void add_constant(int block, Eigen::Index row, Eigen::Index col, const Eigen::MatrixXd& m);

  /// Same placement semantics for the coefficient of decision variable `var`.
  void add_coeff(int block, int var, Eigen::Index row, Eigen::Index col,
                 const Eigen::MatrixXd& m);

  /// Sets the whole coefficient of `var` in `block`; must be symmetric.
  void set_block_coeff(int block, int var, const Eigen::MatrixXd& sym);

  void set_objective(const Eigen::VectorXd& c);
  void add_objective_term(int var, double weight);

  int num_scalars() const { return static_cast<int>(signs_.size()); }
  Eigen::Index num_blocks() const { return static_cast<Eigen::Index>(blocks_.size()); }
  bool is_feasibility() const { return objective_.size() == 0; }

  const std::vector<ScalarSign>& scalar_signs() const { return signs_; }
  const std::vector<std::string>& scalar_labels() const { return labels_; }
  const std::vector<AffineBlock>& blocks() const { return blocks_; }
  const Eigen::VectorXd& objective() const { return objective_; }

  /// Structural equality: dimensions, signs, labels, coefficients, objective.
  bool structurally_equal(const SdpProblem& other, double tol = 0.0) const;

  void validate() const;

 private:
  AffineBlock& block_at(int block);
  void place(Eigen::MatrixXd& target, Eigen::Index row, Eigen::Index col,
             const Eigen::MatrixXd& m) const;

  std::vector<ScalarSign> signs_;
  std::vector<std::string> labels_;
  std::vector<AffineBlock> blocks_;
  Eigen::VectorXd objective_;
};

/// Exact evaluation of every block and sign constraint at a candidate point.
struct ResidualReport {
  Eigen::VectorXd block_min_eigs;   // one per block
  Eigen::VectorXd sign_violations;  // one per scalar, 0 when satisfied
  double worst_block_eig = 0.0;
  double worst_sign_violation = 0.0;
};

/// Evaluates all blocks at `candidate` (no solving). `strict_floor` is the
/// threshold used for ScalarSign::kStrictPositive scalars.
ResidualReport residual_report(const SdpProblem& problem, const Eigen::VectorXd& candidate,
                               double strict_floor = 0.0);

}  // namespace lpvsyn::sdp
