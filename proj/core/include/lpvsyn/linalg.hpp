#pragma once

#include <Eigen/Dense>

namespace lpvsyn {

/// Column-wise Khatri-Rao product of A (m x T) and B (p x T): column t is
/// kron(B.col(t), A.col(t)), an (m*p) x T matrix. Throws on column mismatch.
Eigen::MatrixXd khatri_rao_columns(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// (M + M^T) / 2.
Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& sym);

/// Largest eigenvalue of a symmetric matrix.
double max_eigenvalue(const Eigen::MatrixXd& sym);

/// Max |M - M^T| entry.
double asymmetry(const Eigen::MatrixXd& m);

/// Moore-Penrose pseudoinverse via SVD with relative tolerance.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double rel_tol = 1e-12);

/// Generalized Schur complement M11 - M12 pinv(M22) M12^T of the partitioned
/// symmetric matrix [M11, M12; M12^T, M22], where M11 is head x head.
Eigen::MatrixXd schur_complement_lower(const Eigen::MatrixXd& m, Eigen::Index head);

}  // namespace lpvsyn
