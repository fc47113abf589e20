#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "lpvsyn/lpv.hpp"
#include "lpvsyn/rng.hpp"

namespace lpvsyn {

/// Measured record (X_minus, U, Theta, X_delta): states, applied inputs and
/// parameters, and the measured state derivative (CT) or next state (DT),
/// column per sample.
struct DataRecord {
  Eigen::MatrixXd X_minus;  // n x T
  Eigen::MatrixXd U;        // m x T
  Eigen::MatrixXd Theta;    // L x T
  Eigen::MatrixXd X_delta;  // n x T
  TimeDomain domain = TimeDomain::kDiscrete;

  Eigen::Index num_samples() const { return X_minus.cols(); }
  Eigen::Index num_states() const { return X_minus.rows(); }
  Eigen::Index num_inputs() const { return U.rows(); }
  Eigen::Index num_params() const { return Theta.rows(); }

  void validate() const;
};

/// Horizontal concatenation of two records (multi-trajectory data hook).
DataRecord concatenate_records(const DataRecord& a, const DataRecord& b);

/// Partitioned quadratic noise bound Phi = [Phi11, Phi12; Phi12^T, Phi22]
/// with Phi11 in S^n and -Phi22 PSD. The bounded object W (n x T) satisfies
/// the bound when [I; W^T]^T Phi [I; W^T] is PSD.
struct NoiseBound {
  Eigen::MatrixXd Phi11;  // n x n symmetric
  Eigen::MatrixXd Phi12;  // n x T
  Eigen::MatrixXd Phi22;  // T x T symmetric, -Phi22 PSD

  void validate() const;
};

/// Per-sample 2-norm bound |w_t| <= eps: Phi11 = eps^2 T I, Phi12 = 0,
/// Phi22 = -I.
NoiseBound per_sample_noise_bound(double eps, Eigen::Index T, Eigen::Index n);

/// Energy bound Phi11 - W W^T PSD: Phi11 = Q, Phi12 = 0, Phi22 = -I.
NoiseBound energy_noise_bound(const Eigen::MatrixXd& q, Eigen::Index T);

/// Block-diagonal combination for concatenated records.
NoiseBound blockdiag_noise_bound(const NoiseBound& a, const NoiseBound& b);

/// Evaluates [I; Z^T]^T Phi [I; Z^T] for the given partition.
Eigen::MatrixXd quad_bound_eval(const Eigen::MatrixXd& z, const Eigen::MatrixXd& phi11,
                                const Eigen::MatrixXd& phi12, const Eigen::MatrixXd& phi22);

/// Quadratic boundedness test: min eig of the evaluation >= -tol
/// (strict variant: >= +tol).
bool quad_bound_holds(const Eigen::MatrixXd& z, const NoiseBound& bound, bool strict = false,
                      double tol = 1e-9);

/// Data-side QMI of the consistency set: the symmetric matrix
/// M Phi M^T of size n + (L n + m), where M stacks [I, X_delta; 0, -R; 0, -U]
/// and R is the regressor with column t = theta(t) kron x(t).
struct ConsistencyQmi {
  Eigen::MatrixXd mat;
  Eigen::Index n = 0, ln = 0, m = 0;

  Eigen::Index dim() const { return n + ln + m; }
  Eigen::MatrixXd head_block() const { return mat.topLeftCorner(n, n); }
  Eigen::MatrixXd cross_block() const { return mat.topRightCorner(n, ln + m); }
  Eigen::MatrixXd tail_block() const { return mat.bottomRightCorner(ln + m, ln + m); }
};

/// Regressor R (Ln x T): column t = theta(t) kron x(t), so
/// [A_1, ..., A_L] R has column t = sum_l theta_l(t) A_l x(t).
Eigen::MatrixXd regressor(const DataRecord& record);

ConsistencyQmi build_consistency_qmi(const DataRecord& record, const NoiseBound& bound);

struct DiscrepancyMatrix {
  Eigen::MatrixXd W;  // n x T
};

/// W = X_delta - [A_1, ..., A_L] R - B U for the candidate plant.
DiscrepancyMatrix discrepancy(const DataRecord& record, const LpvaPlant& plant);

/// Stacked plant coefficients [A_1, ..., A_L, B] (n x (Ln + m)).
Eigen::MatrixXd plant_to_coefficients(const LpvaPlant& plant);
LpvaPlant coefficients_to_plant(const Eigen::MatrixXd& z, Eigen::Index n, Eigen::Index num_params,
                                Eigen::Index m, TimeDomain domain);

/// Membership of the plant in the consistency set described by the QMI.
bool plant_in_consistency_set(const LpvaPlant& plant, const ConsistencyQmi& psi,
                              double tol = 1e-9);

/// Frobenius ball certified to contain the consistency set (in stacked
/// coefficient space), derived from the generalized Schur complement.
/// Unavailable when -Psi22 is not positive definite.
struct ConsistencyBall {
  bool bounded = false;
  Eigen::MatrixXd center;      // n x (Ln + m)
  double squared_radius = 0.0;
  double min_eig_neg_tail = 0.0;
};

ConsistencyBall consistency_ball(const ConsistencyQmi& psi);

/// Least-squares plant X_delta * pinv([R; U]) in stacked form.
LpvaPlant least_squares_plant(const DataRecord& record);

/// Draws `count` plants from the consistency set by hit-and-run inside the
/// QMI set, started at the least-squares plant (rejection fallback around the
/// bounding ball). Every returned plant passes plant_in_consistency_set at
/// tol 1e-9; deterministic in the seed. Throws std::runtime_error when no
/// member can be located.
std::vector<LpvaPlant> sample_consistent_plants(const DataRecord& record,
                                                const NoiseBound& bound, int count,
                                                std::uint64_t seed);

/// Numeric diagnostics for the multiplier-based certificate preconditions:
/// kernel inclusion ker(Psi22) in ker(Psi12), PSD generalized Schur
/// complement, and definiteness of -Psi22.
struct SLemmaDiagnostics {
  bool kernel_inclusion = false;
  double kernel_residual = 0.0;   // largest |Psi12 v| over unit kernel vectors
  Eigen::Index tail_rank = 0;
  bool schur_psd = false;
  double schur_min_eig = 0.0;
  double neg_tail_min_eig = 0.0;  // min eig of -Psi22
};

SLemmaDiagnostics slemma_preconditions(const ConsistencyQmi& psi, double tol = 1e-9);

/// Sample-indexed generators for excitation and noise.
using SampleSignal = std::function<Eigen::VectorXd(int sample, Rng& rng)>;

SampleSignal uniform_excitation(Eigen::Index m, double amplitude = 1.0);
SampleSignal ball_noise(Eigen::Index n, double eps);
SampleSignal zero_signal(Eigen::Index n);

struct CollectOptions {
  Eigen::VectorXd x0;        // defaults to zero
  double sample_dt = 0.05;   // spacing of CT samples
  double rk_step = 0.01;     // CT integrator step
};

/// Runs the plant under the excitation and parameter signal, applying the
/// sampled noise inside the dynamics, and records T samples. X_delta holds
/// the exact noisy vector field at the sample instants in continuous time and
/// the noisy next state in discrete time.
DataRecord collect_data(const LpvaPlant& plant, const SampleSignal& excitation,
                        const ParamTrajectory& params, const SampleSignal& noise,
                        Eigen::Index T, std::uint64_t seed, const CollectOptions& options = {});

}  // namespace lpvsyn
