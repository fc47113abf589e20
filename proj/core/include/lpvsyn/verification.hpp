#pragma once

#include <vector>

#include <Eigen/Dense>

#include "lpvsyn/data.hpp"
#include "lpvsyn/lpv.hpp"
#include "lpvsyn/sdp/solver.hpp"
#include "lpvsyn/synthesis.hpp"

namespace lpvsyn {

/// Model-based quadratic-stability check of a controller against one plant:
/// per-vertex minimum eigenvalue of the closed-loop Lyapunov LMI,
///   CT: -(A_v + B K_v) P - P (A_v + B K_v)^T
///   DT: [P, (A_v + B K_v) P; *, P]
/// Pass means every eigenvalue is >= -tol.
struct StabilityReport {
  std::vector<double> vertex_min_eigs;
  double worst = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

StabilityReport check_quadratic_stability(const LpvaPlant& plant,
                                          const GainScheduledController& controller,
                                          double tol = 1e-6);

/// Samples plants from the consistency set and checks the certificate's
/// controller against every one of them.
struct SampledStabilityReport {
  std::vector<StabilityReport> reports;
  double worst_margin = 0.0;
  bool pass = false;
  int num_plants = 0;
};

SampledStabilityReport check_certificate_against_samples(const StabilizationCertificate& cert,
                                                         const DataRecord& record,
                                                         const NoiseBound& bound, int num_plants,
                                                         std::uint64_t seed, double tol = 1e-6);

/// Common-Lyapunov H2 upper bound for a vertex-enumerated closed loop:
/// minimizes the worst vertex trace(C_v M C_v^T) subject to the vertex
/// Lyapunov inequalities with a shared M >= 0. Pass one output matrix to use
/// it at every vertex. Throws SolverFailureError when no common certificate
/// exists ("no quadratic H2 certificate").
double h2_bound_ct(const std::vector<Eigen::MatrixXd>& a_vertices,
                   const std::vector<Eigen::MatrixXd>& c_vertices, const Eigen::MatrixXd& f,
                   const sdp::SolverSettings& settings = {});

double h2_bound_dt(const std::vector<Eigen::MatrixXd>& a_vertices,
                   const std::vector<Eigen::MatrixXd>& c_vertices, const Eigen::MatrixXd& f,
                   const sdp::SolverSettings& settings = {});

/// Monte-Carlo estimate of the worst-case expected RMS of z = C x + D u under
/// unit-covariance white noise through F: for each sampled parameter
/// trajectory the mean square output is averaged over noise trials, and the
/// maximum RMS over trajectories is reported together with a 95%
/// normal-approximation half width (delta method at the maximizing
/// trajectory). Continuous time uses Euler-Maruyama with per-step noise
/// covariance I/h.
struct H2Estimate {
  double estimate = 0.0;
  std::vector<double> per_traj_rms;
  int num_param_trajs = 0;
  int num_noise_trials = 0;
  double horizon = 0.0;
  double half_width = 0.0;
  int divergences = 0;  // trajectories excluded after state blow-up
};

struct H2MonteCarloOptions {
  int num_param_trajs = 30;
  int num_noise_trials = 200;
  double horizon = 200.0;   // steps (DT) or seconds (CT)
  double mean_dwell = 1.0;  // steps (DT) or seconds (CT)
  double ct_step = 0.01;
  double divergence_norm = 1e9;
};

H2Estimate estimate_h2_monte_carlo(const LpvaPlant& plant,
                                   const GainScheduledController& controller,
                                   const PerformanceSpec& perf, std::uint64_t seed,
                                   const H2MonteCarloOptions& options = {});

/// Decrease of V(x) = x^T P^-1 x along a recorded trajectory. Discrete time
/// requires strict decrease at every step with nonzero state; continuous time
/// checks the per-step difference quotient against the integrator tolerance.
struct LyapunovReport {
  double max_increase = 0.0;  // largest V step difference (DT) or quotient (CT)
  double tolerance = 0.0;
  bool pass = false;
  int steps_checked = 0;
};

LyapunovReport lyapunov_decrease_check(const StateTrajectory& trajectory,
                                       const Eigen::MatrixXd& p, TimeDomain domain,
                                       double tol = -1.0);  // default: 0 (DT), 1e-8 (CT)

}  // namespace lpvsyn
