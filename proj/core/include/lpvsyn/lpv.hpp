#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lpvsyn/rng.hpp"

namespace lpvsyn {

enum class TimeDomain { kContinuous, kDiscrete };

std::string to_string(TimeDomain domain);
TimeDomain time_domain_from_string(const std::string& s);

/// Parameter-affine LPV plant: delta x = (sum_l theta_l * A_l) x + B u.
/// "delta x" is the state derivative in continuous time and the next state in
/// discrete time.
struct LpvaPlant {
  std::vector<Eigen::MatrixXd> A_terms;  // L square n x n matrices
  Eigen::MatrixXd B;                     // n x m
  TimeDomain domain = TimeDomain::kContinuous;

  Eigen::Index num_states() const { return B.rows(); }
  Eigen::Index num_inputs() const { return B.cols(); }
  Eigen::Index num_params() const { return static_cast<Eigen::Index>(A_terms.size()); }

  /// A(theta) = sum_l theta_l A_l.
  Eigen::MatrixXd dynamics_matrix(const Eigen::VectorXd& theta) const;

  void validate() const;
};

/// Convex parameter set given by its vertex list.
struct ParamPolytope {
  std::vector<Eigen::VectorXd> vertices;

  Eigen::Index dim() const { return vertices.empty() ? 0 : vertices.front().size(); }
  Eigen::Index num_vertices() const { return static_cast<Eigen::Index>(vertices.size()); }

  /// Axis-aligned box with vertices enumerated lexicographically
  /// (low before high, last coordinate fastest).
  static ParamPolytope box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

  /// True when the vertex list is exactly the lexicographic enumeration of a
  /// box; fills lo/hi bounds if so.
  bool as_box(Eigen::VectorXd* lo, Eigen::VectorXd* hi) const;

  void validate() const;
};

/// Vertex gains plus the shared Lyapunov-shape matrix P (symmetric PD).
struct GainScheduledController {
  std::vector<Eigen::MatrixXd> gains;  // one m x n gain per polytope vertex
  ParamPolytope polytope;
  Eigen::MatrixXd P;

  void validate() const;
};

/// Piecewise-constant parameter signal. Switch times are seconds in
/// continuous time and step indices in discrete time; values[i] is held on
/// [switch_times[i], switch_times[i+1]) and the last value up to end_time.
struct ParamTrajectory {
  std::vector<double> switch_times;       // strictly increasing, starts at 0
  std::vector<Eigen::VectorXd> values;    // one held value per segment
  double end_time = 0.0;
  TimeDomain domain = TimeDomain::kContinuous;

  const Eigen::VectorXd& at(double time) const;
  Eigen::Index num_segments() const { return static_cast<Eigen::Index>(values.size()); }

  static ParamTrajectory constant(const Eigen::VectorXd& theta, double end_time,
                                  TimeDomain domain);

  void validate() const;
};

struct StateTrajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> inputs;
  std::vector<Eigen::VectorXd> disturbances;
};

/// Sum_l omega_{l,v} A_l for vertex v (zero-based index).
Eigen::MatrixXd vertex_matrix(const LpvaPlant& plant, const ParamPolytope& polytope,
                              Eigen::Index v);

/// Barycentric-style coordinates: c >= 0, sum c = 1, sum c_v omega_v = theta
/// with residual <= 1e-9. Among all feasible points the minimum-norm one is
/// returned so repeated calls are reproducible. Throws std::domain_error when
/// theta lies outside the hull.
Eigen::VectorXd interpolate_coordinates(const ParamPolytope& polytope,
                                        const Eigen::VectorXd& theta);

/// K(theta) = sum_v c_v K_v with c from interpolate_coordinates.
Eigen::MatrixXd schedule_gain(const GainScheduledController& controller,
                              const Eigen::VectorXd& theta);

/// delta x = A(theta) x + B u + w.
Eigen::VectorXd eval_dynamics(const LpvaPlant& plant, const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                              const Eigen::VectorXd& w);

/// Piecewise-constant parameter signal with i.i.d. dwell times (exponential
/// with the given mean in continuous time, geometric in discrete time) and
/// held values drawn uniformly over the polytope: directly per coordinate for
/// boxes, through flat Dirichlet vertex weights otherwise.
ParamTrajectory sample_param_trajectory(const ParamPolytope& polytope, double mean_dwell,
                                        double horizon, std::uint64_t seed,
                                        TimeDomain domain = TimeDomain::kContinuous);

/// Open-loop input as a function of (time, state, parameter).
using InputPolicy =
    std::function<Eigen::VectorXd(double time, const Eigen::VectorXd& x, const Eigen::VectorXd& theta)>;

/// Additive disturbance as a function of time.
using DisturbanceSignal = std::function<Eigen::VectorXd(double time)>;

struct SimulateOptions {
  double horizon = 1.0;   // seconds (CT) or steps (DT)
  double step = 0.01;     // RK4 step, CT only
  DisturbanceSignal disturbance;  // nullptr = no disturbance
  double divergence_norm = 1e9;   // abort threshold
};

/// Closed-loop simulation under a gain-scheduled controller. Discrete time
/// iterates the map exactly; continuous time integrates with classical RK4 at
/// fixed step, splitting steps at parameter switch times so theta is constant
/// inside every stage evaluation. Throws std::runtime_error on divergence.
StateTrajectory simulate(const LpvaPlant& plant, const GainScheduledController& controller,
                         const ParamTrajectory& params, const Eigen::VectorXd& x0,
                         const SimulateOptions& options);

/// Open-loop variant (u from the supplied policy; pass nullptr for u = 0).
StateTrajectory simulate(const LpvaPlant& plant, const InputPolicy& input,
                         const ParamTrajectory& params, const Eigen::VectorXd& x0,
                         const SimulateOptions& options);

/// One RK4 integration of the frozen-coefficient dynamics over [t0, t1].
Eigen::VectorXd rk4_span(const LpvaPlant& plant, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                         Eigen::VectorXd x, double t0, double t1, double max_step);

}  // namespace lpvsyn
