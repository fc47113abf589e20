#pragma once

#include <string>
#include <vector>

#include "lpvsyn/data.hpp"
#include "lpvsyn/lpv.hpp"
#include "lpvsyn/synthesis.hpp"
#include "lpvsyn/verification.hpp"

namespace lpvsyn {

/// Built-in two-parameter, two-state benchmark plant over
/// Theta = [0,2] x [-1,1].
LpvaPlant two_state_plant(TimeDomain domain);
ParamPolytope two_state_polytope();
Eigen::VectorXd two_state_x0();

/// Regulated-output spec used with the two-state discrete-time H2 benchmark:
/// C = [I2; 0], D = [0; sqrt(2) I2], F = I2.
PerformanceSpec two_state_h2_spec();

/// Built-in three-parameter, five-state benchmark (n=5, m=3, L=3) over
/// Theta = [-0.3,0.3] x [0.2,0.8] x [0.5,1.5]. The ground truth is generated
/// from a fixed internal seed.
LpvaPlant five_state_plant();
ParamPolytope five_state_polytope();

/// Protocol parameters shared by the reproduction runs.
struct ReproOptions {
  std::uint64_t seed = 0;
  Eigen::Index T = 35;
  double noise_eps = 0.1;
  int num_plants = 15;
  int num_sequences = 30;
  double mean_dwell = 0.05;   // CT seconds; DT uses one-step mean dwell
  double horizon = 3.0;       // CT seconds; DT runs horizon/mean switching steps
  double excitation_amplitude = 1.0;
  sdp::SolverSettings solver{};
};

struct CheckLine {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ReproSummary {
  std::string name;
  bool feasible = false;
  double gamma = 0.0;  // H2 runs only
  double synth_seconds = 0.0;
  std::vector<CheckLine> checks;
  bool pass = false;

  void add(const std::string& check, bool ok, const std::string& detail = "");
};

/// Data generation used by every reproduction: excitation uniform in
/// [-amp, amp]^m, per-sample noise uniform in the eps ball, parameters
/// switching at the protocol dwell.
DataRecord make_benchmark_record(const LpvaPlant& plant, const ParamPolytope& polytope,
                                 const ReproOptions& options);

/// Two-state stabilization protocol (CT or DT per `domain`): synthesize on
/// regenerated data, then verify against sampled consistent plants with
/// closed-loop simulations and Lyapunov decrease checks. The DT variant also
/// requires the shared-gain synthesis to be infeasible.
ReproSummary repro_two_state(TimeDomain domain, const ReproOptions& options = {});

/// Two-state discrete-time worst-case H2 protocol: finite gamma plus a
/// one-sided Monte-Carlo check (estimate <= gamma + half width).
ReproSummary repro_two_state_h2(const ReproOptions& options = {});

/// Five-state discrete-time protocol: block census, dimension independence
/// of the assembled problem from T, and synthesis wall time.
ReproSummary repro_five_state(const ReproOptions& options = {});

/// Dispatch by name: two-state-ct | two-state-dt | two-state-h2 | five-state.
ReproSummary run_repro(const std::string& name, const ReproOptions& options = {});

}  // namespace lpvsyn
