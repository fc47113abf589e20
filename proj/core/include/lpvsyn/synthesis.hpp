#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lpvsyn/data.hpp"
#include "lpvsyn/lpv.hpp"
#include "lpvsyn/sdp/problem.hpp"
#include "lpvsyn/sdp/solver.hpp"

namespace lpvsyn {

/// Regulated output z = C x + D u with external input entering through F.
struct PerformanceSpec {
  Eigen::MatrixXd C;  // r x n
  Eigen::MatrixXd D;  // r x m
  Eigen::MatrixXd F;  // n x e

  Eigen::Index output_dim() const { return C.rows(); }
  void validate(Eigen::Index n, Eigen::Index m) const;
};

/// Gain-scheduled stabilization certificate: common Lyapunov-shape matrix P,
/// per-vertex gains (K_v = S_v P^-1) and the multipliers that certify the
/// vertex LMIs over the whole consistency set.
struct StabilizationCertificate {
  TimeDomain domain = TimeDomain::kContinuous;
  Eigen::MatrixXd P;
  std::vector<Eigen::MatrixXd> S_list;
  std::vector<Eigen::MatrixXd> K_list;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  std::vector<double> vertex_residuals;  // min eig of each certified vertex block
  ParamPolytope polytope;

  GainScheduledController controller() const;
};

struct H2Certificate {
  StabilizationCertificate base;
  Eigen::MatrixXd Z;   // r x r PSD
  double gamma = 0.0;  // sqrt(trace Z)
};

/// Raised when the synthesis LMI is infeasible, i.e. the data is not
/// informative for LPV quadratic stabilization.
class NotInformativeError : public std::runtime_error {
 public:
  NotInformativeError(const std::string& what, double margin)
      : std::runtime_error(what), margin_(margin) {}
  double margin() const { return margin_; }

 private:
  double margin_;
};

class SolverFailureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynthesisOptions {
  bool common_gain = false;      // one shared gain across all vertices
  bool trace_normalize = false;  // pin trace(P) = 1 (stabilization modes only)
  sdp::SolverSettings solver{};
  std::function<void(const std::string&)> warn;  // diagnostic sink, may be null
};

/// Bookkeeping between an assembled problem and its decision variables.
struct AssemblyInfo {
  Eigen::Index n = 0, m = 0, num_params = 0, num_vertices = 0, r = 0;
  int p_start = 0;
  bool unit_trace = false;
  std::vector<int> s_starts;  // per vertex (identical entries under common gain)
  int alpha_start = 0;
  int beta_start = 0;
  int z_start = -1;
  std::vector<int> vertex_block_ids;
  std::vector<int> output_block_ids;
  int p_block_id = -1;
  int z_block_id = -1;
  double psi_scale = 1.0;  // vertex blocks carry -alpha * (Psi / psi_scale)
};

struct AssemblyResult {
  sdp::SdpProblem problem;
  AssemblyInfo info;
};

/// Vertex LMI system for continuous-time stabilization: per vertex one block
/// of size n(L+1)+m holding the gain-scheduled stabilization QMI minus
/// alpha_v times the data QMI, plus the block P >= strict_floor * I.
AssemblyResult assemble_ct_stab(const ConsistencyQmi& psi, const ParamPolytope& polytope,
                                const SynthesisOptions& options = {});

/// Discrete-time counterpart, per-vertex blocks of size n(L+2)+m built from
/// the Schur-completed vertex matrix.
AssemblyResult assemble_dt_stab(const ConsistencyQmi& psi, const ParamPolytope& polytope,
                                const SynthesisOptions& options = {});

/// Worst-case H2 synthesis: stabilization blocks with the F F^T corner term,
/// per-vertex output blocks [Z, C P + D S_v; *, P], Z PSD, objective
/// trace(Z). `include_output` = false assembles only the feasibility core
/// (used for informativity pre-checks).
AssemblyResult assemble_h2(const ConsistencyQmi& psi, const ParamPolytope& polytope,
                           const PerformanceSpec& perf, TimeDomain domain,
                           const SynthesisOptions& options = {}, bool include_output = true);

StabilizationCertificate recover_stabilization(const sdp::SdpSolution& solution,
                                               const AssemblyResult& assembly,
                                               const ParamPolytope& polytope, TimeDomain domain);

H2Certificate recover_h2(const sdp::SdpSolution& solution, const AssemblyResult& assembly,
                         const ParamPolytope& polytope, TimeDomain domain);

/// End-to-end synthesis: builds the consistency QMI, checks the multiplier
/// preconditions (warning on failure), assembles, solves and recovers. The
/// time domain is taken from the record. Throws NotInformativeError on
/// infeasibility and SolverFailureError on numerical failure.
StabilizationCertificate synthesize_stabilization(const DataRecord& record,
                                                  const NoiseBound& bound,
                                                  const ParamPolytope& polytope,
                                                  const SynthesisOptions& options = {});

H2Certificate synthesize_h2(const DataRecord& record, const NoiseBound& bound,
                            const ParamPolytope& polytope, const PerformanceSpec& perf,
                            const SynthesisOptions& options = {});

}  // namespace lpvsyn
