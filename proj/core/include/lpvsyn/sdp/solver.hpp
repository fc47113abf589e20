#pragma once

#include <string>

#include <Eigen/Dense>

#include "lpvsyn/sdp/problem.hpp"

namespace lpvsyn::sdp {

enum class SolveStatus {
  kOptimal,
  kFeasible,
  kInfeasible,
  kUnbounded,
  kNumericalFailure,
};

std::string to_string(SolveStatus status);

struct SolverSettings {
  double feas_tol = 1e-8;      // PSD residual tolerance
  double gap_tol = 1e-8;       // relative duality-gap tolerance
  int max_iters = 200;         // interior-point iteration cap
  double strict_floor = 1e-6;  // substituted for strict inequalities
  bool verbose = false;

  void validate() const;
};

struct SdpSolution {
  SolveStatus status = SolveStatus::kNumericalFailure;
  Eigen::VectorXd decision;       // one value per scalar variable
  Eigen::VectorXd block_min_eigs;
  double objective_value = 0.0;
  int iterations = 0;
  /// Uniform PSD slack achieved by feasibility problems (the maximized
  /// margin); minimum block eigenvalue otherwise.
  double margin = 0.0;
};

/// Solves the problem with a dense primal-dual interior-point method
/// (Mehrotra-style predictor-corrector on the HKM direction).
///
/// Feasibility problems are solved as margin maximization: maximize t subject
/// to every block >= t*I and t <= 1; the problem is declared feasible iff
/// t* >= strict_floor and infeasible iff t* < -feas_tol (the band between is
/// reported as numerical failure: neither certificate is robust). Problems
/// with an objective run the same margin pre-solve for classification before
/// minimizing.
SdpSolution solve(const SdpProblem& problem, const SolverSettings& settings = {});

}  // namespace lpvsyn::sdp
