#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "lpvsyn/linalg.hpp"
#include "lpvsyn/rng.hpp"
#include "lpvsyn/sdp/problem.hpp"
#include "lpvsyn/sdp/solver.hpp"

using namespace lpvsyn;
using namespace lpvsyn::sdp;

namespace {

Eigen::MatrixXd sym_basis(Eigen::Index n, Eigen::Index i, Eigen::Index j) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, n);
  e(i, j) = 1.0;
  e(j, i) = 1.0;
  return e;
}

// minimize trace(X) subject to X >= I2, X scalarized over its upper triangle.
SdpProblem identity_trace_problem() {
  SdpProblem pb;
  pb.add_scalars(1, ScalarSign::kFree, "X(0,0)");
  pb.add_scalars(1, ScalarSign::kFree, "X(0,1)");
  pb.add_scalars(1, ScalarSign::kFree, "X(1,1)");
  const int blk = pb.add_block(2, "x_minus_identity");
  pb.add_constant(blk, 0, 0, Eigen::MatrixXd(-Eigen::Matrix2d::Identity()));
  pb.set_block_coeff(blk, 0, sym_basis(2, 0, 0));
  pb.set_block_coeff(blk, 1, sym_basis(2, 0, 1));
  pb.set_block_coeff(blk, 2, sym_basis(2, 1, 1));
  Eigen::VectorXd c(3);
  c << 1.0, 0.0, 1.0;
  pb.set_objective(c);
  return pb;
}

// The PSD constraint X >= 0 alone (2x2), used for residual reporting.
SdpProblem psd_only_problem() {
  SdpProblem pb;
  pb.add_scalars(1, ScalarSign::kFree, "X(0,0)");
  pb.add_scalars(1, ScalarSign::kFree, "X(0,1)");
  pb.add_scalars(1, ScalarSign::kFree, "X(1,1)");
  const int blk = pb.add_block(2, "x_psd");
  pb.set_block_coeff(blk, 0, sym_basis(2, 0, 0));
  pb.set_block_coeff(blk, 1, sym_basis(2, 0, 1));
  pb.set_block_coeff(blk, 2, sym_basis(2, 1, 1));
  return pb;
}

}  // namespace

TEST_SUITE("sdp_engine") {

TEST_CASE("minimize trace subject to X >= I") {
  const SdpProblem pb = identity_trace_problem();
  const SdpSolution sol = solve(pb);
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK(sol.objective_value == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(sol.decision[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(sol.decision[1] == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(sol.decision[2] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("contradictory scalar bounds are infeasible") {
  SdpProblem pb;
  pb.add_scalars(1, ScalarSign::kNonNegative, "p");
  const int b1 = pb.add_block(1, "minus_two_p");
  pb.set_block_coeff(b1, 0, Eigen::MatrixXd(-2.0 * Eigen::MatrixXd::Identity(1, 1)));
  const int b2 = pb.add_block(1, "p_minus_one");
  pb.add_constant(b2, 0, 0, Eigen::MatrixXd(-Eigen::MatrixXd::Identity(1, 1)));
  pb.set_block_coeff(b2, 0, Eigen::MatrixXd::Identity(1, 1));
  const SdpSolution sol = solve(pb);
  CHECK(sol.status == SolveStatus::kInfeasible);
  CHECK(sol.margin < 0.0);
}

TEST_CASE("scalar continuous Lyapunov feasibility") {
  // Stable scalar plant a = -1: find p with p >= 1 and -2 a p = 2p >= 0.
  SdpProblem pb;
  pb.add_scalars(1, ScalarSign::kFree, "p");
  const int b1 = pb.add_block(1, "p_minus_one");
  pb.add_constant(b1, 0, 0, Eigen::MatrixXd(-Eigen::MatrixXd::Identity(1, 1)));
  pb.set_block_coeff(b1, 0, Eigen::MatrixXd::Identity(1, 1));
  const int b2 = pb.add_block(1, "neg_lyapunov");
  pb.set_block_coeff(b2, 0, Eigen::MatrixXd(2.0 * Eigen::MatrixXd::Identity(1, 1)));
  const SdpSolution sol = solve(pb);
  REQUIRE(sol.status == SolveStatus::kFeasible);
  CHECK(sol.decision[0] >= 1.0 - 1e-7);
  CHECK(sol.margin > 0.0);
}

TEST_CASE("random 3-block objective matches brute-force grid oracle") {
  // Two decision variables, three PSD blocks, identity constants so y = 0 is
  // strictly feasible. The oracle is a refining dense grid search using its
  // own eigenvalue evaluation.
  Rng rng(42);
  auto random_sym = [&](Eigen::Index n) {
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.normal();
    }
    return Eigen::MatrixXd(0.5 * (a + a.transpose()));
  };
  const std::array<Eigen::Index, 3> dims = {2, 3, 2};
  std::vector<Eigen::MatrixXd> c1, c2;
  SdpProblem pb;
  pb.add_scalars(1, ScalarSign::kFree, "y0");
  pb.add_scalars(1, ScalarSign::kFree, "y1");
  for (size_t k = 0; k < dims.size(); ++k) {
    c1.push_back(random_sym(dims[k]));
    c2.push_back(random_sym(dims[k]));
    const int blk = pb.add_block(dims[k], "b" + std::to_string(k));
    pb.add_constant(blk, 0, 0, Eigen::MatrixXd::Identity(dims[k], dims[k]));
    pb.set_block_coeff(blk, 0, c1.back());
    pb.set_block_coeff(blk, 1, c2.back());
  }
  Eigen::VectorXd obj(2);
  obj << 1.0, 0.7;
  pb.set_objective(obj);

  const auto oracle_feasible = [&](double y0, double y1) {
    for (size_t k = 0; k < dims.size(); ++k) {
      const Eigen::MatrixXd v = Eigen::MatrixXd::Identity(dims[k], dims[k]) + y0 * c1[k] +
                                y1 * c2[k];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < 0.0) return false;
    }
    return true;
  };
  double cx = 0.0, cy = 0.0, width = 8.0;
  double best = std::numeric_limits<double>::infinity();
  for (int level = 0; level < 10; ++level) {
    const int grid = 80;
    double bx = cx, by = cy;
    for (int i = 0; i <= grid; ++i) {
      for (int j = 0; j <= grid; ++j) {
        const double y0 = cx - width / 2 + width * i / grid;
        const double y1 = cy - width / 2 + width * j / grid;
        const double val = obj[0] * y0 + obj[1] * y1;
        if (val < best && oracle_feasible(y0, y1)) {
          best = val;
          bx = y0;
          by = y1;
        }
      }
    }
    cx = bx;
    cy = by;
    width = 4.0 * width / grid;
  }

  const SdpSolution sol = solve(pb);
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK(sol.objective_value == doctest::Approx(best).epsilon(1e-6));
}

TEST_CASE("residual report evaluates without solving") {
  const SdpProblem pb = psd_only_problem();
  Eigen::VectorXd at_identity(3);
  at_identity << 1.0, 0.0, 1.0;
  CHECK(residual_report(pb, at_identity).block_min_eigs.minCoeff() >= 0.0);

  Eigen::VectorXd at_minus_identity(3);
  at_minus_identity << -1.0, 0.0, -1.0;
  CHECK(residual_report(pb, at_minus_identity).block_min_eigs[0] ==
        doctest::Approx(-1.0).epsilon(1e-12));

  Eigen::VectorXd wrong_length(2);
  CHECK_THROWS_AS((void)residual_report(pb, wrong_length), std::invalid_argument);
}

TEST_CASE("block evaluations are exactly symmetric") {
  // Mixed diagonal and mirrored off-diagonal placements.
  SdpProblem pb;
  Rng rng(7);
  pb.add_scalars(4, ScalarSign::kFree, "y");
  const int blk = pb.add_block(5, "mixed");
  Eigen::MatrixXd a(2, 3);
  for (int v = 0; v < 4; ++v) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = rng.normal();
    }
    pb.add_coeff(blk, v, 0, 2, a);  // off-diagonal, mirrored internally
    pb.add_coeff(blk, v, 0, 0, sym_basis(2, 0, 1) * rng.normal());
  }
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd y(4);
    for (int i = 0; i < 4; ++i) y[i] = rng.uniform(-10.0, 10.0);
    CHECK(asymmetry(pb.blocks()[0].eval(y)) == 0.0);
  }
}

TEST_CASE("feasible solve passes its own residual report") {
  const SolverSettings settings;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    SdpProblem pb;
    pb.add_scalars(1, ScalarSign::kNonNegative, "s");
    pb.add_scalars(1, ScalarSign::kStrictPositive, "t");
    pb.add_scalars(1, ScalarSign::kFree, "y");
    const int blk = pb.add_block(3, "random_feasible");
    pb.add_constant(blk, 0, 0, Eigen::MatrixXd::Identity(3, 3));
    for (int v = 0; v < 3; ++v) {
      Eigen::MatrixXd s(3, 3);
      for (Eigen::Index i = 0; i < 3; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) s(i, j) = 0.3 * rng.normal();
      }
      pb.set_block_coeff(blk, v, Eigen::MatrixXd(0.5 * (s + s.transpose())));
    }
    const SdpSolution sol = solve(pb, settings);
    REQUIRE(sol.status == SolveStatus::kFeasible);
    const ResidualReport rep = residual_report(pb, sol.decision, settings.strict_floor);
    CHECK(rep.worst_block_eig >= -settings.feas_tol);
    CHECK(rep.worst_sign_violation <= settings.feas_tol);
  }
}

TEST_CASE("shrinking the strict floor never flips feasible to infeasible") {
  SdpProblem pb;
  pb.add_scalars(1, ScalarSign::kStrictPositive, "beta");
  pb.add_scalars(1, ScalarSign::kFree, "p");
  const int b1 = pb.add_block(1, "p_minus_beta");
  pb.set_block_coeff(b1, 1, Eigen::MatrixXd::Identity(1, 1));
  pb.set_block_coeff(b1, 0, Eigen::MatrixXd(-Eigen::MatrixXd::Identity(1, 1)));
  const int b2 = pb.add_block(1, "five_minus_p");
  pb.add_constant(b2, 0, 0, Eigen::MatrixXd(5.0 * Eigen::MatrixXd::Identity(1, 1)));
  pb.set_block_coeff(b2, 1, Eigen::MatrixXd(-Eigen::MatrixXd::Identity(1, 1)));

  bool was_feasible = false;
  for (double floor : {1e-2, 1e-4, 1e-6, 1e-8}) {
    SolverSettings settings;
    settings.strict_floor = floor;
    const SdpSolution sol = solve(pb, settings);
    if (was_feasible) CHECK(sol.status == SolveStatus::kFeasible);
    was_feasible = was_feasible || sol.status == SolveStatus::kFeasible;
  }
  CHECK(was_feasible);
}

TEST_CASE("settings validation") {
  SolverSettings bad;
  bad.feas_tol = 0.0;
  CHECK_THROWS_AS(solve(identity_trace_problem(), bad), std::invalid_argument);
  SolverSettings bad2;
  bad2.max_iters = 0;
  CHECK_THROWS_AS(solve(identity_trace_problem(), bad2), std::invalid_argument);
}

}  // TEST_SUITE
