#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lpvsyn/experiments.hpp"
#include "lpvsyn/linalg.hpp"
#include "lpvsyn/lpv.hpp"
#include "lpvsyn/rng.hpp"

using namespace lpvsyn;

TEST_SUITE("lpv_core") {

TEST_CASE("khatri-rao columns") {
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  Eigen::MatrixXd expected(4, 2);
  expected << 5, 12, 15, 24, 7, 16, 21, 32;
  CHECK((khatri_rao_columns(a, b) - expected).cwiseAbs().maxCoeff() == 0.0);

  const Eigen::MatrixXd ones_row = Eigen::MatrixXd::Ones(1, 2);
  CHECK((khatri_rao_columns(a, ones_row) - a).cwiseAbs().maxCoeff() == 0.0);
  CHECK((khatri_rao_columns(ones_row, b) - b).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd mismatched(2, 3);
  CHECK_THROWS_AS((void)khatri_rao_columns(a, mismatched), std::invalid_argument);
}

TEST_CASE("vertex matrices of the two-state benchmark") {
  const LpvaPlant plant = two_state_plant(TimeDomain::kContinuous);
  const ParamPolytope poly = two_state_polytope();

  // Vertex (0, 1) is the second A term itself.
  const Eigen::MatrixXd av = vertex_matrix(plant, poly, 0);
  CHECK(av(0, 0) == doctest::Approx(-0.1696));
  CHECK(av(0, 1) == doctest::Approx(0.8434));
  CHECK(av(1, 1) == doctest::Approx(0.4140));

  // Scaled combination 2 A1 + A2.
  ParamPolytope scaled;
  scaled.vertices = {Eigen::Vector2d(2.0, 1.0)};
  const Eigen::MatrixXd mix = vertex_matrix(plant, scaled, 0);
  CHECK(mix(0, 0) == doctest::Approx(-0.6488));
  CHECK(mix(0, 1) == doctest::Approx(-0.3256));
  CHECK(mix(1, 0) == doctest::Approx(2.0124));
  CHECK(mix(1, 1) == doctest::Approx(-0.0652));

  ParamPolytope zero;
  zero.vertices = {Eigen::Vector2d(0.0, 0.0)};
  CHECK(vertex_matrix(plant, zero, 0).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS((void)vertex_matrix(plant, poly, 4), std::out_of_range);
}

TEST_CASE("interpolation coordinates satisfy the contract") {
  const ParamPolytope poly = two_state_polytope();

  auto check_valid = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd c = interpolate_coordinates(poly, theta);
    REQUIRE(c.size() == poly.num_vertices());
    CHECK(c.minCoeff() >= 0.0);
    CHECK(c.sum() == doctest::Approx(1.0).epsilon(1e-9));
    Eigen::VectorXd recon = Eigen::VectorXd::Zero(2);
    for (Eigen::Index v = 0; v < c.size(); ++v) recon += c[v] * poly.vertices[(size_t)v];
    CHECK((recon - theta).norm() <= 1e-9);
    return c;
  };

  const Eigen::VectorXd at_vertex = check_valid(Eigen::Vector2d(0.0, 1.0));
  CHECK(at_vertex[0] == doctest::Approx(1.0).epsilon(1e-9));  // indicator of that vertex

  const Eigen::VectorXd center = check_valid(Eigen::Vector2d(1.0, 0.0));
  for (Eigen::Index v = 0; v < 4; ++v) CHECK(center[v] == doctest::Approx(0.25).epsilon(1e-7));

  CHECK_THROWS_AS((void)interpolate_coordinates(poly, Eigen::Vector2d(3.0, 0.0)),
                  std::domain_error);

  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    check_valid(Eigen::Vector2d(rng.uniform(0.0, 2.0), rng.uniform(-1.0, 1.0)));
  }
}

TEST_CASE("gain scheduling") {
  const ParamPolytope poly = two_state_polytope();
  GainScheduledController ctrl;
  ctrl.polytope = poly;
  ctrl.P = Eigen::Matrix2d::Identity();
  Rng rng(11);
  for (int v = 0; v < 4; ++v) {
    Eigen::MatrixXd k(2, 2);
    for (int i = 0; i < 4; ++i) k(i / 2, i % 2) = rng.normal();
    ctrl.gains.push_back(k);
  }

  // At a vertex the schedule returns that vertex gain.
  CHECK((schedule_gain(ctrl, Eigen::Vector2d(0.0, 1.0)) - ctrl.gains[0]).norm() <= 1e-9);

  // All gains equal: constant schedule.
  GainScheduledController constant = ctrl;
  constant.gains.assign(4, ctrl.gains[2]);
  CHECK((schedule_gain(constant, Eigen::Vector2d(0.7, -0.2)) - ctrl.gains[2]).norm() <= 1e-12);

  // Unique barycentric coordinates on a segment.
  GainScheduledController seg;
  seg.polytope.vertices = {Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1.0)};
  seg.P = Eigen::MatrixXd::Identity(2, 2);
  seg.gains = {ctrl.gains[0], ctrl.gains[1]};
  const Eigen::MatrixXd k25 = schedule_gain(seg, Eigen::VectorXd::Constant(1, 0.25));
  CHECK((k25 - (0.75 * ctrl.gains[0] + 0.25 * ctrl.gains[1])).norm() <= 1e-9);
}

TEST_CASE("scheduling consistency with vertex decomposition") {
  const LpvaPlant plant = two_state_plant(TimeDomain::kContinuous);
  const ParamPolytope poly = two_state_polytope();
  GainScheduledController ctrl;
  ctrl.polytope = poly;
  ctrl.P = Eigen::Matrix2d::Identity();
  Rng rng(13);
  for (int v = 0; v < 4; ++v) {
    Eigen::MatrixXd k(2, 2);
    for (int i = 0; i < 4; ++i) k(i / 2, i % 2) = rng.normal();
    ctrl.gains.push_back(k);
  }
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Vector2d theta(rng.uniform(0.0, 2.0), rng.uniform(-1.0, 1.0));
    const Eigen::VectorXd c = interpolate_coordinates(poly, theta);
    Eigen::MatrixXd combo = Eigen::MatrixXd::Zero(2, 2);
    for (Eigen::Index v = 0; v < 4; ++v) {
      combo += c[v] * (vertex_matrix(plant, poly, v) + plant.B * ctrl.gains[(size_t)v]);
    }
    const Eigen::MatrixXd direct =
        plant.dynamics_matrix(theta) + plant.B * schedule_gain(ctrl, theta);
    CHECK((combo - direct).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("vertex-cone property on a positive box") {
  // Random symmetric terms adjusted so every vertex combination clears eps*I;
  // every interior combination must then be PSD.
  const Eigen::Index n = 3;
  Eigen::VectorXd lo(2), hi(2);
  lo << 0.5, 0.2;
  hi << 2.0, 1.0;
  const ParamPolytope poly = ParamPolytope::box(lo, hi);
  Rng rng(17);
  const double eps = 1e-6;

  std::vector<Eigen::MatrixXd> terms;
  for (int l = 0; l < 2; ++l) {
    Eigen::MatrixXd q(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) q(i, j) = rng.normal();
    }
    terms.push_back(symmetrize(q));
  }
  double worst = std::numeric_limits<double>::infinity();
  double min_weight = std::numeric_limits<double>::infinity();
  for (const auto& v : poly.vertices) {
    worst = std::min(worst, min_eigenvalue(v[0] * terms[0] + v[1] * terms[1]));
    min_weight = std::min(min_weight, v.sum());
  }
  const double shift = worst < eps ? (eps - worst) / min_weight : 0.0;
  for (auto& t : terms) t += shift * Eigen::MatrixXd::Identity(n, n);
  for (const auto& v : poly.vertices) {
    REQUIRE(min_eigenvalue(v[0] * terms[0] + v[1] * terms[1]) >= eps - 1e-12);
  }

  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Vector2d theta(rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1]));
    CHECK(min_eigenvalue(theta[0] * terms[0] + theta[1] * terms[1]) >= 0.0);
  }
}

TEST_CASE("parameter trajectory sampling") {
  const ParamPolytope poly = two_state_polytope();

  SUBCASE("rare switching leaves a single segment") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const ParamTrajectory traj = sample_param_trajectory(poly, 1e6, 1.0, seed);
      CHECK(traj.num_segments() <= 2);
    }
  }

  SUBCASE("segment count matches the Poisson expectation") {
    double total = 0.0;
    const int seeds = 1000;
    for (int seed = 0; seed < seeds; ++seed) {
      total += static_cast<double>(
          sample_param_trajectory(poly, 0.05, 3.0, static_cast<std::uint64_t>(seed))
              .num_segments());
    }
    const double mean = total / seeds;
    CHECK(mean > 0.9 * 60.0);
    CHECK(mean < 1.1 * 60.0);
  }

  SUBCASE("held values lie in the hull") {
    const ParamTrajectory traj = sample_param_trajectory(poly, 0.05, 3.0, 9);
    for (const auto& theta : traj.values) {
      CHECK_NOTHROW((void)interpolate_coordinates(poly, theta));
    }
  }

  SUBCASE("non-box polytopes draw through vertex weights") {
    ParamPolytope simplex;
    simplex.vertices = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
    const ParamTrajectory traj = sample_param_trajectory(simplex, 0.1, 2.0, 21);
    for (const auto& theta : traj.values) {
      CHECK_NOTHROW((void)interpolate_coordinates(simplex, theta));
    }
  }
}

TEST_CASE("simulation basics") {
  SUBCASE("zero dynamics hold the state") {
    LpvaPlant plant;
    plant.domain = TimeDomain::kDiscrete;
    plant.A_terms = {Eigen::MatrixXd::Zero(2, 2)};
    plant.B = Eigen::MatrixXd::Zero(2, 1);
    ParamPolytope point;
    point.vertices = {Eigen::VectorXd::Constant(1, 0.0)};
    SimulateOptions opts;
    opts.horizon = 5;
    const auto traj = simulate(plant, InputPolicy{},
                               ParamTrajectory::constant(point.vertices[0], 5, plant.domain),
                               Eigen::Vector2d(1.0, -2.0), opts);
    // x+ = 0 * x, so the state jumps to zero after the first step and stays.
    CHECK(traj.states.front() == Eigen::Vector2d(1.0, -2.0));
    for (size_t k = 1; k < traj.states.size(); ++k) CHECK(traj.states[k].norm() == 0.0);
  }

  SUBCASE("scalar exponential decay matches the closed form") {
    LpvaPlant plant;
    plant.domain = TimeDomain::kContinuous;
    plant.A_terms = {-Eigen::MatrixXd::Identity(1, 1)};
    plant.B = Eigen::MatrixXd::Zero(1, 1);
    SimulateOptions opts;
    opts.horizon = 1.0;
    opts.step = 0.01;
    const auto traj = simulate(plant, InputPolicy{},
                               ParamTrajectory::constant(Eigen::VectorXd::Constant(1, 1.0), 1.0,
                                                         plant.domain),
                               Eigen::VectorXd::Constant(1, 1.0), opts);
    CHECK(traj.states.back()[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
    CHECK(traj.times.back() == doctest::Approx(1.0));
  }

  SUBCASE("divergence aborts with a diagnostic") {
    LpvaPlant plant;
    plant.domain = TimeDomain::kDiscrete;
    plant.A_terms = {10.0 * Eigen::MatrixXd::Identity(1, 1)};
    plant.B = Eigen::MatrixXd::Zero(1, 1);
    SimulateOptions opts;
    opts.horizon = 400;
    CHECK_THROWS_AS(
        (void)simulate(plant, InputPolicy{},
                       ParamTrajectory::constant(Eigen::VectorXd::Constant(1, 1.0), 400,
                                                 plant.domain),
                       Eigen::VectorXd::Constant(1, 1.0), opts),
        std::runtime_error);
  }
}

TEST_CASE("eval_dynamics") {
  const LpvaPlant plant = two_state_plant(TimeDomain::kContinuous);
  const Eigen::Vector2d zero2(0.0, 0.0);

  CHECK(eval_dynamics(plant, zero2, Eigen::Vector2d(1.0, 2.0), zero2, zero2).norm() == 0.0);

  // L = 1 reduces to the LTI rule.
  LpvaPlant lti;
  lti.domain = TimeDomain::kDiscrete;
  lti.A_terms = {plant.A_terms[0]};
  lti.B = plant.B;
  const Eigen::Vector2d x(0.3, -0.7), u(0.2, 0.1), w(0.01, -0.02);
  const Eigen::VectorXd dx =
      eval_dynamics(lti, Eigen::VectorXd::Constant(1, 1.0), x, u, w);
  CHECK((dx - (plant.A_terms[0] * x + plant.B * u + w)).norm() <= 1e-15);

  // theta = (0, 1) picks the second A term's first column.
  const Eigen::VectorXd col =
      eval_dynamics(plant, Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(1.0, 0.0), zero2, zero2);
  CHECK(col[0] == doctest::Approx(-0.1696));
  CHECK(col[1] == doctest::Approx(0.8434));

  CHECK_THROWS_AS(
      (void)eval_dynamics(plant, Eigen::VectorXd::Constant(1, 1.0), x, u, w),
      std::invalid_argument);
}

TEST_CASE("rk4 exhibits fourth-order endpoint convergence") {
  const LpvaPlant plant = two_state_plant(TimeDomain::kContinuous);
  const ParamPolytope poly = two_state_polytope();
  const ParamTrajectory params = sample_param_trajectory(poly, 0.25, 1.0, 3);
  GainScheduledController ctrl;
  ctrl.polytope = poly;
  ctrl.P = Eigen::Matrix2d::Identity();
  ctrl.gains.assign(4, Eigen::MatrixXd::Zero(2, 2));

  auto endpoint = [&](double step) {
    SimulateOptions opts;
    opts.horizon = 1.0;
    opts.step = step;
    return simulate(plant, ctrl, params, two_state_x0(), opts).states.back();
  };
  const double d1 = (endpoint(0.02) - endpoint(0.01)).norm();
  const double d2 = (endpoint(0.01) - endpoint(0.005)).norm();
  REQUIRE(d2 > 0.0);
  const double order_ratio = d1 / d2;  // ~16 for a fourth-order scheme
  CHECK(order_ratio > 8.0);
  CHECK(order_ratio < 32.0);
}

TEST_CASE("polytope validation and box detection") {
  ParamPolytope poly = two_state_polytope();
  Eigen::VectorXd lo, hi;
  CHECK(poly.as_box(&lo, &hi));
  CHECK(lo == Eigen::Vector2d(0.0, -1.0));
  CHECK(hi == Eigen::Vector2d(2.0, 1.0));

  ParamPolytope dup = poly;
  dup.vertices.push_back(poly.vertices[0]);
  CHECK_THROWS_AS(dup.validate(), std::invalid_argument);

  ParamPolytope simplex;
  simplex.vertices = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
  CHECK(!simplex.as_box(nullptr, nullptr));

  ParamPolytope empty;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}

}  // TEST_SUITE
