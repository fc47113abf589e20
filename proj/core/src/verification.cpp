#include "lpvsyn/verification.hpp"

#include <cmath>

#include "lpvsyn/linalg.hpp"

namespace lpvsyn {
namespace {

// Symmetric-variable placement shared with the bound programs below: builds
// min g s.t. per-vertex Lyapunov LMIs in M, M PSD, g >= trace(C_v M C_v^T).
double h2_bound_impl(const std::vector<Eigen::MatrixXd>& a_vertices,
                     const std::vector<Eigen::MatrixXd>& c_vertices, const Eigen::MatrixXd& f,
                     TimeDomain domain, const sdp::SolverSettings& settings) {
  if (a_vertices.empty()) throw std::invalid_argument("h2_bound: no vertex matrices");
  const Eigen::Index n = a_vertices.front().rows();
  for (const auto& a : a_vertices) {
    if (a.rows() != n || a.cols() != n) {
      throw std::invalid_argument("h2_bound: vertex matrices must be square of common size");
    }
  }
  std::vector<Eigen::MatrixXd> cs = c_vertices;
  if (cs.size() == 1 && a_vertices.size() > 1) {
    cs.assign(a_vertices.size(), c_vertices.front());
  }
  if (cs.size() != a_vertices.size()) {
    throw std::invalid_argument("h2_bound: need one output matrix (or one per vertex)");
  }
  const Eigen::MatrixXd fft = symmetrize(Eigen::MatrixXd(f * f.transpose()));

  sdp::SdpProblem pb;
  // M scalarized over the upper triangle; E_ij is the symmetric basis matrix.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> entries;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      pb.add_scalars(1, sdp::ScalarSign::kFree,
                     "M(" + std::to_string(i) + "," + std::to_string(j) + ")");
      entries.emplace_back(i, j);
    }
  }
  const int g_var = pb.add_scalars(1, sdp::ScalarSign::kNonNegative, "g");

  auto basis = [&](Eigen::Index i, Eigen::Index j) {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, n);
    e(i, j) = 1.0;
    e(j, i) = 1.0;
    return e;
  };

  for (size_t v = 0; v < a_vertices.size(); ++v) {
    const Eigen::MatrixXd& a = a_vertices[v];
    const int blk = pb.add_block(n, "lyapunov[" + std::to_string(v) + "]");
    pb.add_constant(blk, 0, 0, Eigen::MatrixXd(-fft));
    for (size_t k = 0; k < entries.size(); ++k) {
      const auto [i, j] = entries[k];
      const Eigen::MatrixXd e = basis(i, j);
      Eigen::MatrixXd coeff;
      if (domain == TimeDomain::kContinuous) {
        coeff = -(a * e + e * a.transpose());
      } else {
        coeff = e - a * e * a.transpose();
      }
      pb.add_coeff(blk, static_cast<int>(k), 0, 0, symmetrize(coeff));
    }
    // 1x1 block: g - trace(C_v M C_v^T) >= 0.
    const int tb = pb.add_block(1, "trace_cap[" + std::to_string(v) + "]");
    pb.add_coeff(tb, g_var, 0, 0, Eigen::MatrixXd::Identity(1, 1));
    const Eigen::MatrixXd gram = cs[v].transpose() * cs[v];
    for (size_t k = 0; k < entries.size(); ++k) {
      const auto [i, j] = entries[k];
      const double w = (i == j) ? gram(i, i) : 2.0 * gram(i, j);
      if (w != 0.0) {
        Eigen::MatrixXd one(1, 1);
        one(0, 0) = -w;
        pb.add_coeff(tb, static_cast<int>(k), 0, 0, one);
      }
    }
  }
  const int mb = pb.add_block(n, "m_psd");
  for (size_t k = 0; k < entries.size(); ++k) {
    const auto [i, j] = entries[k];
    pb.add_coeff(mb, static_cast<int>(k), 0, 0, basis(i, j));
  }
  pb.add_objective_term(g_var, 1.0);

  const sdp::SdpSolution sol = sdp::solve(pb, settings);
  if (sol.status == sdp::SolveStatus::kInfeasible) {
    throw SolverFailureError("no quadratic H2 certificate: no common M satisfies the vertex "
                             "Lyapunov inequalities");
  }
  if (sol.status != sdp::SolveStatus::kOptimal) {
    throw SolverFailureError("h2_bound: solver returned " + sdp::to_string(sol.status));
  }
  return std::sqrt(std::max(0.0, sol.decision[g_var]));
}

}  // namespace

StabilityReport check_quadratic_stability(const LpvaPlant& plant,
                                          const GainScheduledController& controller,
                                          double tol) {
  plant.validate();
  controller.validate();
  if (plant.num_states() != controller.P.rows() ||
      plant.num_inputs() != controller.gains.front().rows()) {
    throw std::invalid_argument("check_quadratic_stability: dimension mismatch");
  }
  const Eigen::MatrixXd& p = controller.P;
  StabilityReport report;
  report.tolerance = tol;
  for (Eigen::Index v = 0; v < controller.polytope.num_vertices(); ++v) {
    const Eigen::MatrixXd acl =
        vertex_matrix(plant, controller.polytope, v) + plant.B * controller.gains[static_cast<size_t>(v)];
    Eigen::MatrixXd lmi;
    if (plant.domain == TimeDomain::kContinuous) {
      lmi = symmetrize(Eigen::MatrixXd(-(acl * p) - (acl * p).transpose()));
    } else {
      const Eigen::Index n = p.rows();
      lmi.resize(2 * n, 2 * n);
      lmi.topLeftCorner(n, n) = p;
      lmi.topRightCorner(n, n) = acl * p;
      lmi.bottomLeftCorner(n, n) = (acl * p).transpose();
      lmi.bottomRightCorner(n, n) = p;
    }
    report.vertex_min_eigs.push_back(min_eigenvalue(lmi));
  }
  report.worst = *std::min_element(report.vertex_min_eigs.begin(), report.vertex_min_eigs.end());
  report.pass = report.worst >= -tol;
  return report;
}

SampledStabilityReport check_certificate_against_samples(const StabilizationCertificate& cert,
                                                         const DataRecord& record,
                                                         const NoiseBound& bound, int num_plants,
                                                         std::uint64_t seed, double tol) {
  if (cert.domain != record.domain) {
    throw std::invalid_argument("check_certificate_against_samples: domain mismatch");
  }
  const std::vector<LpvaPlant> plants = sample_consistent_plants(record, bound, num_plants, seed);
  const GainScheduledController controller = cert.controller();
  SampledStabilityReport agg;
  agg.num_plants = num_plants;
  agg.pass = true;
  agg.worst_margin = std::numeric_limits<double>::infinity();
  for (const auto& plant : plants) {
    agg.reports.push_back(check_quadratic_stability(plant, controller, tol));
    agg.worst_margin = std::min(agg.worst_margin, agg.reports.back().worst);
    agg.pass = agg.pass && agg.reports.back().pass;
  }
  return agg;
}

double h2_bound_ct(const std::vector<Eigen::MatrixXd>& a_vertices,
                   const std::vector<Eigen::MatrixXd>& c_vertices, const Eigen::MatrixXd& f,
                   const sdp::SolverSettings& settings) {
  return h2_bound_impl(a_vertices, c_vertices, f, TimeDomain::kContinuous, settings);
}

double h2_bound_dt(const std::vector<Eigen::MatrixXd>& a_vertices,
                   const std::vector<Eigen::MatrixXd>& c_vertices, const Eigen::MatrixXd& f,
                   const sdp::SolverSettings& settings) {
  return h2_bound_impl(a_vertices, c_vertices, f, TimeDomain::kDiscrete, settings);
}

H2Estimate estimate_h2_monte_carlo(const LpvaPlant& plant,
                                   const GainScheduledController& controller,
                                   const PerformanceSpec& perf, std::uint64_t seed,
                                   const H2MonteCarloOptions& options) {
  plant.validate();
  controller.validate();
  perf.validate(plant.num_states(), plant.num_inputs());
  const Eigen::Index n = plant.num_states();
  const Eigen::Index e = perf.F.cols();
  Rng root(seed);

  H2Estimate est;
  est.num_param_trajs = options.num_param_trajs;
  est.num_noise_trials = options.num_noise_trials;
  est.horizon = options.horizon;

  double best_ms = -1.0;
  double best_half_ms = 0.0;
  for (int traj = 0; traj < options.num_param_trajs; ++traj) {
    const ParamTrajectory params = sample_param_trajectory(
        controller.polytope, options.mean_dwell, options.horizon,
        root.split(static_cast<std::uint64_t>(traj)).next_u64(), plant.domain);

    // Switch-aligned closed-loop matrices, computed once per segment.
    std::vector<Eigen::MatrixXd> acl, ccl;
    for (const auto& theta : params.values) {
      const Eigen::MatrixXd gain = schedule_gain(controller, theta);
      acl.push_back(plant.dynamics_matrix(theta) + plant.B * gain);
      ccl.push_back(perf.C + perf.D * gain);
    }

    double sum_ms = 0.0, sum_ms2 = 0.0;
    int ok_trials = 0;
    bool diverged = false;
    for (int trial = 0; trial < options.num_noise_trials && !diverged; ++trial) {
      Rng rng = root.split(static_cast<std::uint64_t>(traj)).split(static_cast<std::uint64_t>(trial + 1));
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
      double acc = 0.0;
      int count = 0;
      if (plant.domain == TimeDomain::kDiscrete) {
        const int steps = static_cast<int>(std::llround(options.horizon));
        size_t seg = 0;
        for (int k = 0; k < steps; ++k) {
          while (seg + 1 < params.switch_times.size() &&
                 params.switch_times[seg + 1] <= static_cast<double>(k)) {
            ++seg;
          }
          x = acl[seg] * x + perf.F * rng.normal_vector(e);
          const double zn = (ccl[seg] * x).squaredNorm();
          acc += zn;
          ++count;
          if (!x.allFinite() || x.norm() > options.divergence_norm) {
            diverged = true;
            break;
          }
        }
      } else {
        const double h = options.ct_step;
        const double sqh = std::sqrt(h);
        size_t seg = 0;
        for (double t = 0.0; t < options.horizon - 1e-12; t += h) {
          while (seg + 1 < params.switch_times.size() && params.switch_times[seg + 1] <= t) ++seg;
          x += h * (acl[seg] * x) + sqh * (perf.F * rng.normal_vector(e));
          acc += (ccl[seg] * x).squaredNorm();
          ++count;
          if (!x.allFinite() || x.norm() > options.divergence_norm) {
            diverged = true;
            break;
          }
        }
      }
      if (!diverged && count > 0) {
        const double ms = acc / static_cast<double>(count);
        sum_ms += ms;
        sum_ms2 += ms * ms;
        ++ok_trials;
      }
    }
    if (diverged || ok_trials == 0) {
      ++est.divergences;
      est.per_traj_rms.push_back(std::numeric_limits<double>::infinity());
      est.estimate = std::numeric_limits<double>::infinity();
      continue;
    }
    const double mean_ms = sum_ms / ok_trials;
    est.per_traj_rms.push_back(std::sqrt(std::max(0.0, mean_ms)));
    if (mean_ms > best_ms) {
      best_ms = mean_ms;
      const double pop_var = std::max(0.0, sum_ms2 / ok_trials - mean_ms * mean_ms);
      best_half_ms = 1.96 * std::sqrt(pop_var / std::max(1, ok_trials - 1));
    }
  }
  if (est.divergences == 0 && best_ms >= 0.0) {
    est.estimate = std::sqrt(best_ms);
    // Delta method: d sqrt(m) = dm / (2 sqrt(m)).
    est.half_width = best_ms > 0.0 ? best_half_ms / (2.0 * std::sqrt(best_ms)) : 0.0;
  }
  return est;
}

LyapunovReport lyapunov_decrease_check(const StateTrajectory& trajectory,
                                       const Eigen::MatrixXd& p, TimeDomain domain,
                                       double tol) {
  if (p.rows() != p.cols() || min_eigenvalue(symmetrize(p)) <= 0.0) {
    throw std::invalid_argument("lyapunov_decrease_check: P must be positive definite");
  }
  if (trajectory.states.size() < 2) {
    throw std::invalid_argument("lyapunov_decrease_check: trajectory too short");
  }
  const Eigen::LDLT<Eigen::MatrixXd> pfac(symmetrize(p));
  auto v_of = [&](const Eigen::VectorXd& x) { return x.dot(pfac.solve(x)); };

  LyapunovReport report;
  report.tolerance = tol >= 0.0 ? tol : (domain == TimeDomain::kDiscrete ? 0.0 : 1e-8);
  const double v0 = v_of(trajectory.states.front());
  const double floor_v = 1e-18 * (1.0 + v0);
  report.max_increase = -std::numeric_limits<double>::infinity();
  for (size_t k = 0; k + 1 < trajectory.states.size(); ++k) {
    const double vk = v_of(trajectory.states[k]);
    if (vk <= floor_v) continue;  // zero-state convention
    const double vn = v_of(trajectory.states[k + 1]);
    double delta = vn - vk;
    if (domain == TimeDomain::kContinuous) {
      const double dt = trajectory.times[k + 1] - trajectory.times[k];
      if (dt <= 0.0) continue;
      delta /= dt;
    }
    report.max_increase = std::max(report.max_increase, delta);
    ++report.steps_checked;
  }
  if (report.steps_checked == 0) {
    report.max_increase = 0.0;  // all states at the origin
    report.pass = true;
    return report;
  }
  report.pass = report.max_increase < report.tolerance;
  return report;
}

}  // namespace lpvsyn
