#include "lpvsyn/lpv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lpvsyn/linalg.hpp"

namespace lpvsyn {
namespace {

constexpr double kInterpResidualTol = 1e-9;

// Lawson-Hanson nonnegative least squares: min ||A c - b|| over c >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index nvar = a.cols();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(nvar);
  std::vector<bool> passive(nvar, false);
  const double wtol = 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()) * std::max(1.0, b.norm());

  for (int outer = 0; outer < 3 * static_cast<int>(nvar) + 30; ++outer) {
    const Eigen::VectorXd grad = a.transpose() * (b - a * c);
    Eigen::Index best = -1;
    double best_val = wtol;
    for (Eigen::Index i = 0; i < nvar; ++i) {
      if (!passive[i] && grad[i] > best_val) {
        best_val = grad[i];
        best = i;
      }
    }
    if (best < 0) break;
    passive[best] = true;

    for (int inner = 0; inner < 3 * static_cast<int>(nvar) + 30; ++inner) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index i = 0; i < nvar; ++i) {
        if (passive[i]) idx.push_back(i);
      }
      Eigen::MatrixXd ap(a.rows(), static_cast<Eigen::Index>(idx.size()));
      for (size_t k = 0; k < idx.size(); ++k) ap.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
      const Eigen::VectorXd z = ap.completeOrthogonalDecomposition().solve(b);

      if (z.minCoeff() > 0.0) {
        c.setZero();
        for (size_t k = 0; k < idx.size(); ++k) c[idx[k]] = z[static_cast<Eigen::Index>(k)];
        break;
      }
      double alpha = std::numeric_limits<double>::infinity();
      for (size_t k = 0; k < idx.size(); ++k) {
        const double zk = z[static_cast<Eigen::Index>(k)];
        if (zk <= 0.0) {
          const double ck = c[idx[k]];
          alpha = std::min(alpha, ck / (ck - zk));
        }
      }
      for (size_t k = 0; k < idx.size(); ++k) {
        const Eigen::Index i = idx[k];
        c[i] += alpha * (z[static_cast<Eigen::Index>(k)] - c[i]);
        if (c[i] <= 1e-14) {
          c[i] = 0.0;
          passive[i] = false;
        }
      }
    }
  }
  return c;
}

// Minimum-norm point of {c : A c = b, c >= 0}, starting from a feasible c0.
// Primal active-set iteration on the bound constraints; the equality-
// constrained subproblems are solved as minimum-norm least squares.
Eigen::VectorXd min_norm_polish(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                Eigen::VectorXd c) {
  const Eigen::Index nvar = a.cols();
  const double ztol = 1e-12;
  std::vector<bool> active(nvar, false);
  for (Eigen::Index i = 0; i < nvar; ++i) active[i] = (c[i] <= ztol);

  for (int iter = 0; iter < 10 * static_cast<int>(nvar) + 100; ++iter) {
    std::vector<Eigen::Index> free_idx;
    for (Eigen::Index i = 0; i < nvar; ++i) {
      if (!active[i]) free_idx.push_back(i);
    }
    if (free_idx.empty()) return c;

    Eigen::MatrixXd af(a.rows(), static_cast<Eigen::Index>(free_idx.size()));
    for (size_t k = 0; k < free_idx.size(); ++k) {
      af.col(static_cast<Eigen::Index>(k)) = a.col(free_idx[k]);
    }
    const auto cod = af.completeOrthogonalDecomposition();
    const Eigen::VectorXd d = cod.solve(b);
    if ((af * d - b).norm() > kInterpResidualTol * std::max(1.0, b.norm())) {
      return c;  // working set cannot represent b; keep last feasible point
    }

    if (d.minCoeff() >= -ztol) {
      Eigen::VectorXd next = Eigen::VectorXd::Zero(nvar);
      for (size_t k = 0; k < free_idx.size(); ++k) {
        next[free_idx[k]] = std::max(0.0, d[static_cast<Eigen::Index>(k)]);
      }
      c = next;
      // Lagrange multipliers: d lies in the row space of af, so af^T y = d is
      // consistent; bound multipliers are -(a_i . y) on the active set.
      const Eigen::VectorXd y =
          af.transpose().completeOrthogonalDecomposition().solve(d);
      Eigen::Index worst = -1;
      double worst_val = -1e-10;
      for (Eigen::Index i = 0; i < nvar; ++i) {
        if (active[i]) {
          const double mu = -a.col(i).dot(y);
          if (mu < worst_val) {
            worst_val = mu;
            worst = i;
          }
        }
      }
      if (worst < 0) return c;
      active[worst] = false;
      continue;
    }

    double alpha = 1.0;
    for (size_t k = 0; k < free_idx.size(); ++k) {
      const double dk = d[static_cast<Eigen::Index>(k)];
      const double ck = c[free_idx[k]];
      if (dk < ck) {
        const double denom = ck - dk;
        if (denom > 0.0 && dk < 0.0) alpha = std::min(alpha, ck / denom);
      }
    }
    for (size_t k = 0; k < free_idx.size(); ++k) {
      const Eigen::Index i = free_idx[k];
      c[i] += alpha * (d[static_cast<Eigen::Index>(k)] - c[i]);
      if (c[i] <= ztol) {
        c[i] = 0.0;
        active[i] = true;
      }
    }
  }
  return c;
}

Eigen::VectorXd draw_theta(const ParamPolytope& polytope, const Eigen::VectorXd* lo,
                           const Eigen::VectorXd* hi, Rng& rng) {
  if (lo != nullptr) {
    Eigen::VectorXd theta(lo->size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = rng.uniform((*lo)[i], (*hi)[i]);
    return theta;
  }
  const Eigen::VectorXd w = rng.dirichlet_flat(polytope.num_vertices());
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(polytope.dim());
  for (Eigen::Index v = 0; v < polytope.num_vertices(); ++v) theta += w[v] * polytope.vertices[v];
  return theta;
}

using OdeRhs = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

Eigen::VectorXd rk4_step(const OdeRhs& f, double t, const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd k1 = f(t, x);
  const Eigen::VectorXd k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
  const Eigen::VectorXd k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
  const Eigen::VectorXd k4 = f(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void check_state(const Eigen::VectorXd& x, double t, double limit) {
  if (!x.allFinite() || x.norm() > limit) {
    throw std::runtime_error("simulate: state diverged at t = " + std::to_string(t) +
                             " (norm " + std::to_string(x.norm()) + ")");
  }
}

}  // namespace

std::string to_string(TimeDomain domain) {
  return domain == TimeDomain::kContinuous ? "continuous" : "discrete";
}

TimeDomain time_domain_from_string(const std::string& s) {
  if (s == "continuous") return TimeDomain::kContinuous;
  if (s == "discrete") return TimeDomain::kDiscrete;
  throw std::invalid_argument("unknown time domain: " + s);
}

Eigen::MatrixXd LpvaPlant::dynamics_matrix(const Eigen::VectorXd& theta) const {
  if (theta.size() != num_params()) {
    throw std::invalid_argument("dynamics_matrix: theta has wrong dimension");
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(num_states(), num_states());
  for (Eigen::Index l = 0; l < num_params(); ++l) a += theta[l] * A_terms[static_cast<size_t>(l)];
  return a;
}

void LpvaPlant::validate() const {
  if (A_terms.empty()) throw std::invalid_argument("plant: needs at least one A term");
  const Eigen::Index n = A_terms.front().rows();
  for (const auto& a : A_terms) {
    if (a.rows() != n || a.cols() != n) {
      throw std::invalid_argument("plant: all A terms must be square of equal size");
    }
  }
  if (B.rows() != n) throw std::invalid_argument("plant: B row count must match state dimension");
}

ParamPolytope ParamPolytope::box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  if (lo.size() != hi.size()) throw std::invalid_argument("box: bound dimensions differ");
  const Eigen::Index dim = lo.size();
  ParamPolytope p;
  const Eigen::Index count = Eigen::Index{1} << dim;
  p.vertices.reserve(static_cast<size_t>(count));
  for (Eigen::Index mask = 0; mask < count; ++mask) {
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      const bool high = (mask >> (dim - 1 - i)) & 1;
      v[i] = high ? hi[i] : lo[i];
    }
    p.vertices.push_back(v);
  }
  return p;
}

bool ParamPolytope::as_box(Eigen::VectorXd* lo, Eigen::VectorXd* hi) const {
  const Eigen::Index d = dim();
  if (d <= 0 || num_vertices() != (Eigen::Index{1} << d)) return false;
  Eigen::VectorXd mn = vertices.front(), mx = vertices.front();
  for (const auto& v : vertices) {
    mn = mn.cwiseMin(v);
    mx = mx.cwiseMax(v);
  }
  // Every corner of [mn, mx] must appear exactly once.
  std::vector<bool> seen(static_cast<size_t>(num_vertices()), false);
  for (const auto& v : vertices) {
    Eigen::Index mask = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (v[i] == mx[i] && mx[i] != mn[i]) {
        mask |= Eigen::Index{1} << (d - 1 - i);
      } else if (v[i] != mn[i]) {
        return false;
      }
    }
    if (seen[static_cast<size_t>(mask)]) return false;
    seen[static_cast<size_t>(mask)] = true;
  }
  if (lo != nullptr) *lo = mn;
  if (hi != nullptr) *hi = mx;
  return true;
}

void ParamPolytope::validate() const {
  if (vertices.empty()) throw std::invalid_argument("polytope: vertex list is empty");
  const Eigen::Index d = dim();
  for (const auto& v : vertices) {
    if (v.size() != d) throw std::invalid_argument("polytope: inconsistent vertex dimensions");
  }
  for (size_t i = 0; i < vertices.size(); ++i) {
    for (size_t j = i + 1; j < vertices.size(); ++j) {
      if ((vertices[i] - vertices[j]).lpNorm<Eigen::Infinity>() == 0.0) {
        throw std::invalid_argument("polytope: duplicate vertices");
      }
    }
  }
}

void GainScheduledController::validate() const {
  polytope.validate();
  if (static_cast<Eigen::Index>(gains.size()) != polytope.num_vertices()) {
    throw std::invalid_argument("controller: one gain per vertex required");
  }
  if (P.rows() != P.cols() || asymmetry(P) > 1e-10 * std::max(1.0, P.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("controller: P must be square symmetric");
  }
  if (min_eigenvalue(symmetrize(P)) <= 0.0) {
    throw std::invalid_argument("controller: P must be positive definite");
  }
  for (const auto& k : gains) {
    if (k.cols() != P.rows()) throw std::invalid_argument("controller: gain column mismatch");
    if (k.rows() != gains.front().rows()) {
      throw std::invalid_argument("controller: gain row mismatch");
    }
  }
}

const Eigen::VectorXd& ParamTrajectory::at(double time) const {
  if (values.empty()) throw std::logic_error("param trajectory is empty");
  auto it = std::upper_bound(switch_times.begin(), switch_times.end(), time);
  const auto idx = static_cast<size_t>(std::distance(switch_times.begin(), it));
  return values[idx == 0 ? 0 : std::min(idx - 1, values.size() - 1)];
}

ParamTrajectory ParamTrajectory::constant(const Eigen::VectorXd& theta, double end_time,
                                          TimeDomain domain) {
  ParamTrajectory traj;
  traj.switch_times = {0.0};
  traj.values = {theta};
  traj.end_time = end_time;
  traj.domain = domain;
  return traj;
}

void ParamTrajectory::validate() const {
  if (switch_times.size() != values.size() || values.empty()) {
    throw std::invalid_argument("param trajectory: times/values size mismatch");
  }
  if (switch_times.front() != 0.0) {
    throw std::invalid_argument("param trajectory: must start at time 0");
  }
  for (size_t i = 1; i < switch_times.size(); ++i) {
    if (switch_times[i] <= switch_times[i - 1]) {
      throw std::invalid_argument("param trajectory: switch times must increase");
    }
  }
}

Eigen::MatrixXd vertex_matrix(const LpvaPlant& plant, const ParamPolytope& polytope,
                              Eigen::Index v) {
  if (v < 0 || v >= polytope.num_vertices()) {
    throw std::out_of_range("vertex_matrix: vertex index out of range");
  }
  return plant.dynamics_matrix(polytope.vertices[static_cast<size_t>(v)]);
}

Eigen::VectorXd interpolate_coordinates(const ParamPolytope& polytope,
                                        const Eigen::VectorXd& theta) {
  if (theta.size() != polytope.dim()) {
    throw std::invalid_argument("interpolate_coordinates: theta dimension mismatch");
  }
  const Eigen::Index nv = polytope.num_vertices();
  Eigen::MatrixXd a(polytope.dim() + 1, nv);
  for (Eigen::Index v = 0; v < nv; ++v) {
    a.col(v).head(polytope.dim()) = polytope.vertices[static_cast<size_t>(v)];
    a(polytope.dim(), v) = 1.0;
  }
  Eigen::VectorXd b(polytope.dim() + 1);
  b.head(polytope.dim()) = theta;
  b[polytope.dim()] = 1.0;

  Eigen::VectorXd c = nnls(a, b);
  const double scale = std::max(1.0, b.norm());
  if ((a * c - b).norm() > kInterpResidualTol * scale) {
    throw std::domain_error("interpolate_coordinates: point lies outside the vertex hull");
  }
  c = min_norm_polish(a, b, c);
  if ((a * c - b).norm() > kInterpResidualTol * scale || c.minCoeff() < 0.0) {
    throw std::domain_error("interpolate_coordinates: no nonnegative representation found");
  }
  return c;
}

Eigen::MatrixXd schedule_gain(const GainScheduledController& controller,
                              const Eigen::VectorXd& theta) {
  const Eigen::VectorXd c = interpolate_coordinates(controller.polytope, theta);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(controller.gains.front().rows(),
                                            controller.gains.front().cols());
  for (Eigen::Index v = 0; v < c.size(); ++v) k += c[v] * controller.gains[static_cast<size_t>(v)];
  return k;
}

Eigen::VectorXd eval_dynamics(const LpvaPlant& plant, const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                              const Eigen::VectorXd& w) {
  if (x.size() != plant.num_states() || u.size() != plant.num_inputs() ||
      w.size() != plant.num_states()) {
    throw std::invalid_argument("eval_dynamics: dimension mismatch");
  }
  return plant.dynamics_matrix(theta) * x + plant.B * u + w;
}

ParamTrajectory sample_param_trajectory(const ParamPolytope& polytope, double mean_dwell,
                                        double horizon, std::uint64_t seed,
                                        TimeDomain domain) {
  if (mean_dwell <= 0.0 || horizon <= 0.0) {
    throw std::invalid_argument("sample_param_trajectory: dwell and horizon must be positive");
  }
  Eigen::VectorXd lo, hi;
  const bool is_box = polytope.as_box(&lo, &hi);
  Rng rng(seed);
  ParamTrajectory traj;
  traj.domain = domain;
  traj.end_time = horizon;
  double t = 0.0;
  while (t < horizon) {
    traj.switch_times.push_back(t);
    traj.values.push_back(draw_theta(polytope, is_box ? &lo : nullptr, is_box ? &hi : nullptr, rng));
    if (domain == TimeDomain::kContinuous) {
      t += rng.exponential(mean_dwell);
    } else {
      t += rng.geometric_dwell(mean_dwell);
    }
  }
  return traj;
}

StateTrajectory simulate(const LpvaPlant& plant, const GainScheduledController& controller,
                         const ParamTrajectory& params, const Eigen::VectorXd& x0,
                         const SimulateOptions& options) {
  plant.validate();
  controller.validate();
  if (x0.size() != plant.num_states()) throw std::invalid_argument("simulate: x0 dimension");
  const Eigen::VectorXd zero_w = Eigen::VectorXd::Zero(plant.num_states());
  const auto dist = [&](double t) { return options.disturbance ? options.disturbance(t) : zero_w; };

  StateTrajectory out;
  Eigen::VectorXd x = x0;
  if (plant.domain == TimeDomain::kDiscrete) {
    const int steps = static_cast<int>(std::llround(options.horizon));
    Eigen::MatrixXd gain;
    const Eigen::VectorXd* held = nullptr;
    for (int k = 0; k <= steps; ++k) {
      const Eigen::VectorXd& theta = params.at(static_cast<double>(k));
      if (held == nullptr || &theta != held) {
        gain = schedule_gain(controller, theta);
        held = &theta;
      }
      const Eigen::VectorXd u = gain * x;
      const Eigen::VectorXd w = dist(static_cast<double>(k));
      out.times.push_back(static_cast<double>(k));
      out.states.push_back(x);
      out.inputs.push_back(u);
      out.disturbances.push_back(w);
      if (k == steps) break;
      x = eval_dynamics(plant, theta, x, u, w);
      check_state(x, static_cast<double>(k + 1), options.divergence_norm);
    }
    return out;
  }

  // Continuous time: integrate segment by segment so theta is constant inside
  // every RK4 stage; record at each accepted step boundary.
  double t = 0.0;
  for (size_t seg = 0; seg < params.values.size() && t < options.horizon; ++seg) {
    const double seg_end = (seg + 1 < params.switch_times.size())
                               ? std::min(params.switch_times[seg + 1], options.horizon)
                               : options.horizon;
    if (seg_end <= t) continue;
    const Eigen::VectorXd& theta = params.values[seg];
    const Eigen::MatrixXd acl = plant.dynamics_matrix(theta) +
                                plant.B * schedule_gain(controller, theta);
    const Eigen::MatrixXd gain = schedule_gain(controller, theta);
    const OdeRhs f = [&](double ft, const Eigen::VectorXd& fx) -> Eigen::VectorXd {
      return acl * fx + dist(ft);
    };
    while (t < seg_end - 1e-13) {
      out.times.push_back(t);
      out.states.push_back(x);
      out.inputs.push_back(gain * x);
      out.disturbances.push_back(dist(t));
      const double h = std::min(options.step, seg_end - t);
      x = rk4_step(f, t, x, h);
      t += h;
      check_state(x, t, options.divergence_norm);
    }
    t = seg_end;
  }
  out.times.push_back(t);
  out.states.push_back(x);
  const Eigen::VectorXd& theta_end = params.at(t);
  out.inputs.push_back(schedule_gain(controller, theta_end) * x);
  out.disturbances.push_back(dist(t));
  return out;
}

StateTrajectory simulate(const LpvaPlant& plant, const InputPolicy& input,
                         const ParamTrajectory& params, const Eigen::VectorXd& x0,
                         const SimulateOptions& options) {
  plant.validate();
  if (x0.size() != plant.num_states()) throw std::invalid_argument("simulate: x0 dimension");
  const Eigen::VectorXd zero_u = Eigen::VectorXd::Zero(plant.num_inputs());
  const Eigen::VectorXd zero_w = Eigen::VectorXd::Zero(plant.num_states());
  const auto policy = [&](double t, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& theta) -> Eigen::VectorXd {
    return input ? input(t, x, theta) : zero_u;
  };
  const auto dist = [&](double t) { return options.disturbance ? options.disturbance(t) : zero_w; };

  StateTrajectory out;
  Eigen::VectorXd x = x0;
  if (plant.domain == TimeDomain::kDiscrete) {
    const int steps = static_cast<int>(std::llround(options.horizon));
    for (int k = 0; k <= steps; ++k) {
      const Eigen::VectorXd& theta = params.at(static_cast<double>(k));
      const Eigen::VectorXd u = policy(static_cast<double>(k), x, theta);
      const Eigen::VectorXd w = dist(static_cast<double>(k));
      out.times.push_back(static_cast<double>(k));
      out.states.push_back(x);
      out.inputs.push_back(u);
      out.disturbances.push_back(w);
      if (k == steps) break;
      x = eval_dynamics(plant, theta, x, u, w);
      check_state(x, static_cast<double>(k + 1), options.divergence_norm);
    }
    return out;
  }

  double t = 0.0;
  for (size_t seg = 0; seg < params.values.size() && t < options.horizon; ++seg) {
    const double seg_end = (seg + 1 < params.switch_times.size())
                               ? std::min(params.switch_times[seg + 1], options.horizon)
                               : options.horizon;
    if (seg_end <= t) continue;
    const Eigen::VectorXd& theta = params.values[seg];
    const Eigen::MatrixXd a = plant.dynamics_matrix(theta);
    const OdeRhs f = [&](double ft, const Eigen::VectorXd& fx) -> Eigen::VectorXd {
      return a * fx + plant.B * policy(ft, fx, theta) + dist(ft);
    };
    while (t < seg_end - 1e-13) {
      out.times.push_back(t);
      out.states.push_back(x);
      out.inputs.push_back(policy(t, x, theta));
      out.disturbances.push_back(dist(t));
      const double h = std::min(options.step, seg_end - t);
      x = rk4_step(f, t, x, h);
      t += h;
      check_state(x, t, options.divergence_norm);
    }
    t = seg_end;
  }
  out.times.push_back(t);
  out.states.push_back(x);
  out.inputs.push_back(policy(t, x, params.at(t)));
  out.disturbances.push_back(dist(t));
  return out;
}

Eigen::VectorXd rk4_span(const LpvaPlant& plant, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                         Eigen::VectorXd x, double t0, double t1, double max_step) {
  const Eigen::MatrixXd a = plant.dynamics_matrix(theta);
  const OdeRhs f = [&](double, const Eigen::VectorXd& fx) -> Eigen::VectorXd {
    return a * fx + plant.B * u + w;
  };
  double t = t0;
  while (t < t1 - 1e-13) {
    const double h = std::min(max_step, t1 - t);
    x = rk4_step(f, t, x, h);
    t += h;
  }
  return x;
}

}  // namespace lpvsyn
