#include "lpvsyn/data.hpp"

#include <cmath>
#include <stdexcept>

#include "lpvsyn/linalg.hpp"

namespace lpvsyn {

void DataRecord::validate() const {
  const Eigen::Index t = X_minus.cols();
  if (t < 1) throw std::invalid_argument("record: needs at least one sample");
  if (U.cols() != t || Theta.cols() != t || X_delta.cols() != t) {
    throw std::invalid_argument("record: all matrices must have the same column count");
  }
  if (X_delta.rows() != X_minus.rows()) {
    throw std::invalid_argument("record: state and delta row counts differ");
  }
}

DataRecord concatenate_records(const DataRecord& a, const DataRecord& b) {
  a.validate();
  b.validate();
  if (a.domain != b.domain || a.num_states() != b.num_states() ||
      a.num_inputs() != b.num_inputs() || a.num_params() != b.num_params()) {
    throw std::invalid_argument("concatenate_records: incompatible records");
  }
  DataRecord out;
  out.domain = a.domain;
  out.X_minus.resize(a.num_states(), a.num_samples() + b.num_samples());
  out.X_minus << a.X_minus, b.X_minus;
  out.U.resize(a.num_inputs(), out.X_minus.cols());
  out.U << a.U, b.U;
  out.Theta.resize(a.num_params(), out.X_minus.cols());
  out.Theta << a.Theta, b.Theta;
  out.X_delta.resize(a.num_states(), out.X_minus.cols());
  out.X_delta << a.X_delta, b.X_delta;
  return out;
}

void NoiseBound::validate() const {
  if (Phi11.rows() != Phi11.cols() || Phi22.rows() != Phi22.cols()) {
    throw std::invalid_argument("noise bound: Phi11/Phi22 must be square");
  }
  if (Phi12.rows() != Phi11.rows() || Phi12.cols() != Phi22.rows()) {
    throw std::invalid_argument("noise bound: Phi12 dimensions");
  }
  if (asymmetry(Phi11) > 1e-10 || asymmetry(Phi22) > 1e-10) {
    throw std::invalid_argument("noise bound: Phi11/Phi22 must be symmetric");
  }
  if (min_eigenvalue(Eigen::MatrixXd(-Phi22)) < -1e-12) {
    throw std::invalid_argument("noise bound: -Phi22 must be PSD");
  }
}

NoiseBound per_sample_noise_bound(double eps, Eigen::Index T, Eigen::Index n) {
  if (eps <= 0.0) throw std::invalid_argument("per_sample_noise_bound: eps must be positive");
  NoiseBound b;
  b.Phi11 = eps * eps * static_cast<double>(T) * Eigen::MatrixXd::Identity(n, n);
  b.Phi12 = Eigen::MatrixXd::Zero(n, T);
  b.Phi22 = -Eigen::MatrixXd::Identity(T, T);
  return b;
}

NoiseBound energy_noise_bound(const Eigen::MatrixXd& q, Eigen::Index T) {
  if (q.rows() != q.cols()) throw std::invalid_argument("energy_noise_bound: Q must be square");
  if (min_eigenvalue(symmetrize(q)) < -1e-12) {
    throw std::invalid_argument("energy_noise_bound: Q must be PSD");
  }
  NoiseBound b;
  b.Phi11 = symmetrize(q);
  b.Phi12 = Eigen::MatrixXd::Zero(q.rows(), T);
  b.Phi22 = -Eigen::MatrixXd::Identity(T, T);
  return b;
}

NoiseBound blockdiag_noise_bound(const NoiseBound& a, const NoiseBound& b) {
  a.validate();
  b.validate();
  if (a.Phi11.rows() != b.Phi11.rows()) {
    throw std::invalid_argument("blockdiag_noise_bound: state dimensions differ");
  }
  const Eigen::Index n = a.Phi11.rows();
  const Eigen::Index ta = a.Phi22.rows(), tb = b.Phi22.rows();
  NoiseBound out;
  out.Phi11 = a.Phi11 + b.Phi11;
  out.Phi12.resize(n, ta + tb);
  out.Phi12 << a.Phi12, b.Phi12;
  out.Phi22 = Eigen::MatrixXd::Zero(ta + tb, ta + tb);
  out.Phi22.topLeftCorner(ta, ta) = a.Phi22;
  out.Phi22.bottomRightCorner(tb, tb) = b.Phi22;
  return out;
}

Eigen::MatrixXd quad_bound_eval(const Eigen::MatrixXd& z, const Eigen::MatrixXd& phi11,
                                const Eigen::MatrixXd& phi12, const Eigen::MatrixXd& phi22) {
  if (z.rows() != phi11.rows() || z.cols() != phi22.rows()) {
    throw std::invalid_argument("quad_bound_eval: partition sizes do not match Z");
  }
  const Eigen::MatrixXd cross = z * phi12.transpose();
  return symmetrize(Eigen::MatrixXd(phi11 + cross + cross.transpose() + z * phi22 * z.transpose()));
}

bool quad_bound_holds(const Eigen::MatrixXd& z, const NoiseBound& bound, bool strict,
                      double tol) {
  const double me = min_eigenvalue(quad_bound_eval(z, bound.Phi11, bound.Phi12, bound.Phi22));
  return strict ? me >= tol : me >= -tol;
}

Eigen::MatrixXd regressor(const DataRecord& record) {
  return khatri_rao_columns(record.X_minus, record.Theta);
}

ConsistencyQmi build_consistency_qmi(const DataRecord& record, const NoiseBound& bound) {
  record.validate();
  bound.validate();
  const Eigen::Index n = record.num_states(), m = record.num_inputs(),
                     l = record.num_params(), t = record.num_samples();
  if (bound.Phi11.rows() != n || bound.Phi22.rows() != t) {
    throw std::invalid_argument("build_consistency_qmi: bound sized for different (n, T)");
  }
  Eigen::MatrixXd stack(n + l * n + m, n + t);
  stack.setZero();
  stack.topLeftCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  stack.topRightCorner(n, t) = record.X_delta;
  stack.block(n, n, l * n, t) = -regressor(record);
  stack.bottomRightCorner(m, t) = -record.U;

  Eigen::MatrixXd phi(n + t, n + t);
  phi.topLeftCorner(n, n) = bound.Phi11;
  phi.topRightCorner(n, t) = bound.Phi12;
  phi.bottomLeftCorner(t, n) = bound.Phi12.transpose();
  phi.bottomRightCorner(t, t) = bound.Phi22;

  ConsistencyQmi psi;
  psi.mat = symmetrize(Eigen::MatrixXd(stack * phi * stack.transpose()));
  psi.n = n;
  psi.ln = l * n;
  psi.m = m;
  return psi;
}

DiscrepancyMatrix discrepancy(const DataRecord& record, const LpvaPlant& plant) {
  record.validate();
  plant.validate();
  if (plant.num_states() != record.num_states() || plant.num_inputs() != record.num_inputs() ||
      plant.num_params() != record.num_params()) {
    throw std::invalid_argument("discrepancy: plant and record dimensions differ");
  }
  DiscrepancyMatrix d;
  d.W = record.X_delta - plant_to_coefficients(plant).leftCols(record.num_params() *
                                                               record.num_states()) *
            regressor(record) -
        plant.B * record.U;
  return d;
}

Eigen::MatrixXd plant_to_coefficients(const LpvaPlant& plant) {
  const Eigen::Index n = plant.num_states(), m = plant.num_inputs(), l = plant.num_params();
  Eigen::MatrixXd z(n, l * n + m);
  for (Eigen::Index k = 0; k < l; ++k) z.block(0, k * n, n, n) = plant.A_terms[static_cast<size_t>(k)];
  z.rightCols(m) = plant.B;
  return z;
}

LpvaPlant coefficients_to_plant(const Eigen::MatrixXd& z, Eigen::Index n, Eigen::Index num_params,
                                Eigen::Index m, TimeDomain domain) {
  if (z.rows() != n || z.cols() != num_params * n + m) {
    throw std::invalid_argument("coefficients_to_plant: shape mismatch");
  }
  LpvaPlant p;
  p.domain = domain;
  for (Eigen::Index k = 0; k < num_params; ++k) p.A_terms.push_back(z.block(0, k * n, n, n));
  p.B = z.rightCols(m);
  return p;
}

namespace {
double membership_margin(const Eigen::MatrixXd& z, const ConsistencyQmi& psi) {
  return min_eigenvalue(quad_bound_eval(z, psi.head_block(), psi.cross_block(),
                                        psi.tail_block()));
}
}  // namespace

bool plant_in_consistency_set(const LpvaPlant& plant, const ConsistencyQmi& psi, double tol) {
  if (plant.num_states() != psi.n || plant.num_params() * plant.num_states() != psi.ln ||
      plant.num_inputs() != psi.m) {
    throw std::invalid_argument("plant_in_consistency_set: partition mismatch");
  }
  return membership_margin(plant_to_coefficients(plant), psi) >= -tol;
}

ConsistencyBall consistency_ball(const ConsistencyQmi& psi) {
  ConsistencyBall ball;
  const Eigen::Index k = psi.ln + psi.m;
  const Eigen::MatrixXd tail = psi.tail_block();
  ball.min_eig_neg_tail = min_eigenvalue(Eigen::MatrixXd(-tail));
  if (ball.min_eig_neg_tail <= 1e-12) return ball;  // unbounded-certificate-unavailable

  const Eigen::MatrixXd cross = psi.cross_block();
  const Eigen::LDLT<Eigen::MatrixXd> tail_fac(tail);
  ball.center = -tail_fac.solve(cross.transpose()).transpose();
  const Eigen::MatrixXd schur = symmetrize(
      Eigen::MatrixXd(psi.head_block() - cross * tail_fac.solve(cross.transpose())));
  ball.squared_radius =
      static_cast<double>(k) * std::max(0.0, max_eigenvalue(schur)) / ball.min_eig_neg_tail;
  ball.bounded = true;
  return ball;
}

LpvaPlant least_squares_plant(const DataRecord& record) {
  record.validate();
  const Eigen::Index n = record.num_states(), m = record.num_inputs(), l = record.num_params();
  Eigen::MatrixXd g(l * n + m, record.num_samples());
  g.topRows(l * n) = regressor(record);
  g.bottomRows(m) = record.U;
  const Eigen::MatrixXd z =
      g.transpose().completeOrthogonalDecomposition().solve(record.X_delta.transpose()).transpose();
  return coefficients_to_plant(z, n, l, m, record.domain);
}

std::vector<LpvaPlant> sample_consistent_plants(const DataRecord& record,
                                                const NoiseBound& bound, int count,
                                                std::uint64_t seed) {
  const ConsistencyQmi psi = build_consistency_qmi(record, bound);
  const Eigen::Index n = psi.n, k = psi.ln + psi.m;
  const ConsistencyBall ball = consistency_ball(psi);

  Eigen::MatrixXd z = plant_to_coefficients(least_squares_plant(record));
  Rng rng(seed);
  if (membership_margin(z, psi) < 0.0) {
    const double scale = ball.bounded ? std::sqrt(ball.squared_radius) : 1.0 + z.norm();
    const Eigen::MatrixXd base = ball.bounded ? ball.center : z;
    bool found = false;
    for (int attempt = 0; attempt < 512 && !found; ++attempt) {
      Eigen::MatrixXd cand = base;
      const Eigen::VectorXd dir = rng.uniform_ball(n * k, scale);
      cand += Eigen::Map<const Eigen::MatrixXd>(dir.data(), n, k);
      if (membership_margin(cand, psi) >= 0.0) {
        z = cand;
        found = true;
      }
    }
    if (!found) {
      throw std::runtime_error(
          "sample_consistent_plants: no interior member found (set appears degenerate)");
    }
  }

  const double step_scale =
      ball.bounded ? std::max(1e-12, std::sqrt(ball.squared_radius)) : 1.0 + z.norm();
  auto member_at = [&](const Eigen::MatrixXd& base, const Eigen::MatrixXd& dir, double t) {
    return membership_margin(base + t * dir, psi) >= 0.0;
  };
  auto chord_end = [&](const Eigen::MatrixXd& base, const Eigen::MatrixXd& dir, double sgn) {
    double lo = 0.0, hi = sgn * step_scale * 1e-3;
    int guard = 0;
    while (member_at(base, dir, hi) && guard++ < 60) {
      lo = hi;
      hi *= 2.0;
      if (std::abs(hi) > 64.0 * step_scale) break;
    }
    if (member_at(base, dir, hi)) return hi;  // chord truncated at walk scale
    for (int it = 0; it < 48; ++it) {
      const double mid = 0.5 * (lo + hi);
      (member_at(base, dir, mid) ? lo : hi) = mid;
    }
    return lo;
  };

  // The walk only ever moves to points whose membership was just verified, so
  // every emitted plant satisfies the membership contract.
  std::vector<LpvaPlant> out;
  out.reserve(static_cast<size_t>(count));
  const int burn_in = 64, thin = 8;
  const int total_steps = burn_in + thin * count;
  for (int step = 0; step < total_steps; ++step) {
    Eigen::VectorXd d = rng.normal_vector(n * k);
    const double dn = d.norm();
    if (dn == 0.0) continue;
    d /= dn;
    const Eigen::MatrixXd dir = Eigen::Map<const Eigen::MatrixXd>(d.data(), n, k);
    const double t_hi = chord_end(z, dir, +1.0);
    const double t_lo = chord_end(z, dir, -1.0);
    if (t_hi > t_lo) {
      for (int draw = 0; draw < 16; ++draw) {
        const double t = rng.uniform(t_lo, t_hi);
        if (member_at(z, dir, t)) {
          z += t * dir;
          break;
        }
      }
    }
    if (step >= burn_in && (step - burn_in + 1) % thin == 0 &&
        static_cast<int>(out.size()) < count) {
      out.push_back(coefficients_to_plant(z, n, record.num_params(), psi.m, record.domain));
    }
  }
  if (static_cast<int>(out.size()) != count) {
    throw std::runtime_error("sample_consistent_plants: sampling failed to produce members");
  }
  return out;
}

SLemmaDiagnostics slemma_preconditions(const ConsistencyQmi& psi, double tol) {
  SLemmaDiagnostics diag;
  const Eigen::MatrixXd tail = psi.tail_block();
  const Eigen::MatrixXd cross = psi.cross_block();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(tail, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cut = (sv.size() ? sv(0) : 0.0) * 1e-10;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cut) ++rank;
  }
  diag.tail_rank = rank;
  if (rank < tail.rows()) {
    const Eigen::MatrixXd null_basis = svd.matrixV().rightCols(tail.rows() - rank);
    diag.kernel_residual = (cross * null_basis).cwiseAbs().maxCoeff();
  }
  const double scale = std::max(1.0, cross.cwiseAbs().maxCoeff());
  diag.kernel_inclusion = diag.kernel_residual <= tol * scale;

  diag.schur_min_eig = min_eigenvalue(schur_complement_lower(psi.mat, psi.n));
  diag.schur_psd = diag.schur_min_eig >= -tol * std::max(1.0, psi.mat.cwiseAbs().maxCoeff());
  diag.neg_tail_min_eig = min_eigenvalue(Eigen::MatrixXd(-tail));
  return diag;
}

SampleSignal uniform_excitation(Eigen::Index m, double amplitude) {
  return [m, amplitude](int, Rng& rng) {
    Eigen::VectorXd u(m);
    for (Eigen::Index i = 0; i < m; ++i) u[i] = rng.uniform(-amplitude, amplitude);
    return u;
  };
}

SampleSignal ball_noise(Eigen::Index n, double eps) {
  return [n, eps](int, Rng& rng) { return rng.uniform_ball(n, eps); };
}

SampleSignal zero_signal(Eigen::Index n) {
  return [n](int, Rng&) { return Eigen::VectorXd::Zero(n); };
}

DataRecord collect_data(const LpvaPlant& plant, const SampleSignal& excitation,
                        const ParamTrajectory& params, const SampleSignal& noise,
                        Eigen::Index T, std::uint64_t seed, const CollectOptions& options) {
  plant.validate();
  if (T < 1) throw std::invalid_argument("collect_data: T must be >= 1");
  const Eigen::Index n = plant.num_states(), m = plant.num_inputs(), l = plant.num_params();
  Rng input_rng = Rng(seed).split(1);
  Rng noise_rng = Rng(seed).split(2);

  DataRecord rec;
  rec.domain = plant.domain;
  rec.X_minus.resize(n, T);
  rec.U.resize(m, T);
  rec.Theta.resize(l, T);
  rec.X_delta.resize(n, T);

  Eigen::VectorXd x = options.x0.size() ? options.x0 : Eigen::VectorXd::Zero(n);
  if (x.size() != n) throw std::invalid_argument("collect_data: x0 dimension");

  for (Eigen::Index t = 0; t < T; ++t) {
    const double now = plant.domain == TimeDomain::kDiscrete
                           ? static_cast<double>(t)
                           : static_cast<double>(t) * options.sample_dt;
    const Eigen::VectorXd theta = params.at(now);
    const Eigen::VectorXd u = excitation ? excitation(static_cast<int>(t), input_rng)
                                         : Eigen::VectorXd::Zero(m);
    const Eigen::VectorXd w = noise ? noise(static_cast<int>(t), noise_rng)
                                    : Eigen::VectorXd::Zero(n);
    rec.X_minus.col(t) = x;
    rec.U.col(t) = u;
    rec.Theta.col(t) = theta;
    rec.X_delta.col(t) = eval_dynamics(plant, theta, x, u, w);

    if (plant.domain == TimeDomain::kDiscrete) {
      x = rec.X_delta.col(t);
    } else {
      // Integrate the held-input noisy dynamics to the next sample instant,
      // honoring parameter switches inside the interval.
      const double t0 = now, t1 = now + options.sample_dt;
      double cur = t0;
      while (cur < t1 - 1e-13) {
        const Eigen::VectorXd th = params.at(cur);
        double seg_end = t1;
        for (double sw : params.switch_times) {
          if (sw > cur + 1e-13 && sw < seg_end) {
            seg_end = sw;
            break;
          }
        }
        x = rk4_span(plant, th, u, w, x, cur, seg_end, options.rk_step);
        cur = seg_end;
      }
    }
    if (!x.allFinite() || x.norm() > 1e9) {
      throw std::runtime_error("collect_data: trajectory diverged; reduce horizon or gains");
    }
  }
  return rec;
}

}  // namespace lpvsyn
