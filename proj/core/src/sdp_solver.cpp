#include "lpvsyn/sdp/solver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lpvsyn/linalg.hpp"

namespace lpvsyn::sdp {
namespace {

struct IBlock {
  Eigen::Index dim = 0;
  Eigen::MatrixXd constant;                             // K_j
  std::vector<std::pair<int, Eigen::MatrixXd>> terms;   // (var, symmetric coeff)
};

// Internal cone program: minimize c.y subject to K_j + sum_i y_i C_ij PSD.
struct InternalProblem {
  int nvars = 0;
  Eigen::VectorXd c;
  std::vector<IBlock> blocks;
};

struct IpmResult {
  Eigen::VectorXd y;
  bool converged = false;
  int iterations = 0;
  double pinf = std::numeric_limits<double>::infinity();
  double dinf = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  double pobj = 0.0;
  double dobj = 0.0;
};

// Translates the public problem into the internal form. Sign-constrained
// scalars become 1x1 blocks. When with_margin is set, a trailing variable t
// is appended, every matrix block gains a -t*I term, a [1 - t] cap block is
// added, and the objective becomes "minimize -t".
InternalProblem build_internal(const SdpProblem& problem, const SolverSettings& settings,
                               bool with_margin, bool keep_objective) {
  InternalProblem ip;
  ip.nvars = problem.num_scalars() + (with_margin ? 1 : 0);
  ip.c = Eigen::VectorXd::Zero(ip.nvars);
  if (keep_objective && !problem.is_feasibility()) {
    ip.c.head(problem.num_scalars()) = problem.objective();
  }
  const int t_var = problem.num_scalars();
  if (with_margin) ip.c[t_var] = -1.0;

  for (const auto& b : problem.blocks()) {
    IBlock ib;
    ib.dim = b.dim;
    ib.constant = b.constant;
    ib.terms.reserve(b.coeffs.size() + 1);
    for (const auto& [var, coeff] : b.coeffs) ib.terms.emplace_back(var, coeff);
    if (with_margin && !b.margin_exempt) {
      ib.terms.emplace_back(t_var, Eigen::MatrixXd(-Eigen::MatrixXd::Identity(b.dim, b.dim)));
    }
    ip.blocks.push_back(std::move(ib));
  }
  for (int i = 0; i < problem.num_scalars(); ++i) {
    const ScalarSign sign = problem.scalar_signs()[static_cast<size_t>(i)];
    if (sign == ScalarSign::kFree) continue;
    IBlock ib;
    ib.dim = 1;
    ib.constant = Eigen::MatrixXd::Zero(1, 1);
    if (sign == ScalarSign::kStrictPositive) ib.constant(0, 0) = -settings.strict_floor;
    ib.terms.emplace_back(i, Eigen::MatrixXd::Identity(1, 1));
    ip.blocks.push_back(std::move(ib));
  }
  if (with_margin) {
    IBlock cap;
    cap.dim = 1;
    cap.constant = Eigen::MatrixXd::Identity(1, 1);
    cap.terms.emplace_back(t_var, Eigen::MatrixXd(-Eigen::MatrixXd::Identity(1, 1)));
    ip.blocks.push_back(std::move(cap));
  }
  return ip;
}

double frob_inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a.array() * b.array()).sum();
}

// Largest step alpha with M + alpha*dM staying PSD, given chol(M).
double max_psd_step(const Eigen::LLT<Eigen::MatrixXd>& chol, const Eigen::MatrixXd& dm) {
  // L^-1 dM L^-T via two triangular solves (dM symmetric).
  const Eigen::MatrixXd scaled =
      chol.matrixL().solve(Eigen::MatrixXd(chol.matrixL().solve(dm).transpose()));
  const double lam = min_eigenvalue(symmetrize(scaled));
  if (lam >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lam;
}

// Dense primal-dual path following with Mehrotra predictor-corrector on the
// HKM direction, operating block by block.
IpmResult run_ipm(const InternalProblem& ip, const SolverSettings& settings) {
  const int m = ip.nvars;
  const size_t nb = ip.blocks.size();
  IpmResult res;
  res.y = Eigen::VectorXd::Zero(m);

  double total_dim = 0.0;
  double const_scale = 1.0, coeff_scale = 1.0;
  for (const auto& b : ip.blocks) {
    total_dim += static_cast<double>(b.dim);
    const_scale = std::max(const_scale, b.constant.cwiseAbs().maxCoeff());
    for (const auto& [var, cm] : b.terms) {
      coeff_scale = std::max(coeff_scale, cm.cwiseAbs().maxCoeff());
    }
  }
  const double xi_p = std::max(10.0, 2.0 * const_scale);
  const double xi_d = std::max(10.0, 2.0 * ip.c.cwiseAbs().maxCoeff());

  std::vector<Eigen::MatrixXd> x(nb), yv(nb);
  for (size_t j = 0; j < nb; ++j) {
    x[j] = xi_p * Eigen::MatrixXd::Identity(ip.blocks[j].dim, ip.blocks[j].dim);
    yv[j] = xi_d * Eigen::MatrixXd::Identity(ip.blocks[j].dim, ip.blocks[j].dim);
  }

  std::vector<Eigen::MatrixXd> rp(nb);  // per-iteration work
  Eigen::MatrixXd schur(m, m);
  Eigen::VectorXd rd(m), rhs(m), dy(m), dy_cor(m);
  std::vector<Eigen::MatrixXd> dx(nb), dyv(nb), dx_cor(nb), dyv_cor(nb);
  const double tau = 0.98;

  for (res.iterations = 0; res.iterations < settings.max_iters; ++res.iterations) {
    // Residuals and duality measure.
    double mu = 0.0;
    double pinf = 0.0;
    for (size_t j = 0; j < nb; ++j) {
      const IBlock& b = ip.blocks[j];
      Eigen::MatrixXd v = b.constant;
      for (const auto& [var, cm] : b.terms) v += res.y[var] * cm;
      rp[j] = v - x[j];
      pinf = std::max(pinf, rp[j].cwiseAbs().maxCoeff());
      mu += frob_inner(x[j], yv[j]);
    }
    mu /= total_dim;
    rd = ip.c;
    for (size_t j = 0; j < nb; ++j) {
      for (const auto& [var, cm] : ip.blocks[j].terms) rd[var] -= frob_inner(cm, yv[j]);
    }
    double pobj = ip.c.dot(res.y);
    double dobj = 0.0;
    for (size_t j = 0; j < nb; ++j) dobj -= frob_inner(ip.blocks[j].constant, yv[j]);

    res.pinf = pinf / (1.0 + const_scale);
    res.dinf = rd.cwiseAbs().maxCoeff() / (1.0 + ip.c.cwiseAbs().maxCoeff());
    res.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    res.pobj = pobj;
    res.dobj = dobj;
    if (settings.verbose) {
      std::fprintf(stderr, "  ipm %3d  mu %9.2e  pinf %9.2e  dinf %9.2e  gap %9.2e\n",
                   res.iterations, mu, res.pinf, res.dinf, res.gap);
    }
    if (res.pinf <= settings.feas_tol && res.dinf <= settings.feas_tol &&
        res.gap <= settings.gap_tol) {
      res.converged = true;
      return res;
    }

    // Factor slacks and assemble the Schur complement
    //   B_pq = sum_j tr(C_pj X_j^-1 C_qj Y_j).
    std::vector<Eigen::LLT<Eigen::MatrixXd>> xchol(nb);
    bool chol_ok = true;
    for (size_t j = 0; j < nb; ++j) {
      xchol[j].compute(x[j]);
      if (xchol[j].info() != Eigen::Success) chol_ok = false;
    }
    if (!chol_ok) return res;

    schur.setZero();
    std::vector<std::vector<Eigen::MatrixXd>> xinv_cy(nb);
    for (size_t j = 0; j < nb; ++j) {
      const auto& terms = ip.blocks[j].terms;
      xinv_cy[j].resize(terms.size());
      for (size_t q = 0; q < terms.size(); ++q) {
        xinv_cy[j][q] = xchol[j].solve(terms[q].second) * yv[j];
        for (size_t p = 0; p <= q; ++p) {
          const double val = frob_inner(terms[p].second, xinv_cy[j][q].transpose());
          schur(terms[p].first, terms[q].first) += val;
          if (terms[p].first != terms[q].first) {
            schur(terms[q].first, terms[p].first) += val;
          }
        }
      }
    }
    for (int i = 0; i < m; ++i) {
      if (schur(i, i) == 0.0) schur(i, i) = 1.0;  // variable absent from all blocks
    }
    Eigen::LDLT<Eigen::MatrixXd> bfac(schur);
    if (bfac.info() != Eigen::Success || !bfac.isPositive()) {
      const double bump = 1e-12 * schur.diagonal().cwiseAbs().maxCoeff() + 1e-14;
      bfac.compute(schur + bump * Eigen::MatrixXd::Identity(m, m));
      if (bfac.info() != Eigen::Success) return res;
    }

    auto solve_direction = [&](const std::vector<Eigen::MatrixXd>& rc, Eigen::VectorXd& dy_out,
                               std::vector<Eigen::MatrixXd>& dx_out,
                               std::vector<Eigen::MatrixXd>& dyv_out) {
      rhs = -rd;
      for (size_t j = 0; j < nb; ++j) {
        const Eigen::MatrixXd t = xchol[j].solve(rc[j] - rp[j] * yv[j]);
        for (const auto& [var, cm] : ip.blocks[j].terms) {
          rhs[var] += frob_inner(cm, t.transpose());
        }
      }
      dy_out = bfac.solve(rhs);
      dx_out.resize(nb);
      dyv_out.resize(nb);
      for (size_t j = 0; j < nb; ++j) {
        dx_out[j] = rp[j];
        for (const auto& [var, cm] : ip.blocks[j].terms) dx_out[j] += dy_out[var] * cm;
        dyv_out[j] = symmetrize(xchol[j].solve(rc[j] - dx_out[j] * yv[j]));
      }
    };

    // Predictor (affine scaling).
    std::vector<Eigen::MatrixXd> rc(nb);
    for (size_t j = 0; j < nb; ++j) rc[j] = -x[j] * yv[j];
    solve_direction(rc, dy, dx, dyv);

    double ap = std::numeric_limits<double>::infinity();
    double ad = std::numeric_limits<double>::infinity();
    std::vector<Eigen::LLT<Eigen::MatrixXd>> ychol(nb);
    for (size_t j = 0; j < nb; ++j) {
      ychol[j].compute(yv[j]);
      if (ychol[j].info() != Eigen::Success) return res;
      ap = std::min(ap, max_psd_step(xchol[j], dx[j]));
      ad = std::min(ad, max_psd_step(ychol[j], dyv[j]));
    }
    const double ap_aff = std::min(1.0, ap);
    const double ad_aff = std::min(1.0, ad);

    double mu_aff = 0.0;
    for (size_t j = 0; j < nb; ++j) {
      mu_aff += frob_inner(x[j] + ap_aff * dx[j], yv[j] + ad_aff * dyv[j]);
    }
    mu_aff = std::max(mu_aff / total_dim, 0.0);
    const double sigma = std::min(1.0, std::pow(mu_aff / std::max(mu, 1e-300), 3));

    // Corrector.
    for (size_t j = 0; j < nb; ++j) {
      rc[j] = sigma * mu * Eigen::MatrixXd::Identity(ip.blocks[j].dim, ip.blocks[j].dim) -
              x[j] * yv[j] - dx[j] * dyv[j];
    }
    solve_direction(rc, dy_cor, dx_cor, dyv_cor);

    ap = std::numeric_limits<double>::infinity();
    ad = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < nb; ++j) {
      ap = std::min(ap, max_psd_step(xchol[j], dx_cor[j]));
      ad = std::min(ad, max_psd_step(ychol[j], dyv_cor[j]));
    }
    double alpha_p = std::min(1.0, tau * ap);
    double alpha_d = std::min(1.0, tau * ad);

    // Step, backing off if rounding broke positive definiteness.
    for (int attempt = 0; attempt < 8; ++attempt) {
      bool ok = true;
      for (size_t j = 0; j < nb && ok; ++j) {
        Eigen::LLT<Eigen::MatrixXd> cx(x[j] + alpha_p * dx_cor[j]);
        Eigen::LLT<Eigen::MatrixXd> cy(yv[j] + alpha_d * dyv_cor[j]);
        ok = cx.info() == Eigen::Success && cy.info() == Eigen::Success;
      }
      if (ok) break;
      alpha_p *= 0.7;
      alpha_d *= 0.7;
    }
    res.y += alpha_p * dy_cor;
    for (size_t j = 0; j < nb; ++j) {
      x[j] += alpha_p * dx_cor[j];
      yv[j] += alpha_d * dyv_cor[j];
    }
  }
  return res;
}

SdpSolution finish_solution(const SdpProblem& problem, const SolverSettings& settings,
                            const Eigen::VectorXd& decision, SolveStatus status, int iterations,
                            double margin, double objective) {
  SdpSolution sol;
  sol.status = status;
  sol.decision = decision;
  sol.iterations = iterations;
  sol.margin = margin;
  sol.objective_value = objective;
  const ResidualReport rep = residual_report(problem, decision, settings.strict_floor);
  sol.block_min_eigs = rep.block_min_eigs;
  return sol;
}

}  // namespace

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kFeasible: return "feasible";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kNumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

void SolverSettings::validate() const {
  if (feas_tol <= 0.0 || gap_tol <= 0.0 || strict_floor <= 0.0) {
    throw std::invalid_argument("solver settings: tolerances must be strictly positive");
  }
  if (max_iters < 1) throw std::invalid_argument("solver settings: max_iters must be >= 1");
}

SdpSolution solve(const SdpProblem& problem, const SolverSettings& settings) {
  settings.validate();
  problem.validate();
  const int n = problem.num_scalars();

  if (problem.is_feasibility()) {
    const InternalProblem ip = build_internal(problem, settings, /*with_margin=*/true,
                                              /*keep_objective=*/false);
    const IpmResult r = run_ipm(ip, settings);
    const double margin = r.y[n];
    const Eigen::VectorXd decision = r.y.head(n);
    SolveStatus status = SolveStatus::kNumericalFailure;
    // For an unattained supremum the iterate stalls with small residuals; the
    // margin value is still meaningful for classification.
    const bool classifiable = r.converged || (r.pinf <= 1e2 * settings.feas_tol &&
                                              r.gap <= 1e-4);
    if (classifiable) {
      if (margin >= settings.strict_floor) {
        status = SolveStatus::kFeasible;
      } else if (margin < -settings.feas_tol) {
        status = SolveStatus::kInfeasible;
      }
    }
    return finish_solution(problem, settings, decision, status, r.iterations, margin, 0.0);
  }

  // Minimization: try the objective run directly; fall back to a margin solve
  // for classification only when it does not converge.
  const InternalProblem ip = build_internal(problem, settings, /*with_margin=*/false,
                                            /*keep_objective=*/true);
  const IpmResult r = run_ipm(ip, settings);
  if (r.converged) {
    const ResidualReport rep = residual_report(problem, r.y, settings.strict_floor);
    return finish_solution(problem, settings, r.y, SolveStatus::kOptimal, r.iterations,
                           rep.worst_block_eig, r.pobj);
  }
  if (r.pinf <= settings.feas_tol && r.pobj < -1e10 * (1.0 + problem.objective().norm())) {
    return finish_solution(problem, settings, r.y, SolveStatus::kUnbounded, r.iterations,
                           0.0, r.pobj);
  }
  SdpProblem feas = problem;
  feas.set_objective(Eigen::VectorXd());
  const SdpSolution probe = solve(feas, settings);
  if (probe.status == SolveStatus::kInfeasible) {
    return finish_solution(problem, settings, probe.decision, SolveStatus::kInfeasible,
                           r.iterations + probe.iterations, probe.margin, 0.0);
  }
  return finish_solution(problem, settings, r.y, SolveStatus::kNumericalFailure,
                         r.iterations + probe.iterations, probe.margin, r.pobj);
}

}  // namespace lpvsyn::sdp
