#include "lpvsyn/synthesis.hpp"

#include <cmath>

#include "lpvsyn/linalg.hpp"

namespace lpvsyn {
namespace {

// Symmetric matrix decision variable, scalarized as the row-major upper
// triangle. Under unit_trace the last diagonal entry is eliminated through
// trace(P) = 1 rather than carried as an equality constraint.
struct SymVar {
  int start = 0;
  Eigen::Index d = 0;
  bool unit_trace = false;

  int count() const {
    return static_cast<int>(d * (d + 1) / 2) - (unit_trace ? 1 : 0);
  }
  int index(Eigen::Index i, Eigen::Index j) const {
    if (i > j) std::swap(i, j);
    if (unit_trace && i == d - 1 && j == d - 1) return -1;
    return start + static_cast<int>(i * d - i * (i - 1) / 2 + (j - i));
  }
};

struct MatVar {
  int start = 0;
  Eigen::Index rows = 0, cols = 0;

  int count() const { return static_cast<int>(rows * cols); }
  int index(Eigen::Index i, Eigen::Index j) const {
    return start + static_cast<int>(i * cols + j);
  }
};

SymVar add_sym_var(sdp::SdpProblem& pb, Eigen::Index d, bool unit_trace,
                   const std::string& name) {
  SymVar v;
  v.d = d;
  v.unit_trace = unit_trace;
  v.start = pb.num_scalars();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      if (unit_trace && i == d - 1 && j == d - 1) continue;
      pb.add_scalars(1, sdp::ScalarSign::kFree,
                     name + "(" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }
  return v;
}

MatVar add_mat_var(sdp::SdpProblem& pb, Eigen::Index rows, Eigen::Index cols,
                   const std::string& name) {
  MatVar v;
  v.rows = rows;
  v.cols = cols;
  v.start = pb.num_scalars();
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      pb.add_scalars(1, sdp::ScalarSign::kFree,
                     name + "(" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }
  return v;
}

// Accumulates scale * L * P * R^T at block offset (row, col), P symmetric.
void add_sym_term(sdp::SdpProblem& pb, int block, Eigen::Index row, Eigen::Index col,
                  const Eigen::MatrixXd& lfac, const Eigen::MatrixXd& rfac, double scale,
                  const SymVar& v) {
  for (Eigen::Index i = 0; i < v.d; ++i) {
    for (Eigen::Index j = i; j < v.d; ++j) {
      Eigen::MatrixXd contrib = scale * (lfac.col(i) * rfac.col(j).transpose());
      if (i != j) contrib += scale * (lfac.col(j) * rfac.col(i).transpose());
      const int idx = v.index(i, j);
      if (idx >= 0) {
        pb.add_coeff(block, idx, row, col, contrib);
      } else {
        // Eliminated entry: P(d-1,d-1) = 1 - sum of the other diagonals.
        pb.add_constant(block, row, col, contrib);
        for (Eigen::Index q = 0; q + 1 < v.d; ++q) {
          pb.add_coeff(block, v.index(q, q), row, col, Eigen::MatrixXd(-contrib));
        }
      }
    }
  }
}

// Accumulates scale * L * S * R^T at block offset (row, col), S a free matrix.
void add_mat_term(sdp::SdpProblem& pb, int block, Eigen::Index row, Eigen::Index col,
                  const Eigen::MatrixXd& lfac, const Eigen::MatrixXd& rfac, double scale,
                  const MatVar& v) {
  for (Eigen::Index i = 0; i < v.rows; ++i) {
    for (Eigen::Index j = 0; j < v.cols; ++j) {
      pb.add_coeff(block, v.index(i, j), row, col,
                   Eigen::MatrixXd(scale * (lfac.col(i) * rfac.col(j).transpose())));
    }
  }
}

Eigen::MatrixXd sym_from_decision(const Eigen::VectorXd& y, const SymVar& v) {
  Eigen::MatrixXd p(v.d, v.d);
  double trace_rest = 0.0;
  for (Eigen::Index i = 0; i + 1 < v.d; ++i) trace_rest += y[v.index(i, i)];
  for (Eigen::Index i = 0; i < v.d; ++i) {
    for (Eigen::Index j = i; j < v.d; ++j) {
      const int idx = v.index(i, j);
      const double val = idx >= 0 ? y[idx] : 1.0 - trace_rest;
      p(i, j) = val;
      p(j, i) = val;
    }
  }
  return p;
}

Eigen::MatrixXd mat_from_decision(const Eigen::VectorXd& y, const MatVar& v) {
  Eigen::MatrixXd s(v.rows, v.cols);
  for (Eigen::Index i = 0; i < v.rows; ++i) {
    for (Eigen::Index j = 0; j < v.cols; ++j) s(i, j) = y[v.index(i, j)];
  }
  return s;
}

struct Dims {
  Eigen::Index n, m, num_params, num_vertices;
};

Dims check_dims(const ConsistencyQmi& psi, const ParamPolytope& polytope) {
  polytope.validate();
  if (psi.n <= 0 || psi.ln % psi.n != 0) {
    throw std::invalid_argument("assembly: malformed consistency QMI partition");
  }
  const Eigen::Index num_params = psi.ln / psi.n;
  if (polytope.dim() != num_params) {
    throw std::invalid_argument("assembly: polytope dimension does not match the data QMI");
  }
  return {psi.n, psi.m, num_params, polytope.num_vertices()};
}

struct Layout {
  SymVar p;
  std::vector<MatVar> s;
  int alpha_start, beta_start;
  double psi_scale;
  Eigen::MatrixXd psi_hat;
};

Layout common_layout(sdp::SdpProblem& pb, const ConsistencyQmi& psi, const Dims& dims,
                     const SynthesisOptions& options, bool allow_trace_normalize) {
  Layout lay;
  lay.psi_scale = std::max(1.0, psi.mat.cwiseAbs().maxCoeff());
  lay.psi_hat = psi.mat / lay.psi_scale;
  lay.p = add_sym_var(pb, dims.n, allow_trace_normalize && options.trace_normalize, "P");
  if (options.common_gain) {
    const MatVar shared = add_mat_var(pb, dims.m, dims.n, "S");
    lay.s.assign(static_cast<size_t>(dims.num_vertices), shared);
  } else {
    for (Eigen::Index v = 0; v < dims.num_vertices; ++v) {
      lay.s.push_back(add_mat_var(pb, dims.m, dims.n, "S[" + std::to_string(v) + "]"));
    }
  }
  lay.alpha_start = pb.num_scalars();
  for (Eigen::Index v = 0; v < dims.num_vertices; ++v) {
    pb.add_scalars(1, sdp::ScalarSign::kNonNegative, "alpha[" + std::to_string(v) + "]");
  }
  lay.beta_start = pb.num_scalars();
  for (Eigen::Index v = 0; v < dims.num_vertices; ++v) {
    pb.add_scalars(1, sdp::ScalarSign::kStrictPositive, "beta[" + std::to_string(v) + "]");
  }
  return lay;
}

void fill_info(AssemblyInfo& info, const Dims& dims, const Layout& lay) {
  info.n = dims.n;
  info.m = dims.m;
  info.num_params = dims.num_params;
  info.num_vertices = dims.num_vertices;
  info.p_start = lay.p.start;
  info.unit_trace = lay.p.unit_trace;
  for (const auto& s : lay.s) info.s_starts.push_back(s.start);
  info.alpha_start = lay.alpha_start;
  info.beta_start = lay.beta_start;
  info.psi_scale = lay.psi_scale;
}

void add_lyapunov_floor(sdp::SdpProblem& pb, const Layout& lay, const Dims& dims,
                        double floor, AssemblyInfo& info) {
  const int blk = pb.add_block(dims.n, "lyapunov_floor");
  add_sym_term(pb, blk, 0, 0, Eigen::MatrixXd::Identity(dims.n, dims.n),
               Eigen::MatrixXd::Identity(dims.n, dims.n), 1.0, lay.p);
  pb.add_constant(blk, 0, 0, Eigen::MatrixXd(-floor * Eigen::MatrixXd::Identity(dims.n, dims.n)));
  info.p_block_id = blk;
}

// Vertex block for continuous time, optionally with the F F^T corner term.
void add_ct_vertex_blocks(sdp::SdpProblem& pb, const ParamPolytope& polytope,
                          const Dims& dims, const Layout& lay, const Eigen::MatrixXd* fft,
                          AssemblyInfo& info) {
  const Eigen::Index n = dims.n, m = dims.m, nl = dims.num_params;
  const Eigen::Index dim = n * (nl + 1) + m;
  const Eigen::MatrixXd eye_n = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd eye_m = Eigen::MatrixXd::Identity(m, m);
  for (Eigen::Index v = 0; v < dims.num_vertices; ++v) {
    const Eigen::VectorXd& omega = polytope.vertices[static_cast<size_t>(v)];
    const int blk = pb.add_block(dim, "vertex[" + std::to_string(v) + "]");
    pb.add_coeff(blk, lay.alpha_start + static_cast<int>(v), 0, 0,
                 Eigen::MatrixXd(-lay.psi_hat));
    pb.add_coeff(blk, lay.beta_start + static_cast<int>(v), 0, 0, Eigen::MatrixXd(-eye_n));
    if (fft != nullptr) pb.add_constant(blk, 0, 0, Eigen::MatrixXd(-(*fft)));
    for (Eigen::Index l = 0; l < nl; ++l) {
      if (omega[l] != 0.0) {
        add_sym_term(pb, blk, n + l * n, 0, eye_n, eye_n, -omega[l], lay.p);
      }
    }
    add_mat_term(pb, blk, n + nl * n, 0, eye_m, eye_n, -1.0, lay.s[static_cast<size_t>(v)]);
    info.vertex_block_ids.push_back(blk);
  }
}

// Vertex block for discrete time (Schur-completed form), optionally with the
// F F^T corner term.
void add_dt_vertex_blocks(sdp::SdpProblem& pb, const ConsistencyQmi& psi,
                          const ParamPolytope& polytope, const Dims& dims, const Layout& lay,
                          const Eigen::MatrixXd* fft, AssemblyInfo& info) {
  const Eigen::Index n = dims.n, m = dims.m, nl = dims.num_params;
  const Eigen::Index dim = n * (nl + 2) + m;
  const Eigen::Index row_s = n + nl * n;   // gain rows
  const Eigen::Index row_p = row_s + m;    // appended Lyapunov rows
  const Eigen::MatrixXd eye_n = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd eye_m = Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd psi_pad = Eigen::MatrixXd::Zero(dim, dim);
  psi_pad.topLeftCorner(psi.dim(), psi.dim()) = lay.psi_hat;
  for (Eigen::Index v = 0; v < dims.num_vertices; ++v) {
    const Eigen::VectorXd& omega = polytope.vertices[static_cast<size_t>(v)];
    const int blk = pb.add_block(dim, "vertex[" + std::to_string(v) + "]");
    pb.add_coeff(blk, lay.alpha_start + static_cast<int>(v), 0, 0, Eigen::MatrixXd(-psi_pad));
    pb.add_coeff(blk, lay.beta_start + static_cast<int>(v), 0, 0, Eigen::MatrixXd(-eye_n));
    if (fft != nullptr) pb.add_constant(blk, 0, 0, Eigen::MatrixXd(-(*fft)));
    add_sym_term(pb, blk, 0, 0, eye_n, eye_n, 1.0, lay.p);
    add_sym_term(pb, blk, row_p, row_p, eye_n, eye_n, 1.0, lay.p);
    for (Eigen::Index i = 0; i < nl; ++i) {
      for (Eigen::Index j = i; j < nl; ++j) {
        const double w = -omega[i] * omega[j];
        if (w != 0.0) add_sym_term(pb, blk, n + i * n, n + j * n, eye_n, eye_n, w, lay.p);
      }
    }
    for (Eigen::Index j = 0; j < nl; ++j) {
      if (omega[j] != 0.0) {
        add_mat_term(pb, blk, row_s, n + j * n, eye_m, eye_n, -omega[j],
                     lay.s[static_cast<size_t>(v)]);
      }
    }
    add_mat_term(pb, blk, row_s, row_p, eye_m, eye_n, 1.0, lay.s[static_cast<size_t>(v)]);
    info.vertex_block_ids.push_back(blk);
  }
}

}  // namespace

void PerformanceSpec::validate(Eigen::Index n, Eigen::Index m) const {
  if (C.cols() != n || D.cols() != m || C.rows() != D.rows() || F.rows() != n) {
    throw std::invalid_argument("performance spec: dimensions inconsistent with the plant");
  }
}

GainScheduledController StabilizationCertificate::controller() const {
  GainScheduledController c;
  c.gains = K_list;
  c.polytope = polytope;
  c.P = P;
  return c;
}

AssemblyResult assemble_ct_stab(const ConsistencyQmi& psi, const ParamPolytope& polytope,
                                const SynthesisOptions& options) {
  const Dims dims = check_dims(psi, polytope);
  AssemblyResult out;
  const Layout lay = common_layout(out.problem, psi, dims, options, true);
  fill_info(out.info, dims, lay);
  add_ct_vertex_blocks(out.problem, polytope, dims, lay, nullptr, out.info);
  add_lyapunov_floor(out.problem, lay, dims, options.solver.strict_floor, out.info);
  return out;
}

AssemblyResult assemble_dt_stab(const ConsistencyQmi& psi, const ParamPolytope& polytope,
                                const SynthesisOptions& options) {
  const Dims dims = check_dims(psi, polytope);
  AssemblyResult out;
  const Layout lay = common_layout(out.problem, psi, dims, options, true);
  fill_info(out.info, dims, lay);
  add_dt_vertex_blocks(out.problem, psi, polytope, dims, lay, nullptr, out.info);
  add_lyapunov_floor(out.problem, lay, dims, options.solver.strict_floor, out.info);
  return out;
}

AssemblyResult assemble_h2(const ConsistencyQmi& psi, const ParamPolytope& polytope,
                           const PerformanceSpec& perf, TimeDomain domain,
                           const SynthesisOptions& options, bool include_output) {
  const Dims dims = check_dims(psi, polytope);
  perf.validate(dims.n, dims.m);
  const Eigen::MatrixXd fft = symmetrize(Eigen::MatrixXd(perf.F * perf.F.transpose()));

  AssemblyResult out;
  // trace(P) = 1 would change the optimal gamma, so normalization is a
  // stabilization-only option and ignored here.
  const Layout lay = common_layout(out.problem, psi, dims, options, false);
  fill_info(out.info, dims, lay);
  if (domain == TimeDomain::kContinuous) {
    add_ct_vertex_blocks(out.problem, polytope, dims, lay, &fft, out.info);
  } else {
    add_dt_vertex_blocks(out.problem, psi, polytope, dims, lay, &fft, out.info);
  }
  add_lyapunov_floor(out.problem, lay, dims, options.solver.strict_floor, out.info);

  if (include_output) {
    const Eigen::Index r = perf.output_dim();
    out.info.r = r;
    const SymVar zvar = add_sym_var(out.problem, r, false, "Z");
    out.info.z_start = zvar.start;
    const Eigen::MatrixXd eye_r = Eigen::MatrixXd::Identity(r, r);
    const Eigen::MatrixXd eye_n = Eigen::MatrixXd::Identity(dims.n, dims.n);
    for (Eigen::Index v = 0; v < dims.num_vertices; ++v) {
      const int blk = out.problem.add_block(r + dims.n, "output[" + std::to_string(v) + "]");
      add_sym_term(out.problem, blk, 0, 0, eye_r, eye_r, 1.0, zvar);
      add_sym_term(out.problem, blk, 0, r, perf.C, eye_n, 1.0, lay.p);
      add_mat_term(out.problem, blk, 0, r, perf.D, eye_n, 1.0, lay.s[static_cast<size_t>(v)]);
      add_sym_term(out.problem, blk, r, r, eye_n, eye_n, 1.0, lay.p);
      out.problem.add_constant(
          blk, 0, 0,
          Eigen::MatrixXd(-options.solver.strict_floor *
                          Eigen::MatrixXd::Identity(r + dims.n, r + dims.n)));
      out.info.output_block_ids.push_back(blk);
    }
    const int zblk = out.problem.add_block(r, "z_psd");
    add_sym_term(out.problem, zblk, 0, 0, eye_r, eye_r, 1.0, zvar);
    out.info.z_block_id = zblk;
    for (Eigen::Index i = 0; i < r; ++i) {
      out.problem.add_objective_term(zvar.index(i, i), 1.0);
    }
  }
  return out;
}

StabilizationCertificate recover_stabilization(const sdp::SdpSolution& solution,
                                               const AssemblyResult& assembly,
                                               const ParamPolytope& polytope,
                                               TimeDomain domain) {
  if (solution.status != sdp::SolveStatus::kFeasible &&
      solution.status != sdp::SolveStatus::kOptimal) {
    throw SolverFailureError("recover: solution status is " + sdp::to_string(solution.status));
  }
  const AssemblyInfo& info = assembly.info;
  const Eigen::VectorXd& y = solution.decision;

  SymVar pvar;
  pvar.start = info.p_start;
  pvar.d = info.n;
  pvar.unit_trace = info.unit_trace;

  StabilizationCertificate cert;
  cert.domain = domain;
  cert.polytope = polytope;
  cert.P = sym_from_decision(y, pvar);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cert.P);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (lo <= 0.0 || hi / lo > 1e12) {
    throw SolverFailureError("recover: P is numerically singular (condition " +
                             std::to_string(lo > 0.0 ? hi / lo : std::nan("")) + ")");
  }
  const Eigen::LDLT<Eigen::MatrixXd> pfac(cert.P);
  for (Eigen::Index v = 0; v < info.num_vertices; ++v) {
    MatVar svar;
    svar.start = info.s_starts[static_cast<size_t>(v)];
    svar.rows = info.m;
    svar.cols = info.n;
    const Eigen::MatrixXd s = mat_from_decision(y, svar);
    cert.S_list.push_back(s);
    cert.K_list.push_back(pfac.solve(s.transpose()).transpose());
  }
  cert.alpha = y.segment(info.alpha_start, info.num_vertices) / info.psi_scale;
  cert.beta = y.segment(info.beta_start, info.num_vertices);
  for (int blk : info.vertex_block_ids) {
    cert.vertex_residuals.push_back(solution.block_min_eigs[blk]);
  }
  return cert;
}

H2Certificate recover_h2(const sdp::SdpSolution& solution, const AssemblyResult& assembly,
                         const ParamPolytope& polytope, TimeDomain domain) {
  if (assembly.info.z_start < 0) {
    throw std::invalid_argument("recover_h2: assembly has no performance variables");
  }
  H2Certificate cert;
  cert.base = recover_stabilization(solution, assembly, polytope, domain);
  SymVar zvar;
  zvar.start = assembly.info.z_start;
  zvar.d = assembly.info.r;
  cert.Z = sym_from_decision(solution.decision, zvar);
  cert.gamma = std::sqrt(std::max(0.0, cert.Z.trace()));
  return cert;
}

namespace {

void warn_preconditions(const ConsistencyQmi& psi, const SynthesisOptions& options) {
  if (!options.warn) return;
  const SLemmaDiagnostics diag = slemma_preconditions(psi);
  if (!diag.kernel_inclusion) {
    options.warn("multiplier precondition: kernel inclusion fails (residual " +
                 std::to_string(diag.kernel_residual) + ")");
  }
  if (!diag.schur_psd) {
    options.warn("multiplier precondition: generalized Schur complement has min eig " +
                 std::to_string(diag.schur_min_eig));
  }
  if (diag.neg_tail_min_eig < -1e-9) {
    options.warn("multiplier precondition: -Psi22 has negative eigenvalue " +
                 std::to_string(diag.neg_tail_min_eig));
  }
}

[[noreturn]] void raise_for_status(const sdp::SdpSolution& sol) {
  if (sol.status == sdp::SolveStatus::kInfeasible) {
    throw NotInformativeError(
        "data not informative for LPV quadratic stabilization (margin " +
            std::to_string(sol.margin) + ")",
        sol.margin);
  }
  throw SolverFailureError("synthesis solver returned " + sdp::to_string(sol.status) +
                           " after " + std::to_string(sol.iterations) + " iterations");
}

}  // namespace

StabilizationCertificate synthesize_stabilization(const DataRecord& record,
                                                  const NoiseBound& bound,
                                                  const ParamPolytope& polytope,
                                                  const SynthesisOptions& options) {
  const ConsistencyQmi psi = build_consistency_qmi(record, bound);
  warn_preconditions(psi, options);
  const AssemblyResult assembly = record.domain == TimeDomain::kContinuous
                                      ? assemble_ct_stab(psi, polytope, options)
                                      : assemble_dt_stab(psi, polytope, options);
  const sdp::SdpSolution sol = sdp::solve(assembly.problem, options.solver);
  if (sol.status != sdp::SolveStatus::kFeasible) raise_for_status(sol);
  return recover_stabilization(sol, assembly, polytope, record.domain);
}

H2Certificate synthesize_h2(const DataRecord& record, const NoiseBound& bound,
                            const ParamPolytope& polytope, const PerformanceSpec& perf,
                            const SynthesisOptions& options) {
  const ConsistencyQmi psi = build_consistency_qmi(record, bound);
  warn_preconditions(psi, options);

  // Informativity pre-check on the feasibility core (no performance
  // variables); margin maximization classifies cleanly there.
  const AssemblyResult core =
      assemble_h2(psi, polytope, perf, record.domain, options, /*include_output=*/false);
  const sdp::SdpSolution pre = sdp::solve(core.problem, options.solver);
  if (pre.status != sdp::SolveStatus::kFeasible) raise_for_status(pre);

  const AssemblyResult full =
      assemble_h2(psi, polytope, perf, record.domain, options, /*include_output=*/true);
  const sdp::SdpSolution sol = sdp::solve(full.problem, options.solver);
  if (sol.status != sdp::SolveStatus::kOptimal &&
      sol.status != sdp::SolveStatus::kFeasible) {
    raise_for_status(sol);
  }
  return recover_h2(sol, full, polytope, record.domain);
}

}  // namespace lpvsyn
