#pragma once
// One-shot solver for the steady optimal control problem: state, control, and
// adjoint are coupled in a single saddle-point system and solved together.
//
// Unknown ordering [y; u; p], block form
//   [ Mobs_s^-   0        K_s^T ] [y]   [ Mobs_s^- (y_d - R) ]
//   [ 0          alpha M  B^T   ] [u] = [ 0                  ]
//   [ K_s        B_s      0     ] [p]   [ f_s                ]
// with y, p on the free dofs (homogenized by the Dirichlet lift R), u on all
// dofs, B = -M restricted to free rows, B_s = -(M + C). The gradient equation
// is never stabilized, so at the optimum u = p/alpha exactly (with p extended
// by zero to the constrained dofs).

#include <chrono>
#include <vector>

#include "supgrom/assembly.hpp"

namespace supgrom {

struct KktSteady {
  CsrMatrix matrix;
  std::vector<double> rhs;
  int n_free = 0;
  int n_ctrl = 0;
};

inline KktSteady assemble_kkt_steady(const ProblemOperators& ops, const std::vector<double>& mu,
                                     StabMode stab,
                                     const std::vector<double>* y_d_override = nullptr) {
  check_mu(ops.problem, mu);
  const int nf = ops.n_free();
  const int nc = ops.n_ctrl();
  const OperatorFamily& fam = ops.fam(stab);

  CsrMatrix obs = fam.obs_ff.eval(mu);
  CsrMatrix state = fam.state_ff.eval(mu);
  CsrMatrix state_t = csr_transpose(state);
  CsrMatrix ctrl = fam.control_fs.eval(mu);
  // gradient row: plain mass coupling regardless of stabilization
  CsrMatrix b_plain_t = csr_transpose(ops.fam(StabMode::None).control_fs.eval(mu));

  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(obs.nnz() + 2 * state.nnz() + ops.control_mass.nnz() +
                                     2 * ctrl.nnz()));
  auto put = [&t](const CsrMatrix& m, int r0, int c0, double scale = 1.0) {
    for (int r = 0; r < m.n_rows; ++r)
      for (int k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k)
        t.push_back({r0 + r, c0 + m.col_idx[k], scale * m.values[k]});
  };
  put(obs, 0, 0);
  put(state_t, 0, nf + nc);
  put(ops.control_mass, nf, nf, ops.problem.alpha);
  put(b_plain_t, nf, nf + nc);
  put(state, nf + nc, 0);
  put(ctrl, nf + nc, nf);

  KktSteady kkt;
  kkt.n_free = nf;
  kkt.n_ctrl = nc;
  kkt.matrix = csr_from_triplets(2 * nf + nc, 2 * nf + nc, std::move(t));
  kkt.rhs.assign(2 * nf + nc, 0.0);
  std::vector<double> r_adj = target_rhs(ops, stab, mu, 0.0, y_d_override);
  std::vector<double> f = fam.forcing_f.eval(mu);
  for (int i = 0; i < nf; ++i) kkt.rhs[i] = r_adj[i];
  for (int i = 0; i < nf; ++i) kkt.rhs[nf + nc + i] = f[i];
  return kkt;
}

struct SteadySolution {
  std::vector<double> y;  // free dofs, homogenized
  std::vector<double> u;  // all dofs
  std::vector<double> p;  // free dofs
  double assemble_seconds = 0.0;
  double solve_seconds = 0.0;
};

inline SteadySolution solve_steady(const ProblemOperators& ops, const std::vector<double>& mu,
                                   StabMode stab,
                                   const std::vector<double>* y_d_override = nullptr) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  KktSteady kkt = assemble_kkt_steady(ops, mu, stab, y_d_override);
  const auto t1 = clock::now();
  std::vector<double> x = sparse_lu_solve(kkt.matrix, kkt.rhs);
  const auto t2 = clock::now();
  SteadySolution s;
  s.y.assign(x.begin(), x.begin() + kkt.n_free);
  s.u.assign(x.begin() + kkt.n_free, x.begin() + kkt.n_free + kkt.n_ctrl);
  s.p.assign(x.begin() + kkt.n_free + kkt.n_ctrl, x.end());
  s.assemble_seconds = std::chrono::duration<double>(t1 - t0).count();
  s.solve_seconds = std::chrono::duration<double>(t2 - t1).count();
  return s;
}

inline std::vector<double> expand_state(const ProblemOperators& ops,
                                        const std::vector<double>& y_free) {
  std::vector<double> full = ops.spaces.lift;
  for (int i = 0; i < ops.n_free(); ++i) full[ops.spaces.free_state[i]] += y_free[i];
  return full;
}

inline std::vector<double> expand_adjoint(const ProblemOperators& ops,
                                          const std::vector<double>& p_free) {
  std::vector<double> full(ops.mesh.n_vertices(), 0.0);
  for (int i = 0; i < ops.n_free(); ++i) full[ops.spaces.free_adjoint[i]] = p_free[i];
  return full;
}

// J = 1/2 |y - y_d|^2 on the observation region + alpha/2 |u|^2, both with
// plain mass matrices: stabilization changes the optimality system, not the
// objective being reported.
inline double evaluate_objective(const ProblemOperators& ops, const std::vector<double>& y_full,
                                 const std::vector<double>& u, double t = 0.0,
                                 const std::vector<double>* y_d_override = nullptr) {
  std::vector<double> d = y_d_override ? *y_d_override : ops.target_nodal(t);
  for (std::size_t v = 0; v < d.size(); ++v) d[v] = y_full[v] - d[v];
  return 0.5 * csr_bilinear(ops.obs_mass_plain_full, d, d) +
         0.5 * ops.problem.alpha * csr_bilinear(ops.control_mass, u, u);
}

// State equation alone at fixed control: K_s y = f_s + (M + C) u.
inline std::vector<double> solve_state_only(const ProblemOperators& ops,
                                            const std::vector<double>& mu, StabMode stab,
                                            const std::vector<double>& u) {
  const OperatorFamily& fam = ops.fam(stab);
  std::vector<double> rhs = fam.forcing_f.eval(mu);
  std::vector<double> bu = csr_matvec(fam.control_fs.eval(mu), u);
  for (int i = 0; i < ops.n_free(); ++i) rhs[i] -= bu[i];
  return sparse_lu_solve(fam.state_ff.eval(mu), rhs);
}

inline double mean_over_observation(const ProblemOperators& ops,
                                    const std::vector<double>& y_full) {
  std::vector<double> ones(ops.mesh.n_vertices(), 1.0);
  return csr_bilinear(ops.obs_mass_plain_full, ones, y_full) /
         csr_bilinear(ops.obs_mass_plain_full, ones, ones);
}

// Sum of |jumps| between horizontally adjacent grid values; a plain measure of
// spurious oscillation along the transport direction.
inline double total_variation_x0(const Mesh& mesh, const std::vector<double>& field_full) {
  double tv = 0.0;
  for (int iy = 0; iy <= mesh.ny; ++iy)
    for (int ix = 0; ix < mesh.nx; ++ix)
      tv += std::abs(field_full[mesh.vertex_id(ix + 1, iy)] -
                     field_full[mesh.vertex_id(ix, iy)]);
  return tv;
}

}  // namespace supgrom
