#pragma once
// All-at-once space-time solver for the parabolic optimal control problem.
// Backward Euler in time for the state; the adjoint system is the literal
// transpose of the space-time state operator, which amounts to a forward Euler
// sweep backwards in time.
//
// Unknowns [y_1..y_Nt; u_1..u_Nt; p_1..p_Nt], block system
//   [ dt Mobs_s^-  0            A_s^T      ] [y]   [ dt Mobs_s^- (y_d(t_i) - R) ]
//   [ 0            alpha dt M   dt B^T     ] [u] = [ 0                          ]
//   [ A_s          dt B_s       0          ] [p]   [ dt f_s                     ]
// where A_s is block lower bidiagonal with diagonal M_s + dt K_s and
// subdiagonal -M_s, and the initial state vector is zero (the lift already
// carries the boundary data at t=0).

#include <chrono>
#include <vector>

#include <Eigen/Dense>

#include "supgrom/assembly.hpp"

namespace supgrom {

struct KktSpaceTime {
  CsrMatrix matrix;
  std::vector<double> rhs;
  int n_free = 0;
  int n_ctrl = 0;
  int n_steps = 0;
};

inline KktSpaceTime assemble_kkt_spacetime(const ProblemOperators& ops,
                                           const std::vector<double>& mu, StabMode stab,
                                           const std::vector<double>* y_d_override = nullptr) {
  check_mu(ops.problem, mu);
  const ProblemDef& p = ops.problem;
  if (!p.time_dependent)
    throw std::invalid_argument("assemble_kkt_spacetime: steady problem definition");
  const int nf = ops.n_free();
  const int nc = ops.n_ctrl();
  const int nt = p.n_time_steps;
  const double dt = p.dt();
  const OperatorFamily& fam = ops.fam(stab);

  CsrMatrix mass_s = fam.time_mass_ff.eval(mu);
  CsrMatrix diag = csr_add(1.0, mass_s, dt, fam.state_ff.eval(mu));
  CsrMatrix diag_t = csr_transpose(diag);
  CsrMatrix mass_s_t = csr_transpose(mass_s);
  CsrMatrix obs = fam.obs_ff.eval(mu);
  CsrMatrix ctrl = fam.control_fs.eval(mu);
  CsrMatrix b_plain_t = csr_transpose(ops.fam(StabMode::None).control_fs.eval(mu));

  const int ny = nf * nt, nu = nc * nt;
  const int u0 = ny, p0 = ny + nu;
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(nt) *
               (obs.nnz() + 2 * diag.nnz() + 2 * mass_s.nnz() + ops.control_mass.nnz() +
                2 * ctrl.nnz()));
  auto put = [&trip](const CsrMatrix& m, int r0, int c0, double scale) {
    for (int r = 0; r < m.n_rows; ++r)
      for (int k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k)
        trip.push_back({r0 + r, c0 + m.col_idx[k], scale * m.values[k]});
  };
  for (int i = 0; i < nt; ++i) {
    put(obs, i * nf, i * nf, dt);
    put(diag_t, i * nf, p0 + i * nf, 1.0);
    if (i + 1 < nt) put(mass_s_t, i * nf, p0 + (i + 1) * nf, -1.0);
    put(ops.control_mass, u0 + i * nc, u0 + i * nc, p.alpha * dt);
    put(b_plain_t, u0 + i * nc, p0 + i * nf, dt);
    put(diag, p0 + i * nf, i * nf, 1.0);
    if (i > 0) put(mass_s, p0 + i * nf, (i - 1) * nf, -1.0);
    put(ctrl, p0 + i * nf, u0 + i * nc, dt);
  }

  KktSpaceTime kkt;
  kkt.n_free = nf;
  kkt.n_ctrl = nc;
  kkt.n_steps = nt;
  kkt.matrix = csr_from_triplets(2 * ny + nu, 2 * ny + nu, std::move(trip));
  kkt.rhs.assign(2 * ny + nu, 0.0);
  std::vector<double> f = fam.forcing_f.eval(mu);
  for (int i = 0; i < nt; ++i) {
    std::vector<double> r_adj = target_rhs(ops, stab, mu, (i + 1) * dt, y_d_override);
    for (int k = 0; k < nf; ++k) kkt.rhs[i * nf + k] = dt * r_adj[k];
    for (int k = 0; k < nf; ++k) kkt.rhs[p0 + i * nf + k] = dt * f[k];
  }
  return kkt;
}

struct SpaceTimeSolution {
  Eigen::MatrixXd y;  // n_free x n_steps, column i is time node t_{i+1}, homogenized
  Eigen::MatrixXd u;  // n_ctrl x n_steps
  Eigen::MatrixXd p;  // n_free x n_steps
  double assemble_seconds = 0.0;
  double solve_seconds = 0.0;
};

// Solves the space-time optimality system. The gradient rows pair the plain
// control mass with the plain coupling block, so they reduce exactly to
// u_i = (zero-extension of p_i) / alpha; the control unknowns are therefore
// eliminated up front and only the coupled (y, p) system of size 2*nf*nt is
// factorized, with the state rows carrying -(dt/alpha)(M+C)_ff p_i in place of
// dt B_s u_i. The eliminated controls are reconstructed afterwards, so the
// returned triple solves the full KKT system to factorization accuracy.
inline SpaceTimeSolution solve_spacetime(const ProblemOperators& ops,
                                         const std::vector<double>& mu, StabMode stab,
                                         const std::vector<double>* y_d_override = nullptr) {
  using clock = std::chrono::steady_clock;
  check_mu(ops.problem, mu);
  const ProblemDef& p = ops.problem;
  if (!p.time_dependent)
    throw std::invalid_argument("solve_spacetime: steady problem definition");
  const auto t0 = clock::now();
  const int nf = ops.n_free();
  const int nc = ops.n_ctrl();
  const int nt = p.n_time_steps;
  const double dt = p.dt();
  const double alpha = p.alpha;
  const OperatorFamily& fam = ops.fam(stab);

  CsrMatrix mass_s = fam.time_mass_ff.eval(mu);
  CsrMatrix diag = csr_add(1.0, mass_s, dt, fam.state_ff.eval(mu));
  CsrMatrix diag_t = csr_transpose(diag);
  CsrMatrix mass_s_t = csr_transpose(mass_s);
  CsrMatrix obs = fam.obs_ff.eval(mu);
  std::vector<int> all_free(nf);
  for (int k = 0; k < nf; ++k) all_free[k] = k;
  CsrMatrix ctrl_ff = csr_submatrix(fam.control_fs.eval(mu), all_free, ops.spaces.free_state);

  const int py = 0, pp = nf * nt;
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(nt) *
               (obs.nnz() + 2 * diag.nnz() + 2 * mass_s.nnz() + ctrl_ff.nnz()));
  auto put = [&trip](const CsrMatrix& m, int r0, int c0, double scale) {
    for (int r = 0; r < m.n_rows; ++r)
      for (int k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k)
        trip.push_back({r0 + r, c0 + m.col_idx[k], scale * m.values[k]});
  };
  for (int i = 0; i < nt; ++i) {
    put(obs, py + i * nf, py + i * nf, dt);
    put(diag_t, py + i * nf, pp + i * nf, 1.0);
    if (i + 1 < nt) put(mass_s_t, py + i * nf, pp + (i + 1) * nf, -1.0);
    put(diag, pp + i * nf, py + i * nf, 1.0);
    if (i > 0) put(mass_s, pp + i * nf, py + (i - 1) * nf, -1.0);
    put(ctrl_ff, pp + i * nf, pp + i * nf, dt / alpha);
  }
  CsrMatrix mat = csr_from_triplets(2 * nf * nt, 2 * nf * nt, std::move(trip));
  std::vector<double> rhs(static_cast<std::size_t>(2) * nf * nt, 0.0);
  std::vector<double> f = fam.forcing_f.eval(mu);
  for (int i = 0; i < nt; ++i) {
    std::vector<double> r_adj = target_rhs(ops, stab, mu, (i + 1) * dt, y_d_override);
    for (int k = 0; k < nf; ++k) rhs[py + i * nf + k] = dt * r_adj[k];
    for (int k = 0; k < nf; ++k) rhs[pp + i * nf + k] = dt * f[k];
  }
  const auto t1 = clock::now();
  std::vector<double> x = sparse_lu_solve(mat, rhs);
  const auto t2 = clock::now();

  SpaceTimeSolution s;
  s.y.resize(nf, nt);
  s.u.setZero(nc, nt);
  s.p.resize(nf, nt);
  for (int i = 0; i < nt; ++i)
    for (int k = 0; k < nf; ++k) {
      s.y(k, i) = x[py + i * nf + k];
      s.p(k, i) = x[pp + i * nf + k];
      s.u(ops.spaces.free_state[k], i) = s.p(k, i) / alpha;
    }
  s.assemble_seconds = std::chrono::duration<double>(t1 - t0).count();
  s.solve_seconds = std::chrono::duration<double>(t2 - t1).count();
  return s;
}

struct SpaceTimeNorms {
  double y = 0.0, u = 0.0, p = 0.0;
};

// dt-weighted space-time norms: H1 in space for state and adjoint, L2 for the
// control, summed over time nodes.
inline SpaceTimeNorms spacetime_norms(const ProblemOperators& ops, const SpaceTimeSolution& s) {
  const double dt = ops.problem.dt();
  SpaceTimeNorms n;
  auto accum = [dt](const CsrMatrix& g, const Eigen::MatrixXd& v) {
    double acc = 0.0;
    std::vector<double> col(v.rows());
    for (Eigen::Index i = 0; i < v.cols(); ++i) {
      for (Eigen::Index k = 0; k < v.rows(); ++k) col[k] = v(k, i);
      acc += dt * csr_bilinear(g, col, col);
    }
    return std::sqrt(acc);
  };
  n.y = accum(ops.state_gram, s.y);
  n.u = accum(ops.control_mass, s.u);
  n.p = accum(ops.state_gram, s.p);
  return n;
}

}  // namespace supgrom
