#pragma once
// Partitioned POD-Galerkin reduction of the optimal control systems.
//
// Offline: draw a training set, solve the stabilized high-fidelity system at
// every sample, compress each variable separately (proper orthogonal
// decomposition in its natural inner product: H1 for state and adjoint, L2
// for the control; dt-weighted space-time sums of these when the problem is
// parabolic), aggregate state and adjoint modes into a shared trial space, and
// project every affine operator term of both the stabilized and the plain
// catalog onto the bases.
//
// Online: evaluate the parameter factors, sum the projected terms at a chosen
// truncation N, and solve the dense 5N x 5N reduced optimality system
// (state 2N + control N + adjoint 2N). "Online-offline" assembles from the
// stabilized projected family, "only-offline" from the plain one; both use
// bases built from stabilized snapshots.
//
// For parabolic problems every snapshot carries the whole time trajectory, so
// basis vectors are space-time vectors and the reduced system stays 5N x 5N
// for the entire horizon.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "supgrom/io.hpp"
#include "supgrom/ocp_spacetime.hpp"
#include "supgrom/ocp_steady.hpp"

namespace supgrom {

// ---------------------------------------------------------------------------
// Training sets
// ---------------------------------------------------------------------------

struct TrainingSet {
  ParameterBox box;
  std::uint64_t rng_seed = 0;
  std::vector<std::vector<double>> samples;
};

// Uniform i.i.d. samples from the box. The generator sequence and the 53-bit
// mantissa mapping are both pinned by the standard, so a seed reproduces the
// set bit for bit on any platform.
inline TrainingSet draw_training_set(const ParameterBox& box, int n_train, std::uint64_t seed) {
  if (box.dim() == 0) throw std::invalid_argument("draw_training_set: empty parameter box");
  for (auto [lo, hi] : box.range)
    if (!(lo <= hi)) throw std::invalid_argument("draw_training_set: inverted parameter range");
  if (n_train < 1) throw std::invalid_argument("draw_training_set: need at least one sample");
  TrainingSet ts;
  ts.box = box;
  ts.rng_seed = seed;
  std::mt19937_64 rng(seed);
  ts.samples.reserve(n_train);
  for (int s = 0; s < n_train; ++s) {
    std::vector<double> mu;
    mu.reserve(box.dim());
    for (auto [lo, hi] : box.range) mu.push_back(lo + (rng() >> 11) * 0x1.0p-53 * (hi - lo));
    ts.samples.push_back(std::move(mu));
  }
  return ts;
}

// ---------------------------------------------------------------------------
// Inner products over stacked time blocks
// ---------------------------------------------------------------------------

// A spatial Gram matrix applied blockwise over n_blocks stacked time blocks
// with a common weight (dt for parabolic trajectories, 1 for steady fields).
struct GramSpec {
  const CsrMatrix* gram = nullptr;
  int n_blocks = 1;
  double weight = 1.0;
};

// (weight * blockdiag(G)) v for every column of v.
inline Eigen::MatrixXd gram_apply(const GramSpec& g, const Eigen::MatrixXd& v) {
  const CsrMatrix& a = *g.gram;
  if (v.rows() != static_cast<Eigen::Index>(a.n_rows) * g.n_blocks)
    throw std::invalid_argument("gram_apply: row count does not match blocks");
  Eigen::MatrixXd out(v.rows(), v.cols());
  for (int b = 0; b < g.n_blocks; ++b)
    out.middleRows(static_cast<Eigen::Index>(b) * a.n_rows, a.n_rows).noalias() =
        g.weight * (as_eigen(a) * v.middleRows(static_cast<Eigen::Index>(b) * a.n_rows, a.n_rows));
  return out;
}

inline double gram_dot(const GramSpec& g, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  return x.dot(gram_apply(g, y).col(0));
}

inline double gram_norm(const GramSpec& g, const Eigen::VectorXd& x) {
  return std::sqrt(std::max(gram_dot(g, x, x), 0.0));
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

struct SnapshotSet {
  Eigen::MatrixXd y, u, p;  // one column per training sample, homogenized
                            // coordinates; parabolic columns stack the N_t
                            // time blocks
  CsrMatrix gram_state;     // spatial H1 product shared by state and adjoint
  CsrMatrix gram_control;   // spatial L2 product for the control
  int n_blocks = 1;
  double block_weight = 1.0;
  double hf_seconds = 0.0;             // total assemble+solve time over the set
  std::vector<double> sample_seconds;  // per-sample assemble+solve time

  GramSpec state_spec() const { return {&gram_state, n_blocks, block_weight}; }
  GramSpec control_spec() const { return {&gram_control, n_blocks, block_weight}; }
};

// One high-fidelity solve per training sample. A failed solve aborts the
// collection and reports which sample broke.
inline SnapshotSet collect_snapshots(const ProblemOperators& ops, const TrainingSet& ts,
                                     StabMode stab = StabMode::Supg) {
  if (ts.samples.empty()) throw std::invalid_argument("collect_snapshots: empty training set");
  SnapshotSet set;
  set.gram_state = ops.state_gram;
  set.gram_control = ops.control_mass;
  const int nf = ops.n_free(), nc = ops.n_ctrl();
  const int n_train = static_cast<int>(ts.samples.size());
  const bool parabolic = ops.problem.time_dependent;
  const int nt = parabolic ? ops.problem.n_time_steps : 1;
  set.n_blocks = nt;
  set.block_weight = parabolic ? ops.problem.dt() : 1.0;
  set.y.resize(static_cast<Eigen::Index>(nf) * nt, n_train);
  set.u.resize(static_cast<Eigen::Index>(nc) * nt, n_train);
  set.p.resize(static_cast<Eigen::Index>(nf) * nt, n_train);
  for (int s = 0; s < n_train; ++s) {
    try {
      if (parabolic) {
        SpaceTimeSolution sol = solve_spacetime(ops, ts.samples[s], stab);
        set.y.col(s) = Eigen::Map<const Eigen::VectorXd>(sol.y.data(), sol.y.size());
        set.u.col(s) = Eigen::Map<const Eigen::VectorXd>(sol.u.data(), sol.u.size());
        set.p.col(s) = Eigen::Map<const Eigen::VectorXd>(sol.p.data(), sol.p.size());
        set.sample_seconds.push_back(sol.assemble_seconds + sol.solve_seconds);
        set.hf_seconds += sol.assemble_seconds + sol.solve_seconds;
      } else {
        SteadySolution sol = solve_steady(ops, ts.samples[s], stab);
        set.y.col(s) = Eigen::Map<const Eigen::VectorXd>(sol.y.data(), nf);
        set.u.col(s) = Eigen::Map<const Eigen::VectorXd>(sol.u.data(), nc);
        set.p.col(s) = Eigen::Map<const Eigen::VectorXd>(sol.p.data(), nf);
        set.sample_seconds.push_back(sol.assemble_seconds + sol.solve_seconds);
        set.hf_seconds += sol.assemble_seconds + sol.solve_seconds;
      }
    } catch (const SolverError& e) {
      std::string mu_text;
      for (double v : ts.samples[s]) mu_text += (mu_text.empty() ? "" : ", ") + fmt_g17(v);
      throw SolverError("snapshot " + std::to_string(s) + " at mu = [" + mu_text +
                        "] failed: " + e.what());
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// Proper orthogonal decomposition, one variable at a time
// ---------------------------------------------------------------------------

// Eigenpairs below this fraction of the leading eigenvalue are treated as
// numerical noise: the mode formula divides by sqrt(lambda), and the
// orthonormalization of near-null directions is meaningless.
inline constexpr double kPodEigenvalueFloor = 1e-14;

// C_ij = (1/N_train) s_i^T G s_j, symmetrized against roundoff.
inline DenseSymMatrix correlation_matrix(const Eigen::MatrixXd& snaps, const GramSpec& g) {
  if (snaps.cols() < 1) throw std::invalid_argument("correlation_matrix: no snapshots");
  Eigen::MatrixXd c = snaps.transpose() * gram_apply(g, snaps) / double(snaps.cols());
  c = 0.5 * (c + c.transpose()).eval();
  DenseSymMatrix out(static_cast<int>(c.rows()));
  for (int j = 0; j < out.n; ++j)
    for (int i = 0; i < out.n; ++i) out.at(i, j) = c(i, j);
  return out;
}

struct PodBasis {
  Eigen::MatrixXd modes;            // G-orthonormal columns, full coordinates
  std::vector<double> eigenvalues;  // all correlation eigenvalues, descending,
                                    // clamped at zero
  int n_kept = 0;
  bool truncated = false;  // the request exceeded the numerical rank
};

// Two-pass modified Gram-Schmidt in the G inner product. Leading-column spans
// are preserved, which is what makes basis truncation meaningful later.
inline void gram_schmidt(Eigen::MatrixXd& v, const GramSpec& g) {
  Eigen::MatrixXd gv(v.rows(), v.cols());  // G * finished columns, cached
  for (Eigen::Index k = 0; k < v.cols(); ++k) {
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index j = 0; j < k; ++j) v.col(k) -= gv.col(j).dot(v.col(k)) * v.col(j);
    const double nrm = gram_norm(g, v.col(k));
    if (!(nrm > 0.0))
      throw SolverError("gram_schmidt: column " + std::to_string(k) + " is exactly dependent");
    v.col(k) /= nrm;
    gv.col(k) = gram_apply(g, v.col(k));
  }
}

// Modes from the correlation eigenpairs: eta_n = S e_n / sqrt(N_train
// lambda_n), which is exactly G-orthonormal when C = (1/N_train) S^T G S;
// a Gram-Schmidt pass then removes the roundoff the division amplifies for
// small eigenvalues.
inline PodBasis pod_basis(const DenseSymMatrix& c, const Eigen::MatrixXd& snaps,
                          const GramSpec& g, int n) {
  if (n < 1) throw std::invalid_argument("pod_basis: need at least one mode");
  if (c.n != snaps.cols())
    throw std::invalid_argument("pod_basis: correlation size does not match snapshot count");
  SymEig eig = sym_eigh(c);
  PodBasis b;
  b.eigenvalues.resize(eig.eigenvalues.size());
  for (std::size_t i = 0; i < b.eigenvalues.size(); ++i)
    b.eigenvalues[i] = std::max(eig.eigenvalues[i], 0.0);
  if (!(b.eigenvalues[0] > 0.0)) throw SolverError("pod_basis: all snapshots are zero");
  int rank = 0;
  while (rank < c.n && b.eigenvalues[rank] > kPodEigenvalueFloor * b.eigenvalues[0]) ++rank;
  b.n_kept = std::min(n, rank);
  b.truncated = b.n_kept < n;
  b.modes.resize(snaps.rows(), b.n_kept);
  const double n_train = double(snaps.cols());
  for (int k = 0; k < b.n_kept; ++k)
    b.modes.col(k) = snaps * eig.vectors.col(k) / std::sqrt(n_train * b.eigenvalues[k]);
  gram_schmidt(b.modes, g);
  return b;
}

// ---------------------------------------------------------------------------
// Aggregated bases
// ---------------------------------------------------------------------------

struct ReducedBasis {
  PodBasis y, u, p;
  // Aggregated trial space for state and adjoint: columns interleave the mode
  // pairs [y_1, p_1, y_2, p_2, ...] before re-orthonormalization, so the
  // leading 2N columns always span {y-modes <= N} + {p-modes <= N}.
  Eigen::MatrixXd z;
  int n_max = 0;  // common truncation bound over the three variables
};

inline ReducedBasis build_reduced_basis(const SnapshotSet& snaps, int n_max) {
  ReducedBasis b;
  b.y = pod_basis(correlation_matrix(snaps.y, snaps.state_spec()), snaps.y, snaps.state_spec(),
                  n_max);
  b.u = pod_basis(correlation_matrix(snaps.u, snaps.control_spec()), snaps.u,
                  snaps.control_spec(), n_max);
  b.p = pod_basis(correlation_matrix(snaps.p, snaps.state_spec()), snaps.p, snaps.state_spec(),
                  n_max);
  b.n_max = std::min({b.y.n_kept, b.u.n_kept, b.p.n_kept});
  b.z.resize(snaps.y.rows(), 2 * b.n_max);
  for (int k = 0; k < b.n_max; ++k) {
    b.z.col(2 * k) = b.y.modes.col(k);
    b.z.col(2 * k + 1) = b.p.modes.col(k);
  }
  gram_schmidt(b.z, snaps.state_spec());
  return b;
}

struct TruncationReport {
  // Index 0 = state, 1 = control, 2 = adjoint.
  std::array<std::string, 3> variable{{"state", "control", "adjoint"}};
  std::array<std::vector<double>, 3> eigenvalues;
  // tails[v][n] = sum of eigenvalues from index n on; the squared projection
  // error of the N-mode basis equals tails[v][N].
  std::array<std::vector<double>, 3> tails;
};

inline TruncationReport truncation_report(const ReducedBasis& b) {
  TruncationReport r;
  const PodBasis* vars[3] = {&b.y, &b.u, &b.p};
  for (int v = 0; v < 3; ++v) {
    r.eigenvalues[v] = vars[v]->eigenvalues;
    const std::size_t n = r.eigenvalues[v].size();
    r.tails[v].assign(n + 1, 0.0);
    for (std::size_t k = n; k-- > 0;)
      r.tails[v][k] = r.tails[v][k + 1] + r.eigenvalues[v][k];
  }
  return r;
}

// ---------------------------------------------------------------------------
// Reduced model: projected affine terms for every KKT block
// ---------------------------------------------------------------------------

// One affine list of projected matrices (or vectors) per KKT block.
struct ProjectedFamily {
  std::vector<ThetaKind> state_theta;  // Z^T A(mu) Z and its transpose
  std::vector<Eigen::MatrixXd> state_mat;
  std::vector<ThetaKind> obs_theta;  // observation block, dt factor included
  std::vector<Eigen::MatrixXd> obs_mat;
  std::vector<ThetaKind> ctrl_theta;  // Z^T B_s(mu) U, dt factor included
  std::vector<Eigen::MatrixXd> ctrl_mat;
  std::vector<ThetaKind> adj_rhs_theta;
  std::vector<Eigen::VectorXd> adj_rhs;
  std::vector<ThetaKind> st_rhs_theta;
  std::vector<Eigen::VectorXd> st_rhs;
};

struct ReducedModel {
  ProblemDef problem;
  int mesh_nx = 0, mesh_ny = 0;
  int n_max = 0;
  ProjectedFamily family[2];       // indexed like OperatorFamily, by StabMode
  Eigen::MatrixXd a22;             // alpha (dt) U^T M U; parameter independent
  Eigen::MatrixXd a23;             // (dt) U^T B^T Z; parameter independent
  Eigen::MatrixXd z;               // aggregated basis for expansion
  Eigen::MatrixXd u_basis;         // control basis for expansion

  const ProjectedFamily& fam(RomMode m) const {
    return family[static_cast<int>(m == RomMode::OnlineOffline ? StabMode::Supg
                                                               : StabMode::None)];
  }
};

namespace detail {

// sum_i L_i^T A R_{i-shift} over time blocks: shift 0 walks the block
// diagonal, shift 1 the first subdiagonal. Block heights follow the matrix.
inline Eigen::MatrixXd project_blocks(const CsrMatrix& a, const Eigen::MatrixXd& l,
                                      const Eigen::MatrixXd& r, int n_blocks, int shift) {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(l.cols(), r.cols());
  for (int i = shift; i < n_blocks; ++i)
    acc.noalias() +=
        l.middleRows(static_cast<Eigen::Index>(i) * a.n_rows, a.n_rows).transpose() *
        (as_eigen(a) * r.middleRows(static_cast<Eigen::Index>(i - shift) * a.n_cols, a.n_cols));
  return acc;
}

// Adds m into the affine list, coalescing terms that share a parameter factor.
template <typename Mat, typename Expr>
inline void add_projected(std::vector<ThetaKind>& thetas, std::vector<Mat>& mats,
                          ThetaKind theta, const Expr& m) {
  for (std::size_t q = 0; q < thetas.size(); ++q)
    if (thetas[q] == theta) {
      mats[q] += m;
      return;
    }
  thetas.push_back(theta);
  mats.push_back(Mat(m));
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

}  // namespace detail

// Projects every affine term of both stabilization families onto the bases.
// The gradient-row blocks (a22, a23) pair the plain control mass with the
// plain coupling block in both families, so they are parameter independent
// and stored once.
inline ReducedModel build_reduced_model(const ProblemOperators& ops, const ReducedBasis& basis) {
  ReducedModel m;
  m.problem = ops.problem;
  m.mesh_nx = ops.mesh.nx;
  m.mesh_ny = ops.mesh.ny;
  m.n_max = basis.n_max;
  m.z = basis.z;
  m.u_basis = basis.u.modes.leftCols(basis.n_max);
  const bool parabolic = ops.problem.time_dependent;
  const int nt = parabolic ? ops.problem.n_time_steps : 1;
  const double dt = parabolic ? ops.problem.dt() : 1.0;
  const int nf = ops.n_free();

  for (StabMode stab : {StabMode::None, StabMode::Supg}) {
    const OperatorFamily& src = ops.fam(stab);
    ProjectedFamily& dst = m.family[static_cast<int>(stab)];
    for (const AffineTerm& t : src.state_ff.terms)
      detail::add_projected(dst.state_theta, dst.state_mat, t.theta,
                            (parabolic ? dt : 1.0) *
                                detail::project_blocks(t.mat, m.z, m.z, nt, 0));
    if (parabolic)
      for (const AffineTerm& t : src.time_mass_ff.terms)
        detail::add_projected(dst.state_theta, dst.state_mat, t.theta,
                              detail::project_blocks(t.mat, m.z, m.z, nt, 0) -
                                  detail::project_blocks(t.mat, m.z, m.z, nt, 1));
    for (const AffineTerm& t : src.obs_ff.terms)
      detail::add_projected(dst.obs_theta, dst.obs_mat, t.theta,
                            dt * detail::project_blocks(t.mat, m.z, m.z, nt, 0));
    for (const AffineTerm& t : src.control_fs.terms)
      detail::add_projected(dst.ctrl_theta, dst.ctrl_mat, t.theta,
                            dt * detail::project_blocks(t.mat, m.z, m.u_basis, nt, 0));
    // right-hand sides: adjoint rows track the target at each time node,
    // state rows carry the (time-independent) lift forcing
    for (int i = 0; i < nt; ++i) {
      const double t_node = parabolic ? (i + 1) * ops.problem.dt() : 0.0;
      for (const AffineVectorTerm& t : target_rhs_terms(ops, stab, t_node).terms)
        detail::add_projected(
            dst.adj_rhs_theta, dst.adj_rhs, t.theta,
            Eigen::VectorXd(dt *
                            m.z.middleRows(static_cast<Eigen::Index>(i) * nf, nf).transpose() *
                            detail::to_eigen(t.vec)));
      for (const AffineVectorTerm& t : src.forcing_f.terms)
        detail::add_projected(
            dst.st_rhs_theta, dst.st_rhs, t.theta,
            Eigen::VectorXd(dt *
                            m.z.middleRows(static_cast<Eigen::Index>(i) * nf, nf).transpose() *
                            detail::to_eigen(t.vec)));
    }
  }

  // Gradient-row blocks from the plain catalog; these must be parameter
  // independent for the stored form to be exact.
  const OperatorFamily& plain = ops.fam(StabMode::None);
  for (const AffineTerm& t : plain.control_fs.terms)
    if (t.theta != ThetaKind::One)
      throw std::logic_error("build_reduced_model: plain coupling block depends on mu");
  m.a22 = ops.problem.alpha * dt *
          detail::project_blocks(ops.control_mass, m.u_basis, m.u_basis, nt, 0);
  m.a23 = Eigen::MatrixXd::Zero(m.n_max, 2 * m.n_max);
  for (const AffineTerm& t : plain.control_fs.terms)
    m.a23 += dt * detail::project_blocks(csr_transpose(t.mat), m.u_basis, m.z, nt, 0);
  return m;
}

// ---------------------------------------------------------------------------
// Online solves
// ---------------------------------------------------------------------------

struct ReducedSystem {
  Eigen::MatrixXd matrix;  // 5N x 5N, unknowns [y(2N); u(N); p(2N)]
  Eigen::VectorXd rhs;
};

// Sums the projected affine terms at mu, truncated to the leading basis
// columns. Leading sub-blocks of the stored projections are exactly the
// projections onto the leading basis columns, so truncation is free.
inline ReducedSystem assemble_reduced(const ReducedModel& m, const std::vector<double>& mu,
                                      int n, RomMode mode) {
  check_mu(m.problem, mu);
  if (n < 1) throw std::invalid_argument("assemble_reduced: basis truncation must be >= 1");
  if (n > m.n_max)
    throw std::invalid_argument("assemble_reduced: truncation " + std::to_string(n) +
                                " exceeds the stored basis size " + std::to_string(m.n_max));
  const ProjectedFamily& f = m.fam(mode);
  const int n2 = 2 * n, dim = 5 * n;
  Eigen::MatrixXd state_mu = Eigen::MatrixXd::Zero(n2, n2);
  for (std::size_t q = 0; q < f.state_theta.size(); ++q)
    state_mu += eval_theta(f.state_theta[q], mu) * f.state_mat[q].topLeftCorner(n2, n2);
  ReducedSystem sys;
  sys.matrix = Eigen::MatrixXd::Zero(dim, dim);
  sys.rhs = Eigen::VectorXd::Zero(dim);
  for (std::size_t q = 0; q < f.obs_theta.size(); ++q)
    sys.matrix.topLeftCorner(n2, n2) +=
        eval_theta(f.obs_theta[q], mu) * f.obs_mat[q].topLeftCorner(n2, n2);
  sys.matrix.block(0, 3 * n, n2, n2) = state_mu.transpose();
  sys.matrix.block(n2, n2, n, n) = m.a22.topLeftCorner(n, n);
  sys.matrix.block(n2, 3 * n, n, n2) = m.a23.topLeftCorner(n, n2);
  sys.matrix.block(3 * n, 0, n2, n2) = state_mu;
  for (std::size_t q = 0; q < f.ctrl_theta.size(); ++q)
    sys.matrix.block(3 * n, n2, n2, n) +=
        eval_theta(f.ctrl_theta[q], mu) * f.ctrl_mat[q].topLeftCorner(n2, n);
  for (std::size_t q = 0; q < f.adj_rhs_theta.size(); ++q)
    sys.rhs.head(n2) += eval_theta(f.adj_rhs_theta[q], mu) * f.adj_rhs[q].head(n2);
  for (std::size_t q = 0; q < f.st_rhs_theta.size(); ++q)
    sys.rhs.segment(3 * n, n2) += eval_theta(f.st_rhs_theta[q], mu) * f.st_rhs[q].head(n2);
  return sys;
}

struct ReducedSolution {
  Eigen::VectorXd y_coef, u_coef, p_coef;  // reduced coordinates (2N, N, 2N)
  Eigen::MatrixXd y, u, p;  // expansions, one column per time node, homogenized
  double online_seconds = 0.0;  // factor-evaluation + summation + solve
};

inline ReducedSolution solve_reduced(const ReducedModel& m, const std::vector<double>& mu,
                                     int n, RomMode mode) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  ReducedSystem sys = assemble_reduced(m, mu, n, mode);
  Eigen::VectorXd x = sys.matrix.partialPivLu().solve(sys.rhs);
  const auto t1 = clock::now();
  const double scale = std::max(sys.rhs.norm(), 1e-300);
  if (!x.allFinite() || (sys.matrix * x - sys.rhs).norm() > 1e-2 * scale) {
    std::string mu_text;
    for (double v : mu) mu_text += (mu_text.empty() ? "" : ", ") + fmt_g17(v);
    throw SolverError("reduced system is singular at mu = [" + mu_text +
                      "], N = " + std::to_string(n) + ", mode = " + rom_mode_name(mode));
  }
  ReducedSolution s;
  s.online_seconds = std::chrono::duration<double>(t1 - t0).count();
  const int n2 = 2 * n;
  s.y_coef = x.head(n2);
  s.u_coef = x.segment(n2, n);
  s.p_coef = x.tail(n2);
  const int nt = m.problem.time_dependent ? m.problem.n_time_steps : 1;
  Eigen::VectorXd y_full = m.z.leftCols(n2) * s.y_coef;
  Eigen::VectorXd u_full = m.u_basis.leftCols(n) * s.u_coef;
  Eigen::VectorXd p_full = m.z.leftCols(n2) * s.p_coef;
  s.y = Eigen::Map<const Eigen::MatrixXd>(y_full.data(), y_full.size() / nt, nt);
  s.u = Eigen::Map<const Eigen::MatrixXd>(u_full.data(), u_full.size() / nt, nt);
  s.p = Eigen::Map<const Eigen::MatrixXd>(p_full.data(), p_full.size() / nt, nt);
  return s;
}

// ---------------------------------------------------------------------------
// Offline artifact persistence
// ---------------------------------------------------------------------------
// Layout: <dir>/manifest.json describes the run (problem, mesh, training
// draw, truncation, parameter factors per block) and every matrix lives in
// its own ROMXMAT1 file, so the online phase can run in a separate process.

namespace detail {

inline const char* stab_dir_name(StabMode s) {
  return s == StabMode::Supg ? "stabilized" : "plain";
}

inline nlohmann::json save_affine_block(const std::filesystem::path& dir,
                                        const std::string& prefix,
                                        const std::vector<ThetaKind>& thetas,
                                        const std::vector<Eigen::MatrixXd>& mats) {
  nlohmann::json factors = nlohmann::json::array();
  for (std::size_t q = 0; q < thetas.size(); ++q) {
    write_mat(dir / (prefix + "_" + std::to_string(q) + ".mat"), mats[q]);
    factors.push_back(theta_name(thetas[q]));
  }
  return factors;
}

inline nlohmann::json save_affine_block(const std::filesystem::path& dir,
                                        const std::string& prefix,
                                        const std::vector<ThetaKind>& thetas,
                                        const std::vector<Eigen::VectorXd>& vecs) {
  nlohmann::json factors = nlohmann::json::array();
  for (std::size_t q = 0; q < thetas.size(); ++q) {
    write_mat(dir / (prefix + "_" + std::to_string(q) + ".mat"), vecs[q]);
    factors.push_back(theta_name(thetas[q]));
  }
  return factors;
}

inline void load_affine_block(const std::filesystem::path& dir, const std::string& prefix,
                              const nlohmann::json& factors, std::vector<ThetaKind>& thetas,
                              std::vector<Eigen::MatrixXd>& mats) {
  for (std::size_t q = 0; q < factors.size(); ++q) {
    thetas.push_back(theta_from_name(factors[q].get<std::string>()));
    mats.push_back(read_mat(dir / (prefix + "_" + std::to_string(q) + ".mat")));
  }
}

inline void load_affine_block(const std::filesystem::path& dir, const std::string& prefix,
                              const nlohmann::json& factors, std::vector<ThetaKind>& thetas,
                              std::vector<Eigen::VectorXd>& vecs) {
  for (std::size_t q = 0; q < factors.size(); ++q) {
    thetas.push_back(theta_from_name(factors[q].get<std::string>()));
    Eigen::MatrixXd m = read_mat(dir / (prefix + "_" + std::to_string(q) + ".mat"));
    if (m.cols() != 1) throw std::runtime_error("offline artifact " + prefix + " is not a vector");
    vecs.push_back(m.col(0));
  }
}

}  // namespace detail

inline void save_offline(const std::filesystem::path& dir, const ReducedModel& m,
                         const ReducedBasis& basis, int n_train, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["format"] = "supgrom-offline-1";
  j["problem"] = problem_name(m.problem.id);
  j["mesh_nx"] = m.mesh_nx;
  j["mesh_ny"] = m.mesh_ny;
  j["alpha"] = m.problem.alpha;
  j["stab_delta"] = m.problem.delta_rule.delta;
  j["parameter_box"] = nlohmann::json::array();
  for (auto [lo, hi] : m.problem.parameter_box.range)
    j["parameter_box"].push_back({lo, hi});
  j["time_dependent"] = m.problem.time_dependent;
  j["t_final"] = m.problem.t_final;
  j["n_time_steps"] = m.problem.n_time_steps;
  j["n_train"] = n_train;
  j["train_seed"] = seed;
  j["n_max"] = m.n_max;
  j["modes"] = {rom_mode_name(RomMode::OnlyOffline), rom_mode_name(RomMode::OnlineOffline)};
  TruncationReport rep = truncation_report(basis);
  for (int v = 0; v < 3; ++v) j["eigenvalues"][rep.variable[v]] = rep.eigenvalues[v];
  write_mat(dir / "z.mat", m.z);
  write_mat(dir / "u_basis.mat", m.u_basis);
  write_mat(dir / "a22.mat", m.a22);
  write_mat(dir / "a23.mat", m.a23);
  for (StabMode stab : {StabMode::None, StabMode::Supg}) {
    const ProjectedFamily& f = m.family[static_cast<int>(stab)];
    std::filesystem::path sub = dir / detail::stab_dir_name(stab);
    std::filesystem::create_directories(sub);
    nlohmann::json& jf = j["families"][detail::stab_dir_name(stab)];
    jf["state"] = detail::save_affine_block(sub, "state", f.state_theta, f.state_mat);
    jf["obs"] = detail::save_affine_block(sub, "obs", f.obs_theta, f.obs_mat);
    jf["ctrl"] = detail::save_affine_block(sub, "ctrl", f.ctrl_theta, f.ctrl_mat);
    jf["adj_rhs"] = detail::save_affine_block(sub, "adj_rhs", f.adj_rhs_theta, f.adj_rhs);
    jf["st_rhs"] = detail::save_affine_block(sub, "st_rhs", f.st_rhs_theta, f.st_rhs);
  }
  write_text_file(dir / "manifest.json", j.dump(2) + "\n");
}

struct OfflineArtifacts {
  ReducedModel model;
  // Per-variable eigenvalue spectra in the manifest order state/control/adjoint.
  std::array<std::vector<double>, 3> eigenvalues;
  int n_train = 0;
  std::uint64_t train_seed = 0;
};

inline OfflineArtifacts load_offline(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw std::runtime_error("load_offline: cannot open " + (dir / "manifest.json").string());
  nlohmann::json j = nlohmann::json::parse(is);
  if (j.value("format", "") != std::string("supgrom-offline-1"))
    throw std::runtime_error("load_offline: unrecognized manifest format");
  OfflineArtifacts out;
  ReducedModel& m = out.model;
  m.problem = make_problem(problem_from_name(j.at("problem").get<std::string>()));
  m.problem.alpha = j.at("alpha").get<double>();
  m.problem.delta_rule.delta = j.at("stab_delta").get<double>();
  m.problem.parameter_box.range.clear();
  for (const auto& pair : j.at("parameter_box"))
    m.problem.parameter_box.range.push_back({pair.at(0).get<double>(), pair.at(1).get<double>()});
  m.problem.time_dependent = j.at("time_dependent").get<bool>();
  m.problem.t_final = j.at("t_final").get<double>();
  m.problem.n_time_steps = j.at("n_time_steps").get<int>();
  m.mesh_nx = j.at("mesh_nx").get<int>();
  m.mesh_ny = j.at("mesh_ny").get<int>();
  m.n_max = j.at("n_max").get<int>();
  out.n_train = j.at("n_train").get<int>();
  out.train_seed = j.at("train_seed").get<std::uint64_t>();
  const char* var_names[3] = {"state", "control", "adjoint"};
  for (int v = 0; v < 3; ++v)
    out.eigenvalues[v] = j.at("eigenvalues").at(var_names[v]).get<std::vector<double>>();
  m.z = read_mat(dir / "z.mat");
  m.u_basis = read_mat(dir / "u_basis.mat");
  m.a22 = read_mat(dir / "a22.mat");
  m.a23 = read_mat(dir / "a23.mat");
  for (StabMode stab : {StabMode::None, StabMode::Supg}) {
    ProjectedFamily& f = m.family[static_cast<int>(stab)];
    std::filesystem::path sub = dir / detail::stab_dir_name(stab);
    const nlohmann::json& jf = j.at("families").at(detail::stab_dir_name(stab));
    detail::load_affine_block(sub, "state", jf.at("state"), f.state_theta, f.state_mat);
    detail::load_affine_block(sub, "obs", jf.at("obs"), f.obs_theta, f.obs_mat);
    detail::load_affine_block(sub, "ctrl", jf.at("ctrl"), f.ctrl_theta, f.ctrl_mat);
    detail::load_affine_block(sub, "adj_rhs", jf.at("adj_rhs"), f.adj_rhs_theta, f.adj_rhs);
    detail::load_affine_block(sub, "st_rhs", jf.at("st_rhs"), f.st_rhs_theta, f.st_rhs);
  }
  return out;
}

}  // namespace supgrom
