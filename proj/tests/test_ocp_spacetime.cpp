#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracle_fem.hpp"
#include "supgrom/ocp_spacetime.hpp"
#include "supgrom/ocp_steady.hpp"

using namespace supgrom;

namespace {

// Copy of the parabolic problem with a shortened time grid (dt stays 0.1).
ProblemDef with_steps(ProblemId id, int n_t) {
  ProblemDef p = make_problem(id);
  p.n_time_steps = n_t;
  p.t_final = 0.1 * n_t;
  return p;
}

double rel_linf(const std::vector<double>& a, const Eigen::VectorXd& ref) {
  double num = 0.0, den = 1e-300;
  for (int i = 0; i < ref.size(); ++i) {
    num = std::max(num, std::abs(a[i] - ref(i)));
    den = std::max(den, std::abs(ref(i)));
  }
  return num / den;
}

// Stacks a solution's blocks in the KKT unknown order [y_1..; u_1..; p_1..].
std::vector<double> stack_solution(const SpaceTimeSolution& s) {
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>((2 * s.y.rows() + s.u.rows()) * s.y.cols()));
  for (Eigen::Index i = 0; i < s.y.cols(); ++i)
    for (Eigen::Index k = 0; k < s.y.rows(); ++k) x.push_back(s.y(k, i));
  for (Eigen::Index i = 0; i < s.u.cols(); ++i)
    for (Eigen::Index k = 0; k < s.u.rows(); ++k) x.push_back(s.u(k, i));
  for (Eigen::Index i = 0; i < s.p.cols(); ++i)
    for (Eigen::Index k = 0; k < s.p.rows(); ++k) x.push_back(s.p(k, i));
  return x;
}

}  // namespace

TEST_CASE("space-time kkt has the documented dimensions") {
  ProblemDef p = with_steps(ProblemId::GraetzParabolic, 2);
  Mesh m = build_structured_mesh(Domain::GraetzRect, 2, 5);
  ProblemOperators ops = build_affine_operators(p, m);
  KktSpaceTime kkt = assemble_kkt_spacetime(ops, {1e5}, StabMode::Supg);
  REQUIRE(kkt.n_free == 8);    // interior columns ix=1,2 x iy=1..4, outflow free
  REQUIRE(kkt.n_ctrl == 18);   // every vertex carries a control dof
  REQUIRE(kkt.n_steps == 2);
  REQUIRE(kkt.matrix.n_rows == 2 * 8 * 2 + 18 * 2);  // 68
  REQUIRE(kkt.matrix.n_cols == 68);
  REQUIRE(kkt.rhs.size() == 68);
}

TEST_CASE("space-time assembly rejects steady problem definitions") {
  ProblemDef p = make_problem(ProblemId::GraetzSteady);
  Mesh m = build_structured_mesh(Domain::GraetzRect, 2, 5);
  ProblemOperators ops = build_affine_operators(p, m);
  REQUIRE_THROWS_AS(assemble_kkt_spacetime(ops, {1e5}, StabMode::Supg), std::invalid_argument);
  REQUIRE_THROWS_AS(solve_spacetime(ops, {1e5}, StabMode::Supg), std::invalid_argument);
}

TEST_CASE("space-time kkt couples only adjacent time steps") {
  ProblemDef p = with_steps(ProblemId::GraetzParabolic, 3);
  Mesh m = build_structured_mesh(Domain::GraetzRect, 4, 5);
  ProblemOperators ops = build_affine_operators(p, m);
  KktSpaceTime kkt = assemble_kkt_spacetime(ops, {1e5}, StabMode::Supg);
  const int nf = kkt.n_free, nc = kkt.n_ctrl, nt = kkt.n_steps;
  const int u0 = nf * nt, p0 = nf * nt + nc * nt;

  // Classifies a column: block kind (0=y,1=u,2=p) and time step.
  auto locate = [&](int c) {
    if (c < u0) return std::pair{0, c / nf};
    if (c < p0) return std::pair{1, (c - u0) / nc};
    return std::pair{2, (c - p0) / nf};
  };
  for (int r = 0; r < kkt.matrix.n_rows; ++r) {
    auto [rkind, rstep] = locate(r);
    for (int k = kkt.matrix.row_ptr[r]; k < kkt.matrix.row_ptr[r + 1]; ++k) {
      auto [ckind, cstep] = locate(kkt.matrix.col_idx[k]);
      if (rkind == 0) {  // adjoint equation rows: dt Mobs y_i + (A^T p)_i
        REQUIRE((ckind == 0 || ckind == 2));
        if (ckind == 0) REQUIRE(cstep == rstep);
        if (ckind == 2) REQUIRE((cstep == rstep || cstep == rstep + 1));
      } else if (rkind == 1) {  // gradient rows couple u_i and p_i only
        REQUIRE((ckind == 1 || ckind == 2));
        REQUIRE(cstep == rstep);
      } else {  // state equation rows: (A y)_i + dt B_s u_i
        REQUIRE((ckind == 0 || ckind == 1));
        if (ckind == 0) REQUIRE((cstep == rstep || cstep + 1 == rstep));
        if (ckind == 1) REQUIRE(cstep == rstep);
      }
    }
  }
}

TEST_CASE("space-time solutions match a dense oracle") {
  struct Case {
    ProblemId id;
    int nx, ny;
    std::vector<double> mu;
  };
  for (const Case& c : {Case{ProblemId::GraetzParabolic, 2, 5, {1e5}},
                        Case{ProblemId::SquareParabolic, 4, 4, {5e4, 0.9}}}) {
    ProblemDef p = with_steps(c.id, 2);
    Mesh m = build_structured_mesh(p.domain, c.nx, c.ny);
    ProblemOperators ops = build_affine_operators(p, m);
    for (StabMode stab : {StabMode::None, StabMode::Supg}) {
      oracle::OracleSolution ref =
          oracle::oracle_solve_parabolic(m, p, c.mu, stab == StabMode::Supg, 2, p.t_final);
      // the production path (condensed system)
      SpaceTimeSolution s = solve_spacetime(ops, c.mu, stab);
      std::vector<double> x = stack_solution(s);
      const int ny = ops.n_free() * 2, nu = ops.n_ctrl() * 2;
      REQUIRE(rel_linf({x.begin(), x.begin() + ny}, ref.y) < 1e-10);
      REQUIRE(rel_linf({x.begin() + ny, x.begin() + ny + nu}, ref.u) < 1e-10);
      REQUIRE(rel_linf({x.begin() + ny + nu, x.end()}, ref.p) < 1e-10);
      // the full three-field system solved directly
      KktSpaceTime kkt = assemble_kkt_spacetime(ops, c.mu, stab);
      std::vector<double> xf = sparse_lu_solve(kkt.matrix, kkt.rhs);
      REQUIRE(rel_linf({xf.begin(), xf.begin() + ny}, ref.y) < 1e-10);
      REQUIRE(rel_linf({xf.begin() + ny, xf.begin() + ny + nu}, ref.u) < 1e-10);
      REQUIRE(rel_linf({xf.begin() + ny + nu, xf.end()}, ref.p) < 1e-10);
    }
  }
}

TEST_CASE("a single time step degenerates to one backward-euler kkt") {
  ProblemDef p = with_steps(ProblemId::GraetzParabolic, 1);
  Mesh m = build_structured_mesh(Domain::GraetzRect, 4, 5);
  ProblemOperators ops = build_affine_operators(p, m);
  oracle::OracleSolution ref = oracle::oracle_solve_parabolic(m, p, {3e5}, true, 1, p.t_final);
  SpaceTimeSolution s = solve_spacetime(ops, {3e5}, StabMode::Supg);
  std::vector<double> x = stack_solution(s);
  const int ny = ops.n_free(), nu = ops.n_ctrl();
  REQUIRE(rel_linf({x.begin(), x.begin() + ny}, ref.y) < 1e-10);
  REQUIRE(rel_linf({x.begin() + ny, x.begin() + ny + nu}, ref.u) < 1e-10);
  REQUIRE(rel_linf({x.begin() + ny + nu, x.end()}, ref.p) < 1e-10);
}

TEST_CASE("the condensed solver reproduces the full kkt solve") {
  ProblemDef p = with_steps(ProblemId::GraetzParabolic, 3);
  Mesh m = build_structured_mesh(Domain::GraetzRect, 10, 5);
  ProblemOperators ops = build_affine_operators(p, m);
  SpaceTimeSolution s = solve_spacetime(ops, {2.7e5}, StabMode::Supg);
  KktSpaceTime kkt = assemble_kkt_spacetime(ops, {2.7e5}, StabMode::Supg);
  std::vector<double> xf = sparse_lu_solve(kkt.matrix, kkt.rhs);
  std::vector<double> x = stack_solution(s);
  REQUIRE(x.size() == xf.size());
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale = std::max(scale, std::abs(xf[i]));
    diff = std::max(diff, std::abs(x[i] - xf[i]));
  }
  REQUIRE(diff < 1e-9 * scale);
}

TEST_CASE("the control equals the scaled adjoint in every time step") {
  std::mt19937_64 rng(83);
  ProblemDef p = with_steps(ProblemId::GraetzParabolic, 5);
  Mesh m = build_structured_mesh(Domain::GraetzRect, 10, 5);
  ProblemOperators ops = build_affine_operators(p, m);
  for (int rep = 0; rep < 2; ++rep) {
    auto [lo, hi] = p.parameter_box.range[0];
    std::vector<double> mu{lo + (rng() >> 11) * 0x1.0p-53 * (hi - lo)};
    for (StabMode stab : {StabMode::None, StabMode::Supg}) {
      // solve the full system so the identity is *observed*, not built in
      KktSpaceTime kkt = assemble_kkt_spacetime(ops, mu, stab);
      std::vector<double> x = sparse_lu_solve(kkt.matrix, kkt.rhs);
      const int nf = kkt.n_free, nc = kkt.n_ctrl, nt = kkt.n_steps;
      double num = 0.0, den = 1e-300;
      for (int i = 0; i < nt; ++i) {
        std::vector<double> p_ext(nc, 0.0);
        for (int k = 0; k < nf; ++k)
          p_ext[ops.spaces.free_state[k]] = x[nf * nt + nc * nt + i * nf + k];
        for (int v = 0; v < nc; ++v) {
          double u = x[nf * nt + i * nc + v];
          num += std::pow(u - p_ext[v] / p.alpha, 2);
          den += u * u;
        }
      }
      REQUIRE(std::sqrt(num / den) < 1e-10);
    }
  }
}

TEST_CASE("zero boundary and target data give the zero solution") {
  ProblemDef p = with_steps(ProblemId::GraetzParabolic, 3);
  for (auto& v : p.dirichlet_values)
    if (v) v = 0.0;
  p.y_desired = [](std::array<double, 2>, double) { return 0.0; };
  Mesh m = build_structured_mesh(Domain::GraetzRect, 4, 5);
  ProblemOperators ops = build_affine_operators(p, m);
  SpaceTimeSolution s = solve_spacetime(ops, {1e5}, StabMode::Supg);
  REQUIRE(s.y.cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE(s.u.cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE(s.p.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("a constant nodal override reproduces the built-in target") {
  ProblemDef p = with_steps(ProblemId::GraetzParabolic, 2);
  Mesh m = build_structured_mesh(Domain::GraetzRect, 2, 5);
  ProblemOperators ops = build_affine_operators(p, m);
  std::vector<double> ones(ops.n_ctrl(), 1.0);  // the built-in target is y_d = 1
  SpaceTimeSolution base = solve_spacetime(ops, {1e5}, StabMode::Supg);
  SpaceTimeSolution same = solve_spacetime(ops, {1e5}, StabMode::Supg, &ones);
  REQUIRE((base.y - same.y).cwiseAbs().maxCoeff() == 0.0);
  std::vector<double> twos(ops.n_ctrl(), 2.0);
  SpaceTimeSolution other = solve_spacetime(ops, {1e5}, StabMode::Supg, &twos);
  REQUIRE((base.y - other.y).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("space-time norms follow the quadrature definition") {
  ProblemDef p = with_steps(ProblemId::GraetzParabolic, 2);
  Mesh m = build_structured_mesh(Domain::GraetzRect, 2, 5);
  ProblemOperators ops = build_affine_operators(p, m);
  const int nf = ops.n_free(), nc = ops.n_ctrl();
  SpaceTimeSolution s;
  s.y.setZero(nf, 2);
  s.u.setZero(nc, 2);
  s.p.setZero(nf, 2);

  SECTION("zero fields have zero norms") {
    SpaceTimeNorms n = spacetime_norms(ops, s);
    REQUIRE(n.y == 0.0);
    REQUIRE(n.u == 0.0);
    REQUIRE(n.p == 0.0);
  }
  SECTION("a constant control integrates the plain mass over time") {
    s.u.setConstant(3.0);
    SpaceTimeNorms n = spacetime_norms(ops, s);
    // 1^T M 1 = domain area = 2, two steps of dt = 0.1
    REQUIRE(n.u == Catch::Approx(3.0 * std::sqrt(2 * 0.1 * 2.0)).epsilon(1e-12));
  }
  SECTION("a single occupied block uses the state energy product") {
    std::vector<double> v(nf);
    for (int k = 0; k < nf; ++k) v[k] = std::sin(1.0 + k);
    for (int k = 0; k < nf; ++k) s.y(k, 1) = v[k];
    SpaceTimeNorms n = spacetime_norms(ops, s);
    REQUIRE(n.y ==
            Catch::Approx(std::sqrt(0.1 * csr_bilinear(ops.state_gram, v, v))).epsilon(1e-12));
  }
}

TEST_CASE("the tracked state reaches the target mean by the final time") {
  ProblemDef p = make_problem(ProblemId::GraetzParabolic);  // full 30-step grid
  Mesh m = build_structured_mesh(Domain::GraetzRect, 20, 10);
  ProblemOperators ops = build_affine_operators(p, m);
  SpaceTimeSolution s = solve_spacetime(ops, {3e5}, StabMode::Supg);
  std::vector<double> last(ops.n_free());
  for (int k = 0; k < ops.n_free(); ++k) last[k] = s.y(k, p.n_time_steps - 1);
  double mean = mean_over_observation(ops, expand_state(ops, last));
  REQUIRE(mean > 0.8);
  REQUIRE(mean < 1.2);
}
