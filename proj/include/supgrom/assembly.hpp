#pragma once
// P1 finite element assembly on the structured meshes, with SUPG streamline
// stabilization, Dirichlet lifting, and the affine-in-parameter operator
// catalogs the reduced models are built from.
//
// Quadrature: the mass and stiffness matrices use exact P1 formulas; every
// variable-coefficient integral uses the 3-point edge-midpoint rule (exact up
// to quadratic integrands). Where the advection field vanishes at a quadrature
// point the SUPG integrand (which carries a 1/|b| weight) is taken as zero.
//
// SUPG terms on an element K with parameter delta_K (row index = test
// function):
//   advection: delta_K h_K  int_K (b.grad phi_j)(b.grad phi_i)/|b|
//   mass:      delta_K h_K  int_K phi_j (b.grad phi_i)/|b|
// The stabilized state operator is a_s = eps K + A(b) + S(b); mass-type blocks
// become M + sign*C with sign +1 in the state equation and -1 in the adjoint
// (observation) blocks.

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "supgrom/linalg.hpp"
#include "supgrom/mesh.hpp"
#include "supgrom/problem.hpp"

namespace supgrom {

using VecField = std::function<std::array<double, 2>(std::array<double, 2>)>;

inline constexpr double kSupgFieldTol = 1e-14;  // |b| below this: SUPG integrand is zero

namespace detail {

struct ElementGeom {
  std::array<int, 3> v;
  double area;
  double h;
  std::array<std::array<double, 2>, 3> grad;  // constant P1 gradients
  std::array<std::array<double, 2>, 3> mid;   // edge midpoints 01, 12, 20
};

inline ElementGeom element_geom(const Mesh& mesh, int e) {
  ElementGeom g;
  g.v = mesh.triangles[e];
  const auto &a = mesh.vertices[g.v[0]], &b = mesh.vertices[g.v[1]], &c = mesh.vertices[g.v[2]];
  g.area = mesh.area(e);
  g.h = mesh.h[e];
  const double d = 2.0 * g.area;
  g.grad[0] = {(b[1] - c[1]) / d, (c[0] - b[0]) / d};
  g.grad[1] = {(c[1] - a[1]) / d, (a[0] - c[0]) / d};
  g.grad[2] = {(a[1] - b[1]) / d, (b[0] - a[0]) / d};
  g.mid[0] = {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
  g.mid[1] = {0.5 * (b[0] + c[0]), 0.5 * (b[1] + c[1])};
  g.mid[2] = {0.5 * (c[0] + a[0]), 0.5 * (c[1] + a[1])};
  return g;
}

// P1 basis value at edge midpoint q (0.5 on the two incident vertices)
inline double phi_mid(int i, int q) { return (i == q || i == (q + 1) % 3) ? 0.5 : 0.0; }

inline bool skip(const ObservationMask* mask, int e) { return mask && !mask->element[e]; }

}  // namespace detail

inline CsrMatrix assemble_mass(const Mesh& mesh, const ObservationMask* mask = nullptr) {
  std::vector<Triplet> t;
  t.reserve(9u * mesh.n_triangles());
  for (int e = 0; e < mesh.n_triangles(); ++e) {
    if (detail::skip(mask, e)) continue;
    const auto& tri = mesh.triangles[e];
    const double a12 = mesh.area(e) / 12.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t.push_back({tri[i], tri[j], a12 * (i == j ? 2.0 : 1.0)});
  }
  return csr_from_triplets(mesh.n_vertices(), mesh.n_vertices(), std::move(t));
}

inline CsrMatrix assemble_stiffness(const Mesh& mesh) {
  std::vector<Triplet> t;
  t.reserve(9u * mesh.n_triangles());
  for (int e = 0; e < mesh.n_triangles(); ++e) {
    const auto g = detail::element_geom(mesh, e);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        t.push_back({g.v[i], g.v[j],
                     g.area * (g.grad[i][0] * g.grad[j][0] + g.grad[i][1] * g.grad[j][1])});
  }
  return csr_from_triplets(mesh.n_vertices(), mesh.n_vertices(), std::move(t));
}

inline CsrMatrix assemble_advection(const Mesh& mesh, const VecField& b) {
  std::vector<Triplet> t;
  t.reserve(9u * mesh.n_triangles());
  for (int e = 0; e < mesh.n_triangles(); ++e) {
    const auto g = detail::element_geom(mesh, e);
    const double w = g.area / 3.0;
    for (int q = 0; q < 3; ++q) {
      const auto bq = b(g.mid[q]);
      for (int j = 0; j < 3; ++j) {
        const double conv = bq[0] * g.grad[j][0] + bq[1] * g.grad[j][1];
        for (int i = 0; i < 3; ++i)
          t.push_back({g.v[i], g.v[j], w * conv * detail::phi_mid(i, q)});
      }
    }
  }
  return csr_from_triplets(mesh.n_vertices(), mesh.n_vertices(), std::move(t));
}

inline CsrMatrix assemble_supg_advection(const Mesh& mesh, const VecField& b,
                                         const std::vector<double>& delta) {
  std::vector<Triplet> t;
  t.reserve(9u * mesh.n_triangles());
  for (int e = 0; e < mesh.n_triangles(); ++e) {
    if (delta[e] == 0.0) continue;
    const auto g = detail::element_geom(mesh, e);
    const double w = delta[e] * g.h * g.area / 3.0;
    for (int q = 0; q < 3; ++q) {
      const auto bq = b(g.mid[q]);
      const double bn = std::hypot(bq[0], bq[1]);
      if (bn <= kSupgFieldTol) continue;
      for (int j = 0; j < 3; ++j) {
        const double cj = (bq[0] * g.grad[j][0] + bq[1] * g.grad[j][1]) / bn;
        for (int i = 0; i < 3; ++i) {
          const double ci = bq[0] * g.grad[i][0] + bq[1] * g.grad[i][1];
          t.push_back({g.v[i], g.v[j], w * cj * ci});
        }
      }
    }
  }
  return csr_from_triplets(mesh.n_vertices(), mesh.n_vertices(), std::move(t));
}

inline CsrMatrix assemble_supg_mass(const Mesh& mesh, const VecField& b,
                                    const std::vector<double>& delta,
                                    const ObservationMask* mask = nullptr) {
  std::vector<Triplet> t;
  t.reserve(9u * mesh.n_triangles());
  for (int e = 0; e < mesh.n_triangles(); ++e) {
    if (detail::skip(mask, e) || delta[e] == 0.0) continue;
    const auto g = detail::element_geom(mesh, e);
    const double w = delta[e] * g.h * g.area / 3.0;
    for (int q = 0; q < 3; ++q) {
      const auto bq = b(g.mid[q]);
      const double bn = std::hypot(bq[0], bq[1]);
      if (bn <= kSupgFieldTol) continue;
      for (int i = 0; i < 3; ++i) {
        const double ci = (bq[0] * g.grad[i][0] + bq[1] * g.grad[i][1]) / bn;
        for (int j = 0; j < 3; ++j)
          t.push_back({g.v[i], g.v[j], w * detail::phi_mid(j, q) * ci});
      }
    }
  }
  return csr_from_triplets(mesh.n_vertices(), mesh.n_vertices(), std::move(t));
}

// Directional SUPG factors for the unit-advection affine split (|b| = 1):
// pair(a,b)_ij = delta_K h_K int_K d_a phi_j d_b phi_i
inline CsrMatrix assemble_supg_pair(const Mesh& mesh, int dir_trial, int dir_test,
                                    const std::vector<double>& delta) {
  std::vector<Triplet> t;
  t.reserve(9u * mesh.n_triangles());
  for (int e = 0; e < mesh.n_triangles(); ++e) {
    if (delta[e] == 0.0) continue;
    const auto g = detail::element_geom(mesh, e);
    const double w = delta[e] * g.h * g.area;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        t.push_back({g.v[i], g.v[j], w * g.grad[j][dir_trial] * g.grad[i][dir_test]});
  }
  return csr_from_triplets(mesh.n_vertices(), mesh.n_vertices(), std::move(t));
}

// axis(a)_ij = delta_K h_K int_K phi_j d_a phi_i
inline CsrMatrix assemble_supg_mass_axis(const Mesh& mesh, int dir, const std::vector<double>& delta,
                                         const ObservationMask* mask = nullptr) {
  std::vector<Triplet> t;
  t.reserve(9u * mesh.n_triangles());
  for (int e = 0; e < mesh.n_triangles(); ++e) {
    if (detail::skip(mask, e) || delta[e] == 0.0) continue;
    const auto g = detail::element_geom(mesh, e);
    const double w = delta[e] * g.h * g.area / 3.0;
    for (int q = 0; q < 3; ++q)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          t.push_back({g.v[i], g.v[j], w * detail::phi_mid(j, q) * g.grad[i][dir]});
  }
  return csr_from_triplets(mesh.n_vertices(), mesh.n_vertices(), std::move(t));
}

inline std::vector<double> compute_delta(const Mesh& mesh, const DeltaRule& rule, double eps,
                                         const VecField& b) {
  std::vector<double> d(mesh.n_triangles());
  if (rule.kind == DeltaRule::Kind::Constant) {
    std::fill(d.begin(), d.end(), rule.delta);
    return d;
  }
  for (int e = 0; e < mesh.n_triangles(); ++e) {
    const auto c = mesh.centroid(e);
    const auto bc = b(c);
    const double pe = local_peclet(std::hypot(bc[0], bc[1]), mesh.h[e], eps);
    d[e] = pe <= 1.0 ? rule.delta1 * mesh.h[e] / eps : rule.delta2;
  }
  return d;
}

// Dirichlet elimination data. The lift carries the boundary values (nodal
// interpolation, zero at free vertices); where two Dirichlet segments meet
// with different data the value 0 wins. The adjoint is constrained, with
// homogeneous data, on exactly the state's Dirichlet portion.
struct LiftedSpaces {
  std::vector<int> free_state;
  std::vector<int> free_adjoint;
  std::vector<int> state_map;    // full -> free index, -1 where constrained
  std::vector<int> adjoint_map;
  std::vector<double> lift;      // full length

  int n_free() const { return static_cast<int>(free_state.size()); }
};

inline LiftedSpaces build_lifted_spaces(const Mesh& mesh, const ProblemDef& p) {
  LiftedSpaces s;
  const int n = mesh.n_vertices();
  s.state_map.assign(n, -1);
  s.adjoint_map.assign(n, -1);
  s.lift.assign(n, 0.0);
  for (int v = 0; v < n; ++v) {
    std::optional<double> val;
    for (int tag : mesh.boundary_tags[v]) {
      if (tag < 1 || tag > static_cast<int>(p.dirichlet_values.size()))
        throw std::invalid_argument("build_lifted_spaces: mesh tag " + std::to_string(tag) +
                                    " has no boundary data");
      const auto& dv = p.dirichlet_values[tag - 1];
      if (dv) val = val ? std::min(*val, *dv) : *dv;
    }
    if (val) {
      s.lift[v] = *val;
    } else {
      s.state_map[v] = static_cast<int>(s.free_state.size());
      s.free_state.push_back(v);
      s.adjoint_map[v] = static_cast<int>(s.free_adjoint.size());
      s.free_adjoint.push_back(v);
    }
  }
  return s;
}

struct AffineTerm {
  ThetaKind theta;
  CsrMatrix mat;
};

struct AffineOperator {
  std::vector<AffineTerm> terms;

  CsrMatrix eval(const std::vector<double>& mu) const {
    if (terms.empty()) throw std::logic_error("AffineOperator::eval: no terms");
    CsrMatrix acc = csr_scale(eval_theta(terms[0].theta, mu), terms[0].mat);
    for (std::size_t q = 1; q < terms.size(); ++q)
      acc = csr_add(1.0, acc, eval_theta(terms[q].theta, mu), terms[q].mat);
    return acc;
  }
};

struct AffineVectorTerm {
  ThetaKind theta;
  std::vector<double> vec;
};

struct AffineVector {
  std::vector<AffineVectorTerm> terms;

  std::vector<double> eval(const std::vector<double>& mu) const {
    if (terms.empty()) throw std::logic_error("AffineVector::eval: no terms");
    std::vector<double> acc(terms[0].vec.size(), 0.0);
    for (const auto& t : terms) {
      const double th = eval_theta(t.theta, mu);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += th * t.vec[i];
    }
    return acc;
  }
};

namespace detail {

inline void add_term(std::vector<AffineTerm>& list, ThetaKind th, CsrMatrix m) {
  for (auto& t : list)
    if (t.theta == th) {
      t.mat = csr_add(1.0, t.mat, 1.0, m);
      return;
    }
  list.push_back({th, std::move(m)});
}

inline std::vector<double> restrict_to(const std::vector<double>& full,
                                       const std::vector<int>& idx) {
  std::vector<double> r(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) r[i] = full[idx[i]];
  return r;
}

}  // namespace detail

// One stabilization family (plain Galerkin or SUPG) of the operator catalog.
// All matrices are parameter-independent; thetas carry the mu dependence.
struct OperatorFamily {
  AffineOperator state_ff;      // stabilized state operator, free x free
  AffineOperator obs_full;      // observation mass, sign -1 correction, full n x n
  AffineOperator obs_ff;        // the same restricted to free rows/cols
  AffineOperator time_mass_ff;  // time-derivative mass, sign +1 correction, free x free
  AffineOperator control_fs;    // control-to-state block -(M + C), free x n_ctrl
  AffineVector forcing_f;       // -(state operator applied to the lift), free
};

struct ProblemOperators {
  ProblemDef problem;
  Mesh mesh;
  ObservationMask mask;
  LiftedSpaces spaces;
  OperatorFamily family[2];       // indexed by StabMode
  CsrMatrix control_mass;         // plain mass, all dofs (gradient row, control Gram)
  CsrMatrix state_gram;           // (M + K) on free dofs (H1 inner product)
  CsrMatrix obs_mass_plain_full;  // plain masked mass (objective evaluation)

  int n_free() const { return spaces.n_free(); }
  int n_ctrl() const { return mesh.n_vertices(); }
  const OperatorFamily& fam(StabMode s) const { return family[static_cast<int>(s)]; }

  std::vector<double> target_nodal(double t) const {
    std::vector<double> d(mesh.vertices.size());
    for (std::size_t v = 0; v < d.size(); ++v) d[v] = problem.y_desired(mesh.vertices[v], t);
    return d;
  }
};

inline ProblemOperators build_affine_operators(const ProblemDef& p, const Mesh& mesh) {
  if (p.delta_rule.kind != DeltaRule::Kind::Constant)
    throw std::invalid_argument(
        "build_affine_operators: the Peclet-switch delta rule is not affine in mu when the "
        "diffusion depends on mu; use a constant delta");
  ProblemOperators ops;
  ops.problem = p;
  ops.mesh = mesh;
  ops.mask = observation_mask(mesh);
  ops.spaces = build_lifted_spaces(mesh, p);
  const auto& free = ops.spaces.free_state;
  std::vector<int> all(mesh.n_vertices());
  for (int v = 0; v < mesh.n_vertices(); ++v) all[v] = v;

  const CsrMatrix mass = assemble_mass(mesh);
  const CsrMatrix stiff = assemble_stiffness(mesh);
  const CsrMatrix mass_obs = assemble_mass(mesh, &ops.mask);
  const std::vector<double> delta = compute_delta(mesh, p.delta_rule, 0.0, nullptr);

  ops.control_mass = mass;
  ops.state_gram = csr_submatrix(csr_add(1.0, mass, 1.0, stiff), free, free);
  ops.obs_mass_plain_full = mass_obs;

  struct RawTerm {
    ThetaKind theta;
    CsrMatrix full;  // full n x n before elimination
  };
  std::vector<RawTerm> state_terms, obs_corr_terms, mass_corr_terms;  // corrections exclude M itself

  if (p.domain == Domain::GraetzRect) {
    VecField b = [&p](std::array<double, 2> x) { return p.advection_field(x, {0.0}); };
    state_terms.push_back({ThetaKind::InvMu1, stiff});
    CsrMatrix adv = assemble_advection(mesh, b);
    CsrMatrix supg = assemble_supg_advection(mesh, b, delta);
    state_terms.push_back({ThetaKind::One, adv});  // plain part; SUPG added per family below
    mass_corr_terms.push_back({ThetaKind::One, assemble_supg_mass(mesh, b, delta)});
    obs_corr_terms.push_back({ThetaKind::One, assemble_supg_mass(mesh, b, delta, &ops.mask)});
    // stash the SUPG advection as an extra term marked by reuse below
    state_terms.push_back({ThetaKind::One, supg});
  } else {
    state_terms.push_back({ThetaKind::InvMu1, stiff});
    VecField ex = [](std::array<double, 2>) { return std::array<double, 2>{1.0, 0.0}; };
    VecField ey = [](std::array<double, 2>) { return std::array<double, 2>{0.0, 1.0}; };
    state_terms.push_back({ThetaKind::CosMu2, assemble_advection(mesh, ex)});
    state_terms.push_back({ThetaKind::SinMu2, assemble_advection(mesh, ey)});
    state_terms.push_back({ThetaKind::CosCosMu2, assemble_supg_pair(mesh, 0, 0, delta)});
    state_terms.push_back(
        {ThetaKind::SinCosMu2, csr_add(1.0, assemble_supg_pair(mesh, 0, 1, delta), 1.0,
                                       assemble_supg_pair(mesh, 1, 0, delta))});
    state_terms.push_back({ThetaKind::SinSinMu2, assemble_supg_pair(mesh, 1, 1, delta)});
    mass_corr_terms.push_back({ThetaKind::CosMu2, assemble_supg_mass_axis(mesh, 0, delta)});
    mass_corr_terms.push_back({ThetaKind::SinMu2, assemble_supg_mass_axis(mesh, 1, delta)});
    obs_corr_terms.push_back(
        {ThetaKind::CosMu2, assemble_supg_mass_axis(mesh, 0, delta, &ops.mask)});
    obs_corr_terms.push_back(
        {ThetaKind::SinMu2, assemble_supg_mass_axis(mesh, 1, delta, &ops.mask)});
  }

  // Which raw state terms belong to the plain family: everything except the
  // SUPG corrections. For Graetz the SUPG advection is the last entry; for the
  // square the pair terms carry the squared trigonometric thetas.
  auto is_supg_state_term = [&p, &state_terms](std::size_t q) {
    if (p.domain == Domain::GraetzRect) return q == state_terms.size() - 1;
    ThetaKind t = state_terms[q].theta;
    return t == ThetaKind::CosCosMu2 || t == ThetaKind::SinCosMu2 || t == ThetaKind::SinSinMu2;
  };

  for (int si = 0; si < 2; ++si) {
    const bool supg = si == static_cast<int>(StabMode::Supg);
    OperatorFamily& fam = ops.family[si];
    for (std::size_t q = 0; q < state_terms.size(); ++q) {
      if (!supg && is_supg_state_term(q)) continue;
      detail::add_term(fam.state_ff.terms, state_terms[q].theta,
                       csr_submatrix(state_terms[q].full, free, free));
      std::vector<double> fv = csr_matvec(state_terms[q].full, ops.spaces.lift);
      for (double& v : fv) v = -v;
      fam.forcing_f.terms.push_back({state_terms[q].theta, detail::restrict_to(fv, free)});
    }
    detail::add_term(fam.obs_full.terms, ThetaKind::One, mass_obs);
    detail::add_term(fam.time_mass_ff.terms, ThetaKind::One, csr_submatrix(mass, free, free));
    detail::add_term(fam.control_fs.terms, ThetaKind::One,
                     csr_scale(-1.0, csr_submatrix(mass, free, all)));
    if (supg) {
      for (const auto& t : obs_corr_terms)
        detail::add_term(fam.obs_full.terms, t.theta, csr_scale(-1.0, t.full));
      for (const auto& t : mass_corr_terms) {
        detail::add_term(fam.time_mass_ff.terms, t.theta, csr_submatrix(t.full, free, free));
        detail::add_term(fam.control_fs.terms, t.theta,
                         csr_scale(-1.0, csr_submatrix(t.full, free, all)));
      }
    }
    for (const auto& t : fam.obs_full.terms)
      fam.obs_ff.terms.push_back({t.theta, csr_submatrix(t.mat, free, free)});
  }
  return ops;
}

// Per-term decomposition of the adjoint-equation right-hand side
// (M - C)_obs (y_d(t) - lift) restricted to free rows; one vector per affine
// observation term, so the result can be re-weighted or projected without
// fixing mu.
inline AffineVector target_rhs_terms(const ProblemOperators& ops, StabMode stab, double t,
                                     const std::vector<double>* y_d_override = nullptr) {
  std::vector<double> d = y_d_override ? *y_d_override : ops.target_nodal(t);
  for (std::size_t v = 0; v < d.size(); ++v) d[v] -= ops.spaces.lift[v];
  AffineVector out;
  for (const auto& term : ops.fam(stab).obs_full.terms) {
    std::vector<double> av = csr_matvec(term.mat, d);
    AffineVectorTerm vt{term.theta, std::vector<double>(ops.n_free())};
    for (int i = 0; i < ops.n_free(); ++i) vt.vec[i] = av[ops.spaces.free_state[i]];
    out.terms.push_back(std::move(vt));
  }
  return out;
}

// Adjoint-equation right-hand side (M - C)_obs (y_d(t) - lift), free rows.
inline std::vector<double> target_rhs(const ProblemOperators& ops, StabMode stab,
                                      const std::vector<double>& mu, double t,
                                      const std::vector<double>* y_d_override = nullptr) {
  return target_rhs_terms(ops, stab, t, y_d_override).eval(mu);
}

// Direct (non-affine) assembly at a fixed mu; reference path for the affine
// catalog and the only path supporting the Peclet-switch delta rule.
inline CsrMatrix monolithic_state_full(const Mesh& mesh, const ProblemDef& p,
                                       const std::vector<double>& mu, StabMode stab) {
  check_mu(p, mu);
  VecField b = [&p, mu](std::array<double, 2> x) { return p.advection_field(x, mu); };
  const double eps = p.diffusion(mu);
  CsrMatrix a = csr_add(eps, assemble_stiffness(mesh), 1.0, assemble_advection(mesh, b));
  if (stab == StabMode::Supg) {
    const std::vector<double> delta = compute_delta(mesh, p.delta_rule, eps, b);
    a = csr_add(1.0, a, 1.0, assemble_supg_advection(mesh, b, delta));
  }
  return a;
}

inline CsrMatrix monolithic_mass_full(const Mesh& mesh, const ProblemDef& p,
                                      const std::vector<double>& mu, StabMode stab, double sign,
                                      const ObservationMask* mask = nullptr) {
  check_mu(p, mu);
  CsrMatrix m = assemble_mass(mesh, mask);
  if (stab == StabMode::Supg) {
    VecField b = [&p, mu](std::array<double, 2> x) { return p.advection_field(x, mu); };
    const std::vector<double> delta = compute_delta(mesh, p.delta_rule, p.diffusion(mu), b);
    m = csr_add(1.0, m, sign, assemble_supg_mass(mesh, b, delta, mask));
  }
  return m;
}

}  // namespace supgrom
