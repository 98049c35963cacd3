#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "supgrom/pod_rom.hpp"

using namespace supgrom;

namespace {

// Identity Gram over n dofs, for hand-built examples.
CsrMatrix identity_gram(int n) {
  std::vector<Triplet> trip;
  for (int i = 0; i < n; ++i) trip.push_back({i, i, 1.0});
  return csr_from_triplets(n, n, trip);
}

Eigen::MatrixXd random_snapshots(int rows, int cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd s(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) s(i, j) = gauss(rng);
  return s;
}

// Squared G-norm of the component of x outside span(basis), with basis
// G-orthonormal.
double projection_residual_sq(const GramSpec& g, const Eigen::MatrixXd& basis,
                              const Eigen::VectorXd& x) {
  Eigen::VectorXd r = x;
  for (Eigen::Index k = 0; k < basis.cols(); ++k)
    r -= gram_dot(g, basis.col(k), x) * basis.col(k);
  return gram_dot(g, r, r);
}

}  // namespace

TEST_CASE("training sets are reproducible and live inside the box") {
  ParameterBox box;
  box.range = {{1e4, 1e6}};
  TrainingSet a = draw_training_set(box, 100, 7);
  TrainingSet b = draw_training_set(box, 100, 7);
  REQUIRE(a.samples.size() == 100);
  for (int s = 0; s < 100; ++s) {
    REQUIRE(a.samples[s] == b.samples[s]);  // bitwise determinism
    REQUIRE(box.contains(a.samples[s]));
  }
  TrainingSet c = draw_training_set(box, 100, 8);
  REQUIRE(a.samples[0] != c.samples[0]);

  ParameterBox square;
  square.range = {{1e4, 1e5}, {0.0, 1.57}};
  TrainingSet d = draw_training_set(square, 1, 3);
  REQUIRE(d.samples.size() == 1);
  REQUIRE(d.samples[0].size() == 2);
  REQUIRE(square.contains(d.samples[0]));
}

TEST_CASE("degenerate training requests are rejected") {
  ParameterBox empty;
  REQUIRE_THROWS_AS(draw_training_set(empty, 5, 1), std::invalid_argument);
  ParameterBox box;
  box.range = {{1e4, 1e6}};
  REQUIRE_THROWS_AS(draw_training_set(box, 0, 1), std::invalid_argument);
  ParameterBox inverted;
  inverted.range = {{2.0, 1.0}};
  REQUIRE_THROWS_AS(draw_training_set(inverted, 5, 1), std::invalid_argument);
}

TEST_CASE("snapshot collection shapes follow the problem") {
  SECTION("steady") {
    ProblemDef p = make_problem(ProblemId::GraetzSteady);
    Mesh m = build_structured_mesh(Domain::GraetzRect, 10, 5);
    ProblemOperators ops = build_affine_operators(p, m);
    TrainingSet ts;
    ts.box = p.parameter_box;
    ts.samples = {{2e5}, {2e5}, {7e5}};
    SnapshotSet snaps = collect_snapshots(ops, ts);
    REQUIRE(snaps.y.rows() == ops.n_free());
    REQUIRE(snaps.u.rows() == ops.n_ctrl());
    REQUIRE(snaps.p.rows() == ops.n_free());
    REQUIRE(snaps.y.cols() == 3);
    REQUIRE(snaps.n_blocks == 1);
    REQUIRE(snaps.block_weight == 1.0);
    REQUIRE(snaps.hf_seconds > 0.0);
    // identical samples produce identical columns
    REQUIRE((snaps.y.col(0) - snaps.y.col(1)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((snaps.y.col(0) - snaps.y.col(2)).cwiseAbs().maxCoeff() > 0.0);
  }
  SECTION("parabolic stacks every time block") {
    ProblemDef p = make_problem(ProblemId::GraetzParabolic);
    p.n_time_steps = 3;
    p.t_final = 0.3;
    Mesh m = build_structured_mesh(Domain::GraetzRect, 4, 5);
    ProblemOperators ops = build_affine_operators(p, m);
    TrainingSet ts;
    ts.box = p.parameter_box;
    ts.samples = {{2e5}, {9e5}};
    SnapshotSet snaps = collect_snapshots(ops, ts);
    REQUIRE(snaps.y.rows() == ops.n_free() * 3);
    REQUIRE(snaps.u.rows() == ops.n_ctrl() * 3);
    REQUIRE(snaps.p.rows() == ops.n_free() * 3);
    REQUIRE(snaps.n_blocks == 3);
    REQUIRE(snaps.block_weight == Catch::Approx(0.1));
  }
}

TEST_CASE("correlation matrices match the hand formula") {
  CsrMatrix g = identity_gram(2);
  GramSpec spec{&g, 1, 1.0};
  SECTION("orthonormal pair gives half the identity") {
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2, 2);
    DenseSymMatrix c = correlation_matrix(s, spec);
    REQUIRE(c.at(0, 0) == Catch::Approx(0.5));
    REQUIRE(c.at(1, 1) == Catch::Approx(0.5));
    REQUIRE(c.at(0, 1) == 0.0);
  }
  SECTION("identical snapshots give a scaled all-ones matrix") {
    Eigen::MatrixXd s(2, 3);
    s.col(0) << 3.0, 4.0;
    s.col(1) = s.col(0);
    s.col(2) = s.col(0);
    DenseSymMatrix c = correlation_matrix(s, spec);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) REQUIRE(c.at(i, j) == Catch::Approx(25.0 / 3.0));
  }
  SECTION("random snapshots give a symmetric PSD matrix") {
    CsrMatrix g6 = identity_gram(6);
    Eigen::MatrixXd s = random_snapshots(6, 4, 11);
    DenseSymMatrix c = correlation_matrix(s, GramSpec{&g6, 1, 1.0});
    SymEig e = sym_eigh(c);
    for (double lam : e.eigenvalues) REQUIRE(lam > -1e-12);
  }
}

TEST_CASE("pod modes are orthonormal in the supplied inner product") {
  ProblemDef p = make_problem(ProblemId::GraetzSteady);
  Mesh m = build_structured_mesh(Domain::GraetzRect, 6, 5);
  ProblemOperators ops = build_affine_operators(p, m);
  CsrMatrix gram = ops.state_gram;
  GramSpec spec{&gram, 1, 1.0};
  Eigen::MatrixXd s = random_snapshots(ops.n_free(), 9, 23);
  PodBasis b = pod_basis(correlation_matrix(s, spec), s, spec, 9);
  REQUIRE(b.n_kept == 9);
  REQUIRE_FALSE(b.truncated);
  for (int i = 0; i < b.n_kept; ++i)
    for (int j = 0; j < b.n_kept; ++j)
      REQUIRE(gram_dot(spec, b.modes.col(i), b.modes.col(j)) ==
              Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-8));
}

TEST_CASE("a repeated snapshot compresses to its normalized direction") {
  CsrMatrix g = identity_gram(3);
  GramSpec spec{&g, 1, 1.0};
  Eigen::MatrixXd s(3, 4);
  for (int j = 0; j < 4; ++j) s.col(j) << 2.0, 0.0, 0.0;
  PodBasis b = pod_basis(correlation_matrix(s, spec), s, spec, 3);
  REQUIRE(b.n_kept == 1);  // numerical rank one
  REQUIRE(b.truncated);
  REQUIRE(std::abs(b.modes(0, 0)) == Catch::Approx(1.0));  // +-e_1
  REQUIRE(b.eigenvalues[0] == Catch::Approx(4.0));         // |v|^2, weight 1/N cancels
  REQUIRE(b.eigenvalues[1] <= 1e-12 * b.eigenvalues[0]);
}

TEST_CASE("projection error equals the eigenvalue tail") {
  ProblemDef p = make_problem(ProblemId::GraetzSteady);
  Mesh m = build_structured_mesh(Domain::GraetzRect, 6, 5);
  ProblemOperators ops = build_affine_operators(p, m);
  CsrMatrix gram = ops.state_gram;
  GramSpec spec{&gram, 1, 1.0};
  Eigen::MatrixXd s = random_snapshots(ops.n_free(), 8, 5);
  DenseSymMatrix c = correlation_matrix(s, spec);
  PodBasis full = pod_basis(c, s, spec, 8);
  const int rank = full.n_kept;
  double total = 0.0;
  for (double lam : full.eigenvalues) total += lam;
  for (int n : {1, rank / 2, rank}) {
    if (n < 1) continue;
    PodBasis b = pod_basis(c, s, spec, n);
    double err = 0.0;
    for (int k = 0; k < s.cols(); ++k)
      err += projection_residual_sq(spec, b.modes, s.col(k));
    err /= double(s.cols());
    double tail = 0.0;
    for (std::size_t q = n; q < full.eigenvalues.size(); ++q) tail += full.eigenvalues[q];
    REQUIRE(std::abs(err - tail) <= 1e-8 * total);
  }
}

TEST_CASE("aggregated bases stay orthonormal and nest by truncation") {
  ProblemDef p = make_problem(ProblemId::GraetzSteady);
  Mesh m = build_structured_mesh(Domain::GraetzRect, 10, 5);
  ProblemOperators ops = build_affine_operators(p, m);
  TrainingSet ts = draw_training_set(p.parameter_box, 12, 19);
  SnapshotSet snaps = collect_snapshots(ops, ts);
  ReducedBasis basis = build_reduced_basis(snaps, 6);
  REQUIRE(basis.n_max >= 2);
  REQUIRE(basis.z.cols() == 2 * basis.n_max);
  GramSpec spec = snaps.state_spec();
  for (Eigen::Index i = 0; i < basis.z.cols(); ++i)
    for (Eigen::Index j = 0; j < basis.z.cols(); ++j)
      REQUIRE(gram_dot(spec, basis.z.col(i), basis.z.col(j)) ==
              Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-8));
  // the leading 2N columns span the first N state and adjoint modes
  for (int n = 1; n <= basis.n_max; ++n) {
    Eigen::MatrixXd lead = basis.z.leftCols(2 * n);
    for (int k = 0; k < n; ++k) {
      REQUIRE(projection_residual_sq(spec, lead, basis.y.modes.col(k)) < 1e-16);
      REQUIRE(projection_residual_sq(spec, lead, basis.p.modes.col(k)) < 1e-16);
    }
  }
}

TEST_CASE("truncation reports carry monotone tails") {
  ProblemDef p = make_problem(ProblemId::GraetzSteady);
  Mesh m = build_structured_mesh(Domain::GraetzRect, 10, 5);
  ProblemOperators ops = build_affine_operators(p, m);
  TrainingSet ts = draw_training_set(p.parameter_box, 8, 3);
  SnapshotSet snaps = collect_snapshots(ops, ts);
  ReducedBasis basis = build_reduced_basis(snaps, 6);
  TruncationReport rep = truncation_report(basis);
  for (int v = 0; v < 3; ++v) {
    double total = 0.0;
    for (double lam : rep.eigenvalues[v]) {
      REQUIRE(lam >= 0.0);
      total += lam;
    }
    REQUIRE(rep.tails[v][0] == Catch::Approx(total));
    REQUIRE(rep.tails[v].back() == 0.0);
    for (std::size_t k = 1; k < rep.tails[v].size(); ++k)
      REQUIRE(rep.tails[v][k] <= rep.tails[v][k - 1] * (1 + 1e-15));
    for (std::size_t k = 1; k < rep.eigenvalues[v].size(); ++k)
      REQUIRE(rep.eigenvalues[v][k] <= rep.eigenvalues[v][k - 1] * (1 + 1e-15));
  }
}

TEST_CASE("reduced systems equal the direct galerkin projection") {
  SECTION("steady") {
    ProblemDef p = make_problem(ProblemId::SquareSteady);
    Mesh m = build_structured_mesh(Domain::UnitSquare, 4, 4);
    ProblemOperators ops = build_affine_operators(p, m);
    TrainingSet ts = draw_training_set(p.parameter_box, 6, 29);
    SnapshotSet snaps = collect_snapshots(ops, ts);
    ReducedBasis basis = build_reduced_basis(snaps, 4);
    ReducedModel model = build_reduced_model(ops, basis);
    const int n = std::max(1, basis.n_max - 1);  // exercise real truncation
    std::vector<double> mu{4.4e4, 1.2};
    for (RomMode mode : {RomMode::OnlyOffline, RomMode::OnlineOffline}) {
      StabMode stab = mode == RomMode::OnlineOffline ? StabMode::Supg : StabMode::None;
      KktSteady kkt = assemble_kkt_steady(ops, mu, stab);
      Eigen::MatrixXd kd = Eigen::MatrixXd(as_eigen(kkt.matrix));
      const int nf = ops.n_free(), nc = ops.n_ctrl();
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2 * nf + nc, 5 * n);
      w.block(0, 0, nf, 2 * n) = model.z.leftCols(2 * n);
      w.block(nf, 2 * n, nc, n) = model.u_basis.leftCols(n);
      w.block(nf + nc, 3 * n, nf, 2 * n) = model.z.leftCols(2 * n);
      ReducedSystem sys = assemble_reduced(model, mu, n, mode);
      Eigen::MatrixXd ref = w.transpose() * kd * w;
      Eigen::VectorXd ref_rhs =
          w.transpose() * Eigen::Map<const Eigen::VectorXd>(kkt.rhs.data(), kkt.rhs.size());
      REQUIRE((ref - sys.matrix).cwiseAbs().maxCoeff() <=
              1e-12 * kd.cwiseAbs().maxCoeff());
      REQUIRE((ref_rhs - sys.rhs).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  SECTION("parabolic") {
    ProblemDef p = make_problem(ProblemId::GraetzParabolic);
    p.n_time_steps = 3;
    p.t_final = 0.3;
    Mesh m = build_structured_mesh(Domain::GraetzRect, 4, 5);
    ProblemOperators ops = build_affine_operators(p, m);
    TrainingSet ts = draw_training_set(p.parameter_box, 6, 31);
    SnapshotSet snaps = collect_snapshots(ops, ts);
    ReducedBasis basis = build_reduced_basis(snaps, 4);
    ReducedModel model = build_reduced_model(ops, basis);
    const int n = std::max(1, basis.n_max - 1);
    std::vector<double> mu{6e5};
    for (RomMode mode : {RomMode::OnlyOffline, RomMode::OnlineOffline}) {
      StabMode stab = mode == RomMode::OnlineOffline ? StabMode::Supg : StabMode::None;
      KktSpaceTime kkt = assemble_kkt_spacetime(ops, mu, stab);
      Eigen::MatrixXd kd = Eigen::MatrixXd(as_eigen(kkt.matrix));
      const int nyt = ops.n_free() * 3, nut = ops.n_ctrl() * 3;
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2 * nyt + nut, 5 * n);
      w.block(0, 0, nyt, 2 * n) = model.z.leftCols(2 * n);
      w.block(nyt, 2 * n, nut, n) = model.u_basis.leftCols(n);
      w.block(nyt + nut, 3 * n, nyt, 2 * n) = model.z.leftCols(2 * n);
      ReducedSystem sys = assemble_reduced(model, mu, n, mode);
      Eigen::MatrixXd ref = w.transpose() * kd * w;
      Eigen::VectorXd ref_rhs =
          w.transpose() * Eigen::Map<const Eigen::VectorXd>(kkt.rhs.data(), kkt.rhs.size());
      REQUIRE((ref - sys.matrix).cwiseAbs().maxCoeff() <=
              1e-12 * kd.cwiseAbs().maxCoeff());
      REQUIRE((ref_rhs - sys.rhs).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("the reduced model reproduces training snapshots at full rank") {
  SECTION("steady") {
    ProblemDef p = make_problem(ProblemId::GraetzSteady);
    Mesh m = build_structured_mesh(Domain::GraetzRect, 10, 5);
    ProblemOperators ops = build_affine_operators(p, m);
    TrainingSet ts = draw_training_set(p.parameter_box, 10, 41);
    SnapshotSet snaps = collect_snapshots(ops, ts);
    ReducedBasis basis = build_reduced_basis(snaps, 10);
    ReducedModel model = build_reduced_model(ops, basis);
    GramSpec sy = snaps.state_spec(), su = snaps.control_spec();
    for (int s : {0, 4}) {
      ReducedSolution r = solve_reduced(model, ts.samples[s], basis.n_max, RomMode::OnlineOffline);
      Eigen::VectorXd ey = r.y.col(0) - snaps.y.col(s);
      Eigen::VectorXd eu = r.u.col(0) - snaps.u.col(s);
      Eigen::VectorXd ep = r.p.col(0) - snaps.p.col(s);
      REQUIRE(gram_norm(sy, ey) <= 1e-6 * gram_norm(sy, snaps.y.col(s)));
      REQUIRE(gram_norm(su, eu) <= 1e-6 * gram_norm(su, snaps.u.col(s)));
      REQUIRE(gram_norm(sy, ep) <= 1e-6 * gram_norm(sy, snaps.p.col(s)));
    }
  }
  SECTION("parabolic") {
    ProblemDef p = make_problem(ProblemId::GraetzParabolic);
    p.n_time_steps = 4;
    p.t_final = 0.4;
    Mesh m = build_structured_mesh(Domain::GraetzRect, 10, 5);
    ProblemOperators ops = build_affine_operators(p, m);
    TrainingSet ts = draw_training_set(p.parameter_box, 8, 43);
    SnapshotSet snaps = collect_snapshots(ops, ts);
    ReducedBasis basis = build_reduced_basis(snaps, 8);
    ReducedModel model = build_reduced_model(ops, basis);
    GramSpec sy = snaps.state_spec(), su = snaps.control_spec();
    ReducedSolution r = solve_reduced(model, ts.samples[2], basis.n_max, RomMode::OnlineOffline);
    Eigen::VectorXd yr = Eigen::Map<const Eigen::VectorXd>(r.y.data(), r.y.size());
    Eigen::VectorXd ur = Eigen::Map<const Eigen::VectorXd>(r.u.data(), r.u.size());
    Eigen::VectorXd pr = Eigen::Map<const Eigen::VectorXd>(r.p.data(), r.p.size());
    REQUIRE(gram_norm(sy, yr - snaps.y.col(2)) <= 1e-6 * gram_norm(sy, snaps.y.col(2)));
    REQUIRE(gram_norm(su, ur - snaps.u.col(2)) <= 1e-6 * gram_norm(su, snaps.u.col(2)));
    REQUIRE(gram_norm(sy, pr - snaps.p.col(2)) <= 1e-6 * gram_norm(sy, snaps.p.col(2)));
  }
}

TEST_CASE("the reduced gradient equation is satisfied to solver accuracy") {
  ProblemDef p = make_problem(ProblemId::GraetzSteady);
  Mesh m = build_structured_mesh(Domain::GraetzRect, 10, 5);
  ProblemOperators ops = build_affine_operators(p, m);
  TrainingSet ts = draw_training_set(p.parameter_box, 10, 47);
  SnapshotSet snaps = collect_snapshots(ops, ts);
  ReducedBasis basis = build_reduced_basis(snaps, 10);
  ReducedModel model = build_reduced_model(ops, basis);
  std::vector<double> mu{3.3e5};
  for (RomMode mode : {RomMode::OnlyOffline, RomMode::OnlineOffline}) {
    const int n = basis.n_max;
    ReducedSolution r = solve_reduced(model, mu, n, mode);
    ReducedSystem sys = assemble_reduced(model, mu, n, mode);
    Eigen::VectorXd x(5 * n);
    x << r.y_coef, r.u_coef, r.p_coef;
    Eigen::VectorXd res = sys.matrix * x - sys.rhs;
    double scale = std::max(1.0, x.norm());
    REQUIRE(res.segment(2 * n, n).norm() <= 1e-10 * scale);
  }
}

TEST_CASE("degenerate reduced solves are rejected") {
  ProblemDef p = make_problem(ProblemId::GraetzSteady);
  Mesh m = build_structured_mesh(Domain::GraetzRect, 6, 5);
  ProblemOperators ops = build_affine_operators(p, m);
  TrainingSet ts = draw_training_set(p.parameter_box, 6, 53);
  SnapshotSet snaps = collect_snapshots(ops, ts);
  ReducedBasis basis = build_reduced_basis(snaps, 6);
  ReducedModel model = build_reduced_model(ops, basis);
  REQUIRE_THROWS_AS(solve_reduced(model, {2e5}, 0, RomMode::OnlineOffline),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(solve_reduced(model, {2e5}, model.n_max + 1, RomMode::OnlineOffline),
                    std::invalid_argument);
}

TEST_CASE("offline artifacts round trip through disk") {
  ProblemDef p = make_problem(ProblemId::SquareSteady);
  Mesh m = build_structured_mesh(Domain::UnitSquare, 4, 4);
  ProblemOperators ops = build_affine_operators(p, m);
  TrainingSet ts = draw_training_set(p.parameter_box, 6, 59);
  SnapshotSet snaps = collect_snapshots(ops, ts);
  ReducedBasis basis = build_reduced_basis(snaps, 4);
  ReducedModel model = build_reduced_model(ops, basis);

  std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "supgrom_offline_roundtrip";
  std::filesystem::remove_all(dir);
  save_offline(dir, model, basis, static_cast<int>(ts.samples.size()), ts.rng_seed);
  REQUIRE(std::filesystem::exists(dir / "manifest.json"));
  OfflineArtifacts loaded = load_offline(dir);
  REQUIRE(loaded.model.n_max == model.n_max);
  REQUIRE(loaded.model.problem.id == p.id);
  REQUIRE(loaded.n_train == 6);
  REQUIRE(loaded.train_seed == 59);
  REQUIRE(loaded.eigenvalues[0].size() == basis.y.eigenvalues.size());
  REQUIRE(loaded.eigenvalues[0][0] == basis.y.eigenvalues[0]);

  std::vector<double> mu{7.7e4, 0.3};
  for (RomMode mode : {RomMode::OnlyOffline, RomMode::OnlineOffline}) {
    ReducedSolution a = solve_reduced(model, mu, model.n_max, mode);
    ReducedSolution b = solve_reduced(loaded.model, mu, model.n_max, mode);
    REQUIRE((a.y_coef - b.y_coef).cwiseAbs().maxCoeff() == 0.0);  // exact f64 round trip
    REQUIRE((a.u_coef - b.u_coef).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((a.p_coef - b.p_coef).cwiseAbs().maxCoeff() == 0.0);
  }
  std::filesystem::remove_all(dir);
  REQUIRE_THROWS(load_offline(dir));
}
