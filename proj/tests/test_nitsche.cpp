#include "ce/nitsche.hpp"

#include <cmath>

#include <doctest.h>

using namespace ce;

namespace {

BoundaryTag benchmark_tagger(const Vec2& mid) {
  if (std::abs(mid.y()) < 1e-12)
    return mid.x() < 0.0 ? BoundaryTag::Dirichlet : BoundaryTag::Contact;
  return BoundaryTag::Neumann;
}

struct Setup {
  TriMesh mesh;
  LagrangeSpace space;
  Problem problem;

  Setup(int nx, int ny, const VectorField& f, const VectorField& gN)
      : mesh(build_rect_mesh(nx, ny, {-1.0, 1.0, 0.0, 1.0}, benchmark_tagger)),
        space(mesh, 1) {
    problem.mesh = &mesh;
    problem.space = &space;
    problem.coeff = ElasticityCoefficients::plane_strain(1.0, 0.3);
    problem.body_force = f;
    problem.neumann = gN;
  }
};

VectorField zero = [](const Vec2&) { return Vec2::Zero(); };
VectorField benchmark_f = [](const Vec2&) { return Vec2(0.0, -0.01); };
VectorField benchmark_gN = [](const Vec2& x) {
  return std::abs(x.x() - 1.0) < 1e-12 ? Vec2(-0.0275, 0.0) : Vec2::Zero();
};

}  // namespace

TEST_CASE("projection onto the negative half line") {
  CHECK(proj_neg(-3.0) == -3.0);
  CHECK(proj_neg(2.0) == 0.0);
  CHECK(proj_neg(0.0) == 0.0);
}

TEST_CASE("regularized projection values and derivatives") {
  const double delta = 0.01;
  SUBCASE("joint at -delta") {
    const RegProj r = reg_proj(-delta, delta);
    CHECK(r.value == doctest::Approx(-delta).epsilon(1e-15));
    CHECK(r.derivative == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("midpoint") {
    const RegProj r = reg_proj(0.0, delta);
    CHECK(r.value == doctest::Approx(-0.0025).epsilon(1e-15));
    CHECK(r.derivative == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("joint at +delta") {
    const RegProj r = reg_proj(delta, delta);
    CHECK(r.value == doctest::Approx(0.0));
    CHECK(r.derivative == doctest::Approx(0.0));
  }
}

TEST_CASE("regularized projection is C1 and brackets the exact one") {
  const double delta = 0.37;
  const double eps = 1e-9;
  for (double x0 : {-delta, delta}) {
    const RegProj lo = reg_proj(x0 - eps, delta);
    const RegProj hi = reg_proj(x0 + eps, delta);
    CHECK(std::abs(hi.value - lo.value) < 3e-9);
    CHECK(std::abs(hi.derivative - lo.derivative) < 3e-9);
  }
  for (double x = -2.0; x <= 2.0; x += 0.01) {
    const RegProj r = reg_proj(x, delta);
    CHECK(r.value <= 0.0 + 1e-16);
    CHECK(r.value >= proj_neg(x) - delta / 4.0 - 1e-16);
    if (std::abs(x) >= delta) CHECK(r.value == proj_neg(x));
    CHECK(r.derivative >= 0.0);
    CHECK(r.derivative <= 1.0);
  }
}

TEST_CASE("contact operator on simple fields") {
  Setup s(4, 2, zero, zero);
  int f = -1;
  for (int fid : s.mesh.boundary_faces())
    if (s.mesh.faces[fid].tag == BoundaryTag::Contact) f = fid;
  REQUIRE(f >= 0);
  const Face& face = s.mesh.faces[f];
  const Vec2 mid = 0.5 * (s.mesh.vertices[face.v0] + s.mesh.vertices[face.v1]);
  const double gamma0 = 100.0;

  SUBCASE("zero displacement") {
    DisplacementField u(s.space);
    CHECK(p1gamma(u, s.problem.coeff, gamma0, f, mid) == 0.0);
  }
  SUBCASE("rigid vertical translation") {
    DisplacementField u(s.space);
    const double c = 0.125;
    for (int n = 0; n < s.space.num_nodes(); ++n) u.coeffs[2 * n + 1] = c;
    // bottom face: n = (0,-1), u.n = -c, sigma_n = 0
    const double hT = s.mesh.h_T[face.owner];
    CHECK(p1gamma(u, s.problem.coeff, gamma0, f, mid) ==
          doctest::Approx(gamma0 * c / hT).epsilon(1e-13));
    // doubling h_T halves the penalty term
    CHECK(p1gamma(u, s.problem.coeff, 2.0 * gamma0, f, mid) ==
          doctest::Approx(2.0 * gamma0 * c / hT).epsilon(1e-13));
  }
  SUBCASE("non-contact face rejected") {
    DisplacementField u(s.space);
    int nf = -1;
    for (int fid : s.mesh.boundary_faces())
      if (s.mesh.faces[fid].tag == BoundaryTag::Neumann) nf = fid;
    CHECK_THROWS(p1gamma(u, s.problem.coeff, gamma0, nf,
                         0.5 * (s.mesh.vertices[s.mesh.faces[nf].v0] +
                                s.mesh.vertices[s.mesh.faces[nf].v1])));
  }
}

TEST_CASE("without contact faces the system is plain elasticity") {
  // same geometry but the bottom right part tagged Neumann instead of Contact
  auto no_contact = [](const Vec2& mid) {
    if (std::abs(mid.y()) < 1e-12 && mid.x() < 0.0) return BoundaryTag::Dirichlet;
    return BoundaryTag::Neumann;
  };
  TriMesh mesh = build_rect_mesh(4, 2, {-1.0, 1.0, 0.0, 1.0}, no_contact);
  LagrangeSpace space(mesh, 1);
  Problem problem;
  problem.mesh = &mesh;
  problem.space = &space;
  problem.coeff = ElasticityCoefficients::plane_strain(1.0, 0.3);
  problem.body_force = benchmark_f;
  problem.neumann = zero;

  const SparseMat K = assemble_elastic_stiffness(space, problem.coeff);
  const Eigen::VectorXd load = assemble_load(space, problem.body_force, problem.neumann);
  NitscheConfig cfg;
  DisplacementField u_prev(space);
  SparseMat A;
  Eigen::VectorXd b;
  assemble_newton_system(problem, K, load, u_prev, cfg, A, b);

  SparseMat Kbc = K;
  Eigen::VectorXd bbc = load;
  apply_dirichlet(space, Eigen::VectorXd::Zero(space.num_dofs()), Kbc, bbc);
  CHECK((Eigen::MatrixXd(A) - Eigen::MatrixXd(Kbc)).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK((b - bbc).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("large delta at zero state halves the contact bilinear form") {
  Setup s(4, 2, zero, zero);
  const SparseMat K = assemble_elastic_stiffness(s.space, s.problem.coeff);
  const Eigen::VectorXd load = assemble_load(s.space, s.problem.body_force, s.problem.neumann);
  DisplacementField u0(s.space);

  NitscheConfig cfg;
  cfg.delta = 1e6;  // derivative of the regularization at 0 is exactly 1/2
  SparseMat A_half;
  Eigen::VectorXd b_half;
  assemble_newton_system(s.problem, K, load, u0, cfg, A_half, b_half);

  SparseMat Kbc = K;
  Eigen::VectorXd bbc = load;
  apply_dirichlet(s.space, Eigen::VectorXd::Zero(s.space.num_dofs()), Kbc, bbc);

  // hand-assembled full contact bilinear form (derivative factor one)
  Eigen::MatrixXd C_full = Eigen::MatrixXd::Zero(s.space.num_dofs(), s.space.num_dofs());
  const SegQuadrature& rule = segment_rule(10);
  const auto& coeff = s.problem.coeff;
  for (int fid = 0; fid < s.mesh.num_faces(); ++fid) {
    const Face& face = s.mesh.faces[fid];
    if (!face.is_boundary() || face.tag != BoundaryTag::Contact) continue;
    const int t = face.owner;
    const double gamma = cfg.gamma0 / s.mesh.h_T[t];
    const auto nodes = s.space.element_nodes(t);
    const Vec2 n = face.normal;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Vec2 x = s.mesh.vertices[face.v0] +
                     rule.points[q] * (s.mesh.vertices[face.v1] - s.mesh.vertices[face.v0]);
      const double w = face.length * rule.weights[q];
      double bary[3];
      barycentric(s.mesh, t, x, bary);
      double vals[3];
      Vec2 grads[3];
      s.space.basis_values(bary, vals);
      s.space.basis_gradients(t, bary, grads);
      for (std::size_t i = 0; i < nodes.size(); ++i)
        for (int ci = 0; ci < 2; ++ci)
          for (std::size_t j = 0; j < nodes.size(); ++j)
            for (int cj = 0; cj < 2; ++cj) {
              const double sig_n =
                  coeff.lambda * grads[j][cj] + 2.0 * coeff.mu * n[cj] * n.dot(grads[j]);
              const double pj = sig_n - gamma * vals[j] * n[cj];
              C_full(2 * nodes[i] + ci, 2 * nodes[j] + cj) += w * pj * vals[i] * n[ci];
            }
    }
  }
  // zero the Dirichlet rows/columns of the hand-assembled part as elimination does
  for (int nd : s.space.dirichlet_nodes())
    for (int c = 0; c < 2; ++c) {
      C_full.row(2 * nd + c).setZero();
      C_full.col(2 * nd + c).setZero();
    }

  const Eigen::MatrixXd W = Eigen::MatrixXd(Kbc) - Eigen::MatrixXd(A_half);
  CHECK((W - 0.5 * C_full).lpNorm<Eigen::Infinity>() < 1e-12 * C_full.lpNorm<Eigen::Infinity>());
}

TEST_CASE("zero loads converge to zero as the regularization vanishes") {
  // the regularized operator is -delta/4 at the origin, so the solution of
  // the regularized problem is O(delta); at tiny delta it is numerically zero
  Setup s(4, 2, zero, zero);
  NitscheConfig cfg;
  cfg.delta = 1e-9;
  DisplacementField u0(s.space);
  const auto [u, trace] = newton_solve(s.problem, u0, cfg);
  CHECK(trace.converged);
  CHECK(u.coeffs.norm() < 1e-8);
  CHECK(trace.iterates.back().residual_norm < 1e-14);
}

TEST_CASE("benchmark solve converges with decreasing residuals") {
  Setup s(8, 4, benchmark_f, benchmark_gN);
  NitscheConfig cfg;
  cfg.delta = 0.01;
  DisplacementField u0(s.space);
  const auto [u, trace] = newton_solve(s.problem, u0, cfg);
  CHECK(trace.converged);
  REQUIRE(trace.iterates.size() >= 3);
  const auto& it = trace.iterates;
  for (std::size_t k = it.size() - 2; k < it.size(); ++k)
    CHECK(it[k].residual_norm <= it[k - 1].residual_norm * (1.0 + 1e-8));
  // iterate index strictly increasing
  for (std::size_t k = 1; k < it.size(); ++k) CHECK(it[k].k == it[k - 1].k + 1);
  // Dirichlet coefficients stay zero
  for (int n : s.space.dirichlet_nodes()) {
    CHECK(u.coeffs[2 * n] == 0.0);
    CHECK(u.coeffs[2 * n + 1] == 0.0);
  }
}

TEST_CASE("converged iterate satisfies the regularized equation") {
  Setup s(8, 4, benchmark_f, benchmark_gN);
  NitscheConfig cfg;
  cfg.delta = 0.01;
  cfg.newton_tol = 1e-12;
  DisplacementField u0(s.space);
  const auto [u, trace] = newton_solve(s.problem, u0, cfg);
  const SparseMat K = assemble_elastic_stiffness(s.space, s.problem.coeff);
  const Eigen::VectorXd load = assemble_load(s.space, s.problem.body_force, s.problem.neumann);
  const Eigen::VectorXd r = residual_regularized(s.problem, K, load, u, cfg);
  CHECK(r.norm() < 1e-10 * load.norm());
}

TEST_CASE("deep continuation approaches the exact projection problem") {
  Setup s(8, 4, benchmark_f, benchmark_gN);
  NitscheConfig cfg;
  cfg.delta = 1.0;
  cfg.newton_tol = 1e-13;
  const DisplacementField u = continuation_solve(s.problem, cfg, 1e-12);
  const SparseMat K = assemble_elastic_stiffness(s.space, s.problem.coeff);
  const Eigen::VectorXd load = assemble_load(s.space, s.problem.body_force, s.problem.neumann);
  NitscheConfig tiny = cfg;
  tiny.delta = 1e-12;
  const Eigen::VectorXd r = residual_exact(s.problem, K, load, u, tiny);
  CHECK(r.norm() < 10.0 * cfg.newton_tol * load.norm() + 1e-13 * load.norm());
}

TEST_CASE("penetration is controlled at the converged state") {
  Setup s(8, 4, benchmark_f, benchmark_gN);
  NitscheConfig cfg;
  cfg.delta = 0.01;
  DisplacementField u0(s.space);
  const auto [u, trace] = newton_solve(s.problem, u0, cfg);
  // u.n <= tolerance on the contact boundary (no significant penetration)
  for (int fid : s.mesh.boundary_faces()) {
    const Face& face = s.mesh.faces[fid];
    if (face.tag != BoundaryTag::Contact) continue;
    for (double sp : {0.0, 0.5, 1.0}) {
      const Vec2 x =
          s.mesh.vertices[face.v0] + sp * (s.mesh.vertices[face.v1] - s.mesh.vertices[face.v0]);
      double bary[3];
      barycentric(s.mesh, face.owner, x, bary);
      const double un = u.value(face.owner, bary).dot(face.normal);
      CHECK(un < 1e-3);  // weak enforcement allows small positive values
    }
  }
}
