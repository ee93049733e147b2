#include "ce/femcore.hpp"

#include <cmath>
#include <random>

#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

using namespace ce;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// Exact monomial integral over the reference triangle {x,y>=0, x+y<=1}.
double ref_monomial_integral(int a, int b) {
  return factorial(a) * factorial(b) / factorial(a + b + 2);
}

BoundaryTag all_dirichlet(const Vec2&) { return BoundaryTag::Dirichlet; }
BoundaryTag all_neumann(const Vec2&) { return BoundaryTag::Neumann; }

TriMesh unit_square(int n, const BoundaryTagger& tag = all_dirichlet) {
  return build_rect_mesh(n, n, {0.0, 1.0, 0.0, 1.0}, tag);
}

Vec2 zero_field(const Vec2&) { return Vec2::Zero(); }

DisplacementField interpolate_linear(const LagrangeSpace& space, const Eigen::Matrix2d& G,
                                     const Vec2& c) {
  DisplacementField u(space);
  for (int n = 0; n < space.num_nodes(); ++n) {
    const Vec2 v = G * space.node_position(n) + c;
    u.coeffs[2 * n] = v.x();
    u.coeffs[2 * n + 1] = v.y();
  }
  return u;
}

}  // namespace

TEST_CASE("triangle quadrature integrates monomials exactly") {
  // single reference triangle (0,0)-(1,0)-(0,1)
  TriMesh mesh = build_from_cells({Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)}, {{{0, 1, 2}}},
                                  [](int, int) { return BoundaryTag::Dirichlet; });
  for (int degree = 1; degree <= 10; ++degree) {
    for (int a = 0; a + 0 <= degree; ++a)
      for (int b = 0; a + b <= degree; ++b) {
        const double val = integrate_triangle(mesh, 0, degree, [&](const Vec2& x) {
          return std::pow(x.x(), a) * std::pow(x.y(), b);
        });
        CHECK(val == doctest::Approx(ref_monomial_integral(a, b)).epsilon(1e-13));
      }
  }
}

TEST_CASE("triangle weights sum to the reference measure") {
  for (int degree : {1, 2, 4, 6, 10}) {
    const TriQuadrature& rule = triangle_rule(degree);
    double sum = 0.0;
    for (const auto& p : rule.points) sum += p.w;
    CHECK(sum == doctest::Approx(0.5).epsilon(1e-14));
  }
}

TEST_CASE("segment quadrature integrates monomials exactly") {
  for (int degree = 1; degree <= 12; ++degree) {
    const SegQuadrature& rule = segment_rule(degree);
    for (int k = 0; k <= degree; ++k) {
      double val = 0.0;
      for (std::size_t i = 0; i < rule.points.size(); ++i)
        val += rule.weights[i] * std::pow(rule.points[i], k);
      CHECK(val == doctest::Approx(1.0 / (k + 1)).epsilon(1e-13));
    }
  }
}

TEST_CASE("plane strain parameters reproduce the benchmark values") {
  const auto c = ElasticityCoefficients::plane_strain(1.0, 0.3);
  CHECK(c.mu == doctest::Approx(0.3846153846153846).epsilon(1e-14));
  CHECK(c.lambda == doctest::Approx(0.5769230769230769).epsilon(1e-14));
  CHECK_THROWS(ElasticityCoefficients::plane_strain(1.0, 0.5));
}

TEST_CASE("rigid motions are in the stiffness kernel") {
  for (int degree : {1, 2}) {
    const TriMesh mesh = unit_square(2);
    const LagrangeSpace space(mesh, degree);
    const auto coeff = ElasticityCoefficients::plane_strain(1.0, 0.3);
    const SparseMat K = assemble_elastic_stiffness(space, coeff);
    // translations and the infinitesimal rotation (-y, x)
    const Eigen::Matrix2d rot = (Eigen::Matrix2d() << 0.0, -1.0, 1.0, 0.0).finished();
    for (const auto& u : {interpolate_linear(space, Eigen::Matrix2d::Zero(), Vec2(1, 0)),
                          interpolate_linear(space, Eigen::Matrix2d::Zero(), Vec2(0, 1)),
                          interpolate_linear(space, rot, Vec2::Zero())}) {
      CHECK((K * u.coeffs).norm() < 1e-12 * K.norm());
    }
  }
}

TEST_CASE("stiffness kernel is exactly three-dimensional") {
  const TriMesh mesh = unit_square(2);
  const LagrangeSpace space(mesh, 1);
  const auto coeff = ElasticityCoefficients::plane_strain(1.0, 0.3);
  const Eigen::MatrixXd K = Eigen::MatrixXd(assemble_elastic_stiffness(space, coeff));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  int near_zero = 0;
  const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (std::abs(es.eigenvalues()[i]) < 1e-12 * scale) ++near_zero;
  CHECK(near_zero == 3);
  CHECK(es.eigenvalues().minCoeff() > -1e-12 * scale);  // positive semidefinite
}

TEST_CASE("energy product matches an independent quadrature") {
  for (int degree : {1, 2}) {
    const TriMesh mesh = unit_square(3);
    const LagrangeSpace space(mesh, degree);
    const auto coeff = ElasticityCoefficients::plane_strain(1.0, 0.3);
    const SparseMat K = assemble_elastic_stiffness(space, coeff);

    std::mt19937 rng(1234);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    DisplacementField v(space);
    for (int i = 0; i < v.coeffs.size(); ++i) v.coeffs[i] = dist(rng);

    double energy = 0.0;
    const TriQuadrature& rule = triangle_rule(2 * degree + 4);
    for (int t = 0; t < mesh.num_triangles(); ++t)
      for (const auto& qp : rule.points) {
        const double bary[3] = {qp.l0, qp.l1, qp.l2};
        const Eigen::Matrix2d g = v.gradient(t, bary);
        const Eigen::Matrix2d eps = 0.5 * (g + g.transpose());
        const double div = g.trace();
        energy += 2.0 * mesh.area[t] * qp.w *
                  (coeff.lambda * div * div + 2.0 * coeff.mu * eps.squaredNorm());
      }
    const double quad_form = v.coeffs.dot(K * v.coeffs);
    CHECK(quad_form == doctest::Approx(energy).epsilon(1e-10));
  }
}

TEST_CASE("zero loads assemble to the zero vector") {
  const TriMesh mesh = unit_square(2, all_neumann);
  const LagrangeSpace space(mesh, 1);
  const Eigen::VectorXd b = assemble_load(space, zero_field, zero_field);
  CHECK(b.norm() == 0.0);
}

TEST_CASE("load vector sums against the partition of unity") {
  // constant body force on the unit square, no surface traction
  const TriMesh mesh = unit_square(3, all_dirichlet);
  const LagrangeSpace space(mesh, 1);
  const Vec2 f(0.7, -0.3);
  const Eigen::VectorXd b =
      assemble_load(space, [&](const Vec2&) { return f; }, zero_field);
  // pairing with the coefficient vector of (1,1) gives f.(1,1)*|Omega|
  CHECK(b.sum() == doctest::Approx((f.x() + f.y()) * 1.0).epsilon(1e-13));
}

TEST_CASE("benchmark load configuration totals") {
  auto tagger = [](const Vec2& mid) {
    if (std::abs(mid.y()) < 1e-12)
      return mid.x() < 0.0 ? BoundaryTag::Dirichlet : BoundaryTag::Contact;
    return BoundaryTag::Neumann;
  };
  const TriMesh mesh = build_rect_mesh(8, 4, {-1.0, 1.0, 0.0, 1.0}, tagger);
  const LagrangeSpace space(mesh, 1);
  const Vec2 f(0.0, -0.01);
  auto gN = [](const Vec2& x) {
    return std::abs(x.x() - 1.0) < 1e-12 ? Vec2(-0.0275, 0.0) : Vec2::Zero();
  };
  const Eigen::VectorXd b = assemble_load(space, [&](const Vec2&) { return f; }, gN);
  // f.(1,1)*|Omega| + gN.(1,1)*|right side|
  CHECK(b.sum() == doctest::Approx(-0.01 * 2.0 - 0.0275).epsilon(1e-12));
}

TEST_CASE("normal stress of a uniform dilation") {
  const TriMesh mesh = unit_square(2, all_neumann);
  const LagrangeSpace space(mesh, 1);
  const auto coeff = ElasticityCoefficients::plane_strain(1.0, 0.3);
  const DisplacementField u = interpolate_linear(space, Eigen::Matrix2d::Identity(), Vec2::Zero());
  for (int f : mesh.boundary_faces()) {
    const auto tr = normal_stress_trace(u, coeff, f);
    const Vec2 mid = 0.5 * (mesh.vertices[mesh.faces[f].v0] + mesh.vertices[mesh.faces[f].v1]);
    CHECK(tr.sigma_n(mid) ==
          doctest::Approx(2.0 * coeff.lambda + 2.0 * coeff.mu).epsilon(1e-12));
    CHECK(tr.sigma_t(mid).norm() < 1e-12);
  }
}

TEST_CASE("normal stress of a rigid motion vanishes") {
  const TriMesh mesh = unit_square(2, all_neumann);
  const LagrangeSpace space(mesh, 1);
  const auto coeff = ElasticityCoefficients::plane_strain(1.0, 0.3);
  const Eigen::Matrix2d rot = (Eigen::Matrix2d() << 0.0, -1.0, 1.0, 0.0).finished();
  const DisplacementField u = interpolate_linear(space, rot, Vec2(0.3, -0.2));
  for (int f : mesh.boundary_faces()) {
    const auto tr = normal_stress_trace(u, coeff, f);
    const Vec2 mid = 0.5 * (mesh.vertices[mesh.faces[f].v0] + mesh.vertices[mesh.faces[f].v1]);
    CHECK(std::abs(tr.sigma_n(mid)) < 1e-13);
  }
}

TEST_CASE("face trace agrees with a hand-computed element stress") {
  const TriMesh mesh = unit_square(2, all_neumann);
  const LagrangeSpace space(mesh, 1);
  const auto coeff = ElasticityCoefficients::plane_strain(1.0, 0.3);
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  DisplacementField u(space);
  for (int i = 0; i < u.coeffs.size(); ++i) u.coeffs[i] = dist(rng);

  for (int f : mesh.boundary_faces()) {
    const Face& face = mesh.faces[f];
    const int t = face.owner;
    // independent gradient from the hat-function gradients
    Eigen::Matrix2d grad = Eigen::Matrix2d::Zero();
    for (int v : mesh.triangles[t]) {
      const Vec2 g = hat_gradient(mesh, t, v);
      grad.row(0) += u.coeffs[2 * v] * g.transpose();
      grad.row(1) += u.coeffs[2 * v + 1] * g.transpose();
    }
    const Eigen::Matrix2d eps = 0.5 * (grad + grad.transpose());
    const Eigen::Matrix2d s = coeff.stress(eps);
    const double expected = face.normal.dot(s * face.normal);

    const auto tr = normal_stress_trace(u, coeff, f);
    for (double sp : {0.2, 0.8}) {
      const Vec2 x =
          mesh.vertices[face.v0] + sp * (mesh.vertices[face.v1] - mesh.vertices[face.v0]);
      CHECK(tr.sigma_n(x) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("face projection is idempotent on polynomials") {
  const TriMesh mesh = unit_square(1, all_neumann);
  const int f = mesh.boundary_faces()[0];
  auto g = [&](const Vec2& x) { return 1.5 - 2.0 * x.x() + 0.75 * x.y(); };
  const FacePoly p = l2_project_onto_face_polynomials(mesh, f, g, 1);
  // re-projecting the projection changes nothing
  auto pf = [&](const Vec2& x) {
    const Face& face = mesh.faces[f];
    const Vec2 a = mesh.vertices[face.v0];
    const Vec2 b = mesh.vertices[face.v1];
    const double s = (x - a).norm() / (b - a).norm();
    return p.eval(s);
  };
  const FacePoly q = l2_project_onto_face_polynomials(mesh, f, pf, 1);
  CHECK((q.coeffs - p.coeffs).norm() < 1e-12 * (1.0 + p.coeffs.norm()));
}

TEST_CASE("projection of |x| onto linears is the constant one half") {
  // bottom face of a 1x1 mesh of (-1,1)x(0,1) runs from (-1,0) to (1,0)
  auto tagger = [](const Vec2& mid) {
    return std::abs(mid.y()) < 1e-12 ? BoundaryTag::Contact : BoundaryTag::Neumann;
  };
  const TriMesh mesh = build_rect_mesh(1, 1, {-1.0, 1.0, 0.0, 1.0}, tagger);
  int f = -1;
  for (int fid : mesh.boundary_faces())
    if (mesh.faces[fid].tag == BoundaryTag::Contact) f = fid;
  REQUIRE(f >= 0);
  REQUIRE(mesh.faces[f].length == doctest::Approx(2.0));
  auto g = [](const Vec2& x) { return std::abs(x.x()); };
  // two subdivisions put the kink on a piece boundary: integration is exact
  const FacePoly p = l2_project_onto_face_polynomials(mesh, f, g, 1, 10, 2);
  // int |x| dx = 1 and int x|x| dx = 0 on [-1,1], so the projection is 1/2
  for (double s : {0.0, 0.3, 0.5, 0.9})
    CHECK(p.eval(s) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("projection error is orthogonal to the polynomial space") {
  const TriMesh mesh = unit_square(1, all_neumann);
  const int f = mesh.boundary_faces()[0];
  auto g = [](const Vec2& x) { return std::cos(3.0 * x.x() + x.y()); };
  for (int degree : {0, 1, 2}) {
    const FacePoly p = l2_project_onto_face_polynomials(mesh, f, g, degree, 24);
    const Face& face = mesh.faces[f];
    const Vec2 a = mesh.vertices[face.v0];
    const Vec2 b = mesh.vertices[face.v1];
    for (int k = 0; k <= degree; ++k) {
      const double moment = integrate_face(mesh, f, 24, [&](const Vec2& x) {
        const double s = (x - a).norm() / (b - a).norm();
        return (g(x) - p.eval(s)) * face_basis_value(face.length, k, s);
      });
      CHECK(std::abs(moment) < 1e-12);
    }
    // contraction in L2(F)
    const double gnorm = std::sqrt(
        integrate_face(mesh, f, 24, [&](const Vec2& x) { return g(x) * g(x); }));
    CHECK(p.norm() <= gnorm + 1e-12);
  }
}

TEST_CASE("orthonormal face basis has identity Gram matrix") {
  const TriMesh mesh = unit_square(2, all_neumann);
  const int f = mesh.boundary_faces()[1];
  const Face& face = mesh.faces[f];
  const Vec2 a = mesh.vertices[face.v0];
  const Vec2 b = mesh.vertices[face.v1];
  for (int i = 0; i <= 2; ++i)
    for (int j = 0; j <= 2; ++j) {
      const double gram = integrate_face(mesh, f, 12, [&](const Vec2& x) {
        const double s = (x - a).norm() / (b - a).norm();
        return face_basis_value(face.length, i, s) * face_basis_value(face.length, j, s);
      });
      CHECK(gram == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-13));
    }
}

TEST_CASE("Dirichlet solve reproduces a linear manufactured solution") {
  for (int degree : {1, 2}) {
    const TriMesh mesh = unit_square(3, all_dirichlet);
    const LagrangeSpace space(mesh, degree);
    const auto coeff = ElasticityCoefficients::plane_strain(1.0, 0.3);
    Eigen::Matrix2d G;
    G << 0.3, 0.1, -0.2, 0.25;
    auto exact = [&](const Vec2& x) { return Vec2(G * x); };

    SparseMat A = assemble_elastic_stiffness(space, coeff);
    Eigen::VectorXd b = assemble_load(space, zero_field, zero_field);
    const Eigen::VectorXd bc = dirichlet_values(space, exact);
    apply_dirichlet(space, bc, A, b);
    Eigen::SparseLU<SparseMat> lu(A);
    REQUIRE(lu.info() == Eigen::Success);
    const Eigen::VectorXd u = lu.solve(b);

    const DisplacementField uref = interpolate_linear(space, G, Vec2::Zero());
    CHECK((u - uref.coeffs).lpNorm<Eigen::Infinity>() < 1e-11);
  }
}

TEST_CASE("locator finds containing elements") {
  const TriMesh mesh = unit_square(7, all_neumann);
  const MeshLocator loc(mesh);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec2 x(dist(rng), dist(rng));
    double bary[3];
    const int t = loc.locate(x, bary);
    REQUIRE(t >= 0);
    const auto& tri = mesh.triangles[t];
    const Vec2 back = bary[0] * mesh.vertices[tri[0]] + bary[1] * mesh.vertices[tri[1]] +
                      bary[2] * mesh.vertices[tri[2]];
    CHECK((back - x).norm() < 1e-10);
  }
}
