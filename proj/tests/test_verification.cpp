#include "ce/verification.hpp"

#include <cmath>
#include <random>

#include <doctest.h>

using namespace ce;

namespace {

CaseSetup benchmark_case() {
  CaseSetup cs;
  cs.rect = {-1.0, 1.0, 0.0, 1.0};
  cs.tagger = [](const Vec2& mid) {
    if (std::abs(mid.y()) < 1e-12)
      return mid.x() < 0.0 ? BoundaryTag::Dirichlet : BoundaryTag::Contact;
    return BoundaryTag::Neumann;
  };
  cs.coeff = ElasticityCoefficients::plane_strain(1.0, 0.3);
  cs.body_force = [](const Vec2&) { return Vec2(0.0, -0.01); };
  cs.neumann = [](const Vec2& x) {
    return std::abs(x.x() - 1.0) < 1e-12 ? Vec2(-0.0275, 0.0) : Vec2::Zero();
  };
  cs.gamma0 = 100.0;
  return cs;
}

}  // namespace

TEST_CASE("lifting of the zero state with zero loads vanishes") {
  CaseSetup cs = benchmark_case();
  cs.body_force = [](const Vec2&) { return Vec2::Zero(); };
  cs.neumann = [](const Vec2&) { return Vec2::Zero(); };
  const Discretization disc = discretize(cs, build_rect_mesh(4, 2, cs.rect, cs.tagger), 1);
  const Problem problem = disc.problem(cs);
  NitscheConfig cfg;
  cfg.gamma0 = cs.gamma0;
  cfg.delta = 0.01;
  DisplacementField u(*disc.space);
  for (auto e : {LiftingEnrichment::SameSpace, LiftingEnrichment::DegreePlusOneSameMesh,
                 LiftingEnrichment::RefinedMesh})
    CHECK(lift_residual(problem, u, cfg, e).value < 1e-13);
}

TEST_CASE("Galerkin orthogonality: same-space lifting of the converged state") {
  const CaseSetup cs = benchmark_case();
  const Discretization disc = discretize(cs, build_rect_mesh(8, 4, cs.rect, cs.tagger), 1);
  const Problem problem = disc.problem(cs);
  NitscheConfig cfg;
  cfg.gamma0 = cs.gamma0;
  cfg.delta = 1.0;
  cfg.newton_tol = 1e-13;
  const DisplacementField u = continuation_solve(problem, cfg, 1e-12);
  NitscheConfig tiny = cfg;
  tiny.delta = 1e-12;
  const double same = lift_residual(problem, u, tiny, LiftingEnrichment::SameSpace).value;
  const double rich =
      lift_residual(problem, u, tiny, LiftingEnrichment::DegreePlusOneSameMesh).value;
  CHECK(same < 1e-9);
  CHECK(rich > 100.0 * same);  // the enriched space sees the actual residual
}

TEST_CASE("lifting grows monotonically with the enrichment") {
  const CaseSetup cs = benchmark_case();
  const Discretization disc = discretize(cs, build_rect_mesh(8, 4, cs.rect, cs.tagger), 1);
  const Problem problem = disc.problem(cs);
  NitscheConfig cfg;
  cfg.gamma0 = cs.gamma0;
  cfg.delta = 0.01;
  DisplacementField u0(*disc.space);
  const auto [u, trace] = newton_solve(problem, u0, cfg);
  const double same_mesh =
      lift_residual(problem, u, cfg, LiftingEnrichment::DegreePlusOneSameMesh).value;
  const double refined = lift_residual(problem, u, cfg, LiftingEnrichment::RefinedMesh).value;
  CHECK(same_mesh > 0.0);
  CHECK(refined >= same_mesh * (1.0 - 1e-10));
}

TEST_CASE("lifted residual stays below the guaranteed bound") {
  const CaseSetup cs = benchmark_case();
  const Discretization disc = discretize(cs, build_rect_mesh(8, 4, cs.rect, cs.tagger), 1);
  const Problem problem = disc.problem(cs);
  NitscheConfig cfg;
  cfg.gamma0 = cs.gamma0;
  cfg.delta = 0.0625;
  DisplacementField u0(*disc.space);
  const auto [u, trace] = newton_solve(problem, u0, cfg);
  const EquilibratedStress stress = construct_sigma_split(problem, u, u, cfg);
  const EstimatorReport rep = compute_report(problem, u, stress, cfg);
  const double bound = theorem_upper_bound(rep);
  for (auto e : {LiftingEnrichment::DegreePlusOneSameMesh, LiftingEnrichment::RefinedMesh})
    CHECK(lift_residual(problem, u, cfg, e).value <= bound);
}

TEST_CASE("error norms vanish when the state equals the reference") {
  const CaseSetup cs = benchmark_case();
  ReferenceSolution ref = reference_solution(cs, 8, 4, 1, 1.0, 1e-4, 1e-12);
  const ErrorNorms err = error_norms(ref.u, ref, cs.coeff);
  CHECK(err.h1 < 1e-12);
  CHECK(err.energy < 1e-12);
}

TEST_CASE("energy norm is controlled by the gradient seminorm") {
  const CaseSetup cs = benchmark_case();
  const Discretization disc = discretize(cs, build_rect_mesh(5, 3, cs.rect, cs.tagger), 1);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const double bound_factor = std::sqrt(2.0 * cs.coeff.lambda + 2.0 * cs.coeff.mu);
  for (int trial = 0; trial < 5; ++trial) {
    DisplacementField v(*disc.space);
    for (int i = 0; i < v.coeffs.size(); ++i) v.coeffs[i] = dist(rng);
    double energy2 = 0.0, semi2 = 0.0;
    const TriQuadrature& rule = triangle_rule(4);
    const TriMesh& mesh = *disc.mesh;
    for (int t = 0; t < mesh.num_triangles(); ++t)
      for (const auto& qp : rule.points) {
        const double bary[3] = {qp.l0, qp.l1, qp.l2};
        const double w = 2.0 * mesh.area[t] * qp.w;
        const Eigen::Matrix2d g = v.gradient(t, bary);
        const Eigen::Matrix2d eps = 0.5 * (g + g.transpose());
        energy2 +=
            w * (cs.coeff.lambda * g.trace() * g.trace() + 2.0 * cs.coeff.mu * eps.squaredNorm());
        semi2 += w * g.squaredNorm();
      }
    CHECK(std::sqrt(energy2) <= bound_factor * std::sqrt(semi2) + 1e-12);
  }
}

TEST_CASE("synthetic power law is recovered exactly") {
  std::vector<double> dofs, errs;
  for (int k = 1; k <= 6; ++k) {
    const double n = 100.0 * std::pow(4.0, k);
    dofs.push_back(n);
    errs.push_back(std::pow(n, -0.5));
  }
  CHECK(convergence_rate(dofs, errs) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK_THROWS(convergence_rate({1.0, 2.0, 3.0}, {1.0, 0.5, 0.25}));
}

TEST_CASE("coarse reference solves agree in the energy norm") {
  const CaseSetup cs = benchmark_case();
  auto energy_of = [&](const ReferenceSolution& ref) {
    const TriMesh& mesh = *ref.disc.mesh;
    double e2 = 0.0;
    const TriQuadrature& rule = triangle_rule(6);
    for (int t = 0; t < mesh.num_triangles(); ++t)
      for (const auto& qp : rule.points) {
        const double bary[3] = {qp.l0, qp.l1, qp.l2};
        const double w = 2.0 * mesh.area[t] * qp.w;
        const Eigen::Matrix2d g = ref.u.gradient(t, bary);
        const Eigen::Matrix2d eps = 0.5 * (g + g.transpose());
        e2 += w * (cs.coeff.lambda * g.trace() * g.trace() +
                   2.0 * cs.coeff.mu * eps.squaredNorm());
      }
    return std::sqrt(e2);
  };
  const ReferenceSolution coarse = reference_solution(cs, 16, 8, 2, 1.0, 1e-4);
  const ReferenceSolution fine = reference_solution(cs, 32, 16, 2, 1.0, 1e-4);
  const double ec = energy_of(coarse), ef = energy_of(fine);
  CHECK(std::abs(ec - ef) / ef < 0.01);
}

TEST_CASE("contact interval of a coarse reference is sane") {
  const CaseSetup cs = benchmark_case();
  const ReferenceSolution ref = reference_solution(cs, 32, 16, 2, 1.0, 1e-4);
  const auto [lo, hi] = contact_interval(ref, cs.coeff, cs.gamma0);
  CHECK(lo > 0.05);
  CHECK(hi < 0.75);
  CHECK(hi > lo);
  // inside the detected interval the gap is closed; outside it opens (the
  // body lifts off the foundation, u_y > 0)
  const TriMesh& mesh = *ref.disc.mesh;
  double max_abs_inside = 0.0, max_gap_outside = 0.0;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const Vec2& x = mesh.vertices[v];
    if (std::abs(x.y()) > 1e-12 || x.x() < 0.02) continue;
    double bary[3];
    const int t = ref.locator->locate(x, bary);
    const double uy = ref.u.value(t, bary).y();
    if (x.x() > lo + 0.02 && x.x() < hi - 0.02)
      max_abs_inside = std::max(max_abs_inside, std::abs(uy));
    else if (x.x() < lo - 0.05 || x.x() > hi + 0.05)
      max_gap_outside = std::max(max_gap_outside, uy);
  }
  CHECK(max_abs_inside < 1e-4);
  CHECK(max_gap_outside > 1e-4);
}

TEST_CASE("diagnostics flag the degenerate case and order the surrogates") {
  const CaseSetup cs = benchmark_case();
  ReferenceSolution ref = reference_solution(cs, 16, 8, 2, 1.0, 1e-4);

  // degenerate: compare the reference against itself
  const Problem ref_problem = ref.disc.problem(cs);
  NitscheConfig cfg;
  cfg.gamma0 = cs.gamma0;
  cfg.delta = 1e-4;
  const DiagnosticPair dg = diagnostics(ref_problem, ref.u, 1.0, ref, cfg);
  CHECK(dg.degenerate);

  // a genuine coarse state
  const Discretization disc = discretize(cs, build_rect_mesh(8, 4, cs.rect, cs.tagger), 1);
  const Problem problem = disc.problem(cs);
  NitscheConfig ccfg;
  ccfg.gamma0 = cs.gamma0;
  ccfg.delta = 0.01;
  DisplacementField u0(*disc.space);
  const auto [u, trace] = newton_solve(problem, u0, ccfg);
  const EquilibratedStress stress = construct_sigma_split(problem, u, u, ccfg);
  const EstimatorReport rep = compute_report(problem, u, stress, ccfg);
  const DiagnosticPair d = diagnostics(problem, u, rep.global.tot, ref, ccfg);
  CHECK(!d.degenerate);
  CHECK(d.U >= std::sqrt(2.0 * cs.coeff.lambda + 4.0 * cs.coeff.mu) / std::sqrt(cs.coeff.mu) *
                   d.L * (1.0 - 1e-12));
  CHECK(d.i_eff_low == doctest::Approx(rep.global.tot / d.L));
  CHECK(d.i_eff_up == doctest::Approx(rep.global.tot / d.U));
}
