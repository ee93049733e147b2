#include "ce/nitsche.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/SparseLU>

namespace ce {

namespace {
constexpr int kFaceQuadDegree = 10;  // the projection kink demands over-integration
}

void NitscheConfig::validate() const {
  if (gamma0 <= 0.0) throw std::invalid_argument("nitsche: gamma0 must be positive");
  if (delta <= 0.0) throw std::invalid_argument("nitsche: delta must be positive");
  if (newton_tol <= 0.0) throw std::invalid_argument("nitsche: newton_tol must be positive");
  if (newton_max_iters < 1) throw std::invalid_argument("nitsche: newton_max_iters must be >= 1");
}

RegProj reg_proj(double x, double delta) {
  if (delta <= 0.0) throw std::invalid_argument("reg_proj: delta must be positive");
  if (x <= -delta) return {x, 1.0};
  if (x >= delta) return {0.0, 0.0};
  return {-x * x / (4.0 * delta) + 0.5 * x - 0.25 * delta, -x / (2.0 * delta) + 0.5};
}

double p1gamma(const DisplacementField& u, const ElasticityCoefficients& coeff, double gamma0,
               int face, const Vec2& x) {
  const TriMesh& mesh = u.space->mesh();
  const Face& f = mesh.faces[face];
  if (!f.is_boundary() || f.tag != BoundaryTag::Contact)
    throw std::invalid_argument("p1gamma: not a contact face");
  const int t = f.owner;
  double bary[3];
  barycentric(mesh, t, x, bary);
  const Eigen::Matrix2d s = coeff.stress(u.strain(t, bary));
  const double sigma_n = f.normal.dot(s * f.normal);
  const double un = u.value(t, bary).dot(f.normal);
  return sigma_n - gamma0 / mesh.h_T[t] * un;
}

namespace {

// Per-quadrature-point data of the contact term; shared by the matrix,
// the rhs and the residuals.
template <typename Body>
void for_each_contact_qp(const Problem& problem, Body&& body) {
  const TriMesh& mesh = *problem.mesh;
  const LagrangeSpace& space = *problem.space;
  const SegQuadrature& rule = segment_rule(kFaceQuadDegree);
  const int nen = space.nodes_per_element();
  for (int fid = 0; fid < mesh.num_faces(); ++fid) {
    const Face& face = mesh.faces[fid];
    if (!face.is_boundary() || face.tag != BoundaryTag::Contact) continue;
    const int t = face.owner;
    const auto nodes = space.element_nodes(t);
    const Vec2& a = mesh.vertices[face.v0];
    const Vec2& b = mesh.vertices[face.v1];
    const Vec2 n = face.normal;
    for (std::size_t i = 0; i < rule.points.size(); ++i) {
      const Vec2 x = a + rule.points[i] * (b - a);
      const double w = face.length * rule.weights[i];
      double bary[3];
      barycentric(mesh, t, x, bary);
      double vals[6];
      Vec2 grads[6];
      space.basis_values(bary, vals);
      space.basis_gradients(t, bary, grads);
      body(fid, t, nodes, nen, x, bary, vals, grads, n, w);
    }
  }
}

// P applied to basis function (node k, component c) at a prepared point.
inline double p_of_basis(const ElasticityCoefficients& coeff, double gamma, const Vec2& n,
                         double val, const Vec2& grad, int c) {
  const double sigma_n = coeff.lambda * grad[c] + 2.0 * coeff.mu * n[c] * n.dot(grad);
  return sigma_n - gamma * val * n[c];
}

}  // namespace

void assemble_newton_system(const Problem& problem, const SparseMat& stiffness,
                            const Eigen::VectorXd& load, const DisplacementField& u_prev,
                            const NitscheConfig& cfg, SparseMat& A, Eigen::VectorXd& b) {
  const LagrangeSpace& space = *problem.space;
  b = load;
  std::vector<Triplet> ctrip;

  for_each_contact_qp(problem, [&](int, int t, const std::vector<int>& nodes, int nen,
                                   const Vec2& x, const double bary[3], const double* vals,
                                   const Vec2* grads, const Vec2& n, double w) {
    const double gamma = cfg.gamma0 / problem.mesh->h_T[t];
    const Eigen::Matrix2d su = problem.coeff.stress(u_prev.strain(t, bary));
    const double p_prev = n.dot(su * n) - gamma * u_prev.value(t, bary).dot(n);
    const RegProj rp = reg_proj(p_prev, cfg.delta);
    (void)x;
    for (int i = 0; i < nen; ++i)
      for (int ci = 0; ci < 2; ++ci) {
        const double vi_n = vals[i] * n[ci];
        if (vi_n == 0.0 && rp.derivative == 0.0) continue;
        b[2 * nodes[i] + ci] += w * (rp.value - rp.derivative * p_prev) * vi_n;
        if (rp.derivative == 0.0) continue;
        for (int j = 0; j < nen; ++j)
          for (int cj = 0; cj < 2; ++cj) {
            const double pj = p_of_basis(problem.coeff, gamma, n, vals[j], grads[j], cj);
            // moved to the left-hand side, hence the minus sign
            ctrip.emplace_back(2 * nodes[i] + ci, 2 * nodes[j] + cj,
                               -w * rp.derivative * pj * vi_n);
          }
      }
  });

  SparseMat C(space.num_dofs(), space.num_dofs());
  C.setFromTriplets(ctrip.begin(), ctrip.end());
  A = stiffness + C;
  const Eigen::VectorXd bc = dirichlet_values(space, problem.dirichlet_or_zero());
  apply_dirichlet(space, bc, A, b);
}

namespace {

Eigen::VectorXd residual_impl(const Problem& problem, const SparseMat& stiffness,
                              const Eigen::VectorXd& load, const DisplacementField& u,
                              const NitscheConfig& cfg, bool regularized) {
  Eigen::VectorXd r = stiffness * u.coeffs - load;
  for_each_contact_qp(problem, [&](int, int t, const std::vector<int>& nodes, int nen,
                                   const Vec2&, const double bary[3], const double* vals,
                                   const Vec2*, const Vec2& n, double w) {
    const double gamma = cfg.gamma0 / problem.mesh->h_T[t];
    const Eigen::Matrix2d su = problem.coeff.stress(u.strain(t, bary));
    const double p = n.dot(su * n) - gamma * u.value(t, bary).dot(n);
    const double proj = regularized ? reg_proj(p, cfg.delta).value : proj_neg(p);
    for (int i = 0; i < nen; ++i)
      for (int ci = 0; ci < 2; ++ci)
        r[2 * nodes[i] + ci] -= w * proj * vals[i] * n[ci];
  });
  for (int n : problem.space->dirichlet_nodes()) {
    r[2 * n] = 0.0;
    r[2 * n + 1] = 0.0;
  }
  return r;
}

int count_active_points(const Problem& problem, const DisplacementField& u,
                        const NitscheConfig& cfg) {
  int active = 0;
  for_each_contact_qp(problem, [&](int, int t, const std::vector<int>&, int, const Vec2&,
                                   const double bary[3], const double*, const Vec2*,
                                   const Vec2& n, double) {
    const double gamma = cfg.gamma0 / problem.mesh->h_T[t];
    const Eigen::Matrix2d su = problem.coeff.stress(u.strain(t, bary));
    const double p = n.dot(su * n) - gamma * u.value(t, bary).dot(n);
    if (p < cfg.delta) ++active;
  });
  return active;
}

}  // namespace

Eigen::VectorXd residual_regularized(const Problem& problem, const SparseMat& stiffness,
                                     const Eigen::VectorXd& load, const DisplacementField& u,
                                     const NitscheConfig& cfg) {
  return residual_impl(problem, stiffness, load, u, cfg, true);
}

Eigen::VectorXd residual_exact(const Problem& problem, const SparseMat& stiffness,
                               const Eigen::VectorXd& load, const DisplacementField& u,
                               const NitscheConfig& cfg) {
  return residual_impl(problem, stiffness, load, u, cfg, false);
}

std::pair<DisplacementField, NewtonTrace> newton_solve(const Problem& problem,
                                                       const DisplacementField& u0,
                                                       const NitscheConfig& cfg,
                                                       const NewtonStop& stop) {
  cfg.validate();
  const LagrangeSpace& space = *problem.space;
  const SparseMat K = assemble_elastic_stiffness(space, problem.coeff);
  const Eigen::VectorXd load = assemble_load(space, problem.body_force, problem.neumann);

  DisplacementField u_prev = u0;
  DisplacementField u(space);
  NewtonTrace trace;
  Eigen::SparseLU<SparseMat> solver;

  for (int k = 1; k <= cfg.newton_max_iters; ++k) {
    SparseMat A;
    Eigen::VectorXd b;
    assemble_newton_system(problem, K, load, u_prev, cfg, A, b);
    solver.compute(A);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("newton_solve: singular linearized system");
    u.coeffs = solver.solve(b);

    NewtonTrace::Iterate it;
    it.k = k;
    const double un = u.coeffs.norm();
    it.increment_rel = (u.coeffs - u_prev.coeffs).norm() / (un > 0.0 ? un : 1.0);
    it.residual_norm = residual_regularized(problem, K, load, u, cfg).norm();
    it.active_points = count_active_points(problem, u, cfg);
    trace.iterates.push_back(it);

    const bool external_stop = stop && stop(u, u_prev, k);
    u_prev = u;
    if (external_stop || it.increment_rel <= cfg.newton_tol) {
      trace.converged = true;
      break;
    }
  }
  return {u, trace};
}

DisplacementField continuation_solve(const Problem& problem, const NitscheConfig& cfg,
                                     double delta_final) {
  NitscheConfig round = cfg;
  DisplacementField u(*problem.space);
  u.coeffs = dirichlet_values(*problem.space, problem.dirichlet_or_zero());
  for (;;) {
    auto [sol, trace] = newton_solve(problem, u, round);
    u = sol;
    if (round.delta <= delta_final) break;
    round.delta = std::max(0.5 * round.delta, delta_final);
  }
  return u;
}

}  // namespace ce
