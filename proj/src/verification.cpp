#include "ce/verification.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/SparseCholesky>

namespace ce {

namespace {
constexpr int kFaceQuad = 10;

// Coarse contact face containing a point (for gamma weights and trace data).
int parent_contact_face(const TriMesh& coarse, const Vec2& x) {
  for (int fid = 0; fid < coarse.num_faces(); ++fid) {
    const Face& f = coarse.faces[fid];
    if (!f.is_boundary() || f.tag != BoundaryTag::Contact) continue;
    const Vec2& a = coarse.vertices[f.v0];
    const Vec2& b = coarse.vertices[f.v1];
    const Vec2 d = b - a;
    const double t = (x - a).dot(d) / d.squaredNorm();
    const double dist = (x - (a + t * d)).norm();
    if (t > -1e-10 && t < 1.0 + 1e-10 && dist < 1e-10 * (1.0 + f.length)) return fid;
  }
  return -1;
}

}  // namespace

LiftingResult lift_residual(const Problem& problem, const DisplacementField& u_k,
                            const NitscheConfig& cfg, LiftingEnrichment enrichment) {
  const TriMesh& coarse = *problem.mesh;
  const int p = problem.space->degree();

  std::shared_ptr<TriMesh> fine_mesh;
  int degree = p;
  switch (enrichment) {
    case LiftingEnrichment::SameSpace:
      degree = p;
      break;
    case LiftingEnrichment::DegreePlusOneSameMesh:
      degree = std::min(p + 1, 2);
      break;
    case LiftingEnrichment::RefinedMesh:
      degree = std::min(p + 1, 2);
      fine_mesh = std::make_shared<TriMesh>(uniform_refine(coarse));
      break;
  }
  const TriMesh& mesh = fine_mesh ? *fine_mesh : coarse;
  const LagrangeSpace space(mesh, degree);
  const MeshLocator coarse_loc(coarse);

  const int nen = space.nodes_per_element();
  const TriQuadrature& vrule = triangle_rule(std::max(2 * degree + 2, 6));
  const SegQuadrature& frule = segment_rule(kFaceQuad);

  // residual functional and the lifting form
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(space.num_dofs());
  std::vector<Triplet> trip;

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto nodes = space.element_nodes(t);
    const auto& tri = mesh.triangles[t];
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(2 * nen, 2 * nen);
    for (const auto& qp : vrule.points) {
      const double bary[3] = {qp.l0, qp.l1, qp.l2};
      const Vec2 x = qp.l0 * mesh.vertices[tri[0]] + qp.l1 * mesh.vertices[tri[1]] +
                     qp.l2 * mesh.vertices[tri[2]];
      const double w = 2.0 * mesh.area[t] * qp.w;
      double vals[6];
      Vec2 grads[6];
      space.basis_values(bary, vals);
      space.basis_gradients(t, bary, grads);

      // vector Laplacian of the lifting form
      for (int i = 0; i < nen; ++i)
        for (int j = 0; j < nen; ++j) {
          const double gg = w * grads[i].dot(grads[j]);
          for (int c = 0; c < 2; ++c) local(2 * i + c, 2 * j + c) += gg;
        }

      // residual: (f, v) - (sigma(u_k), eps(v))
      double cbary[3];
      const int ct = coarse_loc.locate(x, cbary);
      const Eigen::Matrix2d sig = problem.coeff.stress(u_k.strain(ct, cbary));
      const Vec2 f = problem.body_force(x);
      for (int i = 0; i < nen; ++i)
        for (int c = 0; c < 2; ++c) {
          double a_term = 0.0;  // sigma : eps(phi) = row c of sigma times grad
          a_term = sig(c, 0) * grads[i][0] + sig(c, 1) * grads[i][1];
          rhs[2 * nodes[i] + c] += w * (f[c] * vals[i] - a_term);
        }
    }
    for (int i = 0; i < nen; ++i)
      for (int j = 0; j < nen; ++j)
        for (int c = 0; c < 2; ++c)
          trip.emplace_back(2 * nodes[i] + c, 2 * nodes[j] + c, local(2 * i + c, 2 * j + c));
  }

  for (int fid = 0; fid < mesh.num_faces(); ++fid) {
    const Face& face = mesh.faces[fid];
    if (!face.is_boundary()) continue;
    const int t = face.owner;
    const auto nodes = space.element_nodes(t);
    const Vec2& a = mesh.vertices[face.v0];
    const Vec2& b = mesh.vertices[face.v1];
    if (face.tag == BoundaryTag::Neumann) {
      for (std::size_t i = 0; i < frule.points.size(); ++i) {
        const Vec2 x = a + frule.points[i] * (b - a);
        const double w = face.length * frule.weights[i];
        double bary[3];
        barycentric(mesh, t, x, bary);
        double vals[6];
        space.basis_values(bary, vals);
        const Vec2 g = problem.neumann(x);
        for (int k = 0; k < nen; ++k)
          for (int c = 0; c < 2; ++c) rhs[2 * nodes[k] + c] += w * g[c] * vals[k];
      }
    } else if (face.tag == BoundaryTag::Contact) {
      const int parent = fine_mesh ? parent_contact_face(coarse, 0.5 * (a + b)) : fid;
      if (parent < 0) throw std::runtime_error("lift_residual: missing parent contact face");
      const double hF = coarse.faces[parent].length;
      for (std::size_t i = 0; i < frule.points.size(); ++i) {
        const Vec2 x = a + frule.points[i] * (b - a);
        const double w = face.length * frule.weights[i];
        double bary[3];
        barycentric(mesh, t, x, bary);
        double vals[6];
        space.basis_values(bary, vals);
        const double proj = proj_neg(p1gamma(u_k, problem.coeff, cfg.gamma0, parent, x));
        // residual contact term and the 1/h_F face mass of the lifting form
        for (int k = 0; k < nen; ++k) {
          for (int c = 0; c < 2; ++c) {
            rhs[2 * nodes[k] + c] += w * proj * vals[k] * face.normal[c];
            for (int m = 0; m < nen; ++m)
              trip.emplace_back(2 * nodes[k] + c, 2 * nodes[m] + c,
                                w / hF * vals[k] * vals[m]);
          }
        }
      }
    }
  }

  SparseMat A(space.num_dofs(), space.num_dofs());
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd b = rhs;
  apply_dirichlet(space, Eigen::VectorXd::Zero(space.num_dofs()), A, b);

  Eigen::SimplicialLDLT<SparseMat> solver(A);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("lift_residual: factorization failed");
  const Eigen::VectorXd z = solver.solve(b);
  LiftingResult out;
  out.value = std::sqrt(std::max(z.dot(b), 0.0));
  return out;
}

Discretization discretize(const CaseSetup& cs, TriMesh mesh, int degree) {
  Discretization d;
  d.mesh = std::make_shared<TriMesh>(std::move(mesh));
  d.space = std::make_shared<LagrangeSpace>(*d.mesh, degree);
  (void)cs;
  return d;
}

ReferenceSolution reference_solution(const CaseSetup& cs, int nx, int ny, int degree,
                                     double delta_init, double delta_final,
                                     double newton_tol) {
  ReferenceSolution ref;
  ref.disc = discretize(cs, build_rect_mesh(nx, ny, cs.rect, cs.tagger), degree);
  const Problem problem = ref.disc.problem(cs);
  NitscheConfig cfg;
  cfg.gamma0 = cs.gamma0;
  cfg.delta = delta_init;
  cfg.newton_tol = newton_tol;
  cfg.newton_max_iters = 100;
  ref.u = continuation_solve(problem, cfg, delta_final);
  ref.locator = std::make_shared<MeshLocator>(*ref.disc.mesh);
  return ref;
}

namespace {

DisplacementField interpolate_onto(const DisplacementField& u, const LagrangeSpace& target) {
  const MeshLocator loc(u.space->mesh());
  DisplacementField out(target);
  for (int n = 0; n < target.num_nodes(); ++n) {
    const Vec2 v = eval_displacement(u, loc, target.node_position(n));
    out.coeffs[2 * n] = v.x();
    out.coeffs[2 * n + 1] = v.y();
  }
  return out;
}

}  // namespace

ErrorNorms error_norms(const DisplacementField& u, const ReferenceSolution& ref,
                       const ElasticityCoefficients& coeff) {
  const TriMesh& mesh = *ref.disc.mesh;
  const DisplacementField ui = interpolate_onto(u, *ref.disc.space);
  DisplacementField e(*ref.disc.space);
  e.coeffs = ref.u.coeffs - ui.coeffs;

  const TriQuadrature& rule = triangle_rule(2 * ref.disc.space->degree() + 2);
  double h1 = 0.0, energy = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    for (const auto& qp : rule.points) {
      const double bary[3] = {qp.l0, qp.l1, qp.l2};
      const double w = 2.0 * mesh.area[t] * qp.w;
      const Vec2 val = e.value(t, bary);
      const Eigen::Matrix2d g = e.gradient(t, bary);
      const Eigen::Matrix2d eps = 0.5 * (g + g.transpose());
      h1 += w * (val.squaredNorm() + g.squaredNorm());
      energy += w * (coeff.lambda * g.trace() * g.trace() + 2.0 * coeff.mu * eps.squaredNorm());
    }
  }
  return {std::sqrt(h1), std::sqrt(energy)};
}

std::pair<double, double> contact_interval(const ReferenceSolution& ref,
                                           const ElasticityCoefficients& coeff,
                                           double gamma0) {
  (void)gamma0;
  const TriMesh& mesh = *ref.disc.mesh;
  double ymin = 1e300, ymax = -1e300;
  for (const Vec2& v : mesh.vertices) {
    ymin = std::min(ymin, v.y());
    ymax = std::max(ymax, v.y());
  }
  const double tol = 1e-6 * (ymax - ymin);

  struct CFace {
    double x0, x1;
    double un;       // face-average normal displacement
    double sn;       // face-average normal stress
  };
  std::vector<CFace> cfaces;
  const SegQuadrature& rule = segment_rule(6);
  for (int fid = 0; fid < mesh.num_faces(); ++fid) {
    const Face& face = mesh.faces[fid];
    if (!face.is_boundary() || face.tag != BoundaryTag::Contact) continue;
    const Vec2& a = mesh.vertices[face.v0];
    const Vec2& b = mesh.vertices[face.v1];
    CFace cf;
    cf.x0 = std::min(a.x(), b.x());
    cf.x1 = std::max(a.x(), b.x());
    cf.un = 0.0;
    cf.sn = 0.0;
    for (std::size_t i = 0; i < rule.points.size(); ++i) {
      const Vec2 x = a + rule.points[i] * (b - a);
      double bary[3];
      barycentric(mesh, face.owner, x, bary);
      cf.un += rule.weights[i] * ref.u.value(face.owner, bary).dot(face.normal);
      const Eigen::Matrix2d s = coeff.stress(ref.u.strain(face.owner, bary));
      cf.sn += rule.weights[i] * face.normal.dot(s * face.normal);
    }
    cfaces.push_back(cf);
  }
  std::sort(cfaces.begin(), cfaces.end(),
            [](const CFace& a, const CFace& b) { return a.x0 < b.x0; });

  double lo = 1e300, hi = -1e300;
  for (std::size_t i = 0; i < cfaces.size(); ++i) {
    const bool contact = std::abs(cfaces[i].un) < tol && cfaces[i].sn < 0.0;
    if (!contact) continue;
    double left = cfaces[i].x0;
    double right = cfaces[i].x1;
    // interpolate the gap to the tolerance level within the open neighbors
    if (i > 0 && std::abs(cfaces[i - 1].un) >= tol) {
      const double g0 = std::abs(cfaces[i - 1].un), g1 = std::abs(cfaces[i].un);
      const double frac = (g0 - tol) / std::max(g0 - g1, 1e-300);
      left = cfaces[i - 1].x0 +
             std::clamp(frac, 0.0, 1.0) * (cfaces[i].x0 - cfaces[i - 1].x0);
    }
    if (i + 1 < cfaces.size() && std::abs(cfaces[i + 1].un) >= tol) {
      const double g0 = std::abs(cfaces[i + 1].un), g1 = std::abs(cfaces[i].un);
      const double frac = (g0 - tol) / std::max(g0 - g1, 1e-300);
      right = cfaces[i + 1].x1 -
              std::clamp(frac, 0.0, 1.0) * (cfaces[i + 1].x1 - cfaces[i].x1);
    }
    lo = std::min(lo, left);
    hi = std::max(hi, right);
  }
  if (lo > hi) return {0.0, 0.0};
  return {lo, hi};
}

double convergence_rate(const std::vector<double>& dofs, const std::vector<double>& errors) {
  if (dofs.size() != errors.size() || dofs.size() < 4)
    throw std::invalid_argument("convergence_rate: need at least 4 samples");
  const std::size_t n = dofs.size();
  const std::size_t window = (n + 1) / 2;
  const std::size_t start = n - window;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = start; i < n; ++i) {
    const double x = std::log(dofs[i]);
    const double y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(window);
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return -slope;
}

DiagnosticPair diagnostics(const Problem& problem, const DisplacementField& u,
                           double eta_tot, const ReferenceSolution& ref,
                           const NitscheConfig& cfg) {
  DiagnosticPair d;
  const ErrorNorms err = error_norms(u, ref, problem.coeff);
  const double mu = problem.coeff.mu;
  const double lambda = problem.coeff.lambda;
  d.L = std::sqrt(mu) * err.energy;

  // face term of the upper surrogate on the state's contact faces
  const TriMesh& mesh = *problem.mesh;
  const SegQuadrature& rule = segment_rule(kFaceQuad);
  double face_sum = 0.0;
  for (int fid = 0; fid < mesh.num_faces(); ++fid) {
    const Face& face = mesh.faces[fid];
    if (!face.is_boundary() || face.tag != BoundaryTag::Contact) continue;
    const Vec2& a = mesh.vertices[face.v0];
    const Vec2& b = mesh.vertices[face.v1];
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.points.size(); ++i) {
      const Vec2 x = a + rule.points[i] * (b - a);
      double rbary[3];
      const int rt = ref.locator->locate(x, rbary);
      const Eigen::Matrix2d sig_ref = problem.coeff.stress(ref.u.strain(rt, rbary));
      const double sn_ref = face.normal.dot(sig_ref * face.normal);
      const double proj = proj_neg(p1gamma(u, problem.coeff, cfg.gamma0, fid, x));
      acc += face.length * rule.weights[i] * (sn_ref - proj) * (sn_ref - proj);
    }
    face_sum += face.length * acc;
  }
  d.U = std::sqrt(2.0 * lambda + 4.0 * mu) * err.energy + std::sqrt(face_sum);

  if (err.energy < 1e-14) {
    d.degenerate = true;
    return d;
  }
  d.i_eff_low = eta_tot / d.L;
  d.i_eff_up = eta_tot / d.U;
  return d;
}

}  // namespace ce
