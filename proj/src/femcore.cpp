#include "ce/femcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ce {

ElasticityCoefficients ElasticityCoefficients::plane_strain(double E, double nu) {
  if (E <= 0.0) throw std::invalid_argument("Young modulus must be positive");
  if (nu <= -1.0 || nu >= 0.5)
    throw std::invalid_argument("plane strain requires -1 < nu < 0.5");
  ElasticityCoefficients c;
  c.lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  c.mu = E / (2.0 * (1.0 + nu));
  c.validate();
  return c;
}

void ElasticityCoefficients::validate() const {
  if (mu <= 0.0) throw std::invalid_argument("mu must be positive");
  if (2.0 * lambda + 2.0 * mu <= 0.0)
    throw std::invalid_argument("d*lambda + 2*mu must be positive");
}

LagrangeSpace::LagrangeSpace(const TriMesh& mesh, int degree) : mesh_(&mesh), degree_(degree) {
  if (degree != 1 && degree != 2)
    throw std::invalid_argument("LagrangeSpace: degree must be 1 or 2");
  num_nodes_ = mesh.num_vertices() + (degree == 2 ? mesh.num_faces() : 0);
  dirichlet_mask_.assign(num_nodes_, 0);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.faces[f];
    if (!face.is_boundary() || face.tag != BoundaryTag::Dirichlet) continue;
    dirichlet_mask_[face.v0] = 1;
    dirichlet_mask_[face.v1] = 1;
    if (degree == 2) dirichlet_mask_[mesh.num_vertices() + f] = 1;
  }
  for (int n = 0; n < num_nodes_; ++n)
    if (dirichlet_mask_[n]) dirichlet_nodes_.push_back(n);
}

std::vector<int> LagrangeSpace::element_nodes(int t) const {
  const auto& tri = mesh_->triangles[t];
  std::vector<int> nodes{tri[0], tri[1], tri[2]};
  if (degree_ == 2) {
    const int nv = mesh_->num_vertices();
    for (int k = 0; k < 3; ++k) nodes.push_back(nv + mesh_->tri_faces[t][k]);
  }
  return nodes;
}

Vec2 LagrangeSpace::node_position(int n) const {
  const int nv = mesh_->num_vertices();
  if (n < nv) return mesh_->vertices[n];
  const Face& f = mesh_->faces[n - nv];
  return 0.5 * (mesh_->vertices[f.v0] + mesh_->vertices[f.v1]);
}

void LagrangeSpace::basis_values(const double bary[3], double* vals) const {
  const double l0 = bary[0], l1 = bary[1], l2 = bary[2];
  if (degree_ == 1) {
    vals[0] = l0;
    vals[1] = l1;
    vals[2] = l2;
    return;
  }
  vals[0] = l0 * (2.0 * l0 - 1.0);
  vals[1] = l1 * (2.0 * l1 - 1.0);
  vals[2] = l2 * (2.0 * l2 - 1.0);
  vals[3] = 4.0 * l1 * l2;  // node on face opposite vertex 0
  vals[4] = 4.0 * l2 * l0;
  vals[5] = 4.0 * l0 * l1;
}

void LagrangeSpace::basis_gradients(int t, const double bary[3], Vec2* grads) const {
  Vec2 gl[3];
  for (int k = 0; k < 3; ++k) gl[k] = hat_gradient(*mesh_, t, mesh_->triangles[t][k]);
  if (degree_ == 1) {
    for (int k = 0; k < 3; ++k) grads[k] = gl[k];
    return;
  }
  const double l0 = bary[0], l1 = bary[1], l2 = bary[2];
  grads[0] = (4.0 * l0 - 1.0) * gl[0];
  grads[1] = (4.0 * l1 - 1.0) * gl[1];
  grads[2] = (4.0 * l2 - 1.0) * gl[2];
  grads[3] = 4.0 * (l1 * gl[2] + l2 * gl[1]);
  grads[4] = 4.0 * (l2 * gl[0] + l0 * gl[2]);
  grads[5] = 4.0 * (l0 * gl[1] + l1 * gl[0]);
}

Vec2 DisplacementField::value(int t, const double bary[3]) const {
  const auto nodes = space->element_nodes(t);
  double vals[6];
  space->basis_values(bary, vals);
  Vec2 v = Vec2::Zero();
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    v.x() += vals[k] * coeffs[2 * nodes[k]];
    v.y() += vals[k] * coeffs[2 * nodes[k] + 1];
  }
  return v;
}

Eigen::Matrix2d DisplacementField::gradient(int t, const double bary[3]) const {
  const auto nodes = space->element_nodes(t);
  Vec2 grads[6];
  space->basis_gradients(t, bary, grads);
  Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
  for (std::size_t k = 0; k < nodes.size(); ++k)
    for (int c = 0; c < 2; ++c) g.row(c) += coeffs[2 * nodes[k] + c] * grads[k].transpose();
  return g;
}

Eigen::Matrix2d DisplacementField::strain(int t, const double bary[3]) const {
  const Eigen::Matrix2d g = gradient(t, bary);
  return 0.5 * (g + g.transpose());
}

void barycentric(const TriMesh& mesh, int t, const Vec2& x, double bary[3]) {
  for (int k = 0; k < 3; ++k) bary[k] = hat_value(mesh, t, mesh.triangles[t][k], x);
}

MeshLocator::MeshLocator(const TriMesh& mesh) : mesh_(&mesh) {
  lo_ = Vec2(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
  hi_ = -lo_;
  for (const Vec2& v : mesh.vertices) {
    lo_ = lo_.cwiseMin(v);
    hi_ = hi_.cwiseMax(v);
  }
  const int n = std::max(1, static_cast<int>(std::sqrt(mesh.num_triangles() / 2.0)));
  nx_ = ny_ = n;
  bins_.assign(nx_ * ny_, {});
  const Vec2 span = (hi_ - lo_).cwiseMax(1e-300);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    Vec2 tlo = lo_ + span, thi = lo_;
    for (int v : mesh.triangles[t]) {
      tlo = tlo.cwiseMin(mesh.vertices[v]);
      thi = thi.cwiseMax(mesh.vertices[v]);
    }
    const int i0 = std::clamp(static_cast<int>((tlo.x() - lo_.x()) / span.x() * nx_), 0, nx_ - 1);
    const int i1 = std::clamp(static_cast<int>((thi.x() - lo_.x()) / span.x() * nx_), 0, nx_ - 1);
    const int j0 = std::clamp(static_cast<int>((tlo.y() - lo_.y()) / span.y() * ny_), 0, ny_ - 1);
    const int j1 = std::clamp(static_cast<int>((thi.y() - lo_.y()) / span.y() * ny_), 0, ny_ - 1);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) bins_[j * nx_ + i].push_back(t);
  }
}

int MeshLocator::locate(const Vec2& x, double bary[3]) const {
  const Vec2 span = (hi_ - lo_).cwiseMax(1e-300);
  const int i = std::clamp(static_cast<int>((x.x() - lo_.x()) / span.x() * nx_), 0, nx_ - 1);
  const int j = std::clamp(static_cast<int>((x.y() - lo_.y()) / span.y() * ny_), 0, ny_ - 1);
  int best = -1;
  double best_def = std::numeric_limits<double>::max();
  auto consider = [&](int t) {
    double b[3];
    barycentric(*mesh_, t, x, b);
    const double deficit = std::max({-b[0], -b[1], -b[2], 0.0});
    if (deficit < best_def) {
      best_def = deficit;
      best = t;
      bary[0] = b[0];
      bary[1] = b[1];
      bary[2] = b[2];
    }
  };
  for (int t : bins_[j * nx_ + i]) {
    consider(t);
    if (best_def < 1e-12) break;
  }
  if (best_def > 1e-9) {  // outside this bin's candidates: search neighbors, then all
    for (int dj = -1; dj <= 1 && best_def > 1e-12; ++dj)
      for (int di = -1; di <= 1 && best_def > 1e-12; ++di) {
        const int ii = i + di, jj = j + dj;
        if (ii < 0 || ii >= nx_ || jj < 0 || jj >= ny_ || (di == 0 && dj == 0)) continue;
        for (int t : bins_[jj * nx_ + ii]) {
          consider(t);
          if (best_def < 1e-12) break;
        }
      }
    if (best_def > 1e-9)
      for (int t = 0; t < mesh_->num_triangles() && best_def > 1e-12; ++t) consider(t);
  }
  // clamp barycentrics for points marginally outside
  for (int k = 0; k < 3; ++k) bary[k] = std::max(bary[k], 0.0);
  const double s = bary[0] + bary[1] + bary[2];
  for (int k = 0; k < 3; ++k) bary[k] /= s;
  return best;
}

Vec2 eval_displacement(const DisplacementField& u, const MeshLocator& loc, const Vec2& x) {
  double bary[3];
  const int t = loc.locate(x, bary);
  return u.value(t, bary);
}

Eigen::Matrix2d eval_gradient(const DisplacementField& u, const MeshLocator& loc, const Vec2& x) {
  double bary[3];
  const int t = loc.locate(x, bary);
  return u.gradient(t, bary);
}

SparseMat assemble_elastic_stiffness(const LagrangeSpace& space,
                                     const ElasticityCoefficients& coeff) {
  const TriMesh& mesh = space.mesh();
  const int nen = space.nodes_per_element();
  const int qdeg = 2 * space.degree() + 2;
  const TriQuadrature& rule = triangle_rule(qdeg);
  std::vector<Triplet> trip;
  trip.reserve(mesh.num_triangles() * nen * nen * 4);

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto nodes = space.element_nodes(t);
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(2 * nen, 2 * nen);
    for (const auto& qp : rule.points) {
      const double bary[3] = {qp.l0, qp.l1, qp.l2};
      Vec2 grads[6];
      space.basis_gradients(t, bary, grads);
      const double w = 2.0 * mesh.area[t] * qp.w;
      for (int n = 0; n < nen; ++n)
        for (int m = 0; m < nen; ++m) {
          const double gg = grads[n].dot(grads[m]);
          for (int c = 0; c < 2; ++c)
            for (int d = 0; d < 2; ++d) {
              double v = coeff.lambda * grads[n][c] * grads[m][d] +
                         coeff.mu * grads[n][d] * grads[m][c];
              if (c == d) v += coeff.mu * gg;
              local(2 * n + c, 2 * m + d) += w * v;
            }
        }
    }
    for (int n = 0; n < nen; ++n)
      for (int m = 0; m < nen; ++m)
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d)
            trip.emplace_back(2 * nodes[n] + c, 2 * nodes[m] + d, local(2 * n + c, 2 * m + d));
  }

  SparseMat A(space.num_dofs(), space.num_dofs());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

Eigen::VectorXd assemble_load(const LagrangeSpace& space, const VectorField& body_force,
                              const VectorField& neumann_traction) {
  const TriMesh& mesh = space.mesh();
  const int nen = space.nodes_per_element();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(space.num_dofs());

  const TriQuadrature& rule = triangle_rule(2 * space.degree() + 2);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto nodes = space.element_nodes(t);
    for (const auto& qp : rule.points) {
      const double bary[3] = {qp.l0, qp.l1, qp.l2};
      double vals[6];
      space.basis_values(bary, vals);
      const Vec2 x = qp.l0 * mesh.vertices[mesh.triangles[t][0]] +
                     qp.l1 * mesh.vertices[mesh.triangles[t][1]] +
                     qp.l2 * mesh.vertices[mesh.triangles[t][2]];
      const Vec2 f = body_force(x);
      const double w = 2.0 * mesh.area[t] * qp.w;
      for (int n = 0; n < nen; ++n) {
        b[2 * nodes[n]] += w * vals[n] * f.x();
        b[2 * nodes[n] + 1] += w * vals[n] * f.y();
      }
    }
  }

  const SegQuadrature& frule = segment_rule(2 * space.degree() + 2);
  for (int fid = 0; fid < mesh.num_faces(); ++fid) {
    const Face& face = mesh.faces[fid];
    if (!face.is_boundary() || face.tag != BoundaryTag::Neumann) continue;
    const int t = face.owner;
    const auto nodes = space.element_nodes(t);
    const Vec2& a = mesh.vertices[face.v0];
    const Vec2& bb = mesh.vertices[face.v1];
    for (std::size_t i = 0; i < frule.points.size(); ++i) {
      const Vec2 x = a + frule.points[i] * (bb - a);
      double bary[3];
      barycentric(mesh, t, x, bary);
      double vals[6];
      space.basis_values(bary, vals);
      const Vec2 g = neumann_traction(x);
      const double w = face.length * frule.weights[i];
      for (int n = 0; n < nen; ++n) {
        b[2 * nodes[n]] += w * vals[n] * g.x();
        b[2 * nodes[n] + 1] += w * vals[n] * g.y();
      }
    }
  }
  return b;
}

Eigen::VectorXd dirichlet_values(const LagrangeSpace& space, const VectorField& g) {
  Eigen::VectorXd vals = Eigen::VectorXd::Zero(space.num_dofs());
  for (int n : space.dirichlet_nodes()) {
    const Vec2 v = g(space.node_position(n));
    vals[2 * n] = v.x();
    vals[2 * n + 1] = v.y();
  }
  return vals;
}

void apply_dirichlet(const LagrangeSpace& space, const Eigen::VectorXd& values, SparseMat& A,
                     Eigen::VectorXd& b) {
  std::vector<char> fixed(space.num_dofs(), 0);
  for (int n : space.dirichlet_nodes()) fixed[2 * n] = fixed[2 * n + 1] = 1;

  std::vector<Triplet> trip;
  trip.reserve(A.nonZeros() + space.num_dofs());
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMat::InnerIterator it(A, k); it; ++it) {
      const int i = static_cast<int>(it.row());
      const int j = static_cast<int>(it.col());
      if (fixed[i]) continue;
      if (fixed[j]) {
        b[i] -= it.value() * values[j];
        continue;
      }
      trip.emplace_back(i, j, it.value());
    }
  for (int d = 0; d < space.num_dofs(); ++d)
    if (fixed[d]) {
      trip.emplace_back(d, d, 1.0);
      b[d] = values[d];
    }
  SparseMat out(A.rows(), A.cols());
  out.setFromTriplets(trip.begin(), trip.end());
  A.swap(out);
}

double FaceStressTrace::sigma_n(const Vec2& x) const {
  double bary[3];
  barycentric(*mesh, owner, x, bary);
  const Eigen::Matrix2d s = coeff.stress(u->strain(owner, bary));
  return normal.dot(s * normal);
}

Vec2 FaceStressTrace::sigma_t(const Vec2& x) const {
  double bary[3];
  barycentric(*mesh, owner, x, bary);
  const Eigen::Matrix2d s = coeff.stress(u->strain(owner, bary));
  const Vec2 tr = s * normal;
  return tr - normal.dot(tr) * normal;
}

FaceStressTrace normal_stress_trace(const DisplacementField& u,
                                    const ElasticityCoefficients& coeff, int face) {
  const TriMesh& mesh = u.space->mesh();
  if (!mesh.faces[face].is_boundary())
    throw std::invalid_argument("normal_stress_trace: not a boundary face");
  FaceStressTrace tr;
  tr.mesh = &mesh;
  tr.u = &u;
  tr.coeff = coeff;
  tr.face = face;
  tr.owner = mesh.faces[face].owner;
  tr.normal = mesh.faces[face].normal;
  return tr;
}

double face_basis_value(double face_length, int k, double s) {
  const double x = 2.0 * s - 1.0;
  double p0 = 1.0, p1 = x;
  double p = (k == 0) ? p0 : p1;
  for (int n = 1; n < k; ++n) {
    p = ((2.0 * n + 1.0) * x * p1 - n * p0) / (n + 1.0);
    p0 = p1;
    p1 = p;
  }
  return p * std::sqrt((2.0 * k + 1.0) / face_length);
}

double FacePoly::eval(double s) const {
  double v = 0.0;
  for (int k = 0; k < coeffs.size(); ++k) v += coeffs[k] * face_basis_value(length, k, s);
  return v;
}

FacePoly l2_project_onto_face_polynomials(const TriMesh& mesh, int face, const ScalarField& g,
                                          int degree, int quad_degree, int subdivisions) {
  const Face& f = mesh.faces[face];
  const Vec2& a = mesh.vertices[f.v0];
  const Vec2& b = mesh.vertices[f.v1];
  const SegQuadrature& rule = segment_rule(std::max(quad_degree, 2 * degree));
  FacePoly poly;
  poly.face = face;
  poly.length = f.length;
  poly.coeffs = Eigen::VectorXd::Zero(degree + 1);
  for (int piece = 0; piece < subdivisions; ++piece)
    for (std::size_t i = 0; i < rule.points.size(); ++i) {
      const double s = (piece + rule.points[i]) / subdivisions;
      const double gv = g(a + s * (b - a));
      const double w = f.length * rule.weights[i] / subdivisions;
      for (int k = 0; k <= degree; ++k)
        poly.coeffs[k] += w * gv * face_basis_value(f.length, k, s);
    }
  return poly;
}

}  // namespace ce
