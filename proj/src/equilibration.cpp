#include "ce/equilibration.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace ce {

namespace {
constexpr int kFaceQuad = 10;

int exponent_table(int q, int k, int& a, int& b) {
  // monomials ordered by total degree: (0,0),(1,0),(0,1),(2,0),(1,1),(0,2),...
  int idx = 0;
  for (int d = 0; d <= q; ++d)
    for (int j = 0; j <= d; ++j) {
      if (idx == k) {
        a = d - j;
        b = j;
        return idx;
      }
      ++idx;
    }
  throw std::logic_error("monomial index out of range");
}
}  // namespace

void Monomials::values(int q, const Vec2& xhat, double* out) {
  int idx = 0;
  double px[8], py[8];
  px[0] = py[0] = 1.0;
  for (int d = 1; d <= q; ++d) {
    px[d] = px[d - 1] * xhat.x();
    py[d] = py[d - 1] * xhat.y();
  }
  for (int d = 0; d <= q; ++d)
    for (int j = 0; j <= d; ++j) out[idx++] = px[d - j] * py[j];
}

void Monomials::gradients(int q, const Vec2& xhat, Vec2* out) {
  int idx = 0;
  for (int d = 0; d <= q; ++d)
    for (int j = 0; j <= d; ++j) {
      const int a = d - j, b = j;
      double gx = 0.0, gy = 0.0;
      if (a > 0) gx = a * std::pow(xhat.x(), a - 1) * std::pow(xhat.y(), b);
      if (b > 0) gy = b * std::pow(xhat.x(), a) * std::pow(xhat.y(), b - 1);
      out[idx++] = Vec2(gx, gy);
    }
}

Vec2 element_center(const TriMesh& mesh, int t) { return mesh.barycenter(t); }
double element_scale(const TriMesh& mesh, int t) { return mesh.h_T[t]; }

RigidModes rigid_modes(const TriMesh& mesh, const VertexPatch& patch) {
  RigidModes modes;
  double total_area = 0.0;
  Vec2 centroid = Vec2::Zero();
  for (int t : patch.elements) {
    total_area += mesh.area[t];
    centroid += mesh.area[t] * mesh.barycenter(t);
  }
  modes.center = centroid / total_area;

  Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
  for (int t : patch.elements) {
    const TriQuadrature& rule = triangle_rule(2);
    const auto& tri = mesh.triangles[t];
    for (const auto& qp : rule.points) {
      const Vec2 x = qp.l0 * mesh.vertices[tri[0]] + qp.l1 * mesh.vertices[tri[1]] +
                     qp.l2 * mesh.vertices[tri[2]];
      const Vec2 rot(x.y() - modes.center.y(), -(x.x() - modes.center.x()));
      const Vec2 base[3] = {Vec2(1.0, 0.0), Vec2(0.0, 1.0), rot};
      const double w = 2.0 * mesh.area[t] * qp.w;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) gram(i, j) += w * base[i].dot(base[j]);
    }
  }
  const Eigen::Matrix3d L = gram.llt().matrixL();
  modes.coeff = L.inverse();
  return modes;
}

Vec2 RigidCompatibilityData::eval_y(const Vec2& x) const {
  Vec2 v = Vec2::Zero();
  for (int i = 0; i < 3; ++i) v += y[i] * modes.eval(i, x);
  return v;
}

Vec2 RigidCompatibilityData::eval_ytilde(const Vec2& x) const {
  Vec2 v = Vec2::Zero();
  for (int i = 0; i < 3; ++i) v += ytilde[i] * modes.eval(i, x);
  return v;
}

PatchSystem::PatchSystem(const TriMesh& mesh, const VertexPatch& patch, int q)
    : mesh_(&mesh), patch_(patch), q_(q) {
  if (q < 1) throw std::invalid_argument("PatchSystem: q must be >= 1");
  const int nel = num_elements();
  const int nq = Monomials::dim(q);
  const int nu = Monomials::dim(q - 1);

  std::map<int, int> pos;
  for (int e = 0; e < nel; ++e) pos[patch_.elements[e]] = e;
  centers_.resize(nel);
  scales_.resize(nel);
  for (int e = 0; e < nel; ++e) {
    centers_[e] = element_center(mesh, patch_.elements[e]);
    scales_[e] = element_scale(mesh, patch_.elements[e]);
  }

  // classify the patch faces that carry trace constraints
  std::map<int, bool> seen;
  for (int t : patch_.elements)
    for (int f : mesh.tri_faces[t]) {
      if (seen.count(f)) continue;
      seen[f] = true;
      const Face& face = mesh.faces[f];
      const bool owner_in = pos.count(face.owner) > 0;
      const bool neigh_in = !face.is_boundary() && pos.count(face.neighbor) > 0;
      CFace cf;
      cf.face = f;
      if (owner_in && neigh_in) {
        cf.kind = CFace::Kind::Interface;
        cf.elem_pos = pos[face.owner];
        cf.elem_neg = pos[face.neighbor];
        cf.normal = face.normal;
      } else if (!face.is_boundary()) {
        cf.kind = CFace::Kind::ZeroTrace;  // patch lid inside the domain
        cf.elem_pos = owner_in ? pos[face.owner] : pos[face.neighbor];
        cf.normal = mesh.normal_out_of(f, patch_.elements[cf.elem_pos]);
      } else {
        const bool center = (face.v0 == patch_.vertex || face.v1 == patch_.vertex);
        cf.elem_pos = pos[face.owner];
        cf.normal = face.normal;
        if (!center) {
          // hat function vanishes identically here; pin the trace to zero
          cf.kind = CFace::Kind::ZeroTrace;
        } else if (face.tag == BoundaryTag::Dirichlet) {
          continue;  // free trace
        } else if (face.tag == BoundaryTag::Neumann) {
          cf.kind = CFace::Kind::Neumann;
        } else {
          cf.kind = CFace::Kind::Contact;
        }
      }
      cfaces_.push_back(cf);
    }

  use_rm_ = patch_.kind != VertexPatch::Kind::DirichletTouching;
  modes_ = rigid_modes(mesh, patch_);

  const int rows_per_face = 2 * (q + 1);
  n_s_ = nel * 4 * nq;
  n_r_ = nel * 2 * nu;
  n_m_ = nel * nu;
  n_c_ = static_cast<int>(cfaces_.size()) * rows_per_face;
  n_total_ = n_s_ + n_r_ + n_m_ + n_c_ + (use_rm_ ? 3 : 0);

  auto s_off = [&](int e) { return e * 4 * nq; };
  auto r_off = [&](int e) { return n_s_ + e * 2 * nu; };
  auto m_off = [&](int e) { return n_s_ + n_r_ + e * nu; };
  const int c_base = n_s_ + n_r_ + n_m_;
  const int beta_off = c_base + n_c_;

  matrix_ = Eigen::MatrixXd::Zero(n_total_, n_total_);
  const TriQuadrature& vrule = triangle_rule(std::max(2 * q + 2, 4));

  for (int e = 0; e < nel; ++e) {
    const int te = patch_.elements[e];
    const auto& tri = mesh.triangles[te];
    Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(nq, nq);
    Eigen::MatrixXd divb = Eigen::MatrixXd::Zero(2 * nu, 2 * nq);  // (l, c*nq+j) per row i
    Eigen::MatrixXd gmom = Eigen::MatrixXd::Zero(3, 2 * nu);
    std::vector<double> mv(nq);
    std::vector<Vec2> mg(nq);
    for (const auto& qp : vrule.points) {
      const Vec2 x = qp.l0 * mesh.vertices[tri[0]] + qp.l1 * mesh.vertices[tri[1]] +
                     qp.l2 * mesh.vertices[tri[2]];
      const Vec2 xhat = (x - centers_[e]) / scales_[e];
      Monomials::values(q, xhat, mv.data());
      Monomials::gradients(q, xhat, mg.data());
      const double w = 2.0 * mesh.area[te] * qp.w;
      for (int j = 0; j < nq; ++j)
        for (int jp = 0; jp <= j; ++jp) {
          const double v = w * mv[j] * mv[jp];
          mass(j, jp) += v;
          if (jp != j) mass(jp, j) += v;
        }
      for (int l = 0; l < nu; ++l)
        for (int c = 0; c < 2; ++c)
          for (int j = 0; j < nq; ++j)
            divb(l + 0, c * nq + j) += w * mv[l] * mg[j][c] / scales_[e];
      if (use_rm_)
        for (int i = 0; i < 3; ++i) {
          const Vec2 z = modes_.eval(i, x);
          for (int l = 0; l < nu; ++l)
            for (int ic = 0; ic < 2; ++ic) gmom(i, ic * nu + l) += w * z[ic] * mv[l];
        }
    }

    // mass block, one copy per tensor entry
    for (int rc = 0; rc < 4; ++rc)
      matrix_.block(s_off(e) + rc * nq, s_off(e) + rc * nq, nq, nq) += mass;

    // (r, div tau): row component i couples tensor entries (i, c)
    for (int i = 0; i < 2; ++i)
      for (int l = 0; l < nu; ++l)
        for (int c = 0; c < 2; ++c)
          for (int j = 0; j < nq; ++j) {
            const double v = divb(l, c * nq + j);
            const int row = r_off(e) + i * nu + l;
            const int col = s_off(e) + (i * 2 + c) * nq + j;
            matrix_(row, col) += v;
            matrix_(col, row) += v;
          }

    // weak symmetry against mu = s(x) J, J = [[0,1],[-1,0]]
    for (int l = 0; l < nu; ++l)
      for (int j = 0; j < nq; ++j) {
        const int row = m_off(e) + l;
        const int col01 = s_off(e) + 1 * nq + j;  // entry (0,1)
        const int col10 = s_off(e) + 2 * nq + j;  // entry (1,0)
        matrix_(row, col01) += mass(l, j);
        matrix_(col01, row) += mass(l, j);
        matrix_(row, col10) -= mass(l, j);
        matrix_(col10, row) -= mass(l, j);
      }

    if (use_rm_)
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 2 * nu; ++k) {
          matrix_(beta_off + i, r_off(e) + k) += gmom(i, k);
          matrix_(r_off(e) + k, beta_off + i) += gmom(i, k);
        }
  }

  // face-moment rows: trace values and interface continuity
  const SegQuadrature& frule = segment_rule(kFaceQuad);
  for (std::size_t ci = 0; ci < cfaces_.size(); ++ci) {
    const CFace& cf = cfaces_[ci];
    const Face& face = mesh.faces[cf.face];
    const Vec2& fa = mesh.vertices[face.v0];
    const Vec2& fb = mesh.vertices[face.v1];
    const int row0 = c_base + static_cast<int>(ci) * rows_per_face;

    auto add_side = [&](int epos, double sign) {
      std::vector<double> mv(nq);
      for (std::size_t iq = 0; iq < frule.points.size(); ++iq) {
        const double s = frule.points[iq];
        const Vec2 x = fa + s * (fb - fa);
        const double w = face.length * frule.weights[iq];
        const Vec2 xhat = (x - centers_[epos]) / scales_[epos];
        Monomials::values(q, xhat, mv.data());
        for (int k = 0; k <= q; ++k) {
          const double bk = face_basis_value(face.length, k, s);
          for (int dir = 0; dir < 2; ++dir) {
            const int row = row0 + k * 2 + dir;
            for (int c = 0; c < 2; ++c)
              for (int j = 0; j < nq; ++j) {
                const int col = s_off(epos) + (dir * 2 + c) * nq + j;
                const double v = sign * w * mv[j] * cf.normal[c] * bk;
                matrix_(row, col) += v;
                matrix_(col, row) += v;
              }
          }
        }
      }
    };
    add_side(cf.elem_pos, 1.0);
    if (cf.kind == CFace::Kind::Interface) add_side(cf.elem_neg, -1.0);
  }

  lu_.compute(matrix_);
  if (!lu_.isInvertible())
    throw std::runtime_error("patch saddle system is singular (space construction bug)");
}

Eigen::VectorXd PatchSystem::assemble_rhs(const Sources& src) const {
  const TriMesh& mesh = *mesh_;
  const int nel = num_elements();
  const int nq = Monomials::dim(q_);
  const int nu = Monomials::dim(q_ - 1);
  auto s_off = [&](int e) { return e * 4 * nq; };
  auto r_off = [&](int e) { return n_s_ + e * 2 * nu; };
  const int c_base = n_s_ + n_r_ + n_m_;
  const int rows_per_face = 2 * (q_ + 1);

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_total_);
  const TriQuadrature& vrule = triangle_rule(std::max(2 * q_ + 2, kFaceQuad));
  std::vector<double> mv(nq);
  for (int e = 0; e < nel; ++e) {
    if (!src.tau && !src.vol) break;
    const int te = patch_.elements[e];
    const auto& tri = mesh.triangles[te];
    for (const auto& qp : vrule.points) {
      const Vec2 x = qp.l0 * mesh.vertices[tri[0]] + qp.l1 * mesh.vertices[tri[1]] +
                     qp.l2 * mesh.vertices[tri[2]];
      const Vec2 xhat = (x - centers_[e]) / scales_[e];
      Monomials::values(q_, xhat, mv.data());
      const double w = 2.0 * mesh.area[te] * qp.w;
      if (src.tau) {
        const Eigen::Matrix2d tv = src.tau(te, x);
        for (int r = 0; r < 2; ++r)
          for (int c = 0; c < 2; ++c)
            for (int j = 0; j < nq; ++j)
              rhs[s_off(e) + (r * 2 + c) * nq + j] += w * tv(r, c) * mv[j];
      }
      if (src.vol) {
        const Vec2 vv = src.vol(te, x);
        for (int i = 0; i < 2; ++i)
          for (int l = 0; l < nu; ++l) rhs[r_off(e) + i * nu + l] += w * vv[i] * mv[l];
      }
    }
  }

  const SegQuadrature& frule = segment_rule(kFaceQuad);
  for (std::size_t ci = 0; ci < cfaces_.size(); ++ci) {
    const CFace& cf = cfaces_[ci];
    if (cf.kind == CFace::Kind::Interface || cf.kind == CFace::Kind::ZeroTrace) continue;
    const Face& face = mesh.faces[cf.face];
    const Vec2& fa = mesh.vertices[face.v0];
    const Vec2& fb = mesh.vertices[face.v1];
    const int row0 = c_base + static_cast<int>(ci) * rows_per_face;
    for (std::size_t iq = 0; iq < frule.points.size(); ++iq) {
      const double s = frule.points[iq];
      const Vec2 x = fa + s * (fb - fa);
      const double w = face.length * frule.weights[iq];
      Vec2 data = Vec2::Zero();
      if (cf.kind == CFace::Kind::Neumann && src.neumann) data = src.neumann(cf.face, x);
      if (cf.kind == CFace::Kind::Contact && src.contact)
        data = src.contact(cf.face, x) * cf.normal;
      for (int k = 0; k <= q_; ++k) {
        const double bk = face_basis_value(face.length, k, s);
        for (int dir = 0; dir < 2; ++dir) rhs[row0 + k * 2 + dir] += w * data[dir] * bk;
      }
    }
  }
  return rhs;
}

std::vector<Eigen::VectorXd> PatchSystem::solve(const Sources& src) const {
  const Eigen::VectorXd rhs = assemble_rhs(src);
  const Eigen::VectorXd sol = lu_.solve(rhs);
  const int nq = Monomials::dim(q_);
  std::vector<Eigen::VectorXd> out(num_elements());
  for (int e = 0; e < num_elements(); ++e) out[e] = sol.segment(e * 4 * nq, 4 * nq);
  return out;
}

void PatchSystem::dump(const Sources& src, const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open dump file: " + path);
  f.precision(17);
  const Eigen::VectorXd rhs = assemble_rhs(src);
  f << "rows " << n_total_ << "\n";
  for (int i = 0; i < n_total_; ++i) {
    for (int j = 0; j < n_total_; ++j) f << matrix_(i, j) << (j + 1 < n_total_ ? ' ' : '\n');
  }
  f << "rhs\n";
  for (int i = 0; i < n_total_; ++i) f << rhs[i] << "\n";
}

Eigen::VectorXd EquilibratedStress::total(int elem) const {
  Eigen::VectorXd sum = comp[0][elem];
  if (has_split) {
    sum += comp[1][elem];
    sum += comp[2][elem];
  }
  return sum;
}

Eigen::Matrix2d EquilibratedStress::eval_coeffs(const Eigen::VectorXd& coeffs, int q,
                                                const Vec2& center, double scale,
                                                const Vec2& x) {
  const int nq = Monomials::dim(q);
  double mv[16];
  Monomials::values(q, (x - center) / scale, mv);
  Eigen::Matrix2d out = Eigen::Matrix2d::Zero();
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      for (int j = 0; j < nq; ++j) out(r, c) += coeffs[(r * 2 + c) * nq + j] * mv[j];
  return out;
}

Eigen::Matrix2d EquilibratedStress::eval(Component c, int elem, const Vec2& x) const {
  return eval_coeffs(comp[c][elem], q, element_center(*mesh, elem), element_scale(*mesh, elem),
                     x);
}

Eigen::Matrix2d EquilibratedStress::eval_total(int elem, const Vec2& x) const {
  return eval_coeffs(total(elem), q, element_center(*mesh, elem), element_scale(*mesh, elem), x);
}

namespace {
Vec2 divergence_of(const Eigen::VectorXd& coeffs, int q, const Vec2& center, double scale,
                   const Vec2& x) {
  const int nq = Monomials::dim(q);
  Vec2 mg[16];
  Monomials::gradients(q, (x - center) / scale, mg);
  Vec2 out = Vec2::Zero();
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      for (int j = 0; j < nq; ++j) out[r] += coeffs[(r * 2 + c) * nq + j] * mg[j][c] / scale;
  return out;
}
}  // namespace

Vec2 EquilibratedStress::divergence_total(int elem, const Vec2& x) const {
  return divergence_of(total(elem), q, element_center(*mesh, elem), element_scale(*mesh, elem),
                       x);
}

Vec2 EquilibratedStress::divergence(Component c, int elem, const Vec2& x) const {
  return divergence_of(comp[c][elem], q, element_center(*mesh, elem), element_scale(*mesh, elem),
                       x);
}

namespace {

// Scalar contact multipliers of the three components at a face point.
struct ContactScalars {
  std::function<double(int, const Vec2&)> dis, reg, lin;
};

ContactScalars make_contact_scalars(const Problem& problem, const DisplacementField& u_k,
                                    const DisplacementField& u_prev, const NitscheConfig& cfg,
                                    bool split) {
  ContactScalars cs;
  const ElasticityCoefficients coeff = problem.coeff;
  const double gamma0 = cfg.gamma0;
  const double delta = cfg.delta;
  cs.dis = [&u_k, coeff, gamma0](int face, const Vec2& x) {
    return proj_neg(p1gamma(u_k, coeff, gamma0, face, x));
  };
  if (!split) return cs;
  cs.reg = [&u_k, coeff, gamma0, delta](int face, const Vec2& x) {
    const double p = p1gamma(u_k, coeff, gamma0, face, x);
    return reg_proj(p, delta).value - proj_neg(p);
  };
  cs.lin = [&u_k, &u_prev, coeff, gamma0, delta](int face, const Vec2& x) {
    const double pk = p1gamma(u_k, coeff, gamma0, face, x);
    const double pp = p1gamma(u_prev, coeff, gamma0, face, x);
    const RegProj rp = reg_proj(pp, delta);
    return rp.value + rp.derivative * (pk - pp) - reg_proj(pk, delta).value;
  };
  return cs;
}

}  // namespace

RigidCompatibilityData compatibility_shift(const Problem& problem, const VertexPatch& patch,
                                           const DisplacementField& u_k,
                                           const DisplacementField& u_prev,
                                           const NitscheConfig& cfg, bool split) {
  const TriMesh& mesh = *problem.mesh;
  RigidCompatibilityData data;
  data.modes = rigid_modes(mesh, patch);
  if (patch.kind == VertexPatch::Kind::Interior) return data;

  const ContactScalars cs = make_contact_scalars(problem, u_k, u_prev, cfg, split);
  const int a = patch.vertex;

  // volume part of the first shift
  for (int t : patch.elements) {
    const Vec2 gpsi = hat_gradient(mesh, t, a);
    const TriQuadrature& rule = triangle_rule(2 * u_k.space->degree() + 2);
    const auto& tri = mesh.triangles[t];
    for (const auto& qp : rule.points) {
      const double bary[3] = {qp.l0, qp.l1, qp.l2};
      const Vec2 x = qp.l0 * mesh.vertices[tri[0]] + qp.l1 * mesh.vertices[tri[1]] +
                     qp.l2 * mesh.vertices[tri[2]];
      const double w = 2.0 * mesh.area[t] * qp.w;
      const double psi = hat_value(mesh, t, a, x);
      const Eigen::Matrix2d sig = problem.coeff.stress(u_k.strain(t, bary));
      const Vec2 val = -psi * problem.body_force(x) + sig * gpsi;
      for (int i = 0; i < 3; ++i) data.y[i] += w * val.dot(data.modes.eval(i, x));
    }
  }

  const SegQuadrature& frule = segment_rule(kFaceQuad);
  auto face_term = [&](int fid, int owner, const std::function<Vec2(const Vec2&)>& g,
                       Eigen::Vector3d& acc, double sign) {
    const Face& face = mesh.faces[fid];
    const Vec2& fa = mesh.vertices[face.v0];
    const Vec2& fb = mesh.vertices[face.v1];
    for (std::size_t iq = 0; iq < frule.points.size(); ++iq) {
      const Vec2 x = fa + frule.points[iq] * (fb - fa);
      const double w = face.length * frule.weights[iq];
      const double psi = hat_value(mesh, owner, a, x);
      const Vec2 val = psi * g(x);
      for (int i = 0; i < 3; ++i) acc[i] += sign * w * val.dot(data.modes.eval(i, x));
    }
  };

  for (const auto& bf : patch.neumann_faces) {
    if (!bf.contains_center) continue;
    face_term(
        bf.face, mesh.faces[bf.face].owner, [&](const Vec2& x) { return problem.neumann(x); },
        data.y, -1.0);
  }
  for (const auto& bf : patch.contact_faces) {
    if (!bf.contains_center) continue;
    const Vec2 n = mesh.faces[bf.face].normal;
    face_term(
        bf.face, mesh.faces[bf.face].owner,
        [&](const Vec2& x) { return Vec2(cs.dis(bf.face, x) * n); }, data.y, -1.0);
    if (split)
      face_term(
          bf.face, mesh.faces[bf.face].owner,
          [&](const Vec2& x) { return Vec2(cs.reg(bf.face, x) * n); }, data.ytilde, -1.0);
  }
  return data;
}

PatchCache build_patch_cache(const TriMesh& mesh, int q) {
  PatchCache cache;
  cache.patches.reserve(mesh.num_vertices());
  cache.systems.reserve(mesh.num_vertices());
  for (int a = 0; a < mesh.num_vertices(); ++a) {
    cache.patches.push_back(vertex_patch(mesh, a));
    cache.systems.push_back(std::make_unique<PatchSystem>(mesh, cache.patches.back(), q));
  }
  return cache;
}

namespace {

EquilibratedStress run_constructions(const Problem& problem, const DisplacementField& u_k,
                                     const DisplacementField& u_prev, const NitscheConfig& cfg,
                                     bool split, const PatchCache* cache) {
  const TriMesh& mesh = *problem.mesh;
  const LagrangeSpace& space = *problem.space;
  const int q = space.degree();
  const int nq = Monomials::dim(q);

  EquilibratedStress stress;
  stress.mesh = &mesh;
  stress.q = q;
  stress.has_split = split;
  const int ncomp = split ? 3 : 1;
  for (int c = 0; c < 3; ++c)
    stress.comp[c].assign(mesh.num_triangles(), Eigen::VectorXd::Zero(4 * nq));

  const ContactScalars cs = make_contact_scalars(problem, u_k, u_prev, cfg, split);

  std::unique_ptr<PatchCache> local;
  if (!cache) {
    local = std::make_unique<PatchCache>(build_patch_cache(mesh, q));
    cache = local.get();
  }

  for (int a = 0; a < mesh.num_vertices(); ++a) {
    const VertexPatch& patch = cache->patches[a];
    const PatchSystem& sys = *cache->systems[a];
    // The compatibility shifts restore solvability of the patch problems
    // without a free Dirichlet face; on Dirichlet-touching patches the test
    // space is unconstrained and applying them would inject reaction-sized
    // spurious sources into the reg/lin components.
    RigidCompatibilityData shift;
    if (split && patch.kind == VertexPatch::Kind::Boundary)
      shift = compatibility_shift(problem, patch, u_k, u_prev, cfg, true);

    auto sigma_u = [&](int elem, const Vec2& x) {
      double bary[3];
      barycentric(mesh, elem, x, bary);
      return Eigen::Matrix2d(problem.coeff.stress(u_k.strain(elem, bary)));
    };
    auto psi = [&](int elem, const Vec2& x) { return hat_value(mesh, elem, a, x); };

    for (int c = 0; c < ncomp; ++c) {
      PatchSystem::Sources src;
      if (c == EquilibratedStress::Dis) {
        src.tau = [&](int elem, const Vec2& x) {
          return Eigen::Matrix2d(psi(elem, x) * sigma_u(elem, x));
        };
        if (split)
          src.vol = [&](int elem, const Vec2& x) {
            const Vec2 base = -psi(elem, x) * problem.body_force(x) +
                              sigma_u(elem, x) * hat_gradient(mesh, elem, a);
            return Vec2(base - shift.eval_y(x));
          };
        else
          src.vol = [&](int elem, const Vec2& x) {
            return Vec2(-psi(elem, x) * problem.body_force(x) +
                        sigma_u(elem, x) * hat_gradient(mesh, elem, a));
          };
        src.contact = [&](int face, const Vec2& x) {
          return psi(mesh.faces[face].owner, x) * cs.dis(face, x);
        };
        src.neumann = [&](int face, const Vec2& x) {
          return Vec2(psi(mesh.faces[face].owner, x) * problem.neumann(x));
        };
      } else if (c == EquilibratedStress::Reg) {
        src.vol = [&](int, const Vec2& x) { return Vec2(-shift.eval_ytilde(x)); };
        src.contact = [&](int face, const Vec2& x) {
          return psi(mesh.faces[face].owner, x) * cs.reg(face, x);
        };
      } else {
        src.vol = [&](int, const Vec2& x) {
          return Vec2(shift.eval_y(x) + shift.eval_ytilde(x));
        };
        src.contact = [&](int face, const Vec2& x) {
          return psi(mesh.faces[face].owner, x) * cs.lin(face, x);
        };
      }
      const auto local = sys.solve(src);
      for (int e = 0; e < sys.num_elements(); ++e)
        stress.comp[c][patch.elements[e]] += local[e];
    }
  }
  return stress;
}

}  // namespace

EquilibratedStress construct_sigma(const Problem& problem, const DisplacementField& u,
                                   const NitscheConfig& cfg, const PatchCache* cache) {
  return run_constructions(problem, u, u, cfg, false, cache);
}

EquilibratedStress construct_sigma_split(const Problem& problem, const DisplacementField& u_k,
                                         const DisplacementField& u_prev,
                                         const NitscheConfig& cfg, const PatchCache* cache) {
  return run_constructions(problem, u_k, u_prev, cfg, true, cache);
}

ReconstructionAudit audit_reconstruction(const Problem& problem, const DisplacementField& u_k,
                                         const DisplacementField& u_prev,
                                         const NitscheConfig& cfg,
                                         const EquilibratedStress& stress) {
  const TriMesh& mesh = *problem.mesh;
  const int q = stress.q;
  const int p = problem.space->degree();
  ReconstructionAudit audit;

  const ContactScalars cs =
      make_contact_scalars(problem, u_k, u_prev, cfg, stress.has_split);

  // pointwise stress scale and load norm
  const TriQuadrature& vrule = triangle_rule(std::max(2 * q, 2));
  double load2 = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (const auto& qp : vrule.points) {
      const Vec2 x = qp.l0 * mesh.vertices[tri[0]] + qp.l1 * mesh.vertices[tri[1]] +
                     qp.l2 * mesh.vertices[tri[2]];
      audit.stress_scale = std::max(audit.stress_scale, stress.eval_total(t, x).norm());
      load2 += 2.0 * mesh.area[t] * qp.w * problem.body_force(x).squaredNorm();
    }
  }
  audit.load_scale = std::sqrt(load2);

  // H(div): normal-trace jumps of each component across interior faces
  const SegQuadrature& frule = segment_rule(kFaceQuad);
  for (int fid = 0; fid < mesh.num_faces(); ++fid) {
    const Face& face = mesh.faces[fid];
    if (face.is_boundary()) continue;
    const Vec2& fa = mesh.vertices[face.v0];
    const Vec2& fb = mesh.vertices[face.v1];
    for (std::size_t iq = 0; iq < frule.points.size(); ++iq) {
      const Vec2 x = fa + frule.points[iq] * (fb - fa);
      for (int c = 0; c < (stress.has_split ? 3 : 1); ++c) {
        const Vec2 jump =
            (stress.eval(static_cast<EquilibratedStress::Component>(c), face.owner, x) -
             stress.eval(static_cast<EquilibratedStress::Component>(c), face.neighbor, x)) *
            face.normal;
        audit.hdiv_jump = std::max(audit.hdiv_jump, jump.norm());
      }
    }
  }

  // divergence moments against an orthonormal P^{p-1} basis per element
  const int nu = Monomials::dim(p - 1);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec2 center = element_center(mesh, t);
    const double scale = element_scale(mesh, t);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nu, nu);
    std::vector<double> mv(nu);
    const TriQuadrature& rule = triangle_rule(std::max(2 * p + 2, 6));
    for (const auto& qp : rule.points) {
      const Vec2 x = qp.l0 * mesh.vertices[tri[0]] + qp.l1 * mesh.vertices[tri[1]] +
                     qp.l2 * mesh.vertices[tri[2]];
      Monomials::values(p - 1, (x - center) / scale, mv.data());
      const double w = 2.0 * mesh.area[t] * qp.w;
      for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nu; ++j) gram(i, j) += w * mv[i] * mv[j];
    }
    const Eigen::MatrixXd Linv =
        Eigen::MatrixXd(gram.llt().matrixL()).inverse();  // orthonormalizing map

    Eigen::MatrixXd moments = Eigen::MatrixXd::Zero(2, nu);
    for (const auto& qp : rule.points) {
      const Vec2 x = qp.l0 * mesh.vertices[tri[0]] + qp.l1 * mesh.vertices[tri[1]] +
                     qp.l2 * mesh.vertices[tri[2]];
      Monomials::values(p - 1, (x - center) / scale, mv.data());
      const double w = 2.0 * mesh.area[t] * qp.w;
      const Vec2 defect = stress.divergence_total(t, x) + problem.body_force(x);
      for (int i = 0; i < 2; ++i)
        for (int l = 0; l < nu; ++l) moments(i, l) += w * defect[i] * mv[l];
    }
    const Eigen::MatrixXd on = moments * Linv.transpose();
    audit.equilibrium = std::max(audit.equilibrium, on.cwiseAbs().maxCoeff());

    // weak symmetry moments against the same orthonormal scalar basis (q = p)
    Eigen::VectorXd skew_m = Eigen::VectorXd::Zero(nu);
    for (const auto& qp : rule.points) {
      const Vec2 x = qp.l0 * mesh.vertices[tri[0]] + qp.l1 * mesh.vertices[tri[1]] +
                     qp.l2 * mesh.vertices[tri[2]];
      Monomials::values(p - 1, (x - center) / scale, mv.data());
      const double w = 2.0 * mesh.area[t] * qp.w;
      const Eigen::Matrix2d sv = stress.eval_total(t, x);
      const double skew = sv(0, 1) - sv(1, 0);
      for (int l = 0; l < nu; ++l) skew_m[l] += w * skew * mv[l];
    }
    const Eigen::VectorXd on_skew = Linv * skew_m;
    audit.weak_symmetry = std::max(audit.weak_symmetry, on_skew.cwiseAbs().maxCoeff());
  }

  // boundary face moments and tangential traces
  for (int fid = 0; fid < mesh.num_faces(); ++fid) {
    const Face& face = mesh.faces[fid];
    if (!face.is_boundary()) continue;
    if (face.tag != BoundaryTag::Neumann && face.tag != BoundaryTag::Contact) continue;
    const Vec2& fa = mesh.vertices[face.v0];
    const Vec2& fb = mesh.vertices[face.v1];
    const int t = face.owner;
    Eigen::MatrixXd mom_neu = Eigen::MatrixXd::Zero(2, q + 1);
    Eigen::MatrixXd mom_cnt = Eigen::MatrixXd::Zero(stress.has_split ? 3 : 1, q + 1);
    for (std::size_t iq = 0; iq < frule.points.size(); ++iq) {
      const double s = frule.points[iq];
      const Vec2 x = fa + s * (fb - fa);
      const double w = face.length * frule.weights[iq];
      if (face.tag == BoundaryTag::Neumann) {
        const Vec2 defect = stress.eval_total(t, x) * face.normal - problem.neumann(x);
        for (int k = 0; k <= q; ++k)
          for (int dir = 0; dir < 2; ++dir)
            mom_neu(dir, k) += w * defect[dir] * face_basis_value(face.length, k, s);
      } else {
        for (int c = 0; c < (stress.has_split ? 3 : 1); ++c) {
          const auto comp = static_cast<EquilibratedStress::Component>(c);
          const Vec2 trace = stress.eval(comp, t, x) * face.normal;
          const double data = c == 0 ? cs.dis(fid, x)
                              : c == 1 ? cs.reg(fid, x)
                                       : cs.lin(fid, x);
          const double normal_defect = face.normal.dot(trace) - data;
          for (int k = 0; k <= q; ++k)
            mom_cnt(c, k) += w * normal_defect * face_basis_value(face.length, k, s);
          const Vec2 tangential = trace - face.normal.dot(trace) * face.normal;
          audit.tangential = std::max(audit.tangential, tangential.norm());
        }
      }
    }
    if (face.tag == BoundaryTag::Neumann)
      audit.neumann = std::max(audit.neumann, mom_neu.cwiseAbs().maxCoeff());
    else {
      audit.contact_dis = std::max(audit.contact_dis, mom_cnt.row(0).cwiseAbs().maxCoeff());
      if (stress.has_split) {
        audit.contact_reg = std::max(audit.contact_reg, mom_cnt.row(1).cwiseAbs().maxCoeff());
        audit.contact_lin = std::max(audit.contact_lin, mom_cnt.row(2).cwiseAbs().maxCoeff());
      }
    }
  }
  return audit;
}

}  // namespace ce
