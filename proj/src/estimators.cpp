#include "ce/estimators.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace ce {

namespace {
constexpr int kTraceDegree = 6;   // polynomial degree of the eigenproblem space
constexpr int kFaceQuad = 10;
}  // namespace

double trace_constant(const TriMesh& mesh, int t, int face) {
  bool found = false;
  for (int f : mesh.tri_faces[t]) found = found || f == face;
  if (!found) throw std::invalid_argument("trace_constant: face not on element");

  const int nq = Monomials::dim(kTraceDegree);
  const int n = nq - 1;  // constants are in the kernel of both forms
  const Vec2 center = element_center(mesh, t);
  const double scale = element_scale(mesh, t);
  const Face& f = mesh.faces[face];

  // face averages of the non-constant monomials (weights sum to one)
  std::vector<double> mv(nq);
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(n);
  {
    const SegQuadrature& rule = segment_rule(2 * kTraceDegree);
    const Vec2& a = mesh.vertices[f.v0];
    const Vec2& b = mesh.vertices[f.v1];
    for (std::size_t i = 0; i < rule.points.size(); ++i) {
      const Vec2 x = a + rule.points[i] * (b - a);
      Monomials::values(kTraceDegree, (x - center) / scale, mv.data());
      for (int k = 0; k < n; ++k) avg[k] += rule.weights[i] * mv[k + 1];
    }
  }

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  {
    const SegQuadrature& rule = segment_rule(2 * kTraceDegree);
    const Vec2& a = mesh.vertices[f.v0];
    const Vec2& b = mesh.vertices[f.v1];
    for (std::size_t i = 0; i < rule.points.size(); ++i) {
      const Vec2 x = a + rule.points[i] * (b - a);
      Monomials::values(kTraceDegree, (x - center) / scale, mv.data());
      const double w = f.length * rule.weights[i];
      for (int r = 0; r < n; ++r)
        for (int c = 0; c <= r; ++c) {
          const double v = w * (mv[r + 1] - avg[r]) * (mv[c + 1] - avg[c]);
          A(r, c) += v;
          if (c != r) A(c, r) += v;
        }
    }
  }

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  {
    const TriQuadrature& rule = triangle_rule(2 * kTraceDegree);
    const auto& tri = mesh.triangles[t];
    std::vector<Vec2> mg(nq);
    for (const auto& qp : rule.points) {
      const Vec2 x = qp.l0 * mesh.vertices[tri[0]] + qp.l1 * mesh.vertices[tri[1]] +
                     qp.l2 * mesh.vertices[tri[2]];
      Monomials::gradients(kTraceDegree, (x - center) / scale, mg.data());
      const double w = 2.0 * mesh.area[t] * qp.w * f.length;  // h_F weight included
      for (int r = 0; r < n; ++r)
        for (int c = 0; c <= r; ++c) {
          const double v = w * mg[r + 1].dot(mg[c + 1]) / (scale * scale);
          B(r, c) += v;
          if (c != r) B(c, r) += v;
        }
    }
  }

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, B);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("trace_constant: eigenproblem failed");
  return 1.1 * std::sqrt(es.eigenvalues().maxCoeff());
}

EstimatorReport compute_report(const Problem& problem, const DisplacementField& u_k,
                               const EquilibratedStress& stress, const NitscheConfig& cfg,
                               const EstimatorConfig& est_cfg) {
  const TriMesh& mesh = *problem.mesh;
  const int nt = mesh.num_triangles();
  const int q = stress.q;

  EstimatorReport rep;
  rep.n_elements = nt;
  for (Eigen::VectorXd* v : {&rep.osc, &rep.str, &rep.neu, &rep.cnt, &rep.reg1, &rep.reg2,
                             &rep.lin1, &rep.lin2, &rep.tot})
    *v = Eigen::VectorXd::Zero(nt);

  // data terms share the over-integration degree of the patch solves
  const TriQuadrature& vrule = triangle_rule(std::max(2 * q + 2, kFaceQuad));
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[t];
    double osc2 = 0, str2 = 0, reg2v = 0, lin2v = 0;
    for (const auto& qp : vrule.points) {
      const double bary[3] = {qp.l0, qp.l1, qp.l2};
      const Vec2 x = qp.l0 * mesh.vertices[tri[0]] + qp.l1 * mesh.vertices[tri[1]] +
                     qp.l2 * mesh.vertices[tri[2]];
      const double w = 2.0 * mesh.area[t] * qp.w;
      osc2 += w * (problem.body_force(x) + stress.divergence_total(t, x)).squaredNorm();
      const Eigen::Matrix2d sig_u = problem.coeff.stress(u_k.strain(t, bary));
      str2 += w * (stress.eval(EquilibratedStress::Dis, t, x) - sig_u).squaredNorm();
      if (stress.has_split) {
        reg2v += w * stress.eval(EquilibratedStress::Reg, t, x).squaredNorm();
        lin2v += w * stress.eval(EquilibratedStress::Lin, t, x).squaredNorm();
      }
    }
    rep.osc[t] = mesh.h_T[t] / std::numbers::pi * std::sqrt(osc2);
    rep.str[t] = std::sqrt(str2);
    rep.reg1[t] = std::sqrt(reg2v);
    rep.lin1[t] = std::sqrt(lin2v);
  }

  const SegQuadrature& frule = segment_rule(kFaceQuad);
  for (int fid = 0; fid < mesh.num_faces(); ++fid) {
    const Face& face = mesh.faces[fid];
    if (!face.is_boundary()) continue;
    const int t = face.owner;
    const Vec2& a = mesh.vertices[face.v0];
    const Vec2& b = mesh.vertices[face.v1];
    if (face.tag == BoundaryTag::Neumann) {
      double neu2 = 0;
      for (std::size_t i = 0; i < frule.points.size(); ++i) {
        const Vec2 x = a + frule.points[i] * (b - a);
        const double w = face.length * frule.weights[i];
        neu2 += w * (problem.neumann(x) - stress.eval_total(t, x) * face.normal).squaredNorm();
      }
      const double ct = est_cfg.trace_constant_override > 0.0
                            ? est_cfg.trace_constant_override
                            : trace_constant(mesh, t, fid);
      rep.neu[t] += ct * std::sqrt(face.length) * std::sqrt(neu2);
    } else if (face.tag == BoundaryTag::Contact) {
      double cnt2 = 0, regf2 = 0, linf2 = 0;
      for (std::size_t i = 0; i < frule.points.size(); ++i) {
        const Vec2 x = a + frule.points[i] * (b - a);
        const double w = face.length * frule.weights[i];
        const double proj = proj_neg(p1gamma(u_k, problem.coeff, cfg.gamma0, fid, x));
        const double dis_n =
            face.normal.dot(stress.eval(EquilibratedStress::Dis, t, x) * face.normal);
        cnt2 += w * (proj - dis_n) * (proj - dis_n);
        if (stress.has_split) {
          const double reg_n =
              face.normal.dot(stress.eval(EquilibratedStress::Reg, t, x) * face.normal);
          const double lin_n =
              face.normal.dot(stress.eval(EquilibratedStress::Lin, t, x) * face.normal);
          regf2 += w * reg_n * reg_n;
          linf2 += w * lin_n * lin_n;
        }
      }
      rep.cnt[t] += std::sqrt(face.length) * std::sqrt(cnt2);
      rep.reg2[t] += std::sqrt(face.length) * std::sqrt(regf2);
      rep.lin2[t] += std::sqrt(face.length) * std::sqrt(linf2);
    }
  }

  auto sq = [](double v) { return v * v; };
  double g_osc = 0, g_str = 0, g_neu = 0, g_cnt = 0, g_reg1 = 0, g_reg2 = 0, g_lin1 = 0,
         g_lin2 = 0, g_reg = 0, g_lin = 0, g_tot = 0;
  for (int t = 0; t < nt; ++t) {
    rep.tot[t] = std::sqrt(sq(rep.osc[t] + rep.str[t] + rep.reg1[t] + rep.lin1[t] + rep.neu[t]) +
                           sq(rep.cnt[t] + rep.reg2[t] + rep.lin2[t]));
    g_osc += sq(rep.osc[t]);
    g_str += sq(rep.str[t]);
    g_neu += sq(rep.neu[t]);
    g_cnt += sq(rep.cnt[t]);
    g_reg1 += sq(rep.reg1[t]);
    g_reg2 += sq(rep.reg2[t]);
    g_lin1 += sq(rep.lin1[t]);
    g_lin2 += sq(rep.lin2[t]);
    g_reg += sq(rep.reg1[t] + rep.reg2[t]);
    g_lin += sq(rep.lin1[t] + rep.lin2[t]);
    g_tot += sq(rep.tot[t]);
  }
  rep.global.osc = std::sqrt(g_osc);
  rep.global.str = std::sqrt(g_str);
  rep.global.neu = std::sqrt(g_neu);
  rep.global.cnt = std::sqrt(g_cnt);
  rep.global.reg1 = std::sqrt(g_reg1);
  rep.global.reg2 = std::sqrt(g_reg2);
  rep.global.lin1 = std::sqrt(g_lin1);
  rep.global.lin2 = std::sqrt(g_lin2);
  rep.global.reg = std::sqrt(g_reg);
  rep.global.lin = std::sqrt(g_lin);
  rep.global.tot = std::sqrt(g_tot);
  return rep;
}

double theorem_upper_bound(const EstimatorReport& report) {
  const auto& g = report.global;
  const double a = g.osc + g.str + g.reg1 + g.lin1 + g.neu;
  const double b = g.cnt + g.reg2 + g.lin2;
  return std::sqrt(a * a + b * b);
}

void write_estimator_csv(const TriMesh& mesh, const EstimatorReport& report,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open estimator csv: " + path);
  out.precision(17);
  out << "element,x,y,h_T,eta_osc,eta_str,eta_Neu,eta_cnt,eta_reg1,eta_reg2,eta_lin1,"
         "eta_lin2,eta_reg,eta_lin,eta_tot\n";
  for (int t = 0; t < report.n_elements; ++t) {
    const Vec2 c = mesh.barycenter(t);
    out << t << ',' << c.x() << ',' << c.y() << ',' << mesh.h_T[t] << ',' << report.osc[t]
        << ',' << report.str[t] << ',' << report.neu[t] << ',' << report.cnt[t] << ','
        << report.reg1[t] << ',' << report.reg2[t] << ',' << report.lin1[t] << ','
        << report.lin2[t] << ',' << report.reg1[t] + report.reg2[t] << ','
        << report.lin1[t] + report.lin2[t] << ',' << report.tot[t] << "\n";
  }
  const auto& g = report.global;
  out << -1 << ",0,0,0," << g.osc << ',' << g.str << ',' << g.neu << ',' << g.cnt << ','
      << g.reg1 << ',' << g.reg2 << ',' << g.lin1 << ',' << g.lin2 << ',' << g.reg << ','
      << g.lin << ',' << g.tot << "\n";
}

}  // namespace ce
