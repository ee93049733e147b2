#pragma once

#include <array>
#include <memory>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ce/nitsche.hpp"

namespace ce {

/// Scaled monomials 1, X, Y, X^2, XY, ... in (x - center)/scale, ordered by
/// total degree so the first dim(q-1) entries form the degree q-1 basis.
struct Monomials {
  static int dim(int q) { return (q + 1) * (q + 2) / 2; }
  static void values(int q, const Vec2& xhat, double* out);
  /// Gradients with respect to xhat (divide by the scale for physical ones).
  static void gradients(int q, const Vec2& xhat, Vec2* out);
};

/// L2-orthonormal basis of the rigid-body motions on a patch.
struct RigidModes {
  Vec2 center = Vec2::Zero();
  // mode i = coeff(i,0) e1 + coeff(i,1) e2 + coeff(i,2) rot
  Eigen::Matrix3d coeff = Eigen::Matrix3d::Zero();

  Vec2 eval(int i, const Vec2& x) const {
    const Vec2 rot(x.y() - center.y(), -(x.x() - center.x()));
    return Vec2(coeff(i, 0), coeff(i, 1)) + coeff(i, 2) * rot;
  }
};

RigidModes rigid_modes(const TriMesh& mesh, const VertexPatch& patch);

/// Expansion coefficients (in the orthonormal rigid-mode basis) of the
/// compatibility shifts of the component-splitting construction.
struct RigidCompatibilityData {
  RigidModes modes;
  Eigen::Vector3d y = Eigen::Vector3d::Zero();
  Eigen::Vector3d ytilde = Eigen::Vector3d::Zero();

  Vec2 eval_y(const Vec2& x) const;
  Vec2 eval_ytilde(const Vec2& x) const;
};

/// Saddle-point system of one vertex patch: tensor stress with per-row
/// BDM-type continuity expressed as face-moment constraints, element-wise
/// vector multiplier, element-wise skew multiplier, and (for patches without
/// a free Dirichlet face) three rigid-mode multipliers.
class PatchSystem {
public:
  PatchSystem(const TriMesh& mesh, const VertexPatch& patch, int q);

  const VertexPatch& patch() const { return patch_; }
  int q() const { return q_; }
  int num_elements() const { return static_cast<int>(patch_.elements.size()); }
  /// Scalar stress dofs per element (4 tensor entries x dim P^q).
  int stress_dofs_per_element() const { return 4 * Monomials::dim(q_); }
  int displacement_dofs_per_element() const { return 2 * Monomials::dim(q_ - 1); }
  int multiplier_dofs_per_element() const { return Monomials::dim(q_ - 1); }
  bool rigid_constrained() const { return use_rm_; }
  const RigidModes& modes() const { return modes_; }

  /// Data of one construction component. Face data is given without the hat
  /// factor; the system multiplies by the hat function internally.
  struct Sources {
    std::function<Eigen::Matrix2d(int elem, const Vec2&)> tau;  // may be null
    std::function<Vec2(int elem, const Vec2&)> vol;             // may be null
    std::function<double(int face, const Vec2&)> contact;       // scalar s(x)
    std::function<Vec2(int face, const Vec2&)> neumann;         // g(x)
  };

  /// Solve for one component; returns per-patch-element stress coefficients.
  std::vector<Eigen::VectorXd> solve(const Sources& src) const;

  /// Plain-text dump of the saddle matrix and the rhs of the given sources.
  void dump(const Sources& src, const std::string& path) const;

private:
  struct CFace {
    int face = -1;
    int elem_pos = -1;      // patch-local element on the positive side
    int elem_neg = -1;      // second element for interface rows
    Vec2 normal;
    enum class Kind { Interface, ZeroTrace, Neumann, Contact } kind = Kind::ZeroTrace;
  };

  Eigen::VectorXd assemble_rhs(const Sources& src) const;

  const TriMesh* mesh_;
  VertexPatch patch_;
  int q_;
  bool use_rm_ = false;
  RigidModes modes_;
  std::vector<CFace> cfaces_;
  std::vector<Vec2> centers_;   // per patch element
  std::vector<double> scales_;
  int n_s_ = 0, n_r_ = 0, n_m_ = 0, n_c_ = 0, n_total_ = 0;
  Eigen::MatrixXd matrix_;
  Eigen::FullPivLU<Eigen::MatrixXd> lu_;
};

/// H(div)-conforming stress reconstruction; components dis/reg/lin plus the
/// coefficientwise total.
struct EquilibratedStress {
  enum Component { Dis = 0, Reg = 1, Lin = 2 };

  const TriMesh* mesh = nullptr;
  int q = 1;
  bool has_split = false;
  std::array<std::vector<Eigen::VectorXd>, 3> comp;

  Eigen::VectorXd total(int elem) const;
  Eigen::Matrix2d eval(Component c, int elem, const Vec2& x) const;
  Eigen::Matrix2d eval_total(int elem, const Vec2& x) const;
  Vec2 divergence_total(int elem, const Vec2& x) const;
  Vec2 divergence(Component c, int elem, const Vec2& x) const;

  static Eigen::Matrix2d eval_coeffs(const Eigen::VectorXd& coeffs, int q, const Vec2& center,
                                     double scale, const Vec2& x);
};

/// Element center/scale convention shared by the reconstruction.
Vec2 element_center(const TriMesh& mesh, int t);
double element_scale(const TriMesh& mesh, int t);

RigidCompatibilityData compatibility_shift(const Problem& problem, const VertexPatch& patch,
                                           const DisplacementField& u_k,
                                           const DisplacementField& u_prev,
                                           const NitscheConfig& cfg, bool split);

/// Patch systems of one mesh; the factorizations are state-independent and
/// can be reused across solver iterates.
struct PatchCache {
  std::vector<VertexPatch> patches;
  std::vector<std::unique_ptr<PatchSystem>> systems;
};

PatchCache build_patch_cache(const TriMesh& mesh, int q);

/// Reconstruction from the converged solution (single component).
EquilibratedStress construct_sigma(const Problem& problem, const DisplacementField& u,
                                   const NitscheConfig& cfg,
                                   const PatchCache* cache = nullptr);

/// Reconstruction distinguishing discretization, regularization and
/// linearization; u_k must solve the linearized problem set up at u_prev.
EquilibratedStress construct_sigma_split(const Problem& problem, const DisplacementField& u_k,
                                         const DisplacementField& u_prev,
                                         const NitscheConfig& cfg,
                                         const PatchCache* cache = nullptr);

/// Pointwise/moment audits of the reconstruction properties.
struct ReconstructionAudit {
  double hdiv_jump = 0.0;       // max normal-trace jump across interior faces
  double equilibrium = 0.0;     // max divergence-moment defect against P^{p-1}
  double neumann = 0.0;         // max Neumann face-moment defect against P^p
  double contact_dis = 0.0;     // max contact face-moment defect per component
  double contact_reg = 0.0;
  double contact_lin = 0.0;
  double weak_symmetry = 0.0;   // max elementwise skew moment
  double tangential = 0.0;      // max tangential trace on contact faces
  double stress_scale = 0.0;    // max pointwise Frobenius norm of the total
  double load_scale = 0.0;      // L2 norm of f over the domain
};

ReconstructionAudit audit_reconstruction(const Problem& problem, const DisplacementField& u_k,
                                         const DisplacementField& u_prev,
                                         const NitscheConfig& cfg,
                                         const EquilibratedStress& stress);

}  // namespace ce
