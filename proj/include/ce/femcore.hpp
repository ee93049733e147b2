#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ce/mesh.hpp"
#include "ce/quadrature.hpp"

namespace ce {

using SparseMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

using ScalarField = std::function<double(const Vec2&)>;
using VectorField = std::function<Vec2(const Vec2&)>;

/// Plane-strain Lame parameters.
struct ElasticityCoefficients {
  double lambda = 0.0;
  double mu = 0.0;

  static ElasticityCoefficients plane_strain(double E, double nu);
  void validate() const;

  Eigen::Matrix2d stress(const Eigen::Matrix2d& strain) const {
    return lambda * strain.trace() * Eigen::Matrix2d::Identity() + 2.0 * mu * strain;
  }
};

/// Vector Lagrange space of degree p in {1,2}. Nodes are mesh vertices plus,
/// for p=2, one node per face; dof = 2*node + component.
class LagrangeSpace {
public:
  LagrangeSpace(const TriMesh& mesh, int degree);

  const TriMesh& mesh() const { return *mesh_; }
  int degree() const { return degree_; }
  int num_nodes() const { return num_nodes_; }
  int num_dofs() const { return 2 * num_nodes_; }
  int nodes_per_element() const { return degree_ == 1 ? 3 : 6; }

  std::vector<int> element_nodes(int t) const;
  Vec2 node_position(int n) const;
  const std::vector<int>& dirichlet_nodes() const { return dirichlet_nodes_; }
  bool is_dirichlet_node(int n) const { return dirichlet_mask_[n]; }

  /// Scalar basis values at a barycentric point, in element-node order.
  void basis_values(const double bary[3], double* vals) const;
  /// Physical gradients of the scalar basis on element t.
  void basis_gradients(int t, const double bary[3], Vec2* grads) const;

private:
  const TriMesh* mesh_;
  int degree_;
  int num_nodes_;
  std::vector<int> dirichlet_nodes_;
  std::vector<char> dirichlet_mask_;
};

struct DisplacementField {
  const LagrangeSpace* space = nullptr;
  Eigen::VectorXd coeffs;

  DisplacementField() = default;
  explicit DisplacementField(const LagrangeSpace& s)
      : space(&s), coeffs(Eigen::VectorXd::Zero(s.num_dofs())) {}

  Vec2 value(int t, const double bary[3]) const;
  Eigen::Matrix2d gradient(int t, const double bary[3]) const;  // (grad u)_ij = d_j u_i
  Eigen::Matrix2d strain(int t, const double bary[3]) const;
};

/// Barycentric coordinates of x in triangle t (may be outside [0,1]).
void barycentric(const TriMesh& mesh, int t, const Vec2& x, double bary[3]);

/// Point location by uniform binning with nearest-element fallback.
class MeshLocator {
public:
  explicit MeshLocator(const TriMesh& mesh);
  /// Element containing x (clamped barycentrics written to bary).
  int locate(const Vec2& x, double bary[3]) const;

private:
  const TriMesh* mesh_;
  int nx_ = 0, ny_ = 0;
  Vec2 lo_, hi_;
  std::vector<std::vector<int>> bins_;
};

Vec2 eval_displacement(const DisplacementField& u, const MeshLocator& loc, const Vec2& x);
Eigen::Matrix2d eval_gradient(const DisplacementField& u, const MeshLocator& loc, const Vec2& x);

SparseMat assemble_elastic_stiffness(const LagrangeSpace& space,
                                     const ElasticityCoefficients& coeff);

Eigen::VectorXd assemble_load(const LagrangeSpace& space, const VectorField& body_force,
                              const VectorField& neumann_traction);

/// Nodal interpolation of g on the Dirichlet nodes (zeros elsewhere).
Eigen::VectorXd dirichlet_values(const LagrangeSpace& space, const VectorField& g);

/// Row/column elimination with symmetric correction: returns the constrained
/// system; constrained dofs get identity rows with the prescribed values.
void apply_dirichlet(const LagrangeSpace& space, const Eigen::VectorXd& values, SparseMat& A,
                     Eigen::VectorXd& b);

/// Normal/tangential components of sigma(u)n on a boundary face, evaluated
/// from the owner element.
struct FaceStressTrace {
  const TriMesh* mesh = nullptr;
  const DisplacementField* u = nullptr;
  ElasticityCoefficients coeff;
  int face = -1;
  int owner = -1;
  Vec2 normal;

  double sigma_n(const Vec2& x) const;
  Vec2 sigma_t(const Vec2& x) const;
};

FaceStressTrace normal_stress_trace(const DisplacementField& u,
                                    const ElasticityCoefficients& coeff, int face);

/// Orthonormal Legendre value on a face: basis k at arc parameter s in [0,1],
/// normalized so that the L2(F) Gram matrix is the identity.
double face_basis_value(double face_length, int k, double s);

/// Scalar polynomial on a face in the orthonormal Legendre basis.
struct FacePoly {
  int face = -1;
  double length = 0.0;
  Eigen::VectorXd coeffs;  // size degree+1

  double eval(double s) const;
  double norm() const { return coeffs.norm(); }  // L2(F) norm
};

/// Best L2(F) approximation of g by a polynomial of the given degree;
/// quad_degree and subdivisions control the composite integration of g.
FacePoly l2_project_onto_face_polynomials(const TriMesh& mesh, int face, const ScalarField& g,
                                          int degree, int quad_degree = 10,
                                          int subdivisions = 1);

}  // namespace ce
