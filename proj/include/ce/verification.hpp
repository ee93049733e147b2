#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "ce/estimators.hpp"

namespace ce {

/// Space used to approximate the dual-norm supremum from below.
enum class LiftingEnrichment {
  SameSpace,              // Galerkin-orthogonality diagnostic
  DegreePlusOneSameMesh,  // default
  RefinedMesh,            // one uniform refinement (degree p+1, capped at 2)
};

struct LiftingResult {
  double value = 0.0;  // mesh-dependent norm of the lifted residual
};

/// Elliptic lifting of the residual functional: solve
///   (grad z, grad v) + sum_F h_F^{-1} (z, v)_F = <R(u_k), v>
/// over an enriched Dirichlet-constrained space and return the norm of z.
/// The face weights use the h_F of the state's own mesh.
LiftingResult lift_residual(const Problem& problem, const DisplacementField& u_k,
                            const NitscheConfig& cfg, LiftingEnrichment enrichment);

/// Mesh-independent description of a benchmark configuration.
struct CaseSetup {
  Rect rect{-1.0, 1.0, 0.0, 1.0};
  BoundaryTagger tagger;
  ElasticityCoefficients coeff;
  VectorField body_force;
  VectorField neumann;
  VectorField dirichlet;  // may be null
  double gamma0 = 100.0;
};

/// Owning bundle of one discretization of a case.
struct Discretization {
  std::shared_ptr<TriMesh> mesh;
  std::shared_ptr<LagrangeSpace> space;

  Problem problem(const CaseSetup& cs) const {
    Problem p;
    p.mesh = mesh.get();
    p.space = space.get();
    p.coeff = cs.coeff;
    p.body_force = cs.body_force;
    p.neumann = cs.neumann;
    p.dirichlet = cs.dirichlet;
    return p;
  }
};

Discretization discretize(const CaseSetup& cs, TriMesh mesh, int degree);

struct ReferenceSolution {
  Discretization disc;
  DisplacementField u;
  std::shared_ptr<MeshLocator> locator;
};

/// Fine-mesh higher-order solution by delta-continuation with a tight Newton
/// tolerance.
ReferenceSolution reference_solution(const CaseSetup& cs, int nx, int ny, int degree,
                                     double delta_init, double delta_final,
                                     double newton_tol = 1e-12);

struct ErrorNorms {
  double h1 = 0.0;
  double energy = 0.0;
};

/// Norms of (reference - interpolated u) evaluated on the reference mesh.
ErrorNorms error_norms(const DisplacementField& u, const ReferenceSolution& ref,
                       const ElasticityCoefficients& coeff);

/// Closed contact interval of the reference state: faces where the normal gap
/// vanishes and the normal stress is compressive; endpoints interpolated.
std::pair<double, double> contact_interval(const ReferenceSolution& ref,
                                           const ElasticityCoefficients& coeff, double gamma0);

/// Least-squares slope of log(error) against log(dofs) over the last half of
/// the samples, negated.
double convergence_rate(const std::vector<double>& dofs, const std::vector<double>& errors);

struct DiagnosticPair {
  double L = 0.0;       // mu^{1/2} * energy error
  double U = 0.0;       // upper error surrogate with the contact face term
  double i_eff_low = 0.0;
  double i_eff_up = 0.0;
  bool degenerate = false;  // reference and state coincide
};

DiagnosticPair diagnostics(const Problem& problem, const DisplacementField& u,
                           double eta_tot, const ReferenceSolution& ref,
                           const NitscheConfig& cfg);

}  // namespace ce
