#pragma once

#include <functional>
#include <vector>

#include "ce/femcore.hpp"

namespace ce {

/// Full problem description: geometry, material, loads and boundary data.
struct Problem {
  const TriMesh* mesh = nullptr;
  const LagrangeSpace* space = nullptr;
  ElasticityCoefficients coeff;
  VectorField body_force;
  VectorField neumann;
  VectorField dirichlet;  // nullptr means homogeneous

  VectorField dirichlet_or_zero() const {
    if (dirichlet) return dirichlet;
    return [](const Vec2&) { return Vec2::Zero(); };
  }
};

struct NitscheConfig {
  double gamma0 = 100.0;       // contact penalty scale, gamma = gamma0 / h_T
  double delta = 1.0;          // regularization width
  double newton_tol = 1e-10;   // relative increment safety net
  int newton_max_iters = 50;

  void validate() const;
};

/// Projection onto the nonpositive half-line.
inline double proj_neg(double x) { return 0.5 * (x - std::abs(x)); }

struct RegProj {
  double value;
  double derivative;
};

/// C^1 regularization of proj_neg, active on |x| < delta.
RegProj reg_proj(double x, double delta);

/// sigma_n(u)(x) - (gamma0/h_T) u(x).n on a contact face (owner element T).
double p1gamma(const DisplacementField& u, const ElasticityCoefficients& coeff, double gamma0,
               int face, const Vec2& x);

struct NewtonTrace {
  struct Iterate {
    int k = 0;
    double increment_rel = 0.0;
    double residual_norm = 0.0;
    int active_points = 0;  // face quadrature points with P(u_k) < delta
  };
  std::vector<Iterate> iterates;
  bool converged = false;
};

/// Linear system of one Newton step around u_prev (Dirichlet applied).
void assemble_newton_system(const Problem& problem, const SparseMat& stiffness,
                            const Eigen::VectorXd& load, const DisplacementField& u_prev,
                            const NitscheConfig& cfg, SparseMat& A, Eigen::VectorXd& b);

/// Residual vector of the nonlinear problem with the regularized projection,
/// Dirichlet rows zeroed.
Eigen::VectorXd residual_regularized(const Problem& problem, const SparseMat& stiffness,
                                     const Eigen::VectorXd& load, const DisplacementField& u,
                                     const NitscheConfig& cfg);

/// Same residual with the exact projection (delta -> 0 limit).
Eigen::VectorXd residual_exact(const Problem& problem, const SparseMat& stiffness,
                               const Eigen::VectorXd& load, const DisplacementField& u,
                               const NitscheConfig& cfg);

/// Stop callback; invoked after each iterate with (u_k, u_prev, k). Returning
/// true ends the loop.
using NewtonStop =
    std::function<bool(const DisplacementField&, const DisplacementField&, int)>;

std::pair<DisplacementField, NewtonTrace> newton_solve(const Problem& problem,
                                                       const DisplacementField& u0,
                                                       const NitscheConfig& cfg,
                                                       const NewtonStop& stop = nullptr);

/// Halve delta from cfg.delta down to delta_final, warm-starting each round.
DisplacementField continuation_solve(const Problem& problem, const NitscheConfig& cfg,
                                     double delta_final);

}  // namespace ce
