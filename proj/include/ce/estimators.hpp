#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ce/equilibration.hpp"

namespace ce {

/// Constant of the trace inequality ||v - mean_F v||_F <= C h_F^{1/2} ||grad v||_T,
/// computed as the largest generalized eigenvalue of the face/volume forms
/// over P^6(T) modulo constants, with a 10% safety factor.
double trace_constant(const TriMesh& mesh, int t, int face);

struct EstimatorConfig {
  double trace_constant_override = -1.0;  // <= 0: compute per (element, face)
};

/// Local and global a posteriori estimators of one solver state.
struct EstimatorReport {
  int n_elements = 0;
  Eigen::VectorXd osc, str, neu, cnt, reg1, reg2, lin1, lin2;  // per element
  Eigen::VectorXd tot;                                         // local totals

  struct Globals {
    double osc = 0, str = 0, neu = 0, cnt = 0;
    double reg1 = 0, reg2 = 0, lin1 = 0, lin2 = 0;
    double reg = 0, lin = 0;  // aggregates of the local sums reg1+reg2, lin1+lin2
    double tot = 0;
  } global;

  double local_total(int t) const { return tot[t]; }
};

EstimatorReport compute_report(const Problem& problem, const DisplacementField& u_k,
                               const EquilibratedStress& stress, const NitscheConfig& cfg,
                               const EstimatorConfig& est_cfg = {});

/// Guaranteed upper bound for the dual norm of the residual, from the global
/// aggregates.
double theorem_upper_bound(const EstimatorReport& report);

/// One row per element plus a trailing row (id -1) with the global values.
void write_estimator_csv(const TriMesh& mesh, const EstimatorReport& report,
                         const std::string& path);

}  // namespace ce
