#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "ce/verification.hpp"

namespace ce {

struct AdaptiveConfig {
  double gamma_reg = 0.04;
  double gamma_lin = 0.08;
  double delta_init = 1.0;
  double delta_shrink = 0.5;
  double fraction = 0.06;   // marked share of the elements
  int max_steps = 11;       // refinement budget

  enum class StoppingMode { Global, Local } mode = StoppingMode::Global;
  double gamma_reg_local = 0.04;
  double gamma_lin_local = 0.08;

  // evenness termination: stop when max_T eta_tot <= ratio * median; <= 0
  // disables the check
  double evenness_ratio = 3.0;
  // absolute termination when the total estimator is numerically zero
  double zero_tol = 1e-13;

  double newton_tol = 1e-10;  // safety net under the estimator criteria
  int newton_max_iters = 50;

  bool compute_lifting = true;
  LiftingEnrichment lifting = LiftingEnrichment::DegreePlusOneSameMesh;

  void validate() const;
};

bool stop_newton(const EstimatorReport& report, const AdaptiveConfig& cfg);
bool stop_regularization(const EstimatorReport& report, const AdaptiveConfig& cfg);

/// The ceil(fraction*N) elements with the largest local totals, ties broken
/// by element index.
std::vector<int> mark(const EstimatorReport& report, double fraction);

struct RoundRecord {
  double delta = 0.0;
  int n_lin = 0;  // Newton iterations of this delta round
  EstimatorReport::Globals globals;
  double bound = 0.0;
  double lifted = std::numeric_limits<double>::quiet_NaN();
};

struct StepRecord {
  int step = 0;
  int n_triangles = 0, n_vertices = 0, dofs = 0;
  int n_reg = 0;        // delta shrinks in this step
  int n_lin_total = 0;  // Newton iterations summed over the rounds
  double delta_final = 0.0;
  std::vector<RoundRecord> rounds;
  EstimatorReport report;
  double bound = 0.0;
  double lifted = std::numeric_limits<double>::quiet_NaN();
  double max_eta_tot = 0.0, median_eta_tot = 0.0;
  double h1_error = std::numeric_limits<double>::quiet_NaN();
  double energy_error = std::numeric_limits<double>::quiet_NaN();
  double L = std::numeric_limits<double>::quiet_NaN();
  double U = std::numeric_limits<double>::quiet_NaN();
  double i_eff_low = std::numeric_limits<double>::quiet_NaN();
  double i_eff_up = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
  bool newton_converged = true;
  bool delta_floor_hit = false;  // regularization loop stopped by the safety floor
  std::vector<int> marked;
};

struct RunLog {
  std::vector<StepRecord> steps;
};

/// Artifact sink, invoked once per refinement step.
using StepSink = std::function<void(const StepRecord&, const TriMesh&, const LagrangeSpace&,
                                    const DisplacementField&)>;

/// Nested mesh-refinement / regularization / Newton loops with the
/// estimator-based stopping criteria. fraction = 1 yields the uniform study.
RunLog run_adaptive(const CaseSetup& cs, TriMesh initial_mesh, int degree,
                    const AdaptiveConfig& cfg, const ReferenceSolution* ref = nullptr,
                    const StepSink& sink = nullptr);

/// One row per refinement step.
void write_runlog_csv(const RunLog& log, const std::string& path);

}  // namespace ce
