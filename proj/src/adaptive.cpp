#include "ce/adaptive.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <Eigen/SparseLU>

namespace ce {

void AdaptiveConfig::validate() const {
  if (gamma_reg <= 0.0 || gamma_reg >= 1.0)
    throw std::invalid_argument("adaptive: gamma_reg must lie in (0,1)");
  if (gamma_lin <= 0.0 || gamma_lin >= 1.0)
    throw std::invalid_argument("adaptive: gamma_lin must lie in (0,1)");
  if (fraction <= 0.0 || fraction > 1.0)
    throw std::invalid_argument("adaptive: marking fraction must lie in (0,1]");
  if (delta_init <= 0.0) throw std::invalid_argument("adaptive: delta_init must be positive");
  if (delta_shrink <= 0.0 || delta_shrink >= 1.0)
    throw std::invalid_argument("adaptive: delta_shrink must lie in (0,1)");
  if (max_steps < 0) throw std::invalid_argument("adaptive: max_steps must be >= 0");
}

bool stop_newton(const EstimatorReport& report, const AdaptiveConfig& cfg) {
  if (cfg.mode == AdaptiveConfig::StoppingMode::Global) {
    const auto& g = report.global;
    return g.lin <= cfg.gamma_lin * (g.osc + g.str + g.neu + g.cnt);
  }
  for (int t = 0; t < report.n_elements; ++t) {
    const double lin_t = report.lin1[t] + report.lin2[t];
    const double rhs = cfg.gamma_lin_local *
                       (report.osc[t] + report.str[t] + report.neu[t] + report.cnt[t]);
    if (lin_t > rhs) return false;
  }
  return true;
}

bool stop_regularization(const EstimatorReport& report, const AdaptiveConfig& cfg) {
  if (cfg.mode == AdaptiveConfig::StoppingMode::Global) {
    const auto& g = report.global;
    return g.reg <= cfg.gamma_reg * (g.osc + g.str + g.neu + g.cnt + g.lin);
  }
  for (int t = 0; t < report.n_elements; ++t) {
    const double reg_t = report.reg1[t] + report.reg2[t];
    const double lin_t = report.lin1[t] + report.lin2[t];
    const double rhs =
        cfg.gamma_reg_local *
        (report.osc[t] + report.str[t] + report.neu[t] + report.cnt[t] + lin_t);
    if (reg_t > rhs) return false;
  }
  return true;
}

std::vector<int> mark(const EstimatorReport& report, double fraction) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw std::invalid_argument("mark: fraction must lie in (0,1]");
  const int n = report.n_elements;
  const int count = static_cast<int>(std::ceil(fraction * n));
  std::vector<int> idx(n);
  for (int t = 0; t < n; ++t) idx[t] = t;
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (report.tot[a] != report.tot[b]) return report.tot[a] > report.tot[b];
    return a < b;
  });
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

double median_of(Eigen::VectorXd values) {
  std::sort(values.begin(), values.end());
  const int n = static_cast<int>(values.size());
  if (n == 0) return 0.0;
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

DisplacementField prolong(const DisplacementField& old_u, const LagrangeSpace& space,
                          const VectorField& dirichlet) {
  DisplacementField u(space);
  const MeshLocator loc(old_u.space->mesh());
  for (int n = 0; n < space.num_nodes(); ++n) {
    const Vec2 v = eval_displacement(old_u, loc, space.node_position(n));
    u.coeffs[2 * n] = v.x();
    u.coeffs[2 * n + 1] = v.y();
  }
  for (int n : space.dirichlet_nodes()) {
    const Vec2 g = dirichlet ? dirichlet(space.node_position(n)) : Vec2::Zero();
    u.coeffs[2 * n] = g.x();
    u.coeffs[2 * n + 1] = g.y();
  }
  return u;
}

}  // namespace

RunLog run_adaptive(const CaseSetup& cs, TriMesh initial_mesh, int degree,
                    const AdaptiveConfig& cfg, const ReferenceSolution* ref,
                    const StepSink& sink) {
  cfg.validate();
  RunLog log;

  Discretization disc = discretize(cs, std::move(initial_mesh), degree);
  Discretization prev_disc;        // keeps the warm start's space alive
  DisplacementField warm;          // empty: start from zero on the first mesh
  double delta = cfg.delta_init;   // persisted across refinement steps

  for (int step = 0;; ++step) {
    const auto t_start = std::chrono::steady_clock::now();
    const Problem problem = disc.problem(cs);
    const LagrangeSpace& space = *disc.space;
    const TriMesh& mesh = *disc.mesh;

    NitscheConfig ncfg;
    ncfg.gamma0 = cs.gamma0;
    ncfg.delta = delta;
    ncfg.newton_tol = cfg.newton_tol;
    ncfg.newton_max_iters = cfg.newton_max_iters;

    const SparseMat K = assemble_elastic_stiffness(space, problem.coeff);
    const Eigen::VectorXd load = assemble_load(space, problem.body_force, problem.neumann);
    const PatchCache cache = build_patch_cache(mesh, degree);

    DisplacementField u_round = warm.space ? prolong(warm, space, problem.dirichlet)
                                           : DisplacementField(space);
    if (!warm.space && problem.dirichlet) {
      u_round.coeffs = dirichlet_values(space, problem.dirichlet);
    }

    StepRecord rec;
    rec.step = step;
    rec.n_triangles = mesh.num_triangles();
    rec.n_vertices = mesh.num_vertices();
    rec.dofs = space.num_dofs();

    DisplacementField u_k = u_round;
    EstimatorReport report;
    EquilibratedStress stress;
    Eigen::SparseLU<SparseMat> solver;

    for (;;) {  // regularization loop
      ncfg.delta = delta;
      RoundRecord round;
      round.delta = delta;
      DisplacementField u_prev = u_round;
      bool round_converged = false;

      for (int k = 1; k <= cfg.newton_max_iters; ++k) {  // Newton loop
        SparseMat A;
        Eigen::VectorXd b;
        assemble_newton_system(problem, K, load, u_prev, ncfg, A, b);
        solver.compute(A);
        if (solver.info() != Eigen::Success)
          throw std::runtime_error("run_adaptive: singular linearized system");
        u_k.coeffs = solver.solve(b);
        round.n_lin = k;

        stress = construct_sigma_split(problem, u_k, u_prev, ncfg, &cache);
        report = compute_report(problem, u_k, stress, ncfg);

        const double un = u_k.coeffs.norm();
        const double inc = (u_k.coeffs - u_prev.coeffs).norm() / (un > 0.0 ? un : 1.0);
        u_prev = u_k;
        if (stop_newton(report, cfg) || inc <= cfg.newton_tol) {
          round_converged = true;
          break;
        }
      }
      if (!round_converged) rec.newton_converged = false;

      round.globals = report.global;
      round.bound = theorem_upper_bound(report);
      if (cfg.compute_lifting)
        round.lifted = lift_residual(problem, u_k, ncfg, cfg.lifting).value;
      rec.rounds.push_back(round);
      rec.n_lin_total += round.n_lin;

      u_round = u_k;  // warm start across delta rounds
      if (stop_regularization(report, cfg)) break;
      delta *= cfg.delta_shrink;
      ++rec.n_reg;
      if (delta < 1e-16 * cfg.delta_init) {
        // degenerate states (e.g. zero loads) can make both sides of the
        // criterion shrink with delta; stop at the floor and flag it
        rec.delta_floor_hit = true;
        break;
      }
    }

    rec.delta_final = delta;
    rec.report = report;
    rec.bound = rec.rounds.back().bound;
    rec.lifted = rec.rounds.back().lifted;
    rec.max_eta_tot = report.n_elements > 0 ? report.tot.maxCoeff() : 0.0;
    rec.median_eta_tot = median_of(report.tot);

    if (ref) {
      const ErrorNorms err = error_norms(u_k, *ref, problem.coeff);
      rec.h1_error = err.h1;
      rec.energy_error = err.energy;
      const DiagnosticPair d = diagnostics(problem, u_k, report.global.tot, *ref, ncfg);
      if (!d.degenerate) {
        rec.L = d.L;
        rec.U = d.U;
        rec.i_eff_low = d.i_eff_low;
        rec.i_eff_up = d.i_eff_up;
      }
    }

    const bool budget_hit = step >= cfg.max_steps;
    const bool even = cfg.evenness_ratio > 0.0 &&
                      rec.max_eta_tot <= cfg.evenness_ratio * rec.median_eta_tot;
    const bool solved = report.global.tot <= cfg.zero_tol;
    const bool done = budget_hit || even || solved;
    if (!done) rec.marked = mark(report, cfg.fraction);

    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    if (sink) sink(rec, mesh, space, u_k);
    log.steps.push_back(rec);

    if (done) break;
    TriMesh refined = refine(mesh, log.steps.back().marked);
    warm = u_k;  // prolonged onto the new mesh at the top of the loop
    prev_disc = disc;
    disc = discretize(cs, std::move(refined), degree);
  }
  return log;
}

void write_runlog_csv(const RunLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open run log csv: " + path);
  out.precision(17);
  out << "step,n_triangles,n_vertices,dofs,n_reg,n_lin,delta,eta_osc,eta_str,eta_Neu,"
         "eta_cnt,eta_reg1,eta_reg2,eta_lin1,eta_lin2,eta_reg,eta_lin,eta_tot,bound,"
         "lifted,max_eta_tot,median_eta_tot,h1_error,energy_error,L,U,i_eff_low,i_eff_up,"
         "marked,newton_converged\n";
  for (const StepRecord& s : log.steps) {
    const auto& g = s.report.global;
    out << s.step << ',' << s.n_triangles << ',' << s.n_vertices << ',' << s.dofs << ','
        << s.n_reg << ',' << s.n_lin_total << ',' << s.delta_final << ',' << g.osc << ','
        << g.str << ',' << g.neu << ',' << g.cnt << ',' << g.reg1 << ',' << g.reg2 << ','
        << g.lin1 << ',' << g.lin2 << ',' << g.reg << ',' << g.lin << ',' << g.tot << ','
        << s.bound << ',' << s.lifted << ',' << s.max_eta_tot << ',' << s.median_eta_tot
        << ',' << s.h1_error << ',' << s.energy_error << ',' << s.L << ',' << s.U << ','
        << s.i_eff_low << ',' << s.i_eff_up << ',' << s.marked.size() << ','
        << (s.newton_converged ? 1 : 0) << "\n";
  }
}

}  // namespace ce
