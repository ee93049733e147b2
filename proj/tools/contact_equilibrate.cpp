#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ce/adaptive.hpp"
#include "ce/config.hpp"
#include "ce/vtk.hpp"

namespace fs = std::filesystem;
using namespace ce;

namespace {

std::string step_name(const std::string& dir, const char* prefix, int step,
                      const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%03d.%s", prefix, step, ext);
  return (fs::path(dir) / buf).string();
}

StepSink make_sink(const RunConfig& cfg, const char* prefix) {
  return [&cfg, prefix](const StepRecord& rec, const TriMesh& mesh, const LagrangeSpace&,
                        const DisplacementField& u) {
    if (cfg.write_estimator_csv)
      write_estimator_csv(mesh, rec.report, step_name(cfg.out_dir, prefix, rec.step, "csv"));
    if (cfg.write_vtk)
      write_vtk(mesh, &u, &rec.report, nullptr, step_name(cfg.out_dir, prefix, rec.step, "vtk"));
    write_mesh(mesh, step_name(cfg.out_dir, prefix, rec.step, "mesh"));
  };
}

void write_diagnostics_csv(const RunLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open diagnostics csv: " + path);
  out.precision(17);
  out << "step,dofs,h1_error,energy_error,L,U,eta_tot,i_eff_low,i_eff_up,lifted_dual_norm,"
         "bound_audit\n";
  for (const StepRecord& s : log.steps) {
    const bool audit_ok = !(s.lifted > s.bound * (1.0 + 1e-12));
    out << s.step << ',' << s.dofs << ',' << s.h1_error << ',' << s.energy_error << ',' << s.L
        << ',' << s.U << ',' << s.report.global.tot << ',' << s.i_eff_low << ',' << s.i_eff_up
        << ',' << s.lifted << ',' << (audit_ok ? 1 : 0) << "\n";
  }
}

int run_single_solve(const RunConfig& cfg) {
  const CaseSetup cs = cfg.make_case();
  const Discretization disc = discretize(cs, cfg.make_initial_mesh(), cfg.degree);
  const Problem problem = disc.problem(cs);
  NitscheConfig ncfg = cfg.make_nitsche();
  const DisplacementField u = continuation_solve(problem, ncfg, cfg.delta);
  ncfg.delta = cfg.delta;
  const EquilibratedStress stress = construct_sigma(problem, u, ncfg);
  const EstimatorReport report = compute_report(problem, u, stress, ncfg);

  write_estimator_csv(*disc.mesh, report, (fs::path(cfg.out_dir) / "estimators.csv").string());
  write_mesh(*disc.mesh, (fs::path(cfg.out_dir) / "mesh.txt").string());
  if (cfg.write_vtk)
    write_vtk(*disc.mesh, &u, &report, &stress,
              (fs::path(cfg.out_dir) / "solution.vtk").string());
  std::printf("single-solve: %d elements, eta_tot = %.6e, bound = %.6e\n",
              disc.mesh->num_triangles(), report.global.tot, theorem_upper_bound(report));
  return 0;
}

int run_adaptive_mode(const RunConfig& cfg) {
  const CaseSetup cs = cfg.make_case();
  const AdaptiveConfig acfg = cfg.make_adaptive();
  const RunLog log =
      run_adaptive(cs, cfg.make_initial_mesh(), cfg.degree, acfg, nullptr, make_sink(cfg, "step"));
  write_runlog_csv(log, (fs::path(cfg.out_dir) / "runlog.csv").string());
  std::printf("adaptive: %zu steps, final eta_tot = %.6e on %d elements\n", log.steps.size(),
              log.steps.back().report.global.tot, log.steps.back().n_triangles);
  return 0;
}

int run_uniform_study(const RunConfig& cfg) {
  const CaseSetup cs = cfg.make_case();
  AdaptiveConfig acfg = cfg.make_adaptive();
  acfg.fraction = 1.0;
  acfg.max_steps = cfg.uniform_budget;
  acfg.evenness_ratio = 0.0;
  const RunLog log = run_adaptive(cs, cfg.make_uniform_initial_mesh(), cfg.degree, acfg,
                                  nullptr, make_sink(cfg, "uniform"));
  write_runlog_csv(log, (fs::path(cfg.out_dir) / "runlog_uniform.csv").string());
  std::printf("uniform-study: %zu steps, final eta_tot = %.6e on %d elements\n",
              log.steps.size(), log.steps.back().report.global.tot,
              log.steps.back().n_triangles);
  return 0;
}

int run_verify(const RunConfig& cfg) {
  const CaseSetup cs = cfg.make_case();
  std::printf("verify: computing the reference state (%dx%d, degree %d)...\n", cfg.ref_nx,
              cfg.ref_ny, cfg.ref_degree);
  const ReferenceSolution ref = reference_solution(
      cs, cfg.ref_nx, cfg.ref_ny, cfg.ref_degree, cfg.delta_init, cfg.ref_delta_final,
      cfg.ref_newton_tol);
  const auto [lo, hi] = contact_interval(ref, cs.coeff, cs.gamma0);
  std::printf("verify: reference contact interval (%.4f, %.4f)\n", lo, hi);

  const AdaptiveConfig acfg = cfg.make_adaptive();
  const RunLog log =
      run_adaptive(cs, cfg.make_initial_mesh(), cfg.degree, acfg, &ref, make_sink(cfg, "step"));
  write_runlog_csv(log, (fs::path(cfg.out_dir) / "runlog.csv").string());
  write_diagnostics_csv(log, (fs::path(cfg.out_dir) / "diagnostics.csv").string());

  bool all_ok = true;
  for (const StepRecord& s : log.steps)
    if (s.lifted > s.bound * (1.0 + 1e-12)) all_ok = false;
  std::printf("verify: %zu steps, guaranteed-bound audit %s\n", log.steps.size(),
              all_ok ? "all-true" : "VIOLATED");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contact problem solver with equilibrated-stress error control"};
  std::string mode;
  std::string config_path;
  std::string out_override;
  int threads = 1;
  int budget_override = -1;
  app.add_option("mode", mode, "one of: adaptive, uniform-study, single-solve, verify")
      ->required();
  app.add_option("--config", config_path, "configuration file")->required();
  app.add_option("--threads", threads, "worker threads (1 = reference run)");
  app.add_option("--out", out_override, "output directory override");
  app.add_option("--budget", budget_override, "refinement budget override");
  CLI11_PARSE(app, argc, argv);

  try {
    if (threads < 1) throw std::invalid_argument("--threads must be >= 1");
    RunConfig cfg = load_config_file(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (budget_override >= 0) cfg.budget = budget_override;
    fs::create_directories(cfg.out_dir);

    if (mode == "single-solve") return run_single_solve(cfg);
    if (mode == "adaptive") return run_adaptive_mode(cfg);
    if (mode == "uniform-study") return run_uniform_study(cfg);
    if (mode == "verify") return run_verify(cfg);
    throw std::invalid_argument("unknown mode '" + mode + "'");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
