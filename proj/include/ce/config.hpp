#pragma once

#include <map>
#include <string>

#include "ce/adaptive.hpp"

namespace ce {

/// Flat `section.key = value` configuration of a run.
struct RunConfig {
  // geometry
  Rect rect{-1.0, 1.0, 0.0, 1.0};
  int nx = 16, ny = 8;
  std::string bottom = "D:-1:0,C:0:1";
  std::string right = "N";
  std::string top = "N";
  std::string left = "N";

  // material
  double E = 0.0;
  double nu = 0.0;

  // fem
  int degree = 1;

  // load
  Vec2 f = Vec2::Zero();
  Vec2 gn_bottom = Vec2::Zero(), gn_right = Vec2::Zero(), gn_top = Vec2::Zero(),
       gn_left = Vec2::Zero();

  // nitsche
  double gamma0 = -1.0;      // default 100 E
  double delta_init = -1.0;  // default E
  double delta = -1.0;       // single-solve target, default E/100
  double newton_tol = 1e-10;
  int newton_max_iters = 50;

  // adaptive
  double gamma_reg = 0.04;
  double gamma_lin = 0.08;
  double fraction = 0.06;
  int budget = 11;
  std::string stopping_mode = "global";
  double gamma_reg_local = 0.04;
  double gamma_lin_local = 0.08;
  double evenness_ratio = 3.0;
  std::string lifting = "same_mesh";  // or "refined"
  int uniform_budget = 4;
  int uniform_nx = 8, uniform_ny = 4;

  // reference
  int ref_nx = 160, ref_ny = 80;
  int ref_degree = 2;
  double ref_delta_final = 1e-4;
  double ref_newton_tol = 1e-12;

  // output
  std::string out_dir = "out";
  bool write_vtk = true;
  bool write_estimator_csv = true;

  CaseSetup make_case() const;
  TriMesh make_initial_mesh() const;
  TriMesh make_uniform_initial_mesh() const;
  AdaptiveConfig make_adaptive() const;
  NitscheConfig make_nitsche() const;
};

/// Parse and validate; unknown keys and out-of-range values are rejected with
/// the offending key named. Environment variables CE_<SECTION>_<KEY> override
/// file values.
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

}  // namespace ce
