#include "ce/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ce {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': cannot parse number '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int i = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return i;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': cannot parse integer '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config key '" + key + "': cannot parse boolean '" + v + "'");
}

Vec2 to_vec2(const std::string& key, const std::string& v) {
  const std::size_t comma = v.find(',');
  if (comma == std::string::npos)
    throw std::invalid_argument("config key '" + key + "': expected 'x,y'");
  return Vec2(to_double(key, trim(v.substr(0, comma))),
              to_double(key, trim(v.substr(comma + 1))));
}

// "D:-1:0,C:0:1" or "N": tag segments along a side coordinate
struct SideSpec {
  struct Segment {
    BoundaryTag tag;
    double a, b;
    bool whole;
  };
  std::vector<Segment> segments;

  static SideSpec parse(const std::string& key, const std::string& text) {
    SideSpec spec;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      Segment seg{};
      if (item.size() == 1) {
        seg.tag = tag_from_char(item[0]);
        seg.whole = true;
      } else {
        const std::size_t c1 = item.find(':');
        const std::size_t c2 = item.find(':', c1 + 1);
        if (c1 != 1 || c2 == std::string::npos)
          throw std::invalid_argument("config key '" + key + "': bad segment '" + item +
                                      "' (expected TAG or TAG:from:to)");
        seg.tag = tag_from_char(item[0]);
        seg.whole = false;
        seg.a = to_double(key, trim(item.substr(c1 + 1, c2 - c1 - 1)));
        seg.b = to_double(key, trim(item.substr(c2 + 1)));
      }
      spec.segments.push_back(seg);
    }
    if (spec.segments.empty())
      throw std::invalid_argument("config key '" + key + "': empty tag specification");
    return spec;
  }

  BoundaryTag tag_at(double coord, const std::string& side) const {
    for (const auto& s : segments)
      if (s.whole || (coord >= s.a - 1e-12 && coord <= s.b + 1e-12)) return s.tag;
    throw std::runtime_error("boundary face at coordinate " + std::to_string(coord) +
                             " on side '" + side + "' matches no tag segment");
  }
};

}  // namespace

CaseSetup RunConfig::make_case() const {
  CaseSetup cs;
  cs.rect = rect;
  cs.coeff = ElasticityCoefficients::plane_strain(E, nu);
  const SideSpec sb = SideSpec::parse("geometry.bottom", bottom);
  const SideSpec sr = SideSpec::parse("geometry.right", right);
  const SideSpec st = SideSpec::parse("geometry.top", top);
  const SideSpec sl = SideSpec::parse("geometry.left", left);
  const Rect r = rect;
  cs.tagger = [sb, sr, st, sl, r](const Vec2& mid) {
    const double tol = 1e-12 * std::max(r.x1 - r.x0, r.y1 - r.y0);
    if (std::abs(mid.y() - r.y0) < tol) return sb.tag_at(mid.x(), "bottom");
    if (std::abs(mid.y() - r.y1) < tol) return st.tag_at(mid.x(), "top");
    if (std::abs(mid.x() - r.x0) < tol) return sl.tag_at(mid.y(), "left");
    if (std::abs(mid.x() - r.x1) < tol) return sr.tag_at(mid.y(), "right");
    throw std::runtime_error("boundary face midpoint on no side of the rectangle");
  };
  const Vec2 body = f;
  cs.body_force = [body](const Vec2&) { return body; };
  const Vec2 gb = gn_bottom, gr = gn_right, gt = gn_top, gl = gn_left;
  cs.neumann = [gb, gr, gt, gl, r](const Vec2& x) {
    const double tol = 1e-12 * std::max(r.x1 - r.x0, r.y1 - r.y0);
    if (std::abs(x.y() - r.y0) < tol) return gb;
    if (std::abs(x.y() - r.y1) < tol) return gt;
    if (std::abs(x.x() - r.x0) < tol) return gl;
    return gr;
  };
  cs.gamma0 = gamma0;
  return cs;
}

TriMesh RunConfig::make_initial_mesh() const {
  const CaseSetup cs = make_case();
  return build_rect_mesh(nx, ny, rect, cs.tagger);
}

TriMesh RunConfig::make_uniform_initial_mesh() const {
  const CaseSetup cs = make_case();
  return build_rect_mesh(uniform_nx, uniform_ny, rect, cs.tagger);
}

AdaptiveConfig RunConfig::make_adaptive() const {
  AdaptiveConfig a;
  a.gamma_reg = gamma_reg;
  a.gamma_lin = gamma_lin;
  a.delta_init = delta_init;
  a.fraction = fraction;
  a.max_steps = budget;
  a.mode = stopping_mode == "local" ? AdaptiveConfig::StoppingMode::Local
                                    : AdaptiveConfig::StoppingMode::Global;
  a.gamma_reg_local = gamma_reg_local;
  a.gamma_lin_local = gamma_lin_local;
  a.evenness_ratio = evenness_ratio;
  a.newton_tol = newton_tol;
  a.newton_max_iters = newton_max_iters;
  a.lifting = lifting == "refined" ? LiftingEnrichment::RefinedMesh
                                   : LiftingEnrichment::DegreePlusOneSameMesh;
  return a;
}

NitscheConfig RunConfig::make_nitsche() const {
  NitscheConfig n;
  n.gamma0 = gamma0;
  n.delta = delta_init;
  n.newton_tol = newton_tol;
  n.newton_max_iters = newton_max_iters;
  return n;
}

namespace {

struct Setter {
  std::function<void(RunConfig&, const std::string&, const std::string&)> apply;
};

const std::map<std::string, Setter>& known_keys() {
  static const std::map<std::string, Setter> keys = {
      {"geometry.x0", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.rect.x0 = to_double(k, v);
       }}},
      {"geometry.x1", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.rect.x1 = to_double(k, v);
       }}},
      {"geometry.y0", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.rect.y0 = to_double(k, v);
       }}},
      {"geometry.y1", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.rect.y1 = to_double(k, v);
       }}},
      {"geometry.nx", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.nx = to_int(k, v);
       }}},
      {"geometry.ny", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.ny = to_int(k, v);
       }}},
      {"geometry.bottom", {[](RunConfig& c, const std::string&, const std::string& v) {
         c.bottom = v;
       }}},
      {"geometry.right", {[](RunConfig& c, const std::string&, const std::string& v) {
         c.right = v;
       }}},
      {"geometry.top", {[](RunConfig& c, const std::string&, const std::string& v) {
         c.top = v;
       }}},
      {"geometry.left", {[](RunConfig& c, const std::string&, const std::string& v) {
         c.left = v;
       }}},
      {"material.E", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.E = to_double(k, v);
       }}},
      {"material.nu", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.nu = to_double(k, v);
       }}},
      {"fem.degree", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.degree = to_int(k, v);
       }}},
      {"load.fx", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.f.x() = to_double(k, v);
       }}},
      {"load.fy", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.f.y() = to_double(k, v);
       }}},
      {"load.gn_bottom", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.gn_bottom = to_vec2(k, v);
       }}},
      {"load.gn_right", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.gn_right = to_vec2(k, v);
       }}},
      {"load.gn_top", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.gn_top = to_vec2(k, v);
       }}},
      {"load.gn_left", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.gn_left = to_vec2(k, v);
       }}},
      {"nitsche.gamma0", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.gamma0 = to_double(k, v);
       }}},
      {"nitsche.delta_init", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.delta_init = to_double(k, v);
       }}},
      {"nitsche.delta", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.delta = to_double(k, v);
       }}},
      {"nitsche.newton_tol", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.newton_tol = to_double(k, v);
       }}},
      {"nitsche.newton_max_iters",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.newton_max_iters = to_int(k, v);
       }}},
      {"adaptive.gamma_reg", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.gamma_reg = to_double(k, v);
       }}},
      {"adaptive.gamma_lin", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.gamma_lin = to_double(k, v);
       }}},
      {"adaptive.fraction", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.fraction = to_double(k, v);
       }}},
      {"adaptive.budget", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.budget = to_int(k, v);
       }}},
      {"adaptive.stopping_mode",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.stopping_mode = v; }}},
      {"adaptive.gamma_reg_local",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.gamma_reg_local = to_double(k, v);
       }}},
      {"adaptive.gamma_lin_local",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.gamma_lin_local = to_double(k, v);
       }}},
      {"adaptive.evenness_ratio",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.evenness_ratio = to_double(k, v);
       }}},
      {"adaptive.lifting",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.lifting = v; }}},
      {"adaptive.uniform_budget",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.uniform_budget = to_int(k, v);
       }}},
      {"adaptive.uniform_nx", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.uniform_nx = to_int(k, v);
       }}},
      {"adaptive.uniform_ny", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.uniform_ny = to_int(k, v);
       }}},
      {"reference.nx", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.ref_nx = to_int(k, v);
       }}},
      {"reference.ny", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.ref_ny = to_int(k, v);
       }}},
      {"reference.degree", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.ref_degree = to_int(k, v);
       }}},
      {"reference.delta_final",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.ref_delta_final = to_double(k, v);
       }}},
      {"reference.newton_tol", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.ref_newton_tol = to_double(k, v);
       }}},
      {"output.dir",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }}},
      {"output.write_vtk", {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.write_vtk = to_bool(k, v);
       }}},
      {"output.write_estimator_csv",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
         c.write_estimator_csv = to_bool(k, v);
       }}},
  };
  return keys;
}

std::string env_name(const std::string& key) {
  std::string name = "CE_";
  for (char ch : key) name += ch == '.' ? '_' : static_cast<char>(std::toupper(ch));
  return name;
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw std::invalid_argument("config key '" + key + "': " + why);
  };
  if (c.E <= 0.0) fail("material.E", "must be positive");
  if (c.nu <= -1.0 || c.nu >= 0.5)
    fail("material.nu", "plane strain requires -1 < nu < 0.5");
  if (c.degree != 1 && c.degree != 2) fail("fem.degree", "must be 1 or 2");
  if (!(c.rect.x1 > c.rect.x0)) fail("geometry.x1", "rectangle has no width");
  if (!(c.rect.y1 > c.rect.y0)) fail("geometry.y1", "rectangle has no height");
  if (c.nx < 1) fail("geometry.nx", "must be >= 1");
  if (c.ny < 1) fail("geometry.ny", "must be >= 1");
  if (c.gamma0 <= 0.0) fail("nitsche.gamma0", "must be positive");
  if (c.delta_init <= 0.0) fail("nitsche.delta_init", "must be positive");
  if (c.delta <= 0.0) fail("nitsche.delta", "must be positive");
  if (c.newton_tol <= 0.0) fail("nitsche.newton_tol", "must be positive");
  if (c.newton_max_iters < 1) fail("nitsche.newton_max_iters", "must be >= 1");
  if (c.gamma_reg <= 0.0 || c.gamma_reg >= 1.0) fail("adaptive.gamma_reg", "must be in (0,1)");
  if (c.gamma_lin <= 0.0 || c.gamma_lin >= 1.0) fail("adaptive.gamma_lin", "must be in (0,1)");
  if (c.fraction <= 0.0 || c.fraction > 1.0) fail("adaptive.fraction", "must be in (0,1]");
  if (c.budget < 0) fail("adaptive.budget", "must be >= 0");
  if (c.stopping_mode != "global" && c.stopping_mode != "local")
    fail("adaptive.stopping_mode", "must be 'global' or 'local'");
  if (c.lifting != "same_mesh" && c.lifting != "refined")
    fail("adaptive.lifting", "must be 'same_mesh' or 'refined'");
  if (c.uniform_budget < 0) fail("adaptive.uniform_budget", "must be >= 0");
  if (c.ref_nx < 1 || c.ref_ny < 1) fail("reference.nx", "must be >= 1");
  if (c.ref_degree != 1 && c.ref_degree != 2) fail("reference.degree", "must be 1 or 2");
  if (c.ref_delta_final <= 0.0) fail("reference.delta_final", "must be positive");
  // tag specifications must parse
  SideSpec::parse("geometry.bottom", c.bottom);
  SideSpec::parse("geometry.right", c.right);
  SideSpec::parse("geometry.top", c.top);
  SideSpec::parse("geometry.left", c.left);
  // material invariants of the Lame conversion
  ElasticityCoefficients::plane_strain(c.E, c.nu).validate();
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  bool have_E = false, have_nu = false;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'section.key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = known_keys().find(key);
    if (it == known_keys().end())
      throw std::invalid_argument("unknown config key '" + key + "'");
    it->second.apply(cfg, key, value);
    if (key == "material.E") have_E = true;
    if (key == "material.nu") have_nu = true;
  }

  // environment overrides
  for (const auto& [key, setter] : known_keys()) {
    if (const char* env = std::getenv(env_name(key).c_str())) {
      setter.apply(cfg, key, env);
      if (key == "material.E") have_E = true;
      if (key == "material.nu") have_nu = true;
    }
  }

  std::string missing;
  if (!have_E) missing += " material.E";
  if (!have_nu) missing += " material.nu";
  if (!missing.empty())
    throw std::invalid_argument("missing required config keys:" + missing);

  // defaults derived from the material
  if (cfg.gamma0 <= 0.0) cfg.gamma0 = 100.0 * cfg.E;
  if (cfg.delta_init <= 0.0) cfg.delta_init = cfg.E;
  if (cfg.delta <= 0.0) cfg.delta = cfg.E / 100.0;

  validate(cfg);
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace ce
