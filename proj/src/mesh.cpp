#include "ce/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ce {

char tag_to_char(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::Dirichlet: return 'D';
    case BoundaryTag::Neumann: return 'N';
    case BoundaryTag::Contact: return 'C';
    default: return '?';
  }
}

BoundaryTag tag_from_char(char c) {
  switch (c) {
    case 'D': return BoundaryTag::Dirichlet;
    case 'N': return BoundaryTag::Neumann;
    case 'C': return BoundaryTag::Contact;
    default: throw std::invalid_argument(std::string("unknown boundary tag '") + c + "'");
  }
}

Vec2 TriMesh::barycenter(int t) const {
  const auto& tri = triangles[t];
  return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
}

namespace {

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace

Vec2 TriMesh::normal_out_of(int f, int t) const {
  const Face& face = faces[f];
  int opp = -1;
  for (int v : triangles[t])
    if (v != face.v0 && v != face.v1) opp = v;
  if (opp < 0) throw std::invalid_argument("normal_out_of: triangle not incident to face");
  const Vec2 mid = 0.5 * (vertices[face.v0] + vertices[face.v1]);
  return face.normal.dot(vertices[opp] - mid) > 0.0 ? Vec2(-face.normal) : face.normal;
}

std::vector<int> TriMesh::boundary_faces() const {
  std::vector<int> out;
  for (int f = 0; f < num_faces(); ++f)
    if (faces[f].is_boundary()) out.push_back(f);
  return out;
}

bool TriMesh::vertex_on_boundary(int v) const {
  for (const Face& f : faces)
    if (f.is_boundary() && (f.v0 == v || f.v1 == v)) return true;
  return false;
}

bool TriMesh::vertex_on_dirichlet(int v) const {
  for (const Face& f : faces)
    if (f.is_boundary() && f.tag == BoundaryTag::Dirichlet && (f.v0 == v || f.v1 == v))
      return true;
  return false;
}

std::vector<int> star_of_face(const TriMesh& mesh, int f) {
  std::set<int> elems;
  for (int v : {mesh.faces[f].v0, mesh.faces[f].v1})
    for (int t : mesh.vertex_triangles[v]) elems.insert(t);
  return {elems.begin(), elems.end()};
}

std::vector<int> star_of_triangle(const TriMesh& mesh, int t) {
  std::set<int> elems;
  for (int v : mesh.triangles[t])
    for (int s : mesh.vertex_triangles[v]) elems.insert(s);
  return {elems.begin(), elems.end()};
}

TriMesh build_from_cells(std::vector<Vec2> vertices,
                         std::vector<std::array<int, 3>> triangles,
                         const std::function<BoundaryTag(int, int)>& boundary_tag) {
  TriMesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.triangles = std::move(triangles);

  const int nt = mesh.num_triangles();
  mesh.h_T.resize(nt);
  mesh.area.resize(nt);
  mesh.tri_faces.assign(nt, {-1, -1, -1});

  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec2& a = mesh.vertices[tri[0]];
    const Vec2& b = mesh.vertices[tri[1]];
    const Vec2& c = mesh.vertices[tri[2]];
    const double ar = signed_area(a, b, c);
    if (ar <= 0.0) throw std::runtime_error("non-positive triangle area in mesh");
    mesh.area[t] = ar;
    mesh.h_T[t] = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
  }

  std::map<std::pair<int, int>, int> face_index;
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      int p = tri[(k + 1) % 3], q = tri[(k + 2) % 3];  // edge opposite local vertex k
      std::pair<int, int> key{std::min(p, q), std::max(p, q)};
      auto it = face_index.find(key);
      if (it == face_index.end()) {
        Face f;
        f.v0 = key.first;
        f.v1 = key.second;
        f.owner = t;
        const Vec2 d = mesh.vertices[f.v1] - mesh.vertices[f.v0];
        f.length = d.norm();
        f.normal = Vec2(d.y(), -d.x()) / f.length;
        face_index.emplace(key, mesh.num_faces());
        mesh.tri_faces[t][k] = mesh.num_faces();
        mesh.faces.push_back(f);
      } else {
        Face& f = mesh.faces[it->second];
        if (f.neighbor >= 0) throw std::runtime_error("face shared by more than two triangles");
        f.neighbor = t;
        mesh.tri_faces[t][k] = it->second;
      }
    }
  }

  for (Face& f : mesh.faces) {
    if (!f.is_boundary()) continue;
    // orient outward: away from the owner's opposite vertex
    const auto& tri = mesh.triangles[f.owner];
    int opp = -1;
    for (int v : tri)
      if (v != f.v0 && v != f.v1) opp = v;
    const Vec2 mid = 0.5 * (mesh.vertices[f.v0] + mesh.vertices[f.v1]);
    if (f.normal.dot(mesh.vertices[opp] - mid) > 0.0) f.normal = -f.normal;
    f.tag = boundary_tag(f.v0, f.v1);
    if (f.tag == BoundaryTag::None)
      throw std::runtime_error("boundary face without tag");
  }

  mesh.vertex_triangles.assign(mesh.num_vertices(), {});
  for (int t = 0; t < nt; ++t)
    for (int v : mesh.triangles[t]) mesh.vertex_triangles[v].push_back(t);

  return mesh;
}

TriMesh build_rect_mesh(int nx, int ny, const Rect& rect, const BoundaryTagger& tagger) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("build_rect_mesh: nx, ny must be >= 1");
  if (!(rect.x1 > rect.x0) || !(rect.y1 > rect.y0))
    throw std::invalid_argument("build_rect_mesh: degenerate rectangle");

  std::vector<Vec2> verts;
  verts.reserve((nx + 1) * (ny + 1));
  const double dx = (rect.x1 - rect.x0) / nx;
  const double dy = (rect.y1 - rect.y0) / ny;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      verts.emplace_back(rect.x0 + i * dx, rect.y0 + j * dy);

  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<std::array<int, 3>> tris;
  tris.reserve(2 * nx * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      // flip the diagonal in the two corner cells that would otherwise leave
      // a corner vertex with a single incident triangle
      const bool flip = (i == nx - 1 && j == 0) || (i == 0 && j == ny - 1);
      if (flip) {
        tris.push_back({a, b, d});
        tris.push_back({b, c, d});
      } else {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
      }
    }

  auto tag = [positions = verts, &tagger](int v0, int v1) {
    return tagger(0.5 * (positions[v0] + positions[v1]));
  };
  return build_from_cells(std::move(verts), std::move(tris), tag);
}

TriMesh refine(const TriMesh& mesh, const std::vector<int>& marked) {
  const int nt = mesh.num_triangles();
  std::vector<char> red(nt, 0);
  for (int t : marked) {
    if (t < 0 || t >= nt) throw std::invalid_argument("refine: marked element out of range");
    red[t] = 1;
  }

  // edges to split, keyed by sorted vertex pair
  std::set<std::pair<int, int>> split;
  auto edge_key = [](int p, int q) { return std::make_pair(std::min(p, q), std::max(p, q)); };
  auto mark_edges = [&](int t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) split.insert(edge_key(tri[k], tri[(k + 1) % 3]));
  };
  for (int t = 0; t < nt; ++t)
    if (red[t]) mark_edges(t);

  // closure: two or more split edges promote the element to red
  bool changed = true;
  while (changed) {
    changed = false;
    for (int t = 0; t < nt; ++t) {
      if (red[t]) continue;
      const auto& tri = mesh.triangles[t];
      int count = 0;
      for (int k = 0; k < 3; ++k)
        if (split.count(edge_key(tri[k], tri[(k + 1) % 3]))) ++count;
      if (count >= 2) {
        red[t] = 1;
        mark_edges(t);
        changed = true;
      }
    }
  }

  std::vector<Vec2> verts = mesh.vertices;
  std::map<std::pair<int, int>, int> midpoint;
  for (const auto& e : split) {
    midpoint[e] = static_cast<int>(verts.size());
    verts.push_back(0.5 * (mesh.vertices[e.first] + mesh.vertices[e.second]));
  }

  // tags of old boundary faces, propagated to their halves
  std::map<std::pair<int, int>, BoundaryTag> btags;
  for (const Face& f : mesh.faces) {
    if (!f.is_boundary()) continue;
    auto key = edge_key(f.v0, f.v1);
    auto mit = midpoint.find(key);
    if (mit == midpoint.end()) {
      btags[key] = f.tag;
    } else {
      btags[edge_key(f.v0, mit->second)] = f.tag;
      btags[edge_key(mit->second, f.v1)] = f.tag;
    }
  }

  std::vector<std::array<int, 3>> tris;
  tris.reserve(4 * nt);
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[t];
    if (red[t]) {
      const int m01 = midpoint.at(edge_key(tri[0], tri[1]));
      const int m12 = midpoint.at(edge_key(tri[1], tri[2]));
      const int m20 = midpoint.at(edge_key(tri[2], tri[0]));
      tris.push_back({tri[0], m01, m20});
      tris.push_back({m01, tri[1], m12});
      tris.push_back({m20, m12, tri[2]});
      tris.push_back({m01, m12, m20});
    } else {
      int se = -1;
      for (int k = 0; k < 3; ++k)
        if (split.count(edge_key(tri[(k + 1) % 3], tri[(k + 2) % 3]))) se = k;
      if (se < 0) {
        tris.push_back(tri);
      } else {
        // green bisection: connect the hanging midpoint to the opposite vertex
        const int a = tri[se], b = tri[(se + 1) % 3], c = tri[(se + 2) % 3];
        const int m = midpoint.at(edge_key(b, c));
        tris.push_back({a, b, m});
        tris.push_back({a, m, c});
      }
    }
  }

  auto tag = [&](int v0, int v1) {
    auto it = btags.find(edge_key(v0, v1));
    return it == btags.end() ? BoundaryTag::None : it->second;
  };
  return build_from_cells(std::move(verts), std::move(tris), tag);
}

TriMesh uniform_refine(const TriMesh& mesh) {
  std::vector<int> all(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) all[t] = t;
  return refine(mesh, all);
}

VertexPatch vertex_patch(const TriMesh& mesh, int a) {
  if (a < 0 || a >= mesh.num_vertices()) throw std::invalid_argument("vertex_patch: bad vertex");
  VertexPatch patch;
  patch.vertex = a;
  patch.elements = mesh.vertex_triangles[a];
  std::sort(patch.elements.begin(), patch.elements.end());

  std::set<int> in_patch(patch.elements.begin(), patch.elements.end());
  std::set<int> seen;
  for (int t : patch.elements) {
    for (int f : mesh.tri_faces[t]) {
      if (!seen.insert(f).second) continue;
      const Face& face = mesh.faces[f];
      const bool internal =
          !face.is_boundary() && in_patch.count(face.owner) && in_patch.count(face.neighbor);
      if (internal) continue;
      if (!face.is_boundary()) {
        patch.lid_faces.push_back(f);
        continue;
      }
      VertexPatch::BFace bf;
      bf.face = f;
      bf.contains_center = (face.v0 == a || face.v1 == a);
      switch (face.tag) {
        case BoundaryTag::Dirichlet: patch.dirichlet_faces.push_back(bf); break;
        case BoundaryTag::Neumann: patch.neumann_faces.push_back(bf); break;
        case BoundaryTag::Contact: patch.contact_faces.push_back(bf); break;
        default: break;
      }
    }
  }
  std::sort(patch.lid_faces.begin(), patch.lid_faces.end());
  auto by_face = [](const VertexPatch::BFace& x, const VertexPatch::BFace& y) {
    return x.face < y.face;
  };
  std::sort(patch.dirichlet_faces.begin(), patch.dirichlet_faces.end(), by_face);
  std::sort(patch.neumann_faces.begin(), patch.neumann_faces.end(), by_face);
  std::sort(patch.contact_faces.begin(), patch.contact_faces.end(), by_face);

  if (mesh.vertex_on_dirichlet(a))
    patch.kind = VertexPatch::Kind::DirichletTouching;
  else if (mesh.vertex_on_boundary(a))
    patch.kind = VertexPatch::Kind::Boundary;
  else
    patch.kind = VertexPatch::Kind::Interior;
  return patch;
}

void write_mesh(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open mesh file for writing: " + path);
  out.precision(17);
  const auto bfaces = mesh.boundary_faces();
  out << "vertices " << mesh.num_vertices() << "\n";
  out << "triangles " << mesh.num_triangles() << "\n";
  out << "boundary " << bfaces.size() << "\n";
  for (const Vec2& v : mesh.vertices) out << v.x() << " " << v.y() << "\n";
  for (const auto& t : mesh.triangles) out << t[0] << " " << t[1] << " " << t[2] << "\n";
  for (int f : bfaces)
    out << mesh.faces[f].v0 << " " << mesh.faces[f].v1 << " " << tag_to_char(mesh.faces[f].tag)
        << "\n";
}

TriMesh read_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file: " + path);
  std::string kw;
  int nv = 0, nt = 0, nb = 0;
  in >> kw >> nv;
  if (kw != "vertices") throw std::runtime_error("mesh file: expected 'vertices'");
  in >> kw >> nt;
  if (kw != "triangles") throw std::runtime_error("mesh file: expected 'triangles'");
  in >> kw >> nb;
  if (kw != "boundary") throw std::runtime_error("mesh file: expected 'boundary'");
  std::vector<Vec2> verts(nv);
  for (auto& v : verts) in >> v.x() >> v.y();
  std::vector<std::array<int, 3>> tris(nt);
  for (auto& t : tris) in >> t[0] >> t[1] >> t[2];
  std::map<std::pair<int, int>, BoundaryTag> btags;
  for (int k = 0; k < nb; ++k) {
    int v0, v1;
    char c;
    in >> v0 >> v1 >> c;
    btags[{std::min(v0, v1), std::max(v0, v1)}] = tag_from_char(c);
  }
  if (!in) throw std::runtime_error("mesh file truncated: " + path);
  auto tag = [&](int v0, int v1) {
    auto it = btags.find({std::min(v0, v1), std::max(v0, v1)});
    return it == btags.end() ? BoundaryTag::None : it->second;
  };
  return build_from_cells(std::move(verts), std::move(tris), tag);
}

double hat_value(const TriMesh& mesh, int t, int a, const Vec2& x) {
  const auto& tri = mesh.triangles[t];
  int local = -1;
  for (int k = 0; k < 3; ++k)
    if (tri[k] == a) local = k;
  if (local < 0) throw std::invalid_argument("hat_value: vertex not in triangle");
  const Vec2& p0 = mesh.vertices[tri[local]];
  const Vec2& p1 = mesh.vertices[tri[(local + 1) % 3]];
  const Vec2& p2 = mesh.vertices[tri[(local + 2) % 3]];
  return signed_area(x, p1, p2) / signed_area(p0, p1, p2);
}

Vec2 hat_gradient(const TriMesh& mesh, int t, int a) {
  const auto& tri = mesh.triangles[t];
  int local = -1;
  for (int k = 0; k < 3; ++k)
    if (tri[k] == a) local = k;
  if (local < 0) throw std::invalid_argument("hat_gradient: vertex not in triangle");
  const Vec2& p1 = mesh.vertices[tri[(local + 1) % 3]];
  const Vec2& p2 = mesh.vertices[tri[(local + 2) % 3]];
  const Vec2 e = p2 - p1;  // opposite edge
  Vec2 n(e.y(), -e.x());   // normal to the opposite edge
  const Vec2& p0 = mesh.vertices[tri[local]];
  if (n.dot(p0 - p1) < 0.0) n = -n;
  return n / n.dot(p0 - p1);
}

}  // namespace ce
