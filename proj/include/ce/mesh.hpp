#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ce {

using Vec2 = Eigen::Vector2d;

enum class BoundaryTag : std::uint8_t { None = 0, Dirichlet, Neumann, Contact };

char tag_to_char(BoundaryTag t);
BoundaryTag tag_from_char(char c);

/// Mesh edge. Interior faces have two incident triangles (owner/neighbor),
/// boundary faces exactly one (owner) and a boundary tag.
struct Face {
  int v0 = -1, v1 = -1;     // v0 < v1
  int owner = -1;           // triangle index
  int neighbor = -1;        // -1 on the boundary
  BoundaryTag tag = BoundaryTag::None;
  double length = 0.0;
  Vec2 normal = Vec2::Zero();  // lower->higher vertex convention; outward on the boundary

  bool is_boundary() const { return neighbor < 0; }
};

/// Conforming triangulation of a polygonal domain with tagged boundary faces.
/// Immutable after construction; refinement produces a new mesh.
class TriMesh {
public:
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;  // positively oriented
  std::vector<Face> faces;
  std::vector<std::array<int, 3>> tri_faces;  // face k is opposite local vertex k
  std::vector<double> h_T;                    // element diameters
  std::vector<double> area;
  std::vector<std::vector<int>> vertex_triangles;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  int num_faces() const { return static_cast<int>(faces.size()); }

  Vec2 barycenter(int t) const;
  /// Outward normal of boundary face f as seen from its owner element.
  Vec2 outward_normal(int f) const { return faces[f].normal; }
  /// Normal of face f oriented out of triangle t (t must be incident to f).
  Vec2 normal_out_of(int f, int t) const;
  std::vector<int> boundary_faces() const;
  bool vertex_on_boundary(int v) const;
  /// True if vertex v is an endpoint of some Dirichlet-tagged face.
  bool vertex_on_dirichlet(int v) const;
};

/// Union of the elements sharing a vertex, with its boundary classified for
/// the patchwise reconstruction.
struct VertexPatch {
  enum class Kind { Interior, Boundary, DirichletTouching };

  int vertex = -1;
  Kind kind = Kind::Interior;
  std::vector<int> elements;  // sorted by index

  struct BFace {
    int face = -1;
    bool contains_center = false;  // hat function vanishes on the face otherwise
  };
  std::vector<int> lid_faces;        // patch-boundary faces interior to the domain
  std::vector<BFace> dirichlet_faces;
  std::vector<BFace> neumann_faces;
  std::vector<BFace> contact_faces;
};

/// Elements sharing at least one vertex with face f / triangle t.
std::vector<int> star_of_face(const TriMesh& mesh, int f);
std::vector<int> star_of_triangle(const TriMesh& mesh, int t);

using BoundaryTagger = std::function<BoundaryTag(const Vec2& face_midpoint)>;

struct Rect {
  double x0, x1, y0, y1;
};

/// Structured diagonal-split mesh of a rectangle: 2*nx*ny triangles.
TriMesh build_rect_mesh(int nx, int ny, const Rect& rect, const BoundaryTagger& tagger);

/// Assemble a mesh from raw cells; builds faces, adjacency and checks
/// conformity. Boundary tags are looked up by sorted vertex pair.
TriMesh build_from_cells(std::vector<Vec2> vertices,
                         std::vector<std::array<int, 3>> triangles,
                         const std::function<BoundaryTag(int, int)>& boundary_tag);

/// Red refinement of the marked elements with red-green closure, so the
/// result is again conforming. Boundary tags are inherited. An empty marked
/// set returns a copy.
TriMesh refine(const TriMesh& mesh, const std::vector<int>& marked);

TriMesh uniform_refine(const TriMesh& mesh);

VertexPatch vertex_patch(const TriMesh& mesh, int a);

/// Plain-text mesh format: "vertices N", "triangles M", "boundary K" headers
/// followed by coordinates, vertex triples and boundary records "v0 v1 tag".
void write_mesh(const TriMesh& mesh, const std::string& path);
TriMesh read_mesh(const std::string& path);

/// Hat function of vertex `a` restricted to triangle t (and its constant
/// gradient). `a` must be a vertex of t.
double hat_value(const TriMesh& mesh, int t, int a, const Vec2& x);
Vec2 hat_gradient(const TriMesh& mesh, int t, int a);

}  // namespace ce
