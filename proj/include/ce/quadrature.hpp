#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ce/mesh.hpp"

namespace ce {

/// Quadrature on the reference triangle, points in barycentric coordinates,
/// weights summing to the reference measure 1/2.
struct TriQuadrature {
  struct Point {
    double l0, l1, l2;
    double w;
  };
  std::vector<Point> points;
  int degree = 0;  // exact for total polynomial degree <= degree
};

/// Quadrature on the reference segment [0,1], weights summing to 1.
struct SegQuadrature {
  std::vector<double> points;
  std::vector<double> weights;
  int degree = 0;
};

/// Smallest cached rule exact at least to the requested degree.
const TriQuadrature& triangle_rule(int degree);
const SegQuadrature& segment_rule(int degree);

/// Integrate f over triangle t of the mesh.
template <typename F>
double integrate_triangle(const TriMesh& mesh, int t, int degree, F&& f) {
  const TriQuadrature& q = triangle_rule(degree);
  const auto& tri = mesh.triangles[t];
  const Vec2& a = mesh.vertices[tri[0]];
  const Vec2& b = mesh.vertices[tri[1]];
  const Vec2& c = mesh.vertices[tri[2]];
  double sum = 0.0;
  for (const auto& p : q.points) {
    const Vec2 x = p.l0 * a + p.l1 * b + p.l2 * c;
    sum += p.w * f(x);
  }
  return 2.0 * mesh.area[t] * sum;
}

/// Integrate f over face fid; f receives the physical point.
template <typename F>
double integrate_face(const TriMesh& mesh, int fid, int degree, F&& f) {
  const SegQuadrature& q = segment_rule(degree);
  const Face& face = mesh.faces[fid];
  const Vec2& a = mesh.vertices[face.v0];
  const Vec2& b = mesh.vertices[face.v1];
  double sum = 0.0;
  for (std::size_t i = 0; i < q.points.size(); ++i) {
    const Vec2 x = a + q.points[i] * (b - a);
    sum += q.weights[i] * f(x);
  }
  return face.length * sum;
}

}  // namespace ce
