#include "ce/quadrature.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace ce {

namespace {

// Gauss-Legendre nodes/weights on [0,1] by the Golub-Welsch eigenvalue method.
void gauss_legendre01(int n, std::vector<double>& pts, std::vector<double>& wts) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  pts.resize(n);
  wts.resize(n);
  for (int i = 0; i < n; ++i) {
    pts[i] = 0.5 * (es.eigenvalues()[i] + 1.0);
    const double v0 = es.eigenvectors()(0, i);
    wts[i] = v0 * v0;  // weights on [0,1] sum to 1
  }
}

TriQuadrature make_triangle_rule(int degree) {
  // Conical product rule: x with weight (1-x) handled by one extra
  // Gauss-Legendre point, y = s(1-x) with s Gauss-Legendre.
  const int ns = (degree + 2) / 2;      // exact for degree d in s
  const int nx = (degree + 3) / 2;      // exact for degree d+1 in x
  std::vector<double> xs, wx, ss, ws;
  gauss_legendre01(nx, xs, wx);
  gauss_legendre01(ns, ss, ws);
  TriQuadrature rule;
  rule.degree = degree;
  rule.points.reserve(nx * ns);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ns; ++j) {
      const double x = xs[i];
      const double y = ss[j] * (1.0 - x);
      TriQuadrature::Point p;
      p.l1 = x;
      p.l2 = y;
      p.l0 = 1.0 - x - y;
      p.w = wx[i] * ws[j] * (1.0 - x);
      rule.points.push_back(p);
    }
  return rule;
}

}  // namespace

const TriQuadrature& triangle_rule(int degree) {
  if (degree < 0) throw std::invalid_argument("triangle_rule: negative degree");
  if (degree < 1) degree = 1;
  static std::map<int, TriQuadrature> cache;
  auto it = cache.find(degree);
  if (it == cache.end()) it = cache.emplace(degree, make_triangle_rule(degree)).first;
  return it->second;
}

const SegQuadrature& segment_rule(int degree) {
  if (degree < 0) throw std::invalid_argument("segment_rule: negative degree");
  if (degree < 1) degree = 1;
  static std::map<int, SegQuadrature> cache;
  auto it = cache.find(degree);
  if (it == cache.end()) {
    SegQuadrature rule;
    rule.degree = degree;
    gauss_legendre01((degree + 2) / 2, rule.points, rule.weights);
    it = cache.emplace(degree, std::move(rule)).first;
  }
  return it->second;
}

}  // namespace ce
