#include "ce/vtk.hpp"

#include <fstream>
#include <stdexcept>

namespace ce {

void write_vtk(const TriMesh& mesh, const DisplacementField* u, const EstimatorReport* report,
               const EquilibratedStress* stress, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open vtk file: " + path);
  out.precision(12);
  out << "# vtk DataFile Version 3.0\n";
  out << "contact-equilibrate fields\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const Vec2& v : mesh.vertices) out << v.x() << ' ' << v.y() << " 0\n";
  out << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << "\n";
  for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << "\n";
  out << "CELL_TYPES " << mesh.num_triangles() << "\n";
  for (int t = 0; t < mesh.num_triangles(); ++t) out << "5\n";

  if (u) {
    out << "POINT_DATA " << mesh.num_vertices() << "\n";
    out << "VECTORS displacement double\n";
    for (int v = 0; v < mesh.num_vertices(); ++v)
      out << u->coeffs[2 * v] << ' ' << u->coeffs[2 * v + 1] << " 0\n";
  }

  const bool cell_data = report || stress;
  if (cell_data) out << "CELL_DATA " << mesh.num_triangles() << "\n";
  if (report) {
    auto scalars = [&](const char* name, const Eigen::VectorXd& vals) {
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (int t = 0; t < mesh.num_triangles(); ++t) out << vals[t] << "\n";
    };
    scalars("eta_tot", report->tot);
    scalars("eta_osc", report->osc);
    scalars("eta_str", report->str);
    scalars("eta_cnt", report->cnt);
  }
  if (stress) {
    out << "TENSORS equilibrated_stress double\n";
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      const Eigen::Matrix2d s = stress->eval_total(t, mesh.barycenter(t));
      out << s(0, 0) << ' ' << s(0, 1) << " 0\n";
      out << s(1, 0) << ' ' << s(1, 1) << " 0\n";
      out << "0 0 0\n";
    }
  }
}

}  // namespace ce
