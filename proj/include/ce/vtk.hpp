#pragma once

#include <string>

#include "ce/estimators.hpp"

namespace ce {

/// Legacy ASCII VTK unstructured grid with the displacement as point data
/// and, when given, the local estimators and stress entries as cell data.
void write_vtk(const TriMesh& mesh, const DisplacementField* u, const EstimatorReport* report,
               const EquilibratedStress* stress, const std::string& path);

}  // namespace ce
