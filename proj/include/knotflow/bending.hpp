#pragma once

#include "knotflow/curve.hpp"

#include <Eigen/SparseCore>

namespace knotflow {

using SparseMatrix = Eigen::SparseMatrix<double>;

// (v'', w'')_{L^2} on the Hermite dofs (layout of to_dofs()).
struct StiffnessForm {
    SparseMatrix matrix;

    double apply(const Eigen::VectorXd &v) const { return v.dot(matrix * v); }
};

StiffnessForm assemble_stiffness(const PeriodicPartition &partition);

// (v, w)_{L^2} and (v', w')_{L^2} on the same dofs.
SparseMatrix assemble_mass(const PeriodicPartition &partition);
SparseMatrix assemble_first_derivative_form(const PeriodicPartition &partition);

// (kappa/2) int |u''|^2, exact (u'' is piecewise linear).
double bending_energy(const HermiteCurve &curve, double kappa);

} // namespace knotflow
