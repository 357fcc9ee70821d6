#include "knotflow/bending.hpp"

#include <array>
#include <vector>

namespace knotflow {

namespace {

using Element = std::array<std::array<double, 4>, 4>;

// Closed-form element matrices of the cubic Hermite basis on a segment of
// length h, dof order (p_i, d_i, p_{i+1}, d_{i+1}).
Element stiffness_element(double h) {
    const double a = 1.0 / (h * h * h);
    return {{{12 * a, 6 * h * a, -12 * a, 6 * h * a},
             {6 * h * a, 4 * h * h * a, -6 * h * a, 2 * h * h * a},
             {-12 * a, -6 * h * a, 12 * a, -6 * h * a},
             {6 * h * a, 2 * h * h * a, -6 * h * a, 4 * h * h * a}}};
}

Element mass_element(double h) {
    const double a = h / 420.0;
    return {{{156 * a, 22 * h * a, 54 * a, -13 * h * a},
             {22 * h * a, 4 * h * h * a, 13 * h * a, -3 * h * h * a},
             {54 * a, 13 * h * a, 156 * a, -22 * h * a},
             {-13 * h * a, -3 * h * h * a, -22 * h * a, 4 * h * h * a}}};
}

Element first_derivative_element(double h) {
    const double a = 1.0 / (30.0 * h);
    return {{{36 * a, 3 * h * a, -36 * a, 3 * h * a},
             {3 * h * a, 4 * h * h * a, -3 * h * a, -h * h * a},
             {-36 * a, -3 * h * a, 36 * a, -3 * h * a},
             {3 * h * a, -h * h * a, -3 * h * a, 4 * h * h * a}}};
}

template <typename ElementFn>
SparseMatrix assemble(const PeriodicPartition &partition, ElementFn element) {
    const std::size_t n = partition.size();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(n * 16 * 3);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t j = partition.next(s);
        const Element e = element(partition.h(s));
        // local dof k -> (node, is_derivative)
        const std::array<std::size_t, 4> node{s, s, j, j};
        const std::array<int, 4> deriv{0, 1, 0, 1};
        for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
                for (int c = 0; c < 3; ++c) {
                    const std::size_t row = deriv[a] ? derivative_dof(node[a], c) : position_dof(node[a], c);
                    const std::size_t col = deriv[b] ? derivative_dof(node[b], c) : position_dof(node[b], c);
                    triplets.emplace_back(static_cast<int>(row), static_cast<int>(col), e[a][b]);
                }
            }
        }
    }
    const int dim = static_cast<int>(dofs_per_node * n);
    SparseMatrix m(dim, dim);
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
}

} // namespace

StiffnessForm assemble_stiffness(const PeriodicPartition &partition) {
    return {assemble(partition, stiffness_element)};
}

SparseMatrix assemble_mass(const PeriodicPartition &partition) { return assemble(partition, mass_element); }

SparseMatrix assemble_first_derivative_form(const PeriodicPartition &partition) {
    return assemble(partition, first_derivative_element);
}

double bending_energy(const HermiteCurve &curve, double kappa) {
    // two-point Gauss is exact for the quadratic |u''|^2
    constexpr double g0 = 0.21132486540518711775, g1 = 0.78867513459481288225;
    double total = 0.0;
    for (std::size_t s = 0; s < curve.size(); ++s) {
        const double h = curve.partition.h(s);
        total += 0.5 * h *
                 (evaluate_on_segment(curve, s, g0, 2).squaredNorm() +
                  evaluate_on_segment(curve, s, g1, 2).squaredNorm());
    }
    return 0.5 * kappa * total;
}

} // namespace knotflow
