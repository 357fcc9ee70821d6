#pragma once

#include <vector>

namespace knotflow {

struct GaussRule {
    std::vector<double> points;  // in [0,1]
    std::vector<double> weights; // sum to 1
};

// n-point Gauss-Legendre rule on the unit interval.
GaussRule gauss_legendre(int n);

} // namespace knotflow
