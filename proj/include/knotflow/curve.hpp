#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace knotflow {

using Vec3 = Eigen::Vector3d;
using ParametricMap = std::function<Vec3(double)>;

// Fixed periodic partition x_0 < ... < x_{N-1} of R / (period Z). Segment i
// runs from x_i to x_{i+1}; the last one wraps around to x_0 + period.
class PeriodicPartition {
public:
    PeriodicPartition() = default;
    explicit PeriodicPartition(std::vector<double> nodes, double period = 1.0);

    static PeriodicPartition uniform(std::size_t n, double period = 1.0);

    std::size_t size() const { return m_nodes.size(); }
    double period() const { return m_period; }
    double node(std::size_t i) const { return m_nodes[i]; }
    const std::vector<double> &nodes() const { return m_nodes; }
    double h(std::size_t segment) const { return m_h[segment]; }
    double h_max() const { return m_h_max; }
    std::size_t next(std::size_t i) const { return i + 1 == size() ? 0 : i + 1; }

    // Parameter at local coordinate t in [0,1] of a segment (may exceed period
    // on the wrap segment).
    double at(std::size_t segment, double t) const { return m_nodes[segment] + t * m_h[segment]; }
    double midpoint(std::size_t segment) const { return at(segment, 0.5); }

    // Segment containing x (reduced mod period) and the local coordinate.
    std::pair<std::size_t, double> locate(double x) const;

    // |x - y| on R / (period Z).
    double distance(double x, double y) const;

    PeriodicPartition scaled(double factor) const;

private:
    std::vector<double> m_nodes;
    std::vector<double> m_h;
    double m_period = 1.0;
    double m_h_max = 0.0;
};

// Cubic Hermite shape functions on [0,1] for the dof order
// (p_i, h d_i, p_{i+1}, h d_{i+1}).
struct HermiteShape {
    static std::array<double, 4> value(double t);
    static std::array<double, 4> first(double t);
    static std::array<double, 4> second(double t);
};

// Coefficients c with u^(order)(x) = c0 p_i + c1 d_i + c2 p_{i+1} + c3 d_{i+1}
// on a segment of length h.
std::array<double, 4> hermite_coefficients(double t, double h, int order);

// Periodic piecewise-cubic C^1 curve in R^3, given by nodal positions and
// nodal derivatives over a fixed partition.
struct HermiteCurve {
    PeriodicPartition partition;
    std::vector<Vec3> positions;
    std::vector<Vec3> derivatives;

    std::size_t size() const { return positions.size(); }
};

// u(x), u'(x) or u''(x). u'' is discontinuous at nodes; the right limit is
// returned there.
Vec3 evaluate(const HermiteCurve &curve, double x, int order);
Vec3 evaluate_on_segment(const HermiteCurve &curve, std::size_t segment, double t, int order);

HermiteCurve from_samples(const PeriodicPartition &partition, const ParametricMap &f,
                          const ParametricMap &df);

double polyline_length(const HermiteCurve &curve);
// Length of the Hermite curve itself (Gauss quadrature of |u'|).
double curve_length(const HermiteCurve &curve);

// Similarity scaling so that the polyline length equals target. Positions and
// derivatives are scaled, the parameter domain is kept.
HermiteCurve rescale_to_length(const HermiteCurve &curve, double target);

// Same image, nodes moved to cumulative chord lengths (period = polyline
// length) and derivatives normalized to unit length: a near-arclength
// parametrization with |u'(x_i)| = 1 at every node.
HermiteCurve reparametrize_by_chord_length(const HermiteCurve &curve);

struct CurveScale {
    double target_length = 0.0;
    double speed = 0.0;
};
// Polyline length and the speed length / period it implies.
CurveScale curve_scale(const HermiteCurve &curve);

// Unit-free curvature |u' x u''| / |u'|^3 at every node (right limit of u'').
std::vector<double> nodal_curvature(const HermiteCurve &curve);

// Dof vector layout: node i owns entries 6i..6i+2 (position) and 6i+3..6i+5
// (derivative).
constexpr std::size_t dofs_per_node = 6;
inline std::size_t position_dof(std::size_t node, int c) { return dofs_per_node * node + c; }
inline std::size_t derivative_dof(std::size_t node, int c) { return dofs_per_node * node + 3 + c; }

Eigen::VectorXd to_dofs(const HermiteCurve &curve);
HermiteCurve with_dofs(const PeriodicPartition &partition, const Eigen::VectorXd &dofs);

} // namespace knotflow
