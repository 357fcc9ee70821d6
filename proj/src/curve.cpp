#include "knotflow/curve.hpp"

#include "knotflow/errors.hpp"
#include "knotflow/gauss.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace knotflow {

PeriodicPartition::PeriodicPartition(std::vector<double> nodes, double period)
    : m_nodes(std::move(nodes)), m_period(period) {
    const std::size_t n = m_nodes.size();
    if (n < 3) throw std::invalid_argument("PeriodicPartition: need at least 3 nodes");
    if (!(period > 0.0)) throw std::invalid_argument("PeriodicPartition: period must be positive");
    if (m_nodes.front() < 0.0 || m_nodes.back() >= period)
        throw std::invalid_argument("PeriodicPartition: nodes must lie in [0, period)");
    m_h.resize(n);
    for (std::size_t i = 0; i + 1 < n; ++i) m_h[i] = m_nodes[i + 1] - m_nodes[i];
    m_h[n - 1] = m_nodes[0] + period - m_nodes[n - 1];
    for (std::size_t i = 0; i < n; ++i) {
        if (!(m_h[i] > 0.0))
            throw std::invalid_argument("PeriodicPartition: nodes must be strictly increasing");
    }
    m_h_max = *std::max_element(m_h.begin(), m_h.end());
}

PeriodicPartition PeriodicPartition::uniform(std::size_t n, double period) {
    std::vector<double> nodes(n);
    for (std::size_t i = 0; i < n; ++i) nodes[i] = period * static_cast<double>(i) / static_cast<double>(n);
    return PeriodicPartition(std::move(nodes), period);
}

std::pair<std::size_t, double> PeriodicPartition::locate(double x) const {
    double r = std::fmod(x - m_nodes[0], m_period);
    if (r < 0.0) r += m_period;
    r += m_nodes[0];
    // upper_bound finds the first node strictly greater than r
    auto it = std::upper_bound(m_nodes.begin(), m_nodes.end(), r);
    std::size_t seg = it == m_nodes.begin() ? size() - 1 : static_cast<std::size_t>(it - m_nodes.begin()) - 1;
    double t = (r - m_nodes[seg]) / m_h[seg];
    return {seg, std::clamp(t, 0.0, 1.0)};
}

double PeriodicPartition::distance(double x, double y) const {
    double d = std::fmod(std::abs(x - y), m_period);
    return std::min(d, m_period - d);
}

PeriodicPartition PeriodicPartition::scaled(double factor) const {
    std::vector<double> nodes = m_nodes;
    for (double &x : nodes) x *= factor;
    return PeriodicPartition(std::move(nodes), m_period * factor);
}

std::array<double, 4> HermiteShape::value(double t) {
    const double t2 = t * t, t3 = t2 * t;
    return {1.0 - 3.0 * t2 + 2.0 * t3, t - 2.0 * t2 + t3, 3.0 * t2 - 2.0 * t3, t3 - t2};
}

std::array<double, 4> HermiteShape::first(double t) {
    const double t2 = t * t;
    return {6.0 * t2 - 6.0 * t, 1.0 - 4.0 * t + 3.0 * t2, 6.0 * t - 6.0 * t2, 3.0 * t2 - 2.0 * t};
}

std::array<double, 4> HermiteShape::second(double t) {
    return {12.0 * t - 6.0, 6.0 * t - 4.0, 6.0 - 12.0 * t, 6.0 * t - 2.0};
}

std::array<double, 4> hermite_coefficients(double t, double h, int order) {
    switch (order) {
    case 0: {
        auto s = HermiteShape::value(t);
        return {s[0], h * s[1], s[2], h * s[3]};
    }
    case 1: {
        auto s = HermiteShape::first(t);
        return {s[0] / h, s[1], s[2] / h, s[3]};
    }
    case 2: {
        auto s = HermiteShape::second(t);
        return {s[0] / (h * h), s[1] / h, s[2] / (h * h), s[3] / h};
    }
    default:
        throw std::invalid_argument("hermite_coefficients: order must be 0, 1 or 2");
    }
}

Vec3 evaluate_on_segment(const HermiteCurve &curve, std::size_t segment, double t, int order) {
    const std::size_t j = curve.partition.next(segment);
    const auto c = hermite_coefficients(t, curve.partition.h(segment), order);
    return c[0] * curve.positions[segment] + c[1] * curve.derivatives[segment] +
           c[2] * curve.positions[j] + c[3] * curve.derivatives[j];
}

Vec3 evaluate(const HermiteCurve &curve, double x, int order) {
    auto [seg, t] = curve.partition.locate(x);
    return evaluate_on_segment(curve, seg, t, order);
}

HermiteCurve from_samples(const PeriodicPartition &partition, const ParametricMap &f,
                          const ParametricMap &df) {
    HermiteCurve curve{partition, {}, {}};
    curve.positions.reserve(partition.size());
    curve.derivatives.reserve(partition.size());
    for (double x : partition.nodes()) {
        curve.positions.push_back(f(x));
        curve.derivatives.push_back(df(x));
    }
    return curve;
}

double polyline_length(const HermiteCurve &curve) {
    double len = 0.0;
    const std::size_t n = curve.size();
    for (std::size_t i = 0; i < n; ++i)
        len += (curve.positions[curve.partition.next(i)] - curve.positions[i]).norm();
    return len;
}

double curve_length(const HermiteCurve &curve) {
    static const GaussRule rule = gauss_legendre(6);
    double len = 0.0;
    for (std::size_t s = 0; s < curve.size(); ++s) {
        const double h = curve.partition.h(s);
        for (std::size_t g = 0; g < rule.points.size(); ++g)
            len += rule.weights[g] * h * evaluate_on_segment(curve, s, rule.points[g], 1).norm();
    }
    return len;
}

HermiteCurve rescale_to_length(const HermiteCurve &curve, double target) {
    const double len = polyline_length(curve);
    if (!(len > 0.0)) throw DegenerateCurve("rescale_to_length: curve has zero length");
    const double factor = target / len;
    HermiteCurve out = curve;
    for (auto &p : out.positions) p *= factor;
    for (auto &d : out.derivatives) d *= factor;
    return out;
}

HermiteCurve reparametrize_by_chord_length(const HermiteCurve &curve) {
    const std::size_t n = curve.size();
    std::vector<double> nodes(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        nodes[i] = acc;
        acc += (curve.positions[curve.partition.next(i)] - curve.positions[i]).norm();
    }
    if (!(acc > 0.0)) throw DegenerateCurve("reparametrize_by_chord_length: zero length");
    HermiteCurve out{PeriodicPartition(std::move(nodes), acc), curve.positions, curve.derivatives};
    for (std::size_t i = 0; i < n; ++i) {
        const double norm = out.derivatives[i].norm();
        if (!(norm > 0.0))
            throw DegenerateCurve("reparametrize_by_chord_length: vanishing derivative at node " +
                                  std::to_string(i));
        out.derivatives[i] /= norm;
    }
    return out;
}

CurveScale curve_scale(const HermiteCurve &curve) {
    const double len = polyline_length(curve);
    return {len, len / curve.partition.period()};
}

std::vector<double> nodal_curvature(const HermiteCurve &curve) {
    std::vector<double> k(curve.size());
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const Vec3 d1 = curve.derivatives[i];
        const Vec3 d2 = evaluate_on_segment(curve, i, 0.0, 2);
        const double speed = d1.norm();
        k[i] = speed > 0.0 ? d1.cross(d2).norm() / (speed * speed * speed) : 0.0;
    }
    return k;
}

Eigen::VectorXd to_dofs(const HermiteCurve &curve) {
    Eigen::VectorXd v(dofs_per_node * curve.size());
    for (std::size_t i = 0; i < curve.size(); ++i) {
        v.segment<3>(position_dof(i, 0)) = curve.positions[i];
        v.segment<3>(derivative_dof(i, 0)) = curve.derivatives[i];
    }
    return v;
}

HermiteCurve with_dofs(const PeriodicPartition &partition, const Eigen::VectorXd &dofs) {
    const std::size_t n = partition.size();
    if (static_cast<std::size_t>(dofs.size()) != dofs_per_node * n)
        throw std::invalid_argument("with_dofs: dof vector does not match partition");
    HermiteCurve curve{partition, std::vector<Vec3>(n), std::vector<Vec3>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        curve.positions[i] = dofs.segment<3>(position_dof(i, 0));
        curve.derivatives[i] = dofs.segment<3>(derivative_dof(i, 0));
    }
    return curve;
}

} // namespace knotflow
