#pragma once

#include "knotflow/curve.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace knotflow::testing {

inline constexpr double pi = std::numbers::pi;

// Constant-speed circle of radius r traversed once over R / (period Z).
inline HermiteCurve circle(std::size_t n, double r = 1.0 / (2.0 * pi), double period = 1.0) {
    const double w = 2.0 * pi / period;
    return from_samples(
        PeriodicPartition::uniform(n, period),
        [=](double x) { return Vec3(r * std::cos(w * x), r * std::sin(w * x), 0.0); },
        [=](double x) { return Vec3(-r * w * std::sin(w * x), r * w * std::cos(w * x), 0.0); });
}

// Smooth embedded closed curve: a circle of radius 1 with small random
// low-frequency Fourier modes in every coordinate.
inline HermiteCurve random_embedded_curve(std::uint64_t seed, std::size_t n = 50) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coef(-0.08, 0.08);
    double a[3][3][2];
    for (auto &c : a)
        for (auto &k : c)
            for (auto &v : k) v = coef(rng);
    const double w = 2.0 * pi;
    auto f = [=](double x) {
        Vec3 p(std::cos(w * x), std::sin(w * x), 0.0);
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < 3; ++k)
                p[c] += a[c][k][0] * std::cos((k + 2) * w * x) + a[c][k][1] * std::sin((k + 2) * w * x);
        return p;
    };
    auto df = [=](double x) {
        Vec3 p(-w * std::sin(w * x), w * std::cos(w * x), 0.0);
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < 3; ++k)
                p[c] += (k + 2) * w * (-a[c][k][0] * std::sin((k + 2) * w * x) + a[c][k][1] * std::cos((k + 2) * w * x));
        return p;
    };
    return from_samples(PeriodicPartition::uniform(n), f, df);
}

inline Eigen::VectorXd random_field(std::size_t n_nodes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd v(dofs_per_node * n_nodes);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
    return v;
}

inline Eigen::VectorXd translation_field(std::size_t n_nodes, const Vec3 &t) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dofs_per_node * n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) v.segment<3>(position_dof(i, 0)) = t;
    return v;
}

inline HermiteCurve moved(const HermiteCurve &curve, const Eigen::VectorXd &field, double s) {
    return with_dofs(curve.partition, to_dofs(curve) + s * field);
}

inline HermiteCurve rigid_motion(const HermiteCurve &curve, const Eigen::Matrix3d &rot, const Vec3 &shift) {
    HermiteCurve out = curve;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.positions[i] = rot * curve.positions[i] + shift;
        out.derivatives[i] = rot * curve.derivatives[i];
    }
    return out;
}

// Gerono lemniscate lifted so the strands at the projected double point sit at
// heights +-height.
inline HermiteCurve lifted_lemniscate(std::size_t n, double height) {
    const double w = 2.0 * pi;
    return from_samples(
        PeriodicPartition::uniform(n),
        [=](double x) { return Vec3(std::cos(w * x), std::sin(w * x) * std::cos(w * x), height * std::sin(w * x)); },
        [=](double x) {
            return Vec3(-w * std::sin(w * x), w * std::cos(2.0 * w * x), height * w * std::cos(w * x));
        });
}

struct IsotopyFixture {
    HermiteCurve before;
    HermiteCurve passage; // strands swapped through each other
    HermiteCurve rigid;   // small rotation and translation of `before`
};

inline Eigen::Matrix3d random_rotation(std::mt19937_64 &rng, double max_angle) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> angle(-max_angle, max_angle);
    Vec3 axis(normal(rng), normal(rng), normal(rng));
    return Eigen::AngleAxisd(angle(rng), axis.normalized()).toRotationMatrix();
}

// Trial `seed` of the randomized isotopy fixtures: random resolution, strand
// height and placement; the passage mirrors the heights, the rigid motion
// turns by at most 0.05 rad and shifts by at most 0.1.
inline IsotopyFixture isotopy_fixture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> nodes(16, 80);
    std::uniform_real_distribution<double> height(0.05, 0.5), unit(-1.0, 1.0);
    const std::size_t n = static_cast<std::size_t>(nodes(rng));
    const double h = height(rng);
    const Eigen::Matrix3d place = random_rotation(rng, pi);
    const Vec3 offset(unit(rng), unit(rng), unit(rng));
    IsotopyFixture f;
    f.before = rigid_motion(lifted_lemniscate(n, h), place, offset);
    f.passage = rigid_motion(lifted_lemniscate(n, -h), place, offset);
    const Eigen::Matrix3d turn = random_rotation(rng, 0.05);
    const Vec3 shift = 0.1 / std::sqrt(3.0) * Vec3(unit(rng), unit(rng), unit(rng));
    f.rigid = rigid_motion(f.before, turn, shift);
    return f;
}

inline double relative_error(double value, double reference) {
    return std::abs(value - reference) / std::abs(reference);
}

} // namespace knotflow::testing
