#include "knotflow/knots.hpp"

#include "knotflow/errors.hpp"
#include "knotflow/flow.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>

namespace knotflow {

namespace {

constexpr double pi = std::numbers::pi;

KnotPreset circle_preset() {
    KnotPreset p;
    p.name = "circle";
    p.generator = [](double x) -> Vec3 { return Vec3(std::cos(2 * pi * x), std::sin(2 * pi * x), 0.0) / (2 * pi); };
    p.derivative = [](double x) { return Vec3(-std::sin(2 * pi * x), std::cos(2 * pi * x), 0.0); };
    p.default_length = 1.0;
    p.default_nodes = 200;
    return p;
}

// Fourier 5_2 curve, coefficients in hundredths.
KnotPreset five_two_preset() {
    static const double c[8][3] = {{-33, -57, 34}, {43, 99, -21}, {0, -54, -100}, {214, -159, -93},
                                   {101, -117, -27}, {-47, -5, -16}, {0, -31, 52}, {11, -45, 84}};
    KnotPreset p;
    p.name = "five_two";
    p.generator = [](double x) {
        Vec3 r = Vec3::Zero();
        for (int k = 0; k < 4; ++k) {
            const double w = 2 * pi * (k + 1);
            r += std::cos(w * x) * Vec3(c[2 * k][0], c[2 * k][1], c[2 * k][2]) +
                 std::sin(w * x) * Vec3(c[2 * k + 1][0], c[2 * k + 1][1], c[2 * k + 1][2]);
        }
        return Vec3(r / 100.0);
    };
    p.derivative = [](double x) {
        Vec3 r = Vec3::Zero();
        for (int k = 0; k < 4; ++k) {
            const double w = 2 * pi * (k + 1);
            r += w * (-std::sin(w * x) * Vec3(c[2 * k][0], c[2 * k][1], c[2 * k][2]) +
                      std::cos(w * x) * Vec3(c[2 * k + 1][0], c[2 * k + 1][1], c[2 * k + 1][2]));
        }
        return Vec3(r / 100.0);
    };
    // Gives a polyline length of about 39.919 at 400 nodes.
    p.default_length = 39.94862;
    p.default_nodes = 100;
    p.chord_parametrized = true;
    p.equal_arclength = true;
    return p;
}

KnotPreset trefoil_preset() {
    KnotPreset p;
    p.name = "trefoil_near_triple_circle";
    p.generator = [](double x) {
        const double r = 2.0 + 0.1 * std::cos(4 * pi * x);
        return Vec3(r * std::cos(6 * pi * x), r * std::sin(6 * pi * x), 0.1 * std::sin(4 * pi * x));
    };
    p.derivative = [](double x) {
        const double r = 2.0 + 0.1 * std::cos(4 * pi * x);
        const double dr = -0.4 * pi * std::sin(4 * pi * x);
        return Vec3(dr * std::cos(6 * pi * x) - 6 * pi * r * std::sin(6 * pi * x),
                    dr * std::sin(6 * pi * x) + 6 * pi * r * std::cos(6 * pi * x), 0.4 * pi * std::cos(4 * pi * x));
    };
    p.default_length = 50.0;
    p.default_nodes = 201;
    p.chord_parametrized = true;
    return p;
}

KnotPreset figure_eight_preset() {
    KnotPreset p;
    p.name = "figure_eight";
    p.generator = [](double x) {
        const double r = 2.0 + std::cos(4 * pi * x);
        return Vec3(r * std::cos(6 * pi * x), r * std::sin(6 * pi * x), std::sin(8 * pi * x));
    };
    p.derivative = [](double x) {
        const double r = 2.0 + std::cos(4 * pi * x);
        const double dr = -4 * pi * std::sin(4 * pi * x);
        return Vec3(dr * std::cos(6 * pi * x) - 6 * pi * r * std::sin(6 * pi * x),
                    dr * std::sin(6 * pi * x) + 6 * pi * r * std::cos(6 * pi * x), 8 * pi * std::cos(8 * pi * x));
    };
    p.default_length = 50.0;
    p.default_nodes = 400;
    p.chord_parametrized = true;
    p.smooth = true;
    return p;
}

double cross2(const Eigen::Vector2d &u, const Eigen::Vector2d &v) { return u.x() * v.y() - u.y() * v.x(); }

Eigen::Vector2d rotate(const Eigen::Vector2d &v, double angle) {
    return {std::cos(angle) * v.x() - std::sin(angle) * v.y(), std::sin(angle) * v.x() + std::cos(angle) * v.y()};
}

// Equilateral triangle whose corners are replaced by a clockwise 240 degree
// arc (radius 0.05 side), so the two sides cross once near every corner. The
// arc climbs by one radius and the following side descends again, which puts
// the strands at different heights where they cross.
std::vector<Vec3> twisted_triangle_points() {
    std::array<Eigen::Vector2d, 3> v;
    for (int k = 0; k < 3; ++k) v[k] = {std::cos(pi / 2 + 2 * pi * k / 3), std::sin(pi / 2 + 2 * pi * k / 3)};
    const double side = std::sqrt(3.0);
    const double r = 0.05 * side;
    const double lift = r;
    const double spacing = side / 150.0;

    struct Corner {
        Eigen::Vector2d start, end, center;
    };
    std::array<Corner, 3> corners;
    for (int k = 0; k < 3; ++k) {
        const Eigen::Vector2d &p = v[k];
        const Eigen::Vector2d a = (p - v[(k + 2) % 3]).normalized();
        const Eigen::Vector2d b = (v[(k + 1) % 3] - p).normalized();
        const Eigen::Vector2d right(a.y(), -a.x());
        const Eigen::Vector2d turned = rotate(right, -4 * pi / 3);
        const double s = r * cross2(right - turned, b) / cross2(a, b);
        const Eigen::Vector2d start = p - s * a;
        const Eigen::Vector2d center = start + r * right;
        corners[k] = {start, center - r * turned, center};
    }

    std::vector<Vec3> pts;
    for (int k = 0; k < 3; ++k) {
        const Corner &c = corners[k];
        const int arc_samples = std::max(8, static_cast<int>(std::ceil(4 * pi / 3 * r / spacing)));
        const Eigen::Vector2d radial = c.start - c.center;
        for (int i = 0; i < arc_samples; ++i) {
            const double f = static_cast<double>(i) / arc_samples;
            const Eigen::Vector2d q = c.center + rotate(radial, -f * 4 * pi / 3);
            pts.emplace_back(q.x(), q.y(), f * lift);
        }
        const Corner &n = corners[(k + 1) % 3];
        const double len = (n.start - c.end).norm();
        const int side_samples = std::max(4, static_cast<int>(std::ceil(len / spacing)));
        for (int i = 0; i < side_samples; ++i) {
            const double f = static_cast<double>(i) / side_samples;
            const Eigen::Vector2d q = (1 - f) * c.end + f * n.start;
            pts.emplace_back(q.x(), q.y(), (1 - f) * lift);
        }
    }
    return pts;
}

KnotPreset unknot_preset() {
    auto spline = std::make_shared<PeriodicSpline>(twisted_triangle_points());
    KnotPreset p;
    p.name = "unknot_twisted_triangle";
    p.generator = [spline](double x) { return spline->value(x); };
    p.derivative = [spline](double x) { return spline->derivative(x); };
    p.default_length = 46.86;
    p.default_nodes = 376;
    p.chord_parametrized = true;
    p.smooth = true;
    return p;
}

} // namespace

PeriodicSpline::PeriodicSpline(const std::vector<Vec3> &points) : m_points(points) {
    const std::size_t n = points.size();
    if (n < 3) throw DegenerateCurve("PeriodicSpline: need at least 3 points");
    m_knots.resize(n + 1);
    m_knots[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) m_knots[i + 1] = m_knots[i] + (points[(i + 1) % n] - points[i]).norm();
    const double total = m_knots[n];
    if (!(total > 0.0)) throw DegenerateCurve("PeriodicSpline: zero length");
    for (double &k : m_knots) k /= total;
    m_knots[n] = 1.0;

    auto h = [&](std::size_t i) { return m_knots[i + 1] - m_knots[i]; };
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::MatrixXd rhs(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t prev = (i + n - 1) % n, next = (i + 1) % n;
        const double hp = h(prev), hi = h(i);
        if (!(hp > 0.0) || !(hi > 0.0)) throw DegenerateCurve("PeriodicSpline: repeated point");
        trip.emplace_back(i, prev, hp);
        trip.emplace_back(i, i, 2 * (hp + hi));
        trip.emplace_back(i, next, hi);
        rhs.row(static_cast<Eigen::Index>(i)) =
            (6.0 * ((points[next] - points[i]) / hi - (points[i] - points[prev]) / hp)).transpose();
    }
    Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(a);
    if (lu.info() != Eigen::Success) throw SolveFailure("PeriodicSpline: factorization failed");
    const Eigen::MatrixXd m = lu.solve(rhs);
    m_second.resize(n);
    for (std::size_t i = 0; i < n; ++i) m_second[i] = m.row(static_cast<Eigen::Index>(i)).transpose();
}

std::size_t PeriodicSpline::segment(double &x) const {
    x -= std::floor(x);
    auto it = std::upper_bound(m_knots.begin(), m_knots.end(), x);
    std::size_t i = static_cast<std::size_t>(std::distance(m_knots.begin(), it));
    i = std::clamp<std::size_t>(i, 1, m_points.size()) - 1;
    return i;
}

Vec3 PeriodicSpline::value(double x) const {
    const std::size_t i = segment(x);
    const std::size_t j = (i + 1) % m_points.size();
    const double h = m_knots[i + 1] - m_knots[i];
    const double a = (m_knots[i + 1] - x) / h, b = (x - m_knots[i]) / h;
    return a * m_points[i] + b * m_points[j] +
           ((a * a * a - a) * m_second[i] + (b * b * b - b) * m_second[j]) * (h * h / 6.0);
}

Vec3 PeriodicSpline::derivative(double x) const {
    const std::size_t i = segment(x);
    const std::size_t j = (i + 1) % m_points.size();
    const double h = m_knots[i + 1] - m_knots[i];
    const double a = (m_knots[i + 1] - x) / h, b = (x - m_knots[i]) / h;
    return (m_points[j] - m_points[i]) / h - (3 * a * a - 1) * h / 6.0 * m_second[i] +
           (3 * b * b - 1) * h / 6.0 * m_second[j];
}

std::vector<std::string> preset_names() {
    return {"circle", "five_two", "trefoil_near_triple_circle", "figure_eight", "unknot_twisted_triangle"};
}

KnotPreset preset(const std::string &name) {
    if (name == "circle") return circle_preset();
    if (name == "five_two") return five_two_preset();
    if (name == "trefoil_near_triple_circle" || name == "trefoil") return trefoil_preset();
    if (name == "figure_eight") return figure_eight_preset();
    if (name == "unknot_twisted_triangle") return unknot_preset();
    throw UnknownPreset("unknown preset '" + name + "'");
}

double generator_length(const KnotPreset &preset) {
    constexpr int samples = 8192;
    double len = 0.0;
    for (int i = 0; i < samples; ++i) len += preset.derivative(static_cast<double>(i) / samples).norm();
    return len / samples;
}

std::vector<double> equal_arclength_parameters(const KnotPreset &preset, std::size_t n) {
    // Cumulative length on a fine grid (trapezoidal rule), inverted by linear
    // interpolation.
    constexpr std::size_t fine = 8192;
    std::vector<double> cumulative(fine + 1, 0.0);
    double prev = preset.derivative(0.0).norm();
    for (std::size_t i = 1; i <= fine; ++i) {
        const double cur = preset.derivative(static_cast<double>(i) / fine).norm();
        cumulative[i] = cumulative[i - 1] + 0.5 * (prev + cur) / fine;
        prev = cur;
    }
    const double total = cumulative[fine];
    std::vector<double> xs(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double target = total * static_cast<double>(k) / static_cast<double>(n);
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
        const std::size_t i = std::clamp<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), 1, fine) - 1;
        const double frac = (target - cumulative[i]) / (cumulative[i + 1] - cumulative[i]);
        xs[k] = (static_cast<double>(i) + frac) / fine;
    }
    return xs;
}

HermiteCurve build_preset_curve(const KnotPreset &preset, std::size_t n, double length, std::uint64_t seed) {
    if (n == 0) n = preset.default_nodes;
    if (n < 4) throw DegenerateCurve("build_preset_curve: need at least 4 nodes");
    const double target = length > 0.0 ? length : preset.default_length;
    const double factor = target / generator_length(preset);
    const auto f = preset.generator;
    const auto df = preset.derivative;
    PeriodicPartition sampling = PeriodicPartition::uniform(n);
    if (preset.equal_arclength) sampling = PeriodicPartition(equal_arclength_parameters(preset, n));
    HermiteCurve curve = from_samples(
        sampling, [&](double x) { return Vec3(factor * f(x)); }, [&](double x) { return Vec3(factor * df(x)); });
    if (preset.chord_parametrized) curve = reparametrize_by_chord_length(curve);
    if (!preset.smooth) return curve;

    // A few small perturbed steps let the flow iron out interpolation kinks.
    FlowParams params;
    params.kappa = 1.0;
    params.rho = 1e-3;
    params.tp = default_tp_params(curve.partition, 3.9);
    params.tau = curve.partition.h_max() / 30.0;
    params.perturb = PerturbSchedule{1, 1e-3};
    FlowState state = make_state(curve, params, seed);
    state = run(std::move(state), params, 10);
    const double polyline_target = polyline_length(state.curve) * target / curve_length(state.curve);
    return reparametrize_by_chord_length(rescale_to_length(state.curve, polyline_target));
}

} // namespace knotflow
