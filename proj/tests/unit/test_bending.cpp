#include "knotflow/bending.hpp"
#include "support.hpp"

#include <Eigen/Eigenvalues>
#include <doctest.h>

#include <array>
#include <cmath>

using namespace knotflow;
using namespace knotflow::testing;

namespace {

// Five-point Gauss-Legendre on each segment, exact for the degree-6
// polynomials |v|^2, |v'|^2 and |v''|^2 of a cubic field.
double field_integral(const PeriodicPartition &part, const Eigen::VectorXd &v, int order) {
    static const std::array<double, 5> nodes = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                                0.5384693101056831, 0.9061798459386640};
    static const std::array<double, 5> weights = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                                  0.4786286704993665, 0.2369268850561891};
    const HermiteCurve field = with_dofs(part, v);
    double sum = 0.0;
    for (std::size_t s = 0; s < part.size(); ++s)
        for (int g = 0; g < 5; ++g)
            sum += 0.5 * weights[g] * part.h(s) * evaluate_on_segment(field, s, 0.5 * (nodes[g] + 1.0), order).squaredNorm();
    return sum;
}

PeriodicPartition jittered(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.3, 0.3);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = (i + jitter(rng)) / n + 0.3 / n;
    return PeriodicPartition(x);
}

} // namespace

TEST_SUITE("bending") {

TEST_CASE("constant fields carry no bending energy") {
    auto part = PeriodicPartition::uniform(12);
    auto s = assemble_stiffness(part);
    Eigen::VectorXd c = translation_field(12, Vec3(1.0, -2.0, 0.5));
    CHECK((s.matrix * c).norm() < 1e-14 * Eigen::MatrixXd(s.matrix).norm() * c.norm());
    CHECK(bending_energy(with_dofs(part, c), 1.0) == 0.0);
}

TEST_CASE("constant-speed circle matches the closed form") {
    for (double r : {1.0 / (2 * pi), 0.5, 2.0}) {
        const double exact = 0.5 * std::pow(2 * pi, 4) * r * r;
        CHECK(relative_error(bending_energy(circle(400, r), 1.0), exact) < 1e-9);
        CHECK(relative_error(bending_energy(circle(400, r), 3.0), 3.0 * exact) < 1e-9);
    }
    // Interpolation error of the discrete circle decays like h^4.
    const double e1 = std::abs(bending_energy(circle(50), 1.0) - 2 * pi * pi);
    const double e2 = std::abs(bending_energy(circle(100), 1.0) - 2 * pi * pi);
    CHECK(std::log2(e1 / e2) == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("doubly covered circle of length 50") {
    // Arclength parametrization over [0, 50) wrapping twice around radius 50 / (4 pi).
    const double r = 50.0 / (4 * pi), w = 4 * pi / 50.0;
    auto c = from_samples(
        PeriodicPartition::uniform(400, 50.0), [=](double x) { return Vec3(r * std::cos(w * x), r * std::sin(w * x), 0.0); },
        [=](double x) { return Vec3(-std::sin(w * x), std::cos(w * x), 0.0); });
    const double closed_form = 0.5 * 50.0 * std::pow(4 * pi / 50.0, 2);
    CHECK(closed_form == doctest::Approx(8 * pi * pi / 50.0));
    CHECK(relative_error(bending_energy(c, 1.0), closed_form) < 1e-8);
}

TEST_CASE("assembled form reproduces the energy and the elementwise integral") {
    auto part = jittered(17, 4);
    auto s = assemble_stiffness(part);
    for (std::uint64_t seed : {1, 2, 3}) {
        Eigen::VectorXd v = random_field(17, seed);
        const double exact = field_integral(part, v, 2);
        CHECK(relative_error(s.apply(v), exact) < 1e-12);
        CHECK(relative_error(2.0 * bending_energy(with_dofs(part, v), 1.0), exact) < 1e-12);
        CHECK(relative_error(v.dot(assemble_mass(part) * v), field_integral(part, v, 0)) < 1e-12);
        CHECK(relative_error(v.dot(assemble_first_derivative_form(part) * v), field_integral(part, v, 1)) < 1e-12);
    }
}

TEST_CASE("stiffness is symmetric positive semidefinite with translation kernel") {
    auto part = jittered(20, 8);
    Eigen::MatrixXd s = Eigen::MatrixXd(assemble_stiffness(part).matrix);
    CHECK((s - s.transpose()).norm() < 1e-12 * s.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    const auto &values = eig.eigenvalues();
    CHECK(values.minCoeff() >= -1e-12 * s.norm());
    int null = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i) null += values[i] < 1e-10 * values.maxCoeff();
    CHECK(null == 3);
}

}
