#include "knotflow/curve.hpp"
#include "knotflow/errors.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace knotflow;
using namespace knotflow::testing;

namespace {

HermiteCurve unit_circle(std::size_t n) { return circle(n, 1.0); }

double max_error(const HermiteCurve &c, int order) {
    const double w = 2.0 * pi;
    double err = 0.0;
    for (int k = 0; k < 4000; ++k) {
        const double x = (k + 0.37) / 4000.0;
        Vec3 exact = order == 0 ? Vec3(std::cos(w * x), std::sin(w * x), 0.0)
                                : Vec3(-w * std::sin(w * x), w * std::cos(w * x), 0.0);
        err = std::max(err, (evaluate(c, x, order) - exact).norm());
    }
    return err;
}

} // namespace

TEST_SUITE("curve") {

TEST_CASE("partition stores nodes and the periodic mesh size") {
    PeriodicPartition p({0.0, 0.1, 0.5, 0.6});
    CHECK(p.size() == 4);
    CHECK(p.h(3) == doctest::Approx(0.4));
    CHECK(p.h_max() == doctest::Approx(0.4));
    CHECK(p.distance(0.05, 0.95) == doctest::Approx(0.1));
    auto [seg, t] = p.locate(1.55);
    CHECK(seg == 2);
    CHECK(t == doctest::Approx(0.5));
    CHECK_THROWS_AS(PeriodicPartition({0.0, 0.5, 0.4}), std::invalid_argument);
    CHECK_THROWS_AS(PeriodicPartition({0.0, 0.5, 1.2}), std::invalid_argument);
}

TEST_CASE("constant curve evaluates to its point") {
    const Vec3 p(1.0, -2.0, 3.0);
    auto c = from_samples(PeriodicPartition::uniform(7), [&](double) { return p; },
                          [](double) { return Vec3::Zero().eval(); });
    for (const Vec3 &d : c.derivatives) CHECK(d.norm() == 0.0);
    for (double x : {0.0, 0.13, 0.5, 0.999}) {
        CHECK((evaluate(c, x, 0) - p).norm() == 0.0);
        CHECK(evaluate(c, x, 2).norm() == 0.0);
    }
}

TEST_CASE("circle values and prescribed nodal derivative") {
    auto c = unit_circle(100);
    CHECK((evaluate(c, 0.25, 0) - Vec3(0, 1, 0)).norm() < 1e-7);
    CHECK((evaluate(c, 0.0, 1) - Vec3(0, 2 * pi, 0)).norm() == 0.0);
}

TEST_CASE("Hermite interpolation converges at fourth and third order") {
    double e0 = max_error(unit_circle(32), 0), e0h = max_error(unit_circle(64), 0);
    double e1 = max_error(unit_circle(32), 1), e1h = max_error(unit_circle(64), 1);
    CHECK(std::log2(e0 / e0h) > 3.8);
    CHECK(std::log2(e1 / e1h) > 2.8);
}

TEST_CASE("evaluation is periodic and C1 across nodes") {
    auto c = random_embedded_curve(3, 23);
    for (double x : {0.01, 0.3, 0.77}) {
        for (int order = 0; order < 3; ++order) {
            CHECK((evaluate(c, x, order) - evaluate(c, x + 1.0, order)).norm() < 1e-10);
            CHECK((evaluate(c, x, order) - evaluate(c, x - 2.0, order)).norm() < 1e-10);
        }
    }
    for (std::size_t i = 0; i < c.size(); ++i) {
        const std::size_t prev = (i + c.size() - 1) % c.size();
        CHECK((evaluate_on_segment(c, prev, 1.0, 0) - c.positions[i]).norm() < 1e-13);
        CHECK((evaluate_on_segment(c, prev, 1.0, 1) - c.derivatives[i]).norm() < 1e-11);
        CHECK((evaluate(c, c.partition.node(i), 2) - evaluate_on_segment(c, i, 0.0, 2)).norm() < 1e-12);
    }
}

TEST_CASE("polyline length of simple shapes") {
    std::vector<Vec3> tri = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, std::sqrt(3.0) / 2, 0)};
    HermiteCurve t{PeriodicPartition::uniform(3), tri, {Vec3(1, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 0)}};
    CHECK(polyline_length(t) == doctest::Approx(3.0).epsilon(1e-15));

    // Inscribed regular 100-gon: 200 sin(pi/100), within 1e-3 relative of 2 pi.
    CHECK(polyline_length(unit_circle(100)) == doctest::Approx(200 * std::sin(pi / 100)).epsilon(1e-14));
    CHECK(relative_error(polyline_length(unit_circle(100)), 2 * pi) < 1e-3);
    double last = 0.0;
    for (std::size_t n : {10, 20, 40, 80, 160}) {
        double l = polyline_length(unit_circle(n));
        CHECK(l < 2 * pi);
        CHECK(l > last);
        last = l;
    }
}

TEST_CASE("rescale_to_length is a similarity hitting the target") {
    auto c = unit_circle(100);
    auto r = rescale_to_length(c, 50.0);
    CHECK(relative_error(polyline_length(r), 50.0) < 1e-12);
    CHECK(relative_error(r.positions[0].norm(), 50.0 / (2 * pi)) < 1e-3);
    auto same = rescale_to_length(c, polyline_length(c));
    for (std::size_t i = 0; i < c.size(); ++i) CHECK((same.positions[i] - c.positions[i]).norm() < 1e-14);

    HermiteCurve point{PeriodicPartition::uniform(3), {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()},
                       {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()}};
    CHECK_THROWS_AS(rescale_to_length(point, 1.0), DegenerateCurve);
}

TEST_CASE("chord reparametrization gives unit nodal speed") {
    auto c = reparametrize_by_chord_length(random_embedded_curve(5, 40));
    CHECK(c.partition.period() == doctest::Approx(polyline_length(c)));
    for (const Vec3 &d : c.derivatives) CHECK(d.norm() == doctest::Approx(1.0));
    auto scale = curve_scale(c);
    CHECK(scale.speed == doctest::Approx(1.0));
    CHECK(scale.target_length == doctest::Approx(polyline_length(c)));
    CHECK(curve_scale(unit_circle(200)).speed == doctest::Approx(2 * pi).epsilon(1e-4));
}

TEST_CASE("curvature of the circle and dof round trip") {
    for (double k : nodal_curvature(unit_circle(200))) CHECK(k == doctest::Approx(1.0).epsilon(1e-3));
    auto c = random_embedded_curve(9, 12);
    auto back = with_dofs(c.partition, to_dofs(c));
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(back.positions[i] == c.positions[i]);
        CHECK(back.derivatives[i] == c.derivatives[i]);
    }
    CHECK_THROWS_AS(with_dofs(c.partition, Eigen::VectorXd::Zero(5)), std::invalid_argument);
}

}
