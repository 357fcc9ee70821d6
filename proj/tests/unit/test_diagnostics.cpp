#include "knotflow/diagnostics.hpp"
#include "knotflow/errors.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace knotflow;
using namespace knotflow::testing;

namespace {

HermiteCurve polygon(const std::vector<Vec3> &pts) {
    std::vector<Vec3> d(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) d[i] = pts[(i + 1) % pts.size()] - pts[i];
    return {PeriodicPartition::uniform(pts.size()), pts, d};
}

} // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("stability verdict") {
    const double tau = 0.01;
    CHECK(stability_verdict(1.0, 1.0, tau));
    CHECK(stability_verdict(1.0, 0.5, tau));
    CHECK_FALSE(stability_verdict(1.0, 1.0 + 2.0 * std::pow(tau, 1.5), tau));
    CHECK(stability_verdict(1.0, 1.0 + 1.4 * std::pow(tau, 1.5), tau));
}

TEST_CASE("bi-Lipschitz constant of the circle") {
    auto c = circle(100);
    CHECK(bilipschitz(c) == doctest::Approx(pi / 2).epsilon(1e-6));
    std::mt19937_64 rng(3);
    auto moved = rigid_motion(c, random_rotation(rng, pi), Vec3(1, 2, 3));
    CHECK(bilipschitz(moved) == doctest::Approx(bilipschitz(c)).epsilon(1e-10));
}

TEST_CASE("bi-Lipschitz constant blows up as strands approach") {
    double last = 0.0;
    for (double h : {0.4, 0.2, 0.1, 0.05, 0.025}) {
        auto c = lifted_lemniscate(80, h);
        const double b = bilipschitz(c);
        CHECK(b > last);
        double min_speed = 1e300;
        for (std::size_t s = 0; s < c.size(); ++s)
            for (int k = 0; k < 16; ++k) min_speed = std::min(min_speed, evaluate_on_segment(c, s, k / 16.0, 1).norm());
        CHECK(b * min_speed >= 1.0 - 1e-12);
        last = b;
    }
    CHECK_THROWS_AS(bilipschitz(lifted_lemniscate(80, 0.0)), NonEmbedded);
}

TEST_CASE("arclength deviation") {
    auto c = circle(200);
    CHECK(arclength_deviation(c, 1.0, false) < 1e-14);
    CHECK(arclength_deviation(c, 1.0, true) < 1e-5);
    CHECK(arclength_deviation(c, 0.5, false) == doctest::Approx(3.0));
}

TEST_CASE("segment and pair distances") {
    CHECK(segment_distance(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)) == doctest::Approx(1.0));
    CHECK(segment_distance(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, -1, 2), Vec3(0.5, 1, 2)) == doctest::Approx(2.0));
    CHECK(segment_distance(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(3, 0, 0), Vec3(4, 0, 0)) == doctest::Approx(2.0));
    CHECK(segment_distance(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, -1, 0), Vec3(0.5, 1, 0)) == 0.0);

    auto square = polygon({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)});
    CHECK(min_pair_distance(square) == doctest::Approx(1.0));
    CHECK(min_pair_distance(lifted_lemniscate(64, 0.1)) < 0.2);
}

TEST_CASE("isotopy monitor on fixed and moved curves") {
    auto c = lifted_lemniscate(40, 0.3);
    CHECK(isotopy_monitor(c, c));
    // Two parallel strands of a long rectangle pushed through each other.
    auto a = polygon({Vec3(0, 0, 0), Vec3(4, 0, 0), Vec3(4, 1, 0), Vec3(2, 1, 0.5), Vec3(0, 1, 0)});
    auto b = a;
    b.positions[3] = Vec3(2, -1, -0.5);
    CHECK_FALSE(isotopy_monitor(a, b));
    CHECK_THROWS_AS(isotopy_monitor(a, c), std::invalid_argument);
}

TEST_CASE("isotopy monitor on randomized fixtures") {
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
        auto f = isotopy_fixture(trial);
        CHECK_FALSE(isotopy_monitor(f.before, f.passage));
        CHECK(isotopy_monitor(f.before, f.rigid));
    }
}

}
