#include "knotflow/diagnostics.hpp"

#include "knotflow/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace knotflow {

bool stability_verdict(double e_prev, double e_curr, double tau) {
    return (e_curr - e_prev) / tau <= 1.5 * std::sqrt(tau);
}

double segment_distance(const Vec3 &p0, const Vec3 &p1, const Vec3 &q0, const Vec3 &q1) {
    const Vec3 d1 = p1 - p0, d2 = q1 - q0, r = p0 - q0;
    const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
    constexpr double tiny = 1e-300;
    double s = 0.0, t = 0.0;
    if (a <= tiny && e <= tiny) return r.norm();
    if (a <= tiny) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = d1.dot(r);
        if (e <= tiny) {
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = d1.dot(d2);
            const double denom = a * e - b * b;
            s = denom > 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    return ((p0 + s * d1) - (q0 + t * d2)).norm();
}

namespace {

bool nonadjacent(std::size_t i, std::size_t j, std::size_t n) {
    if (i == j) return false;
    const std::size_t d = i > j ? i - j : j - i;
    return d != 1 && d != n - 1;
}

} // namespace

double min_pair_distance(const HermiteCurve &curve) {
    const std::size_t n = curve.size();
    const auto &p = curve.positions;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t i1 = curve.partition.next(i);
        for (std::size_t j = i + 2; j < n; ++j) {
            if (!nonadjacent(i, j, n)) continue;
            best = std::min(best, segment_distance(p[i], p[i1], p[j], p[curve.partition.next(j)]));
        }
    }
    return best;
}

double arclength_deviation(const HermiteCurve &curve, double speed, bool include_midpoints) {
    const double l2 = speed * speed;
    double dev = 0.0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        dev = std::max(dev, std::abs(curve.derivatives[i].squaredNorm() - l2) / l2);
        if (include_midpoints)
            dev = std::max(dev, std::abs(evaluate_on_segment(curve, i, 0.5, 1).squaredNorm() - l2) / l2);
    }
    return dev;
}

double bilipschitz(const HermiteCurve &curve, int samples_per_segment) {
    const auto &part = curve.partition;
    const std::size_t n = curve.size();
    const std::size_t m = static_cast<std::size_t>(std::max(1, samples_per_segment));
    std::vector<double> xs;
    std::vector<Vec3> us;
    xs.reserve(n * m);
    us.reserve(n * m);
    double min_speed = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t k = 0; k < m; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(m);
            xs.push_back(part.at(s, t));
            us.push_back(evaluate_on_segment(curve, s, t, 0));
            min_speed = std::min(min_speed, evaluate_on_segment(curve, s, t, 1).norm());
        }
        min_speed = std::min(min_speed, evaluate_on_segment(curve, s, 0.5 / m, 1).norm());
    }
    constexpr double limit = 1e12;
    auto ratio = [&](double x, double y) {
        const double d = part.distance(x, y);
        const double e = (evaluate(curve, x, 0) - evaluate(curve, y, 0)).norm();
        if (d == 0.0) return 0.0;
        if (e * limit <= d) throw NonEmbedded("bilipschitz: curve is not embedded");
        return d / e;
    };

    double best = 0.0;
    std::size_t ba = 0, bb = 0;
    const std::size_t total = xs.size();
    for (std::size_t a = 0; a < total; ++a) {
        for (std::size_t b = a + 1; b < total; ++b) {
            const double d = part.distance(xs[a], xs[b]);
            const double e = (us[a] - us[b]).norm();
            if (e * limit <= d) throw NonEmbedded("bilipschitz: curve is not embedded");
            const double r = d / e;
            if (r > best) {
                best = r;
                ba = a;
                bb = b;
            }
        }
    }

    // Alternating golden-section search in x and y around the best pair.
    const double step = part.h_max() / static_cast<double>(m);
    double x = xs[ba], y = xs[bb];
    constexpr double golden = 0.6180339887498949;
    auto maximize = [&](auto &&fn, double c) {
        double lo = c - step, hi = c + step;
        double p = hi - golden * (hi - lo), q = lo + golden * (hi - lo);
        double fp = fn(p), fq = fn(q);
        for (int it = 0; it < 40; ++it) {
            if (fp > fq) {
                hi = q;
                q = p;
                fq = fp;
                p = hi - golden * (hi - lo);
                fp = fn(p);
            } else {
                lo = p;
                p = q;
                fp = fq;
                q = lo + golden * (hi - lo);
                fq = fn(q);
            }
        }
        const double c_new = 0.5 * (lo + hi);
        return fn(c_new) > fn(c) ? c_new : c;
    };
    for (int round = 0; round < 4; ++round) {
        x = maximize([&](double t) { return ratio(t, y); }, x);
        y = maximize([&](double t) { return ratio(x, t); }, y);
    }
    best = std::max(best, ratio(x, y));
    if (min_speed * limit <= 1.0) throw NonEmbedded("bilipschitz: curve is not regular");
    return std::max(best, 1.0 / min_speed);
}

namespace {

double det3(const Vec3 &a, const Vec3 &b, const Vec3 &c) { return a.dot(b.cross(c)); }

// Real roots in [0,1] of c0 + c1 s + c2 s^2 + c3 s^3 (or lower degree), found by
// bisection on the monotone pieces between critical points. Critical points
// are appended too since tangential touches do not change sign.
void candidate_times(const std::array<double, 4> &c, std::vector<double> &out) {
    auto f = [&](double s) { return ((c[3] * s + c[2]) * s + c[1]) * s + c[0]; };
    std::vector<double> knots{0.0, 1.0};
    // derivative 3 c3 s^2 + 2 c2 s + c1
    const double qa = 3.0 * c[3], qb = 2.0 * c[2], qc = c[1];
    if (qa != 0.0) {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            const double r = -0.5 * (qb + std::copysign(sq, qb));
            if (r != 0.0) {
                knots.push_back(r / qa);
                knots.push_back(qc / r);
            } else {
                knots.push_back(0.0);
            }
        }
    } else if (qb != 0.0) {
        knots.push_back(-qc / qb);
    }
    std::vector<double> sorted;
    for (double k : knots)
        if (k >= 0.0 && k <= 1.0) sorted.push_back(k);
    std::sort(sorted.begin(), sorted.end());
    for (double k : sorted) out.push_back(k);
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        double lo = sorted[i], hi = sorted[i + 1];
        double flo = f(lo), fhi = f(hi);
        if (flo == 0.0 || fhi == 0.0 || (flo < 0.0) == (fhi < 0.0)) continue;
        for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double fm = f(mid);
            if ((fm < 0.0) == (flo < 0.0)) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        out.push_back(0.5 * (lo + hi));
    }
}

struct MovingSegment {
    Vec3 a0, a1; // start, end of the edge at s = 0
    Vec3 b0, b1; // at s = 1
    Vec3 p(double s) const { return (1.0 - s) * a0 + s * b0; }
    Vec3 q(double s) const { return (1.0 - s) * a1 + s * b1; }
};

std::array<double, 4> coplanarity_cubic(const MovingSegment &e, const MovingSegment &f) {
    const Vec3 u0 = e.a1 - e.a0, u1 = (e.b1 - e.b0) - u0;
    const Vec3 v0 = f.a0 - e.a0, v1 = (f.b0 - e.b0) - v0;
    const Vec3 w0 = f.a1 - e.a0, w1 = (f.b1 - e.b0) - w0;
    return {det3(u0, v0, w0), det3(u1, v0, w0) + det3(u0, v1, w0) + det3(u0, v0, w1),
            det3(u1, v1, w0) + det3(u1, v0, w1) + det3(u0, v1, w1), det3(u1, v1, w1)};
}

// Orientation of point r relative to segment (p, q) projected along n; quadratic in s.
std::array<double, 4> orientation_quadratic(const Vec3 &p0, const Vec3 &p1, const Vec3 &q0, const Vec3 &q1,
                                            const Vec3 &r0, const Vec3 &r1, const Vec3 &n) {
    const Vec3 u0 = q0 - p0, u1 = (q1 - p1) - u0;
    const Vec3 v0 = r0 - p0, v1 = (r1 - p1) - v0;
    return {n.dot(u0.cross(v0)), n.dot(u1.cross(v0) + u0.cross(v1)), n.dot(u1.cross(v1)), 0.0};
}

bool pair_collides(const MovingSegment &e, const MovingSegment &f, double tol) {
    std::vector<double> times;
    const auto cubic = coplanarity_cubic(e, f);
    const double scale = std::max({(e.a1 - e.a0).norm(), (f.a0 - e.a0).norm(), (f.a1 - e.a0).norm(),
                                   (e.b1 - e.b0).norm(), (f.b0 - e.b0).norm(), (f.b1 - e.b0).norm()});
    const double flat = 1e-12 * scale * scale * scale;
    const bool coplanar = std::all_of(cubic.begin(), cubic.end(), [&](double c) { return std::abs(c) <= flat; });
    if (!coplanar) {
        candidate_times(cubic, times);
    } else {
        // Both edges stay in one plane: contacts start with an endpoint
        // crossing the other edge's line.
        Vec3 n = Vec3::Zero();
        for (double s : {0.0, 1.0}) {
            for (const Vec3 &c : {(e.q(s) - e.p(s)).cross(f.p(s) - e.p(s)), (e.q(s) - e.p(s)).cross(f.q(s) - e.p(s)),
                                  (f.q(s) - f.p(s)).cross(e.p(s) - f.p(s))}) {
                if (c.norm() > n.norm()) n = c;
            }
        }
        times.push_back(0.0);
        times.push_back(1.0);
        if (n.norm() > 0.0) {
            n.normalize();
            candidate_times(orientation_quadratic(e.a0, e.b0, e.a1, e.b1, f.a0, f.b0, n), times);
            candidate_times(orientation_quadratic(e.a0, e.b0, e.a1, e.b1, f.a1, f.b1, n), times);
            candidate_times(orientation_quadratic(f.a0, f.b0, f.a1, f.b1, e.a0, e.b0, n), times);
            candidate_times(orientation_quadratic(f.a0, f.b0, f.a1, f.b1, e.a1, e.b1, n), times);
        } else {
            // collinear throughout; sample
            for (int k = 1; k < 64; ++k) times.push_back(k / 64.0);
        }
    }
    for (double s : times) {
        if (segment_distance(e.p(s), e.q(s), f.p(s), f.q(s)) <= tol) return true;
    }
    return false;
}

} // namespace

bool isotopy_monitor(const HermiteCurve &curve_prev, const HermiteCurve &curve_curr, double tolerance) {
    const std::size_t n = curve_prev.size();
    if (curve_curr.size() != n) throw std::invalid_argument("isotopy_monitor: curves differ in size");
    const double tol = tolerance * std::max(polyline_length(curve_prev), polyline_length(curve_curr));
    const auto &P = curve_prev.positions;
    const auto &Q = curve_curr.positions;

    std::vector<MovingSegment> edges(n);
    std::vector<Eigen::AlignedBox3d> boxes(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = curve_prev.partition.next(i);
        edges[i] = {P[i], P[j], Q[i], Q[j]};
        Eigen::AlignedBox3d box(P[i]);
        box.extend(P[j]).extend(Q[i]).extend(Q[j]);
        box.min().array() -= tol;
        box.max().array() += tol;
        boxes[i] = box;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 2; j < n; ++j) {
            if (!nonadjacent(i, j, n)) continue;
            if (!boxes[i].intersects(boxes[j])) continue;
            if (pair_collides(edges[i], edges[j], tol)) return false;
        }
    }
    return true;
}

} // namespace knotflow
