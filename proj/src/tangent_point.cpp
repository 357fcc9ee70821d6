#include "knotflow/tangent_point.hpp"

#include "knotflow/errors.hpp"
#include "knotflow/gauss.hpp"
#include "knotflow/parallel.hpp"

#include <cmath>
#include <string>

namespace knotflow {

void TpParams::validate() const {
    if (!(q > 2.0 && q < 4.0)) throw std::invalid_argument("TpParams: q must lie in (2,4)");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("TpParams: epsilon must be nonnegative");
    if (gauss_order < 1) throw std::invalid_argument("TpParams: gauss_order must be positive");
}

TpParams default_tp_params(const PeriodicPartition &partition, double q, int gauss_order) {
    return TpParams{q, 2.0 * partition.h_max(), gauss_order};
}

QuadratureRule::QuadratureRule(const PeriodicPartition &partition, double epsilon, int gauss_order)
    : m_partition(partition), m_epsilon(epsilon), m_order(gauss_order) {
    if (gauss_order < 1) throw std::invalid_argument("QuadratureRule: gauss_order must be positive");
    const std::size_t n = partition.size();
    const GaussRule gauss = gauss_legendre(gauss_order);
    m_points.reserve(n * gauss_order);
    for (std::size_t s = 0; s < n; ++s) {
        const double h = partition.h(s);
        for (int g = 0; g < gauss_order; ++g) {
            const double t = gauss.points[g];
            m_points.push_back(Point{s, partition.at(s, t), gauss.weights[g] * h,
                                     hermite_coefficients(t, h, 0), hermite_coefficients(t, h, 1)});
        }
    }
    // Midpoint distances are sums of rounded segment lengths; a relative slack
    // keeps pairs at exactly epsilon on a uniform mesh from dropping out at random.
    const double cutoff = epsilon - 1e-12 * partition.period();
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (partition.distance(partition.midpoint(i), partition.midpoint(j)) >= cutoff)
                m_pairs.push_back({i, j});
        }
    }
}

double wedge_pair(const Vec3 &a, const Vec3 &b, const Vec3 &c, const Vec3 &d) {
    return a.dot(c) * b.dot(d) - a.dot(d) * b.dot(c);
}

namespace {

struct Samples {
    std::vector<Vec3> value;
    std::vector<Vec3> first;
};

Samples sample(const Eigen::VectorXd &dofs, const QuadratureRule &rule) {
    const auto &part = rule.partition();
    Samples s;
    s.value.reserve(rule.points().size());
    s.first.reserve(rule.points().size());
    for (const auto &pt : rule.points()) {
        const std::size_t i = pt.segment, j = part.next(i);
        const Vec3 pi = dofs.segment<3>(position_dof(i, 0)), di = dofs.segment<3>(derivative_dof(i, 0));
        const Vec3 pj = dofs.segment<3>(position_dof(j, 0)), dj = dofs.segment<3>(derivative_dof(j, 0));
        s.value.push_back(pt.value[0] * pi + pt.value[1] * di + pt.value[2] * pj + pt.value[3] * dj);
        s.first.push_back(pt.first[0] * pi + pt.first[1] * di + pt.first[2] * pj + pt.first[3] * dj);
    }
    return s;
}

Samples sample(const HermiteCurve &curve, const QuadratureRule &rule) {
    if (curve.partition.size() != rule.partition().size())
        throw std::invalid_argument("quadrature rule does not match the curve partition");
    return sample(to_dofs(curve), rule);
}

double embedding_threshold(const HermiteCurve &curve) {
    const double t = 1e-12 * polyline_length(curve);
    return t * t;
}

[[noreturn]] void throw_non_embedded(const QuadratureRule &rule, std::size_t a, std::size_t b) {
    const auto &pts = rule.points();
    throw NonEmbedded("curve is not embedded: u(" + std::to_string(pts[a].x) + ") and u(" +
                      std::to_string(pts[b].x) + ") coincide");
}

// Visits every quadrature pair (a at x, b at y) of the cell pairs in
// [begin, end) and calls fn(a, b, weight).
template <typename Fn>
void for_each_pair(const QuadratureRule &rule, std::size_t begin, std::size_t end, Fn &&fn) {
    const std::size_t g = static_cast<std::size_t>(rule.points_per_segment());
    const auto &pts = rule.points();
    const auto &pairs = rule.cell_pairs();
    for (std::size_t c = begin; c < end; ++c) {
        const std::size_t xs = pairs[c].x_segment * g, ys = pairs[c].y_segment * g;
        for (std::size_t ga = 0; ga < g; ++ga) {
            for (std::size_t gb = 0; gb < g; ++gb) {
                const std::size_t a = xs + ga, b = ys + gb;
                fn(a, b, pts[a].weight * pts[b].weight);
            }
        }
    }
}

// Integrand (1/q)|a ^ b|^q / |b|^{2q} and its partial derivatives.
struct TpKernel {
    double q;

    double value(const Vec3 &a, const Vec3 &b, double b2) const {
        const double ab = a.dot(b);
        const double w = a.squaredNorm() * b2 - ab * ab;
        if (w <= 0.0) return 0.0;
        return std::exp(0.5 * q * std::log(w) - q * std::log(b2)) / q;
    }

    // Returns f and adds weight * df/da, weight * df/db.
    double gradient(const Vec3 &a, const Vec3 &b, double b2, double weight, Vec3 &da, Vec3 &db) const {
        const double a2 = a.squaredNorm();
        const double ab = a.dot(b);
        const double w = a2 * b2 - ab * ab;
        if (w <= 0.0) return 0.0;
        const double f = std::exp(0.5 * q * std::log(w) - q * std::log(b2)) / q;
        const double fw = weight * q * f / w; // 2 df/dW
        da += fw * (b2 * a - ab * b);
        db += fw * (a2 * b - ab * a) - (weight * 2.0 * q * f / b2) * b;
        return f;
    }
};

} // namespace

double tp_energy(const HermiteCurve &curve, const TpParams &params, const QuadratureRule &rule) {
    params.validate();
    const Samples s = sample(curve, rule);
    const double tiny = embedding_threshold(curve);
    const TpKernel kernel{params.q};
    const std::size_t n = rule.cell_pairs().size();
    std::vector<double> partial(block_count(n), 0.0);
    parallel_blocks(n, [&](std::size_t begin, std::size_t end, std::size_t block) {
        double acc = 0.0;
        for_each_pair(rule, begin, end, [&](std::size_t a, std::size_t b, double weight) {
            const Vec3 delta = s.value[a] - s.value[b];
            const double b2 = delta.squaredNorm();
            if (b2 <= tiny) throw_non_embedded(rule, a, b);
            acc += weight * kernel.value(s.first[b], delta, b2);
        });
        partial[block] = acc;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

double tp_classical(const HermiteCurve &curve, const TpParams &params, const QuadratureRule &rule) {
    params.validate();
    const Samples s = sample(curve, rule);
    const double tiny = embedding_threshold(curve);
    const TpKernel kernel{params.q};
    const std::size_t n = rule.cell_pairs().size();
    std::vector<double> partial(block_count(n), 0.0);
    parallel_blocks(n, [&](std::size_t begin, std::size_t end, std::size_t block) {
        double acc = 0.0;
        for_each_pair(rule, begin, end, [&](std::size_t a, std::size_t b, double weight) {
            const Vec3 delta = s.value[a] - s.value[b];
            const double b2 = delta.squaredNorm();
            if (b2 <= tiny) throw_non_embedded(rule, a, b);
            const double sy = s.first[b].norm(), sx = s.first[a].norm();
            // |P^perp b| = |a ^ b| / |a|, and the line elements |u'(x)||u'(y)|
            acc += weight * kernel.value(s.first[b], delta, b2) * std::pow(sy, 1.0 - params.q) * sx;
        });
        partial[block] = acc;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

FirstVariation tp_first_variation(const HermiteCurve &curve, const TpParams &params,
                                  const QuadratureRule &rule) {
    params.validate();
    const Samples s = sample(curve, rule);
    const double tiny = embedding_threshold(curve);
    const TpKernel kernel{params.q};
    const std::size_t npts = rule.points().size();
    const std::size_t n = rule.cell_pairs().size();
    const std::size_t blocks = block_count(n);

    // Per block: gradient with respect to the value and the derivative at
    // every quadrature point.
    struct Accum {
        std::vector<Vec3> value, first;
        double energy = 0.0;
    };
    std::vector<Accum> acc(blocks);
    parallel_blocks(n, [&](std::size_t begin, std::size_t end, std::size_t block) {
        Accum &A = acc[block];
        A.value.assign(npts, Vec3::Zero());
        A.first.assign(npts, Vec3::Zero());
        for_each_pair(rule, begin, end, [&](std::size_t a, std::size_t b, double weight) {
            const Vec3 delta = s.value[a] - s.value[b];
            const double b2 = delta.squaredNorm();
            if (b2 <= tiny) throw_non_embedded(rule, a, b);
            Vec3 da = Vec3::Zero(), db = Vec3::Zero();
            A.energy += weight * kernel.gradient(s.first[b], delta, b2, weight, da, db);
            A.value[a] += db;
            A.value[b] -= db;
            A.first[b] += da;
        });
    });

    FirstVariation out;
    out.dofs = Eigen::VectorXd::Zero(dofs_per_node * curve.size());
    const auto &part = rule.partition();
    for (std::size_t blk = 0; blk < blocks; ++blk) {
        out.energy += acc[blk].energy;
        for (std::size_t k = 0; k < npts; ++k) {
            const auto &pt = rule.points()[k];
            const std::size_t i = pt.segment, j = part.next(i);
            const Vec3 &gv = acc[blk].value[k], &gd = acc[blk].first[k];
            out.dofs.segment<3>(position_dof(i, 0)) += pt.value[0] * gv + pt.first[0] * gd;
            out.dofs.segment<3>(derivative_dof(i, 0)) += pt.value[1] * gv + pt.first[1] * gd;
            out.dofs.segment<3>(position_dof(j, 0)) += pt.value[2] * gv + pt.first[2] * gd;
            out.dofs.segment<3>(derivative_dof(j, 0)) += pt.value[3] * gv + pt.first[3] * gd;
        }
    }
    return out;
}

namespace detail {

namespace {

// |c|^{q-k} / |b|^{2q+m} with c = u'(y) ^ (u(x)-u(y)); zero when c vanishes,
// which is the limit of every form below because each carries at least
// |c|^{q-2} overall.
double weight_factor(double q, const Slot &u, double c_power, double b_power) {
    const double c2 = wedge_pair(u.dy, u.delta, u.dy, u.delta);
    if (c2 <= 0.0) return 0.0;
    const double b2 = u.delta.squaredNorm();
    return std::exp(0.5 * (q - c_power) * std::log(c2) - 0.5 * (2.0 * q + b_power) * std::log(b2));
}

} // namespace

double form_x(double q, const Slot &u, const Slot &v, const Slot &w, const Slot &phi, const Slot &psi,
              const Slot &xi, const Slot &eta, const Slot &zeta, const Slot &theta, const Slot &iota) {
    const double k = weight_factor(q, u, 4.0, 4.0);
    if (k == 0.0) return 0.0;
    return k * wedge_pair(u.dy, u.delta, v.dy, w.delta) * wedge_pair(phi.dy, psi.delta, xi.dy, eta.delta) *
           u.delta.dot(zeta.delta) * theta.delta.dot(iota.delta);
}

double form_m(double q, const Slot &u, const Slot &v, const Slot &w) {
    return form_x(q, u, v, w, u, u, u, u, u, u, u);
}

double form_a(double q, const Slot &u, const Slot &v, const Slot &w) {
    return form_x(q, u, u, u, u, u, u, u, u, v, w);
}

double form_n(double q, const Slot &u, const Slot &v, const Slot &w, const Slot &phi, const Slot &psi,
              const Slot &xi, const Slot &eta) {
    return form_x(q, u, v, w, phi, psi, xi, eta, u, u, u);
}

double form_p(double q, const Slot &u, const Slot &v, const Slot &w, const Slot &phi) {
    return form_x(q, u, v, w, u, u, u, u, phi, u, u);
}

double form_b(double q, const Slot &u, const Slot &v, const Slot &w, const Slot &phi, const Slot &psi,
              const Slot &xi, const Slot &eta) {
    const double k = weight_factor(q, u, 2.0, 4.0);
    if (k == 0.0) return 0.0;
    return k * v.delta.dot(w.delta) * wedge_pair(u.dy, u.delta, phi.dy, psi.delta) * xi.delta.dot(eta.delta);
}

double second_variation_integrand(double q, const Slot &u, const Slot &v, const Slot &w) {
    const double n_terms = (q - 2.0) * (form_n(q, u, u, v, u, u, w, u) + form_n(q, u, u, v, u, u, u, w) +
                                        form_n(q, u, v, u, u, u, w, u) + form_n(q, u, v, u, u, u, u, w)) +
                           form_n(q, u, u, u, w, u, u, v) + form_n(q, u, u, u, u, w, u, v) +
                           form_n(q, u, u, u, w, u, v, u) + form_n(q, u, u, u, u, w, v, u);
    const double p_terms = -2.0 * q * (form_p(q, u, u, v, w) + form_p(q, u, v, u, w));
    const double m_terms = form_m(q, u, v, w) + form_m(q, u, w, v);
    const double b_terms = -2.0 * q * (form_b(q, u, u, v, w, u, u, u) + form_b(q, u, u, v, u, w, u, u)) +
                           4.0 * (q + 1.0) * form_b(q, u, u, v, u, u, u, w);
    return n_terms + p_terms + m_terms + b_terms - 2.0 * form_a(q, u, v, w);
}

} // namespace detail

double tp_second_variation(const HermiteCurve &curve, const Eigen::VectorXd &v, const Eigen::VectorXd &w,
                           const TpParams &params, const QuadratureRule &rule) {
    params.validate();
    const Samples su = sample(curve, rule), sv = sample(v, rule), sw = sample(w, rule);
    const double tiny = embedding_threshold(curve);
    const std::size_t n = rule.cell_pairs().size();
    std::vector<double> partial(block_count(n), 0.0);
    parallel_blocks(n, [&](std::size_t begin, std::size_t end, std::size_t block) {
        double acc = 0.0;
        for_each_pair(rule, begin, end, [&](std::size_t a, std::size_t b, double weight) {
            const detail::Slot u{su.first[b], su.value[a] - su.value[b]};
            if (u.delta.squaredNorm() <= tiny) throw_non_embedded(rule, a, b);
            const detail::Slot vs{sv.first[b], sv.value[a] - sv.value[b]};
            const detail::Slot ws{sw.first[b], sw.value[a] - sw.value[b]};
            acc += weight * detail::second_variation_integrand(params.q, u, vs, ws);
        });
        partial[block] = acc;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

double sobolev_seminorm(const HermiteCurve &curve, double s, double p, const QuadratureRule &rule) {
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("sobolev_seminorm: s must lie in (0,1)");
    if (!(p >= 1.0)) throw std::invalid_argument("sobolev_seminorm: p must be at least 1");
    const Samples smp = sample(curve, rule);
    const auto &pts = rule.points();
    const auto &part = rule.partition();
    const std::size_t n = rule.cell_pairs().size();
    std::vector<double> partial(block_count(n), 0.0);
    parallel_blocks(n, [&](std::size_t begin, std::size_t end, std::size_t block) {
        double acc = 0.0;
        for_each_pair(rule, begin, end, [&](std::size_t a, std::size_t b, double weight) {
            const double diff = (smp.first[a] - smp.first[b]).norm();
            if (diff == 0.0) return;
            const double dist = part.distance(pts[a].x, pts[b].x);
            acc += weight * std::pow(diff, p) / std::pow(dist, 1.0 + s * p);
        });
        partial[block] = acc;
    });
    double total = 0.0;
    for (double x : partial) total += x;
    return total;
}

} // namespace knotflow
