#pragma once

#include "knotflow/curve.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <vector>

namespace knotflow {

struct TpParams {
    double q = 3.0;       // exponent, 2 < q < 4
    double epsilon = 0.0; // diagonal cutoff in parameter distance
    int gauss_order = 2;  // Gauss points per direction per cell

    void validate() const;
};

// q with the usual cutoff epsilon = 2 h_max.
TpParams default_tp_params(const PeriodicPartition &partition, double q = 3.0, int gauss_order = 2);

// Off-diagonal tensor Gauss rule: every ordered pair of distinct segments whose
// periodic midpoint distance is at least epsilon contributes gauss_order^2
// points.
class QuadratureRule {
public:
    struct CellPair {
        std::uint32_t x_segment;
        std::uint32_t y_segment;
    };
    struct Point {
        std::size_t segment;
        double x;      // parameter
        double weight; // Gauss weight times segment length
        std::array<double, 4> value;
        std::array<double, 4> first;
    };

    QuadratureRule(const PeriodicPartition &partition, double epsilon, int gauss_order);
    QuadratureRule(const PeriodicPartition &partition, const TpParams &params)
        : QuadratureRule(partition, params.epsilon, params.gauss_order) {}

    const PeriodicPartition &partition() const { return m_partition; }
    double epsilon() const { return m_epsilon; }
    int points_per_segment() const { return m_order; }
    const std::vector<CellPair> &cell_pairs() const { return m_pairs; }
    // Segment-major: point g of segment s has index s * points_per_segment() + g.
    const std::vector<Point> &points() const { return m_points; }

private:
    PeriodicPartition m_partition;
    double m_epsilon;
    int m_order;
    std::vector<CellPair> m_pairs;
    std::vector<Point> m_points;
};

// <a ^ b, c ^ d> = <a,c><b,d> - <a,d><b,c>.
double wedge_pair(const Vec3 &a, const Vec3 &b, const Vec3 &c, const Vec3 &d);

// (1/q) iint |u'(y) ^ (u(x)-u(y))|^q / |u(x)-u(y)|^{2q}, epsilon-truncated.
double tp_energy(const HermiteCurve &curve, const TpParams &params, const QuadratureRule &rule);

// Parametrization invariant functional with |P^perp_{u'(y)} (u(x)-u(y))| and
// the |u'(x)||u'(y)| line elements, same 1/q prefactor.
double tp_classical(const HermiteCurve &curve, const TpParams &params, const QuadratureRule &rule);

// Representation of w -> dTP(u)[w] in the Hermite dof basis, together with
// the energy computed in the same sweep.
struct FirstVariation {
    Eigen::VectorXd dofs; // layout of to_dofs()
    double energy = 0.0;

    Vec3 position_gradient(std::size_t node) const { return dofs.segment<3>(position_dof(node, 0)); }
    Vec3 derivative_gradient(std::size_t node) const { return dofs.segment<3>(derivative_dof(node, 0)); }
    double pair(const Eigen::VectorXd &field) const { return dofs.dot(field); }
};

FirstVariation tp_first_variation(const HermiteCurve &curve, const TpParams &params,
                                  const QuadratureRule &rule);

// d^2 TP(u)[v, w] for discrete fields given as dof vectors.
double tp_second_variation(const HermiteCurve &curve, const Eigen::VectorXd &v,
                           const Eigen::VectorXd &w, const TpParams &params,
                           const QuadratureRule &rule);

// epsilon-truncated [u']^p_{W^{s,p}} = iint |u'(x)-u'(y)|^p / |x-y|^{1+sp}.
double sobolev_seminorm(const HermiteCurve &curve, double s, double p, const QuadratureRule &rule);

namespace detail {

// Values entering the second variation integrands at one quadrature pair
// (x, y): a field f contributes f'(y) and f(x) - f(y).
struct Slot {
    Vec3 dy;
    Vec3 delta;
};

// Pointwise integrands (without quadrature weights). u is the base curve.
double form_x(double q, const Slot &u, const Slot &v, const Slot &w, const Slot &phi, const Slot &psi,
              const Slot &xi, const Slot &eta, const Slot &zeta, const Slot &theta, const Slot &iota);
double form_m(double q, const Slot &u, const Slot &v, const Slot &w);
double form_a(double q, const Slot &u, const Slot &v, const Slot &w);
double form_n(double q, const Slot &u, const Slot &v, const Slot &w, const Slot &phi, const Slot &psi,
              const Slot &xi, const Slot &eta);
double form_p(double q, const Slot &u, const Slot &v, const Slot &w, const Slot &phi);
double form_b(double q, const Slot &u, const Slot &v, const Slot &w, const Slot &phi, const Slot &psi,
              const Slot &xi, const Slot &eta);
double second_variation_integrand(double q, const Slot &u, const Slot &v, const Slot &w);

} // namespace detail

} // namespace knotflow
