#pragma once

#include "knotflow/curve.hpp"

#include <limits>

namespace knotflow {

struct DiagnosticsRecord {
    long step = 0;
    double e_total = 0.0;
    double e_bend = 0.0;
    double e_tp_weighted = 0.0;
    double length = 0.0;
    double arclength_dev = 0.0; // max nodal ||u'|^2 - L^2| / L^2
    double bilipschitz = std::numeric_limits<double>::quiet_NaN(); // NaN when not sampled
    double min_pair_dist = 0.0;
    bool stable = true;
    bool isotopy_ok = true;
};

// (E(u^{k+1}) - E(u^k)) / tau <= (3/2) tau^{1/2}
bool stability_verdict(double e_prev, double e_curr, double tau);

// sup |x-y|_{R/PZ} / |u(x)-u(y)|, sampled at `samples_per_segment` points per
// segment and refined locally around the maximizer; never below 1 / min|u'|.
// Throws NonEmbedded when the ratio exceeds 1e12.
double bilipschitz(const HermiteCurve &curve, int samples_per_segment = 8);

// True iff no pair of nonadjacent edges of the inscribed polygon meets while
// the vertices move linearly from curve_prev to curve_curr. Contacts closer
// than tolerance * polyline length count as violations.
bool isotopy_monitor(const HermiteCurve &curve_prev, const HermiteCurve &curve_curr,
                     double tolerance = 1e-9);

// max over nodes (and segment midpoints) of ||u'(x)|^2 - L^2| / L^2.
double arclength_deviation(const HermiteCurve &curve, double speed, bool include_midpoints = true);

// Minimal distance between nonadjacent edges of the inscribed polygon.
double min_pair_distance(const HermiteCurve &curve);

double segment_distance(const Vec3 &p0, const Vec3 &p1, const Vec3 &q0, const Vec3 &q1);

} // namespace knotflow
