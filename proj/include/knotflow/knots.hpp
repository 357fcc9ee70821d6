#pragma once

#include "knotflow/curve.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace knotflow {

struct KnotPreset {
    std::string name;
    ParametricMap generator;  // period 1
    ParametricMap derivative; // of generator
    double default_length = 1.0;
    std::size_t default_nodes = 100;
    // Move nodes to chord-length positions (period = length, unit nodal
    // derivatives). Otherwise nodes stay uniform on R/Z with speed ~ length.
    bool chord_parametrized = false;
    // Sample at equal generator arclength instead of equal parameter steps.
    bool equal_arclength = false;
    // Run a few perturbed flow steps before the final rescale.
    bool smooth = false;
};

// Throws UnknownPreset.
KnotPreset preset(const std::string &name);
std::vector<std::string> preset_names();

// Length of the generator itself, by the periodic trapezoidal rule.
double generator_length(const KnotPreset &preset);

// Parameters in [0,1) splitting the generator into n pieces of equal length.
std::vector<double> equal_arclength_parameters(const KnotPreset &preset, std::size_t n);

// Samples the generator scaled to default_length (or `length` if positive) at
// n uniform parameters (n = 0 picks default_nodes), then moves to the
// chord-length parametrization where the preset asks for it. Presets flagged `smooth` additionally get a
// few flow steps with small random perturbations and a final rescale.
HermiteCurve build_preset_curve(const KnotPreset &preset, std::size_t n = 0, double length = 0.0,
                                std::uint64_t seed = 0);

// Periodic C^2 cubic spline through closed-polygon points, parametrized on
// [0,1) proportionally to chord length.
class PeriodicSpline {
public:
    explicit PeriodicSpline(const std::vector<Vec3> &points);
    Vec3 value(double x) const;
    Vec3 derivative(double x) const;

private:
    std::size_t segment(double &x) const;
    std::vector<double> m_knots; // size n + 1, last = 1
    std::vector<Vec3> m_points;
    std::vector<Vec3> m_second;
};

} // namespace knotflow
