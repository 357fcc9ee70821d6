#pragma once

#include "knotflow/bending.hpp"
#include "knotflow/curve.hpp"
#include "knotflow/diagnostics.hpp"
#include "knotflow/tangent_point.hpp"

#include <Eigen/SparseLU>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace knotflow {

enum class MetricKind { H2, H2Full, DiscreteHr };

struct Metric {
    MetricKind kind = MetricKind::H2;
    double r = 2.0; // exponent of h in the DiscreteHr weight

    std::string name() const;
    static Metric parse(const std::string &name, double r = 2.0);
};

struct PerturbSchedule {
    long period = 100;
    double amplitude = 1e-3;
};

struct FlowParams {
    double kappa = 1.0;
    double rho = 0.1;
    double tau = 1e-2;
    TpParams tp;
    Metric metric;
    std::optional<PerturbSchedule> perturb;

    // Throws ConfigError.
    void validate() const;
};

struct FlowState {
    HermiteCurve curve;
    long step_index = 0;
    double prev_energy = 0.0; // E(curve)
    std::vector<Vec3> tangents_prev;
    std::uint64_t rng_seed = 0;
    double reference_speed = 1.0; // L in |u'|^2 = L^2
    std::mt19937_64 rng;
};

struct EnergyParts {
    double bend = 0.0;
    double tp_weighted = 0.0;
    double total() const { return bend + tp_weighted; }
};

struct SaddleSystem {
    SparseMatrix matrix;
    Eigen::VectorXd rhs;
};

// Metric Gram matrix M_X on the Hermite dofs.
SparseMatrix assemble_metric(const PeriodicPartition &partition, const Metric &metric);

// [[M_X + tau kappa S, B^T], [B, 0]] with one linearized arclength row per node.
SaddleSystem assemble_saddle_system(const HermiteCurve &prev, const Eigen::VectorXd &tp_gradient,
                                    const FlowParams &params, const SparseMatrix &metric,
                                    const SparseMatrix &stiffness);

struct StepReport {
    EnergyParts energy;          // at the new iterate
    double dissipation = 0.0;    // ||d_t u^k||_X^2
    double constraint_residual = 0.0; // max |d_t u'(x_i) . u'_{k-1}(x_i)|
    double solve_residual = 0.0; // relative
};

// Owns the fixed matrices and quadrature of one partition, plus the factorization
// and TP data cached between steps.
class Stepper {
public:
    Stepper(const PeriodicPartition &partition, const FlowParams &params);

    const FlowParams &params() const { return m_params; }
    // Throws ConfigError and leaves the old parameters in place when invalid.
    void set_params(const FlowParams &params);

    const PeriodicPartition &partition() const { return m_partition; }
    const QuadratureRule &rule() const { return *m_rule; }
    const SparseMatrix &metric_matrix() const { return m_metric; }
    const SparseMatrix &stiffness_matrix() const { return m_stiffness; }

    EnergyParts energy(const HermiteCurve &curve) const;
    FlowState initial_state(HermiteCurve curve, std::uint64_t seed) const;

    // Advances state by one step in place.
    StepReport advance(FlowState &state);

private:
    const FirstVariation &variation_at(const HermiteCurve &curve);

    PeriodicPartition m_partition;
    FlowParams m_params;
    std::unique_ptr<QuadratureRule> m_rule;
    SparseMatrix m_metric;
    SparseMatrix m_stiffness;
    Eigen::SparseLU<SparseMatrix> m_solver;
    bool m_analyzed = false;
    std::optional<FirstVariation> m_cached;
    Eigen::VectorXd m_cached_dofs;
};

FlowState make_state(HermiteCurve curve, const FlowParams &params, std::uint64_t seed);

FlowState step(const FlowState &state, const FlowParams &params);

// Random nodal displacement. At node i the position moves by RMS
// amplitude * t_i * l_i and the derivative by amplitude * t_i * |u'(x_i)|,
// where l_i is the mean adjacent edge length and t_i = 2 pi l_i / L the
// turning of a round circle at that resolution. The derivative part is
// projected onto the complement of the current tangent so the linearized
// arclength condition holds.
HermiteCurve perturb(const HermiteCurve &curve, double amplitude, std::mt19937_64 &rng);

DiagnosticsRecord make_record(const FlowState &state, const EnergyParts &energy, bool stable, bool isotopy_ok,
                              bool with_bilipschitz = false);

struct RunHooks {
    std::function<void(const DiagnosticsRecord &, const FlowState &)> on_record;
    std::function<bool()> should_stop;
    bool bilipschitz = false;
};

// One scheduled step: applies the perturbation when the schedule is due, steps,
// and returns the diagnostics of the new iterate.
DiagnosticsRecord advance_recorded(Stepper &stepper, FlowState &state, bool with_bilipschitz = false);

// Emits the record of the initial state (step 0) followed by one record per
// step. Step errors are rethrown as FlowError carrying the step index.
FlowState run(FlowState state, const FlowParams &params, long n_steps, const RunHooks &hooks = {});

} // namespace knotflow
