#include "knotflow/flow.hpp"

#include "knotflow/errors.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace knotflow {

std::string Metric::name() const {
    switch (kind) {
    case MetricKind::H2: return "H2";
    case MetricKind::H2Full: return "H2_full";
    case MetricKind::DiscreteHr: return "DiscreteHr";
    }
    return "H2";
}

Metric Metric::parse(const std::string &name, double r) {
    if (name == "H2") return {MetricKind::H2, r};
    if (name == "H2_full") return {MetricKind::H2Full, r};
    if (name == "DiscreteHr") return {MetricKind::DiscreteHr, r};
    throw ConfigError("unknown metric '" + name + "'");
}

void FlowParams::validate() const {
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw ConfigError("kappa must be >= 0");
    if (!(rho >= 0.0) || !std::isfinite(rho)) throw ConfigError("rho must be >= 0");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be > 0");
    try {
        tp.validate();
    } catch (const std::invalid_argument &e) {
        throw ConfigError(e.what());
    }
    if (metric.kind == MetricKind::DiscreteHr && !std::isfinite(metric.r)) throw ConfigError("metric exponent must be finite");
    if (perturb) {
        if (perturb->period < 1) throw ConfigError("perturbation period must be >= 1");
        if (!(perturb->amplitude >= 0.0)) throw ConfigError("perturbation amplitude must be >= 0");
    }
}

SparseMatrix assemble_metric(const PeriodicPartition &partition, const Metric &metric) {
    const SparseMatrix mass = assemble_mass(partition);
    const SparseMatrix stiff = assemble_stiffness(partition).matrix;
    switch (metric.kind) {
    case MetricKind::H2: return mass + stiff;
    case MetricKind::H2Full: return mass + assemble_first_derivative_form(partition) + stiff;
    case MetricKind::DiscreteHr: return mass + std::pow(partition.h_max(), metric.r) * stiff;
    }
    return mass + stiff;
}

SaddleSystem assemble_saddle_system(const HermiteCurve &prev, const Eigen::VectorXd &tp_gradient,
                                    const FlowParams &params, const SparseMatrix &metric,
                                    const SparseMatrix &stiffness) {
    const std::size_t n = prev.size();
    const Eigen::Index nd = static_cast<Eigen::Index>(dofs_per_node * n);
    const SparseMatrix a = metric + (params.tau * params.kappa) * stiffness;

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(a.nonZeros()) + 6 * n);
    for (Eigen::Index k = 0; k < a.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) triplets.emplace_back(it.row(), it.col(), it.value());
    Eigen::VectorXd rhs(nd + static_cast<Eigen::Index>(n));
    const Eigen::VectorXd u = to_dofs(prev);
    rhs.head(nd) = metric * u;
    if (params.rho != 0.0) rhs.head(nd) -= (params.tau * params.rho) * tp_gradient;
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Index row = nd + static_cast<Eigen::Index>(i);
        const Vec3 &t = prev.derivatives[i];
        for (int c = 0; c < 3; ++c) {
            const auto col = static_cast<Eigen::Index>(derivative_dof(i, c));
            triplets.emplace_back(row, col, t[c]);
            triplets.emplace_back(col, row, t[c]);
        }
        rhs[row] = t.squaredNorm();
    }
    SaddleSystem sys;
    sys.matrix.resize(rhs.size(), rhs.size());
    sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
    sys.matrix.makeCompressed();
    sys.rhs = std::move(rhs);
    return sys;
}

Stepper::Stepper(const PeriodicPartition &partition, const FlowParams &params)
    : m_partition(partition), m_params(params) {
    m_params.validate();
    m_rule = std::make_unique<QuadratureRule>(m_partition, m_params.tp);
    m_metric = assemble_metric(m_partition, m_params.metric);
    m_stiffness = assemble_stiffness(m_partition).matrix;
}

void Stepper::set_params(const FlowParams &params) {
    params.validate();
    const bool new_rule = params.tp.epsilon != m_params.tp.epsilon || params.tp.gauss_order != m_params.tp.gauss_order;
    const bool new_metric = params.metric.kind != m_params.metric.kind || params.metric.r != m_params.metric.r;
    const bool new_q = params.tp.q != m_params.tp.q;
    if (new_rule) m_rule = std::make_unique<QuadratureRule>(m_partition, params.tp);
    if (new_metric) m_metric = assemble_metric(m_partition, params.metric);
    if (new_rule || new_q) m_cached.reset();
    m_params = params;
}

EnergyParts Stepper::energy(const HermiteCurve &curve) const {
    EnergyParts e;
    e.bend = bending_energy(curve, m_params.kappa);
    if (m_params.rho != 0.0) e.tp_weighted = m_params.rho * tp_energy(curve, m_params.tp, *m_rule);
    return e;
}

FlowState Stepper::initial_state(HermiteCurve curve, std::uint64_t seed) const {
    FlowState state;
    state.prev_energy = energy(curve).total();
    state.tangents_prev = curve.derivatives;
    state.reference_speed = curve_scale(curve).speed;
    state.curve = std::move(curve);
    state.rng_seed = seed;
    state.rng.seed(seed);
    return state;
}

const FirstVariation &Stepper::variation_at(const HermiteCurve &curve) {
    const Eigen::VectorXd dofs = to_dofs(curve);
    if (!m_cached || m_cached_dofs.size() != dofs.size() || m_cached_dofs != dofs) {
        m_cached = tp_first_variation(curve, m_params.tp, *m_rule);
        m_cached_dofs = dofs;
    }
    return *m_cached;
}

StepReport Stepper::advance(FlowState &state) {
    const HermiteCurve &prev = state.curve;
    if (prev.size() != m_partition.size()) throw std::invalid_argument("Stepper: curve does not match partition");
    const std::size_t n = prev.size();
    const Eigen::Index nd = static_cast<Eigen::Index>(dofs_per_node * n);

    Eigen::VectorXd gradient;
    if (m_params.rho != 0.0) gradient = variation_at(prev).dofs;
    const SaddleSystem sys = assemble_saddle_system(prev, gradient, m_params, m_metric, m_stiffness);

    // Symmetric Ruiz equilibration: stiffness and mass entries differ by
    // about h^-4, so the unscaled system loses most of its digits.
    SparseMatrix k = sys.matrix;
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(k.rows());
    for (int sweep = 0; sweep < 4; ++sweep) {
        Eigen::VectorXd colmax = Eigen::VectorXd::Zero(k.cols());
        for (Eigen::Index c = 0; c < k.outerSize(); ++c)
            for (SparseMatrix::InnerIterator it(k, c); it; ++it)
                colmax[c] = std::max(colmax[c], std::abs(it.value()));
        Eigen::VectorXd d = colmax.unaryExpr([](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 1.0; });
        k = d.asDiagonal() * k * d.asDiagonal();
        scale = scale.cwiseProduct(d);
    }
    if (!m_analyzed) {
        m_solver.analyzePattern(k);
        m_analyzed = true;
    }
    m_solver.factorize(k);
    if (m_solver.info() != Eigen::Success) throw SolveFailure("saddle-point factorization failed");
    auto solve = [&](const Eigen::VectorXd &b) -> Eigen::VectorXd {
        return scale.cwiseProduct(m_solver.solve(scale.cwiseProduct(b)));
    };
    // Refinement with residuals accumulated in extended precision.
    using LongVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    const Eigen::SparseMatrix<long double> k_long = sys.matrix.cast<long double>();
    const LongVector b_long = sys.rhs.cast<long double>();
    LongVector z_long = solve(sys.rhs).cast<long double>();
    const double rhs_norm = std::max(sys.rhs.norm(), 1e-300);
    Eigen::VectorXd r = (b_long - k_long * z_long).cast<double>();
    double rel = r.norm() / rhs_norm;
    for (int it = 0; it < 6 && rel > 1e-14; ++it) {
        z_long += solve(r).cast<long double>();
        r = (b_long - k_long * z_long).cast<double>();
        rel = r.norm() / rhs_norm;
    }
    const Eigen::VectorXd z = z_long.cast<double>();
    if (!z.allFinite() || rel > 1e-10) throw SolveFailure(fmt::format("saddle-point residual {:.3e}", rel));

    const Eigen::VectorXd u_prev = to_dofs(prev);
    const Eigen::VectorXd u_next = z.head(nd);
    HermiteCurve next = with_dofs(m_partition, u_next);

    StepReport report;
    report.solve_residual = rel;
    const Eigen::VectorXd dt = (u_next - u_prev) / m_params.tau;
    report.dissipation = dt.dot(m_metric * dt);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 dd = (next.derivatives[i] - prev.derivatives[i]) / m_params.tau;
        report.constraint_residual = std::max(report.constraint_residual, std::abs(dd.dot(prev.derivatives[i])));
    }

    report.energy.bend = bending_energy(next, m_params.kappa);
    if (m_params.rho != 0.0) report.energy.tp_weighted = m_params.rho * variation_at(next).energy;

    state.tangents_prev = prev.derivatives;
    state.curve = std::move(next);
    ++state.step_index;
    state.prev_energy = report.energy.total();
    return report;
}

FlowState make_state(HermiteCurve curve, const FlowParams &params, std::uint64_t seed) {
    const Stepper stepper(curve.partition, params);
    return stepper.initial_state(std::move(curve), seed);
}

FlowState step(const FlowState &state, const FlowParams &params) {
    Stepper stepper(state.curve.partition, params);
    FlowState next = state;
    stepper.advance(next);
    return next;
}

HermiteCurve perturb(const HermiteCurve &curve, double amplitude, std::mt19937_64 &rng) {
    if (amplitude < 0.0) throw std::invalid_argument("perturb: amplitude must be >= 0");
    if (amplitude == 0.0) return curve;
    // Noise at node i is measured in units of the local edge length l_i times
    // the turning 2 pi l_i / L of a round circle at the same resolution, so the
    // energy change stays a small fraction of E on any mesh.
    const std::size_t n = curve.size();
    std::vector<double> edge(n);
    for (std::size_t i = 0; i < n; ++i) edge[i] = (curve.positions[(i + 1) % n] - curve.positions[i]).norm();
    double length = 0.0;
    for (double e : edge) length += e;
    if (!(length > 0.0)) throw DegenerateCurve("perturb: curve has zero length");
    std::normal_distribution<double> normal(0.0, 1.0);
    HermiteCurve out = curve;
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 dp, dd;
        for (int c = 0; c < 3; ++c) dp[c] = normal(rng);
        for (int c = 0; c < 3; ++c) dd[c] = normal(rng);
        const Vec3 &t = curve.derivatives[i];
        dd -= (dd.dot(t) / t.squaredNorm()) * t;
        const double l = 0.5 * (edge[i] + edge[(i + n - 1) % n]);
        const double turning = 2.0 * std::numbers::pi * l / length;
        out.positions[i] += amplitude * turning * l / std::sqrt(3.0) * dp;
        out.derivatives[i] += amplitude * turning * t.norm() / std::sqrt(3.0) * dd;
    }
    return out;
}

DiagnosticsRecord make_record(const FlowState &state, const EnergyParts &energy, bool stable, bool isotopy_ok,
                              bool with_bilipschitz) {
    DiagnosticsRecord rec;
    rec.step = state.step_index;
    rec.e_bend = energy.bend;
    rec.e_tp_weighted = energy.tp_weighted;
    rec.e_total = energy.total();
    rec.length = polyline_length(state.curve);
    rec.arclength_dev = arclength_deviation(state.curve, state.reference_speed, false);
    if (with_bilipschitz) rec.bilipschitz = bilipschitz(state.curve);
    rec.min_pair_dist = min_pair_distance(state.curve);
    rec.stable = stable;
    rec.isotopy_ok = isotopy_ok;
    return rec;
}

DiagnosticsRecord advance_recorded(Stepper &stepper, FlowState &state, bool with_bilipschitz) {
    const auto &schedule = stepper.params().perturb;
    bool isotopy_ok = true;
    double e_prev = state.prev_energy;
    if (schedule && state.step_index > 0 && state.step_index % schedule->period == 0 && schedule->amplitude > 0.0) {
        HermiteCurve moved = perturb(state.curve, schedule->amplitude, state.rng);
        isotopy_ok = isotopy_monitor(state.curve, moved);
        state.curve = std::move(moved);
        state.prev_energy = stepper.energy(state.curve).total();
        e_prev = state.prev_energy;
    }
    const HermiteCurve before = state.curve;
    const StepReport report = stepper.advance(state);
    isotopy_ok = isotopy_monitor(before, state.curve) && isotopy_ok;
    const bool stable = stability_verdict(e_prev, report.energy.total(), stepper.params().tau);
    return make_record(state, report.energy, stable, isotopy_ok, with_bilipschitz);
}

FlowState run(FlowState state, const FlowParams &params, long n_steps, const RunHooks &hooks) {
    if (n_steps < 0) throw std::invalid_argument("run: n_steps must be >= 0");
    Stepper stepper(state.curve.partition, params);
    if (hooks.on_record) {
        EnergyParts e = stepper.energy(state.curve);
        hooks.on_record(make_record(state, e, true, true, hooks.bilipschitz), state);
    }
    for (long k = 0; k < n_steps; ++k) {
        if (hooks.should_stop && hooks.should_stop()) break;
        DiagnosticsRecord rec;
        try {
            rec = advance_recorded(stepper, state, hooks.bilipschitz);
        } catch (const NonEmbedded &e) {
            throw FlowError(state.step_index + 1, e.what());
        } catch (const SolveFailure &e) {
            throw FlowError(state.step_index + 1, e.what());
        } catch (const DegenerateCurve &e) {
            throw FlowError(state.step_index + 1, e.what());
        }
        if (hooks.on_record) hooks.on_record(rec, state);
    }
    return state;
}

} // namespace knotflow
