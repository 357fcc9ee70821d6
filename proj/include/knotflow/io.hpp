#pragma once

#include "knotflow/curve.hpp"
#include "knotflow/diagnostics.hpp"
#include "knotflow/flow.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace knotflow {

using json = nlohmann::json;

// Snapshot: {"v":1, "period":P, "nodes":[...], "positions":[[x,y,z],...],
// "derivatives":[[...],...]}. "period" defaults to 1 and "nodes" to a uniform
// partition of [0, period).
json snapshot_to_json(const HermiteCurve &curve, long step = 0);
HermiteCurve snapshot_from_json(const json &j);
void save_snapshot(const std::filesystem::path &path, const HermiteCurve &curve, long step = 0);
HermiteCurve load_snapshot(const std::filesystem::path &path);

// tau = factor * h_max^power
struct TauRule {
    double factor = 0.2;
    double power = 1.0;

    double operator()(double h_max) const;
    std::string label() const;
    static TauRule parse(const json &j); // "h^1/2", "h", "h^2" or {"factor", "power"}
};

struct CurveSource {
    std::string preset; // empty when loading a snapshot
    std::filesystem::path snapshot;
    std::size_t nodes = 0;
    double length = 0.0;
};

HermiteCurve load_source(const CurveSource &source, std::uint64_t seed);

struct RunConfig {
    CurveSource source;
    FlowParams params;
    std::optional<TauRule> tau_rule; // overrides params.tau once h_max is known
    bool epsilon_auto = true;        // epsilon = 2 h_max
    long n_steps = 0;
    long snapshot_every = 100;
    std::uint64_t seed = 0;
    bool bilipschitz = false;
    std::filesystem::path output_dir = "out";
};

// Fills tau and epsilon that depend on the partition.
FlowParams resolve_params(const RunConfig &config, const PeriodicPartition &partition);

// Throws ConfigError.
RunConfig parse_run_config(const json &j, const std::filesystem::path &base_dir = {});
RunConfig load_run_config(const std::filesystem::path &path);

struct SweepBlock {
    std::string label;
    double kappa = 1.0;
    double rho = 0.1;
};

struct SweepConfig {
    CurveSource source;
    std::vector<SweepBlock> blocks;
    std::vector<std::size_t> nodes;
    std::vector<TauRule> tau_rules;
    double q = 3.0;
    int gauss_order = 2;
    long steps = 50;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
};

SweepConfig parse_sweep_config(const json &j, const std::filesystem::path &base_dir = {});
SweepConfig load_sweep_config(const std::filesystem::path &path);

struct SweepCell {
    std::string block;
    double kappa = 0.0;
    double rho = 0.0;
    std::size_t nodes = 0;
    std::string tau_rule;
    double tau = 0.0;
    double h_max = 0.0;
    bool stable = false;
    bool isotopy_ok = false;
    long steps_completed = 0;
    std::string error; // empty unless the flow aborted
};

// Runs one grid cell; verdicts are the conjunction over all steps, and a flow
// error counts as (no, no).
SweepCell run_sweep_cell(const SweepConfig &config, const SweepBlock &block, std::size_t nodes,
                         const TauRule &rule);
std::vector<SweepCell> run_sweep(const SweepConfig &config);
std::string sweep_markdown(const SweepConfig &config, const std::vector<SweepCell> &cells);
std::string sweep_csv(const std::vector<SweepCell> &cells);

// CSV with 17 significant digits.
std::string csv_header();
std::string csv_row(const DiagnosticsRecord &record);

// OBJ polyline: N vertices and one closed "l" element; per-vertex curvature
// goes to a separate attribute file.
void write_obj(const std::filesystem::path &path, const HermiteCurve &curve);
void write_curvature(const std::filesystem::path &path, const HermiteCurve &curve);
void write_vertex_csv(const std::filesystem::path &path, const HermiteCurve &curve);
std::vector<Vec3> read_obj_vertices(const std::filesystem::path &path);

// Exit codes of the command line front end.
enum ExitCode { exit_ok = 0, exit_flow_error = 1, exit_config_error = 2 };

int cmd_run(const RunConfig &config, std::ostream &log);
int cmd_sweep(const SweepConfig &config, std::ostream &log);
int cmd_export(const std::filesystem::path &in, const std::string &format, const std::filesystem::path &out,
               std::ostream &log);

} // namespace knotflow
