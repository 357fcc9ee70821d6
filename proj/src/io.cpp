#include "knotflow/io.hpp"

#include "knotflow/errors.hpp"
#include "knotflow/knots.hpp"
#include "knotflow/parallel.hpp"

#include <fmt/core.h>
#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace knotflow {

namespace fs = std::filesystem;

namespace {

json vec_json(const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json &j) {
    if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path &path, const std::string &text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

json parse_json_file(const fs::path &path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::runtime_error &e) {
        throw ConfigError(e.what());
    }
    try {
        return json::parse(text);
    } catch (const json::exception &e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void check_keys(const json &j, const std::set<std::string> &allowed, const std::string &where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto &item : j.items())
        if (!allowed.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
}

template <class T> T get_or(const json &j, const char *key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    return j[key].get<T>();
}

CurveSource parse_source(const json &j, const fs::path &base_dir) {
    check_keys(j, {"preset", "snapshot", "nodes", "length"}, "source");
    CurveSource s;
    if (j.contains("preset") == j.contains("snapshot"))
        throw ConfigError("source: give exactly one of 'preset' and 'snapshot'");
    if (j.contains("preset")) {
        s.preset = j["preset"].get<std::string>();
        preset(s.preset); // validates the name
    } else {
        s.snapshot = j["snapshot"].get<std::string>();
        if (s.snapshot.is_relative() && !base_dir.empty()) s.snapshot = base_dir / s.snapshot;
    }
    const long nodes = get_or<long>(j, "nodes", 0);
    if (nodes < 0 || (nodes > 0 && nodes < 4)) throw ConfigError("source: nodes must be >= 4");
    s.nodes = static_cast<std::size_t>(nodes);
    s.length = get_or<double>(j, "length", 0.0);
    if (s.length < 0.0) throw ConfigError("source: length must be positive");
    return s;
}

fs::path resolve_dir(const json &j, const fs::path &base_dir) {
    fs::path p = get_or<std::string>(j, "output_dir", "out");
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return p;
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

template <class F> auto wrap_json_errors(F &&f) {
    try {
        return f();
    } catch (const json::exception &e) {
        throw ConfigError(e.what());
    }
}

} // namespace

json snapshot_to_json(const HermiteCurve &curve, long step) {
    json j;
    j["v"] = 1;
    j["step"] = step;
    j["period"] = curve.partition.period();
    j["nodes"] = curve.partition.nodes();
    json pos = json::array(), der = json::array();
    for (std::size_t i = 0; i < curve.size(); ++i) {
        pos.push_back(vec_json(curve.positions[i]));
        der.push_back(vec_json(curve.derivatives[i]));
    }
    j["positions"] = std::move(pos);
    j["derivatives"] = std::move(der);
    return j;
}

HermiteCurve snapshot_from_json(const json &j) {
    return wrap_json_errors([&] {
        if (!j.is_object() || !j.contains("positions") || !j.contains("derivatives"))
            throw ConfigError("snapshot: 'positions' and 'derivatives' are required");
        const auto &pos = j["positions"];
        const auto &der = j["derivatives"];
        if (!pos.is_array() || !der.is_array() || pos.size() != der.size() || pos.size() < 3)
            throw ConfigError("snapshot: positions/derivatives must be arrays of equal length >= 3");
        const double period = get_or<double>(j, "period", 1.0);
        if (!(period > 0.0)) throw ConfigError("snapshot: period must be positive");
        PeriodicPartition part;
        try {
            part = j.contains("nodes") ? PeriodicPartition(j["nodes"].get<std::vector<double>>(), period)
                                       : PeriodicPartition::uniform(pos.size(), period);
        } catch (const std::invalid_argument &e) {
            throw ConfigError(std::string("snapshot: ") + e.what());
        }
        if (part.size() != pos.size()) throw ConfigError("snapshot: nodes and positions differ in length");
        HermiteCurve curve{part, {}, {}};
        for (std::size_t i = 0; i < pos.size(); ++i) {
            curve.positions.push_back(json_vec(pos[i]));
            curve.derivatives.push_back(json_vec(der[i]));
        }
        return curve;
    });
}

void save_snapshot(const fs::path &path, const HermiteCurve &curve, long step) {
    write_file(path, snapshot_to_json(curve, step).dump() + "\n");
}

HermiteCurve load_snapshot(const fs::path &path) { return snapshot_from_json(parse_json_file(path)); }

double TauRule::operator()(double h_max) const { return factor * std::pow(h_max, power); }

std::string TauRule::label() const {
    const std::string f = factor == 0.2 ? "(1/5)" : fmt::format("{}*", factor);
    if (power == 1.0) return f + "h";
    if (power == 0.5) return f + "h^1/2";
    return f + fmt::format("h^{}", power);
}

TauRule TauRule::parse(const json &j) {
    return wrap_json_errors([&] {
        if (j.is_string()) {
            const std::string s = j.get<std::string>();
            if (s == "h^1/2" || s == "h^0.5") return TauRule{0.2, 0.5};
            if (s == "h" || s == "h^1") return TauRule{0.2, 1.0};
            if (s == "h^2") return TauRule{0.2, 2.0};
            throw ConfigError("unknown tau rule '" + s + "'");
        }
        check_keys(j, {"factor", "power"}, "tau_rule");
        TauRule r{get_or<double>(j, "factor", 0.2), get_or<double>(j, "power", 1.0)};
        if (!(r.factor > 0.0) || !std::isfinite(r.power)) throw ConfigError("tau_rule: factor must be > 0");
        return r;
    });
}

HermiteCurve load_source(const CurveSource &source, std::uint64_t seed) {
    if (!source.preset.empty()) return build_preset_curve(preset(source.preset), source.nodes, source.length, seed);
    HermiteCurve curve = load_snapshot(source.snapshot);
    if (source.length > 0.0) curve = rescale_to_length(curve, source.length);
    return curve;
}

FlowParams resolve_params(const RunConfig &config, const PeriodicPartition &partition) {
    FlowParams p = config.params;
    if (config.tau_rule) p.tau = (*config.tau_rule)(partition.h_max());
    if (config.epsilon_auto) p.tp.epsilon = 2.0 * partition.h_max();
    p.validate();
    return p;
}

RunConfig parse_run_config(const json &j, const fs::path &base_dir) {
    return wrap_json_errors([&] {
        check_keys(j,
                   {"source", "kappa", "rho", "tau", "tau_rule", "q", "epsilon", "gauss_order", "metric", "metric_r",
                    "perturb", "n_steps", "snapshot_every", "seed", "bilipschitz", "output_dir"},
                   "run config");
        RunConfig c;
        if (!j.contains("source")) throw ConfigError("run config: 'source' is required");
        c.source = parse_source(j["source"], base_dir);
        c.params.kappa = get_or<double>(j, "kappa", 1.0);
        c.params.rho = get_or<double>(j, "rho", 0.1);
        if (j.contains("tau") && j.contains("tau_rule")) throw ConfigError("run config: give 'tau' or 'tau_rule'");
        if (j.contains("tau")) {
            c.params.tau = j["tau"].get<double>();
        } else {
            c.tau_rule = TauRule::parse(get_or<json>(j, "tau_rule", json("h")));
        }
        c.params.tp.q = get_or<double>(j, "q", 3.0);
        c.params.tp.gauss_order = get_or<int>(j, "gauss_order", 2);
        if (j.contains("epsilon") && !j["epsilon"].is_null()) {
            c.params.tp.epsilon = j["epsilon"].get<double>();
            c.epsilon_auto = false;
        }
        c.params.metric = Metric::parse(get_or<std::string>(j, "metric", "H2"), get_or<double>(j, "metric_r", 2.0));
        if (j.contains("perturb") && !j["perturb"].is_null()) {
            const json &p = j["perturb"];
            check_keys(p, {"period", "amplitude"}, "perturb");
            c.params.perturb = PerturbSchedule{get_or<long>(p, "period", 100), get_or<double>(p, "amplitude", 1e-3)};
        }
        c.n_steps = get_or<long>(j, "n_steps", 0);
        if (c.n_steps < 0) throw ConfigError("run config: n_steps must be >= 0");
        c.snapshot_every = get_or<long>(j, "snapshot_every", 100);
        if (c.snapshot_every < 1) throw ConfigError("run config: snapshot_every must be >= 1");
        c.seed = get_or<std::uint64_t>(j, "seed", 0);
        c.bilipschitz = get_or<bool>(j, "bilipschitz", false);
        c.output_dir = resolve_dir(j, base_dir);
        FlowParams check = c.params;
        if (c.tau_rule) check.tau = 1.0;
        check.validate();
        return c;
    });
}

RunConfig load_run_config(const fs::path &path) {
    return parse_run_config(parse_json_file(path), path.parent_path());
}

SweepConfig parse_sweep_config(const json &j, const fs::path &base_dir) {
    return wrap_json_errors([&] {
        check_keys(j, {"source", "blocks", "nodes", "tau_rules", "q", "gauss_order", "steps", "seed", "output_dir"}, "sweep config");
        SweepConfig c;
        c.source = parse_source(get_or<json>(j, "source", json{{"preset", "five_two"}}), base_dir);
        if (!j.contains("blocks") || !j["blocks"].is_array() || j["blocks"].empty())
            throw ConfigError("sweep config: 'blocks' must be a nonempty array");
        for (const json &b : j["blocks"]) {
            check_keys(b, {"label", "kappa", "rho"}, "sweep block");
            SweepBlock block{get_or<std::string>(b, "label", ""), get_or<double>(b, "kappa", 1.0),
                             get_or<double>(b, "rho", 0.1)};
            if (!(block.kappa >= 0.0) || !(block.rho >= 0.0)) throw ConfigError("sweep block: kappa, rho must be >= 0");
            c.blocks.push_back(block);
        }
        for (long n : get_or<std::vector<long>>(j, "nodes", {50, 100})) {
            if (n < 4) throw ConfigError("sweep config: nodes must be >= 4");
            c.nodes.push_back(static_cast<std::size_t>(n));
        }
        for (const json &r : get_or<json>(j, "tau_rules", json::array({"h^1/2", "h", "h^2"})))
            c.tau_rules.push_back(TauRule::parse(r));
        if (c.nodes.empty() || c.tau_rules.empty()) throw ConfigError("sweep config: empty grid");
        c.q = get_or<double>(j, "q", 3.0);
        c.gauss_order = get_or<int>(j, "gauss_order", 2);
        try {
            TpParams{c.q, 0.0, c.gauss_order}.validate();
        } catch (const std::invalid_argument &e) {
            throw ConfigError(e.what());
        }
        c.steps = get_or<long>(j, "steps", 50);
        if (c.steps < 1) throw ConfigError("sweep config: steps must be >= 1");
        c.seed = get_or<std::uint64_t>(j, "seed", 0);
        c.output_dir = resolve_dir(j, base_dir);
        return c;
    });
}

SweepConfig load_sweep_config(const fs::path &path) {
    return parse_sweep_config(parse_json_file(path), path.parent_path());
}

SweepCell run_sweep_cell(const SweepConfig &config, const SweepBlock &block, std::size_t nodes,
                         const TauRule &rule) {
    SweepCell cell;
    cell.block = block.label;
    cell.kappa = block.kappa;
    cell.rho = block.rho;
    cell.nodes = nodes;
    cell.tau_rule = rule.label();
    CurveSource source = config.source;
    source.nodes = nodes;
    const HermiteCurve curve = load_source(source, config.seed);
    cell.h_max = curve.partition.h_max();
    FlowParams params;
    params.kappa = block.kappa;
    params.rho = block.rho;
    params.tau = rule(cell.h_max);
    params.tp = default_tp_params(curve.partition, config.q, config.gauss_order);
    cell.tau = params.tau;
    bool stable = true, isotopy = true;
    try {
        RunHooks hooks;
        hooks.on_record = [&](const DiagnosticsRecord &rec, const FlowState &) {
            stable = stable && rec.stable;
            isotopy = isotopy && rec.isotopy_ok;
            cell.steps_completed = rec.step;
        };
        run(make_state(curve, params, config.seed), params, config.steps, hooks);
        cell.stable = stable;
        cell.isotopy_ok = isotopy;
    } catch (const FlowError &e) {
        cell.error = e.what();
    } catch (const std::exception &e) {
        cell.error = e.what();
    }
    return cell;
}

std::vector<SweepCell> run_sweep(const SweepConfig &config) {
    struct Job {
        const SweepBlock *block;
        std::size_t nodes;
        const TauRule *rule;
    };
    std::vector<Job> jobs;
    for (const auto &b : config.blocks)
        for (std::size_t n : config.nodes)
            for (const auto &r : config.tau_rules) jobs.push_back({&b, n, &r});
    std::vector<SweepCell> cells(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++)
            cells[k] = run_sweep_cell(config, *jobs[k].block, jobs[k].nodes, *jobs[k].rule);
    };
    const std::size_t workers = std::min(thread_count(), jobs.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto &t : pool) t.join();
    }
    return cells;
}

std::string sweep_markdown(const SweepConfig &config, const std::vector<SweepCell> &cells) {
    std::string out;
    std::size_t k = 0;
    for (const auto &b : config.blocks) {
        out += fmt::format("({}) kappa = {}, rho = {}\n\n| nodes |", b.label, b.kappa, b.rho);
        for (const auto &r : config.tau_rules) out += fmt::format(" tau = {} stab. | isot. |", r.label());
        out += "\n|---|";
        for (std::size_t i = 0; i < config.tau_rules.size(); ++i) out += "---|---|";
        out += "\n";
        for (std::size_t n : config.nodes) {
            out += fmt::format("| {} |", n);
            for (std::size_t i = 0; i < config.tau_rules.size(); ++i, ++k)
                out += fmt::format(" {} | {} |", yes_no(cells[k].stable), yes_no(cells[k].isotopy_ok));
            out += "\n";
        }
        out += "\n";
    }
    return out;
}

std::string sweep_csv(const std::vector<SweepCell> &cells) {
    std::string out = "block,kappa,rho,nodes,tau_rule,tau,h_max,stable,isotopy_ok,steps_completed,error\n";
    for (const auto &c : cells) {
        std::string err = c.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out += fmt::format("{},{:.17g},{:.17g},{},{},{:.17g},{:.17g},{},{},{},{}\n", c.block, c.kappa, c.rho, c.nodes,
                           c.tau_rule, c.tau, c.h_max, yes_no(c.stable), yes_no(c.isotopy_ok), c.steps_completed, err);
    }
    return out;
}

std::string csv_header() {
    return "step,e_total,e_bend,e_tp_weighted,length,arclength_dev,min_pair_dist,stable,isotopy_ok";
}

std::string csv_row(const DiagnosticsRecord &r) {
    return fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{}", r.step, r.e_total, r.e_bend,
                       r.e_tp_weighted, r.length, r.arclength_dev, r.min_pair_dist, r.stable ? 1 : 0,
                       r.isotopy_ok ? 1 : 0);
}

void write_obj(const fs::path &path, const HermiteCurve &curve) {
    std::string out = fmt::format("# closed polyline, {} vertices\n", curve.size());
    for (const Vec3 &p : curve.positions) out += fmt::format("v {:.17g} {:.17g} {:.17g}\n", p.x(), p.y(), p.z());
    out += "l";
    for (std::size_t i = 0; i < curve.size(); ++i) out += fmt::format(" {}", i + 1);
    out += " 1\n";
    write_file(path, out);
}

void write_curvature(const fs::path &path, const HermiteCurve &curve) {
    std::string out = "vertex,curvature\n";
    const auto k = nodal_curvature(curve);
    for (std::size_t i = 0; i < k.size(); ++i) out += fmt::format("{},{:.17g}\n", i + 1, k[i]);
    write_file(path, out);
}

void write_vertex_csv(const fs::path &path, const HermiteCurve &curve) {
    std::string out = "vertex,x,y,z,dx,dy,dz,curvature\n";
    const auto k = nodal_curvature(curve);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const Vec3 &p = curve.positions[i];
        const Vec3 &d = curve.derivatives[i];
        out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", i + 1, p.x(), p.y(), p.z(),
                           d.x(), d.y(), d.z(), k[i]);
    }
    write_file(path, out);
}

std::vector<Vec3> read_obj_vertices(const fs::path &path) {
    std::istringstream in(read_file(path));
    std::vector<Vec3> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("v ", 0) != 0) continue;
        std::istringstream ls(line.substr(2));
        std::string a, b, c;
        ls >> a >> b >> c;
        out.emplace_back(std::stod(a), std::stod(b), std::stod(c));
    }
    return out;
}

int cmd_run(const RunConfig &config, std::ostream &log) {
    HermiteCurve curve;
    FlowParams params;
    try {
        curve = load_source(config.source, config.seed);
        params = resolve_params(config, curve.partition);
    } catch (const ConfigError &e) {
        log << "config error: " << e.what() << "\n";
        return exit_config_error;
    } catch (const std::invalid_argument &e) {
        log << "config error: " << e.what() << "\n";
        return exit_config_error;
    }
    fs::create_directories(config.output_dir / "snapshots");
    std::ofstream csv(config.output_dir / "energy.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write energy.csv");
    csv << csv_header() << "\n";

    FlowState last;
    RunHooks hooks;
    hooks.bilipschitz = config.bilipschitz;
    hooks.on_record = [&](const DiagnosticsRecord &rec, const FlowState &state) {
        csv << csv_row(rec) << "\n";
        if (rec.step % config.snapshot_every == 0 || rec.step == config.n_steps)
            save_snapshot(config.output_dir / "snapshots" / fmt::format("step_{:08d}.json", rec.step), state.curve,
                          rec.step);
        last.curve = state.curve;
        last.step_index = state.step_index;
    };
    FlowState initial;
    try {
        initial = make_state(curve, params, config.seed);
    } catch (const NonEmbedded &e) {
        log << "flow error at step 0: " << e.what() << "\n";
        return exit_flow_error;
    }
    try {
        FlowState final_state = run(std::move(initial), params, config.n_steps, hooks);
        save_snapshot(config.output_dir / "final.json", final_state.curve, final_state.step_index);
    } catch (const FlowError &e) {
        csv.flush();
        if (last.curve.size() > 0) save_snapshot(config.output_dir / "final.json", last.curve, last.step_index);
        log << "flow error at " << e.what() << "\n";
        return exit_flow_error;
    }
    log << fmt::format("completed {} steps, output in {}\n", config.n_steps, config.output_dir.string());
    return exit_ok;
}

int cmd_sweep(const SweepConfig &config, std::ostream &log) {
    const auto cells = run_sweep(config);
    const std::string md = sweep_markdown(config, cells);
    write_file(config.output_dir / "sweep.md", md);
    write_file(config.output_dir / "sweep.csv", sweep_csv(cells));
    log << md;
    for (const auto &c : cells)
        if (!c.error.empty())
            log << fmt::format("cell ({}, N={}, {}) aborted: {}\n", c.block, c.nodes, c.tau_rule, c.error);
    return exit_ok;
}

int cmd_export(const fs::path &in, const std::string &format, const fs::path &out, std::ostream &log) {
    HermiteCurve curve;
    try {
        curve = load_snapshot(in);
    } catch (const ConfigError &e) {
        log << "config error: " << e.what() << "\n";
        return exit_config_error;
    }
    if (format == "obj") {
        write_obj(out, curve);
        fs::path attr = out;
        attr.replace_extension(".curvature.csv");
        write_curvature(attr, curve);
        log << "wrote " << out.string() << " and " << attr.string() << "\n";
    } else if (format == "csv") {
        write_vertex_csv(out, curve);
        log << "wrote " << out.string() << "\n";
    } else {
        log << "config error: unknown format '" << format << "'\n";
        return exit_config_error;
    }
    return exit_ok;
}

} // namespace knotflow
