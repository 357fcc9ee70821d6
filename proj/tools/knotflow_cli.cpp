#include "knotflow/errors.hpp"
#include "knotflow/io.hpp"
#include "knotflow/server.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

namespace {

knotflow::HttpServer *active_server = nullptr;

void on_signal(int) {
    if (active_server) active_server->stop();
}

} // namespace

int main(int argc, char **argv) {
    using namespace knotflow;
    CLI::App app{"Discrete H^2 gradient flow of bending plus tangent-point energy for closed curves"};
    app.require_subcommand(1);

    std::string run_config, sweep_config, export_in, export_format = "obj", export_out;
    auto *run = app.add_subcommand("run", "Run one flow from a JSON config");
    run->add_option("--config", run_config, "run configuration JSON")->required();

    auto *sweep = app.add_subcommand("sweep", "Stability/isotopy verdict sweep over a parameter grid");
    sweep->add_option("--config", sweep_config, "sweep configuration JSON")->required();

    auto *exp = app.add_subcommand("export", "Export a snapshot as OBJ polyline or vertex CSV");
    exp->add_option("--in", export_in, "snapshot JSON")->required();
    exp->add_option("--format", export_format, "obj or csv")->check(CLI::IsMember({"obj", "csv"}));
    exp->add_option("--out", export_out, "output file (default: input with new extension)");

    ServerConfig server_config;
    int frame_interval_ms = 50;
    auto *serve = app.add_subcommand("serve", "Serve live flow sessions over HTTP");
    serve->add_option("--host", server_config.host, "bind address");
    serve->add_option("--port", server_config.port, "port (0 picks a free one)");
    serve->add_option("--frame-interval-ms", frame_interval_ms, "minimal spacing of streamed frames");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config_error;
    }

    try {
        if (*run) return cmd_run(load_run_config(run_config), std::cerr);
        if (*sweep) return cmd_sweep(load_sweep_config(sweep_config), std::cerr);
        if (*exp) {
            std::filesystem::path out = export_out;
            if (out.empty()) {
                out = export_in;
                out.replace_extension(export_format == "obj" ? ".obj" : ".csv");
            }
            return cmd_export(export_in, export_format, out, std::cerr);
        }
        if (*serve) {
            server_config.session.frame_interval = std::chrono::milliseconds(frame_interval_ms);
            HttpServer server(server_config);
            active_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "serving on " << server_config.host << ":" << server_config.port << "\n";
            server.serve();
            active_server = nullptr;
            return exit_ok;
        }
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config_error;
    } catch (const UnknownPreset &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config_error;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_flow_error;
    }
    return exit_ok;
}
