#include "whatif/service.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"What-if analysis HTTP service"};
    std::string config_path, host, data_dir;
    int port = 0;
    app.add_option("--config", config_path, "Service config JSON");
    app.add_option("--host", host, "Listen address (overrides config)");
    app.add_option("--port", port, "Listen port (overrides config)");
    app.add_option("--data-dir", data_dir, "Data directory (overrides config)");
    CLI11_PARSE(app, argc, argv);

    try {
        whatif::ServiceConfig cfg = config_path.empty() ? whatif::ServiceConfig{} : whatif::ServiceConfig::load(config_path);
        if (!host.empty()) cfg.host = host;
        if (port > 0) cfg.port = port;
        if (!data_dir.empty()) cfg.data_dir = data_dir;
        whatif::Service service(cfg);
        std::cerr << "listening on " << cfg.host << ':' << cfg.port << '\n';
        if (!service.listen()) {
            std::cerr << "error: cannot bind " << cfg.host << ':' << cfg.port << '\n';
            return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
