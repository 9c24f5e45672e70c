#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "dshell/config.hpp"
#include "dshell/run.hpp"

int main(int argc, char** argv) {
    using namespace dshell;
    CLI::App app{"Dirac operators with delta-shell interactions: symbol, scan, confinement and identity runs"};
    std::string config_path;
    app.add_option("--config", config_path, "key=value config file; flags override its entries");
    std::map<std::string, std::string> values;
    for (const auto& k : config_keys()) app.add_option("--" + k, values[k], "config key '" + k + "'");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return int(ErrorKind::config);
    }
    try {
        std::vector<std::pair<std::string, std::string>> overrides;
        for (const auto& k : config_keys())
            if (app.count("--" + k) > 0) overrides.emplace_back(k, values[k]);
        const std::string text = config_path.empty() ? std::string() : read_file(config_path);
        const RunConfig cfg = parse_config(text, overrides);
        return run(cfg, std::cout);
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.kind) << "]: " << e.what() << "\n";
        return int(e.kind);
    } catch (const std::exception& e) {
        std::cerr << "error [internal]: " << e.what() << "\n";
        return 70;
    }
}
