// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

// rfcmg <command> [--config PATH] [--set key=value]... [--seed INT] [--out DIR]

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rfcmg/commands.hpp"
#include "rfcmg/common.hpp"
#include "rfcmg/config.hpp"

int main(int argc, char** argv) {
    using namespace rfcmg;
    CLI::App app{"Frequency-decoupled cross-modal diffusion on synthetic RF spectrograms"};
    std::string command;
    std::string config_path;
    std::vector<std::string> sets;
    long long seed = -1;
    std::string out;
    bool list_keys = false;

    std::string names;
    for (const auto& n : commands::command_names()) names += (names.empty() ? "" : ", ") + n;
    app.add_option("command", command, "one of: " + names);
    app.add_option("--config", config_path, "key=value config file (supports include)");
    app.add_option("--set", sets, "override one key, repeatable")->take_all();
    app.add_option("--seed", seed, "master seed");
    app.add_option("--out", out, "output root");
    app.add_flag("--list-keys", list_keys, "print every config key with its default and exit");
    CLI11_PARSE(app, argc, argv);

    if (list_keys) {
        for (const auto& k : config::registry()) {
            std::cout << k.key << " = " << k.fallback << "    # " << k.help << "\n";
        }
        return 0;
    }
    if (command.empty()) {
        std::cerr << app.help() << std::endl;
        return commands::invalid_config;
    }

    config::ExperimentConfig cfg;
    try {
        if (!config_path.empty()) cfg.load_file(config_path);
        for (const auto& s : sets) cfg.set_assignment(s);
        if (seed >= 0) cfg.set("seed", std::to_string(seed));
        if (!out.empty()) cfg.set("out", out);
    } catch (const std::exception& e) {
        std::cerr << R"({"status":2,"type":"config","message":)" << nlohmann::json(e.what()).dump()
                  << "}" << std::endl;
        return commands::invalid_config;
    }

    const auto res = commands::run_command(command, cfg, std::cerr);
    if (res.status != commands::ok) {
        std::cerr << res.error.dump() << std::endl;
    } else {
        std::cout << res.run_dir.string() << std::endl;
    }
    return res.status;
}
