// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "propcredit/propcredit.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int exit_code(pc_status status) {
    switch (status) {
        case PC_OK: return kExitOk;
        case PC_ERR_CONFIG:
        case PC_ERR_INVALID_ARGUMENT: return kExitConfig;
        case PC_ERR_NUMERICAL: return kExitNumerical;
        default: return kExitFailure;
    }
}

struct Invocation {
    std::string config_path;
    std::string output_dir;
    bool print_config = false;
};

int run(const std::string& command, const Invocation& inv) {
    std::string text;
    if (inv.config_path.empty() || inv.print_config) {
        char* defaults = nullptr;
        const pc_status st = pc_default_config(command.c_str(), &defaults);
        if (st != PC_OK) {
            std::cerr << "error: " << pc_last_error() << "\n";
            return exit_code(st);
        }
        text = defaults;
        pc_string_free(defaults);
        if (inv.print_config) {
            std::cout << text;
            return kExitOk;
        }
    } else {
        std::ifstream in(inv.config_path, std::ios::binary);
        if (!in) {
            std::cerr << "error: cannot read config " << inv.config_path << "\n";
            return kExitConfig;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    const std::string out = inv.output_dir.empty() ? "out/" + command : inv.output_dir;
    const pc_status st = pc_run_command(command.c_str(), text.c_str(), out.c_str());
    if (st != PC_OK) {
        std::cerr << "error: " << pc_last_error() << "\n";
        return exit_code(st);
    }
    std::cout << command << ": wrote " << out << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Credit-weighted policy optimization toolkit for diffusion and flow samplers"};
    app.set_version_flag("--version", std::string(pc_version()));
    app.require_subcommand(1);

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"audit-schedule", "Per-step credit weights of a DDIM schedule and its constant-weight noise schedule"},
        {"audit-flow", "Native, proportional and uniform step weights of flow SDE time grids"},
        {"pretrain", "Fit a base policy to the toy mixture"},
        {"finetune", "RL fine-tuning of one method variant"},
        {"compare", "Multi-seed comparison of method variants"},
        {"irg", "Inference-time mixing of fine-tuned policies"},
    };
    std::vector<Invocation> invocations(commands.size());
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < commands.size(); ++i) {
        auto* sub = app.add_subcommand(commands[i].first, commands[i].second);
        sub->add_option("-c,--config", invocations[i].config_path, "Config JSON or run_manifest.json");
        sub->add_option("-o,--output-dir", invocations[i].output_dir, "Output directory (default out/<command>)");
        sub->add_flag("--print-config", invocations[i].print_config, "Print the default config and exit");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }
    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (subs[i]->parsed()) return run(commands[i].first, invocations[i]);
    }
    return kExitConfig;
}
