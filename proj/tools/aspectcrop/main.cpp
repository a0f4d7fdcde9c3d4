// Copyright 2026 The aspectcrop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "common.hpp"

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

const char* const kFooter =
    "Configuration: --config FILE reads key = value lines; options of a subcommand go under a\n"
    "[subcommand] section. Command-line flags override the file, which overrides defaults.\n"
    "The model directory defaults to $ASPECTCROP_MODEL_DIR when --model is not given.";

}  // namespace

int main(int argc, char** argv) {
    namespace cli = aspectcrop::cli;

    CLI::App app{"Aspect-ratio-aware crop prediction: data, training, evaluation and inference.", "aspectcrop"};
    app.footer(kFooter);
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.set_config("--config", "", "Key-value configuration file")->check(CLI::ExistingFile);
    app.allow_config_extras(CLI::config_extras_mode::error);
    std::string level = "info";
    app.add_option("--log-level", level, "Log verbosity on standard error")
        ->capture_default_str()
        ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

    const auto commands = cli::register_commands(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "aspectcrop: " << e.what() << "\n\n";
        const CLI::App* usage = &app;
        for (const auto& c : commands) {
            if (c.app->parsed()) usage = c.app;
        }
        std::cerr << usage->help();
        return kUsageError;
    }

    cli::set_log_level(cli::parse_log_level(level));
    for (const auto& c : commands) {
        if (!c.app->parsed()) continue;
        std::cerr << "# resolved configuration\n"
                  << "log-level=\"" << level << "\"\n"
                  << "[" << c.app->get_name() << "]\n"
                  << c.app->config_to_str(true, false);
        try {
            c.run();
        } catch (const std::exception& e) {
            cli::log(cli::LogLevel::Error, e.what());
            return kRuntimeError;
        }
        return 0;
    }
    return kUsageError;
}
