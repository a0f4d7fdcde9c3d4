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

#pragma once

#include <functional>
#include <vector>

#include <CLI11.hpp>

namespace aspectcrop::cli {

/// Environment variable naming the default model directory.
inline constexpr const char* kModelDirEnv = "ASPECTCROP_MODEL_DIR";

struct Command {
    CLI::App* app = nullptr;
    std::function<void()> run;
};

std::vector<Command> register_commands(CLI::App& root);

}  // namespace aspectcrop::cli
