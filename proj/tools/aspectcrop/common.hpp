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

#include <array>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>

#include "aspectcrop/geometry.hpp"

namespace aspectcrop::cli {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

void set_log_level(LogLevel level) noexcept;
LogLevel log_level() noexcept;
LogLevel parse_log_level(std::string_view text);

/// Writes "aspectcrop: <level>: <message>" to standard error.
void log(LogLevel level, std::string_view message);

template <typename... Args>
void logf(LogLevel level, const Args&... args) {
    if (level > log_level()) {
        return;
    }
    std::ostringstream os;
    (os << ... << args);
    log(level, os.str());
}

/// "a:b,c:d" to ratios; duplicates and empty items are rejected.
std::vector<AspectRatio> parse_ratio_list(std::string_view text);
std::vector<int> parse_int_list(std::string_view text);
/// "train,val,test" fractions.
std::array<double, 3> parse_split(std::string_view text);

std::string join_ratios(const std::vector<AspectRatio>& ratios);

extern const CLI::Validator kRatioList;
extern const CLI::Validator kIntList;
extern const CLI::Validator kSplit;

/// Image files under `input` (or `input` itself), sorted by path.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& input);

}  // namespace aspectcrop::cli
