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

#include "common.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <stdexcept>

namespace aspectcrop::cli {
namespace {

std::atomic<LogLevel> g_level{LogLevel::Info};

std::vector<std::string_view> split_commas(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = text.find(',', start);
        std::string_view item = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
        while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.remove_prefix(1);
        while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.remove_suffix(1);
        if (item.empty()) {
            throw std::invalid_argument("empty item in list '" + std::string(text) + "'");
        }
        out.push_back(item);
        if (comma == std::string_view::npos) {
            return out;
        }
        start = comma + 1;
    }
}

double parse_double(std::string_view text) {
    std::size_t used = 0;
    const std::string s(text);
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size()) {
        throw std::invalid_argument("'" + s + "' is not a number");
    }
    return v;
}

CLI::Validator make_validator(void (*parse)(std::string_view), std::string desc, std::string name) {
    return CLI::Validator(
        [parse](std::string& value) {
            try {
                parse(value);
                return std::string{};
            } catch (const std::exception& e) {
                return std::string(e.what());
            }
        },
        std::move(desc), std::move(name));
}

}  // namespace

void set_log_level(LogLevel level) noexcept { g_level = level; }
LogLevel log_level() noexcept { return g_level; }

LogLevel parse_log_level(std::string_view text) {
    if (text == "error") return LogLevel::Error;
    if (text == "warn") return LogLevel::Warn;
    if (text == "info") return LogLevel::Info;
    if (text == "debug") return LogLevel::Debug;
    throw std::invalid_argument("unknown log level '" + std::string(text) + "'");
}

void log(LogLevel level, std::string_view message) {
    if (level > log_level()) {
        return;
    }
    static constexpr std::array<const char*, 4> kNames{"error", "warn", "info", "debug"};
    std::cerr << "aspectcrop: " << kNames[static_cast<std::size_t>(level)] << ": " << message << '\n';
}

std::vector<AspectRatio> parse_ratio_list(std::string_view text) {
    std::vector<AspectRatio> out;
    std::set<AspectRatio> seen;
    for (const auto item : split_commas(text)) {
        const AspectRatio a = AspectRatio::parse(item);
        if (!seen.insert(a).second) {
            throw std::invalid_argument("ratio " + std::string(item) + " is listed twice");
        }
        out.push_back(a);
    }
    return out;
}

std::vector<int> parse_int_list(std::string_view text) {
    std::vector<int> out;
    for (const auto item : split_commas(text)) {
        int v = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc{} || ptr != item.data() + item.size() || v <= 0) {
            throw std::invalid_argument("'" + std::string(item) + "' is not a positive integer");
        }
        out.push_back(v);
    }
    return out;
}

std::array<double, 3> parse_split(std::string_view text) {
    const auto items = split_commas(text);
    if (items.size() != 3) {
        throw std::invalid_argument("split needs three fractions train,val,test");
    }
    std::array<double, 3> out{};
    for (std::size_t i = 0; i < 3; ++i) {
        out[i] = parse_double(items[i]);
        if (!(out[i] >= 0.0 && out[i] <= 1.0)) {
            throw std::invalid_argument("split fraction '" + std::string(items[i]) + "' is outside [0,1]");
        }
    }
    if (!(out[0] > 0.0) || std::abs(out[0] + out[1] + out[2] - 1.0) > 1e-9) {
        throw std::invalid_argument("split fractions must sum to 1 with a positive train share");
    }
    return out;
}

std::string join_ratios(const std::vector<AspectRatio>& ratios) {
    std::string out;
    for (const auto& a : ratios) {
        if (!out.empty()) out += ',';
        out += a.to_string();
    }
    return out;
}

const CLI::Validator kRatioList =
    make_validator([](std::string_view s) { parse_ratio_list(s); }, "A:B[,A:B...]", "RATIO_LIST");
const CLI::Validator kIntList = make_validator([](std::string_view s) { parse_int_list(s); }, "N[,N...]", "INT_LIST");
const CLI::Validator kSplit = make_validator([](std::string_view s) { parse_split(s); }, "TRAIN,VAL,TEST", "SPLIT");

std::vector<std::filesystem::path> list_images(const std::filesystem::path& input) {
    namespace fs = std::filesystem;
    if (fs::is_regular_file(input)) {
        return {input};
    }
    if (!fs::is_directory(input)) {
        throw std::runtime_error("input '" + input.string() + "' is neither a file nor a directory");
    }
    static const std::set<std::string> kExtensions{".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp"};
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(input)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (kExtensions.count(ext)) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) {
        throw std::runtime_error("no images found in '" + input.string() + "'");
    }
    return out;
}

}  // namespace aspectcrop::cli
