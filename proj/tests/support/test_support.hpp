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

#include <filesystem>
#include <random>
#include <string>

#include "aspectcrop/image.hpp"

namespace aspectcrop::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("aspectcrop-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Raster with independent uniform samples quantized to 8 bits.
inline Image noise_image(int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Image img(w, h);
    for (auto& v : img.pixels()) {
        v = static_cast<float>(rng() % 256) / 255.0f;
    }
    return img;
}

/// Raster whose pixels encode their own coordinates.
inline Image gradient_image(int w, int h) {
    Image img(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            img.at(x, y, 0) = static_cast<float>(x % 256) / 255.0f;
            img.at(x, y, 1) = static_cast<float>(y % 256) / 255.0f;
            img.at(x, y, 2) = static_cast<float>((x + y) % 256) / 255.0f;
        }
    }
    return img;
}

}  // namespace aspectcrop::testing
