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

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "aspectcrop/geometry.hpp"

namespace aspectcrop {

/// Interleaved RGB raster with float samples in [0,1].
class Image {
public:
    static constexpr int kChannels = 3;

    Image() = default;
    Image(int width, int height, float fill = 0.0f);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return width_ == 0 || height_ == 0; }
    ImageDims dims() const { return ImageDims(width_, height_); }

    float& at(int x, int y, int c) noexcept { return data_[index(x, y, c)]; }
    float at(int x, int y, int c) const noexcept { return data_[index(x, y, c)]; }

    std::span<float> pixels() noexcept { return data_; }
    std::span<const float> pixels() const noexcept { return data_; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int x, int y, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<float> data_;
};

/// Decodes PNG/JPEG (anything the codec backend reads). Throws std::runtime_error
/// naming the path on failure.
Image read_image(const std::filesystem::path& path);

/// Encodes by extension; samples are quantized to 8 bits with round-half-up.
void write_image(const Image& image, const std::filesystem::path& path);

/// Area-averaging resize.
Image resize(const Image& image, int width, int height);

}  // namespace aspectcrop
