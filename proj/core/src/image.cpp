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

#include "aspectcrop/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace aspectcrop {

Image::Image(int width, int height, float fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0) * kChannels, fill) {
    if (width < 0 || height < 0) {
        throw std::invalid_argument("negative image size");
    }
}

namespace {

cv::Mat as_mat(const Image& image) {
    // OpenCV does not modify the buffer through this header.
    return cv::Mat(image.height(), image.width(), CV_32FC3, const_cast<float*>(image.pixels().data()));
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) {
        throw std::runtime_error("cannot decode image '" + path.string() + "'");
    }
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    static const auto table = [] {
        std::array<float, 256> t{};
        for (int k = 0; k < 256; ++k) {
            t[static_cast<std::size_t>(k)] = static_cast<float>(k / 255.0);
        }
        return t;
    }();
    Image out(rgb.cols, rgb.rows);
    float* dst = out.pixels().data();
    for (int y = 0; y < rgb.rows; ++y) {
        const unsigned char* row = rgb.ptr<unsigned char>(y);
        for (int i = 0; i < rgb.cols * 3; ++i) {
            *dst++ = table[row[i]];
        }
    }
    return out;
}

void write_image(const Image& image, const std::filesystem::path& path) {
    if (image.empty()) {
        throw std::invalid_argument("cannot write empty image '" + path.string() + "'");
    }
    cv::Mat bgr(image.height(), image.width(), CV_8UC3);
    for (int y = 0; y < image.height(); ++y) {
        auto* row = bgr.ptr<unsigned char>(y);
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < Image::kChannels; ++c) {
                const float v = std::clamp(image.at(x, y, c), 0.0f, 1.0f);
                row[x * 3 + (2 - c)] = static_cast<unsigned char>(std::floor(v * 255.0f + 0.5f));
            }
        }
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    if (!cv::imwrite(path.string(), bgr)) {
        throw std::runtime_error("cannot write image '" + path.string() + "'");
    }
}

Image resize(const Image& image, int width, int height) {
    if (image.empty() || width < 1 || height < 1) {
        throw std::invalid_argument("resize: empty source or target");
    }
    if (width == image.width() && height == image.height()) {
        return image;
    }
    Image out(width, height);
    cv::Mat dst = as_mat(out);
    const bool shrinking = width < image.width() && height < image.height();
    cv::resize(as_mat(image), dst, cv::Size(width, height), 0, 0,
               shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
    return out;
}

}  // namespace aspectcrop
