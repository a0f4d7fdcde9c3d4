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

#include "aspectcrop/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "aspectcrop/random.hpp"

namespace aspectcrop {

namespace {

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

float luma(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

}  // namespace

CanvasMapping CanvasMapping::for_image(const ImageDims& orig, int canvas_side) {
    if (canvas_side < 1) {
        throw std::invalid_argument("canvas side must be positive");
    }
    CanvasMapping m;
    m.canvas_side = canvas_side;
    m.orig = orig;
    m.scale = static_cast<double>(canvas_side) / std::max(orig.width_px, orig.height_px);
    m.pad_x = 0.5 * (canvas_side - orig.width_px * m.scale);
    m.pad_y = 0.5 * (canvas_side - orig.height_px * m.scale);
    // Exactly one side spans the canvas.
    if (orig.width_px >= orig.height_px) {
        m.pad_x = 0.0;
    } else {
        m.pad_y = 0.0;
    }
    return m;
}

Letterboxed letterbox(const Image& image, int canvas_side) {
    if (image.empty()) {
        throw std::invalid_argument("letterbox: zero-dimension image");
    }
    const CanvasMapping m = CanvasMapping::for_image(image.dims(), canvas_side);
    const int cw = std::clamp(round_half_up(image.width() * m.scale), 1, canvas_side);
    const int ch = std::clamp(round_half_up(image.height() * m.scale), 1, canvas_side);
    const int left = (canvas_side - cw + 1) / 2;
    const int top = (canvas_side - ch + 1) / 2;

    const Image content = resize(image, cw, ch);
    Image canvas(canvas_side, canvas_side, 0.0f);
    for (int y = 0; y < ch; ++y) {
        const auto src = content.pixels().subspan(static_cast<std::size_t>(y) * cw * Image::kChannels,
                                                  static_cast<std::size_t>(cw) * Image::kChannels);
        std::copy(src.begin(), src.end(), &canvas.at(left, top + y, 0));
    }
    return {std::move(canvas), m};
}

BoxN map_box(const BoxN& b, const CanvasMapping& m, MapDirection direction) {
    const double side = m.canvas_side;
    const double w = m.orig.width_px;
    const double h = m.orig.height_px;
    if (direction == MapDirection::ImageToCanvas) {
        if (b.frame != Frame::Image) {
            throw std::invalid_argument("map_box: expected an image-frame box");
        }
        auto fx = [&](double x) { return (m.pad_x + x * w * m.scale) / side; };
        auto fy = [&](double y) { return (m.pad_y + y * h * m.scale) / side; };
        return BoxN{fx(b.x1), fy(b.y1), fx(b.x2), fy(b.y2), Frame::Canvas};
    }
    if (b.frame != Frame::Canvas) {
        throw std::invalid_argument("map_box: expected a canvas-frame box");
    }
    auto gx = [&](double x) { return std::clamp((x * side - m.pad_x) / (w * m.scale), 0.0, 1.0); };
    auto gy = [&](double y) { return std::clamp((y * side - m.pad_y) / (h * m.scale), 0.0, 1.0); };
    return BoxN{gx(b.x1), gy(b.y1), gx(b.x2), gy(b.y2), Frame::Image};
}

EnforcedBoxParams map_params_to_image(const EnforcedBoxParams& p, const CanvasMapping& m) {
    const double side = m.canvas_side;
    const double content_w = m.orig.width_px * m.scale;
    const double content_h = m.orig.height_px * m.scale;
    EnforcedBoxParams out = p;
    out.x_c = (p.x_c * side - m.pad_x) / content_w;
    out.y_c = (p.y_c * side - m.pad_y) / content_h;
    out.size = p.orientation == Orientation::LandscapeOrSquare ? p.size * side / content_w : p.size * side / content_h;
    return out;
}

void AugmentSpec::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(hflip_prob) || !prob(grayscale_prob)) {
        throw std::invalid_argument("augment probabilities must lie in [0,1]");
    }
    if (!(brightness_delta_max >= 0.0) || !(saturation_delta_max >= 0.0)) {
        throw std::invalid_argument("augment deltas must be non-negative");
    }
}

Image hflip_image(const Image& image) {
    Image out(image.width(), image.height());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < Image::kChannels; ++c) {
                out.at(image.width() - 1 - x, y, c) = image.at(x, y, c);
            }
        }
    }
    return out;
}

Image to_grayscale(const Image& image) {
    Image out = image;
    auto px = out.pixels();
    for (std::size_t i = 0; i < px.size(); i += Image::kChannels) {
        const float l = luma(px[i], px[i + 1], px[i + 2]);
        px[i] = px[i + 1] = px[i + 2] = l;
    }
    return out;
}

Augmented augment(const Image& canvas, const BoxesByRatio& boxes, const std::optional<BoxN>& free_box,
                  const AugmentSpec& spec, std::mt19937_64& rng) {
    spec.validate();
    for (const auto& [ratio, box] : boxes) {
        if (box.frame != Frame::Canvas) {
            throw std::invalid_argument("augment: boxes must be in the canvas frame");
        }
    }
    // Draw every decision up front so the stream consumed per sample is fixed.
    const bool flip = rnd::bernoulli(rng, spec.hflip_prob);
    const double brightness = rnd::uniform(rng, -spec.brightness_delta_max, spec.brightness_delta_max);
    const double saturation = rnd::uniform(rng, -spec.saturation_delta_max, spec.saturation_delta_max);
    const bool gray = rnd::bernoulli(rng, spec.grayscale_prob);

    Augmented out{flip ? hflip_image(canvas) : canvas, boxes, free_box};
    if (flip) {
        for (auto& [ratio, box] : out.boxes) {
            box = hflip_box(box);
        }
        if (out.free_box) {
            out.free_box = hflip_box(*out.free_box);
        }
    }

    if (brightness != 0.0 || saturation != 0.0) {
        const auto bf = static_cast<float>(1.0 + brightness);
        const auto sf = static_cast<float>(1.0 + saturation);
        auto px = out.canvas.pixels();
        for (std::size_t i = 0; i < px.size(); i += Image::kChannels) {
            const float l = luma(px[i], px[i + 1], px[i + 2]);
            for (int c = 0; c < Image::kChannels; ++c) {
                const float v = (l + sf * (px[i + c] - l)) * bf;
                px[i + c] = std::clamp(v, 0.0f, 1.0f);
            }
        }
    }
    if (gray) {
        out.canvas = to_grayscale(out.canvas);
    }
    return out;
}

}  // namespace aspectcrop
