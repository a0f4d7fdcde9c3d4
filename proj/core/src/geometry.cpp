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

#include "aspectcrop/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace aspectcrop {

namespace {

constexpr double kRatioCheckTolerance = 1e-6;

void require_same_frame(const BoxN& a, const BoxN& b) {
    if (a.frame != b.frame) {
        throw std::invalid_argument("box frame mismatch: " + std::string(to_string(a.frame)) + " vs " +
                                    std::string(to_string(b.frame)));
    }
}

void require_ratio(const BoxN& b, const AspectRatio& alpha, const ImageDims& dims, const char* op) {
    const double r = pixel_ratio(b, dims);
    if (!(b.width() > 0.0 && b.height() > 0.0) ||
        std::abs(r / alpha.value() - 1.0) > kRatioCheckTolerance) {
        throw std::invalid_argument(std::string(op) + ": box pixel ratio " + std::to_string(r) +
                                    " does not match " + alpha.to_string());
    }
}

std::int64_t parse_term(std::string_view s, std::string_view whole) {
    std::int64_t v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end || s.empty()) {
        throw std::invalid_argument("malformed aspect ratio '" + std::string(whole) + "'");
    }
    return v;
}

}  // namespace

AspectRatio::AspectRatio(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
    if (num < 1 || den < 1) {
        throw std::invalid_argument("aspect ratio terms must be positive, got " + std::to_string(num) + ":" +
                                    std::to_string(den));
    }
}

AspectRatio AspectRatio::parse(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        throw std::invalid_argument("aspect ratio '" + std::string(text) + "' is not of the form a:b");
    }
    return AspectRatio(parse_term(text.substr(0, colon), text), parse_term(text.substr(colon + 1), text));
}

std::string AspectRatio::to_string() const { return std::to_string(num_) + ":" + std::to_string(den_); }

ImageDims::ImageDims(int w, int h) : width_px(w), height_px(h) {
    if (w < 1 || h < 1) {
        throw std::invalid_argument("image dimensions must be positive, got " + std::to_string(w) + "x" +
                                    std::to_string(h));
    }
}

std::string_view to_string(Frame frame) noexcept { return frame == Frame::Image ? "image" : "canvas"; }

bool BoxN::valid() const noexcept {
    return 0.0 <= x1 && x1 < x2 && x2 <= 1.0 && 0.0 <= y1 && y1 < y2 && y2 <= 1.0;
}

BoxN box_from_center(double cx, double cy, double w, double h, Frame frame) {
    return BoxN{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h, frame};
}

double pixel_ratio(const BoxN& b, const ImageDims& dims) noexcept {
    return (b.width() * dims.width_px) / (b.height() * dims.height_px);
}

Orientation orientation_for(const AspectRatio& alpha) noexcept {
    return alpha.is_landscape_or_square() ? Orientation::LandscapeOrSquare : Orientation::Portrait;
}

BoxN enforced_box_unclipped(const EnforcedBoxParams& p, const AspectRatio& alpha, const ImageDims& dims,
                            Frame frame) {
    if (p.orientation != orientation_for(alpha)) {
        throw std::invalid_argument("enforced params orientation does not match ratio " + alpha.to_string());
    }
    if (!(p.size > 0.0) || !std::isfinite(p.size) || !std::isfinite(p.x_c) || !std::isfinite(p.y_c)) {
        throw std::invalid_argument("enforced params must be finite with positive size");
    }
    const double image_ratio = dims.ratio();
    double w = 0.0;
    double h = 0.0;
    if (p.orientation == Orientation::LandscapeOrSquare) {
        w = p.size;
        h = p.size * image_ratio / alpha.value();
    } else {
        h = p.size;
        w = p.size * alpha.value() / image_ratio;
    }
    return box_from_center(p.x_c, p.y_c, w, h, frame);
}

BoxN enforce_transform(const EnforcedBoxParams& p, const AspectRatio& alpha, const ImageDims& dims) {
    return clip_to_image(enforced_box_unclipped(p, alpha, dims, Frame::Image), alpha, dims);
}

BoxN clip_to_image(const BoxN& b, const AspectRatio& alpha, const ImageDims& dims) {
    require_ratio(b, alpha, dims, "clip_to_image");
    double cx = b.cx();
    double cy = b.cy();
    double w = b.width();
    double h = b.height();

    const double half_w_max = std::clamp(std::min(cx, 1.0 - cx), 0.0, 1.0);
    const double half_h_max = std::clamp(std::min(cy, 1.0 - cy), 0.0, 1.0);
    const double k = std::min(half_w_max / (0.5 * w), half_h_max / (0.5 * h));

    if (k >= 1.0 && b.x1 >= 0.0 && b.y1 >= 0.0 && b.x2 <= 1.0 && b.y2 <= 1.0) {
        return b;
    }
    if (std::min(w, h) * std::min(k, 1.0) < kMinBoxExtent * (1.0 - 1e-9) && k < 1.0) {
        // Degenerate rescue: keep the ratio, grow to the minimum extent and move the
        // center inward just enough to fit.
        double s = kMinBoxExtent / std::min(w, h);
        if (std::max(w, h) * s > 1.0) {
            s = 1.0 / std::max(w, h);
        }
        w *= s;
        h *= s;
        cx = std::clamp(cx, 0.5 * w, 1.0 - 0.5 * w);
        cy = std::clamp(cy, 0.5 * h, 1.0 - 0.5 * h);
    } else if (k < 1.0 - 1e-12) {
        w *= k;
        h *= k;
    }

    BoxN out = box_from_center(cx, cy, w, h, b.frame);
    out.x1 = std::clamp(out.x1, 0.0, 1.0);
    out.y1 = std::clamp(out.y1, 0.0, 1.0);
    out.x2 = std::clamp(out.x2, 0.0, 1.0);
    out.y2 = std::clamp(out.y2, 0.0, 1.0);
    return out;
}

double iou(const BoxN& a, const BoxN& b) {
    require_same_frame(a, b);
    const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) {
        return 0.0;
    }
    return std::clamp(inter / uni, 0.0, 1.0);
}

double bde(const BoxN& a, const BoxN& b) {
    require_same_frame(a, b);
    return (std::abs(a.x1 - b.x1) + std::abs(a.y1 - b.y1) + std::abs(a.x2 - b.x2) + std::abs(a.y2 - b.y2)) / 4.0;
}

BoxN hflip_box(const BoxN& b) noexcept { return BoxN{1.0 - b.x2, b.y1, 1.0 - b.x1, b.y2, b.frame}; }

BoxN adjust_to_aspect(const BoxN& b, const AspectRatio& source, const AspectRatio& target, const ImageDims& dims) {
    require_ratio(b, source, dims, "adjust_to_aspect");
    if (source == target) {
        return b;
    }
    double w = b.width();
    double h = b.height();
    if (target.value() > source.value()) {
        h *= source.value() / target.value();
    } else {
        w *= target.value() / source.value();
    }
    return box_from_center(b.cx(), b.cy(), w, h, b.frame);
}

ClosestAspect closest_aspect(double ratio, std::span<const AspectRatio> candidates) {
    if (candidates.empty()) {
        throw std::invalid_argument("closest_aspect: empty candidate list");
    }
    ClosestAspect best{candidates.front(), std::abs(ratio - candidates.front().value())};
    for (const auto& c : candidates.subspan(1)) {
        const double d = std::abs(ratio - c.value());
        if (d < best.abs_error) {
            best = {c, d};
        }
    }
    return best;
}

ClosestAspect closest_aspect(const ImageDims& dims, std::span<const AspectRatio> candidates) {
    return closest_aspect(dims.ratio(), candidates);
}

}  // namespace aspectcrop
