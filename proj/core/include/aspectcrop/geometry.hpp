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

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace aspectcrop {

/// Smallest admissible normalized box extent; used by the degenerate clip rescue
/// and by corner repair of non-enforced predictions.
inline constexpr double kMinBoxExtent = 1e-3;

/// Exact rational target ratio width:height.
class AspectRatio {
public:
    AspectRatio(std::int64_t num, std::int64_t den);

    /// Parses "a:b" with positive integer terms.
    static AspectRatio parse(std::string_view text);

    std::int64_t num() const noexcept { return num_; }
    std::int64_t den() const noexcept { return den_; }
    double value() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }
    bool is_landscape_or_square() const noexcept { return num_ >= den_; }

    std::string to_string() const;

    // Equality by cross product, so 16:9 == 32:18.
    friend bool operator==(const AspectRatio& a, const AspectRatio& b) noexcept {
        return a.num_ * b.den_ == b.num_ * a.den_;
    }
    friend bool operator<(const AspectRatio& a, const AspectRatio& b) noexcept {
        return a.num_ * b.den_ < b.num_ * a.den_;
    }

private:
    std::int64_t num_;
    std::int64_t den_;
};

struct ImageDims {
    int width_px;
    int height_px;

    ImageDims(int w, int h);
    double ratio() const noexcept { return static_cast<double>(width_px) / height_px; }
};

enum class Frame { Image, Canvas };

std::string_view to_string(Frame frame) noexcept;

/// Normalized corner box. Operations that consume predictions (clipping) accept
/// boxes extending past [0,1]; valid() checks the strict in-bounds invariant.
struct BoxN {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 1.0;
    double y2 = 1.0;
    Frame frame = Frame::Image;

    double width() const noexcept { return x2 - x1; }
    double height() const noexcept { return y2 - y1; }
    double cx() const noexcept { return 0.5 * (x1 + x2); }
    double cy() const noexcept { return 0.5 * (y1 + y2); }
    double area() const noexcept { return width() * height(); }
    bool valid() const noexcept;

    friend bool operator==(const BoxN&, const BoxN&) = default;
};

BoxN box_from_center(double cx, double cy, double w, double h, Frame frame);

/// Width/height in pixels of a normalized box drawn on an image of `dims`.
double pixel_ratio(const BoxN& b, const ImageDims& dims) noexcept;

enum class Orientation { LandscapeOrSquare, Portrait };

Orientation orientation_for(const AspectRatio& alpha) noexcept;

/// Output of an enforced head: the center and the single free dimension
/// (width for landscape/square heads, height for portrait heads).
struct EnforcedBoxParams {
    double x_c = 0.5;
    double y_c = 0.5;
    double size = 1.0;
    Orientation orientation = Orientation::LandscapeOrSquare;
};

/// Unclipped box implied by `p` at ratio `alpha`; may extend past [0,1].
BoxN enforced_box_unclipped(const EnforcedBoxParams& p, const AspectRatio& alpha,
                            const ImageDims& dims, Frame frame = Frame::Image);

/// Box with pixel ratio exactly `alpha`, centered on (x_c, y_c), clipped to the image.
BoxN enforce_transform(const EnforcedBoxParams& p, const AspectRatio& alpha, const ImageDims& dims);

/// Shrinks an alpha-ratio box about its center to the largest box that fits [0,1]^2.
/// If that box would be smaller than kMinBoxExtent, the center is moved inward
/// by the least amount that admits a kMinBoxExtent box instead. Never throws for
/// boundary centers; throws std::invalid_argument if `b` is not of ratio alpha.
BoxN clip_to_image(const BoxN& b, const AspectRatio& alpha, const ImageDims& dims);

double iou(const BoxN& a, const BoxN& b);

/// Mean absolute displacement of the four edges.
double bde(const BoxN& a, const BoxN& b);

BoxN hflip_box(const BoxN& b) noexcept;

/// Derives a box of ratio `target` from one of ratio `source` by shrinking one
/// side about the center; the result is contained in `b`.
BoxN adjust_to_aspect(const BoxN& b, const AspectRatio& source, const AspectRatio& target,
                      const ImageDims& dims);

struct ClosestAspect {
    AspectRatio ratio;
    double abs_error;
};

/// Candidate minimizing |W/H - value|; ties go to the earliest candidate.
ClosestAspect closest_aspect(const ImageDims& dims, std::span<const AspectRatio> candidates);
ClosestAspect closest_aspect(double ratio, std::span<const AspectRatio> candidates);

}  // namespace aspectcrop
