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
#include <map>
#include <optional>
#include <random>

#include "aspectcrop/geometry.hpp"
#include "aspectcrop/image.hpp"

namespace aspectcrop {

inline constexpr int kDefaultCanvasSide = 224;

/// Placement of an original image inside the square model canvas.
///
/// Coordinates use the exact isotropic scale and centered real-valued padding,
/// so pad_x = (side - W * scale) / 2. The raster content is placed at the
/// rounded position (see letterbox), which differs by at most half a canvas pixel.
struct CanvasMapping {
    double scale = 1.0;
    double pad_x = 0.0;
    double pad_y = 0.0;
    int canvas_side = kDefaultCanvasSide;
    ImageDims orig{1, 1};

    static CanvasMapping for_image(const ImageDims& orig, int canvas_side);
};

struct Letterboxed {
    Image canvas;
    CanvasMapping mapping;
};

/// Scales `image` isotropically to fit a canvas_side x canvas_side canvas and
/// centers it on zero padding. Content dimensions round half up; an odd pad
/// total puts the extra pixel on the left/top.
Letterboxed letterbox(const Image& image, int canvas_side = kDefaultCanvasSide);

enum class MapDirection { ImageToCanvas, CanvasToImage };

/// Linear frame change. CanvasToImage clamps the result to [0,1].
BoxN map_box(const BoxN& b, const CanvasMapping& m, MapDirection direction);

/// Center/size conversion of enforced parameters from the canvas frame to the
/// image frame, without clamping.
EnforcedBoxParams map_params_to_image(const EnforcedBoxParams& p, const CanvasMapping& m);

struct AugmentSpec {
    double hflip_prob = 0.5;
    double brightness_delta_max = 0.2;
    double saturation_delta_max = 0.2;
    double grayscale_prob = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
    static AugmentSpec identity() { return AugmentSpec{0.0, 0.0, 0.0, 0.0, 0}; }
};

using BoxesByRatio = std::map<AspectRatio, BoxN>;

struct Augmented {
    Image canvas;
    BoxesByRatio boxes;
    std::optional<BoxN> free_box;
};

/// Random horizontal flip and color jitter. Brightness multiplies samples by
/// (1 + d), saturation blends toward luma by (1 + d), with d uniform in
/// [-delta_max, delta_max]; grayscale replaces every channel by Rec.601 luma
/// (0.299 R + 0.587 G + 0.114 B). Zero padding stays zero under all of these.
Augmented augment(const Image& canvas, const BoxesByRatio& boxes, const std::optional<BoxN>& free_box,
                  const AugmentSpec& spec, std::mt19937_64& rng);

Image hflip_image(const Image& image);
Image to_grayscale(const Image& image);

}  // namespace aspectcrop
