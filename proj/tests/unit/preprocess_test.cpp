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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "aspectcrop/preprocess.hpp"
#include "aspectcrop/random.hpp"
#include "test_support.hpp"

namespace aspectcrop {
namespace {

using testing::noise_image;

bool pixel_is_zero(const Image& img, int x, int y) {
    return img.at(x, y, 0) == 0.0f && img.at(x, y, 1) == 0.0f && img.at(x, y, 2) == 0.0f;
}

TEST(Letterbox, WideImage) {
    const Image img(400, 200, 0.5f);
    const auto lb = letterbox(img, 224);
    EXPECT_DOUBLE_EQ(lb.mapping.scale, 0.56);
    EXPECT_DOUBLE_EQ(lb.mapping.pad_x, 0.0);
    EXPECT_DOUBLE_EQ(lb.mapping.pad_y, 56.0);
    EXPECT_EQ(lb.canvas.width(), 224);
    EXPECT_EQ(lb.canvas.height(), 224);
    // Content rows 56..167, padding elsewhere.
    for (int y = 0; y < 224; ++y) {
        const bool content = y >= 56 && y < 168;
        EXPECT_EQ(!pixel_is_zero(lb.canvas, 100, y), content) << y;
    }
}

TEST(Letterbox, SquareImageIsIdentity) {
    const Image img = noise_image(224, 224, 3);
    const auto lb = letterbox(img, 224);
    EXPECT_DOUBLE_EQ(lb.mapping.scale, 1.0);
    EXPECT_DOUBLE_EQ(lb.mapping.pad_x, 0.0);
    EXPECT_DOUBLE_EQ(lb.mapping.pad_y, 0.0);
    EXPECT_EQ(lb.canvas, img);
}

TEST(Letterbox, TallImageRoundsHalfUpAndPadsLeftHeavy) {
    // 100 * 224 / 300 = 74.67 -> 75 columns; 149 padding columns, 75 left, 74 right.
    const Image img(100, 300, 1.0f);
    const auto lb = letterbox(img, 224);
    int first = -1;
    int last = -1;
    for (int x = 0; x < 224; ++x) {
        if (!pixel_is_zero(lb.canvas, x, 112)) {
            if (first < 0) first = x;
            last = x;
        }
    }
    EXPECT_EQ(last - first + 1, 75);
    EXPECT_EQ(first, 75);
    EXPECT_EQ(223 - last, 74);
    EXPECT_NEAR(lb.mapping.pad_x, (224.0 - 100.0 * 224.0 / 300.0) / 2.0, 1e-12);
}

TEST(Letterbox, RejectsEmptyImage) { EXPECT_THROW(letterbox(Image{}, 224), std::invalid_argument); }

TEST(MapBox, FullBoxOnWideImage) {
    const auto m = CanvasMapping::for_image(ImageDims(400, 200), 224);
    const BoxN c = map_box(BoxN{0, 0, 1, 1}, m, MapDirection::ImageToCanvas);
    EXPECT_EQ(c.frame, Frame::Canvas);
    EXPECT_NEAR(c.x1, 0.0, 1e-15);
    EXPECT_NEAR(c.y1, 0.25, 1e-15);
    EXPECT_NEAR(c.x2, 1.0, 1e-15);
    EXPECT_NEAR(c.y2, 0.75, 1e-15);
}

TEST(MapBox, SquareImageIsIdentity) {
    const auto m = CanvasMapping::for_image(ImageDims(300, 300), 224);
    const BoxN b{0.1, 0.2, 0.3, 0.4};
    const BoxN c = map_box(b, m, MapDirection::ImageToCanvas);
    EXPECT_NEAR(c.x1, b.x1, 1e-15);
    EXPECT_NEAR(c.y2, b.y2, 1e-15);
}

TEST(MapBox, RejectsWrongSourceFrame) {
    const auto m = CanvasMapping::for_image(ImageDims(300, 200), 64);
    EXPECT_THROW(map_box(BoxN{0, 0, 1, 1, Frame::Canvas}, m, MapDirection::ImageToCanvas), std::invalid_argument);
    EXPECT_THROW(map_box(BoxN{0, 0, 1, 1, Frame::Image}, m, MapDirection::CanvasToImage), std::invalid_argument);
}

TEST(MapBox, CanvasToImageClamps) {
    const auto m = CanvasMapping::for_image(ImageDims(400, 200), 224);
    const BoxN b = map_box(BoxN{0, 0, 1, 1, Frame::Canvas}, m, MapDirection::CanvasToImage);
    EXPECT_EQ(b.frame, Frame::Image);
    EXPECT_GE(b.x1, 0.0);
    EXPECT_GE(b.y1, 0.0);
    EXPECT_LE(b.x2, 1.0);
    EXPECT_LE(b.y2, 1.0);
    EXPECT_NEAR(b.x1, 0.0, 1e-12);
    EXPECT_NEAR(b.y1, 0.0, 1e-12);
    EXPECT_NEAR(b.x2, 1.0, 1e-12);
    EXPECT_NEAR(b.y2, 1.0, 1e-12);
}

TEST(MapBox, RandomRoundTripAndFlipCommutation) {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 2000; ++i) {
        const ImageDims dims(static_cast<int>(rnd::uniform_int(rng, 1, 4000)),
                             static_cast<int>(rnd::uniform_int(rng, 1, 4000)));
        const int side = static_cast<int>(rnd::uniform_int(rng, 16, 512));
        const auto m = CanvasMapping::for_image(dims, side);
        const double x1 = rnd::uniform(rng, 0.0, 0.9);
        const double y1 = rnd::uniform(rng, 0.0, 0.9);
        const BoxN b{x1, y1, rnd::uniform(rng, x1 + 0.01, 1.0), rnd::uniform(rng, y1 + 0.01, 1.0)};
        const BoxN c = map_box(b, m, MapDirection::ImageToCanvas);
        const BoxN back = map_box(c, m, MapDirection::CanvasToImage);
        EXPECT_NEAR(back.x1, b.x1, 1e-9);
        EXPECT_NEAR(back.y1, b.y1, 1e-9);
        EXPECT_NEAR(back.x2, b.x2, 1e-9);
        EXPECT_NEAR(back.y2, b.y2, 1e-9);
        const BoxN flipped = map_box(hflip_box(b), m, MapDirection::ImageToCanvas);
        const BoxN expected = hflip_box(c);
        EXPECT_NEAR(flipped.x1, expected.x1, 1e-12);
        EXPECT_NEAR(flipped.x2, expected.x2, 1e-12);
        EXPECT_NEAR(flipped.y1, expected.y1, 1e-12);
    }
}

TEST(MapParams, AgreesWithBoxMapping) {
    std::mt19937_64 rng(4);
    const AspectRatio alpha(16, 9);
    for (int i = 0; i < 200; ++i) {
        const ImageDims dims(static_cast<int>(rnd::uniform_int(rng, 50, 900)),
                             static_cast<int>(rnd::uniform_int(rng, 50, 900)));
        const auto m = CanvasMapping::for_image(dims, 96);
        const ImageDims canvas_dims(96, 96);
        const EnforcedBoxParams p{rnd::uniform(rng, 0.3, 0.7), rnd::uniform(rng, 0.3, 0.7),
                                  rnd::uniform(rng, 0.05, 0.3), Orientation::LandscapeOrSquare};
        const BoxN canvas_box = enforced_box_unclipped(p, alpha, canvas_dims, Frame::Canvas);
        const BoxN via_box = map_box(canvas_box, m, MapDirection::CanvasToImage);
        const BoxN via_params = enforced_box_unclipped(map_params_to_image(p, m), alpha, dims);
        if (via_params.valid()) {
            EXPECT_NEAR(via_box.x1, via_params.x1, 1e-9);
            EXPECT_NEAR(via_box.y1, via_params.y1, 1e-9);
            EXPECT_NEAR(via_box.x2, via_params.x2, 1e-9);
            EXPECT_NEAR(via_box.y2, via_params.y2, 1e-9);
        }
    }
}

BoxesByRatio sample_boxes() {
    return {{AspectRatio(16, 9), BoxN{0.1, 0.3, 0.6, 0.58, Frame::Canvas}},
            {AspectRatio(1, 1), BoxN{0.2, 0.2, 0.5, 0.5, Frame::Canvas}}};
}

TEST(Augment, IdentitySpecChangesNothing) {
    const Image img = noise_image(32, 32, 1);
    std::mt19937_64 rng(0);
    const auto out = augment(img, sample_boxes(), std::nullopt, AugmentSpec::identity(), rng);
    EXPECT_EQ(out.canvas, img);
    EXPECT_EQ(out.boxes, sample_boxes());
}

TEST(Augment, ForcedFlipMirrorsPixelsAndBoxes) {
    const Image img = noise_image(17, 9, 2);
    AugmentSpec spec = AugmentSpec::identity();
    spec.hflip_prob = 1.0;
    std::mt19937_64 rng(0);
    const BoxN free{0.1, 0.1, 0.3, 0.9, Frame::Canvas};
    const auto out = augment(img, sample_boxes(), free, spec, rng);
    for (int y = 0; y < 9; ++y) {
        for (int x = 0; x < 17; ++x) {
            for (int c = 0; c < 3; ++c) {
                ASSERT_EQ(out.canvas.at(x, y, c), img.at(16 - x, y, c));
            }
        }
    }
    for (const auto& [a, b] : sample_boxes()) {
        EXPECT_EQ(out.boxes.at(a), hflip_box(b));
    }
    EXPECT_EQ(*out.free_box, hflip_box(free));
}

TEST(Augment, ForcedGrayscaleUsesRec601Luma) {
    const Image img = noise_image(8, 8, 3);
    AugmentSpec spec = AugmentSpec::identity();
    spec.grayscale_prob = 1.0;
    std::mt19937_64 rng(0);
    const auto out = augment(img, sample_boxes(), std::nullopt, spec, rng);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            const float l = 0.299f * img.at(x, y, 0) + 0.587f * img.at(x, y, 1) + 0.114f * img.at(x, y, 2);
            for (int c = 0; c < 3; ++c) {
                EXPECT_FLOAT_EQ(out.canvas.at(x, y, c), l);
            }
        }
    }
    EXPECT_EQ(out.boxes, sample_boxes());
}

TEST(Augment, ColorNeverMovesBoxesAndKeepsPaddingZero) {
    Image img = noise_image(16, 16, 4);
    for (int x = 0; x < 16; ++x) {
        for (int c = 0; c < 3; ++c) img.at(x, 0, c) = 0.0f;
    }
    AugmentSpec spec;
    spec.hflip_prob = 0.0;
    spec.grayscale_prob = 0.5;
    spec.brightness_delta_max = 0.5;
    spec.saturation_delta_max = 0.5;
    std::mt19937_64 rng(8);
    for (int i = 0; i < 50; ++i) {
        const auto out = augment(img, sample_boxes(), std::nullopt, spec, rng);
        EXPECT_EQ(out.boxes, sample_boxes());
        for (int x = 0; x < 16; ++x) {
            EXPECT_TRUE(pixel_is_zero(out.canvas, x, 0));
        }
        for (float v : out.canvas.pixels()) {
            ASSERT_GE(v, 0.0f);
            ASSERT_LE(v, 1.0f);
        }
    }
}

TEST(Augment, DeterministicGivenRngState) {
    const Image img = noise_image(16, 16, 5);
    AugmentSpec spec;
    std::mt19937_64 a(77);
    std::mt19937_64 b(77);
    for (int i = 0; i < 20; ++i) {
        const auto x = augment(img, sample_boxes(), std::nullopt, spec, a);
        const auto y = augment(img, sample_boxes(), std::nullopt, spec, b);
        EXPECT_EQ(x.canvas, y.canvas);
        EXPECT_EQ(x.boxes, y.boxes);
    }
}

TEST(Augment, RejectsImageFrameBoxes) {
    std::mt19937_64 rng(0);
    const BoxesByRatio boxes{{AspectRatio(1, 1), BoxN{0.1, 0.1, 0.2, 0.2, Frame::Image}}};
    EXPECT_THROW(augment(Image(4, 4), boxes, std::nullopt, AugmentSpec{}, rng), std::invalid_argument);
    AugmentSpec bad;
    bad.hflip_prob = 1.5;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace aspectcrop
