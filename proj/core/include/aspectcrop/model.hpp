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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aspectcrop/geometry.hpp"
#include "aspectcrop/image.hpp"
#include "aspectcrop/nn.hpp"
#include "aspectcrop/preprocess.hpp"

namespace aspectcrop {

/// How the last feature map becomes the feature vector.
enum class Pooling { GlobalAverage, Flatten };

std::string_view to_string(Pooling pooling) noexcept;
Pooling parse_pooling(std::string_view text);

/// Canvas side of the desk-scale backbone.
inline constexpr int kDeskCanvasSide = 64;

/// Convolutional feature extractor: one block per entry of `channels`, each
/// block being 3x3 conv, ReLU, 2x2 max pool.
struct BackboneSpec {
    std::string name = "desk-cnn";
    std::vector<int> channels{16, 32, 64, 128};
    Pooling pooling = Pooling::Flatten;
    int canvas_side = kDeskCanvasSide;

    int final_side() const;
    int feature_dim() const;
    void validate() const;
};

/// Per-channel input normalization applied to canvas samples: (x - mean) / std.
struct Normalization {
    std::array<double, 3> mean{0.5, 0.5, 0.5};
    std::array<double, 3> stddev{0.5, 0.5, 0.5};
};

enum class HeadKind { Enforced, NonEnforced };

std::string_view to_string(HeadKind kind) noexcept;

struct HeadSpec {
    /// Required for enforced heads. A non-enforced head without a ratio is the
    /// aspect-free head used for unconstrained crop datasets.
    std::optional<AspectRatio> alpha;
    HeadKind kind = HeadKind::Enforced;
    std::vector<int> hidden{64, 32};
    double leaky_slope = 0.01;

    int arity() const noexcept { return kind == HeadKind::Enforced ? 3 : 4; }
    std::string key() const;
    void validate() const;

    static HeadSpec enforced(const AspectRatio& alpha) { return HeadSpec{alpha, HeadKind::Enforced}; }
    static HeadSpec non_enforced(std::optional<AspectRatio> alpha = std::nullopt) {
        return HeadSpec{alpha, HeadKind::NonEnforced};
    }
};

using nn::Matrix;

/// Per-sample intermediates kept for the backward pass.
struct BackboneCache {
    struct Block {
        Matrix input;
        Matrix pre;
        nn::PoolResult pool;
        int height = 0;
        int width = 0;
    };
    std::vector<std::vector<Block>> samples;
};

class Backbone {
public:
    Backbone() = default;
    Backbone(const BackboneSpec& spec, std::mt19937_64& rng);

    const BackboneSpec& spec() const noexcept { return spec_; }

    /// Returns features as feature_dim x N. The cache is filled when non-null.
    Matrix forward(std::span<const Matrix> inputs, BackboneCache* cache) const;
    void backward(const BackboneCache& cache, const Matrix& grad_features);

    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;

private:
    BackboneSpec spec_;
    std::vector<nn::Conv3x3> convs_;
};

struct HeadCache {
    std::vector<Matrix> inputs;  // input of each dense layer
    std::vector<Matrix> pre;     // pre-activation of each dense layer
    Matrix output;
};

class RegressionHead {
public:
    RegressionHead() = default;
    RegressionHead(const HeadSpec& spec, int feature_dim, std::mt19937_64& rng);

    const HeadSpec& spec() const noexcept { return spec_; }

    /// Sigmoid outputs, arity x N.
    Matrix forward(const Matrix& features, HeadCache* cache) const;
    /// Accumulates parameter gradients, returns d(loss)/d(features).
    Matrix backward(const HeadCache& cache, const Matrix& grad_output);

    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;

private:
    HeadSpec spec_;
    std::vector<nn::Dense> layers_;
};

inline constexpr int kCheckpointVersion = 2;

class CropModel {
public:
    CropModel() = default;
    CropModel(const BackboneSpec& backbone, std::span<const HeadSpec> heads, std::uint64_t seed,
              Normalization norm = {});

    const BackboneSpec& backbone_spec() const noexcept { return backbone_.spec(); }
    const Normalization& normalization() const noexcept { return norm_; }
    int canvas_side() const noexcept { return backbone_.spec().canvas_side; }
    std::uint64_t seed() const noexcept { return seed_; }

    Backbone& backbone() noexcept { return backbone_; }
    const Backbone& backbone() const noexcept { return backbone_; }
    std::span<RegressionHead> heads() noexcept { return heads_; }
    std::span<const RegressionHead> heads() const noexcept { return heads_; }

    /// Index of the head trained for `alpha`, if any.
    std::optional<std::size_t> head_index(const AspectRatio& alpha) const;
    std::optional<std::size_t> free_head_index() const;
    std::vector<AspectRatio> enforced_ratios() const;

    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;
    std::size_t parameter_count() const;

    /// Replaces every head; the backbone is untouched. New heads are seeded
    /// from `seed`.
    void set_heads(std::span<const HeadSpec> heads, std::uint64_t seed);
    /// Appends a freshly initialized head; existing heads are untouched.
    void add_head(const HeadSpec& head, std::uint64_t seed);

    /// Canvas raster to normalized network input (3 x side^2).
    Matrix to_input(const Image& canvas) const;

private:
    friend CropModel load_model(const std::filesystem::path& dir);

    Backbone backbone_;
    std::vector<RegressionHead> heads_;
    Normalization norm_;
    std::uint64_t seed_ = 0;
};

/// Raw sigmoid outputs of every head for a batch of canvases, in head order.
struct ForwardResult {
    Matrix features;
    std::vector<Matrix> head_outputs;
};

ForwardResult forward(const CropModel& model, std::span<const Image> canvases);
ForwardResult forward_inputs(const CropModel& model, std::span<const Matrix> inputs);

struct TrainingForward {
    ForwardResult result;
    BackboneCache backbone;
    std::vector<HeadCache> heads;
};

TrainingForward forward_for_training(const CropModel& model, std::span<const Matrix> inputs);

/// Accumulates gradients given d(loss)/d(head output) for every head. Heads
/// whose gradient is all zero are skipped entirely.
void backward(CropModel& model, const TrainingForward& fwd, std::span<const Matrix> head_grads,
              bool update_backbone = true);

/// Interprets a raw enforced-head column.
EnforcedBoxParams params_from_output(const Eigen::Ref<const Eigen::VectorXd>& out, const AspectRatio& alpha);

/// Interprets a raw non-enforced column as corners, swapping inverted pairs and
/// widening coincident ones by kMinBoxExtent.
BoxN corners_from_output(const Eigen::Ref<const Eigen::VectorXd>& out, Frame frame);

struct CropPrediction {
    AspectRatio ratio;
    BoxN box;
    /// Set when no head exists for `ratio` and the box was derived from this head.
    std::optional<AspectRatio> derived_from;
};

/// Letterbox, forward, enforced transform, canvas-to-image mapping, clipping.
/// Ratios without a head are derived from the closest enforced head.
std::vector<CropPrediction> predict(const CropModel& model, const Image& image,
                                    std::span<const AspectRatio> requested);
std::vector<CropPrediction> predict_canvas(const CropModel& model, const Image& canvas,
                                           const CanvasMapping& mapping, std::span<const AspectRatio> requested);

/// Turns one column of head outputs into a prediction in the image frame.
BoxN head_output_to_image_box(const RegressionHead& head, const Eigen::Ref<const Eigen::VectorXd>& out,
                              const CanvasMapping& mapping);

/// Image-frame box from the aspect-free head.
BoxN predict_free(const CropModel& model, const Image& image);

/// Copy of `model` with new heads; backbone parameters are preserved bit-for-bit.
CropModel replace_heads(const CropModel& model, std::span<const HeadSpec> heads, std::uint64_t seed);

/// FNV-1a over the raw bytes of every backbone parameter.
std::uint64_t backbone_checksum(const CropModel& model);

/// Writes config.json plus one weight blob per parameter group.
void save_model(const CropModel& model, const std::filesystem::path& dir);
CropModel load_model(const std::filesystem::path& dir);

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace aspectcrop
