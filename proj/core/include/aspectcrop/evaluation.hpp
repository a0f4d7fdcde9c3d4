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
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aspectcrop/datasets.hpp"
#include "aspectcrop/geometry.hpp"
#include "aspectcrop/image.hpp"
#include "aspectcrop/model.hpp"

namespace aspectcrop {

/// Center crop: the largest box of the requested ratio centered in the image,
/// scaled by `scale` about the center.
struct BaselineConfig {
    double scale = 1.0;

    void validate() const;
};

BoxN baseline_predict(const BaselineConfig& cfg, const ImageDims& dims, const AspectRatio& alpha);

/// Source of image-frame crop predictions for manifest records.
class Predictor {
public:
    virtual ~Predictor() = default;

    virtual std::string id() const = 0;
    /// Ratios predicted directly for `record`; std::nullopt means any ratio.
    virtual std::optional<std::vector<AspectRatio>> native_ratios(const ManifestRecord& record) const = 0;
    /// Predictions for `ratios`, all of which are native. May throw.
    virtual BoxesByRatio predict(const ManifestRecord& record, const std::filesystem::path& image_path,
                                 std::span<const AspectRatio> ratios) const = 0;
};

class BaselinePredictor final : public Predictor {
public:
    explicit BaselinePredictor(BaselineConfig cfg);
    std::string id() const override;
    std::optional<std::vector<AspectRatio>> native_ratios(const ManifestRecord&) const override { return std::nullopt; }
    BoxesByRatio predict(const ManifestRecord& record, const std::filesystem::path& image_path,
                         std::span<const AspectRatio> ratios) const override;

private:
    BaselineConfig cfg_;
};

class ModelPredictor final : public Predictor {
public:
    ModelPredictor(std::shared_ptr<const CropModel> model, std::string id);
    std::string id() const override { return id_; }
    std::optional<std::vector<AspectRatio>> native_ratios(const ManifestRecord&) const override;
    BoxesByRatio predict(const ManifestRecord& record, const std::filesystem::path& image_path,
                         std::span<const AspectRatio> ratios) const override;

private:
    std::shared_ptr<const CropModel> model_;
    std::string id_;
};

/// Predictions keyed by record id, read from JSONL lines
/// {"id": ..., "boxes": {"16:9": [x1, y1, x2, y2], ...}}.
class FilePredictor final : public Predictor {
public:
    explicit FilePredictor(const std::filesystem::path& path);
    std::string id() const override { return id_; }
    std::optional<std::vector<AspectRatio>> native_ratios(const ManifestRecord& record) const override;
    BoxesByRatio predict(const ManifestRecord& record, const std::filesystem::path& image_path,
                         std::span<const AspectRatio> ratios) const override;

private:
    std::string id_;
    std::map<std::string, BoxesByRatio> boxes_;
};

/// Ground truth echoed back; the fixed point of evaluate().
class GroundTruthPredictor final : public Predictor {
public:
    std::string id() const override { return "ground-truth"; }
    std::optional<std::vector<AspectRatio>> native_ratios(const ManifestRecord& record) const override;
    BoxesByRatio predict(const ManifestRecord& record, const std::filesystem::path& image_path,
                         std::span<const AspectRatio> ratios) const override;
};

void write_predictions(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, BoxesByRatio>>& predictions);

enum class UnseenPolicy {
    /// Shrink the prediction of the closest native ratio about its center.
    Synthesize,
    /// Leave ratios without a native prediction out of the report.
    Skip,
};

struct EvalOptions {
    UnseenPolicy unseen = UnseenPolicy::Synthesize;
    /// When set, an additional aggregate restricted to these ratios is reported.
    std::optional<std::vector<AspectRatio>> ratio_filter;
    int workers = 1;
};

struct RatioMetrics {
    std::size_t count = 0;
    std::size_t synthesized = 0;
    double mean_iou = 0.0;
    double mean_bde = 0.0;
    /// Mean |pixel ratio / target - 1| of the predictions.
    double mean_ratio_error = 0.0;
};

struct Aggregate {
    std::size_t count = 0;
    /// Weighted by crop count.
    double mean_iou = 0.0;
    double mean_bde = 0.0;
    /// Every ratio weighted equally.
    double ratio_weighted_iou = 0.0;
    double ratio_weighted_bde = 0.0;
    double mean_ratio_error = 0.0;
};

struct MetricsReport {
    std::string predictor;
    std::size_t records = 0;
    std::map<AspectRatio, RatioMetrics> per_ratio;
    Aggregate overall;
    std::optional<std::vector<AspectRatio>> filter;
    std::optional<Aggregate> filtered;
    std::vector<Diagnostic> failures;
};

MetricsReport evaluate(const Predictor& predictor, const Manifest& manifest, const EvalOptions& options = {});

std::string format_report(const MetricsReport& report);
std::string report_to_json(const MetricsReport& report);

struct BenchmarkOptions {
    int batch_size = 32;
    int warmup = 2;
    int iterations = 10;
};

struct BenchmarkReport {
    std::size_t heads = 0;
    int batch_size = 0;
    int warmup = 0;
    int iterations = 0;
    std::size_t images_timed = 0;
    double seconds = 0.0;
    double images_per_sec = 0.0;
    /// images_per_sec times the head count.
    double crops_per_sec = 0.0;
};

/// Times forward pass, enforced transform and clipping for every head over
/// already letterboxed canvases; decoding and letterboxing are outside the
/// timed region. Each iteration processes one batch, cycling through `canvases`.
BenchmarkReport benchmark(const CropModel& model, std::span<const Letterboxed> canvases,
                          const BenchmarkOptions& options);

std::string benchmark_to_json(const BenchmarkReport& report);

/// Pixel rectangle of a normalized box: floor for the top-left corner, ceil for
/// the bottom-right, clamped to the image.
PixelRect pixel_rect(const BoxN& box, const ImageDims& dims);

Image crop_image(const Image& image, const BoxN& box);

/// Draws the two vertical and two horizontal lines at 1/3 and 2/3.
void draw_thirds_grid(Image& image, std::array<float, 3> color = {1.0f, 1.0f, 1.0f});

/// Writes one file per box as <out_dir>/<stem>_<a>x<b>.png.
std::vector<std::filesystem::path> render(const Image& image, const BoxesByRatio& boxes, bool with_thirds_grid,
                                          const std::filesystem::path& out_dir, const std::string& stem);

}  // namespace aspectcrop
