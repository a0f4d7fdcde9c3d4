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
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "aspectcrop/geometry.hpp"
#include "aspectcrop/image.hpp"
#include "aspectcrop/preprocess.hpp"

namespace aspectcrop {

/// Crop annotations must match their ratio key within this relative error
/// once converted to pixels.
inline constexpr double kManifestRatioTolerance = 0.005;

/// The five ratios annotated in the editorial corpus this library targets.
std::vector<AspectRatio> default_ratios();

struct ManifestRecord {
    std::string id;
    std::filesystem::path path;
    ImageDims dims{1, 1};
    BoxesByRatio crops;

    friend bool operator==(const ManifestRecord& a, const ManifestRecord& b) {
        return a.id == b.id && a.path == b.path && a.dims.width_px == b.dims.width_px &&
               a.dims.height_px == b.dims.height_px && a.crops == b.crops;
    }
};

/// A record with one unconstrained crop.
struct AspectFreeRecord {
    std::string id;
    std::filesystem::path path;
    ImageDims dims{1, 1};
    BoxN crop;
};

struct Diagnostic {
    std::size_t line = 0;
    std::string id;
    std::string message;
};

template <typename Record>
struct ManifestOf {
    /// Directory that relative record paths resolve against.
    std::filesystem::path base_dir;
    std::vector<Record> records;
    std::vector<Diagnostic> diagnostics;

    std::filesystem::path resolve(const Record& r) const { return r.path.is_absolute() ? r.path : base_dir / r.path; }
};

using Manifest = ManifestOf<ManifestRecord>;
using AspectFreeManifest = ManifestOf<AspectFreeRecord>;

/// Reads the JSONL manifest. Invalid lines are skipped and reported in
/// `diagnostics`; throws std::runtime_error if the file is unreadable or no
/// record survives.
Manifest load_manifest(const std::filesystem::path& path);
AspectFreeManifest load_aspect_free_manifest(const std::filesystem::path& path);

/// Writes records sorted by id.
void write_manifest(const std::filesystem::path& path, std::vector<ManifestRecord> records);
void write_manifest(const std::filesystem::path& path, std::vector<AspectFreeRecord> records);

struct DatasetStats {
    std::size_t images = 0;
    /// Crops per annotated ratio; every candidate ratio appears, possibly with 0.
    std::map<AspectRatio, std::size_t> crop_counts;
    /// Original images binned by their closest common ratio.
    std::map<AspectRatio, std::size_t> original_ratio_histogram;
    std::vector<double> closest_ratio_error;
    double mean_closest_ratio_error = 0.0;
};

/// Ratios used to bin original image shapes in DatasetStats.
std::vector<AspectRatio> common_ratios();

DatasetStats compute_stats(const Manifest& manifest, const std::vector<AspectRatio>& candidates = default_ratios());

/// Converters from third-party annotation styles.
///
/// FCDB style: a JSON array of objects {"image": path, "width": W, "height": H,
/// "crop": [x, y, w, h]} in pixels.
/// Thumbnail style: CSV lines "image,width,height,ratio,x1,y1,x2,y2" in pixels,
/// one line per (image, ratio); lines for the same image are merged.
AspectFreeManifest convert_fcdb(const std::filesystem::path& json_path);
Manifest convert_thumbnail_csv(const std::filesystem::path& csv_path);

struct PixelRect {
    int x = 0;
    int y = 0;
    int w = 1;
    int h = 1;
};

struct SyntheticSpec {
    int count = 200;
    int min_side = 64;
    int max_side = 160;
    double subject_area_min = 0.10;
    double subject_area_max = 0.40;
    double margin = 1.2;
    std::vector<AspectRatio> ratios = default_ratios();
    std::uint64_t seed = 0;
    /// Emit aspect-free records (one crop around the subject) instead.
    bool aspect_free = false;

    void validate() const;
};

struct SyntheticScene {
    ImageDims dims{1, 1};
    PixelRect subject;
    std::array<float, 3> background{};
    std::array<float, 3> foreground{};
};

SyntheticScene sample_scene(const SyntheticSpec& spec, std::mt19937_64& rng);
Image render_scene(const SyntheticScene& scene);

/// Ground truth for one ratio: the smallest alpha box around the subject,
/// scaled by `margin` about the subject center and clipped to the image.
/// Empty when the clipped box no longer contains the subject.
std::optional<BoxN> oracle_crop(const PixelRect& subject, const ImageDims& dims, const AspectRatio& alpha,
                                double margin);

/// Subject box scaled by `margin`, clamped to the image.
BoxN oracle_free_crop(const PixelRect& subject, const ImageDims& dims, double margin);

struct SyntheticCorpus {
    std::filesystem::path manifest_path;
    std::vector<SyntheticScene> scenes;
};

/// Writes images/<id>.png and manifest.jsonl under out_dir.
SyntheticCorpus gen_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace aspectcrop
