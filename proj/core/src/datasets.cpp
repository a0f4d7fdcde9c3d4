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

#include "aspectcrop/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "aspectcrop/random.hpp"

namespace aspectcrop {

namespace {

using nlohmann::ordered_json;

class RecordError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

BoxN parse_box(const ordered_json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 4) {
        throw RecordError(field + ": expected [x1, y1, x2, y2]");
    }
    for (const auto& v : j) {
        if (!v.is_number()) {
            throw RecordError(field + ": coordinates must be numbers");
        }
    }
    BoxN b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(), Frame::Image};
    if (!(b.x1 < b.x2)) {
        throw RecordError(field + ": x1 >= x2");
    }
    if (!(b.y1 < b.y2)) {
        throw RecordError(field + ": y1 >= y2");
    }
    if (!b.valid()) {
        throw RecordError(field + ": coordinates outside [0,1]");
    }
    return b;
}

ordered_json box_json(const BoxN& b) { return ordered_json::array({b.x1, b.y1, b.x2, b.y2}); }

struct Common {
    std::string id;
    std::filesystem::path path;
    ImageDims dims{1, 1};
};

Common parse_common(const ordered_json& j) {
    if (!j.is_object()) {
        throw RecordError("record is not a JSON object");
    }
    for (const char* key : {"id", "path", "width", "height"}) {
        if (!j.contains(key)) {
            throw RecordError(std::string("missing field '") + key + "'");
        }
    }
    if (!j["id"].is_string() || j["id"].get<std::string>().empty()) {
        throw RecordError("id: expected a non-empty string");
    }
    if (!j["path"].is_string()) {
        throw RecordError("path: expected a string");
    }
    if (!j["width"].is_number_integer() || !j["height"].is_number_integer() || j["width"].get<int>() < 1 ||
        j["height"].get<int>() < 1) {
        throw RecordError("width/height: expected positive integers");
    }
    return {j["id"].get<std::string>(), j["path"].get<std::string>(),
            ImageDims(j["width"].get<int>(), j["height"].get<int>())};
}

ManifestRecord parse_record(const ordered_json& j) {
    auto [id, path, dims] = parse_common(j);
    ManifestRecord r{id, path, dims, {}};
    if (!j.contains("crops") || !j["crops"].is_object()) {
        throw RecordError("crops: expected an object keyed by aspect ratio");
    }
    for (const auto& [key, value] : j["crops"].items()) {
        const std::string field = "crops." + key;
        AspectRatio alpha(1, 1);
        try {
            alpha = AspectRatio::parse(key);
        } catch (const std::invalid_argument& e) {
            throw RecordError(field + ": " + e.what());
        }
        const BoxN b = parse_box(value, field);
        const double ratio = pixel_ratio(b, dims);
        if (std::abs(ratio / alpha.value() - 1.0) > kManifestRatioTolerance) {
            std::ostringstream msg;
            msg << field << ": pixel ratio " << ratio << " does not match " << key << " (" << alpha.value()
                << ") within " << kManifestRatioTolerance * 100 << "%";
            throw RecordError(msg.str());
        }
        if (!r.crops.emplace(alpha, b).second) {
            throw RecordError(field + ": duplicate aspect ratio");
        }
    }
    return r;
}

AspectFreeRecord parse_free_record(const ordered_json& j) {
    auto [id, path, dims] = parse_common(j);
    if (!j.contains("crop")) {
        throw RecordError("missing field 'crop'");
    }
    return AspectFreeRecord{id, path, dims, parse_box(j["crop"], "crop")};
}

template <typename Record, typename Parse>
ManifestOf<Record> load_jsonl(const std::filesystem::path& path, Parse parse) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read manifest " + path.string());
    }
    ManifestOf<Record> m;
    m.base_dir = path.parent_path();
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::string id;
        try {
            const auto j = ordered_json::parse(line);
            if (j.is_object() && j.contains("id") && j["id"].is_string()) {
                id = j["id"].get<std::string>();
            }
            Record r = parse(j);
            if (!ids.insert(r.id).second) {
                throw RecordError("duplicate id");
            }
            m.records.push_back(std::move(r));
        } catch (const ordered_json::exception& e) {
            m.diagnostics.push_back({lineno, id, std::string("malformed JSON: ") + e.what()});
        } catch (const RecordError& e) {
            m.diagnostics.push_back({lineno, id, e.what()});
        }
    }
    if (m.records.empty()) {
        throw std::runtime_error("manifest " + path.string() + " has no valid records (" +
                                 std::to_string(m.diagnostics.size()) + " rejected)");
    }
    return m;
}

void write_lines(const std::filesystem::path& path, const std::vector<ordered_json>& lines) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    for (const auto& j : lines) {
        out << j.dump() << '\n';
    }
    if (!out) {
        throw std::runtime_error("cannot write manifest " + path.string());
    }
}

ordered_json common_json(const std::string& id, const std::filesystem::path& p, const ImageDims& d) {
    ordered_json j;
    j["id"] = id;
    j["path"] = p.generic_string();
    j["width"] = d.width_px;
    j["height"] = d.height_px;
    return j;
}

float quantize(double v) { return static_cast<float>(std::floor(v * 255.0 + 0.5) / 255.0); }

}  // namespace

std::vector<AspectRatio> default_ratios() {
    return {AspectRatio(16, 9), AspectRatio(4, 3), AspectRatio(2, 1), AspectRatio(3, 4), AspectRatio(1, 1)};
}

std::vector<AspectRatio> common_ratios() {
    return {AspectRatio(21, 9), AspectRatio(2, 1), AspectRatio(16, 9), AspectRatio(3, 2), AspectRatio(4, 3),
            AspectRatio(1, 1),  AspectRatio(3, 4), AspectRatio(2, 3),  AspectRatio(9, 16)};
}

Manifest load_manifest(const std::filesystem::path& path) {
    return load_jsonl<ManifestRecord>(path, parse_record);
}

AspectFreeManifest load_aspect_free_manifest(const std::filesystem::path& path) {
    return load_jsonl<AspectFreeRecord>(path, parse_free_record);
}

void write_manifest(const std::filesystem::path& path, std::vector<ManifestRecord> records) {
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::vector<ordered_json> lines;
    for (const auto& r : records) {
        ordered_json j = common_json(r.id, r.path, r.dims);
        j["crops"] = ordered_json::object();
        for (const auto& [alpha, box] : r.crops) {
            j["crops"][alpha.to_string()] = box_json(box);
        }
        lines.push_back(std::move(j));
    }
    write_lines(path, lines);
}

void write_manifest(const std::filesystem::path& path, std::vector<AspectFreeRecord> records) {
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::vector<ordered_json> lines;
    for (const auto& r : records) {
        ordered_json j = common_json(r.id, r.path, r.dims);
        j["crop"] = box_json(r.crop);
        lines.push_back(std::move(j));
    }
    write_lines(path, lines);
}

DatasetStats compute_stats(const Manifest& manifest, const std::vector<AspectRatio>& candidates) {
    if (manifest.records.empty()) {
        throw std::invalid_argument("stats: empty manifest");
    }
    DatasetStats s;
    s.images = manifest.records.size();
    for (const auto& c : candidates) {
        s.crop_counts[c] = 0;
    }
    const auto bins = common_ratios();
    double total = 0.0;
    for (const auto& r : manifest.records) {
        for (const auto& [alpha, box] : r.crops) {
            ++s.crop_counts[alpha];
        }
        ++s.original_ratio_histogram[closest_aspect(r.dims, bins).ratio];
        const double err = closest_aspect(r.dims, candidates).abs_error;
        s.closest_ratio_error.push_back(err);
        total += err;
    }
    s.mean_closest_ratio_error = total / static_cast<double>(s.images);
    return s;
}

AspectFreeManifest convert_fcdb(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) {
        throw std::runtime_error("cannot read " + json_path.string());
    }
    const auto doc = ordered_json::parse(in);
    AspectFreeManifest m;
    m.base_dir = json_path.parent_path();
    std::size_t index = 0;
    for (const auto& e : doc) {
        ++index;
        const std::string image = e.at("image").get<std::string>();
        try {
            const ImageDims dims(e.at("width").get<int>(), e.at("height").get<int>());
            const auto c = e.at("crop").get<std::vector<double>>();
            if (c.size() != 4) {
                throw RecordError("crop: expected [x, y, w, h]");
            }
            const BoxN b{c[0] / dims.width_px, c[1] / dims.height_px, (c[0] + c[2]) / dims.width_px,
                         (c[1] + c[3]) / dims.height_px, Frame::Image};
            if (!b.valid()) {
                throw RecordError("crop: box outside the image or empty");
            }
            m.records.push_back({std::filesystem::path(image).stem().string(), image, dims, b});
        } catch (const std::exception& ex) {
            m.diagnostics.push_back({index, image, ex.what()});
        }
    }
    return m;
}

Manifest convert_thumbnail_csv(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) {
        throw std::runtime_error("cannot read " + csv_path.string());
    }
    Manifest m;
    m.base_dir = csv_path.parent_path();
    std::map<std::string, std::size_t> index_of;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) {
            f.push_back(cell);
        }
        const std::string image = f.empty() ? std::string{} : f[0];
        try {
            if (f.size() != 8) {
                throw RecordError("expected 8 comma-separated fields");
            }
            const ImageDims dims(std::stoi(f[1]), std::stoi(f[2]));
            const AspectRatio alpha = AspectRatio::parse(f[3]);
            const BoxN b{std::stod(f[4]) / dims.width_px, std::stod(f[5]) / dims.height_px,
                         std::stod(f[6]) / dims.width_px, std::stod(f[7]) / dims.height_px, Frame::Image};
            if (!b.valid()) {
                throw RecordError("box outside the image or empty");
            }
            if (std::abs(pixel_ratio(b, dims) / alpha.value() - 1.0) > kManifestRatioTolerance) {
                throw RecordError("box does not match ratio " + f[3]);
            }
            auto [it, inserted] = index_of.emplace(image, m.records.size());
            if (inserted) {
                m.records.push_back({std::filesystem::path(image).stem().string(), image, dims, {}});
            }
            m.records[it->second].crops[alpha] = b;
        } catch (const std::exception& ex) {
            m.diagnostics.push_back({lineno, image, ex.what()});
        }
    }
    return m;
}

void SyntheticSpec::validate() const {
    if (count < 1) {
        throw std::invalid_argument("synthetic count must be positive");
    }
    if (min_side < 8 || max_side < min_side) {
        throw std::invalid_argument("synthetic side range must satisfy 8 <= min <= max");
    }
    if (!(subject_area_min > 0.0 && subject_area_min <= subject_area_max && subject_area_max <= 1.0)) {
        throw std::invalid_argument("subject area fractions must satisfy 0 < min <= max <= 1");
    }
    if (!(margin >= 1.0)) {
        throw std::invalid_argument("oracle margin must be >= 1");
    }
    if (!aspect_free && ratios.empty()) {
        throw std::invalid_argument("synthetic corpus needs at least one ratio");
    }
}

SyntheticScene sample_scene(const SyntheticSpec& spec, std::mt19937_64& rng) {
    SyntheticScene s;
    const int w = static_cast<int>(rnd::uniform_int(rng, spec.min_side, spec.max_side));
    const int h = static_cast<int>(rnd::uniform_int(rng, spec.min_side, spec.max_side));
    s.dims = ImageDims(w, h);

    const double area = rnd::uniform(rng, spec.subject_area_min, spec.subject_area_max) * w * h;
    const double shape = std::exp(rnd::uniform(rng, std::log(0.5), std::log(2.0)));
    const int sw = std::clamp(static_cast<int>(std::lround(std::sqrt(area * shape))), 1, w);
    const int sh = std::clamp(static_cast<int>(std::lround(area / sw)), 1, h);
    s.subject = PixelRect{static_cast<int>(rnd::uniform_int(rng, 0, w - sw)),
                          static_cast<int>(rnd::uniform_int(rng, 0, h - sh)), sw, sh};

    for (auto& c : s.background) {
        c = quantize(rnd::uniform01(rng));
    }
    // Resample until some channel differs clearly from the background.
    for (;;) {
        for (auto& c : s.foreground) {
            c = quantize(rnd::uniform01(rng));
        }
        float diff = 0.0f;
        for (int i = 0; i < 3; ++i) {
            diff = std::max(diff, std::abs(s.foreground[i] - s.background[i]));
        }
        if (diff >= 0.35f) {
            break;
        }
    }
    return s;
}

Image render_scene(const SyntheticScene& scene) {
    Image img(scene.dims.width_px, scene.dims.height_px);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const bool inside = x >= scene.subject.x && x < scene.subject.x + scene.subject.w && y >= scene.subject.y &&
                                y < scene.subject.y + scene.subject.h;
            const auto& col = inside ? scene.foreground : scene.background;
            for (int c = 0; c < 3; ++c) {
                img.at(x, y, c) = col[c];
            }
        }
    }
    return img;
}

std::optional<BoxN> oracle_crop(const PixelRect& subject, const ImageDims& dims, const AspectRatio& alpha,
                                double margin) {
    const double a = alpha.value();
    double w = std::max<double>(subject.w, subject.h * a);
    double h = w / a;
    w *= margin;
    h *= margin;
    const double W = dims.width_px;
    const double H = dims.height_px;
    const double cx = (subject.x + 0.5 * subject.w) / W;
    const double cy = (subject.y + 0.5 * subject.h) / H;
    const BoxN raw = box_from_center(cx, cy, w / W, h / H, Frame::Image);
    const BoxN clipped = clip_to_image(raw, alpha, dims);
    constexpr double eps = 1e-12;
    const bool contains = clipped.x1 <= subject.x / W + eps && clipped.y1 <= subject.y / H + eps &&
                          clipped.x2 >= (subject.x + subject.w) / W - eps &&
                          clipped.y2 >= (subject.y + subject.h) / H - eps;
    if (!contains) {
        return std::nullopt;
    }
    return clipped;
}

BoxN oracle_free_crop(const PixelRect& subject, const ImageDims& dims, double margin) {
    const double W = dims.width_px;
    const double H = dims.height_px;
    const BoxN raw = box_from_center((subject.x + 0.5 * subject.w) / W, (subject.y + 0.5 * subject.h) / H,
                                     subject.w * margin / W, subject.h * margin / H, Frame::Image);
    return BoxN{std::max(raw.x1, 0.0), std::max(raw.y1, 0.0), std::min(raw.x2, 1.0), std::min(raw.y2, 1.0),
                Frame::Image};
}

SyntheticCorpus gen_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
    spec.validate();
    std::filesystem::create_directories(out_dir / "images");
    std::mt19937_64 rng(rnd::splitmix64(spec.seed));
    SyntheticCorpus corpus;
    std::vector<ManifestRecord> records;
    std::vector<AspectFreeRecord> free_records;
    const int digits = std::max<int>(6, static_cast<int>(std::to_string(spec.count).size()));
    for (int i = 0; i < spec.count; ++i) {
        std::string num = std::to_string(i);
        num.insert(0, static_cast<std::size_t>(digits) - num.size(), '0');
        const std::string id = "syn-" + num;
        const std::filesystem::path rel = std::filesystem::path("images") / (id + ".png");

        SyntheticScene scene = sample_scene(spec, rng);
        write_image(render_scene(scene), out_dir / rel);
        if (spec.aspect_free) {
            free_records.push_back({id, rel, scene.dims, oracle_free_crop(scene.subject, scene.dims, spec.margin)});
        } else {
            ManifestRecord r{id, rel, scene.dims, {}};
            for (const auto& alpha : spec.ratios) {
                if (auto box = oracle_crop(scene.subject, scene.dims, alpha, spec.margin)) {
                    r.crops.emplace(alpha, *box);
                }
            }
            records.push_back(std::move(r));
        }
        corpus.scenes.push_back(scene);
    }
    corpus.manifest_path = out_dir / "manifest.jsonl";
    if (spec.aspect_free) {
        write_manifest(corpus.manifest_path, std::move(free_records));
    } else {
        write_manifest(corpus.manifest_path, std::move(records));
    }
    return corpus;
}

}  // namespace aspectcrop
