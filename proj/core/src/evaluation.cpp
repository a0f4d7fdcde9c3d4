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

#include "aspectcrop/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aspectcrop/parallel.hpp"

namespace aspectcrop {

namespace {

using nlohmann::ordered_json;

/// Shrinks `b` about its center until its pixel ratio is exactly alpha.
BoxN snap_to_ratio(const BoxN& b, const AspectRatio& alpha, const ImageDims& dims) {
    const double r = pixel_ratio(b, dims);
    if (std::abs(r / alpha.value() - 1.0) <= 1e-9) {
        return b;
    }
    double w = b.width();
    double h = b.height();
    if (r > alpha.value()) {
        w *= alpha.value() / r;
    } else {
        h *= r / alpha.value();
    }
    return box_from_center(b.cx(), b.cy(), w, h, b.frame);
}

struct Sample {
    AspectRatio ratio;
    double iou;
    double bde;
    double ratio_error;
    bool synthesized;
};

struct RecordOutcome {
    std::string id;
    std::vector<Sample> samples;
    std::optional<std::string> error;
};

RecordOutcome evaluate_record(const Predictor& predictor, const Manifest& manifest, const ManifestRecord& rec,
                              UnseenPolicy policy) {
    RecordOutcome out{rec.id, {}, std::nullopt};
    const auto native = predictor.native_ratios(rec);
    auto is_native = [&](const AspectRatio& a) {
        return !native || std::find(native->begin(), native->end(), a) != native->end();
    };

    std::vector<AspectRatio> direct;
    std::vector<std::pair<AspectRatio, AspectRatio>> derived;  // target, source
    for (const auto& [alpha, gt] : rec.crops) {
        if (is_native(alpha)) {
            direct.push_back(alpha);
        } else if (policy == UnseenPolicy::Synthesize && native && !native->empty()) {
            derived.emplace_back(alpha, closest_aspect(alpha.value(), *native).ratio);
        }
    }
    std::vector<AspectRatio> needed = direct;
    for (const auto& [target, source] : derived) {
        if (std::find(needed.begin(), needed.end(), source) == needed.end()) {
            needed.push_back(source);
        }
    }
    if (needed.empty()) {
        return out;
    }
    try {
        const BoxesByRatio pred = predictor.predict(rec, manifest.resolve(rec), needed);
        auto fetch = [&](const AspectRatio& a) -> const BoxN& {
            const auto it = pred.find(a);
            if (it == pred.end()) {
                throw std::runtime_error("predictor returned no box for " + a.to_string());
            }
            return it->second;
        };
        auto score = [&](const AspectRatio& alpha, const BoxN& box, bool synthesized) {
            const BoxN& gt = rec.crops.at(alpha);
            out.samples.push_back({alpha, iou(box, gt), bde(box, gt),
                                   std::abs(pixel_ratio(box, rec.dims) / alpha.value() - 1.0), synthesized});
        };
        for (const auto& alpha : direct) {
            score(alpha, fetch(alpha), false);
        }
        for (const auto& [target, source] : derived) {
            const BoxN src = snap_to_ratio(fetch(source), source, rec.dims);
            score(target, adjust_to_aspect(src, source, target, rec.dims), true);
        }
    } catch (const std::exception& e) {
        out.samples.clear();
        out.error = e.what();
    }
    return out;
}

Aggregate aggregate(const std::map<AspectRatio, RatioMetrics>& per_ratio,
                    const std::optional<std::vector<AspectRatio>>& only) {
    Aggregate a;
    std::size_t ratios = 0;
    for (const auto& [alpha, m] : per_ratio) {
        if (only && std::find(only->begin(), only->end(), alpha) == only->end()) {
            continue;
        }
        if (m.count == 0) {
            continue;
        }
        const auto c = static_cast<double>(m.count);
        a.count += m.count;
        a.mean_iou += m.mean_iou * c;
        a.mean_bde += m.mean_bde * c;
        a.mean_ratio_error += m.mean_ratio_error * c;
        a.ratio_weighted_iou += m.mean_iou;
        a.ratio_weighted_bde += m.mean_bde;
        ++ratios;
    }
    if (a.count) {
        a.mean_iou /= static_cast<double>(a.count);
        a.mean_bde /= static_cast<double>(a.count);
        a.mean_ratio_error /= static_cast<double>(a.count);
        a.ratio_weighted_iou /= static_cast<double>(ratios);
        a.ratio_weighted_bde /= static_cast<double>(ratios);
    }
    return a;
}

ordered_json aggregate_json(const Aggregate& a) {
    return {{"count", a.count},
            {"mean_iou", a.mean_iou},
            {"mean_bde", a.mean_bde},
            {"ratio_weighted_iou", a.ratio_weighted_iou},
            {"ratio_weighted_bde", a.ratio_weighted_bde},
            {"mean_ratio_error", a.mean_ratio_error}};
}

std::string ratio_file_tag(const AspectRatio& a) { return std::to_string(a.num()) + "x" + std::to_string(a.den()); }

}  // namespace

void BaselineConfig::validate() const {
    if (!(scale > 0.0 && scale <= 1.0)) {
        throw std::invalid_argument("baseline scale must lie in (0, 1]");
    }
}

BoxN baseline_predict(const BaselineConfig& cfg, const ImageDims& dims, const AspectRatio& alpha) {
    cfg.validate();
    double w = 1.0;
    double h = 1.0;
    if (dims.ratio() >= alpha.value()) {
        w = alpha.value() / dims.ratio();
    } else {
        h = dims.ratio() / alpha.value();
    }
    return box_from_center(0.5, 0.5, w * cfg.scale, h * cfg.scale, Frame::Image);
}

BaselinePredictor::BaselinePredictor(BaselineConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::string BaselinePredictor::id() const {
    std::ostringstream s;
    s << "baseline-" << cfg_.scale;
    return s.str();
}

BoxesByRatio BaselinePredictor::predict(const ManifestRecord& record, const std::filesystem::path&,
                                        std::span<const AspectRatio> ratios) const {
    BoxesByRatio out;
    for (const auto& a : ratios) {
        out.emplace(a, baseline_predict(cfg_, record.dims, a));
    }
    return out;
}

ModelPredictor::ModelPredictor(std::shared_ptr<const CropModel> model, std::string id)
    : model_(std::move(model)), id_(std::move(id)) {}

std::optional<std::vector<AspectRatio>> ModelPredictor::native_ratios(const ManifestRecord&) const {
    std::vector<AspectRatio> out;
    for (const auto& h : model_->heads()) {
        if (h.spec().alpha) {
            out.push_back(*h.spec().alpha);
        }
    }
    return out;
}

BoxesByRatio ModelPredictor::predict(const ManifestRecord& record, const std::filesystem::path& image_path,
                                     std::span<const AspectRatio> ratios) const {
    const Image img = read_image(image_path);
    if (img.width() != record.dims.width_px || img.height() != record.dims.height_px) {
        throw std::runtime_error("decoded size of " + image_path.string() + " differs from the manifest");
    }
    BoxesByRatio out;
    for (const auto& p : aspectcrop::predict(*model_, img, ratios)) {
        out.emplace(p.ratio, p.box);
    }
    return out;
}

FilePredictor::FilePredictor(const std::filesystem::path& path) : id_("file:" + path.string()) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read predictions " + path.string());
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto j = ordered_json::parse(line);
            BoxesByRatio boxes;
            for (const auto& [key, v] : j.at("boxes").items()) {
                const auto c = v.get<std::vector<double>>();
                if (c.size() != 4) {
                    throw std::runtime_error("box for " + key + " needs 4 values");
                }
                const BoxN b{c[0], c[1], c[2], c[3], Frame::Image};
                if (!b.valid()) {
                    throw std::runtime_error("box for " + key + " is not a valid normalized box");
                }
                boxes.emplace(AspectRatio::parse(key), b);
            }
            boxes_[j.at("id").get<std::string>()] = std::move(boxes);
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

std::optional<std::vector<AspectRatio>> FilePredictor::native_ratios(const ManifestRecord& record) const {
    const auto it = boxes_.find(record.id);
    if (it == boxes_.end()) {
        // Unknown ids reach predict(), which reports them.
        return std::nullopt;
    }
    std::vector<AspectRatio> out;
    for (const auto& [a, b] : it->second) {
        out.push_back(a);
    }
    return out;
}

BoxesByRatio FilePredictor::predict(const ManifestRecord& record, const std::filesystem::path&,
                                    std::span<const AspectRatio> ratios) const {
    const auto it = boxes_.find(record.id);
    if (it == boxes_.end()) {
        throw std::runtime_error("no predictions for record " + record.id);
    }
    BoxesByRatio out;
    for (const auto& a : ratios) {
        const auto b = it->second.find(a);
        if (b == it->second.end()) {
            throw std::runtime_error("no " + a.to_string() + " prediction for record " + record.id);
        }
        out.emplace(a, b->second);
    }
    return out;
}

std::optional<std::vector<AspectRatio>> GroundTruthPredictor::native_ratios(const ManifestRecord& record) const {
    std::vector<AspectRatio> out;
    for (const auto& [a, b] : record.crops) {
        out.push_back(a);
    }
    return out;
}

BoxesByRatio GroundTruthPredictor::predict(const ManifestRecord& record, const std::filesystem::path&,
                                           std::span<const AspectRatio> ratios) const {
    BoxesByRatio out;
    for (const auto& a : ratios) {
        out.emplace(a, record.crops.at(a));
    }
    return out;
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, BoxesByRatio>>& predictions) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    for (const auto& [id, boxes] : predictions) {
        ordered_json j;
        j["id"] = id;
        j["boxes"] = ordered_json::object();
        for (const auto& [a, b] : boxes) {
            j["boxes"][a.to_string()] = {b.x1, b.y1, b.x2, b.y2};
        }
        out << j.dump() << '\n';
    }
    if (!out) {
        throw std::runtime_error("cannot write predictions " + path.string());
    }
}

MetricsReport evaluate(const Predictor& predictor, const Manifest& manifest, const EvalOptions& options) {
    std::vector<RecordOutcome> outcomes(manifest.records.size());
    parallel_for(manifest.records.size(), options.workers, [&](std::size_t i) {
        outcomes[i] = evaluate_record(predictor, manifest, manifest.records[i], options.unseen);
    });
    // Reduce in id order so the result does not depend on record order.
    std::sort(outcomes.begin(), outcomes.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    MetricsReport report;
    report.predictor = predictor.id();
    report.filter = options.ratio_filter;
    std::map<AspectRatio, std::array<double, 3>> sums;
    for (const auto& o : outcomes) {
        if (o.error) {
            report.failures.push_back({0, o.id, *o.error});
            continue;
        }
        ++report.records;
        for (const auto& s : o.samples) {
            auto& m = report.per_ratio[s.ratio];
            auto& acc = sums[s.ratio];
            ++m.count;
            m.synthesized += s.synthesized ? 1 : 0;
            acc[0] += s.iou;
            acc[1] += s.bde;
            acc[2] += s.ratio_error;
        }
    }
    for (auto& [alpha, m] : report.per_ratio) {
        const auto& acc = sums[alpha];
        const auto c = static_cast<double>(m.count);
        m.mean_iou = acc[0] / c;
        m.mean_bde = acc[1] / c;
        m.mean_ratio_error = acc[2] / c;
    }
    report.overall = aggregate(report.per_ratio, std::nullopt);
    if (options.ratio_filter) {
        report.filtered = aggregate(report.per_ratio, options.ratio_filter);
    }
    return report;
}

std::string format_report(const MetricsReport& r) {
    std::ostringstream s;
    s << "predictor: " << r.predictor << "\n"
      << "records:   " << r.records << " evaluated, " << r.failures.size() << " failed\n\n";
    s << std::left << std::setw(8) << "ratio" << std::right << std::setw(8) << "crops" << std::setw(8) << "synth"
      << std::setw(10) << "IoU" << std::setw(10) << "BDE" << std::setw(12) << "ratio err" << "\n";
    s << std::fixed;
    for (const auto& [a, m] : r.per_ratio) {
        s << std::left << std::setw(8) << a.to_string() << std::right << std::setw(8) << m.count << std::setw(8)
          << m.synthesized << std::setw(10) << std::setprecision(4) << m.mean_iou << std::setw(10) << m.mean_bde
          << std::setw(12) << std::setprecision(2) << std::scientific << m.mean_ratio_error << std::fixed << "\n";
    }
    auto line = [&](const char* name, const Aggregate& a) {
        s << std::left << std::setw(8) << name << std::right << std::setw(8) << a.count << std::setw(8) << ""
          << std::setw(10) << std::setprecision(4) << a.mean_iou << std::setw(10) << a.mean_bde << "\n";
    };
    line("overall", r.overall);
    if (r.filtered) {
        line("filtered", *r.filtered);
    }
    s << "(overall is crop-weighted; ratio-weighted IoU " << std::setprecision(4) << r.overall.ratio_weighted_iou
      << ", BDE " << r.overall.ratio_weighted_bde << ")\n";
    for (const auto& f : r.failures) {
        s << "failed " << f.id << ": " << f.message << "\n";
    }
    return s.str();
}

std::string report_to_json(const MetricsReport& r) {
    ordered_json j;
    j["predictor"] = r.predictor;
    j["records"] = r.records;
    j["per_ratio"] = ordered_json::object();
    for (const auto& [a, m] : r.per_ratio) {
        j["per_ratio"][a.to_string()] = {{"count", m.count},
                                         {"synthesized", m.synthesized},
                                         {"mean_iou", m.mean_iou},
                                         {"mean_bde", m.mean_bde},
                                         {"mean_ratio_error", m.mean_ratio_error}};
    }
    j["overall"] = aggregate_json(r.overall);
    if (r.filtered) {
        ordered_json f = aggregate_json(*r.filtered);
        f["ratios"] = ordered_json::array();
        for (const auto& a : *r.filter) {
            f["ratios"].push_back(a.to_string());
        }
        j["filtered"] = f;
    }
    j["failures"] = ordered_json::array();
    for (const auto& f : r.failures) {
        j["failures"].push_back({{"id", f.id}, {"error", f.message}});
    }
    return j.dump(2);
}

BenchmarkReport benchmark(const CropModel& model, std::span<const Letterboxed> canvases,
                          const BenchmarkOptions& options) {
    if (canvases.empty()) {
        throw std::invalid_argument("benchmark: empty image source");
    }
    if (options.batch_size < 1 || options.iterations < 1 || options.warmup < 0) {
        throw std::invalid_argument("benchmark: batch size and iterations must be positive");
    }
    std::vector<Matrix> inputs;
    for (const auto& c : canvases) {
        inputs.push_back(model.to_input(c.canvas));
    }
    const auto bs = static_cast<std::size_t>(options.batch_size);
    std::size_t cursor = 0;
    volatile double sink = 0.0;
    auto run_batch = [&] {
        std::vector<Matrix> batch;
        std::vector<const CanvasMapping*> maps;
        for (std::size_t k = 0; k < bs; ++k) {
            batch.push_back(inputs[cursor]);
            maps.push_back(&canvases[cursor].mapping);
            cursor = (cursor + 1) % inputs.size();
        }
        const ForwardResult fwd = forward_inputs(model, batch);
        double acc = 0.0;
        for (std::size_t h = 0; h < model.heads().size(); ++h) {
            for (std::size_t k = 0; k < bs; ++k) {
                acc += head_output_to_image_box(model.heads()[h], fwd.head_outputs[h].col(static_cast<Eigen::Index>(k)),
                                                *maps[k])
                           .x1;
            }
        }
        sink = sink + acc;
    };
    for (int i = 0; i < options.warmup; ++i) {
        run_batch();
    }
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < options.iterations; ++i) {
        run_batch();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    BenchmarkReport r;
    r.heads = model.heads().size();
    r.batch_size = options.batch_size;
    r.warmup = options.warmup;
    r.iterations = options.iterations;
    r.images_timed = bs * static_cast<std::size_t>(options.iterations);
    r.seconds = secs;
    r.images_per_sec = static_cast<double>(r.images_timed) / secs;
    r.crops_per_sec = r.images_per_sec * static_cast<double>(r.heads);
    return r;
}

std::string benchmark_to_json(const BenchmarkReport& r) {
    ordered_json j{{"heads", r.heads},
                   {"batch_size", r.batch_size},
                   {"warmup_iterations", r.warmup},
                   {"timed_iterations", r.iterations},
                   {"images_timed", r.images_timed},
                   {"seconds", r.seconds},
                   {"images_per_sec", r.images_per_sec},
                   {"crops_per_sec", r.crops_per_sec}};
    return j.dump(2);
}

PixelRect pixel_rect(const BoxN& box, const ImageDims& dims) {
    const int x0 = std::clamp(static_cast<int>(std::floor(box.x1 * dims.width_px)), 0, dims.width_px - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(box.y1 * dims.height_px)), 0, dims.height_px - 1);
    const int x1 = std::clamp(static_cast<int>(std::ceil(box.x2 * dims.width_px)), x0 + 1, dims.width_px);
    const int y1 = std::clamp(static_cast<int>(std::ceil(box.y2 * dims.height_px)), y0 + 1, dims.height_px);
    return PixelRect{x0, y0, x1 - x0, y1 - y0};
}

Image crop_image(const Image& image, const BoxN& box) {
    if (box.frame != Frame::Image) {
        throw std::invalid_argument("crop_image: box must be in the image frame");
    }
    const PixelRect r = pixel_rect(box, image.dims());
    Image out(r.w, r.h);
    for (int y = 0; y < r.h; ++y) {
        for (int x = 0; x < r.w; ++x) {
            for (int c = 0; c < Image::kChannels; ++c) {
                out.at(x, y, c) = image.at(r.x + x, r.y + y, c);
            }
        }
    }
    return out;
}

void draw_thirds_grid(Image& image, std::array<float, 3> color) {
    for (int k = 1; k <= 2; ++k) {
        const int gx = std::min(image.width() - 1, image.width() * k / 3);
        const int gy = std::min(image.height() - 1, image.height() * k / 3);
        for (int y = 0; y < image.height(); ++y) {
            for (int c = 0; c < 3; ++c) {
                image.at(gx, y, c) = color[static_cast<std::size_t>(c)];
            }
        }
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                image.at(x, gy, c) = color[static_cast<std::size_t>(c)];
            }
        }
    }
}

std::vector<std::filesystem::path> render(const Image& image, const BoxesByRatio& boxes, bool with_thirds_grid,
                                          const std::filesystem::path& out_dir, const std::string& stem) {
    std::vector<std::filesystem::path> written;
    for (const auto& [alpha, box] : boxes) {
        Image crop = crop_image(image, box);
        if (with_thirds_grid) {
            draw_thirds_grid(crop);
        }
        const auto path = out_dir / (stem + "_" + ratio_file_tag(alpha) + ".png");
        write_image(crop, path);
        written.push_back(path);
    }
    return written;
}

}  // namespace aspectcrop
