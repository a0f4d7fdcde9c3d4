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

// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aspectcrop/datasets.hpp"
#include "aspectcrop/evaluation.hpp"
#include "aspectcrop/geometry.hpp"
#include "aspectcrop/model.hpp"
#include "aspectcrop/preprocess.hpp"
#include "aspectcrop/random.hpp"
#include "aspectcrop/training.hpp"

namespace fs = std::filesystem;
using namespace aspectcrop;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int number;
    std::string name;
    /// Hard wall-clock limit in seconds; 0 for none.
    double limit_s;
    /// Advisory wall-clock target in seconds; 0 for none.
    double target_s;
    std::function<Outcome()> run;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Compares every regular file under two directories byte by byte.
bool same_tree(const fs::path& a, const fs::path& b, std::size_t& files) {
    std::set<fs::path> names;
    for (const auto& root : {a, b}) {
        for (const auto& e : fs::recursive_directory_iterator(root)) {
            if (e.is_regular_file()) names.insert(fs::relative(e.path(), root));
        }
    }
    files = names.size();
    for (const auto& n : names) {
        if (!fs::exists(a / n) || !fs::exists(b / n) || read_file(a / n) != read_file(b / n)) return false;
    }
    return true;
}

std::vector<AspectRatio> desk_ratios() { return {AspectRatio(16, 9), AspectRatio(1, 1), AspectRatio(3, 4)}; }

// 1 -----------------------------------------------------------------------

Outcome geometry_oracle() {
    constexpr int N = 1000;
    std::mt19937_64 rng(20261016);
    auto grid_box = [&](int lo_x, int hi_x, int lo_y, int hi_y) {
        int x1 = static_cast<int>(rnd::uniform_int(rng, lo_x, hi_x - 1));
        int x2 = static_cast<int>(rnd::uniform_int(rng, x1 + 1, hi_x));
        int y1 = static_cast<int>(rnd::uniform_int(rng, lo_y, hi_y - 1));
        int y2 = static_cast<int>(rnd::uniform_int(rng, y1 + 1, hi_y));
        return std::array<int, 4>{x1, y1, x2, y2};
    };
    std::vector<std::uint8_t> ma(N * N);
    std::vector<std::uint8_t> mb(N * N);
    auto fill = [&](std::vector<std::uint8_t>& m, const std::array<int, 4>& r) {
        std::fill(m.begin(), m.end(), 0);
        for (int y = r[1]; y < r[3]; ++y) std::fill(m.begin() + y * N + r[0], m.begin() + y * N + r[2], 1);
    };
    // Edges recovered from the raster alone.
    auto edges = [&](const std::vector<std::uint8_t>& m) {
        int x1 = N, y1 = N, x2 = 0, y2 = 0;
        for (int y = 0; y < N; ++y) {
            for (int x = 0; x < N; ++x) {
                if (m[static_cast<std::size_t>(y * N + x)]) {
                    x1 = std::min(x1, x);
                    y1 = std::min(y1, y);
                    x2 = std::max(x2, x + 1);
                    y2 = std::max(y2, y + 1);
                }
            }
        }
        return std::array<double, 4>{x1 / double(N), y1 / double(N), x2 / double(N), y2 / double(N)};
    };
    auto to_box = [](const std::array<int, 4>& r) {
        return BoxN{r[0] / double(N), r[1] / double(N), r[2] / double(N), r[3] / double(N)};
    };

    double max_iou_err = 0.0;
    double max_bde_err = 0.0;
    int disjoint = 0;
    for (int i = 0; i < 1000; ++i) {
        std::array<int, 4> a = grid_box(0, N, 0, N);
        std::array<int, 4> b;
        switch (i % 4) {
            case 0:  // nested
                b = grid_box(a[0], a[2], a[1], a[3]);
                break;
            case 1:  // identical
                b = a;
                break;
            default:
                b = grid_box(0, N, 0, N);
        }
        fill(ma, a);
        fill(mb, b);
        std::size_t inter = 0;
        std::size_t uni = 0;
        for (std::size_t k = 0; k < ma.size(); ++k) {
            inter += ma[k] & mb[k];
            uni += ma[k] | mb[k];
        }
        if (inter == 0) ++disjoint;
        const double iou_r = static_cast<double>(inter) / static_cast<double>(uni);
        const auto ea = edges(ma);
        const auto eb = edges(mb);
        double bde_r = 0.0;
        for (int k = 0; k < 4; ++k) bde_r += std::abs(ea[static_cast<std::size_t>(k)] - eb[static_cast<std::size_t>(k)]);
        bde_r /= 4.0;
        max_iou_err = std::max(max_iou_err, std::abs(iou(to_box(a), to_box(b)) - iou_r));
        max_bde_err = std::max(max_bde_err, std::abs(bde(to_box(a), to_box(b)) - bde_r));
    }
    const bool ok = max_iou_err <= 2e-3 && max_bde_err <= 2e-3;
    return {ok, "1000 pairs (" + std::to_string(disjoint) + " disjoint), max |dIoU| " + fmt(max_iou_err) +
                    ", max |dBDE| " + fmt(max_bde_err) + " (tol 2e-3)"};
}

// 2 -----------------------------------------------------------------------

Outcome enforcement() {
    const std::vector<AspectRatio> ratios{AspectRatio(16, 9), AspectRatio(4, 3), AspectRatio(2, 1),
                                          AspectRatio(3, 4),  AspectRatio(1, 1), AspectRatio(21, 9),
                                          AspectRatio(9, 16), AspectRatio(9, 21)};
    std::mt19937_64 rng(7);
    double worst = 0.0;
    int not_idempotent = 0;
    int outside = 0;
    for (int i = 0; i < 10000; ++i) {
        const AspectRatio& a = ratios[static_cast<std::size_t>(rnd::uniform_int(rng, 0, 7))];
        const ImageDims dims(static_cast<int>(rnd::uniform_int(rng, 1, 4000)),
                             static_cast<int>(rnd::uniform_int(rng, 1, 4000)));
        EnforcedBoxParams p{rnd::uniform01(rng), rnd::uniform01(rng), rnd::uniform01(rng), orientation_for(a)};
        // Sigmoid extremes: centers on the border and vanishing sizes.
        if (i % 10 == 0) p.x_c = static_cast<double>(rnd::uniform_int(rng, 0, 1));
        if (i % 10 == 1) p.y_c = static_cast<double>(rnd::uniform_int(rng, 0, 1));
        if (i % 10 == 2) p.size = rnd::uniform(rng, 0.0, 1e-4);
        const BoxN b = enforce_transform(p, a, dims);
        worst = std::max(worst, std::abs(pixel_ratio(b, dims) / a.value() - 1.0));
        if (!(b.x1 >= 0.0 && b.y1 >= 0.0 && b.x2 <= 1.0 && b.y2 <= 1.0 && b.valid())) ++outside;
        if (!(clip_to_image(b, a, dims) == b)) ++not_idempotent;
    }
    const bool ok = worst <= 1e-6 && not_idempotent == 0 && outside == 0;
    return {ok, "10000 triples over 8 ratios, max relative ratio error " + fmt(worst) + " (tol 1e-6), " +
                    std::to_string(not_idempotent) + " non-idempotent clips, " + std::to_string(outside) +
                    " boxes outside [0,1]^2"};
}

// 3 -----------------------------------------------------------------------

/// Samples built in memory from synthetic scenes; records without any crop are dropped.
std::vector<TrainingSample> scene_samples(int count, std::uint64_t seed, const std::vector<AspectRatio>& ratios,
                                          int side) {
    SyntheticSpec spec;
    spec.seed = seed;
    spec.ratios = ratios;
    spec.min_side = 48;
    spec.max_side = 96;
    std::mt19937_64 rng(seed);
    std::vector<TrainingSample> out;
    for (int i = 0; static_cast<int>(out.size()) < count; ++i) {
        const SyntheticScene scene = sample_scene(spec, rng);
        BoxesByRatio boxes;
        for (const auto& a : ratios) {
            if (auto b = oracle_crop(scene.subject, scene.dims, a, spec.margin)) boxes.emplace(a, *b);
        }
        if (boxes.size() == ratios.size()) {
            out.push_back(make_sample("s" + std::to_string(i), render_scene(scene), boxes, std::nullopt, side));
        }
    }
    return out;
}

Outcome gradient_check() {
    BackboneSpec bb;
    bb.channels = {2, 3};
    bb.canvas_side = 8;
    bb.pooling = Pooling::Flatten;
    std::vector<HeadSpec> heads{HeadSpec::enforced(AspectRatio(16, 9)), HeadSpec::enforced(AspectRatio(3, 4)),
                                HeadSpec::enforced(AspectRatio(1, 1))};
    for (auto& h : heads) h.hidden = {4};
    CropModel model(bb, heads, 31);
    const std::size_t count = model.parameter_count();
    if (count > 500) return {false, "miniature model has " + std::to_string(count) + " parameters"};
    const auto samples = scene_samples(2, 3, {AspectRatio(16, 9), AspectRatio(3, 4), AspectRatio(1, 1)}, 8);

    loss_and_gradients(model, samples, 1.0);
    std::vector<Matrix> analytic;
    for (const auto* p : model.parameters()) analytic.push_back(p->grad);
    const double h = 1e-4;
    double worst = 0.0;
    std::string worst_name;
    auto params = model.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
        for (Eigen::Index i = 0; i < params[k]->value.size(); ++i) {
            double& w = params[k]->value.data()[i];
            const double saved = w;
            w = saved + h;
            const double up = loss_and_gradients(model, samples, 1.0);
            w = saved - h;
            const double down = loss_and_gradients(model, samples, 1.0);
            w = saved;
            const double fd = (up - down) / (2 * h);
            const double an = analytic[k].data()[i];
            // Relative error with a floor so exactly-zero gradients compare absolutely.
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
            if (rel > worst) {
                worst = rel;
                worst_name = params[k]->name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return {worst <= 1e-3, std::to_string(count) + " parameters, max relative error " + fmt(worst) + " at " +
                               worst_name + " (tol 1e-3)"};
}

// 4 and 5 -----------------------------------------------------------------

struct DeskRun {
    fs::path root;
    Manifest manifest;
    Manifest test;
    std::vector<TrainingSample> train_set;
    std::vector<TrainingSample> val_set;
    std::optional<CropModel> model;
};

Manifest subset(const Manifest& m, const std::vector<ManifestRecord>& records) {
    return Manifest{m.base_dir, records, {}};
}

struct AspectAudit {
    std::size_t boxes = 0;
    std::size_t violations = 0;
    double mean_error = 0.0;
};

/// Relative pixel-ratio error of every test prediction for every annotated ratio.
AspectAudit audit_aspect(const CropModel& model, const Manifest& test) {
    AspectAudit a;
    for (const auto& r : test.records) {
        const Image img = read_image(test.resolve(r));
        std::vector<AspectRatio> ratios;
        for (const auto& [alpha, box] : r.crops) ratios.push_back(alpha);
        if (ratios.empty()) continue;
        for (const auto& p : predict(model, img, ratios)) {
            const double err = std::abs(pixel_ratio(p.box, r.dims) / p.ratio.value() - 1.0);
            a.mean_error += err;
            a.violations += err > 1e-6 ? 1 : 0;
            ++a.boxes;
        }
    }
    if (a.boxes) a.mean_error /= static_cast<double>(a.boxes);
    return a;
}

Outcome desk_learning(DeskRun& run) {
    SyntheticSpec spec;
    spec.count = 2000;
    spec.seed = 1;
    spec.ratios = desk_ratios();
    const auto corpus = gen_synthetic(spec, run.root / "desk");
    run.manifest = load_manifest(corpus.manifest_path);
    const auto parts = split_dataset(run.manifest.records, SplitSpec{0.6, 0.2, 0.2, 1});
    run.test = subset(run.manifest, parts.test);

    BackboneSpec bb;
    std::vector<HeadSpec> heads;
    for (const auto& a : desk_ratios()) heads.push_back(HeadSpec::enforced(a));
    const CropModel model(bb, heads, 1);
    run.train_set = load_samples(subset(run.manifest, parts.train), bb.canvas_side).samples;
    run.val_set = load_samples(subset(run.manifest, parts.val), bb.canvas_side).samples;

    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 32;
    cfg.max_epochs = 40;
    cfg.early_stop_patience = 10;
    cfg.smooth_l1_beta = 0.02;
    cfg.seed = 1;
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult result = train(model, run.train_set, run.val_set, cfg, [&](const EpochRecord& r) {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cerr << "  epoch " << r.epoch << " val_loss " << fmt(r.val_loss) << " val_iou " << fmt(r.val_iou)
                  << " (" << fmt(s, 3) << " s)\n";
    });
    run.model = std::move(result.model);

    const ModelPredictor predictor(std::make_shared<const CropModel>(*run.model), "desk");
    const MetricsReport report = evaluate(predictor, run.test);
    const BaselinePredictor center(BaselineConfig{1.0});
    const MetricsReport base = evaluate(center, run.test);
    const AspectAudit audit = audit_aspect(*run.model, run.test);
    const bool ok = report.failures.empty() && report.overall.mean_iou >= 0.75 && report.overall.mean_bde <= 0.05 &&
                    audit.violations == 0 && audit.boxes > 0;
    return {ok, std::to_string(parts.train.size()) + "/" + std::to_string(parts.val.size()) + "/" +
                    std::to_string(parts.test.size()) + " split, best epoch " + std::to_string(result.best_epoch) +
                    ", test IoU " + fmt(report.overall.mean_iou) + " (>= 0.75), BDE " + fmt(report.overall.mean_bde) +
                    " (<= 0.05), " + std::to_string(audit.violations) + " aspect violations over " +
                    std::to_string(audit.boxes) + " boxes; center crop IoU " + fmt(base.overall.mean_iou)};
}

Outcome enforced_vs_free(DeskRun& run) {
    if (!run.model) return {false, "no trained desk model"};
    std::vector<HeadSpec> free_heads;
    for (const auto& a : desk_ratios()) free_heads.push_back(HeadSpec::non_enforced(a));
    const CropModel swapped = replace_heads(*run.model, free_heads, 2);
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.max_epochs = 8;
    cfg.early_stop_patience = 3;
    cfg.smooth_l1_beta = 0.02;
    cfg.seed = 2;
    cfg.freeze_backbone = true;
    const TrainResult tuned = train(swapped, run.train_set, run.val_set, cfg);
    const bool same_backbone = backbone_checksum(tuned.model) == backbone_checksum(*run.model);

    const AspectAudit enforced = audit_aspect(*run.model, run.test);
    const AspectAudit free = audit_aspect(tuned.model, run.test);
    const ModelPredictor fp(std::make_shared<const CropModel>(tuned.model), "free");
    const MetricsReport free_report = evaluate(fp, run.test);
    const bool ok = same_backbone && free.mean_error > 0.0 && enforced.violations == 0 && enforced.mean_error < 1e-9;
    return {ok, "shared backbone " + std::string(same_backbone ? "unchanged" : "CHANGED") +
                    "; non-enforced mean aspect error " + fmt(free.mean_error) + " (" +
                    std::to_string(free.violations) + "/" + std::to_string(free.boxes) +
                    " off-ratio, IoU " + fmt(free_report.overall.mean_iou) + "), enforced " + fmt(enforced.mean_error) +
                    " (" + std::to_string(enforced.violations) + " off-ratio)"};
}

// 6 -----------------------------------------------------------------------

Outcome baseline_trend(const fs::path& root) {
    SyntheticSpec spec;
    spec.count = 400;
    spec.seed = 6;
    spec.subject_area_min = 0.55;
    spec.subject_area_max = 0.9;
    const auto corpus = gen_synthetic(spec, root / "trend");
    const Manifest all = load_manifest(corpus.manifest_path);

    // Keep crops covering at least 85% of the largest box of their ratio.
    Manifest near = subset(all, {});
    std::size_t crops = 0;
    for (auto r : all.records) {
        BoxesByRatio keep;
        for (const auto& [a, b] : r.crops) {
            const BoxN full = baseline_predict(BaselineConfig{1.0}, r.dims, a);
            if (b.area() >= 0.85 * full.area()) keep.emplace(a, b);
        }
        if (keep.empty()) continue;
        crops += keep.size();
        r.crops = std::move(keep);
        near.records.push_back(std::move(r));
    }
    if (crops < 100) return {false, "near-maximal sub-corpus has only " + std::to_string(crops) + " crops"};
    std::vector<double> ious;
    std::string detail;
    for (double s : {0.8, 0.9, 1.0}) {
        const MetricsReport rep = evaluate(BaselinePredictor(BaselineConfig{s}), near);
        ious.push_back(rep.overall.mean_iou);
        detail += (detail.empty() ? "" : ", ") + std::string("s=") + fmt(s, 2) + " IoU " + fmt(rep.overall.mean_iou);
    }
    const bool ok = ious[0] <= ious[1] && ious[1] <= ious[2];
    return {ok, std::to_string(crops) + " near-maximal crops: " + detail};
}

// 7 -----------------------------------------------------------------------

Outcome synthesis() {
    const ImageDims dims(1000, 1000);
    // 700x350 px at 2:1 becomes 700x300 px at 21:9.
    const BoxN wide{0.15, 0.325, 0.85, 0.675};
    const BoxN w21 = adjust_to_aspect(wide, AspectRatio(2, 1), AspectRatio(21, 9), dims);
    // 300x400 px at 3:4 becomes 225x400 px at 9:16.
    const BoxN tall{0.35, 0.3, 0.65, 0.7};
    const BoxN t916 = adjust_to_aspect(tall, AspectRatio(3, 4), AspectRatio(9, 16), dims);
    auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
    const bool worked = near(w21.width() * 1000, 700) && near(w21.height() * 1000, 300) && near(w21.cx(), 0.5) &&
                        near(w21.cy(), 0.5) && near(t916.width() * 1000, 225) && near(t916.height() * 1000, 400) &&
                        near(t916.cx(), 0.5) && near(t916.cy(), 0.5);

    const std::vector<AspectRatio> ratios{AspectRatio(16, 9), AspectRatio(4, 3), AspectRatio(2, 1),
                                          AspectRatio(3, 4),  AspectRatio(1, 1), AspectRatio(21, 9),
                                          AspectRatio(9, 16), AspectRatio(9, 21)};
    std::mt19937_64 rng(77);
    double worst_ratio = 0.0;
    int escaped = 0;
    for (int i = 0; i < 5000; ++i) {
        const AspectRatio& src = ratios[static_cast<std::size_t>(rnd::uniform_int(rng, 0, 7))];
        const AspectRatio& dst = ratios[static_cast<std::size_t>(rnd::uniform_int(rng, 0, 7))];
        const ImageDims d(static_cast<int>(rnd::uniform_int(rng, 16, 3000)),
                          static_cast<int>(rnd::uniform_int(rng, 16, 3000)));
        const EnforcedBoxParams p{rnd::uniform01(rng), rnd::uniform01(rng), rnd::uniform(rng, 0.05, 1.0),
                                  orientation_for(src)};
        const BoxN b = enforce_transform(p, src, d);
        const BoxN t = adjust_to_aspect(b, src, dst, d);
        worst_ratio = std::max(worst_ratio, std::abs(pixel_ratio(t, d) / dst.value() - 1.0));
        const double eps = 1e-12;
        if (t.x1 < b.x1 - eps || t.y1 < b.y1 - eps || t.x2 > b.x2 + eps || t.y2 > b.y2 + eps) ++escaped;
    }
    const bool ok = worked && worst_ratio <= 1e-9 && escaped == 0;
    return {ok, std::string("worked examples ") + (worked ? "exact" : "WRONG") + " (2:1 700x300 -> 21:9 " +
                    fmt(w21.width() * 1000, 6) + "x" + fmt(w21.height() * 1000, 6) + ", 3:4 -> 9:16 " +
                    fmt(t916.width() * 1000, 6) + "x" + fmt(t916.height() * 1000, 6) +
                    "); 5000 random derivations, max ratio error " + fmt(worst_ratio) + ", " +
                    std::to_string(escaped) + " not contained"};
}

// 8 -----------------------------------------------------------------------

Outcome masking() {
    BackboneSpec bb;
    bb.channels = {4, 8};
    bb.canvas_side = 16;
    std::vector<HeadSpec> heads;
    for (const auto& a : desk_ratios()) {
        HeadSpec h = HeadSpec::enforced(a);
        h.hidden = {8};
        heads.push_back(h);
    }
    CropModel model(bb, heads, 8);
    // Records annotate 16:9 and 1:1 only.
    const auto samples = scene_samples(6, 8, {AspectRatio(16, 9), AspectRatio(1, 1)}, 16);
    const std::size_t missing = *model.head_index(AspectRatio(3, 4));

    for (auto* p : model.parameters()) p->grad.setConstant(1.0);
    loss_and_gradients(model, samples, 1.0);
    bool zero = true;
    for (const auto* p : model.heads()[missing].parameters()) zero = zero && p->grad.isZero(0.0);
    double other = 0.0;
    for (std::size_t i = 0; i < model.heads().size(); ++i) {
        if (i == missing) continue;
        for (const auto* p : model.heads()[i].parameters()) other += p->grad.cwiseAbs().sum();
    }

    // A full optimizer epoch must leave the head bit-identical.
    std::vector<Matrix> before;
    for (const auto* p : model.heads()[missing].parameters()) before.push_back(p->value);
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.max_epochs = 1;
    cfg.batch_size = 3;
    const TrainResult r = train(model, samples, samples, cfg);
    bool unchanged = true;
    std::size_t k = 0;
    for (const auto* p : r.model.heads()[missing].parameters()) unchanged = unchanged && p->value == before[k++];

    const bool ok = zero && other > 0.0 && unchanged;
    return {ok, std::string("3:4 head gradient ") + (zero ? "exactly zero" : "NONZERO") +
                    ", annotated heads |grad| sum " + fmt(other) + ", 3:4 head after one Adam epoch " +
                    (unchanged ? "bit-identical" : "CHANGED")};
}

// 9 -----------------------------------------------------------------------

std::vector<std::pair<double, double>> history_losses(const fs::path& jsonl) {
    std::vector<std::pair<double, double>> out;
    std::ifstream in(jsonl);
    std::string line;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        out.emplace_back(j.at("train_loss").get<double>(), j.at("val_loss").get<double>());
    }
    return out;
}

Outcome determinism(const fs::path& root, const std::string& cli) {
    std::string detail;
    bool ok = true;

    SyntheticSpec spec;
    spec.count = 120;
    spec.seed = 9;
    spec.ratios = desk_ratios();
    gen_synthetic(spec, root / "det-a");
    gen_synthetic(spec, root / "det-b");
    std::size_t files = 0;
    const bool corpora = same_tree(root / "det-a", root / "det-b", files);
    ok = ok && corpora;
    detail += "synth " + std::string(corpora ? "bitwise-identical" : "DIFFERENT") + " (" + std::to_string(files) +
              " files)";

    const Manifest m = load_manifest(root / "det-a" / "manifest.jsonl");
    const SplitSpec sp{0.6, 0.2, 0.2, 9};
    const auto s1 = split_dataset(m.records, sp);
    auto shuffled = m.records;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(1));
    const auto s2 = split_dataset(shuffled, sp);
    const bool splits = s1.train == s2.train && s1.val == s2.val && s1.test == s2.test;
    ok = ok && splits;
    detail += ", split " + std::string(splits ? "identical" : "DIFFERENT");

    BackboneSpec bb;
    bb.channels = {4, 8};
    bb.canvas_side = 32;
    std::vector<HeadSpec> heads;
    for (const auto& a : desk_ratios()) heads.push_back(HeadSpec::enforced(a));
    const auto tr = load_samples(subset(m, s1.train), 32).samples;
    const auto va = load_samples(subset(m, s1.val), 32).samples;
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.max_epochs = 3;
    cfg.seed = 9;
    const TrainResult r1 = train(CropModel(bb, heads, 9), tr, va, cfg);
    const TrainResult r2 = train(CropModel(bb, heads, 9), tr, va, cfg);
    double diff = 0.0;
    for (std::size_t i = 0; i < std::min(r1.history.size(), r2.history.size()); ++i) {
        diff = std::max({diff, std::abs(r1.history[i].train_loss - r2.history[i].train_loss),
                         std::abs(r1.history[i].val_loss - r2.history[i].val_loss)});
    }
    const bool training = r1.history.size() == r2.history.size() && diff <= 1e-6;
    ok = ok && training;
    detail += ", train histories max diff " + fmt(diff);

    if (!cli.empty()) {
        const auto run = [&](const std::string& args) {
            const std::string cmd = "\"" + cli + "\" --log-level error " + args + " >/dev/null 2>&1";
            return std::system(cmd.c_str()) == 0;
        };
        const fs::path a = root / "cli-a";
        const fs::path b = root / "cli-b";
        bool cli_ok = run("synth --count 60 --seed 7 --out \"" + a.string() + "\"") &&
                      run("synth --count 60 --seed 7 --out \"" + b.string() + "\"");
        std::size_t cli_files = 0;
        cli_ok = cli_ok && same_tree(a, b, cli_files);
        const std::string train_args = " train --manifest \"" + (a / "manifest.jsonl").string() +
                                       "\" --canvas 32 --channels 4,8 --hidden 8 --epochs 2 --lr 1e-3 --seed 3 "
                                       "--workers 1 --out ";
        cli_ok = cli_ok && run(train_args + "\"" + (root / "cli-m1").string() + "\"") &&
                 run(train_args + "\"" + (root / "cli-m2").string() + "\"");
        double cli_diff = cli_ok ? 0.0 : 1.0;
        if (cli_ok) {
            const auto h1 = history_losses(root / "cli-m1" / "history.jsonl");
            const auto h2 = history_losses(root / "cli-m2" / "history.jsonl");
            cli_ok = !h1.empty() && h1.size() == h2.size() &&
                     read_file(root / "cli-m1" / "split.json") == read_file(root / "cli-m2" / "split.json");
            for (std::size_t i = 0; cli_ok && i < h1.size(); ++i) {
                cli_diff = std::max({cli_diff, std::abs(h1[i].first - h2[i].first),
                                     std::abs(h1[i].second - h2[i].second)});
            }
            cli_ok = cli_ok && cli_diff <= 1e-6;
        }
        ok = ok && cli_ok;
        detail += "; command line synth+train " + std::string(cli_ok ? "reproducible" : "NOT reproducible") +
                  " (history diff " + fmt(cli_diff) + ")";
    }
    return {ok, detail};
}

// 10 ----------------------------------------------------------------------

Outcome benchmark_accounting() {
    std::vector<HeadSpec> heads;
    for (const auto& a : default_ratios()) heads.push_back(HeadSpec::enforced(a));
    const CropModel model(BackboneSpec{}, heads, 10);
    SyntheticSpec spec;
    std::mt19937_64 rng(10);
    std::vector<Letterboxed> canvases;
    for (int i = 0; i < 64; ++i) canvases.push_back(letterbox(render_scene(sample_scene(spec, rng)), model.canvas_side()));
    const BenchmarkReport r = benchmark(model, canvases, BenchmarkOptions{32, 1, 5});
    const bool ok = r.heads == 5 && r.images_timed == 160 && r.images_per_sec > 0.0 &&
                    r.crops_per_sec == r.images_per_sec * static_cast<double>(r.heads);
    return {ok, std::to_string(r.heads) + "-head desk model, " + fmt(r.images_per_sec) + " images/s x " +
                    std::to_string(r.heads) + " = " + fmt(r.crops_per_sec) + " crops/s over " +
                    std::to_string(r.images_timed) + " images"};
}

// 11 ----------------------------------------------------------------------

Outcome round_trips(const fs::path& root, const DeskRun& desk) {
    std::mt19937_64 rng(11);
    std::string detail;

    // Manifest.
    std::vector<ManifestRecord> records;
    const auto ratios = default_ratios();
    for (int i = 0; i < 300; ++i) {
        ManifestRecord r;
        r.id = "r" + std::to_string(rnd::uniform_int(rng, 0, 1u << 30)) + "_" + std::to_string(i);
        r.path = "images/" + r.id + ".jpg";
        r.dims = ImageDims(static_cast<int>(rnd::uniform_int(rng, 32, 4000)),
                           static_cast<int>(rnd::uniform_int(rng, 32, 4000)));
        for (const auto& a : ratios) {
            if (rnd::uniform01(rng) < 0.4) continue;
            const EnforcedBoxParams p{rnd::uniform01(rng), rnd::uniform01(rng), rnd::uniform(rng, 0.1, 1.0),
                                      orientation_for(a)};
            r.crops.emplace(a, enforce_transform(p, a, r.dims));
        }
        records.push_back(std::move(r));
    }
    write_manifest(root / "rt" / "m1.jsonl", records);
    const Manifest loaded = load_manifest(root / "rt" / "m1.jsonl");
    auto sorted = records;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    write_manifest(root / "rt" / "m2.jsonl", loaded.records);
    const bool manifest_ok = loaded.diagnostics.empty() && loaded.records == sorted &&
                             read_file(root / "rt" / "m1.jsonl") == read_file(root / "rt" / "m2.jsonl");
    detail += "manifest (300 records) " + std::string(manifest_ok ? "exact" : "MISMATCH");

    // Checkpoint.
    CropModel model;
    if (desk.model) {
        model = *desk.model;
    } else {
        std::vector<HeadSpec> heads;
        for (const auto& a : ratios) heads.push_back(HeadSpec::enforced(a));
        model = CropModel(BackboneSpec{}, heads, 11);
    }
    save_model(model, root / "rt" / "ckpt");
    const CropModel restored = load_model(root / "rt" / "ckpt");
    SyntheticSpec spec;
    bool ckpt_ok = backbone_checksum(model) == backbone_checksum(restored);
    for (int i = 0; i < 20 && ckpt_ok; ++i) {
        const Image img = render_scene(sample_scene(spec, rng));
        const auto a = predict(model, img, ratios);
        const auto b = predict(restored, img, ratios);
        for (std::size_t k = 0; k < a.size(); ++k) ckpt_ok = ckpt_ok && a[k].box == b[k].box;
    }
    detail += ", checkpoint probes " + std::string(ckpt_ok ? "bit-identical" : "DIFFER");

    // Letterbox mapping.
    double map_err = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const ImageDims d(static_cast<int>(rnd::uniform_int(rng, 1, 5000)),
                          static_cast<int>(rnd::uniform_int(rng, 1, 5000)));
        const auto m = CanvasMapping::for_image(d, static_cast<int>(rnd::uniform_int(rng, 8, 512)));
        const double x1 = rnd::uniform(rng, 0.0, 0.95);
        const double y1 = rnd::uniform(rng, 0.0, 0.95);
        const BoxN b{x1, y1, rnd::uniform(rng, x1 + 0.01, 1.0), rnd::uniform(rng, y1 + 0.01, 1.0)};
        const BoxN back = map_box(map_box(b, m, MapDirection::ImageToCanvas), m, MapDirection::CanvasToImage);
        map_err = std::max({map_err, std::abs(back.x1 - b.x1), std::abs(back.y1 - b.y1), std::abs(back.x2 - b.x2),
                            std::abs(back.y2 - b.y2)});
    }
    const bool map_ok = map_err <= 1e-9;
    detail += ", letterbox mapping max error " + fmt(map_err);

    // Horizontal flip.
    double flip_err = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double x1 = rnd::uniform(rng, 0.0, 0.95);
        const double y1 = rnd::uniform(rng, 0.0, 0.95);
        const BoxN b{x1, y1, rnd::uniform(rng, x1 + 0.01, 1.0), rnd::uniform(rng, y1 + 0.01, 1.0)};
        const BoxN ff = hflip_box(hflip_box(b));
        flip_err = std::max({flip_err, std::abs(ff.x1 - b.x1), std::abs(ff.x2 - b.x2), std::abs(ff.y1 - b.y1),
                             std::abs(ff.y2 - b.y2)});
    }
    const Image img = render_scene(sample_scene(spec, rng));
    const bool image_flip = hflip_image(hflip_image(img)) == img;
    const bool flip_ok = flip_err <= 1e-15 && image_flip;
    detail += ", hflip box max error " + fmt(flip_err) + ", image " + (image_flip ? "identical" : "DIFFERENT");

    return {manifest_ok && ckpt_ok && map_ok && flip_ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria runner"};
    std::vector<int> only;
    std::string work;
    std::string cli;
    bool keep = false;
    app.add_option("--only", only, "Run only these criterion numbers")->delimiter(',')->check(CLI::Range(1, 11));
    app.add_option("--work-dir", work, "Scratch directory (default: a fresh temporary directory)");
    app.add_option("--cli", cli, "Command-line binary to include in the determinism check");
    app.add_flag("--keep", keep, "Keep the scratch directory");
    CLI11_PARSE(app, argc, argv);

    const fs::path root = work.empty() ? fs::temp_directory_path() / ("aspectcrop-acceptance-" +
                                                                      std::to_string(std::random_device{}()))
                                       : fs::path(work);
    fs::create_directories(root);
    DeskRun desk;
    desk.root = root;

    const std::vector<Criterion> criteria{
        {1, "geometry-oracle", 30, 0, geometry_oracle},
        {2, "enforcement", 10, 0, enforcement},
        {3, "gradient-check", 60, 0, gradient_check},
        {4, "desk-learning", 0, 900, [&] { return desk_learning(desk); }},
        {5, "enforced-vs-non-enforced", 0, 0, [&] { return enforced_vs_free(desk); }},
        {6, "baseline-trend", 0, 0, [&] { return baseline_trend(root); }},
        {7, "synthesis", 0, 0, synthesis},
        {8, "masking", 0, 0, masking},
        {9, "determinism", 0, 0, [&] { return determinism(root, cli); }},
        {10, "benchmark-accounting", 0, 0, benchmark_accounting},
        {11, "round-trips", 0, 0, [&] { return round_trips(root, desk); }},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.number) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::string timing = fmt(secs, 3) + " s";
        if (c.limit_s > 0) {
            timing += " (limit " + fmt(c.limit_s, 3) + " s)";
            if (secs >= c.limit_s) {
                o.pass = false;
                o.detail += "; over the time limit";
            }
        }
        if (c.target_s > 0) {
            timing += secs <= c.target_s ? " (target " + fmt(c.target_s, 3) + " s met)"
                                         : " (target " + fmt(c.target_s, 3) + " s MISSED)";
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.number << "] " << c.name << ": " << o.detail << "; "
                  << timing << std::endl;
        failed += o.pass ? 0 : 1;
    }
    if (!keep && work.empty()) {
        std::error_code ec;
        fs::remove_all(root, ec);
    }
    return failed == 0 ? 0 : 1;
}
