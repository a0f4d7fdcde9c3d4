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

#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "aspectcrop/datasets.hpp"
#include "aspectcrop/evaluation.hpp"
#include "aspectcrop/model.hpp"
#include "aspectcrop/parallel.hpp"
#include "aspectcrop/training.hpp"
#include "common.hpp"

namespace aspectcrop::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    out << text;
    if (!out) {
        throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

json box_json(const BoxN& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

void log_diagnostics(const std::vector<Diagnostic>& diagnostics, const std::string& what) {
    for (const auto& d : diagnostics) {
        logf(LogLevel::Warn, what, ":", d.line, ": ", d.id.empty() ? "" : d.id + ": ", d.message);
    }
    if (!diagnostics.empty()) {
        logf(LogLevel::Warn, diagnostics.size(), " record(s) skipped in ", what);
    }
}

void add_workers(CLI::App* app, int& workers) {
    app->add_option("--workers", workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

CLI::Option* add_model_dir(CLI::App* app, std::string& dir, bool required) {
    auto* opt = app->add_option("--model", dir, "Model checkpoint directory")->envname(kModelDirEnv);
    if (required) {
        opt->required();
    }
    return opt;
}

/// Writes <dir>/<stem>_free.png for the aspect-free head.
void write_free_crop(const Image& image, const BoxN& box, bool grid, const fs::path& dir, const std::string& stem) {
    Image crop = crop_image(image, box);
    if (grid) {
        draw_thirds_grid(crop);
    }
    fs::create_directories(dir);
    write_image(crop, dir / (stem + "_free.png"));
}

void log_epoch(const EpochRecord& r) {
    logf(LogLevel::Info, "epoch ", r.epoch, " train_loss=", r.train_loss, " val_loss=", r.val_loss,
         " val_iou=", r.val_iou);
}

// synth -------------------------------------------------------------------

struct SynthOptions {
    fs::path out;
    SyntheticSpec spec;
    std::string ratios = join_ratios(default_ratios());
};

Command add_synth(CLI::App& root) {
    auto o = std::make_shared<SynthOptions>();
    auto* app = root.add_subcommand("synth", "Generate a seeded synthetic corpus with oracle crops");
    app->add_option("--out", o->out, "Output directory for images/ and manifest.jsonl")->required();
    app->add_option("--count", o->spec.count, "Number of images")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--seed", o->spec.seed, "Random seed")->capture_default_str();
    app->add_option("--min-side", o->spec.min_side, "Smallest image side in pixels")->capture_default_str();
    app->add_option("--max-side", o->spec.max_side, "Largest image side in pixels")->capture_default_str();
    app->add_option("--subject-area-min", o->spec.subject_area_min, "Smallest subject area fraction")
        ->capture_default_str();
    app->add_option("--subject-area-max", o->spec.subject_area_max, "Largest subject area fraction")
        ->capture_default_str();
    app->add_option("--margin", o->spec.margin, "Crop size relative to the tightest box")->capture_default_str();
    app->add_option("--ratios", o->ratios, "Annotated ratios")->capture_default_str()->check(kRatioList);
    app->add_flag("--aspect-free", o->spec.aspect_free, "Write one unconstrained crop per image instead");
    return {app, [o] {
                SyntheticSpec spec = o->spec;
                spec.ratios = parse_ratio_list(o->ratios);
                const auto corpus = gen_synthetic(spec, o->out);
                logf(LogLevel::Info, "wrote ", corpus.scenes.size(), " images to ", o->out.string());
                std::cout << corpus.manifest_path.string() << '\n';
            }};
}

// stats -------------------------------------------------------------------

struct StatsOptions {
    fs::path manifest;
    std::string ratios = join_ratios(default_ratios());
    fs::path json_out;
};

Command add_stats(CLI::App& root) {
    auto o = std::make_shared<StatsOptions>();
    auto* app = root.add_subcommand("stats", "Summarize a manifest: crop counts and original ratio histogram");
    app->add_option("--manifest", o->manifest, "Manifest JSONL")->required()->check(CLI::ExistingFile);
    app->add_option("--ratios", o->ratios, "Ratios to count crops for")->capture_default_str()->check(kRatioList);
    app->add_option("--json", o->json_out, "Also write the statistics as JSON");
    return {app, [o] {
                const Manifest m = load_manifest(o->manifest);
                log_diagnostics(m.diagnostics, o->manifest.string());
                const DatasetStats s = compute_stats(m, parse_ratio_list(o->ratios));
                json j;
                j["images"] = s.images;
                j["skipped_records"] = m.diagnostics.size();
                json counts = json::object();
                for (const auto& [a, n] : s.crop_counts) counts[a.to_string()] = n;
                j["crop_counts"] = counts;
                json hist = json::object();
                for (const auto& [a, n] : s.original_ratio_histogram) hist[a.to_string()] = n;
                j["original_ratio_histogram"] = hist;
                j["mean_closest_ratio_error"] = s.mean_closest_ratio_error;
                std::cout << "images: " << s.images << '\n';
                for (const auto& [a, n] : s.crop_counts) std::cout << "crops " << a.to_string() << ": " << n << '\n';
                for (const auto& [a, n] : s.original_ratio_histogram) {
                    std::cout << "originals closest to " << a.to_string() << ": " << n << '\n';
                }
                std::cout << "mean closest-ratio error: " << s.mean_closest_ratio_error << '\n';
                if (!o->json_out.empty()) {
                    write_text(o->json_out, j.dump(2) + "\n");
                }
            }};
}

// train -------------------------------------------------------------------

struct TrainOptions {
    fs::path manifest;
    fs::path out;
    std::string split = "0.6,0.2,0.2";
    std::uint64_t seed = 0;
    std::string ratios;
    BackboneSpec backbone;
    std::string channels = "16,32,64,128";
    std::string pooling;
    std::string hidden = "64,32";
    TrainConfig cfg;
    bool no_augment = false;
};

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (int x : v) {
        if (!out.empty()) out += ',';
        out += std::to_string(x);
    }
    return out;
}

void add_train_config(CLI::App* app, TrainConfig& cfg, bool& no_augment) {
    app->add_option("--lr", cfg.learning_rate, "Adam learning rate")->capture_default_str()->check(
        CLI::NonNegativeNumber);
    app->add_option("--batch", cfg.batch_size, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--epochs", cfg.max_epochs, "Maximum epochs")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--patience", cfg.early_stop_patience, "Epochs without improvement before stopping")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--min-delta", cfg.early_stop_min_delta, "Smallest validation loss decrease that counts")
        ->capture_default_str();
    app->add_option("--beta", cfg.smooth_l1_beta, "Smooth L1 transition point")->capture_default_str()->check(
        CLI::PositiveNumber);
    app->add_flag("--no-augment", no_augment, "Disable flip and color augmentation");
    add_workers(app, cfg.workers);
}

Manifest subset(const Manifest& m, std::vector<ManifestRecord> records) {
    return Manifest{m.base_dir, std::move(records), {}};
}

json ids_json(const std::vector<ManifestRecord>& records) {
    json a = json::array();
    for (const auto& r : records) a.push_back(r.id);
    return a;
}

Command add_train(CLI::App& root) {
    auto o = std::make_shared<TrainOptions>();
    o->channels = join_ints(o->backbone.channels);
    o->pooling = std::string(to_string(o->backbone.pooling));
    auto* app = root.add_subcommand("train", "Train a multi-head enforced model on a manifest");
    app->add_option("--manifest", o->manifest, "Manifest JSONL")->required()->check(CLI::ExistingFile);
    app->add_option("--out", o->out, "Checkpoint directory to create")->required();
    app->add_option("--split", o->split, "Train, validation and test fractions")->capture_default_str()->check(kSplit);
    app->add_option("--seed", o->seed, "Seed for the split, initialization, shuffling and augmentation")
        ->capture_default_str();
    app->add_option("--ratios", o->ratios, "Head ratios (default: every ratio annotated in the training split)")
        ->check(kRatioList);
    app->add_option("--canvas", o->backbone.canvas_side, "Letterbox canvas side in pixels")->capture_default_str()->check(
        CLI::PositiveNumber);
    app->add_option("--channels", o->channels, "Convolution channels per block")->capture_default_str()->check(
        kIntList);
    app->add_option("--pooling", o->pooling, "Feature pooling")->capture_default_str()->check(
        CLI::IsMember({"global_average", "flatten"}));
    app->add_option("--hidden", o->hidden, "Hidden layer widths of every head")->capture_default_str()->check(kIntList);
    add_train_config(app, o->cfg, o->no_augment);
    return {app, [o] {
                const Manifest m = load_manifest(o->manifest);
                log_diagnostics(m.diagnostics, o->manifest.string());
                const auto fr = parse_split(o->split);
                const SplitSpec spec{fr[0], fr[1], fr[2], o->seed};
                const auto parts = split_dataset(m.records, spec);
                logf(LogLevel::Info, "split: ", parts.train.size(), " train, ", parts.val.size(), " val, ",
                     parts.test.size(), " test");
                if (parts.val.empty()) {
                    throw std::runtime_error("the validation split is empty; early stopping needs one");
                }

                std::vector<AspectRatio> ratios;
                if (!o->ratios.empty()) {
                    ratios = parse_ratio_list(o->ratios);
                } else {
                    std::set<AspectRatio> seen;
                    for (const auto& r : parts.train) {
                        for (const auto& [a, b] : r.crops) seen.insert(a);
                    }
                    ratios.assign(seen.begin(), seen.end());
                }
                if (ratios.empty()) {
                    throw std::runtime_error("the training split annotates no ratio");
                }
                BackboneSpec bb = o->backbone;
                bb.channels = parse_int_list(o->channels);
                bb.pooling = parse_pooling(o->pooling);
                std::vector<HeadSpec> heads;
                for (const auto& a : ratios) {
                    HeadSpec h = HeadSpec::enforced(a);
                    h.hidden = parse_int_list(o->hidden);
                    heads.push_back(h);
                }
                CropModel model(bb, heads, o->seed);
                logf(LogLevel::Info, "model: ", model.parameter_count(), " parameters, heads ", join_ratios(ratios));

                TrainConfig cfg = o->cfg;
                cfg.seed = o->seed;
                cfg.augment = !o->no_augment;
                const auto train_set = load_samples(subset(m, parts.train), bb.canvas_side, cfg.workers);
                const auto val_set = load_samples(subset(m, parts.val), bb.canvas_side, cfg.workers);
                log_diagnostics(train_set.diagnostics, "training images");
                log_diagnostics(val_set.diagnostics, "validation images");
                TrainResult result = train(model, train_set.samples, val_set.samples, cfg, log_epoch);
                logf(LogLevel::Info, "best epoch ", result.best_epoch, result.early_stopped ? " (early stop)" : "");

                save_model(result.model, o->out);
                write_history(o->out / "history.jsonl", result.history);
                json split;
                split["seed"] = o->seed;
                split["fractions"] = {fr[0], fr[1], fr[2]};
                split["train"] = ids_json(parts.train);
                split["val"] = ids_json(parts.val);
                split["test"] = ids_json(parts.test);
                write_text(o->out / "split.json", split.dump() + "\n");
                write_manifest(o->out / "test_manifest.jsonl", [&] {
                    std::vector<ManifestRecord> recs = parts.test;
                    for (auto& r : recs) r.path = fs::absolute(m.resolve(r)).lexically_normal();
                    return recs;
                }());

                if (!parts.test.empty()) {
                    const ModelPredictor predictor(std::make_shared<const CropModel>(result.model), "model:" +
                                                   o->out.string());
                    EvalOptions eo;
                    eo.workers = cfg.workers;
                    const MetricsReport report = evaluate(predictor, subset(m, parts.test), eo);
                    write_text(o->out / "test_metrics.json", report_to_json(report) + "\n");
                    logf(LogLevel::Info, "test: iou=", report.overall.mean_iou, " bde=", report.overall.mean_bde);
                }
                std::cout << o->out.string() << '\n';
            }};
}

// finetune ----------------------------------------------------------------

struct FineTuneOptions {
    std::string model_dir;
    fs::path manifest;
    fs::path out;
    double val_fraction = 0.2;
    TrainConfig cfg = fine_tune_defaults();
    bool no_augment = false;
};

Command add_finetune(CLI::App& root) {
    auto o = std::make_shared<FineTuneOptions>();
    auto* app = root.add_subcommand(
        "finetune", "Replace the heads with one aspect-free head and train on unconstrained crops");
    add_model_dir(app, o->model_dir, true);
    app->add_option("--manifest", o->manifest, "Aspect-free manifest JSONL")->required()->check(CLI::ExistingFile);
    app->add_option("--out", o->out, "Checkpoint directory to create")->required();
    app->add_option("--val-fraction", o->val_fraction, "Share of records held out for validation")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--seed", o->cfg.seed, "Seed for the split, head initialization and shuffling")
        ->capture_default_str();
    app->add_flag("--freeze-backbone", o->cfg.freeze_backbone, "Train the new head only");
    add_train_config(app, o->cfg, o->no_augment);
    return {app, [o] {
                const CropModel model = load_model(o->model_dir);
                const AspectFreeManifest m = load_aspect_free_manifest(o->manifest);
                log_diagnostics(m.diagnostics, o->manifest.string());
                const auto samples = load_samples(m, model.canvas_side(), o->cfg.workers);
                log_diagnostics(samples.diagnostics, "fine-tuning images");
                TrainConfig cfg = o->cfg;
                cfg.augment = !o->no_augment;
                TrainResult result = fine_tune_nonenforced(model, samples.samples, o->val_fraction, cfg, log_epoch);
                save_model(result.model, o->out);
                write_history(o->out / "history.jsonl", result.history);
                logf(LogLevel::Info, "best epoch ", result.best_epoch, result.early_stopped ? " (early stop)" : "");
                std::cout << o->out.string() << '\n';
            }};
}

// eval --------------------------------------------------------------------

struct EvalCliOptions {
    fs::path manifest;
    std::string predictor;
    std::string ratios_filter;
    std::string unseen = "synthesize";
    fs::path json_out;
    int workers = 1;
};

void check_predictor_spec(std::string_view s) {
    for (const std::string_view prefix : {"model:", "baseline:", "file:"}) {
        if (s.substr(0, prefix.size()) == prefix && s.size() > prefix.size()) {
            if (prefix == "baseline:") {
                BaselineConfig{std::stod(std::string(s.substr(prefix.size())))}.validate();
            }
            return;
        }
    }
    throw std::invalid_argument("expected model:<dir>, baseline:<scale> or file:<jsonl>");
}

std::unique_ptr<Predictor> make_predictor(const std::string& s) {
    const auto colon = s.find(':');
    const std::string kind = s.substr(0, colon);
    const std::string arg = s.substr(colon + 1);
    if (kind == "model") {
        return std::make_unique<ModelPredictor>(std::make_shared<const CropModel>(load_model(arg)), s);
    }
    if (kind == "baseline") {
        return std::make_unique<BaselinePredictor>(BaselineConfig{std::stod(arg)});
    }
    return std::make_unique<FilePredictor>(arg);
}

Command add_eval(CLI::App& root) {
    auto o = std::make_shared<EvalCliOptions>();
    auto* app = root.add_subcommand("eval", "Score a predictor against a manifest with IoU and BDE");
    app->add_option("--manifest", o->manifest, "Manifest JSONL")->required()->check(CLI::ExistingFile);
    app->add_option("--predictor", o->predictor, "model:<dir> | baseline:<scale> | file:<jsonl>")
        ->required()
        ->check(CLI::Validator(
            [](std::string& v) {
                try {
                    check_predictor_spec(v);
                    return std::string{};
                } catch (const std::exception& e) {
                    return std::string(e.what());
                }
            },
            "KIND:ARG", "PREDICTOR"));
    app->add_option("--ratios-filter", o->ratios_filter, "Also report an aggregate over these ratios only")
        ->check(kRatioList);
    app->add_option("--unseen", o->unseen, "Ratios the predictor lacks: derive from the closest one, or skip")
        ->capture_default_str()
        ->check(CLI::IsMember({"synthesize", "skip"}));
    app->add_option("--json", o->json_out, "Also write the report as JSON");
    add_workers(app, o->workers);
    return {app, [o] {
                const Manifest m = load_manifest(o->manifest);
                log_diagnostics(m.diagnostics, o->manifest.string());
                const auto predictor = make_predictor(o->predictor);
                EvalOptions eo;
                eo.unseen = o->unseen == "skip" ? UnseenPolicy::Skip : UnseenPolicy::Synthesize;
                if (!o->ratios_filter.empty()) eo.ratio_filter = parse_ratio_list(o->ratios_filter);
                eo.workers = o->workers;
                const MetricsReport report = evaluate(*predictor, m, eo);
                log_diagnostics(report.failures, "predictions");
                std::cout << format_report(report);
                if (!o->json_out.empty()) {
                    write_text(o->json_out, report_to_json(report) + "\n");
                }
            }};
}

// predict -----------------------------------------------------------------

struct PredictOptions {
    std::string model_dir;
    fs::path input;
    fs::path out;
    std::string ratios;
    bool crops = false;
    bool grid = false;
    int workers = 1;
};

Command add_predict(CLI::App& root) {
    auto o = std::make_shared<PredictOptions>();
    auto* app = root.add_subcommand("predict", "Predict crops for an image or a directory of images");
    add_model_dir(app, o->model_dir, true);
    app->add_option("--input", o->input, "Image file or directory")->required()->check(CLI::ExistingPath);
    app->add_option("--out", o->out, "Output directory for boxes.jsonl and crops")->required();
    app->add_option("--ratios", o->ratios, "Requested ratios (default: the model's head ratios)")->check(kRatioList);
    app->add_flag("--crops", o->crops, "Also write cropped images under <out>/crops");
    app->add_flag("--grid", o->grid, "Draw rule-of-thirds lines on written crops");
    add_workers(app, o->workers);
    return {app, [o] {
                const CropModel model = load_model(o->model_dir);
                const std::vector<AspectRatio> ratios =
                    o->ratios.empty() ? model.enforced_ratios() : parse_ratio_list(o->ratios);
                const bool free = model.free_head_index().has_value();
                if (ratios.empty() && !free) {
                    throw std::runtime_error("the model has no heads to predict with");
                }
                const auto inputs = list_images(o->input);
                std::vector<std::string> lines(inputs.size());
                std::vector<std::string> errors(inputs.size());
                parallel_for(inputs.size(), o->workers, [&](std::size_t i) {
                    try {
                        const Image image = read_image(inputs[i]);
                        const auto preds = ratios.empty() ? std::vector<CropPrediction>{}
                                                          : predict(model, image, ratios);
                        json j;
                        j["id"] = inputs[i].stem().string();
                        j["path"] = inputs[i].string();
                        j["width"] = image.width();
                        j["height"] = image.height();
                        json boxes = json::object();
                        json derived = json::object();
                        BoxesByRatio by_ratio;
                        for (const auto& p : preds) {
                            boxes[p.ratio.to_string()] = box_json(p.box);
                            if (p.derived_from) derived[p.ratio.to_string()] = p.derived_from->to_string();
                            by_ratio.emplace(p.ratio, p.box);
                        }
                        j["boxes"] = boxes;
                        j["derived_from"] = derived;
                        std::optional<BoxN> free_box;
                        if (free) {
                            free_box = predict_free(model, image);
                            j["free"] = box_json(*free_box);
                        }
                        lines[i] = j.dump();
                        if (o->crops) {
                            const fs::path dir = o->out / "crops";
                            render(image, by_ratio, o->grid, dir, inputs[i].stem().string());
                            if (free_box) write_free_crop(image, *free_box, o->grid, dir, inputs[i].stem().string());
                        }
                    } catch (const std::exception& e) {
                        errors[i] = e.what();
                    }
                });
                std::string text;
                std::size_t failed = 0;
                for (std::size_t i = 0; i < inputs.size(); ++i) {
                    if (!errors[i].empty()) {
                        ++failed;
                        logf(LogLevel::Warn, inputs[i].string(), ": ", errors[i]);
                        continue;
                    }
                    text += lines[i] + "\n";
                }
                write_text(o->out / "boxes.jsonl", text);
                logf(LogLevel::Info, "predicted ", inputs.size() - failed, " of ", inputs.size(), " images");
                if (failed == inputs.size()) {
                    throw std::runtime_error("every image failed");
                }
                std::cout << (o->out / "boxes.jsonl").string() << '\n';
            }};
}

// bench -------------------------------------------------------------------

struct BenchOptions {
    std::string model_dir;
    fs::path input;
    int images = 64;
    int canvas = kDeskCanvasSide;
    std::uint64_t seed = 0;
    BenchmarkOptions bench;
    fs::path json_out;
};

Command add_bench(CLI::App& root) {
    auto o = std::make_shared<BenchOptions>();
    auto* app = root.add_subcommand(
        "bench", "Time forward pass plus box decoding; without --model an untrained five-head model is used");
    add_model_dir(app, o->model_dir, false);
    app->add_option("--input", o->input, "Images to time on (default: synthetic scenes)")->check(CLI::ExistingPath);
    app->add_option("--images", o->images, "Synthetic scenes when --input is absent")->capture_default_str()->check(
        CLI::PositiveNumber);
    app->add_option("--canvas", o->canvas, "Canvas side of the untrained model")->capture_default_str()->check(
        CLI::PositiveNumber);
    app->add_option("--seed", o->seed, "Seed for the untrained model and synthetic scenes")->capture_default_str();
    app->add_option("--batch", o->bench.batch_size, "Images per forward pass")->capture_default_str()->check(
        CLI::PositiveNumber);
    app->add_option("--warmup", o->bench.warmup, "Untimed iterations")->capture_default_str()->check(
        CLI::NonNegativeNumber);
    app->add_option("--iterations", o->bench.iterations, "Timed iterations")->capture_default_str()->check(
        CLI::PositiveNumber);
    app->add_option("--json", o->json_out, "Also write the report to this file");
    return {app, [o] {
                CropModel model;
                if (!o->model_dir.empty()) {
                    model = load_model(o->model_dir);
                } else {
                    BackboneSpec bb;
                    bb.canvas_side = o->canvas;
                    std::vector<HeadSpec> heads;
                    for (const auto& a : default_ratios()) heads.push_back(HeadSpec::enforced(a));
                    model = CropModel(bb, heads, o->seed);
                }
                std::vector<Letterboxed> canvases;
                if (!o->input.empty()) {
                    for (const auto& p : list_images(o->input)) {
                        canvases.push_back(letterbox(read_image(p), model.canvas_side()));
                    }
                } else {
                    SyntheticSpec spec;
                    spec.seed = o->seed;
                    std::mt19937_64 rng(o->seed);
                    for (int i = 0; i < o->images; ++i) {
                        canvases.push_back(letterbox(render_scene(sample_scene(spec, rng)), model.canvas_side()));
                    }
                }
                const BenchmarkReport report = benchmark(model, canvases, o->bench);
                logf(LogLevel::Info, report.images_per_sec, " images/s, ", report.crops_per_sec, " crops/s over ",
                     report.heads, " heads");
                const std::string text = benchmark_to_json(report);
                std::cout << text << '\n';
                if (!o->json_out.empty()) {
                    write_text(o->json_out, text + "\n");
                }
            }};
}

// render ------------------------------------------------------------------

struct RenderOptions {
    fs::path input;
    fs::path predictions;
    std::string model_dir;
    std::string ratios;
    fs::path out;
    bool grid = false;
};

Command add_render(CLI::App& root) {
    auto o = std::make_shared<RenderOptions>();
    auto* app = root.add_subcommand("render", "Write crops of images, from a predictions file or a model");
    app->add_option("--input", o->input, "Image file or directory")->required()->check(CLI::ExistingPath);
    auto* pred = app->add_option("--predictions", o->predictions, "JSONL with {id, boxes} lines; ids are file stems")
                     ->check(CLI::ExistingFile);
    auto* model_opt = add_model_dir(app, o->model_dir, false);
    pred->excludes(model_opt);
    app->add_option("--ratios", o->ratios, "Ratios to render (default: all available)")->check(kRatioList);
    app->add_option("--out", o->out, "Output directory")->required();
    app->add_flag("--grid", o->grid, "Draw rule-of-thirds lines");
    return {app, [o] {
                std::unique_ptr<FilePredictor> file;
                std::optional<CropModel> model;
                if (!o->predictions.empty()) {
                    file = std::make_unique<FilePredictor>(o->predictions);
                } else if (!o->model_dir.empty()) {
                    model = load_model(o->model_dir);
                } else {
                    throw std::runtime_error("render needs --predictions or --model (or " + std::string(kModelDirEnv) +
                                             ")");
                }
                const std::optional<std::vector<AspectRatio>> wanted =
                    o->ratios.empty() ? std::nullopt : std::optional(parse_ratio_list(o->ratios));
                std::size_t written = 0;
                for (const auto& path : list_images(o->input)) {
                    const Image image = read_image(path);
                    const std::string stem = path.stem().string();
                    BoxesByRatio boxes;
                    if (file) {
                        ManifestRecord rec;
                        rec.id = stem;
                        rec.dims = image.dims();
                        const auto native = file->native_ratios(rec);
                        if (!native) {
                            logf(LogLevel::Warn, path.string(), ": no predictions for id ", stem);
                            continue;
                        }
                        std::vector<AspectRatio> use;
                        for (const auto& a : *native) {
                            if (!wanted || std::find(wanted->begin(), wanted->end(), a) != wanted->end()) {
                                use.push_back(a);
                            }
                        }
                        boxes = file->predict(rec, path, use);
                    } else {
                        const auto ratios = wanted ? *wanted : model->enforced_ratios();
                        if (!ratios.empty()) {
                            for (const auto& p : predict(*model, image, ratios)) boxes.emplace(p.ratio, p.box);
                        }
                        if (!wanted && model->free_head_index()) {
                            write_free_crop(image, predict_free(*model, image), o->grid, o->out, stem);
                            ++written;
                        }
                    }
                    written += render(image, boxes, o->grid, o->out, stem).size();
                }
                logf(LogLevel::Info, "wrote ", written, " crops to ", o->out.string());
            }};
}

}  // namespace

std::vector<Command> register_commands(CLI::App& root) {
    return {add_synth(root), add_stats(root),   add_train(root), add_finetune(root),
            add_eval(root),  add_predict(root), add_bench(root), add_render(root)};
}

}  // namespace aspectcrop::cli
