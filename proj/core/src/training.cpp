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

#include "aspectcrop/training.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aspectcrop/parallel.hpp"
#include "aspectcrop/random.hpp"

namespace aspectcrop {

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

const BoxN* target_for(const RegressionHead& head, const TrainingSample& s) {
    const auto& spec = head.spec();
    if (!spec.alpha) {
        return s.canvas_free_box ? &*s.canvas_free_box : nullptr;
    }
    const auto it = s.canvas_boxes.find(*spec.alpha);
    return it == s.canvas_boxes.end() ? nullptr : &it->second;
}

/// Canvas-frame corners predicted by one head column; the canvas is square so
/// the enforced transform reduces to w = s, h = s / alpha (or the reverse).
std::array<double, 4> predicted_corners(const HeadSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& out) {
    if (spec.kind == HeadKind::NonEnforced) {
        return {out(0), out(1), out(2), out(3)};
    }
    const double a = spec.alpha->value();
    const double s = out(2);
    const double w = spec.alpha->is_landscape_or_square() ? s : s * a;
    const double h = spec.alpha->is_landscape_or_square() ? s / a : s;
    return {out(0) - 0.5 * w, out(1) - 0.5 * h, out(0) + 0.5 * w, out(1) + 0.5 * h};
}

/// Chain rule from corner gradients back to the raw head outputs.
void corner_grad_to_output(const HeadSpec& spec, const std::array<double, 4>& g, Eigen::Ref<Eigen::VectorXd> dout) {
    if (spec.kind == HeadKind::NonEnforced) {
        for (int k = 0; k < 4; ++k) {
            dout(k) += g[static_cast<std::size_t>(k)];
        }
        return;
    }
    const double a = spec.alpha->value();
    const double dw = 0.5 * (g[2] - g[0]);
    const double dh = 0.5 * (g[3] - g[1]);
    dout(0) += g[0] + g[2];
    dout(1) += g[1] + g[3];
    dout(2) += spec.alpha->is_landscape_or_square() ? dw + dh / a : dw * a + dh;
}

std::vector<Matrix> snapshot(const CropModel& model) {
    std::vector<Matrix> out;
    for (const auto* p : model.parameters()) {
        out.push_back(p->value);
    }
    return out;
}

void restore(CropModel& model, const std::vector<Matrix>& values) {
    auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i]->value = values[i];
    }
}

template <typename Record, typename Targets>
LoadedSamples load_generic(const ManifestOf<Record>& manifest, int canvas_side, int workers, Targets targets) {
    const auto n = manifest.records.size();
    std::vector<std::optional<TrainingSample>> slots(n);
    std::vector<std::string> errors(n);
    parallel_for(n, workers, [&](std::size_t i) {
        const auto& r = manifest.records[i];
        try {
            const Image img = read_image(manifest.resolve(r));
            if (img.width() != r.dims.width_px || img.height() != r.dims.height_px) {
                throw std::runtime_error("decoded size " + std::to_string(img.width()) + "x" +
                                         std::to_string(img.height()) + " differs from the manifest");
            }
            auto [boxes, free_box] = targets(r);
            slots[i] = make_sample(r.id, img, boxes, free_box, canvas_side);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    LoadedSamples out;
    for (std::size_t i = 0; i < n; ++i) {
        if (slots[i]) {
            out.samples.push_back(std::move(*slots[i]));
        } else {
            out.diagnostics.push_back({0, manifest.records[i].id, errors[i]});
        }
    }
    return out;
}

}  // namespace

double smooth_l1_derivative(double diff, double beta) noexcept {
    if (std::abs(diff) < beta) {
        return diff / beta;
    }
    return diff > 0.0 ? 1.0 : -1.0;
}

double smooth_l1(std::span<const double> pred, std::span<const double> target, double beta) {
    if (pred.size() != target.size()) {
        throw std::invalid_argument("smooth_l1: length mismatch (" + std::to_string(pred.size()) + " vs " +
                                    std::to_string(target.size()) + ")");
    }
    if (!(beta > 0.0)) {
        throw std::invalid_argument("smooth_l1: beta must be positive");
    }
    if (pred.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = std::abs(pred[i] - target[i]);
        sum += d < beta ? 0.5 * d * d / beta : d - 0.5 * beta;
    }
    return sum / static_cast<double>(pred.size());
}

TrainingSample make_sample(std::string id, const Image& image, const BoxesByRatio& image_boxes,
                           const std::optional<BoxN>& image_free_box, int canvas_side) {
    Letterboxed lb = letterbox(image, canvas_side);
    TrainingSample s;
    s.id = std::move(id);
    s.mapping = lb.mapping;
    s.canvas = std::move(lb.canvas);
    s.image_boxes = image_boxes;
    for (const auto& [alpha, box] : image_boxes) {
        s.canvas_boxes.emplace(alpha, map_box(box, s.mapping, MapDirection::ImageToCanvas));
    }
    if (image_free_box) {
        s.image_free_box = image_free_box;
        s.canvas_free_box = map_box(*image_free_box, s.mapping, MapDirection::ImageToCanvas);
    }
    return s;
}

LoadedSamples load_samples(const Manifest& manifest, int canvas_side, int workers) {
    return load_generic(manifest, canvas_side, workers, [](const ManifestRecord& r) {
        return std::pair<BoxesByRatio, std::optional<BoxN>>{r.crops, std::nullopt};
    });
}

LoadedSamples load_samples(const AspectFreeManifest& manifest, int canvas_side, int workers) {
    return load_generic(manifest, canvas_side, workers, [](const AspectFreeRecord& r) {
        return std::pair<BoxesByRatio, std::optional<BoxN>>{BoxesByRatio{}, r.crop};
    });
}

LossBreakdown compute_loss(const CropModel& model, std::span<const Matrix> head_outputs,
                           std::span<const TrainingSample* const> records, double beta,
                           std::vector<Matrix>* head_grads) {
    const auto heads = model.heads();
    if (head_outputs.size() != heads.size()) {
        throw std::invalid_argument("compute_loss: one output block per head is required");
    }
    const auto n = static_cast<Eigen::Index>(records.size());
    if (head_grads) {
        head_grads->clear();
        for (const auto& h : heads) {
            head_grads->push_back(Matrix::Zero(h.spec().arity(), n));
        }
    }
    LossBreakdown lb;
    lb.per_head.assign(heads.size(), 0.0);
    std::vector<std::size_t> per_head_count(heads.size(), 0);

    std::vector<std::size_t> present;
    for (Eigen::Index i = 0; i < n; ++i) {
        const TrainingSample& rec = *records[static_cast<std::size_t>(i)];
        present.clear();
        for (std::size_t h = 0; h < heads.size(); ++h) {
            if (target_for(heads[h], rec)) {
                present.push_back(h);
            }
        }
        if (present.empty()) {
            ++lb.skipped_records;
        } else {
            ++lb.counted_records;
        }
    }
    if (lb.counted_records == 0) {
        for (auto& v : lb.per_head) {
            v = std::numeric_limits<double>::quiet_NaN();
        }
        return lb;
    }

    const double record_weight = 1.0 / static_cast<double>(lb.counted_records);
    for (Eigen::Index i = 0; i < n; ++i) {
        const TrainingSample& rec = *records[static_cast<std::size_t>(i)];
        present.clear();
        for (std::size_t h = 0; h < heads.size(); ++h) {
            if (target_for(heads[h], rec)) {
                present.push_back(h);
            }
        }
        if (present.empty()) {
            continue;
        }
        const double head_weight = record_weight / static_cast<double>(present.size());
        for (const std::size_t h : present) {
            const BoxN& t = *target_for(heads[h], rec);
            const auto& out = head_outputs[h];
            if (out.rows() != heads[h].spec().arity() || out.cols() != n) {
                throw std::invalid_argument("compute_loss: head output has the wrong shape");
            }
            const auto pred = predicted_corners(heads[h].spec(), out.col(i));
            const std::array<double, 4> target{t.x1, t.y1, t.x2, t.y2};
            const double loss = smooth_l1(pred, target, beta);
            lb.total += head_weight * loss;
            lb.per_head[h] += loss;
            ++per_head_count[h];
            if (head_grads) {
                std::array<double, 4> g{};
                for (std::size_t k = 0; k < 4; ++k) {
                    g[k] = head_weight * smooth_l1_derivative(pred[k] - target[k], beta) / 4.0;
                }
                corner_grad_to_output(heads[h].spec(), g, (*head_grads)[h].col(i));
            }
        }
    }
    for (std::size_t h = 0; h < heads.size(); ++h) {
        lb.per_head[h] = per_head_count[h] ? lb.per_head[h] / static_cast<double>(per_head_count[h])
                                           : std::numeric_limits<double>::quiet_NaN();
    }
    return lb;
}

double loss_and_gradients(CropModel& model, std::span<const TrainingSample> samples, double beta) {
    for (auto* p : model.parameters()) {
        p->grad.setZero();
    }
    std::vector<Matrix> inputs;
    std::vector<const TrainingSample*> recs;
    for (const auto& s : samples) {
        inputs.push_back(model.to_input(s.canvas));
        recs.push_back(&s);
    }
    const TrainingForward fwd = forward_for_training(model, inputs);
    std::vector<Matrix> grads;
    const LossBreakdown lb = compute_loss(model, fwd.result.head_outputs, recs, beta, &grads);
    backward(model, fwd, grads);
    return lb.total;
}

void SplitSpec::validate() const {
    if (!(train > 0.0) || !(val >= 0.0) || !(test >= 0.0)) {
        throw std::invalid_argument("split fractions must be non-negative with a positive train share");
    }
    if (std::abs(train + val + test - 1.0) > 1e-9) {
        throw std::invalid_argument("split fractions must sum to 1");
    }
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec) {
    spec.validate();
    const std::array<double, 3> frac{spec.train, spec.val, spec.test};
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double exact = frac[i] * static_cast<double>(n);
        sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        rem[i] = exact - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    while (assigned < n) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < 3; ++i) {
            if (rem[i] > rem[best] + 1e-12) {
                best = i;
            }
        }
        ++sizes[best];
        rem[best] = -1.0;
        ++assigned;
    }
    return sizes;
}

std::uint64_t split_key(std::string_view id, std::uint64_t seed) { return rnd::splitmix64(seed ^ rnd::fnv1a(id)); }

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("learning rate must be finite and non-negative");
    }
    if (batch_size < 1) {
        throw std::invalid_argument("batch size must be >= 1");
    }
    if (early_stop_patience < 1) {
        throw std::invalid_argument("early-stop patience must be >= 1");
    }
    if (max_epochs < 0) {
        throw std::invalid_argument("max epochs must be >= 0");
    }
    if (!(smooth_l1_beta > 0.0)) {
        throw std::invalid_argument("smooth L1 beta must be positive");
    }
    augment_spec.validate();
}

bool EarlyStopState::update(int epoch, double val_loss) {
    if (val_loss < best_val_loss_ - min_delta_ || (std::isinf(best_val_loss_) && std::isfinite(val_loss))) {
        best_val_loss_ = val_loss;
        best_epoch_ = epoch;
        epochs_since_improvement_ = 0;
        return true;
    }
    ++epochs_since_improvement_;
    return false;
}

ValidationMetrics validate(const CropModel& model, std::span<const TrainingSample> samples, double beta,
                           int batch_size) {
    ValidationMetrics m;
    double loss_sum = 0.0;
    std::size_t loss_records = 0;
    double iou_sum = 0.0;
    const auto heads = model.heads();
    for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<Matrix> inputs;
        std::vector<const TrainingSample*> recs;
        for (std::size_t i = start; i < end; ++i) {
            inputs.push_back(model.to_input(samples[i].canvas));
            recs.push_back(&samples[i]);
        }
        const ForwardResult fwd = forward_inputs(model, inputs);
        const LossBreakdown lb = compute_loss(model, fwd.head_outputs, recs, beta);
        loss_sum += lb.total * static_cast<double>(lb.counted_records);
        loss_records += lb.counted_records;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            const TrainingSample& s = *recs[i];
            for (std::size_t h = 0; h < heads.size(); ++h) {
                const auto& spec = heads[h].spec();
                const BoxN* gt = nullptr;
                if (spec.alpha) {
                    const auto it = s.image_boxes.find(*spec.alpha);
                    gt = it == s.image_boxes.end() ? nullptr : &it->second;
                } else if (s.image_free_box) {
                    gt = &*s.image_free_box;
                }
                if (!gt) {
                    continue;
                }
                const BoxN pred = head_output_to_image_box(heads[h], fwd.head_outputs[h].col(static_cast<Eigen::Index>(i)),
                                                           s.mapping);
                iou_sum += iou(pred, *gt);
                ++m.boxes;
            }
        }
    }
    m.loss = loss_records ? loss_sum / static_cast<double>(loss_records) : 0.0;
    m.iou = m.boxes ? iou_sum / static_cast<double>(m.boxes) : 0.0;
    return m;
}

TrainResult train(CropModel model, std::span<const TrainingSample> train_set, std::span<const TrainingSample> val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (train_set.empty() || val_set.empty()) {
        throw std::invalid_argument("train: training and validation sets must be non-empty");
    }
    bool covered = false;
    for (const auto& h : model.heads()) {
        for (const auto& s : train_set) {
            if (target_for(h, s)) {
                covered = true;
                break;
            }
        }
    }
    if (!covered) {
        throw std::invalid_argument("train: no head has ground truth in the training set");
    }

    std::vector<nn::Parameter*> trainable;
    if (cfg.freeze_backbone) {
        for (auto& h : model.heads()) {
            auto p = h.parameters();
            trainable.insert(trainable.end(), p.begin(), p.end());
        }
    } else {
        trainable = model.parameters();
    }
    nn::Adam adam(trainable, nn::AdamConfig{cfg.learning_rate});
    std::mt19937_64 shuffle_rng(rnd::splitmix64(cfg.seed));

    TrainResult result;
    const ValidationMetrics v0 = validate(model, val_set, cfg.smooth_l1_beta);
    result.initial = EpochRecord{0, std::numeric_limits<double>::quiet_NaN(), v0.loss, v0.iou, cfg.learning_rate,
                                 utc_timestamp()};

    EarlyStopState stop(cfg.early_stop_min_delta);
    stop.best_parameters = snapshot(model);
    std::vector<std::size_t> order(train_set.size());
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rnd::shuffle(order, shuffle_rng);
        double loss_sum = 0.0;
        std::size_t loss_records = 0;
        for (std::size_t start = 0, batch_id = 0; start < order.size(); start += batch, ++batch_id) {
            const std::size_t end = std::min(order.size(), start + batch);
            const std::size_t n = end - start;
            std::vector<TrainingSample> assembled(n);
            std::vector<Matrix> inputs(n);
            // Each sample draws from its own stream so the batch does not depend
            // on which worker produced it.
            parallel_for(n, cfg.workers, [&](std::size_t k) {
                const std::size_t idx = order[start + k];
                const TrainingSample& src = train_set[idx];
                TrainingSample& dst = assembled[k];
                dst.id = src.id;
                dst.mapping = src.mapping;
                dst.image_boxes = src.image_boxes;
                dst.image_free_box = src.image_free_box;
                if (cfg.augment) {
                    std::mt19937_64 rng(rnd::splitmix64(cfg.seed ^ rnd::splitmix64(
                                                                      (static_cast<std::uint64_t>(epoch) << 32) ^ idx)));
                    Augmented a = augment(src.canvas, src.canvas_boxes, src.canvas_free_box, cfg.augment_spec, rng);
                    dst.canvas = std::move(a.canvas);
                    dst.canvas_boxes = std::move(a.boxes);
                    dst.canvas_free_box = a.free_box;
                } else {
                    dst.canvas = src.canvas;
                    dst.canvas_boxes = src.canvas_boxes;
                    dst.canvas_free_box = src.canvas_free_box;
                }
                inputs[k] = model.to_input(dst.canvas);
            });

            std::vector<const TrainingSample*> recs;
            for (const auto& s : assembled) {
                recs.push_back(&s);
            }
            const TrainingForward fwd = forward_for_training(model, inputs);
            std::vector<Matrix> grads;
            const LossBreakdown lb = compute_loss(model, fwd.result.head_outputs, recs, cfg.smooth_l1_beta, &grads);
            if (lb.counted_records == 0) {
                continue;
            }
            if (!std::isfinite(lb.total)) {
                throw std::runtime_error("non-finite training loss in epoch " + std::to_string(epoch) + ", batch " +
                                         std::to_string(batch_id) + " (first record " + assembled.front().id + ")");
            }
            adam.zero_grad();
            backward(model, fwd, grads, !cfg.freeze_backbone);
            adam.step();
            loss_sum += lb.total * static_cast<double>(lb.counted_records);
            loss_records += lb.counted_records;
        }

        const ValidationMetrics v = validate(model, val_set, cfg.smooth_l1_beta);
        if (!std::isfinite(v.loss)) {
            throw std::runtime_error("non-finite validation loss in epoch " + std::to_string(epoch));
        }
        EpochRecord rec{epoch, loss_records ? loss_sum / static_cast<double>(loss_records) : 0.0, v.loss, v.iou,
                        cfg.learning_rate, utc_timestamp()};
        result.history.push_back(rec);
        if (on_epoch) {
            on_epoch(rec);
        }
        if (stop.update(epoch, v.loss)) {
            stop.best_parameters = snapshot(model);
        } else if (stop.should_stop(cfg.early_stop_patience)) {
            result.early_stopped = true;
            break;
        }
    }
    restore(model, stop.best_parameters);
    result.best_epoch = stop.best_epoch();
    result.model = std::move(model);
    return result;
}

TrainConfig fine_tune_defaults() {
    TrainConfig cfg;
    cfg.learning_rate = 1e-5;
    cfg.batch_size = 128;
    cfg.max_epochs = 300;
    return cfg;
}

TrainResult fine_tune_nonenforced(const CropModel& model, std::span<const TrainingSample> samples, double val_fraction,
                                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw std::invalid_argument("validation fraction must lie in (0,1)");
    }
    for (const auto& s : samples) {
        if (!s.canvas_free_box) {
            throw std::invalid_argument("fine-tuning record " + s.id + " has no aspect-free crop");
        }
    }
    const HeadSpec free_head = HeadSpec::non_enforced();
    const CropModel swapped = replace_heads(model, std::span<const HeadSpec>(&free_head, 1), cfg.seed);

    std::vector<TrainingSample> all(samples.begin(), samples.end());
    const auto parts = split_dataset(all, SplitSpec{1.0 - val_fraction, val_fraction, 0.0, cfg.seed});
    return train(swapped, parts.train, parts.val, cfg, on_epoch);
}

void write_history(const std::filesystem::path& path, std::span<const EpochRecord> history) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    for (const auto& r : history) {
        nlohmann::ordered_json j;
        j["epoch"] = r.epoch;
        j["train_loss"] = std::isfinite(r.train_loss) ? nlohmann::ordered_json(r.train_loss) : nlohmann::ordered_json(nullptr);
        j["val_loss"] = r.val_loss;
        j["val_iou"] = r.val_iou;
        j["lr"] = r.learning_rate;
        j["timestamp"] = r.timestamp;
        out << j.dump() << '\n';
    }
    if (!out) {
        throw std::runtime_error("cannot write history " + path.string());
    }
}

}  // namespace aspectcrop
