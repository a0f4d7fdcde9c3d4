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

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aspectcrop/datasets.hpp"
#include "aspectcrop/model.hpp"
#include "aspectcrop/preprocess.hpp"

namespace aspectcrop {

/// Mean over elements of 0.5 d^2 / beta when |d| < beta, |d| - 0.5 beta otherwise.
double smooth_l1(std::span<const double> pred, std::span<const double> target, double beta);

/// d(smooth_l1)/d(pred) for one element, before averaging.
double smooth_l1_derivative(double diff, double beta) noexcept;

/// One letterboxed training example with its targets in both frames.
struct TrainingSample {
    std::string id;
    Image canvas;
    CanvasMapping mapping;
    BoxesByRatio canvas_boxes;
    BoxesByRatio image_boxes;
    std::optional<BoxN> canvas_free_box;
    std::optional<BoxN> image_free_box;
};

TrainingSample make_sample(std::string id, const Image& image, const BoxesByRatio& image_boxes,
                           const std::optional<BoxN>& image_free_box, int canvas_side);

struct LoadedSamples {
    std::vector<TrainingSample> samples;
    std::vector<Diagnostic> diagnostics;
};

/// Decodes and letterboxes every record; undecodable images become diagnostics.
LoadedSamples load_samples(const Manifest& manifest, int canvas_side, int workers = 1);
LoadedSamples load_samples(const AspectFreeManifest& manifest, int canvas_side, int workers = 1);

struct LossBreakdown {
    double total = 0.0;
    /// Mean loss of each head over the records that annotate its ratio; NaN if none.
    std::vector<double> per_head;
    std::size_t counted_records = 0;
    std::size_t skipped_records = 0;
};

/// Smooth L1 between predicted and annotated canvas-frame corners, averaged over
/// the heads a record annotates and then over records. Enforced outputs are
/// turned into corners without clipping. When `head_grads` is non-null it
/// receives d(total)/d(head output) for every head (zero for unannotated ones).
LossBreakdown compute_loss(const CropModel& model, std::span<const Matrix> head_outputs,
                           std::span<const TrainingSample* const> records, double beta,
                           std::vector<Matrix>* head_grads = nullptr);

/// Zeroes gradients, runs the full forward/backward path without augmentation
/// and returns the loss; gradients are left in the model parameters.
double loss_and_gradients(CropModel& model, std::span<const TrainingSample> samples, double beta);

struct SplitSpec {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Group sizes by largest remainder; leftover units go to the earliest group on ties.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec);

/// Position of a record id in the seeded split order: splitmix64(seed ^ fnv1a(id)).
std::uint64_t split_key(std::string_view id, std::uint64_t seed);

template <typename Record>
struct Split {
    std::vector<Record> train;
    std::vector<Record> val;
    std::vector<Record> test;
};

/// Orders records by split_key (id breaks ties) and cuts by split_sizes.
template <typename Record>
Split<Record> split_dataset(const std::vector<Record>& records, const SplitSpec& spec) {
    spec.validate();
    if (records.empty()) {
        throw std::invalid_argument("split_dataset: empty manifest");
    }
    std::vector<std::pair<std::uint64_t, const Record*>> order;
    order.reserve(records.size());
    for (const auto& r : records) {
        order.emplace_back(split_key(r.id, spec.seed), &r);
    }
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : a.second->id < b.second->id;
    });
    const auto sizes = split_sizes(records.size(), spec);
    Split<Record> out;
    std::size_t i = 0;
    for (; i < sizes[0]; ++i) out.train.push_back(*order[i].second);
    for (; i < sizes[0] + sizes[1]; ++i) out.val.push_back(*order[i].second);
    for (; i < order.size(); ++i) out.test.push_back(*order[i].second);
    return out;
}

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 32;
    int max_epochs = 100;
    int early_stop_patience = 10;
    double early_stop_min_delta = 1e-4;
    std::uint64_t seed = 0;
    double smooth_l1_beta = 1.0;
    bool augment = true;
    AugmentSpec augment_spec;
    bool freeze_backbone = false;
    int workers = 1;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = std::numeric_limits<double>::quiet_NaN();
    double val_loss = 0.0;
    double val_iou = 0.0;
    double learning_rate = 0.0;
    std::string timestamp;
};

class EarlyStopState {
public:
    explicit EarlyStopState(double min_delta = 1e-4) : min_delta_(min_delta) {}

    /// Returns true if `val_loss` is an improvement; the caller snapshots then.
    bool update(int epoch, double val_loss);
    bool should_stop(int patience) const noexcept { return epochs_since_improvement_ >= patience; }

    double best_val_loss() const noexcept { return best_val_loss_; }
    int best_epoch() const noexcept { return best_epoch_; }
    int epochs_since_improvement() const noexcept { return epochs_since_improvement_; }

    std::vector<Matrix> best_parameters;

private:
    double min_delta_;
    double best_val_loss_ = std::numeric_limits<double>::infinity();
    int best_epoch_ = 0;
    int epochs_since_improvement_ = 0;
};

struct TrainResult {
    CropModel model;
    /// Validation metrics before the first step.
    EpochRecord initial;
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    bool early_stopped = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam with seeded shuffling and augmentation, validation after each epoch
/// and early stopping on validation loss. Returns the best-epoch parameters.
/// Throws std::runtime_error naming the batch if a loss becomes non-finite.
TrainResult train(CropModel model, std::span<const TrainingSample> train_set, std::span<const TrainingSample> val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct ValidationMetrics {
    double loss = 0.0;
    double iou = 0.0;
    std::size_t boxes = 0;
};

ValidationMetrics validate(const CropModel& model, std::span<const TrainingSample> samples, double beta,
                           int batch_size = 64);

/// Defaults of the unconstrained-crop fine-tuning recipe.
TrainConfig fine_tune_defaults();

/// Swaps all heads for one aspect-free non-enforced head, splits `samples`
/// by id into train/validation at `val_fraction` and trains.
TrainResult fine_tune_nonenforced(const CropModel& model, std::span<const TrainingSample> samples, double val_fraction,
                                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// One JSON object per line: epoch, train_loss, val_loss, val_iou, lr, timestamp.
void write_history(const std::filesystem::path& path, std::span<const EpochRecord> history);

}  // namespace aspectcrop
