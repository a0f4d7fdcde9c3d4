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

#include "aspectcrop/model.hpp"

#include <algorithm>
#include <cstring>
#include <set>

#include "aspectcrop/random.hpp"

namespace aspectcrop {

namespace {

// He-style bound for layers followed by a rectifier, 1/sqrt(fan_in) for the
// layer feeding the sigmoid.
constexpr double kRectifierGain = 6.0;
constexpr double kOutputGain = 1.0;

std::uint64_t head_seed(std::uint64_t seed, const HeadSpec& spec) {
    return rnd::splitmix64(seed ^ rnd::fnv1a(spec.key()));
}

BoxN repair_corners(BoxN b) {
    if (b.x1 > b.x2) {
        std::swap(b.x1, b.x2);
    }
    if (b.y1 > b.y2) {
        std::swap(b.y1, b.y2);
    }
    auto widen = [](double& lo, double& hi) {
        if (lo < hi) {
            return;
        }
        const double c = std::clamp(lo, 0.5 * kMinBoxExtent, 1.0 - 0.5 * kMinBoxExtent);
        lo = c - 0.5 * kMinBoxExtent;
        hi = c + 0.5 * kMinBoxExtent;
    };
    widen(b.x1, b.x2);
    widen(b.y1, b.y2);
    return b;
}

}  // namespace

std::string_view to_string(Pooling pooling) noexcept {
    return pooling == Pooling::GlobalAverage ? "global_average" : "flatten";
}

Pooling parse_pooling(std::string_view text) {
    if (text == "global_average") {
        return Pooling::GlobalAverage;
    }
    if (text == "flatten") {
        return Pooling::Flatten;
    }
    throw std::invalid_argument("unknown pooling '" + std::string(text) + "'");
}

std::string_view to_string(HeadKind kind) noexcept {
    return kind == HeadKind::Enforced ? "enforced" : "non_enforced";
}

int BackboneSpec::final_side() const {
    int side = canvas_side;
    for (std::size_t i = 0; i < channels.size(); ++i) {
        side /= 2;
    }
    return side;
}

int BackboneSpec::feature_dim() const {
    if (channels.empty()) {
        return 0;
    }
    const int c = channels.back();
    return pooling == Pooling::GlobalAverage ? c : c * final_side() * final_side();
}

void BackboneSpec::validate() const {
    if (channels.empty()) {
        throw std::invalid_argument("backbone needs at least one conv block");
    }
    if (std::any_of(channels.begin(), channels.end(), [](int c) { return c < 1; })) {
        throw std::invalid_argument("backbone channel counts must be positive");
    }
    if (canvas_side < 2 || final_side() < 1) {
        throw std::invalid_argument("canvas side " + std::to_string(canvas_side) + " is too small for " +
                                    std::to_string(channels.size()) + " pooling stages");
    }
}

std::string HeadSpec::key() const {
    if (!alpha) {
        return "free";
    }
    return kind == HeadKind::Enforced ? alpha->to_string() : alpha->to_string() + "~ne";
}

void HeadSpec::validate() const {
    if (kind == HeadKind::Enforced && !alpha) {
        throw std::invalid_argument("an enforced head needs an aspect ratio");
    }
    if (std::any_of(hidden.begin(), hidden.end(), [](int w) { return w < 1; })) {
        throw std::invalid_argument("head hidden widths must be positive");
    }
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
        throw std::invalid_argument("leaky slope must be in [0,1)");
    }
}

Backbone::Backbone(const BackboneSpec& spec, std::mt19937_64& rng) : spec_(spec) {
    spec_.validate();
    int in = Image::kChannels;
    for (std::size_t i = 0; i < spec_.channels.size(); ++i) {
        convs_.emplace_back(in, spec_.channels[i], "backbone.conv" + std::to_string(i));
        nn::init_uniform_fan_in(convs_.back().weight, in * 9, kRectifierGain, rng);
        in = spec_.channels[i];
    }
}

Matrix Backbone::forward(std::span<const Matrix> inputs, BackboneCache* cache) const {
    const auto n = static_cast<Eigen::Index>(inputs.size());
    Matrix features(spec_.feature_dim(), n);
    if (cache) {
        cache->samples.assign(inputs.size(), {});
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const Matrix& in = inputs[static_cast<std::size_t>(i)];
        if (in.rows() != Image::kChannels ||
            in.cols() != static_cast<Eigen::Index>(spec_.canvas_side) * spec_.canvas_side) {
            throw std::invalid_argument("backbone input must be 3 x " + std::to_string(spec_.canvas_side) + "^2");
        }
        Matrix act = in;
        int h = spec_.canvas_side;
        int w = spec_.canvas_side;
        for (const auto& conv : convs_) {
            Matrix pre = conv.forward(act, h, w);
            nn::PoolResult pooled = nn::max_pool2(nn::relu(pre), h, w);
            Matrix next = pooled.output;
            const int nh = pooled.out_height;
            const int nw = pooled.out_width;
            if (cache) {
                cache->samples[static_cast<std::size_t>(i)].push_back(
                    {std::move(act), std::move(pre), std::move(pooled), h, w});
            }
            act = std::move(next);
            h = nh;
            w = nw;
        }
        if (spec_.pooling == Pooling::GlobalAverage) {
            features.col(i) = act.rowwise().mean();
        } else {
            features.col(i) = act.reshaped();
        }
    }
    return features;
}

void Backbone::backward(const BackboneCache& cache, const Matrix& grad_features) {
    const int fs = spec_.final_side();
    const Eigen::Index channels = spec_.channels.back();
    for (std::size_t i = 0; i < cache.samples.size(); ++i) {
        const auto& blocks = cache.samples[i];
        const auto col = grad_features.col(static_cast<Eigen::Index>(i));
        Matrix grad;
        if (spec_.pooling == Pooling::GlobalAverage) {
            const Eigen::Index pixels = static_cast<Eigen::Index>(fs) * fs;
            grad = col.replicate(1, pixels) / static_cast<double>(pixels);
        } else {
            grad = col.reshaped(channels, static_cast<Eigen::Index>(fs) * fs);
        }
        for (std::size_t b = blocks.size(); b-- > 0;) {
            const auto& blk = blocks[b];
            Matrix g = nn::max_pool2_backward(blk.pool, grad, blk.height, blk.width);
            g = nn::relu_backward(blk.pre, g);
            if (b == 0) {
                // Input gradient is never needed.
                const Matrix cols = nn::im2col3x3(blk.input, blk.height, blk.width);
                convs_[b].weight.grad.noalias() += g * cols.transpose();
                convs_[b].bias.grad.col(0) += g.rowwise().sum();
            } else {
                grad = convs_[b].backward(blk.input, blk.height, blk.width, g);
            }
        }
    }
}

std::vector<nn::Parameter*> Backbone::parameters() {
    std::vector<nn::Parameter*> out;
    for (auto& c : convs_) {
        out.push_back(&c.weight);
        out.push_back(&c.bias);
    }
    return out;
}

std::vector<const nn::Parameter*> Backbone::parameters() const {
    std::vector<const nn::Parameter*> out;
    for (const auto& c : convs_) {
        out.push_back(&c.weight);
        out.push_back(&c.bias);
    }
    return out;
}

RegressionHead::RegressionHead(const HeadSpec& spec, int feature_dim, std::mt19937_64& rng) : spec_(spec) {
    spec_.validate();
    const std::string prefix = "head[" + spec_.key() + "].dense";
    int in = feature_dim;
    for (std::size_t i = 0; i <= spec_.hidden.size(); ++i) {
        const bool last = i == spec_.hidden.size();
        const int out = last ? spec_.arity() : spec_.hidden[i];
        layers_.emplace_back(in, out, prefix + std::to_string(i));
        nn::init_uniform_fan_in(layers_.back().weight, in, last ? kOutputGain : kRectifierGain, rng);
        in = out;
    }
}

Matrix RegressionHead::forward(const Matrix& features, HeadCache* cache) const {
    Matrix act = features;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Matrix pre = layers_[i].forward(act);
        Matrix next = i + 1 == layers_.size() ? nn::sigmoid(pre) : nn::leaky_relu(pre, spec_.leaky_slope);
        if (cache) {
            cache->inputs.push_back(std::move(act));
            cache->pre.push_back(std::move(pre));
        }
        act = std::move(next);
    }
    if (cache) {
        cache->output = act;
    }
    return act;
}

Matrix RegressionHead::backward(const HeadCache& cache, const Matrix& grad_output) {
    Matrix g = nn::sigmoid_backward(cache.output, grad_output);
    for (std::size_t i = layers_.size(); i-- > 0;) {
        if (i + 1 != layers_.size()) {
            g = nn::leaky_relu_backward(cache.pre[i], g, spec_.leaky_slope);
        }
        g = layers_[i].backward(cache.inputs[i], g);
    }
    return g;
}

std::vector<nn::Parameter*> RegressionHead::parameters() {
    std::vector<nn::Parameter*> out;
    for (auto& l : layers_) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    return out;
}

std::vector<const nn::Parameter*> RegressionHead::parameters() const {
    std::vector<const nn::Parameter*> out;
    for (const auto& l : layers_) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    return out;
}

CropModel::CropModel(const BackboneSpec& backbone, std::span<const HeadSpec> heads, std::uint64_t seed,
                     Normalization norm)
    : norm_(norm), seed_(seed) {
    std::mt19937_64 rng(rnd::splitmix64(seed));
    backbone_ = Backbone(backbone, rng);
    set_heads(heads, seed);
}

void CropModel::set_heads(std::span<const HeadSpec> heads, std::uint64_t seed) {
    if (heads.empty()) {
        throw std::invalid_argument("a crop model needs at least one head");
    }
    std::set<std::string> keys;
    int free_heads = 0;
    std::vector<AspectRatio> seen;
    for (const auto& h : heads) {
        h.validate();
        if (h.alpha) {
            if (std::find(seen.begin(), seen.end(), *h.alpha) != seen.end()) {
                throw std::invalid_argument("duplicate head ratio " + h.alpha->to_string());
            }
            seen.push_back(*h.alpha);
        } else if (++free_heads > 1) {
            throw std::invalid_argument("at most one aspect-free head is allowed");
        }
    }
    heads_.clear();
    for (const auto& h : heads) {
        add_head(h, seed);
    }
}

void CropModel::add_head(const HeadSpec& head, std::uint64_t seed) {
    head.validate();
    if (head.alpha ? head_index(*head.alpha).has_value() : free_head_index().has_value()) {
        throw std::invalid_argument("model already has a head for " + head.key());
    }
    std::mt19937_64 rng(head_seed(seed, head));
    heads_.emplace_back(head, backbone_.spec().feature_dim(), rng);
}

std::optional<std::size_t> CropModel::head_index(const AspectRatio& alpha) const {
    for (std::size_t i = 0; i < heads_.size(); ++i) {
        if (heads_[i].spec().alpha && *heads_[i].spec().alpha == alpha) {
            return i;
        }
    }
    return std::nullopt;
}

std::optional<std::size_t> CropModel::free_head_index() const {
    for (std::size_t i = 0; i < heads_.size(); ++i) {
        if (!heads_[i].spec().alpha) {
            return i;
        }
    }
    return std::nullopt;
}

std::vector<AspectRatio> CropModel::enforced_ratios() const {
    std::vector<AspectRatio> out;
    for (const auto& h : heads_) {
        if (h.spec().kind == HeadKind::Enforced) {
            out.push_back(*h.spec().alpha);
        }
    }
    return out;
}

std::vector<nn::Parameter*> CropModel::parameters() {
    auto out = backbone_.parameters();
    for (auto& h : heads_) {
        auto p = h.parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

std::vector<const nn::Parameter*> CropModel::parameters() const {
    auto out = backbone_.parameters();
    for (const auto& h : heads_) {
        auto p = h.parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

std::size_t CropModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) {
        n += static_cast<std::size_t>(p->value.size());
    }
    return n;
}

Matrix CropModel::to_input(const Image& canvas) const {
    const int side = canvas_side();
    if (canvas.width() != side || canvas.height() != side) {
        throw std::invalid_argument("canvas is " + std::to_string(canvas.width()) + "x" +
                                    std::to_string(canvas.height()) + ", model expects " + std::to_string(side) +
                                    "x" + std::to_string(side));
    }
    Matrix in(Image::kChannels, static_cast<Eigen::Index>(side) * side);
    const auto px = canvas.pixels();
    for (Eigen::Index p = 0; p < in.cols(); ++p) {
        for (int c = 0; c < Image::kChannels; ++c) {
            in(c, p) = (px[static_cast<std::size_t>(p * Image::kChannels + c)] - norm_.mean[c]) / norm_.stddev[c];
        }
    }
    return in;
}

ForwardResult forward_inputs(const CropModel& model, std::span<const Matrix> inputs) {
    ForwardResult r;
    r.features = model.backbone().forward(inputs, nullptr);
    for (const auto& h : model.heads()) {
        r.head_outputs.push_back(h.forward(r.features, nullptr));
    }
    return r;
}

ForwardResult forward(const CropModel& model, std::span<const Image> canvases) {
    std::vector<Matrix> inputs;
    inputs.reserve(canvases.size());
    for (const auto& c : canvases) {
        inputs.push_back(model.to_input(c));
    }
    return forward_inputs(model, inputs);
}

TrainingForward forward_for_training(const CropModel& model, std::span<const Matrix> inputs) {
    TrainingForward t;
    t.result.features = model.backbone().forward(inputs, &t.backbone);
    t.heads.resize(model.heads().size());
    for (std::size_t i = 0; i < model.heads().size(); ++i) {
        t.result.head_outputs.push_back(model.heads()[i].forward(t.result.features, &t.heads[i]));
    }
    return t;
}

void backward(CropModel& model, const TrainingForward& fwd, std::span<const Matrix> head_grads,
              bool update_backbone) {
    if (head_grads.size() != model.heads().size()) {
        throw std::invalid_argument("one gradient block per head is required");
    }
    Matrix grad_features = Matrix::Zero(fwd.result.features.rows(), fwd.result.features.cols());
    for (std::size_t i = 0; i < head_grads.size(); ++i) {
        if (head_grads[i].isZero(0.0)) {
            continue;
        }
        grad_features += model.heads()[i].backward(fwd.heads[i], head_grads[i]);
    }
    if (update_backbone) {
        model.backbone().backward(fwd.backbone, grad_features);
    }
}

EnforcedBoxParams params_from_output(const Eigen::Ref<const Eigen::VectorXd>& out, const AspectRatio& alpha) {
    if (out.size() != 3) {
        throw std::invalid_argument("enforced head output must have 3 values");
    }
    return EnforcedBoxParams{out(0), out(1), out(2), orientation_for(alpha)};
}

BoxN corners_from_output(const Eigen::Ref<const Eigen::VectorXd>& out, Frame frame) {
    if (out.size() != 4) {
        throw std::invalid_argument("non-enforced head output must have 4 values");
    }
    return repair_corners(BoxN{out(0), out(1), out(2), out(3), frame});
}

BoxN head_output_to_image_box(const RegressionHead& head, const Eigen::Ref<const Eigen::VectorXd>& out,
                              const CanvasMapping& mapping) {
    const auto& spec = head.spec();
    if (spec.kind == HeadKind::Enforced) {
        EnforcedBoxParams p = map_params_to_image(params_from_output(out, *spec.alpha), mapping);
        p.x_c = std::clamp(p.x_c, 0.0, 1.0);
        p.y_c = std::clamp(p.y_c, 0.0, 1.0);
        return enforce_transform(p, *spec.alpha, mapping.orig);
    }
    const BoxN canvas_box = corners_from_output(out, Frame::Canvas);
    return repair_corners(map_box(canvas_box, mapping, MapDirection::CanvasToImage));
}

std::vector<CropPrediction> predict_canvas(const CropModel& model, const Image& canvas, const CanvasMapping& mapping,
                                           std::span<const AspectRatio> requested) {
    if (requested.empty()) {
        throw std::invalid_argument("predict: no aspect ratios requested");
    }
    const ForwardResult fwd = forward(model, std::span<const Image>(&canvas, 1));
    const auto trained = model.enforced_ratios();
    std::vector<CropPrediction> out;
    out.reserve(requested.size());
    for (const auto& ratio : requested) {
        if (auto idx = model.head_index(ratio)) {
            out.push_back({ratio, head_output_to_image_box(model.heads()[*idx], fwd.head_outputs[*idx].col(0), mapping),
                           std::nullopt});
            continue;
        }
        if (trained.empty()) {
            throw std::invalid_argument("no head for " + ratio.to_string() + " and no enforced head to derive it from");
        }
        const AspectRatio source = closest_aspect(ratio.value(), trained).ratio;
        const auto idx = *model.head_index(source);
        const BoxN src_box = head_output_to_image_box(model.heads()[idx], fwd.head_outputs[idx].col(0), mapping);
        out.push_back({ratio, adjust_to_aspect(src_box, source, ratio, mapping.orig), source});
    }
    return out;
}

std::vector<CropPrediction> predict(const CropModel& model, const Image& image, std::span<const AspectRatio> requested) {
    const Letterboxed lb = letterbox(image, model.canvas_side());
    return predict_canvas(model, lb.canvas, lb.mapping, requested);
}

BoxN predict_free(const CropModel& model, const Image& image) {
    const auto idx = model.free_head_index();
    if (!idx) {
        throw std::invalid_argument("model has no aspect-free head");
    }
    const Letterboxed lb = letterbox(image, model.canvas_side());
    const ForwardResult fwd = forward(model, std::span<const Image>(&lb.canvas, 1));
    return head_output_to_image_box(model.heads()[*idx], fwd.head_outputs[*idx].col(0), lb.mapping);
}

CropModel replace_heads(const CropModel& model, std::span<const HeadSpec> heads, std::uint64_t seed) {
    CropModel out = model;
    out.set_heads(heads, seed);
    return out;
}

std::uint64_t backbone_checksum(const CropModel& model) {
    std::string bytes;
    for (const auto* p : model.backbone().parameters()) {
        bytes.append(p->name);
        bytes.append(reinterpret_cast<const char*>(p->value.data()),
                     static_cast<std::size_t>(p->value.size()) * sizeof(double));
    }
    return rnd::fnv1a(bytes);
}

}  // namespace aspectcrop
