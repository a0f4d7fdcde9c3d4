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

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "aspectcrop/datasets.hpp"
#include "aspectcrop/evaluation.hpp"
#include "aspectcrop/model.hpp"
#include "aspectcrop/preprocess.hpp"

namespace {

using namespace aspectcrop;

CropModel desk_model() {
    std::vector<HeadSpec> heads;
    for (const auto& a : default_ratios()) heads.push_back(HeadSpec::enforced(a));
    return CropModel(BackboneSpec{}, heads, 1);
}

std::vector<Image> scenes(int n) {
    SyntheticSpec spec;
    std::mt19937_64 rng(5);
    std::vector<Image> out;
    for (int i = 0; i < n; ++i) out.push_back(render_scene(sample_scene(spec, rng)));
    return out;
}

void BM_Letterbox(benchmark::State& state) {
    const auto images = scenes(16);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(letterbox(images[i++ % images.size()], kDeskCanvasSide));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Letterbox);

// Batched forward pass of the five-head desk model; crops = images x heads.
void BM_DeskForward(benchmark::State& state) {
    const CropModel model = desk_model();
    std::vector<Image> canvases;
    for (const auto& img : scenes(static_cast<int>(state.range(0)))) {
        canvases.push_back(letterbox(img, model.canvas_side()).canvas);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(model, canvases));
    }
    const auto images = state.iterations() * state.range(0);
    state.SetItemsProcessed(images);
    state.counters["crops/s"] = benchmark::Counter(static_cast<double>(images * static_cast<std::int64_t>(model.heads().size())),
                                                   benchmark::Counter::kIsRate);
}
BENCHMARK(BM_DeskForward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
    const CropModel model = desk_model();
    const auto images = scenes(8);
    const auto ratios = default_ratios();
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(predict(model, images[i++ % images.size()], ratios));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMillisecond);

}  // namespace
