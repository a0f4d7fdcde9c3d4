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

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

// Minimal layers with hand-written backward passes. Activations of one sample
// are (channels x pixels) column-major matrices, i.e. channel-interleaved.
// Dense layers work on (features x batch) matrices.
namespace aspectcrop::nn {

using Matrix = Eigen::MatrixXd;

struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}
};

/// Uniform in [-bound, bound] with bound = sqrt(gain / fan_in).
void init_uniform_fan_in(Parameter& p, int fan_in, double gain, std::mt19937_64& rng);

/// 3x3 convolution, stride 1, zero padding 1.
class Conv3x3 {
public:
    Conv3x3() = default;
    Conv3x3(int in_channels, int out_channels, const std::string& name);

    int in_channels() const noexcept { return in_; }
    int out_channels() const noexcept { return out_; }

    Matrix forward(const Matrix& input, int height, int width) const;
    /// Accumulates parameter gradients and returns d(loss)/d(input).
    Matrix backward(const Matrix& input, int height, int width, const Matrix& grad_output);

    Parameter weight;  // out x (in * 9)
    Parameter bias;    // out x 1

private:
    int in_ = 0;
    int out_ = 0;
};

Matrix im2col3x3(const Matrix& input, int height, int width);
void col2im3x3_add(const Matrix& cols, int height, int width, Matrix& grad_input);

struct PoolResult {
    Matrix output;
    std::vector<int> argmax;  // flat source pixel per output element, -1 if none
    int out_height = 0;
    int out_width = 0;
};

/// 2x2 max pool with stride 2; odd trailing rows/columns are dropped.
PoolResult max_pool2(const Matrix& input, int height, int width);
Matrix max_pool2_backward(const PoolResult& pooled, const Matrix& grad_output, int height, int width);

class Dense {
public:
    Dense() = default;
    Dense(int in_features, int out_features, const std::string& name);

    int in_features() const noexcept { return in_; }
    int out_features() const noexcept { return out_; }

    Matrix forward(const Matrix& input) const;
    Matrix backward(const Matrix& input, const Matrix& grad_output);

    Parameter weight;  // out x in
    Parameter bias;    // out x 1

private:
    int in_ = 0;
    int out_ = 0;
};

Matrix relu(const Matrix& x);
Matrix relu_backward(const Matrix& pre, const Matrix& grad);
Matrix leaky_relu(const Matrix& x, double slope);
Matrix leaky_relu_backward(const Matrix& pre, const Matrix& grad, double slope);
Matrix sigmoid(const Matrix& x);
/// Takes the sigmoid output, not its input.
Matrix sigmoid_backward(const Matrix& out, const Matrix& grad);

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam over a fixed parameter list. The list must outlive the optimizer and
/// keep its order between steps.
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig config);

    void step();
    void zero_grad();
    std::int64_t steps_taken() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return config_; }

private:
    std::vector<Parameter*> params_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    AdamConfig config_;
    std::int64_t t_ = 0;
};

}  // namespace aspectcrop::nn
