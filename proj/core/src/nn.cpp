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

#include "aspectcrop/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "aspectcrop/random.hpp"

namespace aspectcrop::nn {

void init_uniform_fan_in(Parameter& p, int fan_in, double gain, std::mt19937_64& rng) {
    const double bound = std::sqrt(gain / fan_in);
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        p.value.data()[i] = rnd::uniform(rng, -bound, bound);
    }
    p.grad.setZero();
}

Conv3x3::Conv3x3(int in_channels, int out_channels, const std::string& name)
    : weight(name + ".weight", out_channels, in_channels * 9), bias(name + ".bias", out_channels, 1),
      in_(in_channels), out_(out_channels) {}

Matrix im2col3x3(const Matrix& input, int height, int width) {
    const auto channels = input.rows();
    Matrix cols = Matrix::Zero(channels * 9, static_cast<Eigen::Index>(height) * width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Eigen::Index p = static_cast<Eigen::Index>(y) * width + x;
            double* dst = cols.col(p).data();
            for (int ky = 0; ky < 3; ++ky) {
                const int sy = y + ky - 1;
                if (sy < 0 || sy >= height) {
                    continue;
                }
                for (int kx = 0; kx < 3; ++kx) {
                    const int sx = x + kx - 1;
                    if (sx < 0 || sx >= width) {
                        continue;
                    }
                    const double* src = input.col(static_cast<Eigen::Index>(sy) * width + sx).data();
                    const int k = ky * 3 + kx;
                    for (Eigen::Index c = 0; c < channels; ++c) {
                        dst[c * 9 + k] = src[c];
                    }
                }
            }
        }
    }
    return cols;
}

void col2im3x3_add(const Matrix& cols, int height, int width, Matrix& grad_input) {
    const auto channels = grad_input.rows();
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double* src = cols.col(static_cast<Eigen::Index>(y) * width + x).data();
            for (int ky = 0; ky < 3; ++ky) {
                const int sy = y + ky - 1;
                if (sy < 0 || sy >= height) {
                    continue;
                }
                for (int kx = 0; kx < 3; ++kx) {
                    const int sx = x + kx - 1;
                    if (sx < 0 || sx >= width) {
                        continue;
                    }
                    double* dst = grad_input.col(static_cast<Eigen::Index>(sy) * width + sx).data();
                    const int k = ky * 3 + kx;
                    for (Eigen::Index c = 0; c < channels; ++c) {
                        dst[c] += src[c * 9 + k];
                    }
                }
            }
        }
    }
}

Matrix Conv3x3::forward(const Matrix& input, int height, int width) const {
    if (input.rows() != in_ || input.cols() != static_cast<Eigen::Index>(height) * width) {
        throw std::invalid_argument("conv input shape mismatch for " + weight.name);
    }
    Matrix out = weight.value * im2col3x3(input, height, width);
    out.colwise() += bias.value.col(0);
    return out;
}

Matrix Conv3x3::backward(const Matrix& input, int height, int width, const Matrix& grad_output) {
    const Matrix cols = im2col3x3(input, height, width);
    weight.grad.noalias() += grad_output * cols.transpose();
    bias.grad.col(0) += grad_output.rowwise().sum();
    const Matrix grad_cols = weight.value.transpose() * grad_output;
    Matrix grad_input = Matrix::Zero(input.rows(), input.cols());
    col2im3x3_add(grad_cols, height, width, grad_input);
    return grad_input;
}

PoolResult max_pool2(const Matrix& input, int height, int width) {
    PoolResult r;
    r.out_height = height / 2;
    r.out_width = width / 2;
    const auto channels = input.rows();
    const Eigen::Index out_pixels = static_cast<Eigen::Index>(r.out_height) * r.out_width;
    r.output = Matrix::Zero(channels, out_pixels);
    r.argmax.assign(static_cast<std::size_t>(channels * out_pixels), -1);
    for (int oy = 0; oy < r.out_height; ++oy) {
        for (int ox = 0; ox < r.out_width; ++ox) {
            const Eigen::Index q = static_cast<Eigen::Index>(oy) * r.out_width + ox;
            const int p00 = (2 * oy) * width + 2 * ox;
            const int candidates[4] = {p00, p00 + 1, p00 + width, p00 + width + 1};
            for (Eigen::Index c = 0; c < channels; ++c) {
                int best = candidates[0];
                double best_v = input(c, best);
                for (int i = 1; i < 4; ++i) {
                    const double v = input(c, candidates[i]);
                    if (v > best_v) {
                        best_v = v;
                        best = candidates[i];
                    }
                }
                r.output(c, q) = best_v;
                r.argmax[static_cast<std::size_t>(q * channels + c)] = best;
            }
        }
    }
    return r;
}

Matrix max_pool2_backward(const PoolResult& pooled, const Matrix& grad_output, int height, int width) {
    const auto channels = grad_output.rows();
    Matrix grad_input = Matrix::Zero(channels, static_cast<Eigen::Index>(height) * width);
    for (Eigen::Index q = 0; q < grad_output.cols(); ++q) {
        for (Eigen::Index c = 0; c < channels; ++c) {
            grad_input(c, pooled.argmax[static_cast<std::size_t>(q * channels + c)]) += grad_output(c, q);
        }
    }
    return grad_input;
}

Dense::Dense(int in_features, int out_features, const std::string& name)
    : weight(name + ".weight", out_features, in_features), bias(name + ".bias", out_features, 1),
      in_(in_features), out_(out_features) {}

Matrix Dense::forward(const Matrix& input) const {
    if (input.rows() != in_) {
        throw std::invalid_argument("dense input has " + std::to_string(input.rows()) + " features, " +
                                    weight.name + " expects " + std::to_string(in_));
    }
    // Aligned temporaries keep Eigen on the same kernel for every column.
    Matrix out(out_, input.cols());
    Eigen::VectorXd x(in_);
    Eigen::VectorXd y(out_);
    for (Eigen::Index j = 0; j < input.cols(); ++j) {
        x = input.col(j);
        y.noalias() = weight.value * x;
        out.col(j) = y;
    }
    out.colwise() += bias.value.col(0);
    return out;
}

Matrix Dense::backward(const Matrix& input, const Matrix& grad_output) {
    weight.grad.noalias() += grad_output * input.transpose();
    bias.grad.col(0) += grad_output.rowwise().sum();
    return weight.value.transpose() * grad_output;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& pre, const Matrix& grad) {
    return (pre.array() > 0.0).select(grad, 0.0);
}

Matrix leaky_relu(const Matrix& x, double slope) { return (x.array() > 0.0).select(x, slope * x); }

Matrix leaky_relu_backward(const Matrix& pre, const Matrix& grad, double slope) {
    return (pre.array() > 0.0).select(grad, slope * grad);
}

// Scalar exp: the packet version rounds differently from its scalar tail.
Matrix sigmoid(const Matrix& x) {
    return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Matrix sigmoid_backward(const Matrix& out, const Matrix& grad) {
    return (grad.array() * out.array() * (1.0 - out.array())).matrix();
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    if (!(config_.learning_rate >= 0.0)) {
        throw std::invalid_argument("learning rate must be non-negative");
    }
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto* p : params_) {
        m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = *params_[i];
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grad.cwiseAbs2();
        p.value.array() -= config_.learning_rate * (m_[i].array() / c1) /
                           ((v_[i].array() / c2).sqrt() + config_.epsilon);
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) {
        p->grad.setZero();
    }
}

}  // namespace aspectcrop::nn
