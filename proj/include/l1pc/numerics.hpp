#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "l1pc/errors.hpp"

namespace l1pc {

// Row-major dense matrix of 32-bit floats. All weight matrices and logit
// blocks use this; vectors are plain std::vector<float>.
struct Tensor2 {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<float> data;

    Tensor2() = default;
    Tensor2(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

    float& at(size_t i, size_t j) { return data[i * cols + j]; }
    float at(size_t i, size_t j) const { return data[i * cols + j]; }

    std::span<const float> row(size_t i) const { return {data.data() + i * cols, cols}; }
    std::span<float> row(size_t i) { return {data.data() + i * cols, cols}; }

    bool empty() const { return data.empty(); }
    size_t size() const { return data.size(); }

    bool same_shape(size_t r, size_t c) const { return rows == r && cols == c; }
};

// All kernels accumulate in 32-bit floats with a fixed left-to-right order
// over the contraction index, so any two call sites that evaluate the same
// expression on the same inputs produce bit-identical results.

inline Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.rows) {
        throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols) +
                         " vs " + std::to_string(b.rows) + ")");
    }
    Tensor2 out(a.rows, b.cols);
    for (size_t i = 0; i < a.rows; ++i) {
        for (size_t j = 0; j < b.cols; ++j) {
            float acc = 0.0f;
            for (size_t k = 0; k < a.cols; ++k) {
                acc += a.at(i, k) * b.at(k, j);
            }
            out.at(i, j) = acc;
        }
    }
    return out;
}

// y = x * W for a row vector x, W row-major [len(x) x cols].
inline std::vector<float> matvec(std::span<const float> x, const Tensor2& w) {
    if (x.size() != w.rows) {
        throw ShapeError("matvec: vector length " + std::to_string(x.size()) +
                         " vs matrix rows " + std::to_string(w.rows));
    }
    std::vector<float> y(w.cols);
    for (size_t j = 0; j < w.cols; ++j) {
        float acc = 0.0f;
        for (size_t i = 0; i < w.rows; ++i) {
            acc += x[i] * w.at(i, j);
        }
        y[j] = acc;
    }
    return y;
}

inline std::vector<float> rmsnorm(std::span<const float> x, std::span<const float> gain,
                                  float eps) {
    if (x.size() != gain.size() || x.empty()) {
        throw ShapeError("rmsnorm: input and gain sizes differ or are empty");
    }
    float ss = 0.0f;
    for (float v : x) ss += v * v;
    float inv = 1.0f / std::sqrt(ss / static_cast<float>(x.size()) + eps);
    std::vector<float> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = (x[i] * inv) * gain[i];
    return y;
}

inline std::vector<float> layernorm(std::span<const float> x, std::span<const float> gain,
                                    std::span<const float> bias, float eps) {
    if (x.size() != gain.size() || x.size() != bias.size() || x.empty()) {
        throw ShapeError("layernorm: parameter sizes differ or are empty");
    }
    float mean = 0.0f;
    for (float v : x) mean += v;
    mean /= static_cast<float>(x.size());
    float var = 0.0f;
    for (float v : x) var += (v - mean) * (v - mean);
    var /= static_cast<float>(x.size());
    float inv = 1.0f / std::sqrt(var + eps);
    std::vector<float> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = ((x[i] - mean) * inv) * gain[i] + bias[i];
    return y;
}

inline void softmax_row_inplace(std::span<float> x) {
    float m = x[0];
    for (float v : x) m = std::max(m, v);
    float sum = 0.0f;
    for (float& v : x) {
        v = std::exp(v - m);
        sum += v;
    }
    for (float& v : x) v /= sum;
}

inline std::vector<float> softmax_row(std::span<const float> x) {
    std::vector<float> y(x.begin(), x.end());
    softmax_row_inplace(y);
    return y;
}

// Rotates consecutive pairs (x[2i], x[2i+1]) by theta_i = position * base^(-2i/h).
// Angles use 64-bit arithmetic; the rotation itself stays in 32-bit floats.
inline void rope_rotate_inplace(std::span<float> x, size_t position, float base) {
    if (x.size() % 2 != 0) {
        throw ShapeError("rope_rotate: width must be even, got " + std::to_string(x.size()));
    }
    const double h = static_cast<double>(x.size());
    for (size_t i = 0; i < x.size() / 2; ++i) {
        double freq = std::pow(static_cast<double>(base), -2.0 * static_cast<double>(i) / h);
        double theta = static_cast<double>(position) * freq;
        float c = static_cast<float>(std::cos(theta));
        float s = static_cast<float>(std::sin(theta));
        float x0 = x[2 * i];
        float x1 = x[2 * i + 1];
        x[2 * i] = x0 * c - x1 * s;
        x[2 * i + 1] = x0 * s + x1 * c;
    }
}

inline std::vector<float> rope_rotate(std::span<const float> x, size_t position, float base) {
    std::vector<float> y(x.begin(), x.end());
    rope_rotate_inplace(y, position, base);
    return y;
}

inline float silu(float x) { return x / (1.0f + std::exp(-x)); }

inline float gelu(float x) {
    return 0.5f * x * (1.0f + std::erf(x * 0.7071067811865476f));
}

// Interleaved sine/cosine positional encoding: slot 2i holds
// sin(position * base^(-2i/d)), slot 2i+1 the matching cosine.
inline std::vector<float> sinusoidal_pe(size_t position, size_t d, float base) {
    if (d % 2 != 0) {
        throw ShapeError("sinusoidal_pe: dimension must be even, got " + std::to_string(d));
    }
    std::vector<float> pe(d);
    for (size_t i = 0; i < d / 2; ++i) {
        double freq = std::pow(static_cast<double>(base),
                               -2.0 * static_cast<double>(i) / static_cast<double>(d));
        double theta = static_cast<double>(position) * freq;
        pe[2 * i] = static_cast<float>(std::sin(theta));
        pe[2 * i + 1] = static_cast<float>(std::cos(theta));
    }
    return pe;
}

}  // namespace l1pc
