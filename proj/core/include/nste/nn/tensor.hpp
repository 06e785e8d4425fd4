#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace nste::nn {

/// Single-sample activation map in (C, H, W) layout.
struct Tensor {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int channels, int height, int width, float fill = 0.0f)
        : c(channels), h(height), w(width), v(static_cast<std::size_t>(channels) * height * width, fill) {}

    [[nodiscard]] std::size_t size() const { return v.size(); }
    [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    float* data() { return v.data(); }
    [[nodiscard]] const float* data() const { return v.data(); }
    void zero() { std::fill(v.begin(), v.end(), 0.0f); }
    void reshape_like(const Tensor& o) {
        c = o.c;
        h = o.h;
        w = o.w;
        v.assign(o.v.size(), 0.0f);
    }
    void resize(int channels, int height, int width) {
        c = channels;
        h = height;
        w = width;
        v.assign(static_cast<std::size_t>(channels) * height * width, 0.0f);
    }
    [[nodiscard]] bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

struct ParamTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
};

/// Ordered, named parameter arrays. Gradients and optimizer moments use the
/// same ordering.
struct ParamSet {
    std::vector<ParamTensor> tensors;

    [[nodiscard]] int index_of(const std::string& name) const;
    [[nodiscard]] std::size_t total_count() const;
    [[nodiscard]] bool all_finite() const;
    [[nodiscard]] std::vector<std::vector<float>> zeros_like() const;
};

using GradSet = std::vector<std::vector<float>>;

}  // namespace nste::nn
