#pragma once

#include "nste/nn/tensor.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace nste::nn {

/// Registers a parameter with PyTorch-style uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init.
int add_param(ParamSet& ps, const std::string& name, std::vector<int> shape, int fan_in, std::mt19937_64& rng);
int add_zero_param(ParamSet& ps, const std::string& name, std::vector<int> shape);

struct Conv2d {
    int weight = -1;  // (out, in, k, k)
    int bias = -1;    // (out)
    int in_ch = 0, out_ch = 0, kernel = 3, stride = 1, pad = 1;

    static Conv2d create(ParamSet& ps, const std::string& name, int in_ch, int out_ch, int kernel, int stride,
                         int pad, std::mt19937_64& rng);
    [[nodiscard]] int out_size(int n) const { return (n + 2 * pad - kernel) / stride + 1; }
    void forward(const ParamSet& ps, const Tensor& in, Tensor& out) const;
    /// d_in may be null when the input gradient is not needed.
    void backward(const ParamSet& ps, const Tensor& in, const Tensor& d_out, Tensor* d_in, GradSet& grads) const;
};

struct ConvTranspose2d {
    int weight = -1;  // (in, out, k, k)
    int bias = -1;    // (out)
    int in_ch = 0, out_ch = 0, kernel = 2, stride = 2, pad = 0;

    static ConvTranspose2d create(ParamSet& ps, const std::string& name, int in_ch, int out_ch, int kernel,
                                  int stride, int pad, std::mt19937_64& rng);
    [[nodiscard]] int out_size(int n) const { return (n - 1) * stride - 2 * pad + kernel; }
    void forward(const ParamSet& ps, const Tensor& in, Tensor& out) const;
    void backward(const ParamSet& ps, const Tensor& in, const Tensor& d_out, Tensor* d_in, GradSet& grads) const;
};

struct Linear {
    int weight = -1;  // (out, in)
    int bias = -1;    // (out)
    int in_features = 0, out_features = 0;

    static Linear create(ParamSet& ps, const std::string& name, int in_features, int out_features,
                         std::mt19937_64& rng);
    void forward(const ParamSet& ps, const Tensor& in, Tensor& out) const;
    void backward(const ParamSet& ps, const Tensor& in, const Tensor& d_out, Tensor* d_in, GradSet& grads) const;
};

/// 2x2, stride 2, floor semantics.
struct MaxPool2 {
    static void forward(const Tensor& in, Tensor& out, std::vector<std::int32_t>& argmax);
    static void backward(const Tensor& in, const Tensor& d_out, const std::vector<std::int32_t>& argmax, Tensor& d_in);
};

/// Non-overlapping factor x factor mean pooling (no gradient needed).
Tensor avg_pool(const Tensor& in, int factor);

void relu_inplace(Tensor& t);
/// d *= (out > 0)
void relu_backward(const Tensor& out, Tensor& d);
void sigmoid_inplace(Tensor& t);
/// d *= out * (1 - out)
void sigmoid_backward(const Tensor& out, Tensor& d);

/// Channel concatenation and its split adjoint.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& d, Tensor& da, Tensor& db);

void add_inplace(Tensor& dst, const Tensor& src);

}  // namespace nste::nn
