#include "nste/nn/layers.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nste;
using namespace nste::nn;

namespace {

Tensor random_tensor(int c, int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    Tensor t(c, h, w);
    for (float& v : t.v) v = u(rng);
    return t;
}

double dot(const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * b[i];
    return s;
}

// Naive zero-padded cross-correlation in double precision.
std::vector<double> conv_oracle(const ParamSet& ps, const Conv2d& L, const Tensor& in) {
    const auto& W = ps.tensors[L.weight].values;
    const auto& B = ps.tensors[L.bias].values;
    const int oh = L.out_size(in.h), ow = L.out_size(in.w), k = L.kernel;
    std::vector<double> out(static_cast<std::size_t>(L.out_ch) * oh * ow);
    for (int o = 0; o < L.out_ch; ++o)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double s = B[o];
                for (int i = 0; i < L.in_ch; ++i)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int iy = y * L.stride - L.pad + ky, ix = x * L.stride - L.pad + kx;
                            if (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w) continue;
                            s += double(W[((o * L.in_ch + i) * k + ky) * k + kx]) * in.v[(i * in.h + iy) * in.w + ix];
                        }
                out[(o * oh + y) * ow + x] = s;
            }
    return out;
}

// Naive transposed convolution (scatter form).
std::vector<double> deconv_oracle(const ParamSet& ps, const ConvTranspose2d& L, const Tensor& in) {
    const auto& W = ps.tensors[L.weight].values;
    const auto& B = ps.tensors[L.bias].values;
    const int oh = L.out_size(in.h), ow = L.out_size(in.w), k = L.kernel;
    std::vector<double> out(static_cast<std::size_t>(L.out_ch) * oh * ow);
    for (int o = 0; o < L.out_ch; ++o)
        for (std::size_t p = 0; p < static_cast<std::size_t>(oh) * ow; ++p) out[o * oh * ow + p] = B[o];
    for (int i = 0; i < L.in_ch; ++i)
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x)
                for (int o = 0; o < L.out_ch; ++o)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int oy = y * L.stride - L.pad + ky, ox = x * L.stride - L.pad + kx;
                            if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                            out[(o * oh + oy) * ow + ox] +=
                                double(W[((i * L.out_ch + o) * k + ky) * k + kx]) * in.v[(i * in.h + y) * in.w + x];
                        }
    return out;
}

template <class Layer, class Oracle>
void check_layer(const ParamSet& ps, const Layer& L, const Tensor& in, Oracle oracle) {
    Tensor out;
    L.forward(ps, in, out);
    const auto ref = oracle(ps, L, in);
    ASSERT_EQ(out.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(out.v[i], ref[i], 1e-4) << "output " << i;

    // The objective <layer(x), g> is linear in x and in each weight, so
    // gradients can be checked exactly against the oracle.
    const Tensor g = random_tensor(out.c, out.h, out.w, 77);
    Tensor d_in;
    GradSet grads = ps.zeros_like();
    L.backward(ps, in, g, &d_in, grads);
    auto objective = [&](const ParamSet& p, const Tensor& x) {
        const auto o = oracle(p, L, x);
        double s = 0;
        for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * g.v[i];
        return s;
    };
    const double base = objective(ps, in);
    ParamSet probe = ps;
    for (int which : {L.weight, L.bias}) {
        auto& vals = probe.tensors[which].values;
        for (std::size_t i = 0; i < vals.size(); i += std::max<std::size_t>(1, vals.size() / 25)) {
            const float keep = vals[i];
            vals[i] = keep + 1.0f;
            const double expect = objective(probe, in) - base;
            vals[i] = keep;
            EXPECT_NEAR(grads[which][i], expect, 1e-3 * std::max(1.0, std::abs(expect))) << ps.tensors[which].name << i;
        }
    }
    Tensor x = in;
    for (std::size_t i = 0; i < x.size(); i += std::max<std::size_t>(1, x.size() / 40)) {
        const float keep = x.v[i];
        x.v[i] = keep + 1.0f;
        const double expect = objective(ps, x) - base;
        x.v[i] = keep;
        EXPECT_NEAR(d_in.v[i], expect, 1e-3 * std::max(1.0, std::abs(expect))) << "input " << i;
    }
}

struct ConvCase {
    int in_ch, out_ch, kernel, stride, pad, h, w;
};

}  // namespace

class ConvOracle : public ::testing::TestWithParam<ConvCase> {};

TEST_P(ConvOracle, ForwardAndBackwardMatchNaive) {
    const auto c = GetParam();
    std::mt19937_64 rng(c.in_ch * 100 + c.out_ch * 10 + c.kernel);
    ParamSet ps;
    const auto L = Conv2d::create(ps, "conv", c.in_ch, c.out_ch, c.kernel, c.stride, c.pad, rng);
    check_layer(ps, L, random_tensor(c.in_ch, c.h, c.w, 5), conv_oracle);
}

INSTANTIATE_TEST_SUITE_P(Shapes, ConvOracle,
                         ::testing::Values(ConvCase{3, 8, 3, 1, 1, 9, 11},   // GEMM path
                                           ConvCase{8, 3, 3, 1, 1, 10, 7},   // direct small-output path
                                           ConvCase{5, 1, 5, 1, 2, 12, 9},   // direct, wider kernel
                                           ConvCase{4, 6, 3, 2, 1, 12, 12},  // strided
                                           ConvCase{6, 5, 1, 1, 0, 8, 8}));  // pointwise

TEST(ConvTranspose, ForwardAndBackwardMatchNaive) {
    std::mt19937_64 rng(3);
    ParamSet ps;
    const auto L = ConvTranspose2d::create(ps, "up", 5, 4, 2, 2, 0, rng);
    check_layer(ps, L, random_tensor(5, 6, 7, 6), deconv_oracle);
    ParamSet ps2;
    const auto L2 = ConvTranspose2d::create(ps2, "up4", 3, 2, 4, 4, 0, rng);
    check_layer(ps2, L2, random_tensor(3, 4, 5, 7), deconv_oracle);
}

TEST(Linear, ForwardAndBackward) {
    std::mt19937_64 rng(4);
    ParamSet ps;
    const auto L = Linear::create(ps, "fc", 6, 3, rng);
    const Tensor in = random_tensor(6, 1, 1, 8);
    Tensor out;
    L.forward(ps, in, out);
    const auto& W = ps.tensors[L.weight].values;
    for (int o = 0; o < 3; ++o) {
        double s = ps.tensors[L.bias].values[o];
        for (int i = 0; i < 6; ++i) s += double(W[o * 6 + i]) * in.v[i];
        EXPECT_NEAR(out.v[o], s, 1e-5);
    }
    Tensor g(3, 1, 1, 0.0f);
    g.v = {1.0f, -2.0f, 0.5f};
    Tensor d_in;
    GradSet grads = ps.zeros_like();
    L.backward(ps, in, g, &d_in, grads);
    for (int i = 0; i < 6; ++i) {
        double s = 0;
        for (int o = 0; o < 3; ++o) s += double(W[o * 6 + i]) * g.v[o];
        EXPECT_NEAR(d_in.v[i], s, 1e-5);
        EXPECT_NEAR(grads[L.weight][1 * 6 + i], -2.0 * in.v[i], 1e-5);
    }
    EXPECT_NEAR(grads[L.bias][2], 0.5, 1e-6);
}

TEST(MaxPool, SelectsMaximumAndRoutesGradient) {
    const Tensor in = random_tensor(2, 5, 6, 9);
    Tensor out;
    std::vector<std::int32_t> arg;
    MaxPool2::forward(in, out, arg);
    ASSERT_EQ(out.h, 2);
    ASSERT_EQ(out.w, 3);
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 3; ++x) {
                float m = -10;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) m = std::max(m, in.v[(c * 5 + 2 * y + dy) * 6 + 2 * x + dx]);
                EXPECT_EQ(out.v[(c * 2 + y) * 3 + x], m);
            }
    Tensor g(out.c, out.h, out.w, 1.0f), d_in;
    MaxPool2::backward(in, g, arg, d_in);
    double total = 0;
    for (float v : d_in.v) total += v;
    EXPECT_EQ(total, 12.0);
    EXPECT_NEAR(dot(d_in.v, in.v), dot(out.v, g.v), 1e-5);
}

TEST(Activations, ReluAndSigmoidBackward) {
    Tensor t(1, 1, 4);
    t.v = {-1.0f, 0.0f, 0.5f, 2.0f};
    Tensor r = t;
    relu_inplace(r);
    EXPECT_EQ(r.v, (std::vector<float>{0.0f, 0.0f, 0.5f, 2.0f}));
    Tensor d(1, 1, 4, 1.0f);
    relu_backward(r, d);
    EXPECT_EQ(d.v, (std::vector<float>{0.0f, 0.0f, 1.0f, 1.0f}));
    Tensor s = t;
    sigmoid_inplace(s);
    Tensor ds(1, 1, 4, 1.0f);
    sigmoid_backward(s, ds);
    for (int i = 0; i < 4; ++i) {
        const double x = t.v[i], sg = 1 / (1 + std::exp(-x));
        EXPECT_NEAR(s.v[i], sg, 1e-6);
        EXPECT_NEAR(ds.v[i], sg * (1 - sg), 1e-6);
    }
}

TEST(Channels, ConcatSplitRoundTrip) {
    const Tensor a = random_tensor(2, 4, 5, 10), b = random_tensor(3, 4, 5, 11);
    const Tensor c = concat_channels(a, b);
    ASSERT_EQ(c.c, 5);
    Tensor da, db;
    da.reshape_like(a);
    db.reshape_like(b);
    split_channels(c, da, db);
    EXPECT_EQ(da.v, a.v);
    EXPECT_EQ(db.v, b.v);
}

TEST(AvgPool, AveragesBlocks) {
    Tensor t(1, 4, 4);
    for (int i = 0; i < 16; ++i) t.v[i] = float(i);
    const Tensor p = avg_pool(t, 2);
    EXPECT_EQ(p.v, (std::vector<float>{2.5f, 4.5f, 10.5f, 12.5f}));
}
