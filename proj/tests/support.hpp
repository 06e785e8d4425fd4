#pragma once

#include "nste/image.hpp"
#include "nste/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nste::test {

inline ImagePlane random_image(int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    ImagePlane img(h, w);
    for (double& v : img.data()) v = u(rng);
    return img;
}

/// Smooth image (sum of low-frequency waves), values strictly inside (0, 1).
inline ImagePlane smooth_image(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ImagePlane img(h, w);
    for (int c = 0; c < kChannels; ++c) {
        const double a = u(rng) * 6, b = u(rng) * 6, fx = 0.05 + 0.1 * u(rng), fy = 0.05 + 0.1 * u(rng);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) img.at(c, y, x) = 0.5 + 0.35 * std::sin(a + fx * x) * std::cos(b + fy * y);
    }
    return img;
}

inline double max_abs_diff(const ImagePlane& a, const ImagePlane& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

inline double rel_err(double a, double b, double floor = 1e-12) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Brute-force SSIM straight from the window definition.
inline double ssim_oracle(const ImagePlane& x, const ImagePlane& y) {
    constexpr int k = 11;
    constexpr double sigma = 1.5, C1 = 1e-4, C2 = 9e-4;
    double g[k][k], gs = 0;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) gs += g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * sigma * sigma));
    double total = 0;
    int count = 0;
    for (int c = 0; c < 3; ++c)
        for (int y0 = 0; y0 + k <= x.height(); ++y0)
            for (int x0 = 0; x0 + k <= x.width(); ++x0) {
                double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                for (int i = 0; i < k; ++i)
                    for (int j = 0; j < k; ++j) {
                        const double w = g[i][j] / gs, a = x.at(c, y0 + i, x0 + j), b = y.at(c, y0 + i, x0 + j);
                        mx += w * a;
                        my += w * b;
                        sxx += w * a * a;
                        syy += w * b * b;
                        sxy += w * a * b;
                    }
                sxx -= mx * mx;
                syy -= my * my;
                sxy -= mx * my;
                total += ((2 * mx * my + C1) * (2 * sxy + C2)) / ((mx * mx + my * my + C1) * (sxx + syy + C2));
                ++count;
            }
    return total / count;
}

inline std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("nste_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

struct WeightCheck {
    std::string tensor;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel = 0.0;
};

/// Compares the analytic recon_loss gradient with central differences on a
/// seeded sample of weights whose gradient is at least `min_grad`. The network
/// is piecewise smooth (ReLU, clipping), so each weight is tried on a short
/// eps ladder and the closest central difference is kept. `floor` bounds the
/// relative-error denominator from below for gradients near float32 noise.
inline std::vector<WeightCheck> check_sampled_weights(const NeuralSte& net, const ModelParameters& p,
                                                      std::span<const PairedSample* const> batch, std::size_t count,
                                                      std::uint64_t seed, double min_grad = 1e-2,
                                                      double floor = 1e-12) {
    const LossWeights recon_only{1.0, 0.0, 0.0};
    nn::GradSet grads = p.params.zeros_like();
    loss_and_gradient(net, p, batch, recon_only, grads);
    auto loss = [&](const ModelParameters& q) {
        nn::GradSet scratch = q.params.zeros_like();
        return loss_and_gradient(net, q, batch, recon_only, scratch).recon;
    };
    std::vector<std::pair<std::size_t, std::size_t>> pool;
    for (std::size_t ti = 0; ti < grads.size(); ++ti)
        for (std::size_t i = 0; i < grads[ti].size(); ++i)
            if (std::abs(grads[ti][i]) >= min_grad) pool.emplace_back(ti, i);
    std::mt19937_64 rng(seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(pool.size(), count));

    std::vector<WeightCheck> out;
    for (const auto& [ti, i] : pool) {
        WeightCheck wc{p.params.tensors[ti].name, i, grads[ti][i], 0.0, 1e300};
        const float w0 = p.params.tensors[ti].values[i];
        for (float eps : {1e-3f, 3e-4f, 1e-4f}) {
            ModelParameters q = p;
            q.params.tensors[ti].values[i] = w0 + eps;
            const double lp = loss(q);
            q.params.tensors[ti].values[i] = w0 - eps;
            const double lm = loss(q);
            const double fd = (lp - lm) / (double(w0 + eps) - double(w0 - eps));
            const double r = rel_err(fd, wc.analytic, floor);
            if (r < wc.rel) {
                wc.rel = r;
                wc.numeric = fd;
            }
        }
        out.push_back(wc);
    }
    return out;
}

}  // namespace nste::test
