#pragma once

// Elementwise and SSIM reductions with optional analytic gradients. Templated so
// metrics (double) and training (float) run the same arithmetic; reductions
// always accumulate in double.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace nste::kernels {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Normalized 1-D taps of the 11-tap, sigma 1.5 SSIM window.
inline const std::array<double, kSsimWindow>& ssim_taps() {
    static const std::array<double, kSsimWindow> taps = [] {
        std::array<double, kSsimWindow> t{};
        double sum = 0.0;
        for (int i = 0; i < kSsimWindow; ++i) {
            const double d = i - kSsimWindow / 2;
            t[i] = std::exp(-0.5 * d * d / (kSsimSigma * kSsimSigma));
            sum += t[i];
        }
        for (double& v : t) v /= sum;
        return t;
    }();
    return taps;
}

/// mean |a - b|; grad_b += scale * d/db.
template <typename T>
double mean_abs_diff(const T* a, const T* b, std::size_t n, T* grad_b = nullptr, double scale = 1.0) {
    double sum = 0.0;
    const double g = scale / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(b[i]) - static_cast<double>(a[i]);
        sum += std::abs(d);
        if (grad_b && d != 0.0) grad_b[i] += static_cast<T>(d > 0.0 ? g : -g);
    }
    return sum / static_cast<double>(n);
}

/// mean (a - b)^2; grad_a/grad_b += scale * d/da, d/db.
template <typename T>
double mean_sq_diff(const T* a, const T* b, std::size_t n, T* grad_a = nullptr, T* grad_b = nullptr,
                    double scale = 1.0) {
    double sum = 0.0;
    const double g = 2.0 * scale / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(b[i]) - static_cast<double>(a[i]);
        sum += d * d;
        if (grad_b) grad_b[i] += static_cast<T>(g * d);
        if (grad_a) grad_a[i] -= static_cast<T>(g * d);
    }
    return sum / static_cast<double>(n);
}

namespace detail {

// 'valid' separable Gaussian filtering: (h, w) -> (h - 10, w - 10).
inline void ssim_filter_valid(const double* in, int h, int w, double* out, std::vector<double>& scratch) {
    const auto& g = ssim_taps();
    const int oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
    scratch.assign(static_cast<std::size_t>(oh) * w, 0.0);
    for (int y = 0; y < oh; ++y) {
        double* row = scratch.data() + static_cast<std::size_t>(y) * w;
        for (int k = 0; k < kSsimWindow; ++k) {
            const double* src = in + static_cast<std::size_t>(y + k) * w;
            const double gk = g[k];
            for (int x = 0; x < w; ++x) row[x] += gk * src[x];
        }
    }
    for (int y = 0; y < oh; ++y) {
        const double* row = scratch.data() + static_cast<std::size_t>(y) * w;
        double* dst = out + static_cast<std::size_t>(y) * ow;
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) s += g[k] * row[x + k];
            dst[x] = s;
        }
    }
}

// Adjoint of ssim_filter_valid: (h - 10, w - 10) -> (h, w).
inline void ssim_filter_adjoint(const double* in, int h, int w, double* out, std::vector<double>& scratch) {
    const auto& g = ssim_taps();
    const int oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
    scratch.assign(static_cast<std::size_t>(oh) * w, 0.0);
    for (int y = 0; y < oh; ++y) {
        const double* src = in + static_cast<std::size_t>(y) * ow;
        double* row = scratch.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < ow; ++x)
            for (int k = 0; k < kSsimWindow; ++k) row[x + k] += g[k] * src[x];
    }
    std::fill(out, out + static_cast<std::size_t>(h) * w, 0.0);
    for (int y = 0; y < oh; ++y) {
        const double* row = scratch.data() + static_cast<std::size_t>(y) * w;
        for (int k = 0; k < kSsimWindow; ++k) {
            double* dst = out + static_cast<std::size_t>(y + k) * w;
            const double gk = g[k];
            for (int x = 0; x < w; ++x) dst[x] += gk * row[x];
        }
    }
}

}  // namespace detail

/// Mean SSIM of one plane over all valid window positions. When grad_y is set,
/// grad_y += scale * dSSIM/dy.
template <typename T>
double ssim_plane(const T* x, const T* y, int h, int w, T* grad_y = nullptr, double scale = 1.0) {
    if (h < kSsimWindow || w < kSsimWindow) throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    const std::size_t n = static_cast<std::size_t>(h) * w;
    const int oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
    const std::size_t m = static_cast<std::size_t>(oh) * ow;

    std::vector<double> xd(n), yd(n), prod(n), scratch;
    for (std::size_t i = 0; i < n; ++i) {
        xd[i] = static_cast<double>(x[i]);
        yd[i] = static_cast<double>(y[i]);
    }
    std::vector<double> mx(m), my(m), sxx(m), syy(m), sxy(m);
    detail::ssim_filter_valid(xd.data(), h, w, mx.data(), scratch);
    detail::ssim_filter_valid(yd.data(), h, w, my.data(), scratch);
    for (std::size_t i = 0; i < n; ++i) prod[i] = xd[i] * xd[i];
    detail::ssim_filter_valid(prod.data(), h, w, sxx.data(), scratch);
    for (std::size_t i = 0; i < n; ++i) prod[i] = yd[i] * yd[i];
    detail::ssim_filter_valid(prod.data(), h, w, syy.data(), scratch);
    for (std::size_t i = 0; i < n; ++i) prod[i] = xd[i] * yd[i];
    detail::ssim_filter_valid(prod.data(), h, w, sxy.data(), scratch);

    std::vector<double> ca, cb, cc;
    if (grad_y) {
        ca.resize(m);
        cb.resize(m);
        cc.resize(m);
    }
    double total = 0.0;
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t p = 0; p < m; ++p) {
        const double ux = mx[p], uy = my[p];
        const double vx = sxx[p] - ux * ux;
        const double vy = syy[p] - uy * uy;
        const double cxy = sxy[p] - ux * uy;
        const double a1 = 2.0 * ux * uy + kSsimC1;
        const double a2 = 2.0 * cxy + kSsimC2;
        const double b1 = ux * ux + uy * uy + kSsimC1;
        const double b2 = vx + vy + kSsimC2;
        const double s = (a1 * a2) / (b1 * b2);
        total += s;
        if (grad_y) {
            const double d_muy = (2.0 * ux * a2) / (b1 * b2) - s * (2.0 * uy) / b1;
            const double d_vy = -s / b2;
            const double d_cxy = 2.0 * a1 / (b1 * b2);
            ca[p] = (d_muy - 2.0 * d_vy * uy - d_cxy * ux) * inv_m;
            cb[p] = 2.0 * d_vy * inv_m;
            cc[p] = d_cxy * inv_m;
        }
    }
    if (grad_y) {
        std::vector<double> fa(n), fb(n), fc(n);
        detail::ssim_filter_adjoint(ca.data(), h, w, fa.data(), scratch);
        detail::ssim_filter_adjoint(cb.data(), h, w, fb.data(), scratch);
        detail::ssim_filter_adjoint(cc.data(), h, w, fc.data(), scratch);
        for (std::size_t i = 0; i < n; ++i) {
            grad_y[i] += static_cast<T>(scale * (fa[i] + yd[i] * fb[i] + xd[i] * fc[i]));
        }
    }
    return total * inv_m;
}

/// Channel-averaged SSIM of planar (C, H, W) buffers.
template <typename T>
double ssim_planar(const T* x, const T* y, int channels, int h, int w, T* grad_y = nullptr, double scale = 1.0) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    double sum = 0.0;
    for (int c = 0; c < channels; ++c) {
        sum += ssim_plane(x + c * plane, y + c * plane, h, w, grad_y ? grad_y + c * plane : nullptr, scale / channels);
    }
    return sum / channels;
}

}  // namespace nste::kernels
