#include "nste/imaging.hpp"

#include "nste/errors.hpp"
#include "nste/kernels/warp_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace nste {

namespace {

Size resolve(Size requested, const ImagePlane& img) {
    return (requested.width == 0 && requested.height == 0) ? img.size() : requested;
}

void require_output(Size s) {
    if (s.width < kMinImageSide || s.height < kMinImageSide) {
        throw std::invalid_argument("warp: output size must be at least 8x8");
    }
}

int reflect101(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

}  // namespace

ImagePlane warp_image(const ImagePlane& img, const Homography& H, Size out_size) {
    require_output(out_size);
    const auto inv = invert3(H.matrix());
    ImagePlane out(out_size.height, out_size.width);
    kernels::warp_forward(img.data().data(), kChannels, img.height(), img.width(), out.data().data(), out_size.height,
                          out_size.width, inv);
    return out;
}

WarpGradients warp_image_backward(const ImagePlane& img, const Homography& H, Size out_size,
                                  const std::vector<double>& d_out) {
    require_output(out_size);
    if (d_out.size() != static_cast<std::size_t>(kChannels) * out_size.width * out_size.height) {
        throw DimensionMismatch("warp_image_backward: upstream gradient has the wrong size");
    }
    const auto inv = invert3(H.matrix());
    WarpGradients g;
    g.d_image.assign(img.numel(), 0.0);
    kernels::Map3 d_inv{};
    kernels::warp_backward(img.data().data(), kChannels, img.height(), img.width(), d_out.data(), out_size.height,
                           out_size.width, inv, g.d_image.data(), &d_inv);
    const auto d_h = kernels::inverse_map_grad_to_forward(inv, d_inv);
    for (int i = 0; i < 8; ++i) g.d_params[i] = d_h[i];
    return g;
}

Homography::Matrix normalized_from_pixel(Size s) {
    return {2.0 / s.width, 0, 1.0 / s.width - 1.0, 0, 2.0 / s.height, 1.0 / s.height - 1.0, 0, 0, 1};
}

Homography::Matrix pixel_from_normalized(Size s) {
    return {s.width / 2.0, 0, (s.width - 1) / 2.0, 0, s.height / 2.0, (s.height - 1) / 2.0, 0, 0, 1};
}

Homography normalized_to_pixel(const Homography& normalized, Size src, Size dst) {
    return Homography(matmul3(pixel_from_normalized(dst), matmul3(normalized.matrix(), normalized_from_pixel(src))));
}

ImagePlane resize_bilinear(const ImagePlane& img, Size out_size) {
    return warp_image(img, normalized_to_pixel(Homography::identity(), img.size(), out_size), out_size);
}

ImagePlane apply_blur(const ImagePlane& img, const BlurSpec& blur) {
    if (blur.kernel_size < 1 || blur.kernel_size % 2 == 0) {
        throw std::invalid_argument("apply_blur: kernel_size must be odd, got " + std::to_string(blur.kernel_size));
    }
    const int h = img.height(), w = img.width();
    ImagePlane out(h, w);

    if (!blur.size_map.empty()) {
        if (blur.size_map.size() != img.plane_size()) {
            throw DimensionMismatch("apply_blur: size_map must have H*W entries");
        }
        const double base_sigma = blur.effective_sigma();
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int k = blur.size_map[static_cast<std::size_t>(y) * w + x];
                if (k < 1 || k % 2 == 0) throw std::invalid_argument("apply_blur: size_map entries must be odd");
                const double sigma = base_sigma * k / std::max(1, blur.kernel_size);
                const auto taps = BlurSpec::gaussian_taps(k, sigma);
                const int r = k / 2;
                for (int c = 0; c < kChannels; ++c) {
                    double acc = 0.0;
                    for (int dy = -r; dy <= r; ++dy) {
                        const int yy = reflect101(y + dy, h);
                        for (int dx = -r; dx <= r; ++dx) {
                            acc += taps[dy + r] * taps[dx + r] * img.at(c, yy, reflect101(x + dx, w));
                        }
                    }
                    out.at(c, y, x) = acc;
                }
            }
        }
        return out;
    }

    if (blur.kernel_size == 1) return img;
    const auto taps = BlurSpec::gaussian_taps(blur.kernel_size, blur.effective_sigma());
    const int r = blur.kernel_size / 2;
    std::vector<double> tmp(img.plane_size());
    for (int c = 0; c < kChannels; ++c) {
        const auto src = img.channel(c);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int k = -r; k <= r; ++k) acc += taps[k + r] * src[static_cast<std::size_t>(y) * w + reflect101(x + k, w)];
                tmp[static_cast<std::size_t>(y) * w + x] = acc;
            }
        }
        auto dst = out.channel(c);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int k = -r; k <= r; ++k) acc += taps[k + r] * tmp[static_cast<std::size_t>(reflect101(y + k, h)) * w + x];
                dst[static_cast<std::size_t>(y) * w + x] = acc;
            }
        }
    }
    return out;
}

CaptureTrace simulate_capture_trace(const ImagePlane& J, const EnvelopeParams& env, Size capture_size) {
    env.validate();
    if (!env.t_base.empty()) require_same_shape(J, env.t_base, "simulate_capture(t_base)");
    if (!env.A_base.empty()) require_same_shape(J, env.A_base, "simulate_capture(A_base)");
    const Size out_size = resolve(capture_size, J);
    require_output(out_size);

    CaptureTrace tr;
    tr.blurred = apply_blur(J, env.blur);

    tr.transmittance = env.t_base.empty() ? ImagePlane(J.height(), J.width(), 1.0) : env.t_base;
    for (double& v : tr.transmittance.data()) v = std::clamp(env.k_t * v, kMinTransmittance, 1.0);
    tr.reflectance = env.A_base.empty() ? ImagePlane(J.height(), J.width(), 0.0) : env.A_base;
    for (double& v : tr.reflectance.data()) v *= env.k_A;

    // Gaussian and Poisson streams are seeded independently so that either can
    // be disabled without shifting the other.
    std::mt19937_64 gauss_rng(env.noise.seed);
    std::mt19937_64 poisson_rng(env.noise.seed ^ 0x9E3779B97F4A7C15ULL);

    tr.canonical = ImagePlane(J.height(), J.width());
    {
        auto dst = tr.canonical.data();
        const auto jb = tr.blurred.data();
        const auto t = tr.transmittance.data();
        const auto a = tr.reflectance.data();
        std::normal_distribution<double> normal(0.0, env.noise.gaussian_sigma > 0 ? env.noise.gaussian_sigma : 1.0);
        for (std::size_t i = 0; i < dst.size(); ++i) {
            double v = env.L * jb[i] * t[i];
            if (env.noise.gaussian_sigma > 0.0) v += normal(gauss_rng);
            dst[i] = std::clamp(v, 0.0, 1.0) + a[i];
        }
    }

    tr.captured = warp_image(tr.canonical, env.H, out_size);
    if (env.noise.poisson_scale > 0.0) {
        const double s = env.noise.poisson_scale;
        for (double& v : tr.captured.data()) {
            const double mean = std::max(v, 0.0) * s;
            if (mean <= 0.0) {
                v = 0.0;
                continue;
            }
            std::poisson_distribution<long long> poisson(mean);
            v = static_cast<double>(poisson(poisson_rng)) / s;
        }
    }
    tr.captured.clip01();
    return tr;
}

ImagePlane simulate_capture(const ImagePlane& J, const EnvelopeParams& env, Size capture_size) {
    return simulate_capture_trace(J, env, capture_size).captured;
}

ImagePlane dehaze_inverse(const ImagePlane& I_warped, const ImagePlane& A, const ImagePlane& t) {
    require_same_shape(I_warped, A, "dehaze_inverse(A)");
    require_same_shape(I_warped, t, "dehaze_inverse(t)");
    ImagePlane out(I_warped.height(), I_warped.width());
    const auto i = I_warped.data();
    const auto a = A.data();
    const auto tt = t.data();
    auto o = out.data();
    for (std::size_t k = 0; k < o.size(); ++k) {
        if (!(tt[k] >= kMinTransmittance - 1e-12 && tt[k] <= 1.0)) {
            throw std::invalid_argument("dehaze_inverse: transmittance must be clamped to [0.01, 1]");
        }
        o[k] = std::clamp((i[k] - a[k]) / tt[k], 0.0, 1.0);
    }
    return out;
}

}  // namespace nste
