#pragma once

// Bilinear homography resampling with zero padding, shared by the simulator
// (double) and the attack model (float).

#include <array>
#include <cmath>

namespace nste::kernels {

using Map3 = std::array<double, 9>;

namespace detail {

template <typename T>
inline T fetch(const T* plane, int h, int w, int y, int x) {
    return (x >= 0 && x < w && y >= 0 && y < h) ? plane[y * w + x] : T(0);
}

}  // namespace detail

/// dst(c, y, x) = bilinear(src(c), inv_map * (x, y, 1)); inv_map sends output
/// pixel coordinates to source pixel coordinates.
template <typename T>
void warp_forward(const T* src, int channels, int src_h, int src_w, T* dst, int out_h, int out_w,
                  const Map3& inv_map) {
    const auto& m = inv_map;
    const std::size_t src_plane = static_cast<std::size_t>(src_h) * src_w;
    const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const double w = m[6] * x + m[7] * y + m[8];
            const double u = (m[0] * x + m[1] * y + m[2]) / w;
            const double v = (m[3] * x + m[4] * y + m[5]) / w;
            const std::size_t o = static_cast<std::size_t>(y) * out_w + x;
            if (!(u > -1.0 && u < src_w && v > -1.0 && v < src_h)) {
                for (int c = 0; c < channels; ++c) dst[c * out_plane + o] = T(0);
                continue;
            }
            const int x0 = static_cast<int>(std::floor(u));
            const int y0 = static_cast<int>(std::floor(v));
            const T fx = static_cast<T>(u - x0);
            const T fy = static_cast<T>(v - y0);
            for (int c = 0; c < channels; ++c) {
                const T* p = src + c * src_plane;
                const T top = (T(1) - fx) * detail::fetch(p, src_h, src_w, y0, x0) +
                              fx * detail::fetch(p, src_h, src_w, y0, x0 + 1);
                const T bot = (T(1) - fx) * detail::fetch(p, src_h, src_w, y0 + 1, x0) +
                              fx * detail::fetch(p, src_h, src_w, y0 + 1, x0 + 1);
                dst[c * out_plane + o] = (T(1) - fy) * top + fy * bot;
            }
        }
    }
}

/// Backward pass of warp_forward. grad_src (accumulated, may be null) receives
/// dL/dsrc; grad_map (accumulated, may be null) receives dL/d(inv_map).
template <typename T>
void warp_backward(const T* src, int channels, int src_h, int src_w, const T* grad_out, int out_h, int out_w,
                   const Map3& inv_map, T* grad_src, Map3* grad_map) {
    const auto& m = inv_map;
    const std::size_t src_plane = static_cast<std::size_t>(src_h) * src_w;
    const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
    Map3 gm{};
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const double w = m[6] * x + m[7] * y + m[8];
            const double u = (m[0] * x + m[1] * y + m[2]) / w;
            const double v = (m[3] * x + m[4] * y + m[5]) / w;
            if (!(u > -1.0 && u < src_w && v > -1.0 && v < src_h)) continue;
            const std::size_t o = static_cast<std::size_t>(y) * out_w + x;
            const int x0 = static_cast<int>(std::floor(u));
            const int y0 = static_cast<int>(std::floor(v));
            const double fx = u - x0;
            const double fy = v - y0;
            double gu = 0.0, gv = 0.0;
            for (int c = 0; c < channels; ++c) {
                const T* p = src + c * src_plane;
                const double g = grad_out[c * out_plane + o];
                if (g == 0.0) continue;
                const double i00 = detail::fetch(p, src_h, src_w, y0, x0);
                const double i01 = detail::fetch(p, src_h, src_w, y0, x0 + 1);
                const double i10 = detail::fetch(p, src_h, src_w, y0 + 1, x0);
                const double i11 = detail::fetch(p, src_h, src_w, y0 + 1, x0 + 1);
                if (grad_map) {
                    gu += g * ((1.0 - fy) * (i01 - i00) + fy * (i11 - i10));
                    gv += g * ((1.0 - fx) * (i10 - i00) + fx * (i11 - i01));
                }
                if (grad_src) {
                    T* q = grad_src + c * src_plane;
                    auto add = [&](int yy, int xx, double wgt) {
                        if (xx >= 0 && xx < src_w && yy >= 0 && yy < src_h) q[yy * src_w + xx] += static_cast<T>(g * wgt);
                    };
                    add(y0, x0, (1.0 - fx) * (1.0 - fy));
                    add(y0, x0 + 1, fx * (1.0 - fy));
                    add(y0 + 1, x0, (1.0 - fx) * fy);
                    add(y0 + 1, x0 + 1, fx * fy);
                }
            }
            if (grad_map && (gu != 0.0 || gv != 0.0)) {
                const double iw = 1.0 / w;
                gm[0] += gu * x * iw;
                gm[1] += gu * y * iw;
                gm[2] += gu * iw;
                gm[3] += gv * x * iw;
                gm[4] += gv * y * iw;
                gm[5] += gv * iw;
                const double gw = -(gu * u + gv * v) * iw;
                gm[6] += gw * x;
                gm[7] += gw * y;
                gm[8] += gw;
            }
        }
    }
    if (grad_map) {
        for (int i = 0; i < 9; ++i) (*grad_map)[i] += gm[i];
    }
}

/// Given M = inv(H) and G = dL/dM, returns dL/dH = -M^T G M^T.
inline Map3 inverse_map_grad_to_forward(const Map3& inv_map, const Map3& grad_inv) {
    Map3 tmp{}, out{};
    // tmp = G * M^T
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            tmp[r * 3 + c] = grad_inv[r * 3] * inv_map[c * 3] + grad_inv[r * 3 + 1] * inv_map[c * 3 + 1] +
                             grad_inv[r * 3 + 2] * inv_map[c * 3 + 2];
    // out = -M^T * tmp
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            out[r * 3 + c] = -(inv_map[r] * tmp[c] + inv_map[3 + r] * tmp[3 + c] + inv_map[6 + r] * tmp[6 + c]);
    return out;
}

}  // namespace nste::kernels
