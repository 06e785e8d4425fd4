#include "nste/nn/layers.hpp"

#include "nste/errors.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nste::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

std::vector<float>& scratch_a() {
    thread_local std::vector<float> buf;
    return buf;
}

std::vector<float>& scratch_b() {
    thread_local std::vector<float> buf;
    return buf;
}

float* reserve(std::vector<float>& buf, std::size_t n) {
    if (buf.size() < n) buf.resize(n);
    return buf.data();
}

// col[(c, ky, kx), (oy, ox)] = in[c, oy * s - p + ky, ox * s - p + kx]
void im2col(const float* in, int c, int h, int w, int k, int s, int p, int oh, int ow, float* col) {
    const std::size_t npix = static_cast<std::size_t>(oh) * ow;
    for (int ch = 0; ch < c; ++ch) {
        const float* plane = in + static_cast<std::size_t>(ch) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                float* row = col + (static_cast<std::size_t>(ch) * k * k + ky * k + kx) * npix;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * s - p + ky;
                    float* dst = row + static_cast<std::size_t>(oy) * ow;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + ow, 0.0f);
                        continue;
                    }
                    const float* src = plane + static_cast<std::size_t>(iy) * w;
                    if (s == 1) {
                        const int x_lo = std::max(0, p - kx);
                        const int x_hi = std::min(ow, w + p - kx);
                        for (int ox = 0; ox < x_lo; ++ox) dst[ox] = 0.0f;
                        for (int ox = x_lo; ox < x_hi; ++ox) dst[ox] = src[ox - p + kx];
                        for (int ox = std::max(x_hi, x_lo); ox < ow; ++ox) dst[ox] = 0.0f;
                    } else {
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * s - p + kx;
                            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
                        }
                    }
                }
            }
        }
    }
}

// Adjoint of im2col, accumulating into `out` (which must be zeroed by the caller).
void col2im(const float* col, int c, int h, int w, int k, int s, int p, int oh, int ow, float* out) {
    const std::size_t npix = static_cast<std::size_t>(oh) * ow;
    for (int ch = 0; ch < c; ++ch) {
        float* plane = out + static_cast<std::size_t>(ch) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const float* row = col + (static_cast<std::size_t>(ch) * k * k + ky * k + kx) * npix;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * s - p + ky;
                    if (iy < 0 || iy >= h) continue;
                    const float* src = row + static_cast<std::size_t>(oy) * ow;
                    float* dst = plane + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * s - p + kx;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

// Direct stride-1 convolution for layers with very few output channels, where
// the im2col buffer would dominate the cost. Visits (oc, ic, ky, kx) taps and
// the valid output window of each.
constexpr int kDirectMaxOut = 4;

template <typename F>
void for_each_tap_row(int h, int w, int k, int p, int oh, int ow, int ky, int kx, F&& f) {
    const int x_lo = std::max(0, p - kx);
    const int x_hi = std::min(ow, w + p - kx);
    if (x_hi <= x_lo) return;
    for (int oy = 0; oy < oh; ++oy) {
        const int iy = oy - p + ky;
        if (iy < 0 || iy >= h) continue;
        f(static_cast<std::size_t>(oy) * ow + x_lo, static_cast<std::size_t>(iy) * w + (x_lo - p + kx), x_hi - x_lo);
    }
    (void)k;
}

void direct_forward(const float* in, int c_in, int h, int w, const float* wt, int c_out, int k, int p, int oh,
                    int ow, float* out) {
    const std::size_t in_plane = static_cast<std::size_t>(h) * w, out_plane = static_cast<std::size_t>(oh) * ow;
    for (int o = 0; o < c_out; ++o) {
        float* dst = out + o * out_plane;
        for (int c = 0; c < c_in; ++c) {
            const float* src = in + c * in_plane;
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    const float wv = wt[((static_cast<std::size_t>(o) * c_in + c) * k + ky) * k + kx];
                    for_each_tap_row(h, w, k, p, oh, ow, ky, kx, [&](std::size_t od, std::size_t is, int n) {
                        float* d = dst + od;
                        const float* s = src + is;
                        for (int i = 0; i < n; ++i) d[i] += wv * s[i];
                    });
                }
        }
    }
}

// Fixed-order reductions: Eigen's vectorized redux peels by pointer alignment,
// which would make results depend on where buffers happen to be allocated.
float dot_fixed(const float* a, const float* b, int n) {
    float lane[8] = {};
    int i = 0;
    for (; i + 8 <= n; i += 8)
        for (int j = 0; j < 8; ++j) lane[j] += a[i + j] * b[i + j];
    float acc = ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7]));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

float sum_fixed(const float* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    return static_cast<float>(s);
}

void direct_backward(const float* in, int c_in, int h, int w, const float* wt, const float* d_out, int c_out, int k,
                     int p, int oh, int ow, float* d_wt, float* d_in) {
    const std::size_t in_plane = static_cast<std::size_t>(h) * w, out_plane = static_cast<std::size_t>(oh) * ow;
    for (int o = 0; o < c_out; ++o) {
        const float* g = d_out + o * out_plane;
        for (int c = 0; c < c_in; ++c) {
            const float* src = in + c * in_plane;
            float* dsrc = d_in ? d_in + c * in_plane : nullptr;
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    const std::size_t wi = ((static_cast<std::size_t>(o) * c_in + c) * k + ky) * k + kx;
                    const float wv = wt[wi];
                    float acc = 0.0f;
                    for_each_tap_row(h, w, k, p, oh, ow, ky, kx, [&](std::size_t od, std::size_t is, int n) {
                        const float* gg = g + od;
                        const float* s = src + is;
                        acc += dot_fixed(gg, s, n);
                        if (dsrc) {
                            float* ds = dsrc + is;
                            for (int i = 0; i < n; ++i) ds[i] += wv * gg[i];
                        }
                    });
                    d_wt[wi] += acc;
                }
        }
    }
}

void check_channels(const Tensor& t, int expected, const char* layer) {
    if (t.c != expected) {
        throw DimensionMismatch(std::string(layer) + ": expected " + std::to_string(expected) + " input channels, got " +
                                std::to_string(t.c));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// ParamSet

int ParamSet::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < tensors.size(); ++i)
        if (tensors[i].name == name) return static_cast<int>(i);
    return -1;
}

std::size_t ParamSet::total_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.values.size();
    return n;
}

bool ParamSet::all_finite() const {
    for (const auto& t : tensors)
        for (float v : t.values)
            if (!std::isfinite(v)) return false;
    return true;
}

std::vector<std::vector<float>> ParamSet::zeros_like() const {
    std::vector<std::vector<float>> out;
    out.reserve(tensors.size());
    for (const auto& t : tensors) out.emplace_back(t.values.size(), 0.0f);
    return out;
}

int add_param(ParamSet& ps, const std::string& name, std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
    const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                          [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
    const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
    std::uniform_real_distribution<float> dist(-bound, bound);
    ParamTensor t{name, std::move(shape), std::vector<float>(n)};
    for (float& v : t.values) v = dist(rng);
    ps.tensors.push_back(std::move(t));
    return static_cast<int>(ps.tensors.size()) - 1;
}

int add_zero_param(ParamSet& ps, const std::string& name, std::vector<int> shape) {
    const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                          [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
    ps.tensors.push_back({name, std::move(shape), std::vector<float>(n, 0.0f)});
    return static_cast<int>(ps.tensors.size()) - 1;
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d Conv2d::create(ParamSet& ps, const std::string& name, int in_ch, int out_ch, int kernel, int stride, int pad,
                      std::mt19937_64& rng) {
    Conv2d c;
    c.in_ch = in_ch;
    c.out_ch = out_ch;
    c.kernel = kernel;
    c.stride = stride;
    c.pad = pad;
    const int fan_in = in_ch * kernel * kernel;
    c.weight = add_param(ps, name + ".weight", {out_ch, in_ch, kernel, kernel}, fan_in, rng);
    c.bias = add_param(ps, name + ".bias", {out_ch}, fan_in, rng);
    return c;
}

void Conv2d::forward(const ParamSet& ps, const Tensor& in, Tensor& out) const {
    check_channels(in, in_ch, "conv2d");
    const int oh = out_size(in.h), ow = out_size(in.w);
    const int kk = in_ch * kernel * kernel;
    const std::size_t npix = static_cast<std::size_t>(oh) * ow;
    out.resize(out_ch, oh, ow);
    ConstMapMat wmat(ps.tensors[weight].values.data(), out_ch, kk);
    MapMat omat(out.data(), out_ch, static_cast<Eigen::Index>(npix));
    if (kernel == 1 && stride == 1 && pad == 0) {
        omat.noalias() = wmat * ConstMapMat(in.data(), kk, static_cast<Eigen::Index>(npix));
    } else if (stride == 1 && out_ch <= kDirectMaxOut) {
        out.zero();
        direct_forward(in.data(), in_ch, in.h, in.w, ps.tensors[weight].values.data(), out_ch, kernel, pad, oh, ow,
                       out.data());
    } else {
        float* col = reserve(scratch_a(), static_cast<std::size_t>(kk) * npix);
        im2col(in.data(), in_ch, in.h, in.w, kernel, stride, pad, oh, ow, col);
        omat.noalias() = wmat * ConstMapMat(col, kk, static_cast<Eigen::Index>(npix));
    }
    const auto& b = ps.tensors[bias].values;
    for (int o = 0; o < out_ch; ++o) omat.row(o).array() += b[o];
}

void Conv2d::backward(const ParamSet& ps, const Tensor& in, const Tensor& d_out, Tensor* d_in,
                      GradSet& grads) const {
    const int oh = d_out.h, ow = d_out.w;
    const int kk = in_ch * kernel * kernel;
    const auto npix = static_cast<Eigen::Index>(oh) * ow;
    ConstMapMat dmat(d_out.data(), out_ch, npix);
    ConstMapMat wmat(ps.tensors[weight].values.data(), out_ch, kk);
    MapMat dw(grads[weight].data(), out_ch, kk);
    auto& db = grads[bias];
    const bool pointwise = kernel == 1 && stride == 1 && pad == 0;

    if (!pointwise && stride == 1 && out_ch <= kDirectMaxOut) {
        for (int o = 0; o < out_ch; ++o) db[o] += sum_fixed(d_out.data() + o * npix, static_cast<std::size_t>(npix));
        if (d_in) {
            d_in->resize(in.c, in.h, in.w);
        }
        direct_backward(in.data(), in_ch, in.h, in.w, ps.tensors[weight].values.data(), d_out.data(), out_ch, kernel,
                        pad, oh, ow, grads[weight].data(), d_in ? d_in->data() : nullptr);
        return;
    }

    const float* col = in.data();
    if (!pointwise) {
        float* buf = reserve(scratch_a(), static_cast<std::size_t>(kk) * npix);
        im2col(in.data(), in_ch, in.h, in.w, kernel, stride, pad, oh, ow, buf);
        col = buf;
    }
    dw.noalias() += dmat * ConstMapMat(col, kk, npix).transpose();
    for (int o = 0; o < out_ch; ++o) db[o] += sum_fixed(d_out.data() + o * npix, static_cast<std::size_t>(npix));

    if (d_in) {
        d_in->resize(in.c, in.h, in.w);
        if (pointwise) {
            MapMat(d_in->data(), kk, npix).noalias() = wmat.transpose() * dmat;
        } else {
            float* dcol = reserve(scratch_b(), static_cast<std::size_t>(kk) * npix);
            MapMat(dcol, kk, npix).noalias() = wmat.transpose() * dmat;
            col2im(dcol, in_ch, in.h, in.w, kernel, stride, pad, oh, ow, d_in->data());
        }
    }
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

ConvTranspose2d ConvTranspose2d::create(ParamSet& ps, const std::string& name, int in_ch, int out_ch, int kernel,
                                        int stride, int pad, std::mt19937_64& rng) {
    ConvTranspose2d c;
    c.in_ch = in_ch;
    c.out_ch = out_ch;
    c.kernel = kernel;
    c.stride = stride;
    c.pad = pad;
    // PyTorch computes fan_in of a transposed conv from weight.size(1) * k * k.
    const int fan_in = out_ch * kernel * kernel;
    c.weight = add_param(ps, name + ".weight", {in_ch, out_ch, kernel, kernel}, fan_in, rng);
    c.bias = add_param(ps, name + ".bias", {out_ch}, fan_in, rng);
    return c;
}

void ConvTranspose2d::forward(const ParamSet& ps, const Tensor& in, Tensor& out) const {
    check_channels(in, in_ch, "conv_transpose2d");
    const int oh = out_size(in.h), ow = out_size(in.w);
    const int kk = out_ch * kernel * kernel;
    const auto npix = static_cast<Eigen::Index>(in.h) * in.w;
    out.resize(out_ch, oh, ow);
    ConstMapMat wmat(ps.tensors[weight].values.data(), in_ch, kk);
    float* col = reserve(scratch_a(), static_cast<std::size_t>(kk) * npix);
    MapMat(col, kk, npix).noalias() = wmat.transpose() * ConstMapMat(in.data(), in_ch, npix);
    col2im(col, out_ch, oh, ow, kernel, stride, pad, in.h, in.w, out.data());
    const auto& b = ps.tensors[bias].values;
    const std::size_t plane = out.plane();
    for (int o = 0; o < out_ch; ++o) {
        float* p = out.data() + o * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += b[o];
    }
}

void ConvTranspose2d::backward(const ParamSet& ps, const Tensor& in, const Tensor& d_out, Tensor* d_in,
                               GradSet& grads) const {
    const int kk = out_ch * kernel * kernel;
    const auto npix = static_cast<Eigen::Index>(in.h) * in.w;
    float* dcol = reserve(scratch_a(), static_cast<std::size_t>(kk) * npix);
    im2col(d_out.data(), out_ch, d_out.h, d_out.w, kernel, stride, pad, in.h, in.w, dcol);
    ConstMapMat dcolm(dcol, kk, npix);
    MapMat dw(grads[weight].data(), in_ch, kk);
    dw.noalias() += ConstMapMat(in.data(), in_ch, npix) * dcolm.transpose();
    auto& db = grads[bias];
    const std::size_t plane = d_out.plane();
    for (int o = 0; o < out_ch; ++o) {
        db[o] += sum_fixed(d_out.data() + o * plane, plane);
    }
    if (d_in) {
        d_in->resize(in.c, in.h, in.w);
        ConstMapMat wmat(ps.tensors[weight].values.data(), in_ch, kk);
        MapMat(d_in->data(), in_ch, npix).noalias() = wmat * dcolm;
    }
}

// ---------------------------------------------------------------------------
// Linear

Linear Linear::create(ParamSet& ps, const std::string& name, int in_features, int out_features,
                      std::mt19937_64& rng) {
    Linear l;
    l.in_features = in_features;
    l.out_features = out_features;
    l.weight = add_param(ps, name + ".weight", {out_features, in_features}, in_features, rng);
    l.bias = add_param(ps, name + ".bias", {out_features}, in_features, rng);
    return l;
}

void Linear::forward(const ParamSet& ps, const Tensor& in, Tensor& out) const {
    if (static_cast<int>(in.size()) != in_features) throw DimensionMismatch("linear: input feature count mismatch");
    out.resize(out_features, 1, 1);
    const float* wt = ps.tensors[weight].values.data();
    const float* b = ps.tensors[bias].values.data();
    for (int o = 0; o < out_features; ++o)
        out.data()[o] = dot_fixed(wt + static_cast<std::size_t>(o) * in_features, in.data(), in_features) + b[o];
}

void Linear::backward(const ParamSet& ps, const Tensor& in, const Tensor& d_out, Tensor* d_in,
                      GradSet& grads) const {
    const float* wt = ps.tensors[weight].values.data();
    const float* x = in.data();
    const float* dy = d_out.data();
    float* dw = grads[weight].data();
    float* db = grads[bias].data();
    if (d_in) {
        d_in->resize(in.c, in.h, in.w);
        std::fill(d_in->v.begin(), d_in->v.end(), 0.0f);
    }
    for (int o = 0; o < out_features; ++o) {
        const float g = dy[o];
        const std::size_t row = static_cast<std::size_t>(o) * in_features;
        db[o] += g;
        for (int i = 0; i < in_features; ++i) dw[row + i] += g * x[i];
        if (d_in)
            for (int i = 0; i < in_features; ++i) d_in->data()[i] += g * wt[row + i];
    }
}

// ---------------------------------------------------------------------------
// Pooling, activations

void MaxPool2::forward(const Tensor& in, Tensor& out, std::vector<std::int32_t>& argmax) {
    const int oh = in.h / 2, ow = in.w / 2;
    out.resize(in.c, oh, ow);
    argmax.assign(out.size(), 0);
    for (int c = 0; c < in.c; ++c) {
        const float* p = in.data() + c * in.plane();
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                int best = (2 * y) * in.w + 2 * x;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int idx = (2 * y + dy) * in.w + 2 * x + dx;
                        if (p[idx] > p[best]) best = idx;
                    }
                const std::size_t o = c * out.plane() + static_cast<std::size_t>(y) * ow + x;
                out.v[o] = p[best];
                argmax[o] = best;
            }
        }
    }
}

void MaxPool2::backward(const Tensor& in, const Tensor& d_out, const std::vector<std::int32_t>& argmax,
                        Tensor& d_in) {
    d_in.resize(in.c, in.h, in.w);
    for (int c = 0; c < d_out.c; ++c) {
        float* p = d_in.data() + c * d_in.plane();
        for (std::size_t i = 0; i < d_out.plane(); ++i) {
            const std::size_t o = c * d_out.plane() + i;
            p[argmax[o]] += d_out.v[o];
        }
    }
}

Tensor avg_pool(const Tensor& in, int factor) {
    const int oh = in.h / factor, ow = in.w / factor;
    Tensor out(in.c, oh, ow);
    const float inv = 1.0f / static_cast<float>(factor * factor);
    for (int c = 0; c < in.c; ++c) {
        const float* p = in.data() + c * in.plane();
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                float s = 0.0f;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx) s += p[(y * factor + dy) * in.w + x * factor + dx];
                out.v[c * out.plane() + static_cast<std::size_t>(y) * ow + x] = s * inv;
            }
    }
    return out;
}

void relu_inplace(Tensor& t) {
    for (float& v : t.v) v = v > 0.0f ? v : 0.0f;
}

void relu_backward(const Tensor& out, Tensor& d) {
    for (std::size_t i = 0; i < d.v.size(); ++i)
        if (!(out.v[i] > 0.0f)) d.v[i] = 0.0f;
}

void sigmoid_inplace(Tensor& t) {
    for (float& v : t.v) v = 1.0f / (1.0f + std::exp(-v));
}

void sigmoid_backward(const Tensor& out, Tensor& d) {
    for (std::size_t i = 0; i < d.v.size(); ++i) d.v[i] *= out.v[i] * (1.0f - out.v[i]);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.h != b.h || a.w != b.w) throw DimensionMismatch("concat: spatial sizes differ");
    Tensor out(a.c + b.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
    return out;
}

void split_channels(const Tensor& d, Tensor& da, Tensor& db) {
    std::copy(d.v.begin(), d.v.begin() + static_cast<std::ptrdiff_t>(da.v.size()), da.v.begin());
    std::copy(d.v.begin() + static_cast<std::ptrdiff_t>(da.v.size()), d.v.end(), db.v.begin());
}

void add_inplace(Tensor& dst, const Tensor& src) {
    for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

}  // namespace nste::nn
