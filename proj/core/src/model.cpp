#include "nste/model.hpp"

#include "nste/errors.hpp"
#include "nste/imaging.hpp"

#include "denormals.hpp"

#include <algorithm>
#include <cmath>

namespace nste {

namespace {

constexpr int kRefineWidth = 32;
constexpr int kHeadWidth = 16;

bool all_finite(const nn::Tensor& t) {
    return std::all_of(t.v.begin(), t.v.end(), [](float v) { return std::isfinite(v); });
}

void require_finite(const nn::Tensor& t, const char* stage) {
    if (!all_finite(t)) throw NonFiniteError(std::string("non-finite activations in ") + stage);
}

void ensure_shape(nn::Tensor& t, const nn::Tensor& like) {
    if (!t.same_shape(like)) t.reshape_like(like);
}

kernels::Map3 identity_normalized_map(Size src, Size dst) {
    return matmul3(pixel_from_normalized(src), normalized_from_pixel(dst));
}

}  // namespace

std::string to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::full: return "full";
        case ModelVariant::black_box: return "black_box";
        case ModelVariant::no_warp: return "no_warp";
        case ModelVariant::no_refine: return "no_refine";
        case ModelVariant::no_A_constraint: return "no_A_constraint";
        case ModelVariant::no_J_constraint: return "no_J_constraint";
    }
    return "unknown";
}

ModelVariant variant_from_string(const std::string& s) {
    for (auto v : kAllVariants)
        if (to_string(v) == s) return v;
    throw ConfigError("unknown model variant '" + s +
                      "' (expected full, black_box, no_warp, no_refine, no_A_constraint, no_J_constraint)");
}

VariantTraits traits(ModelVariant v) {
    switch (v) {
        case ModelVariant::full: return {};
        case ModelVariant::black_box: return {false, false, false, false, false};
        case ModelVariant::no_warp: return {false, true, true, true, true};
        case ModelVariant::no_refine: return {true, true, false, true, true};
        case ModelVariant::no_A_constraint: return {true, true, true, false, true};
        case ModelVariant::no_J_constraint: return {true, true, true, true, false};
    }
    return {};
}

nn::Tensor to_tensor(const ImagePlane& img) {
    nn::Tensor t(kChannels, img.height(), img.width());
    const auto src = img.data();
    for (std::size_t i = 0; i < src.size(); ++i) t.v[i] = static_cast<float>(src[i]);
    return t;
}

ImagePlane to_image(const nn::Tensor& t) {
    std::vector<double> planar(t.v.begin(), t.v.end());
    return ImagePlane(t.h, t.w, std::move(planar));
}

NeuralSte::NeuralSte(ModelVariant variant, ModelGeometry geometry)
    : variant_(variant), traits_(traits(variant)), geometry_(geometry) {
    if (geometry.content.width % 4 != 0 || geometry.content.height % 4 != 0 || geometry.content.width < 16 ||
        geometry.content.height < 16) {
        throw ConfigError("model: content size must be a multiple of 4 and at least 16");
    }
    if (traits_.warp) {
        const int rw = geometry.capture.width / geometry.regress_downsample;
        const int rh = geometry.capture.height / geometry.regress_downsample;
        if (rw < 4 || rh < 4) throw ConfigError("model: capture too small for the WarpingNet regression branch");
    }
    nn::ParamSet ps;
    layers_ = build(ps, 0);
    for (const auto& t : ps.tensors) layout_.emplace_back(t.name, t.shape);
}

NeuralSte::Layers NeuralSte::build(nn::ParamSet& ps, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    Layers l;
    if (traits_.warp) {
        const int rw = geometry_.capture.width / geometry_.regress_downsample;
        const int rh = geometry_.capture.height / geometry_.regress_downsample;
        l.w_conv1 = nn::Conv2d::create(ps, "warping.conv1", 3, 16, 3, 1, 1, rng);
        l.w_conv2 = nn::Conv2d::create(ps, "warping.conv2", 16, 32, 3, 1, 1, rng);
        const int fc_in = 32 * ((rh / 2) / 2) * ((rw / 2) / 2);
        l.w_fc1 = nn::Linear::create(ps, "warping.fc1", fc_in, 128, rng);
        l.w_fc2 = nn::Linear::create(ps, "warping.fc2", 128, 8, rng);
    }
    l.g_conv1 = nn::Conv2d::create(ps, "backbone.conv1", 3, 16, 3, 1, 1, rng);
    l.g_conv2 = nn::Conv2d::create(ps, "backbone.conv2", 16, 32, 3, 2, 1, rng);
    l.g_conv3 = nn::Conv2d::create(ps, "backbone.conv3", 32, 64, 3, 2, 1, rng);
    l.g_up = nn::ConvTranspose2d::create(ps, "backbone.up", 64, 32, 2, 2, 0, rng);
    l.g_fuse = nn::Conv2d::create(ps, "backbone.fuse", 64, kFeatureChannels, 1, 1, 0, rng);
    if (traits_.dehaze) {
        l.t_up = nn::ConvTranspose2d::create(ps, "t_head.up", kFeatureChannels, kHeadWidth, 2, 2, 0, rng);
        l.t_conv = nn::Conv2d::create(ps, "t_head.conv", kHeadWidth, 3, 3, 1, 1, rng);
        l.a_conv1 = nn::Conv2d::create(ps, "a_head.conv1", kFeatureChannels, kHeadWidth, 3, 1, 1, rng);
        l.a_conv2 = nn::Conv2d::create(ps, "a_head.conv2", kHeadWidth, kHeadWidth, 3, 1, 1, rng);
        l.a_up = nn::ConvTranspose2d::create(ps, "a_head.up", kHeadWidth, 3, 2, 2, 0, rng);
    } else {
        l.b_up = nn::ConvTranspose2d::create(ps, "blackbox.up", kFeatureChannels, kHeadWidth, 2, 2, 0, rng);
        l.b_conv = nn::Conv2d::create(ps, "blackbox.out", kHeadWidth, 3, 3, 1, 1, rng);
    }
    if (traits_.refine) {
        l.r_conv1 = nn::Conv2d::create(ps, "refine.conv1", 3, kRefineWidth, 3, 1, 1, rng);
        l.r_conv2 = nn::Conv2d::create(ps, "refine.conv2", kRefineWidth, kRefineWidth, 3, 1, 1, rng);
        l.r_conv3 = nn::Conv2d::create(ps, "refine.conv3", kRefineWidth, 3, 3, 1, 1, rng);
    }
    return l;
}

ModelParameters NeuralSte::init(std::uint64_t seed) const {
    ModelParameters mp;
    mp.variant = variant_;
    mp.geometry = geometry_;
    const Layers l = build(mp.params, seed);
    auto zero = [&](int idx) { std::fill(mp.params.tensors[idx].values.begin(), mp.params.tensors[idx].values.end(), 0.0f); };
    if (traits_.warp) {
        zero(l.w_fc2.weight);
        zero(l.w_fc2.bias);
    }
    if (traits_.refine) {
        zero(l.r_conv3.weight);
        zero(l.r_conv3.bias);
    }
    return mp;
}

void NeuralSte::check(const ModelParameters& params) const {
    if (params.schema_version != kModelSchemaVersion) {
        throw VariantMismatch("model parameters: unsupported schema_version " + std::to_string(params.schema_version));
    }
    if (params.variant != variant_) {
        throw VariantMismatch("model parameters were built for variant '" + to_string(params.variant) + "', not '" +
                              to_string(variant_) + "'");
    }
    if (!(params.geometry == geometry_)) throw VariantMismatch("model parameters: geometry mismatch");
    if (params.params.tensors.size() != layout_.size()) throw VariantMismatch("model parameters: layout mismatch");
    for (std::size_t i = 0; i < layout_.size(); ++i) {
        if (params.params.tensors[i].name != layout_[i].first || params.params.tensors[i].shape != layout_[i].second) {
            throw VariantMismatch("model parameters: unexpected tensor '" + params.params.tensors[i].name + "'");
        }
    }
}

// ---------------------------------------------------------------------------
// forward

void NeuralSte::warp_forward_cached(const ModelParameters& p, SampleCache& c) const {
    const auto& ps = p.params;
    const auto& l = layers_;
    c.reg_in = nn::avg_pool(c.input, geometry_.regress_downsample);
    l.w_conv1.forward(ps, c.reg_in, c.w1);
    nn::relu_inplace(c.w1);
    nn::MaxPool2::forward(c.w1, c.p1, c.arg1);
    l.w_conv2.forward(ps, c.p1, c.w2);
    nn::relu_inplace(c.w2);
    nn::MaxPool2::forward(c.w2, c.p2, c.arg2);
    l.w_fc1.forward(ps, c.p2, c.f1);
    nn::relu_inplace(c.f1);
    l.w_fc2.forward(ps, c.f1, c.theta);
    require_finite(c.theta, "WarpingNet");

    const auto& th = c.theta.v;
    c.h_norm = {1.0 + th[0], th[1], th[2], th[3], 1.0 + th[4], th[5], th[6], th[7], 1.0};
    const auto inv_h = invert3(c.h_norm);
    c.inv_map = matmul3(pixel_from_normalized(geometry_.capture), matmul3(inv_h, normalized_from_pixel(geometry_.content)));
    c.warped.resize(kChannels, geometry_.content.height, geometry_.content.width);
    kernels::warp_forward(c.input.data(), kChannels, c.input.h, c.input.w, c.warped.data(), c.warped.h, c.warped.w,
                          c.inv_map);
}

void NeuralSte::backbone_forward(const ModelParameters& p, SampleCache& c) const {
    const auto& ps = p.params;
    const auto& l = layers_;
    l.g_conv1.forward(ps, c.warped, c.e1);
    nn::relu_inplace(c.e1);
    l.g_conv2.forward(ps, c.e1, c.e2);
    nn::relu_inplace(c.e2);
    l.g_conv3.forward(ps, c.e2, c.e3);
    nn::relu_inplace(c.e3);
    l.g_up.forward(ps, c.e3, c.d1);
    nn::relu_inplace(c.d1);
    c.cat = nn::concat_channels(c.d1, c.e2);
    l.g_fuse.forward(ps, c.cat, c.feat);
    nn::relu_inplace(c.feat);
}

void NeuralSte::dehaze_forward(const ModelParameters& p, SampleCache& c) const {
    const auto& ps = p.params;
    const auto& l = layers_;
    l.t_up.forward(ps, c.feat, c.t1);
    nn::relu_inplace(c.t1);
    l.t_conv.forward(ps, c.t1, c.t_sig);
    nn::sigmoid_inplace(c.t_sig);
    c.t = c.t_sig;
    for (float& v : c.t.v) v = std::clamp(v, static_cast<float>(kMinTransmittance), 1.0f);

    l.a_conv1.forward(ps, c.feat, c.a1);
    nn::relu_inplace(c.a1);
    l.a_conv2.forward(ps, c.a1, c.a2);
    nn::relu_inplace(c.a2);
    l.a_up.forward(ps, c.a2, c.A);
    nn::sigmoid_inplace(c.A);

    c.jc_raw.reshape_like(c.warped);
    c.jc.reshape_like(c.warped);
    for (std::size_t i = 0; i < c.jc.v.size(); ++i) {
        c.jc_raw.v[i] = (c.warped.v[i] - c.A.v[i]) / c.t.v[i];
        c.jc.v[i] = std::clamp(c.jc_raw.v[i], 0.0f, 1.0f);
    }
}

void NeuralSte::refine_forward_cached(const ModelParameters& p, SampleCache& c) const {
    const auto& ps = p.params;
    const auto& l = layers_;
    l.r_conv1.forward(ps, c.jc, c.r1);
    nn::relu_inplace(c.r1);
    l.r_conv2.forward(ps, c.r1, c.r2);
    nn::relu_inplace(c.r2);
    l.r_conv3.forward(ps, c.r2, c.r3);
    c.jhat_raw.reshape_like(c.jc);
    c.jhat.reshape_like(c.jc);
    for (std::size_t i = 0; i < c.jhat.v.size(); ++i) {
        c.jhat_raw.v[i] = c.jc.v[i] + c.r3.v[i];
        c.jhat.v[i] = std::clamp(c.jhat_raw.v[i], 0.0f, 1.0f);
    }
}

void NeuralSte::forward(const ModelParameters& params, const nn::Tensor& captured, SampleCache& c) const {
    const detail::FlushDenormals ftz;
    if (captured.c != kChannels) throw DimensionMismatch("model_forward: expected a 3-channel image");
    c.input = captured;
    if (traits_.warp) {
        if (captured.w != geometry_.capture.width || captured.h != geometry_.capture.height) {
            throw DimensionMismatch("model_forward: captured image is " + std::to_string(captured.w) + "x" +
                                    std::to_string(captured.h) + ", model expects " +
                                    std::to_string(geometry_.capture.width) + "x" +
                                    std::to_string(geometry_.capture.height));
        }
        warp_forward_cached(params, c);
    } else {
        c.warped.resize(kChannels, geometry_.content.height, geometry_.content.width);
        kernels::warp_forward(captured.data(), kChannels, captured.h, captured.w, c.warped.data(), c.warped.h,
                              c.warped.w, identity_normalized_map({captured.w, captured.h}, geometry_.content));
    }
    backbone_forward(params, c);
    if (traits_.dehaze) {
        dehaze_forward(params, c);
        if (traits_.refine) {
            refine_forward_cached(params, c);
        } else {
            c.jhat = c.jc;
        }
    } else {
        const auto& ps = params.params;
        layers_.b_up.forward(ps, c.feat, c.b1);
        nn::relu_inplace(c.b1);
        layers_.b_conv.forward(ps, c.b1, c.jhat);
        nn::sigmoid_inplace(c.jhat);
    }
    require_finite(c.jhat, "model output");
}

// ---------------------------------------------------------------------------
// backward

void NeuralSte::backbone_backward(const ModelParameters& p, SampleCache& c, nn::Tensor& d_feat, nn::Tensor* d_in,
                                  nn::GradSet& g) const {
    const auto& ps = p.params;
    const auto& l = layers_;
    nn::relu_backward(c.feat, d_feat);
    nn::Tensor d_cat, d_d1(c.d1.c, c.d1.h, c.d1.w), d_e2(c.e2.c, c.e2.h, c.e2.w), d_e3, d_e2b, d_e1;
    l.g_fuse.backward(ps, c.cat, d_feat, &d_cat, g);
    nn::split_channels(d_cat, d_d1, d_e2);
    nn::relu_backward(c.d1, d_d1);
    l.g_up.backward(ps, c.e3, d_d1, &d_e3, g);
    nn::relu_backward(c.e3, d_e3);
    l.g_conv3.backward(ps, c.e2, d_e3, &d_e2b, g);
    nn::add_inplace(d_e2, d_e2b);
    nn::relu_backward(c.e2, d_e2);
    l.g_conv2.backward(ps, c.e1, d_e2, &d_e1, g);
    nn::relu_backward(c.e1, d_e1);
    l.g_conv1.backward(ps, c.warped, d_e1, d_in, g);
}

void NeuralSte::backward(const ModelParameters& params, SampleCache& c, TraceGrads& up, nn::GradSet& g) const {
    const detail::FlushDenormals ftz;
    const auto& ps = params.params;
    const auto& l = layers_;
    ensure_shape(up.d_jhat, c.jhat);

    nn::Tensor d_feat;
    nn::Tensor d_warped(c.warped.c, c.warped.h, c.warped.w);
    if (!up.d_warped.v.empty()) d_warped = up.d_warped;

    if (!traits_.dehaze) {
        nn::Tensor d = up.d_jhat, d_b1;
        nn::sigmoid_backward(c.jhat, d);
        l.b_conv.backward(ps, c.b1, d, &d_b1, g);
        nn::relu_backward(c.b1, d_b1);
        l.b_up.backward(ps, c.feat, d_b1, &d_feat, g);
        backbone_backward(params, c, d_feat, nullptr, g);
        return;
    }

    nn::Tensor d_jc = up.d_jc.v.empty() ? nn::Tensor(c.jc.c, c.jc.h, c.jc.w) : up.d_jc;
    if (traits_.refine) {
        nn::Tensor d = up.d_jhat, d_r2, d_r1, d_jc_ref;
        for (std::size_t i = 0; i < d.v.size(); ++i)
            if (c.jhat_raw.v[i] < 0.0f || c.jhat_raw.v[i] > 1.0f) d.v[i] = 0.0f;
        nn::add_inplace(d_jc, d);
        l.r_conv3.backward(ps, c.r2, d, &d_r2, g);
        nn::relu_backward(c.r2, d_r2);
        l.r_conv2.backward(ps, c.r1, d_r2, &d_r1, g);
        nn::relu_backward(c.r1, d_r1);
        l.r_conv1.backward(ps, c.jc, d_r1, &d_jc_ref, g);
        nn::add_inplace(d_jc, d_jc_ref);
    } else {
        nn::add_inplace(d_jc, up.d_jhat);
    }

    nn::Tensor d_A = up.d_A.v.empty() ? nn::Tensor(c.A.c, c.A.h, c.A.w) : up.d_A;
    nn::Tensor d_t(c.t.c, c.t.h, c.t.w);
    for (std::size_t i = 0; i < d_jc.v.size(); ++i) {
        if (c.jc_raw.v[i] < 0.0f || c.jc_raw.v[i] > 1.0f) continue;
        const float inv_t = 1.0f / c.t.v[i];
        const float dj = d_jc.v[i];
        d_warped.v[i] += dj * inv_t;
        d_A.v[i] -= dj * inv_t;
        d_t.v[i] = -dj * c.jc_raw.v[i] * inv_t;
    }

    // t head (clamp passes gradient inside the valid range only)
    for (std::size_t i = 0; i < d_t.v.size(); ++i)
        if (c.t_sig.v[i] < static_cast<float>(kMinTransmittance)) d_t.v[i] = 0.0f;
    nn::sigmoid_backward(c.t_sig, d_t);
    nn::Tensor d_t1, d_feat_t;
    l.t_conv.backward(ps, c.t1, d_t, &d_t1, g);
    nn::relu_backward(c.t1, d_t1);
    l.t_up.backward(ps, c.feat, d_t1, &d_feat_t, g);

    // A head
    nn::sigmoid_backward(c.A, d_A);
    nn::Tensor d_a2, d_a1, d_feat_a;
    l.a_up.backward(ps, c.a2, d_A, &d_a2, g);
    nn::relu_backward(c.a2, d_a2);
    l.a_conv2.backward(ps, c.a1, d_a2, &d_a1, g);
    nn::relu_backward(c.a1, d_a1);
    l.a_conv1.backward(ps, c.feat, d_a1, &d_feat_a, g);

    d_feat = std::move(d_feat_t);
    nn::add_inplace(d_feat, d_feat_a);

    if (!traits_.warp) {
        backbone_backward(params, c, d_feat, nullptr, g);
        return;
    }
    nn::Tensor d_warped_bb;
    backbone_backward(params, c, d_feat, &d_warped_bb, g);
    nn::add_inplace(d_warped, d_warped_bb);

    // WarpingNet: image -> inverse map -> normalized homography -> theta
    kernels::Map3 d_map{};
    kernels::warp_backward<float>(c.input.data(), kChannels, c.input.h, c.input.w, d_warped.data(), c.warped.h,
                                  c.warped.w, c.inv_map, nullptr, &d_map);
    const auto P = pixel_from_normalized(geometry_.capture);
    const auto N = normalized_from_pixel(geometry_.content);
    kernels::Map3 d_inv_h{};
    // d_inv_h = P^T d_map N^T
    for (int r = 0; r < 3; ++r)
        for (int col = 0; col < 3; ++col) {
            double s = 0.0;
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) s += P[a * 3 + r] * d_map[a * 3 + b] * N[col * 3 + b];
            d_inv_h[r * 3 + col] = s;
        }
    const auto inv_h = invert3(c.h_norm);
    const auto d_h = kernels::inverse_map_grad_to_forward(inv_h, d_inv_h);
    nn::Tensor d_theta(8, 1, 1);
    for (int k = 0; k < 8; ++k) d_theta.v[k] = static_cast<float>(d_h[k]);

    nn::Tensor d_f1, d_p2, d_w2, d_p1, d_w1;
    l.w_fc2.backward(ps, c.f1, d_theta, &d_f1, g);
    nn::relu_backward(c.f1, d_f1);
    l.w_fc1.backward(ps, c.p2, d_f1, &d_p2, g);
    nn::MaxPool2::backward(c.w2, d_p2, c.arg2, d_w2);
    nn::relu_backward(c.w2, d_w2);
    l.w_conv2.backward(ps, c.p1, d_w2, &d_p1, g);
    nn::MaxPool2::backward(c.w1, d_p1, c.arg1, d_w1);
    nn::relu_backward(c.w1, d_w1);
    l.w_conv1.backward(ps, c.reg_in, d_w1, nullptr, g);
}

// ---------------------------------------------------------------------------
// public views

ForwardTrace NeuralSte::to_trace(const SampleCache& c) const {
    ForwardTrace tr;
    tr.warped_input = to_image(c.warped);
    if (traits_.warp) {
        tr.H_pred = Homography(
            matmul3(pixel_from_normalized(geometry_.content), matmul3(c.h_norm, normalized_from_pixel(geometry_.capture))));
    }
    if (traits_.dehaze) {
        tr.A_pred = to_image(c.A);
        tr.t_pred = to_image(c.t);
        // The public trace recomputes the analytic inverse in double from the
        // exported maps so that it is reproducible from the trace alone.
        tr.J_coarse = dehaze_inverse(tr.warped_input, *tr.A_pred, *tr.t_pred);
        tr.J_hat = traits_.refine ? to_image(c.jhat) : *tr.J_coarse;
    } else {
        tr.J_hat = to_image(c.jhat);
    }
    return tr;
}

std::pair<Homography, ImagePlane> NeuralSte::warping_forward(const ModelParameters& params,
                                                             const ImagePlane& captured) const {
    const detail::FlushDenormals ftz;
    check(params);
    if (!traits_.warp) throw VariantMismatch("variant '" + to_string(variant_) + "' has no WarpingNet");
    SampleCache c;
    c.input = to_tensor(captured);
    if (!(captured.size() == geometry_.capture)) throw DimensionMismatch("warping_net_forward: capture size mismatch");
    warp_forward_cached(params, c);
    const Homography h(
        matmul3(pixel_from_normalized(geometry_.content), matmul3(c.h_norm, normalized_from_pixel(geometry_.capture))));
    return {h, to_image(c.warped)};
}

NeuralSte::Dehazed NeuralSte::dehazing_forward(const ModelParameters& params, const ImagePlane& warped) const {
    const detail::FlushDenormals ftz;
    check(params);
    if (!traits_.dehaze) throw VariantMismatch("variant '" + to_string(variant_) + "' has no DehazingNet heads");
    if (!(warped.size() == geometry_.content)) throw DimensionMismatch("dehazing_net_forward: expects content size");
    SampleCache c;
    c.warped = to_tensor(warped);
    backbone_forward(params, c);
    dehaze_forward(params, c);
    require_finite(c.jc, "DehazingNet");
    Dehazed out{to_image(c.A), to_image(c.t), ImagePlane()};
    out.J_coarse = dehaze_inverse(warped, out.A, out.t);
    return out;
}

ImagePlane NeuralSte::refine_forward(const ModelParameters& params, const ImagePlane& J_coarse) const {
    const detail::FlushDenormals ftz;
    check(params);
    if (!traits_.refine) throw VariantMismatch("variant '" + to_string(variant_) + "' has no RefineNet");
    SampleCache c;
    c.jc = to_tensor(J_coarse);
    refine_forward_cached(params, c);
    return to_image(c.jhat);
}

ForwardTrace model_forward(const ImagePlane& captured, const ModelParameters& params, ModelVariant variant) {
    if (params.variant != variant) {
        throw VariantMismatch("model_forward: parameters are for '" + to_string(params.variant) + "', requested '" +
                              to_string(variant) + "'");
    }
    const NeuralSte net(variant, params.geometry);
    net.check(params);
    SampleCache cache;
    net.forward(params, to_tensor(captured), cache);
    return net.to_trace(cache);
}

}  // namespace nste
