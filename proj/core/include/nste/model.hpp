#pragma once

#include "nste/image.hpp"
#include "nste/kernels/warp_kernel.hpp"
#include "nste/nn/layers.hpp"
#include "nste/nn/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nste {

enum class ModelVariant { full, black_box, no_warp, no_refine, no_A_constraint, no_J_constraint };

inline constexpr std::array<ModelVariant, 6> kAllVariants{ModelVariant::full,          ModelVariant::black_box,
                                                          ModelVariant::no_warp,       ModelVariant::no_refine,
                                                          ModelVariant::no_A_constraint, ModelVariant::no_J_constraint};

std::string to_string(ModelVariant v);
ModelVariant variant_from_string(const std::string& s);

/// Which stages and loss terms a variant keeps.
struct VariantTraits {
    bool warp = true;
    bool dehaze = true;
    bool refine = true;
    bool a_constraint = true;
    bool j_constraint = true;
};
VariantTraits traits(ModelVariant v);

struct ModelGeometry {
    Size content{64, 64};   ///< ground-truth / model resolution
    Size capture{160, 120}; ///< camera resolution fed to WarpingNet
    int regress_downsample = 4;

    friend bool operator==(const ModelGeometry&, const ModelGeometry&) = default;
};

inline constexpr int kModelSchemaVersion = 1;
inline constexpr int kFeatureChannels = 64;
/// Parameter count of the pix2pix U-Net 256 generator used as the size reference.
inline constexpr std::size_t kPix2pixReferenceParams = 54'414'019;

struct ModelParameters {
    int schema_version = kModelSchemaVersion;
    ModelVariant variant = ModelVariant::full;
    ModelGeometry geometry;
    nn::ParamSet params;

    [[nodiscard]] std::size_t parameter_count() const { return params.total_count(); }
};

/// Public view of one forward pass. Optional fields are absent for variants
/// that do not produce them.
struct ForwardTrace {
    ImagePlane warped_input;
    std::optional<ImagePlane> A_pred;
    std::optional<ImagePlane> t_pred;
    std::optional<ImagePlane> J_coarse;
    ImagePlane J_hat;
    std::optional<Homography> H_pred;  ///< capture pixels -> content pixels
};

/// Float activations of one sample, kept for the backward pass.
struct SampleCache {
    nn::Tensor input;
    // WarpingNet
    nn::Tensor reg_in, w1, p1, w2, p2, f1, theta;
    std::vector<std::int32_t> arg1, arg2;
    Homography::Matrix h_norm{};
    kernels::Map3 inv_map{};
    nn::Tensor warped;
    // backbone
    nn::Tensor e1, e2, e3, d1, cat, feat;
    // heads
    nn::Tensor t1, t_sig, t, a1, a2, A;
    nn::Tensor jc_raw, jc;
    // RefineNet
    nn::Tensor r1, r2, r3, jhat_raw, jhat;
    // black box head
    nn::Tensor b1, b2;
};

/// Upstream gradients with respect to trace entries; empty tensors mean zero.
struct TraceGrads {
    nn::Tensor d_jhat, d_jc, d_A, d_warped;
};

/// Neural-STE: WarpingNet -> DehazingNet (backbone + t/A heads) -> analytic
/// inverse -> RefineNet, plus the ablation wirings.
class NeuralSte {
public:
    NeuralSte(ModelVariant variant, ModelGeometry geometry);

    [[nodiscard]] ModelVariant variant() const { return variant_; }
    [[nodiscard]] const ModelGeometry& geometry() const { return geometry_; }

    /// Seeded init. WarpingNet's last layer starts at zero so the predicted
    /// homography is the identity; RefineNet's last layer starts at zero so the
    /// refinement is the identity.
    [[nodiscard]] ModelParameters init(std::uint64_t seed) const;
    /// Throws VariantMismatch when params were built for another variant or geometry.
    void check(const ModelParameters& params) const;

    void forward(const ModelParameters& params, const nn::Tensor& captured, SampleCache& cache) const;
    /// Accumulates parameter gradients into grads (same layout as params).
    void backward(const ModelParameters& params, SampleCache& cache, TraceGrads& upstream, nn::GradSet& grads) const;

    [[nodiscard]] ForwardTrace to_trace(const SampleCache& cache) const;

    /// Individual stages on a standalone image (inference only).
    [[nodiscard]] std::pair<Homography, ImagePlane> warping_forward(const ModelParameters& params,
                                                                    const ImagePlane& captured) const;
    struct Dehazed {
        ImagePlane A, t, J_coarse;
    };
    [[nodiscard]] Dehazed dehazing_forward(const ModelParameters& params, const ImagePlane& warped) const;
    [[nodiscard]] ImagePlane refine_forward(const ModelParameters& params, const ImagePlane& J_coarse) const;

    struct Layers {
        nn::Conv2d w_conv1, w_conv2;
        nn::Linear w_fc1, w_fc2;
        nn::Conv2d g_conv1, g_conv2, g_conv3, g_fuse;
        nn::ConvTranspose2d g_up;
        nn::ConvTranspose2d t_up;
        nn::Conv2d t_conv;
        nn::Conv2d a_conv1, a_conv2;
        nn::ConvTranspose2d a_up;
        nn::Conv2d r_conv1, r_conv2, r_conv3;
        nn::ConvTranspose2d b_up;
        nn::Conv2d b_conv;
    };

private:
    Layers build(nn::ParamSet& ps, std::uint64_t seed) const;
    void backbone_forward(const ModelParameters& p, SampleCache& c) const;
    void backbone_backward(const ModelParameters& p, SampleCache& c, nn::Tensor& d_feat, nn::Tensor* d_in,
                           nn::GradSet& g) const;
    void dehaze_forward(const ModelParameters& p, SampleCache& c) const;
    void refine_forward_cached(const ModelParameters& p, SampleCache& c) const;
    void warp_forward_cached(const ModelParameters& p, SampleCache& c) const;

    ModelVariant variant_;
    VariantTraits traits_;
    ModelGeometry geometry_;
    Layers layers_;
    std::vector<std::pair<std::string, std::vector<int>>> layout_;
};

nn::Tensor to_tensor(const ImagePlane& img);
ImagePlane to_image(const nn::Tensor& t);

/// Full forward pass with variant check (inference mode).
ForwardTrace model_forward(const ImagePlane& captured, const ModelParameters& params, ModelVariant variant);

}  // namespace nste
