#include "nste/checkpoint.hpp"
#include "nste/errors.hpp"
#include "nste/imaging.hpp"
#include "nste/model.hpp"
#include "nste/training.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace nste;

namespace {

const ModelGeometry kSmall{{16, 16}, {32, 24}, 4};

bool has_prefix(const ModelParameters& p, const std::string& prefix) {
    return std::any_of(p.params.tensors.begin(), p.params.tensors.end(),
                       [&](const nn::ParamTensor& t) { return t.name.rfind(prefix, 0) == 0; });
}

}  // namespace

TEST(Variants, NamesRoundTrip) {
    for (auto v : kAllVariants) EXPECT_EQ(variant_from_string(to_string(v)), v);
    EXPECT_THROW(variant_from_string("bogus"), ConfigError);
}

TEST(Variants, WiringMatchesTraits) {
    for (auto v : kAllVariants) {
        const auto tr = traits(v);
        const auto p = NeuralSte(v, kSmall).init(1);
        EXPECT_EQ(has_prefix(p, "warping."), tr.warp) << to_string(v);
        EXPECT_EQ(has_prefix(p, "refine."), tr.refine) << to_string(v);
        EXPECT_EQ(has_prefix(p, "t_head."), tr.dehaze) << to_string(v);
        EXPECT_EQ(has_prefix(p, "blackbox."), !tr.dehaze) << to_string(v);

        const auto trace = model_forward(test::random_image(24, 32, 2), p, v);
        EXPECT_EQ(trace.J_hat.size(), kSmall.content);
        EXPECT_EQ(trace.A_pred.has_value(), tr.dehaze);
        EXPECT_EQ(trace.J_coarse.has_value(), tr.dehaze);
        EXPECT_EQ(trace.H_pred.has_value(), tr.warp);
        EXPECT_TRUE(trace.J_hat.in_unit_range());
    }
    EXPECT_FALSE(traits(ModelVariant::no_A_constraint).a_constraint);
    EXPECT_FALSE(traits(ModelVariant::no_J_constraint).j_constraint);
}

TEST(Model, InitIsIdentityWarpAndIdentityRefinement) {
    const NeuralSte net(ModelVariant::full, kSmall);
    const auto p = net.init(3);
    const auto I = test::smooth_image(24, 32, 4);
    const auto tr = model_forward(I, p, ModelVariant::full);
    // Predicted pose is the identity in normalized coordinates, i.e. a plain resize.
    const auto expect = normalized_to_pixel(Homography::identity(), kSmall.capture, kSmall.content);
    for (int i = 0; i < 9; ++i) EXPECT_NEAR(tr.H_pred->matrix()[i], expect.matrix()[i], 1e-9);
    EXPECT_LT(test::max_abs_diff(tr.warped_input, resize_bilinear(I, kSmall.content)), 1e-5);
    EXPECT_LT(test::max_abs_diff(tr.J_hat, *tr.J_coarse), 1e-5);
    for (double t : tr.t_pred->data()) {
        EXPECT_GE(t, kMinTransmittance);
        EXPECT_LE(t, 1.0);
    }
}

TEST(Model, NoRefineOutputIsCoarseEstimate) {
    const auto p = NeuralSte(ModelVariant::no_refine, kSmall).init(5);
    const auto tr = model_forward(test::random_image(24, 32, 6), p, ModelVariant::no_refine);
    ASSERT_TRUE(tr.J_coarse.has_value());
    EXPECT_EQ(tr.J_hat, *tr.J_coarse);
}

TEST(Model, NoWarpUsesResizedInput) {
    const auto p = NeuralSte(ModelVariant::no_warp, kSmall).init(7);
    const auto I = test::random_image(24, 32, 8);
    const auto tr = model_forward(I, p, ModelVariant::no_warp);
    EXPECT_LT(test::max_abs_diff(tr.warped_input, resize_bilinear(I, kSmall.content)), 1e-6);
}

TEST(Model, FewerParametersThanReferenceGenerator) {
    const ModelGeometry paper{{256, 256}, {320, 240}, 4};
    const auto p = NeuralSte(ModelVariant::full, paper).init(1);
    EXPECT_LT(p.parameter_count(), kPix2pixReferenceParams);
}

TEST(Model, SeededInitIsDeterministic) {
    const NeuralSte net(ModelVariant::full, kSmall);
    const auto a = net.init(9), b = net.init(9), c = net.init(10);
    for (std::size_t i = 0; i < a.params.tensors.size(); ++i) EXPECT_EQ(a.params.tensors[i].values, b.params.tensors[i].values);
    EXPECT_NE(a.params.tensors[0].values, c.params.tensors[0].values);
}

TEST(Model, RejectsMismatchedInputs) {
    const auto p = NeuralSte(ModelVariant::full, kSmall).init(1);
    EXPECT_THROW(model_forward(test::random_image(24, 32, 1), p, ModelVariant::no_warp), VariantMismatch);
    EXPECT_THROW(model_forward(test::random_image(30, 40, 1), p, ModelVariant::full), DimensionMismatch);
    EXPECT_THROW(NeuralSte(ModelVariant::full, {{16, 16}, {160, 120}, 4}).check(p), VariantMismatch);
    EXPECT_THROW(NeuralSte(ModelVariant::full, {{18, 18}, {32, 24}, 4}), ConfigError);
}

TEST(Checkpoint, RoundTripAndVariantCheck) {
    const auto dir = test::temp_dir("ckpt");
    const auto p = NeuralSte(ModelVariant::no_warp, kSmall).init(11);
    Checkpoint ck{p, Adam(p.params, AdamConfig{}), 42, "abc"};
    save_checkpoint(dir / "m.ckpt", ck);
    const auto back = load_checkpoint(dir / "m.ckpt", ModelVariant::no_warp);
    EXPECT_EQ(back.iteration, 42);
    EXPECT_EQ(back.config_hash, "abc");
    EXPECT_EQ(back.params.variant, ModelVariant::no_warp);
    EXPECT_EQ(back.params.geometry, kSmall);
    ASSERT_EQ(back.params.params.tensors.size(), p.params.tensors.size());
    for (std::size_t i = 0; i < p.params.tensors.size(); ++i) {
        EXPECT_EQ(back.params.params.tensors[i].name, p.params.tensors[i].name);
        EXPECT_EQ(back.params.params.tensors[i].values, p.params.tensors[i].values);
    }
    const auto I = test::random_image(24, 32, 12);
    EXPECT_EQ(model_forward(I, back.params, ModelVariant::no_warp).J_hat,
              model_forward(I, p, ModelVariant::no_warp).J_hat);
    EXPECT_THROW(load_checkpoint(dir / "m.ckpt", ModelVariant::full), VariantMismatch);
    EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), std::runtime_error);
}

class EndToEndGradient : public ::testing::TestWithParam<ModelVariant> {};

TEST_P(EndToEndGradient, SampledWeightsMatchFiniteDifferences) {
    const ModelVariant v = GetParam();
    const NeuralSte net(v, kSmall);
    auto p = net.init(13);
    // Move off the zero-initialized layers so every path carries gradient.
    std::mt19937_64 rng(14);
    std::normal_distribution<float> n(0.0f, 0.02f);
    for (auto& t : p.params.tensors)
        if (std::all_of(t.values.begin(), t.values.end(), [](float x) { return x == 0.0f; }))
            for (float& x : t.values) x = n(rng) * (t.name.rfind("warping.fc2", 0) == 0 ? 0.05f : 1.0f);

    std::vector<PairedSample> data;
    for (int i = 0; i < 2; ++i)
        data.push_back({"s" + std::to_string(i), test::smooth_image(24, 32, 20 + i), test::smooth_image(16, 16, 30 + i), {}});
    std::vector<const PairedSample*> batch{&data[0], &data[1]};
    const auto checks = test::check_sampled_weights(net, p, batch, 16, 17, 1e-3, 3e-2);  // float32 loss noise ~1e-4 absolute
    EXPECT_GE(checks.size(), 8u);
    for (const auto& c : checks)
        EXPECT_LE(c.rel, 1e-2) << c.tensor << "[" << c.index << "] fd " << c.numeric << " analytic " << c.analytic;
}

TEST_P(EndToEndGradient, RepeatedEvaluationIsBitIdentical) {
    const ModelVariant v = GetParam();
    const NeuralSte net(v, kSmall);
    const auto p = net.init(15);
    std::vector<PairedSample> data;
    for (int i = 0; i < 2; ++i)
        data.push_back({"s" + std::to_string(i), test::smooth_image(24, 32, 40 + i), test::smooth_image(16, 16, 50 + i), {}});
    std::vector<const PairedSample*> batch{&data[0], &data[1]};
    nn::GradSet a = p.params.zeros_like(), b = p.params.zeros_like();
    const double la = loss_and_gradient(net, p, batch, LossWeights{}, a).total;
    const double lb = loss_and_gradient(net, p, batch, LossWeights{}, b).total;
    EXPECT_EQ(la, lb);
    for (std::size_t ti = 0; ti < a.size(); ++ti) {
        std::size_t i = 0;
        while (i < a[ti].size() && a[ti][i] == b[ti][i]) ++i;
        EXPECT_EQ(i, a[ti].size()) << p.params.tensors[ti].name;
    }
}

INSTANTIATE_TEST_SUITE_P(AllVariants, EndToEndGradient, ::testing::ValuesIn(kAllVariants),
                         [](const auto& info) { return to_string(info.param); });
