#include "nste/envelope_config.hpp"
#include "nste/errors.hpp"
#include "nste/imaging.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace nste;
using test::max_abs_diff;

namespace {

EnvelopeParams plain_envelope(int h, int w) {
    EnvelopeParams e;
    e.t_base = ImagePlane(h, w, 1.0);
    e.A_base = ImagePlane(h, w, 0.0);
    return e;
}

// Direct 2-D convolution with reflect-101 borders.
ImagePlane dense_blur_oracle(const ImagePlane& img, int k, double sigma) {
    const auto taps = BlurSpec::gaussian_taps(k, sigma);
    const int r = k / 2, h = img.height(), w = img.width();
    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
        return i;
    };
    ImagePlane out(h, w);
    for (int c = 0; c < kChannels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double s = 0;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx)
                        s += taps[dy + r] * taps[dx + r] * img.at(c, reflect(y + dy, h), reflect(x + dx, w));
                out.at(c, y, x) = s;
            }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// warp_image

TEST(Warp, IdentityIsExact) {
    const auto img = test::random_image(20, 24, 1);
    EXPECT_EQ(max_abs_diff(warp_image(img, Homography::identity(), img.size()), img), 0.0);
}

TEST(Warp, IntegerTranslationMatchesIndexShift) {
    const auto img = test::random_image(16, 20, 2);
    const auto out = warp_image(img, Homography::translation(3, 0), img.size());
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 20; ++x) EXPECT_EQ(out.at(c, y, x), x < 3 ? 0.0 : img.at(c, y, x - 3));
}

TEST(Warp, SequentialWarpMatchesComposition) {
    const auto img = test::smooth_image(48, 48, 3);
    const Homography H1 = Homography::from_params(std::array<double, 8>{1.02, 0.03, -1.5, -0.02, 0.98, 1.0, 1e-4, 0});
    const Homography H2 = Homography::from_params(std::array<double, 8>{0.97, -0.02, 1.0, 0.01, 1.03, -0.5, 0, 1e-4});
    const auto seq = warp_image(warp_image(img, H1, img.size()), H2, img.size());
    const auto once = warp_image(img, H2.compose(H1), img.size());
    // Compare away from the zero-filled border.
    double m = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 6; y < 42; ++y)
            for (int x = 6; x < 42; ++x) m = std::max(m, std::abs(seq.at(c, y, x) - once.at(c, y, x)));
    EXPECT_LE(m, 0.02);
}

TEST(Warp, SingularHomographyIsRejected) {
    EXPECT_THROW(Homography(Homography::Matrix{1, 1, 0, 1, 1, 0, 0, 0, 1}), DegenerateTransform);
}

TEST(Warp, GradientWrtHomographyMatchesFiniteDifferences) {
    const auto img = test::smooth_image(32, 32, 4);
    const Homography H = Homography::from_params(std::array<double, 8>{1.05, 0.04, -1.3, -0.03, 0.96, 0.7, 4e-4, -3e-4});
    const Size out{28, 30};
    const auto weights = test::random_image(30, 28, 5, -1.0, 1.0);
    std::vector<double> d_out(weights.data().begin(), weights.data().end());
    auto objective = [&](const Homography& G) {
        const auto o = warp_image(img, G, out);
        double s = 0;
        for (std::size_t i = 0; i < o.numel(); ++i) s += o.data()[i] * d_out[i];
        return s;
    };
    const auto g = warp_image_backward(img, H, out, d_out);
    const auto p = H.params();
    for (int k = 0; k < 8; ++k) {
        const double eps = (k == 6 || k == 7) ? 1e-8 : 1e-7;  // small enough to stay inside one bilinear cell
        auto pp = p, pm = p;
        pp[k] += eps;
        pm[k] -= eps;
        const double fd = (objective(Homography::from_params(pp)) - objective(Homography::from_params(pm))) / (2 * eps);
        EXPECT_LE(test::rel_err(fd, g.d_params[k]), 1e-3) << "param " << k << " fd " << fd << " analytic " << g.d_params[k];
    }
}

TEST(Warp, GradientWrtImageIsAdjoint) {
    const auto img = test::random_image(16, 16, 6);
    const Homography H = Homography::from_params(std::array<double, 8>{0.9, 0.1, 1.0, -0.1, 1.1, 0.5, 0, 0});
    const auto v = test::random_image(12, 14, 7);
    std::vector<double> d_out(v.data().begin(), v.data().end());
    const auto g = warp_image_backward(img, H, {14, 12}, d_out);
    // <warp(x), v> == <x, warp^T v> for the linear map x -> warp(x)
    const auto x = test::random_image(16, 16, 8);
    const auto wx = warp_image(x, H, {14, 12});
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < wx.numel(); ++i) lhs += wx.data()[i] * d_out[i];
    for (std::size_t i = 0; i < x.numel(); ++i) rhs += x.data()[i] * g.d_image[i];
    EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(Warp, NormalizedCoordinateRoundTrip) {
    const Size s{40, 30};
    const Homography P(pixel_from_normalized(s)), N(normalized_from_pixel(s));
    const auto c = N.apply(-0.5, -0.5);
    EXPECT_NEAR(c[0], -1.0, 1e-12);
    EXPECT_NEAR(c[1], -1.0, 1e-12);
    const auto q = P.apply(1.0, 1.0);
    EXPECT_NEAR(q[0], 39.5, 1e-12);
    EXPECT_NEAR(q[1], 29.5, 1e-12);
    // identity in normalized coordinates == bilinear resize
    const auto img = test::smooth_image(30, 40, 9);
    const auto a = warp_image(img, normalized_to_pixel(Homography::identity(), s, {20, 16}), {20, 16});
    EXPECT_LT(max_abs_diff(a, resize_bilinear(img, {20, 16})), 1e-12);
}

// ---------------------------------------------------------------------------
// apply_blur

TEST(Blur, DeltaKernelIsIdentity) {
    const auto img = test::random_image(12, 12, 10);
    EXPECT_EQ(max_abs_diff(apply_blur(img, BlurSpec{1, 0.0, {}}), img), 0.0);
}

TEST(Blur, ConstantImageStaysConstant) {
    const ImagePlane img(16, 16, 0.37);
    for (int k : {3, 5, 9, 17}) EXPECT_LT(max_abs_diff(apply_blur(img, BlurSpec{k, 0.0, {}}), img), 1e-12);
}

TEST(Blur, SingleHotMatchesDenseOracle) {
    ImagePlane img(15, 15, 0.0);
    img.at(0, 7, 7) = 1.0;
    img.at(1, 0, 3) = 1.0;  // exercises the border reflection
    const auto got = apply_blur(img, BlurSpec{5, 1.0, {}});
    EXPECT_LT(max_abs_diff(got, dense_blur_oracle(img, 5, 1.0)), 1e-6);
}

TEST(Blur, IsLinear) {
    const auto x = test::random_image(16, 16, 11), y = test::random_image(16, 16, 12);
    ImagePlane mix(16, 16);
    for (std::size_t i = 0; i < mix.numel(); ++i) mix.data()[i] = 0.3 * x.data()[i] + 0.6 * y.data()[i];
    const BlurSpec b{7, 0.0, {}};
    const auto bx = apply_blur(x, b), by = apply_blur(y, b), bm = apply_blur(mix, b);
    for (std::size_t i = 0; i < mix.numel(); ++i) EXPECT_NEAR(bm.data()[i], 0.3 * bx.data()[i] + 0.6 * by.data()[i], 1e-12);
}

TEST(Blur, SizeMapWithUniformSizeMatchesUniformBlur) {
    const auto img = test::random_image(12, 14, 13);
    BlurSpec map{5, 0.0, std::vector<int>(12 * 14, 5)};
    EXPECT_LT(max_abs_diff(apply_blur(img, map), apply_blur(img, BlurSpec{5, 0.0, {}})), 1e-12);
    map.size_map.assign(12 * 14, 1);
    EXPECT_LT(max_abs_diff(apply_blur(img, map), img), 1e-15);
}

// ---------------------------------------------------------------------------
// simulate_capture

TEST(Simulate, IdentityConfigurationReturnsJ) {
    const auto J = test::random_image(16, 16, 14);
    EXPECT_EQ(max_abs_diff(simulate_capture(J, plain_envelope(16, 16)), J), 0.0);
}

TEST(Simulate, ZeroRadianceLeavesOnlyReflection) {
    const ImagePlane J(16, 16, 0.0);
    auto e = plain_envelope(16, 16);
    e.A_base = test::random_image(16, 16, 15, 0.0, 0.8);
    e.k_A = 0.7;
    e.H = Homography::translation(2, 1);
    ImagePlane scaled = e.A_base;
    for (double& v : scaled.data()) v *= 0.7;
    EXPECT_LT(max_abs_diff(simulate_capture(J, e), warp_image(scaled, e.H, J.size())), 1e-15);
}

TEST(Simulate, ConstantPropagation) {
    const ImagePlane J(16, 16, 0.5);
    auto e = plain_envelope(16, 16);
    e.A_base = ImagePlane(16, 16, 0.2);
    e.k_t = 0.4;
    e.k_A = 1.0;
    for (int k : {1, 5, 9}) {
        e.blur.kernel_size = k;
        const auto I = simulate_capture(J, e);
        for (double v : I.data()) EXPECT_NEAR(v, 0.4, 1e-12);
    }
}

TEST(Simulate, TransmittanceIsClamped) {
    auto e = plain_envelope(16, 16);
    e.t_base = ImagePlane(16, 16, 0.001);
    e.k_t = 0.5;
    const auto tr = simulate_capture_trace(ImagePlane(16, 16, 1.0), e);
    for (double v : tr.transmittance.data()) EXPECT_EQ(v, kMinTransmittance);
}

TEST(Simulate, FixedSeedIsBitIdentical) {
    const auto J = test::random_image(24, 24, 16);
    EnvelopeConfig cfg;
    cfg.kernel_size = 5;
    cfg.k_t = 0.6;
    cfg.k_A = 0.4;
    cfg.gaussian_sigma = 0.02;
    cfg.poisson_scale = 500;
    cfg.seed = 99;
    const auto env = cfg.realize(J.size());
    EXPECT_EQ(simulate_capture(J, env, {30, 20}), simulate_capture(J, env, {30, 20}));
    cfg.seed = 100;
    EXPECT_NE(simulate_capture(J, cfg.realize(J.size()), {30, 20}), simulate_capture(J, env, {30, 20}));
}

TEST(Simulate, OutputInUnitRange) {
    const auto J = test::random_image(24, 24, 17);
    EnvelopeConfig cfg;
    cfg.L = 3.0;
    cfg.k_A = 1.0;
    cfg.gaussian_sigma = 0.2;
    cfg.poisson_scale = 50;
    const auto I = simulate_capture(J, cfg.realize(J.size()), {40, 30});
    EXPECT_TRUE(I.in_unit_range());
    EXPECT_TRUE(I.all_finite());
}

TEST(Simulate, MonotoneInReflection) {
    const auto J = test::random_image(24, 24, 18);
    EnvelopeConfig cfg;
    cfg.kernel_size = 3;
    cfg.k_t = 0.5;
    cfg.homography = {1.2, 0.05, 3, -0.02, 1.1, 2, 0, 0};
    ImagePlane prev;
    for (double kA : {0.0, 0.2, 0.5, 0.9}) {
        cfg.k_A = kA;
        const auto I = simulate_capture(J, cfg.realize(J.size()), {36, 32});
        if (!prev.empty()) {
            for (std::size_t i = 0; i < I.numel(); ++i) EXPECT_GE(I.data()[i], prev.data()[i]);
        }
        prev = I;
    }
}

// ---------------------------------------------------------------------------
// dehaze_inverse

TEST(Dehaze, RecoversJWithoutBlur) {
    const auto J = test::random_image(16, 16, 19);
    const auto A = test::random_image(16, 16, 20, 0.0, 0.3);
    const auto t = test::random_image(16, 16, 21, 0.2, 0.7);
    ImagePlane I(16, 16);
    for (std::size_t i = 0; i < I.numel(); ++i) I.data()[i] = J.data()[i] * t.data()[i] + A.data()[i];
    EXPECT_LT(max_abs_diff(dehaze_inverse(I, A, t), J), 1e-6);
}

TEST(Dehaze, ReflectionOnlyGivesZero) {
    const auto A = test::random_image(16, 16, 22);
    const auto t = test::random_image(16, 16, 23, 0.1, 1.0);
    const auto out = dehaze_inverse(A, A, t);
    for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Dehaze, ClampFloorDivision) {
    const ImagePlane A(8, 8, 0.3), I(8, 8, 0.305), t(8, 8, 0.01);
    const auto out = dehaze_inverse(I, A, t);
    for (double v : out.data()) EXPECT_NEAR(v, 0.5, 1e-9);
}

TEST(Dehaze, RejectsTransmittanceOutsideRange) {
    const ImagePlane A(8, 8, 0.3), I(8, 8, 0.5), t(8, 8, 0.001);
    EXPECT_THROW(dehaze_inverse(I, A, t), std::invalid_argument);
    EXPECT_THROW(dehaze_inverse(I, A, ImagePlane(8, 9, 0.5)), DimensionMismatch);
}

TEST(Dehaze, RoundTripThroughIntegerPose) {
    // With an integer translation the warp is exactly invertible on the interior.
    const auto J = test::random_image(24, 24, 24);
    EnvelopeConfig cfg;
    cfg.kernel_size = 5;
    cfg.k_t = 0.6;
    cfg.k_A = 0.3;
    cfg.homography = {1, 0, 4, 0, 1, 3, 0, 0};
    const auto env = cfg.realize(J.size());
    const auto tr = simulate_capture_trace(J, env, J.size());
    const auto back = warp_image(tr.captured, env.H.inverse(), J.size());
    const auto rec = dehaze_inverse(back, tr.reflectance, tr.transmittance);
    double m = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 24 - 3; ++y)
            for (int x = 0; x < 24 - 4; ++x) {
                const double expect = std::clamp(env.L * tr.blurred.at(c, y, x), 0.0, 1.0);
                m = std::max(m, std::abs(rec.at(c, y, x) - expect));
            }
    EXPECT_LE(m, 1e-5);
}
