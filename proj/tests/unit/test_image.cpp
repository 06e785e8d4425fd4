#include "nste/errors.hpp"
#include "nste/image.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace nste;

TEST(ImagePlane, RejectsTinyImages) {
    EXPECT_THROW(ImagePlane(7, 16), DimensionMismatch);
    EXPECT_THROW(ImagePlane(16, 4), DimensionMismatch);
    EXPECT_NO_THROW(ImagePlane(8, 8));
}

TEST(ImagePlane, PlanarLayoutAndClip) {
    ImagePlane img(8, 10, 0.0);
    img.at(2, 3, 4) = 1.5;
    img.at(0, 0, 0) = -0.2;
    EXPECT_EQ(img.data()[(2 * 8 + 3) * 10 + 4], 1.5);
    EXPECT_FALSE(img.in_unit_range());
    img.clip01();
    EXPECT_TRUE(img.in_unit_range());
    EXPECT_EQ(img.at(2, 3, 4), 1.0);
    EXPECT_EQ(img.at(0, 0, 0), 0.0);
}

TEST(ImagePlane, FiniteCheck) {
    ImagePlane img(8, 8, 0.5);
    EXPECT_TRUE(img.all_finite());
    img.at(1, 1, 1) = std::nan("");
    EXPECT_FALSE(img.all_finite());
}

TEST(ImagePlane, RequireSameShape) {
    EXPECT_THROW(require_same_shape(ImagePlane(8, 8), ImagePlane(8, 9), "x"), DimensionMismatch);
    EXPECT_NO_THROW(require_same_shape(ImagePlane(8, 9), ImagePlane(8, 9), "x"));
}

TEST(Homography, IdentityAndNormalization) {
    const Homography I;
    EXPECT_EQ(I.matrix(), (Homography::Matrix{1, 0, 0, 0, 1, 0, 0, 0, 1}));
    const Homography H(Homography::Matrix{2, 0, 4, 0, 2, 6, 0, 0, 2});
    EXPECT_DOUBLE_EQ(H(2, 2), 1.0);
    EXPECT_DOUBLE_EQ(H(0, 2), 2.0);
}

TEST(Homography, DegenerateInputsThrow) {
    EXPECT_THROW(Homography(Homography::Matrix{1, 0, 0, 0, 1, 0, 0, 0, 0}), DegenerateTransform);
    EXPECT_THROW(Homography(Homography::Matrix{1, 2, 0, 2, 4, 0, 0, 0, 1}), DegenerateTransform);
    const std::array<std::array<double, 2>, 4> collinear{{{0, 0}, {1, 1}, {2, 2}, {3, 3}}};
    EXPECT_THROW(Homography::from_correspondences(collinear, collinear), DegenerateTransform);
}

TEST(Homography, InverseAndCompose) {
    const Homography H = Homography::from_params(std::array<double, 8>{1.1, 0.05, 3.0, -0.02, 0.95, -2.0, 1e-4, -2e-4});
    const Homography R = H.compose(H.inverse());
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(R(r, c), r == c ? 1.0 : 0.0, 1e-12);
    const auto p = H.apply(10.0, 20.0);
    const auto q = H.inverse().apply(p[0], p[1]);
    EXPECT_NEAR(q[0], 10.0, 1e-10);
    EXPECT_NEAR(q[1], 20.0, 1e-10);
    // compose applies the right operand first
    const auto t = Homography::translation(5, 0).compose(Homography::scaling(2, 2)).apply(1, 1);
    EXPECT_DOUBLE_EQ(t[0], 7.0);
    EXPECT_DOUBLE_EQ(t[1], 2.0);
}

TEST(Homography, FromCorrespondencesRecoversKnownTransform) {
    const Homography H = Homography::from_params(std::array<double, 8>{0.9, 0.1, 12.0, -0.05, 1.2, 7.0, 3e-4, 1e-4});
    const std::array<std::array<double, 2>, 4> src{{{0, 0}, {63, 0}, {63, 63}, {0, 63}}};
    std::array<std::array<double, 2>, 4> dst{};
    for (int i = 0; i < 4; ++i) dst[i] = H.apply(src[i][0], src[i][1]);
    const Homography G = Homography::from_correspondences(src, dst);
    for (int i = 0; i < 9; ++i) EXPECT_NEAR(G.matrix()[i], H.matrix()[i], 1e-9);
}

TEST(BlurSpec, DefaultSigmaAndTaps) {
    EXPECT_DOUBLE_EQ(BlurSpec::default_sigma(3), 0.8);
    EXPECT_NEAR(BlurSpec::default_sigma(17), 0.3 * (8 - 1) + 0.8, 1e-15);
    const auto taps = BlurSpec::gaussian_taps(5, 1.0);
    double s = 0;
    for (double t : taps) s += t;
    EXPECT_NEAR(s, 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(taps[0], taps[4]);
    EXPECT_EQ(BlurSpec::gaussian_taps(1, 0.0), std::vector<double>{1.0});
}

TEST(EnvelopeParams, ValidateRanges) {
    EnvelopeParams e;
    e.t_base = ImagePlane(8, 8, 1.0);
    e.A_base = ImagePlane(8, 8, 0.5);
    EXPECT_NO_THROW(e.validate());
    e.k_t = 1.5;
    EXPECT_THROW(e.validate(), ConfigError);
    e.k_t = 1.0;
    e.blur.kernel_size = 4;
    EXPECT_THROW(e.validate(), ConfigError);
    e.blur.kernel_size = 3;
    e.noise.gaussian_sigma = -1;
    EXPECT_THROW(e.validate(), ConfigError);
}
