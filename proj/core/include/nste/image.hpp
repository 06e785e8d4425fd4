#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace nste {

inline constexpr int kChannels = 3;
inline constexpr int kMinImageSide = 8;

struct Size {
    int width = 0;
    int height = 0;
    friend bool operator==(const Size&, const Size&) = default;
};

/// H x W x 3 radiance image, planar (channel-major) storage, values in [0, 1].
class ImagePlane {
public:
    ImagePlane() = default;
    ImagePlane(int height, int width, double fill = 0.0);
    ImagePlane(int height, int width, std::vector<double> planar);

    [[nodiscard]] int height() const { return height_; }
    [[nodiscard]] int width() const { return width_; }
    [[nodiscard]] Size size() const { return {width_, height_}; }
    [[nodiscard]] std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
    [[nodiscard]] std::size_t numel() const { return data_.size(); }
    [[nodiscard]] bool empty() const { return data_.empty(); }

    double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
    [[nodiscard]] double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

    [[nodiscard]] std::span<double> data() { return data_; }
    [[nodiscard]] std::span<const double> data() const { return data_; }
    [[nodiscard]] std::span<double> channel(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
    [[nodiscard]] std::span<const double> channel(int c) const {
        return {data_.data() + c * plane_size(), plane_size()};
    }

    void clip01();
    [[nodiscard]] bool all_finite() const;
    [[nodiscard]] bool in_unit_range() const;
    [[nodiscard]] bool same_shape(const ImagePlane& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    friend bool operator==(const ImagePlane&, const ImagePlane&) = default;

private:
    [[nodiscard]] std::size_t index(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

void require_same_shape(const ImagePlane& a, const ImagePlane& b, const char* what);

/// 3x3 projective transform, row-major, normalized so that h33 == 1.
class Homography {
public:
    using Matrix = std::array<double, 9>;

    Homography();
    /// Throws DegenerateTransform when m[8] is zero or the matrix is singular.
    explicit Homography(const Matrix& m);

    static Homography identity() { return {}; }
    /// Eight row-major entries; h33 is implied.
    static Homography from_params(std::span<const double> eight);
    static Homography translation(double tx, double ty);
    static Homography scaling(double sx, double sy);
    /// Direct linear transform through four point correspondences src[i] -> dst[i].
    static Homography from_correspondences(const std::array<std::array<double, 2>, 4>& src,
                                           const std::array<std::array<double, 2>, 4>& dst);

    [[nodiscard]] const Matrix& matrix() const { return m_; }
    [[nodiscard]] double operator()(int r, int c) const { return m_[r * 3 + c]; }
    [[nodiscard]] std::array<double, 8> params() const;
    [[nodiscard]] double determinant() const;
    [[nodiscard]] Homography inverse() const;
    [[nodiscard]] std::array<double, 2> apply(double x, double y) const;

    /// this * rhs, i.e. rhs is applied first.
    [[nodiscard]] Homography compose(const Homography& rhs) const;

    friend bool operator==(const Homography&, const Homography&) = default;

private:
    Matrix m_;
};

/// Raw 3x3 product without normalization; used by gradient code.
Homography::Matrix matmul3(const Homography::Matrix& a, const Homography::Matrix& b);
/// Raw inverse without the h33 normalization. Throws DegenerateTransform when singular.
Homography::Matrix invert3(const Homography::Matrix& m);

inline constexpr double kMinDeterminant = 1e-8;

struct BlurSpec {
    int kernel_size = 1;
    /// Gaussian standard deviation in pixels; <= 0 selects the size-derived default.
    double sigma = 0.0;
    /// Optional per-pixel odd kernel sizes (row-major, H*W). Empty means uniform.
    std::vector<int> size_map;

    [[nodiscard]] double effective_sigma() const;
    static double default_sigma(int kernel_size);
    /// Normalized 1-D Gaussian taps of length kernel_size.
    static std::vector<double> gaussian_taps(int kernel_size, double sigma);
};

struct NoiseSpec {
    double gaussian_sigma = 0.0;
    double poisson_scale = 0.0;
    std::uint64_t seed = 0;

    [[nodiscard]] bool enabled() const { return gaussian_sigma > 0.0 || poisson_scale > 0.0; }
};

inline constexpr double kMinTransmittance = 0.01;

struct EnvelopeParams {
    double L = 1.0;
    Homography H;
    BlurSpec blur;
    double k_t = 1.0;
    double k_A = 0.0;
    ImagePlane t_base;
    ImagePlane A_base;
    NoiseSpec noise;

    /// Throws ConfigError on out-of-range coefficients.
    void validate() const;
};

}  // namespace nste
