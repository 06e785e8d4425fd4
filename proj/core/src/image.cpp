#include "nste/image.hpp"

#include "nste/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace nste {

ImagePlane::ImagePlane(int height, int width, double fill)
    : height_(height), width_(width) {
    if (height < kMinImageSide || width < kMinImageSide) {
        throw DimensionMismatch("ImagePlane: sides must be >= 8, got " + std::to_string(height) + "x" +
                                    std::to_string(width));
    }
    data_.assign(static_cast<std::size_t>(kChannels) * height * width, fill);
}

ImagePlane::ImagePlane(int height, int width, std::vector<double> planar)
    : height_(height), width_(width), data_(std::move(planar)) {
    if (height < kMinImageSide || width < kMinImageSide) {
        throw DimensionMismatch("ImagePlane: sides must be >= 8");
    }
    if (data_.size() != static_cast<std::size_t>(kChannels) * height * width) {
        throw DimensionMismatch("ImagePlane: buffer size does not match 3 x H x W");
    }
}

void ImagePlane::clip01() {
    for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

bool ImagePlane::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool ImagePlane::in_unit_range() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

void require_same_shape(const ImagePlane& a, const ImagePlane& b, const char* what) {
    if (!a.same_shape(b)) {
        throw DimensionMismatch(std::string(what) + ": image dimensions differ (" + std::to_string(a.height()) + "x" +
                                std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                                std::to_string(b.width()) + ")");
    }
}

// ---------------------------------------------------------------------------
// Homography

namespace {

double det3(const Homography::Matrix& m) {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Homography::Matrix normalized(const Homography::Matrix& m) {
    if (!(std::abs(m[8]) > 1e-12) || !std::isfinite(m[8])) {
        throw DegenerateTransform("homography: h33 vanishes, cannot normalize");
    }
    Homography::Matrix out;
    for (int i = 0; i < 9; ++i) out[i] = m[i] / m[8];
    out[8] = 1.0;
    return out;
}

}  // namespace

Homography::Matrix matmul3(const Homography::Matrix& a, const Homography::Matrix& b) {
    Homography::Matrix out{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            out[r * 3 + c] = a[r * 3] * b[c] + a[r * 3 + 1] * b[3 + c] + a[r * 3 + 2] * b[6 + c];
    return out;
}

Homography::Matrix invert3(const Homography::Matrix& m) {
    const double det = det3(m);
    if (!(std::abs(det) > kMinDeterminant) || !std::isfinite(det)) {
        throw DegenerateTransform("homography: singular matrix (|det| <= 1e-8)");
    }
    const double inv = 1.0 / det;
    return {(m[4] * m[8] - m[5] * m[7]) * inv, (m[2] * m[7] - m[1] * m[8]) * inv, (m[1] * m[5] - m[2] * m[4]) * inv,
            (m[5] * m[6] - m[3] * m[8]) * inv, (m[0] * m[8] - m[2] * m[6]) * inv, (m[2] * m[3] - m[0] * m[5]) * inv,
            (m[3] * m[7] - m[4] * m[6]) * inv, (m[1] * m[6] - m[0] * m[7]) * inv, (m[0] * m[4] - m[1] * m[3]) * inv};
}

Homography::Homography() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

Homography::Homography(const Matrix& m) : m_(normalized(m)) {
    const double det = det3(m_);
    if (!(std::abs(det) > kMinDeterminant) || !std::isfinite(det)) {
        throw DegenerateTransform("homography: singular matrix (|det| <= 1e-8)");
    }
}

Homography Homography::from_params(std::span<const double> eight) {
    if (eight.size() != 8) throw std::invalid_argument("homography: expected 8 parameters");
    return Homography(Matrix{eight[0], eight[1], eight[2], eight[3], eight[4], eight[5], eight[6], eight[7], 1.0});
}

Homography Homography::translation(double tx, double ty) { return Homography(Matrix{1, 0, tx, 0, 1, ty, 0, 0, 1}); }

Homography Homography::scaling(double sx, double sy) { return Homography(Matrix{sx, 0, 0, 0, sy, 0, 0, 0, 1}); }

Homography Homography::from_correspondences(const std::array<std::array<double, 2>, 4>& src,
                                            const std::array<std::array<double, 2>, 4>& dst) {
    Eigen::Matrix<double, 8, 8> a;
    Eigen::Matrix<double, 8, 1> b;
    for (int i = 0; i < 4; ++i) {
        const double x = src[i][0], y = src[i][1], u = dst[i][0], v = dst[i][1];
        a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
        a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
        b(2 * i) = u;
        b(2 * i + 1) = v;
    }
    Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(a);
    if (!lu.isInvertible()) throw DegenerateTransform("homography: degenerate point correspondences");
    const Eigen::Matrix<double, 8, 1> h = lu.solve(b);
    return Homography(Matrix{h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0});
}

std::array<double, 8> Homography::params() const {
    return {m_[0], m_[1], m_[2], m_[3], m_[4], m_[5], m_[6], m_[7]};
}

double Homography::determinant() const { return det3(m_); }

Homography Homography::inverse() const { return Homography(invert3(m_)); }

std::array<double, 2> Homography::apply(double x, double y) const {
    const double w = m_[6] * x + m_[7] * y + m_[8];
    return {(m_[0] * x + m_[1] * y + m_[2]) / w, (m_[3] * x + m_[4] * y + m_[5]) / w};
}

Homography Homography::compose(const Homography& rhs) const { return Homography(matmul3(m_, rhs.m_)); }

// ---------------------------------------------------------------------------
// BlurSpec / EnvelopeParams

double BlurSpec::default_sigma(int kernel_size) {
    // Same size-to-sigma rule as OpenCV's getGaussianKernel.
    return 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8;
}

double BlurSpec::effective_sigma() const { return sigma > 0.0 ? sigma : default_sigma(kernel_size); }

std::vector<double> BlurSpec::gaussian_taps(int kernel_size, double sigma) {
    if (kernel_size < 1 || kernel_size % 2 == 0) {
        throw std::invalid_argument("blur: kernel_size must be a positive odd integer, got " +
                                    std::to_string(kernel_size));
    }
    std::vector<double> taps(static_cast<std::size_t>(kernel_size));
    if (kernel_size == 1) {
        taps[0] = 1.0;
        return taps;
    }
    const int r = kernel_size / 2;
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        taps[i + r] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += taps[i + r];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

void EnvelopeParams::validate() const {
    if (!(L > 0.0) || !std::isfinite(L)) throw ConfigError("envelope: L must be > 0");
    if (!(k_t > 0.0 && k_t <= 1.0)) throw ConfigError("envelope: k_t must lie in (0, 1]");
    if (!(k_A >= 0.0 && k_A <= 1.0)) throw ConfigError("envelope: k_A must lie in [0, 1]");
    if (blur.kernel_size < 1 || blur.kernel_size % 2 == 0) throw ConfigError("envelope: blur.kernel_size must be odd");
    if (blur.sigma < 0.0) throw ConfigError("envelope: blur.sigma must be >= 0");
    if (noise.gaussian_sigma < 0.0 || noise.poisson_scale < 0.0) throw ConfigError("envelope: noise strengths must be >= 0");
    if (!t_base.empty() && !A_base.empty() && !t_base.same_shape(A_base)) {
        throw ConfigError("envelope: t_base and A_base dimensions differ");
    }
}

}  // namespace nste
