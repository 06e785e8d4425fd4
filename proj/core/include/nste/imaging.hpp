#pragma once

#include "nste/image.hpp"

#include <array>
#include <vector>

namespace nste {

/// output(y) = bilinear(img, H^-1 y), zero outside the source. H maps source
/// pixel coordinates to output pixel coordinates.
ImagePlane warp_image(const ImagePlane& img, const Homography& H, Size out_size);

struct WarpGradients {
    std::vector<double> d_image;     ///< dL/dimg, planar like the source image
    std::array<double, 8> d_params;  ///< dL/dh11 .. dL/dh32 (h33 fixed)
};

/// Vector-Jacobian product of warp_image for an upstream gradient d_out.
WarpGradients warp_image_backward(const ImagePlane& img, const Homography& H, Size out_size,
                                  const std::vector<double>& d_out);

/// Converts a homography expressed on [-1, 1] normalized coordinates (pixel
/// centers, align_corners = false) into pixel coordinates.
Homography normalized_to_pixel(const Homography& normalized, Size src, Size dst);
Homography::Matrix pixel_from_normalized(Size size);
Homography::Matrix normalized_from_pixel(Size size);

/// Bilinear resize; equal to warping with the identity on normalized coordinates.
ImagePlane resize_bilinear(const ImagePlane& img, Size out_size);

/// Gaussian blur with reflect-101 borders. Linear; no clipping.
ImagePlane apply_blur(const ImagePlane& img, const BlurSpec& blur);

/// Intermediate stages of the forward image-formation model.
struct CaptureTrace {
    ImagePlane blurred;       ///< J convolved with the envelope kernel
    ImagePlane transmittance; ///< clamp(k_t * t_base, 0.01, 1)
    ImagePlane reflectance;   ///< k_A * A_base
    ImagePlane canonical;     ///< clip(L * blurred * t + gauss) + k_A * A_base, content frame
    ImagePlane captured;      ///< final camera image
};

/// Full forward model. Output size defaults to the content size.
CaptureTrace simulate_capture_trace(const ImagePlane& J, const EnvelopeParams& env, Size capture_size = {});
ImagePlane simulate_capture(const ImagePlane& J, const EnvelopeParams& env, Size capture_size = {});

/// (I - A) / t clipped to [0, 1]. Requires t inside [0.01, 1].
ImagePlane dehaze_inverse(const ImagePlane& I_warped, const ImagePlane& A, const ImagePlane& t);

}  // namespace nste
