#pragma once

#include "nste/image.hpp"

#include <vector>

namespace nste {

/// PSNR reported for (numerically) identical images instead of +inf.
inline constexpr double kPsnrCapDb = 99.0;
inline constexpr double kPsnrCapMse = 1e-10;

struct MetricsTriple {
    double psnr = 0.0;
    double rmse = 0.0;
    double ssim = 0.0;
};

double mse(const ImagePlane& x, const ImagePlane& y);
/// 10 log10(1 / MSE), peak 1, capped at 99 dB.
double psnr(const ImagePlane& x, const ImagePlane& y);
double rmse(const ImagePlane& x, const ImagePlane& y);
/// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
/// C2 = 0.03^2, valid positions only, averaged over the three channels.
double ssim(const ImagePlane& x, const ImagePlane& y);
MetricsTriple compute_metrics(const ImagePlane& prediction, const ImagePlane& target);

/// mean|J - J_hat| + 1 - SSIM(J, J_hat).
double recon_loss(const ImagePlane& J, const ImagePlane& J_hat);
/// recon_loss together with its gradient with respect to J_hat (planar layout).
double recon_loss_with_grad(const ImagePlane& J, const ImagePlane& J_hat, std::vector<double>& d_J_hat);

}  // namespace nste
