#include "nste/metrics.hpp"

#include "nste/kernels/loss_kernels.hpp"

#include <cmath>

namespace nste {

double mse(const ImagePlane& x, const ImagePlane& y) {
    require_same_shape(x, y, "mse");
    return kernels::mean_sq_diff(x.data().data(), y.data().data(), x.numel());
}

double psnr(const ImagePlane& x, const ImagePlane& y) {
    const double e = mse(x, y);
    if (e < kPsnrCapMse) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / e));
}

double rmse(const ImagePlane& x, const ImagePlane& y) { return std::sqrt(mse(x, y)); }

double ssim(const ImagePlane& x, const ImagePlane& y) {
    require_same_shape(x, y, "ssim");
    return kernels::ssim_planar(x.data().data(), y.data().data(), kChannels, x.height(), x.width());
}

MetricsTriple compute_metrics(const ImagePlane& prediction, const ImagePlane& target) {
    return {psnr(prediction, target), rmse(prediction, target), ssim(prediction, target)};
}

double recon_loss(const ImagePlane& J, const ImagePlane& J_hat) {
    require_same_shape(J, J_hat, "recon_loss");
    const double l1 = kernels::mean_abs_diff(J.data().data(), J_hat.data().data(), J.numel());
    return l1 + 1.0 - ssim(J, J_hat);
}

double recon_loss_with_grad(const ImagePlane& J, const ImagePlane& J_hat, std::vector<double>& d_J_hat) {
    require_same_shape(J, J_hat, "recon_loss");
    d_J_hat.assign(J.numel(), 0.0);
    const double l1 = kernels::mean_abs_diff(J.data().data(), J_hat.data().data(), J.numel(), d_J_hat.data());
    const double s = kernels::ssim_planar(J.data().data(), J_hat.data().data(), kChannels, J.height(), J.width(),
                                          d_J_hat.data(), -1.0);
    return l1 + 1.0 - s;
}

}  // namespace nste
