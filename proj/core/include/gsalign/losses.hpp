#pragma once

#include "gsalign/gaussian_map.hpp"
#include "gsalign/types.hpp"

#include <vector>

namespace gsalign {

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

/// Value and gradient of a scalar image loss.
struct ImageLoss {
    double value = 0.0;
    Image grad;
};

/// (1 - lambda_ssim) * mean|rendered - target| + lambda_ssim * (1 - SSIM), with its
/// gradient w.r.t. `rendered`.
ImageLoss rendered_loss(const Image& rendered, const Image& target, double lambda_ssim = 0.2,
                        const SsimOptions& ssim = {});

/// Mean absolute error and its gradient (sign / count, zero at ties).
ImageLoss l1_loss(const Image& rendered, const Image& target);

/// 1 - mean SSIM and its gradient w.r.t. `rendered`. Gaussian window, reflection padding.
ImageLoss ssim_loss(const Image& rendered, const Image& target, const SsimOptions& ssim = {});

struct OpacityRegularization {
    double value = 0.0;
    /// d value / d opacity_logit per primitive.
    std::vector<double> grad_logit;
};

/// Mean of activated opacities over all primitives. Defined as 0 for an empty map.
OpacityRegularization opacity_reg(const GaussianMap& map);

/// Same from already activated opacities; the gradient is then w.r.t. each opacity.
OpacityRegularization opacity_reg(const std::vector<double>& opacities);

double total_loss(double rendered, double opacity_reg, double lambda_o);

struct LossBreakdown {
    double l1 = 0.0;
    double ssim_loss = 0.0;
    double rendered = 0.0;
    double opacity_reg = 0.0;
    double total = 0.0;
    Image grad_image;
    std::vector<double> grad_opacity_logit;
};

/// Full training objective: rendered loss plus lambda_o times the opacity penalty.
LossBreakdown training_loss(const Image& rendered, const Image& target, const GaussianMap& map,
                            double lambda_ssim, double lambda_o, const SsimOptions& ssim = {});

/// 10 log10(1 / MSE), capped at 100 dB when MSE < 1e-10.
double psnr(const Image& a, const Image& b);
double mse(const Image& a, const Image& b);
/// Mean local SSIM over all pixels and channels.
double ssim_metric(const Image& a, const Image& b, const SsimOptions& ssim = {});

}  // namespace gsalign
