// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ogs/image.hpp"
#include "ogs/splat.hpp"

#include <functional>
#include <vector>

namespace ogs {

// Pluggable perceptual term (the shipped build has no pretrained network;
// the hook contributes 0 unless the caller installs one).
using PerceptualFn =
    std::function<std::pair<double, Image>(const Image& rendered, const Image& target)>;

struct LossConfig {
    float lambda = 0.2f;      // D-SSIM weight in the pre-fit loss
    int ssim_window = 11;
    float ssim_sigma = 1.5f;
    bool use_albedo = true;
    bool use_rough = true;
    bool use_metal = true;
    bool use_alpha = true;
    bool use_l3d = true;
    bool perceptual_enabled = false;
    PerceptualFn perceptual;
};

struct LossReport {
    double total = 0;
    double albedo = 0;
    double rough = 0;
    double metal = 0;
    double alpha = 0;
    double l3d = 0;
};

double psnr(const Image& a, const Image& b);
double ssim(const Image& a, const Image& b, int window = 11, float sigma = 1.5f);

// mean (1-SSIM)/2 and its gradient with respect to `a`
std::pair<double, Image> dssim_with_grad(const Image& a, const Image& b, int window = 11,
                                         float sigma = 1.5f);

// (1-lambda)*L1 + lambda*D-SSIM per channel group (albedo/rough/metal),
// summed over groups, averaged over views. Returns per-view pixel gradients
// in FrameBuffer interleaving.
LossReport loss_fit(const std::vector<FrameBuffer>& rendered, const std::vector<Image>& targets,
                    const LossConfig& cfg, std::vector<std::vector<float>>* upstream = nullptr);

// MSE per channel group + alpha MSE + mean-squared raw-parameter difference,
// with the perceptual hook folded into the image groups when enabled.
LossReport loss_total(const std::vector<FrameBuffer>& rendered, const std::vector<Image>& targets,
                      const GaussianSet& predicted, const GaussianSet& prefit,
                      const LossConfig& cfg, std::vector<std::vector<float>>* upstream = nullptr,
                      std::vector<float>* grad_raw = nullptr);

} // namespace ogs
