// SPDX-License-Identifier: Apache-2.0
#include "ogs/losses.hpp"

#include "ogs/detail/loss_kernels.hpp"

namespace ogs {

double psnr(const Image& a, const Image& b) {
    OGS_REQUIRE(a.same_shape(b), "psnr: image shapes differ");
    return detail::psnr_impl(a, b);
}

double ssim(const Image& a, const Image& b, int window, float sigma) {
    return detail::ssim_impl<float>(a, b, window, sigma, nullptr);
}

std::pair<double, Image> dssim_with_grad(const Image& a, const Image& b, int window,
                                         float sigma) {
    return detail::dssim_impl<float>(a, b, window, sigma);
}

namespace {

void check_views(std::size_t rendered, std::size_t targets) {
    OGS_REQUIRE(rendered == targets, "loss: rendered/target view count mismatch");
    OGS_REQUIRE(rendered > 0, "loss: no views");
}

} // namespace

LossReport loss_fit(const std::vector<FrameBuffer>& rendered, const std::vector<Image>& targets,
                    const LossConfig& cfg, std::vector<std::vector<float>>* upstream) {
    check_views(rendered.size(), targets.size());
    const auto views = rendered.size();
    const float view_scale = 1.0f / static_cast<float>(views);
    if (upstream) upstream->assign(views, {});

    LossReport report;
    for (std::size_t v = 0; v < views; ++v) {
        OGS_REQUIRE(targets[v].channels == kRenderChannels &&
                        targets[v].width == rendered[v].width &&
                        targets[v].height == rendered[v].height,
                    "loss_fit: target shape mismatch at view " + std::to_string(v));
        std::vector<float>* up = nullptr;
        if (upstream) {
            (*upstream)[v].assign(rendered[v].color.size(), 0.f);
            up = &(*upstream)[v];
        }
        if (cfg.use_albedo)
            report.albedo += view_scale * detail::fit_group_loss(rendered[v], targets[v],
                                                                 detail::kAlbedoGroup, cfg.lambda,
                                                                 cfg.ssim_window, cfg.ssim_sigma,
                                                                 up, view_scale);
        if (cfg.use_rough)
            report.rough += view_scale * detail::fit_group_loss(rendered[v], targets[v],
                                                                detail::kRoughGroup, cfg.lambda,
                                                                cfg.ssim_window, cfg.ssim_sigma,
                                                                up, view_scale);
        if (cfg.use_metal)
            report.metal += view_scale * detail::fit_group_loss(rendered[v], targets[v],
                                                                detail::kMetalGroup, cfg.lambda,
                                                                cfg.ssim_window, cfg.ssim_sigma,
                                                                up, view_scale);
    }
    report.total = report.albedo + report.rough + report.metal;
    return report;
}

LossReport loss_total(const std::vector<FrameBuffer>& rendered, const std::vector<Image>& targets,
                      const GaussianSet& predicted, const GaussianSet& prefit,
                      const LossConfig& cfg, std::vector<std::vector<float>>* upstream,
                      std::vector<float>* grad_raw) {
    check_views(rendered.size(), targets.size());
    OGS_REQUIRE(predicted.depth == prefit.depth && predicted.codes == prefit.codes,
                "loss_total: predicted and pre-fit sets use different octrees");
    const auto views = rendered.size();
    const float view_scale = 1.0f / static_cast<float>(views);
    if (upstream) upstream->assign(views, {});

    LossReport report;
    auto hook = [&](const Image& a, const Image& b, std::vector<float>* up, int c0) {
        if (!cfg.perceptual_enabled || !cfg.perceptual) return 0.0;
        auto [value, grad] = cfg.perceptual(a, b);
        if (up) detail::add_group_grad(*up, grad, c0, view_scale);
        return value;
    };

    for (std::size_t v = 0; v < views; ++v) {
        OGS_REQUIRE(targets[v].channels == kRenderChannels &&
                        targets[v].width == rendered[v].width &&
                        targets[v].height == rendered[v].height,
                    "loss_total: target shape mismatch at view " + std::to_string(v));
        std::vector<float>* up = nullptr;
        if (upstream) {
            (*upstream)[v].assign(rendered[v].color.size(), 0.f);
            up = &(*upstream)[v];
        }
        if (cfg.use_albedo) {
            report.albedo += view_scale * detail::total_group_mse(rendered[v], targets[v],
                                                                  detail::kAlbedoGroup, up,
                                                                  view_scale);
            report.albedo += view_scale * hook(detail::fb_group(rendered[v], kChR, 3),
                                               targets[v].slice(kChR, 3), up, kChR);
        }
        if (cfg.use_rough) {
            report.rough += view_scale * detail::total_group_mse(rendered[v], targets[v],
                                                                 detail::kRoughGroup, up,
                                                                 view_scale);
            report.rough += view_scale * hook(detail::fb_group(rendered[v], kChRough, 1),
                                              targets[v].slice(kChRough, 1), up, kChRough);
        }
        if (cfg.use_metal) {
            report.metal += view_scale * detail::total_group_mse(rendered[v], targets[v],
                                                                 detail::kMetalGroup, up,
                                                                 view_scale);
            report.metal += view_scale * hook(detail::fb_group(rendered[v], kChMetal, 1),
                                              targets[v].slice(kChMetal, 1), up, kChMetal);
        }
        if (cfg.use_alpha)
            report.alpha += view_scale * detail::total_group_mse(rendered[v], targets[v],
                                                                 detail::kAlphaGroup, up,
                                                                 view_scale);
    }

    if (cfg.use_l3d) {
        const std::size_t n = predicted.raw.size();
        const double inv_n = 1.0 / static_cast<double>(n);
        double acc = 0;
        if (grad_raw && grad_raw->size() != n) grad_raw->assign(n, 0.f);
        for (std::size_t i = 0; i < n; ++i) {
            const double d =
                static_cast<double>(predicted.raw[i]) - static_cast<double>(prefit.raw[i]);
            acc += d * d;
            if (grad_raw) (*grad_raw)[i] += static_cast<float>(2.0 * d * inv_n);
        }
        report.l3d = acc * inv_n;
    }

    report.total = report.albedo + report.rough + report.metal + report.alpha + report.l3d;
    return report;
}

} // namespace ogs
