// SPDX-License-Identifier: Apache-2.0
#include "ogs/fitting.hpp"

#include "ogs/detail/loss_kernels.hpp"
#include "ogs/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace ogs {

void Adam::step(std::vector<float>& params, std::vector<float>& grads) {
    OGS_REQUIRE(params.size() == m_.size() && grads.size() == m_.size(),
                "adam: parameter/gradient size mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            const std::string where = label_ ? label_(i) : ("element " + std::to_string(i));
            throw Error("adam: non-finite gradient at " + where);
        }
    }
    if (cfg_.clip_norm > 0.f) {
        double sq = 0;
        for (const float g : grads) sq += static_cast<double>(g) * g;
        const double norm = std::sqrt(sq);
        if (norm > cfg_.clip_norm) {
            const float scale = static_cast<float>(cfg_.clip_norm / norm);
            for (float& g : grads) g *= scale;
        }
    }
    ++t_;
    const float bc1 = 1.f - std::pow(cfg_.beta1, static_cast<float>(t_));
    const float bc2 = 1.f - std::pow(cfg_.beta2, static_cast<float>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = cfg_.beta1 * m_[i] + (1.f - cfg_.beta1) * grads[i];
        v_[i] = cfg_.beta2 * v_[i] + (1.f - cfg_.beta2) * grads[i] * grads[i];
        const float mhat = m_[i] / bc1;
        const float vhat = v_[i] / bc2;
        const float lr = lr_scale_.empty() ? cfg_.lr : cfg_.lr * lr_scale_[i];
        float update = mhat / (std::sqrt(vhat) + cfg_.eps);
        if (cfg_.weight_decay > 0.f) update += cfg_.weight_decay * params[i];
        params[i] -= lr * update;
    }
}

double buffer_psnr(const FrameBuffer& fb, const Image& target, int c0, int channels) {
    double mse = 0;
    const std::size_t np = fb.transmittance.size();
    for (int c = 0; c < channels; ++c) {
        const float* tp = target.plane(c0 + c);
        for (std::size_t p = 0; p < np; ++p) {
            const double d = static_cast<double>(fb.color[p * kRenderChannels + c0 + c]) -
                             static_cast<double>(tp[p]);
            mse += d * d;
        }
    }
    mse /= static_cast<double>(np * static_cast<std::size_t>(channels));
    if (mse < 1e-10) return 99.0;
    return 10.0 * std::log10(1.0 / mse);
}

std::vector<FitHistoryRow> fit_gaussian_set(GaussianSet& set, const ViewSet& targets,
                                            const FitConfig& cfg) {
    OGS_REQUIRE(targets.count() > 0, "fit: no target views");
    OGS_REQUIRE(static_cast<std::size_t>(targets.count()) == targets.images.size(),
                "fit: camera/image count mismatch");
    OGS_REQUIRE(cfg.iterations >= 1 && cfg.views_per_step >= 1, "fit: bad config");

    const std::size_t n = set.codes.size();
    AdamConfig acfg;
    acfg.lr = 1.f;
    acfg.beta1 = cfg.beta1;
    acfg.beta2 = cfg.beta2;
    acfg.clip_norm = cfg.clip_norm;
    Adam adam(set.raw.size(), acfg);
    std::vector<float> lr_scale(set.raw.size());
    for (int ch = 0; ch < GaussianSet::kChannels; ++ch) {
        const bool geom = ch >= GaussianSet::kScaleX && ch <= GaussianSet::kQuatZ;
        const float lr = geom ? cfg.lr_geom : cfg.lr_color;
        std::fill_n(lr_scale.begin() + static_cast<std::ptrdiff_t>(ch * n), n, lr);
    }
    adam.set_lr_scale(std::move(lr_scale));
    adam.set_label([n](std::size_t i) {
        return "gaussian " + std::to_string(i % n) + " channel " + std::to_string(i / n);
    });

    LossConfig lcfg;
    lcfg.lambda = cfg.lambda;

    RenderConfig rcfg;
    rcfg.background = targets.background;

    Rng rng = Rng(cfg.seed).fork(0x666974); // per-step view draws
    std::vector<FitHistoryRow> history;
    std::vector<int> view_ids(static_cast<std::size_t>(cfg.views_per_step));
    std::vector<float> grads(set.raw.size());

    for (int step = 1; step <= cfg.iterations; ++step) {
        // distinct views per step (all of them when the set is small)
        const int v_total = targets.count();
        if (cfg.views_per_step >= v_total) {
            view_ids.resize(static_cast<std::size_t>(v_total));
            for (int v = 0; v < v_total; ++v) view_ids[static_cast<std::size_t>(v)] = v;
        } else {
            view_ids.resize(static_cast<std::size_t>(cfg.views_per_step));
            for (auto& id : view_ids) id = static_cast<int>(rng.below(v_total));
            std::sort(view_ids.begin(), view_ids.end());
            view_ids.erase(std::unique(view_ids.begin(), view_ids.end()), view_ids.end());
        }

        const auto act = activate_params(set);
        std::vector<FrameBuffer> rendered;
        std::vector<RenderCache<float>> caches(view_ids.size());
        std::vector<Image> step_targets;
        rendered.reserve(view_ids.size());
        for (std::size_t k = 0; k < view_ids.size(); ++k) {
            const int v = view_ids[k];
            rendered.push_back(rasterize_forward(act, set.positions,
                                                 targets.cams[static_cast<std::size_t>(v)], rcfg,
                                                 &caches[k]));
            step_targets.push_back(targets.images[static_cast<std::size_t>(v)]);
        }

        std::vector<std::vector<float>> upstream;
        const LossReport report = loss_fit(rendered, step_targets, lcfg, &upstream);

        std::fill(grads.begin(), grads.end(), 0.f);
        for (std::size_t k = 0; k < view_ids.size(); ++k)
            rasterize_backward(set, act, targets.cams[static_cast<std::size_t>(view_ids[k])],
                               rcfg, rendered[k], caches[k], upstream[k], grads);
        adam.step(set.raw, grads);

        if (step == 1 || step % cfg.log_every == 0 || step == cfg.iterations) {
            FitHistoryRow row;
            row.step = step;
            row.report = report;
            row.psnr = buffer_psnr(rendered[0], step_targets[0], kChR, 3);
            history.push_back(row);
            if (cfg.verbose)
                std::fprintf(stderr, "step %6d  loss %.6f  psnr %.2f\n", step, report.total,
                             row.psnr);
        }
    }
    return history;
}

FitResult fit_gaussians(const Octree& tree, const ViewSet& targets, const FitConfig& cfg) {
    FitResult out;
    out.gaussians = GaussianSet::init_from_octree(tree);
    out.history = fit_gaussian_set(out.gaussians, targets, cfg);
    return out;
}

FitResult fit_voxel_baseline(int resolution, const ViewSet& targets, const FitConfig& cfg) {
    OGS_REQUIRE(resolution >= 2 && resolution <= 128,
                "fit_voxel_baseline: resolution exceeds the desk-scale memory budget");
    int depth = 0;
    while ((1 << depth) < resolution) ++depth;
    OGS_REQUIRE((1 << depth) == resolution, "fit_voxel_baseline: resolution must be a power of 2");

    FitResult out;
    out.gaussians = GaussianSet::init_from_octree(build_dense_octree(depth));
    out.history = fit_gaussian_set(out.gaussians, targets, cfg);
    return out;
}

void write_loss_csv(const std::string& path, const std::vector<FitHistoryRow>& rows) {
    std::ofstream out(path);
    OGS_REQUIRE(out.good(), "cannot write csv: " + path);
    out << "step,total,albedo,roughness,metallic,alpha,l3d,psnr\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.4f\n", r.step,
                      r.report.total, r.report.albedo, r.report.rough, r.report.metal,
                      r.report.alpha, r.report.l3d, r.psnr);
        out << buf;
    }
}

} // namespace ogs
