// SPDX-License-Identifier: Apache-2.0
#include "ogs/losses.hpp"

#include "ogs/detail/loss_kernels.hpp"
#include "ogs/rng.hpp"

#include <doctest.h>

using namespace ogs;

namespace {

Image constant_image(int w, int h, int c, float v) { return Image(w, h, c, v); }

ImageD random_image(std::uint64_t seed, int w, int h, int c) {
    Rng rng(seed);
    ImageD img(w, h, c);
    for (auto& v : img.data) v = rng.uniform();
    return img;
}

FrameBuffer fb_from_image(const Image& img) {
    FrameBuffer fb(img.width, img.height);
    for (int c = 0; c < kRenderChannels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) fb.pixel(y, x)[c] = img.at(c, y, x);
    return fb;
}

} // namespace

TEST_CASE("ssim/dssim closed forms") {
    SUBCASE("identical images give SSIM 1, D-SSIM 0, zero gradient") {
        const Image a = constant_image(16, 16, 3, 0.3f);
        CHECK(ssim(a, a) == doctest::Approx(1.0));
        const auto [v, g] = dssim_with_grad(a, a);
        CHECK(v == doctest::Approx(0.0));
        for (const float x : g.data) CHECK(std::abs(x) <= 1e-7f);
    }
    SUBCASE("constant 0.5 vs 0.6: SSIM = 0.6001/0.6101") {
        const Image a = constant_image(24, 24, 1, 0.5f);
        const Image b = constant_image(24, 24, 1, 0.6f);
        const double expected = 0.6001 / 0.6101;
        CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-6));
        const auto [ds, g] = dssim_with_grad(a, b);
        CHECK(ds == doctest::Approx(0.5 * (1.0 - expected)).epsilon(1e-6)); // ~0.00820
    }
    SUBCASE("shape mismatch") {
        const Image a = constant_image(8, 8, 1, 0.f);
        const Image b = constant_image(9, 8, 1, 0.f);
        CHECK_THROWS_AS(ssim(a, b), Error);
    }
}

TEST_CASE("dssim gradient matches finite differences on random 8x8 images (double)") {
    const int w = 8, h = 8;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        ImageD a = random_image(seed * 2 + 1, w, h, 2);
        const ImageD b = random_image(seed * 2 + 2, w, h, 2);
        const auto [v0, grad] = detail::dssim_impl<double>(a, b, 11, 1.5);
        (void)v0;
        const double eps = 1e-5;
        Rng pick(seed);
        for (int k = 0; k < 40; ++k) {
            const auto i = static_cast<std::size_t>(pick.below(a.data.size()));
            const double orig = a.data[i];
            a.data[i] = orig + eps;
            const double fp = detail::dssim_impl<double>(a, b, 11, 1.5).first;
            a.data[i] = orig - eps;
            const double fm = detail::dssim_impl<double>(a, b, 11, 1.5).first;
            a.data[i] = orig;
            const double fd = (fp - fm) / (2 * eps);
            const double rel = std::abs(fd - grad.data[i]) /
                               std::max({std::abs(fd), std::abs(grad.data[i]), 1e-8});
            CHECK(rel <= 1e-4);
        }
    }
}

TEST_CASE("psnr closed forms and cap") {
    const Image a = constant_image(10, 10, 1, 0.5f);
    const Image b = constant_image(10, 10, 1, 0.6f);
    // mse 0.01 -> 20 dB
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-4));
    CHECK(psnr(a, a) == doctest::Approx(99.0));
    CHECK(ssim(a, a) == doctest::Approx(1.0));
}

TEST_CASE("loss_fit: eq-1 composition and limits") {
    // single-channel pair handled as the roughness group
    const int w = 24, h = 24;
    Image rendered_img(w, h, kRenderChannels, 0.f);
    Image target(w, h, kRenderChannels, 0.f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            rendered_img.at(kChRough, y, x) = 0.5f;
            target.at(kChRough, y, x) = 0.6f;
        }
    LossConfig cfg;
    cfg.use_albedo = false;
    cfg.use_metal = false;

    SUBCASE("0.8*0.1 + 0.2*0.00820 = 0.08164") {
        const auto report =
            loss_fit({fb_from_image(rendered_img)}, {target}, cfg, nullptr);
        CHECK(report.total == doctest::Approx(0.0816393).epsilon(2e-4));
        CHECK(report.rough == report.total);
    }
    SUBCASE("lambda = 0 degrades to pure L1") {
        cfg.lambda = 0.f;
        const auto report = loss_fit({fb_from_image(rendered_img)}, {target}, cfg, nullptr);
        CHECK(report.total == doctest::Approx(0.1).epsilon(1e-6));
    }
    SUBCASE("exact match gives zero") {
        const auto report = loss_fit({fb_from_image(target)}, {target}, cfg, nullptr);
        CHECK(report.total == doctest::Approx(0.0));
    }
    SUBCASE("view-count mismatch raises") {
        CHECK_THROWS_AS(loss_fit({fb_from_image(target)}, {}, cfg, nullptr), Error);
    }
}

TEST_CASE("loss_fit is permutation-invariant over views") {
    Rng rng(5);
    std::vector<FrameBuffer> rendered;
    std::vector<Image> targets;
    for (int v = 0; v < 3; ++v) {
        Image img(12, 12, kRenderChannels);
        Image tgt(12, 12, kRenderChannels);
        for (auto& x : img.data) x = rng.uniformf();
        for (auto& x : tgt.data) x = rng.uniformf();
        rendered.push_back(fb_from_image(img));
        targets.push_back(tgt);
    }
    LossConfig cfg;
    const auto a = loss_fit(rendered, targets, cfg, nullptr);
    std::swap(rendered[0], rendered[2]);
    std::swap(targets[0], targets[2]);
    const auto b = loss_fit(rendered, targets, cfg, nullptr);
    CHECK(a.total == doctest::Approx(b.total).epsilon(1e-12));
}

TEST_CASE("loss_fit gradient matches finite differences (double path)") {
    using namespace ogs::detail;
    const int w = 8, h = 8;
    Rng rng(9);
    FrameBufferT<double> fb(w, h);
    ImageT<double> target(w, h, kRenderChannels);
    for (auto& v : fb.color) v = rng.uniform();
    for (auto& v : target.data) v = rng.uniform();

    const double lambda = 0.2;
    auto value = [&](const FrameBufferT<double>& f) {
        double total = 0;
        for (const auto& g : {kAlbedoGroup, kRoughGroup, kMetalGroup}) {
            std::vector<double>* up = nullptr;
            total += fit_group_loss<double>(f, target, g, lambda, 11, 1.5, up, 1.0);
        }
        return total;
    };

    std::vector<double> upstream(fb.color.size(), 0.0);
    for (const auto& g : {kAlbedoGroup, kRoughGroup, kMetalGroup})
        fit_group_loss<double>(fb, target, g, lambda, 11, 1.5, &upstream, 1.0);

    const double eps = 1e-5;
    for (int k = 0; k < 60; ++k) {
        const auto i = static_cast<std::size_t>(rng.below(fb.color.size()));
        if (static_cast<int>(i % kRenderChannels) == kChAlpha) continue; // alpha unused in eq-1
        FrameBufferT<double> pert = fb;
        pert.color[i] += eps;
        const double fp = value(pert);
        pert.color[i] -= 2 * eps;
        const double fm = value(pert);
        const double fd = (fp - fm) / (2 * eps);
        const double rel =
            std::abs(fd - upstream[i]) / std::max({std::abs(fd), std::abs(upstream[i]), 1e-8});
        CHECK(rel <= 1e-4);
    }
}

namespace {

GaussianSet tiny_set(int n, float fill) {
    GaussianSet set;
    set.depth = 2;
    set.codes.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) set.codes[static_cast<std::size_t>(i)] = static_cast<std::uint64_t>(i);
    set.positions.setZero(n, 3);
    set.raw.assign(static_cast<std::size_t>(13 * n), fill);
    return set;
}

} // namespace

TEST_CASE("loss_total: components, L_3D, octree mismatch") {
    const int w = 8, h = 8;
    Image target(w, h, kRenderChannels, 0.25f);
    const FrameBuffer fb = fb_from_image(target);
    const GaussianSet pred = tiny_set(4, 1.f);
    const GaussianSet prefit = tiny_set(4, 0.f);

    LossConfig cfg;
    SUBCASE("all components zero at the global minimum") {
        const auto report = loss_total({fb}, {target}, prefit, prefit, cfg, nullptr, nullptr);
        CHECK(report.total == doctest::Approx(0.0));
    }
    SUBCASE("L_3D of +1 offset is exactly 1; symmetric in its arguments") {
        const auto r1 = loss_total({fb}, {target}, pred, prefit, cfg, nullptr, nullptr);
        CHECK(r1.l3d == doctest::Approx(1.0));
        const auto r2 = loss_total({fb}, {target}, prefit, pred, cfg, nullptr, nullptr);
        CHECK(r2.l3d == doctest::Approx(r1.l3d));
        CHECK(r1.total ==
              doctest::Approx(r1.albedo + r1.rough + r1.metal + r1.alpha + r1.l3d).epsilon(1e-9));
    }
    SUBCASE("toggles: alpha-only reproduces a pure silhouette objective") {
        cfg.use_albedo = cfg.use_rough = cfg.use_metal = cfg.use_l3d = false;
        Image off_target = target;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) off_target.at(kChAlpha, y, x) = 0.75f;
        const auto report = loss_total({fb}, {off_target}, pred, pred, cfg, nullptr, nullptr);
        CHECK(report.alpha == doctest::Approx(0.25));
        CHECK(report.total == doctest::Approx(report.alpha));
    }
    SUBCASE("different octrees raise") {
        GaussianSet other = prefit;
        other.codes[0] = 99;
        CHECK_THROWS_AS(loss_total({fb}, {target}, other, prefit, cfg, nullptr, nullptr), Error);
    }
    SUBCASE("L_3D gradient is 2(pred - prefit)/n") {
        std::vector<float> grad;
        loss_total({fb}, {target}, pred, prefit, cfg, nullptr, &grad);
        REQUIRE(grad.size() == pred.raw.size());
        const float expected = 2.f / static_cast<float>(pred.raw.size());
        for (const float g : grad) CHECK(g == doctest::Approx(expected));
    }
}

TEST_CASE("loss_total honors the perceptual hook when enabled") {
    const int w = 4, h = 4;
    Image target(w, h, kRenderChannels, 0.25f);
    const FrameBuffer fb = fb_from_image(target);
    const GaussianSet set = tiny_set(2, 0.f);

    LossConfig cfg;
    cfg.use_rough = cfg.use_metal = cfg.use_alpha = cfg.use_l3d = false;
    int calls = 0;
    cfg.perceptual = [&calls](const Image& a, const Image&) {
        ++calls;
        return std::make_pair(0.125, Image(a.width, a.height, a.channels, 0.f));
    };

    // disabled by default
    auto report = loss_total({fb}, {target}, set, set, cfg, nullptr, nullptr);
    CHECK(calls == 0);
    CHECK(report.total == doctest::Approx(0.0));

    cfg.perceptual_enabled = true;
    report = loss_total({fb}, {target}, set, set, cfg, nullptr, nullptr);
    CHECK(calls == 1);
    CHECK(report.albedo == doctest::Approx(0.125));
}
