// SPDX-License-Identifier: Apache-2.0
#include "ogs/splat.hpp"

#include "ogs/detail/splat_kernels.hpp"
#include "ogs/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace ogs;

namespace {

// camera whose central pixel center is exactly at (cx, cy)
Camera axis_camera(int size = 17, float fx = 100.f) {
    Camera cam;
    cam.width = size;
    cam.height = size;
    cam.fx = cam.fy = fx;
    cam.cx = cam.cy = size / 2.0;
    cam.R = Mat3d::Identity();
    cam.t = Vec3d(0, 0, 2); // origin at view depth 2
    return cam;
}

struct Scene {
    MatX3f positions;
    std::vector<double> raw;
    int count = 0;
};

Scene random_scene(std::uint64_t seed, int count) {
    Rng rng(seed);
    Scene s;
    s.count = count;
    s.positions.resize(count, 3);
    const auto n = static_cast<std::size_t>(count);
    s.raw.assign(13 * n, 0.0);
    for (int i = 0; i < count; ++i) {
        for (int c = 0; c < 3; ++c) s.positions(i, c) = static_cast<float>(rng.uniform(-0.5, 0.5));
        s.raw[GaussianSet::kOpacity * n + static_cast<std::size_t>(i)] = rng.uniform(-3.0, 2.0);
        for (int c = 0; c < 3; ++c)
            s.raw[(GaussianSet::kScaleX + c) * n + static_cast<std::size_t>(i)] =
                rng.uniform(5.0, 12.0);
        for (int c = 0; c < 4; ++c)
            s.raw[(GaussianSet::kQuatW + c) * n + static_cast<std::size_t>(i)] = 2.0 * rng.normal();
        for (int c = 0; c < 5; ++c)
            s.raw[(GaussianSet::kAlbedoR + c) * n + static_cast<std::size_t>(i)] =
                rng.uniform(-2.0, 2.0);
    }
    return s;
}

GaussianSet to_float_set(const Scene& s) {
    GaussianSet set;
    set.depth = 1;
    set.codes.resize(static_cast<std::size_t>(s.count));
    for (std::size_t i = 0; i < set.codes.size(); ++i) set.codes[i] = i;
    set.positions = s.positions;
    set.raw.assign(s.raw.begin(), s.raw.end());
    return set;
}

ActivatedGaussians<float> constant_act(int count, float opacity, const Vec3f& albedo,
                                       float rough, float metal, float scale) {
    ActivatedGaussians<float> act;
    act.count = count;
    const auto n = static_cast<std::size_t>(count);
    act.opacity.assign(n, opacity);
    act.scale.assign(n * 3, scale);
    act.quat.assign(n * 4, 0.f);
    act.albedo.resize(n * 3);
    act.rough.assign(n, rough);
    act.metal.assign(n, metal);
    act.cov.assign(n * 6, 0.f);
    for (std::size_t i = 0; i < n; ++i) {
        act.quat[i * 4] = 1.f;
        for (int c = 0; c < 3; ++c) act.albedo[i * 3 + static_cast<std::size_t>(c)] = albedo[c];
        act.cov[i * 6 + 0] = scale * scale;
        act.cov[i * 6 + 3] = scale * scale;
        act.cov[i * 6 + 5] = scale * scale;
    }
    return act;
}

} // namespace

TEST_CASE("activation closed forms") {
    GaussianSet set;
    set.depth = 1;
    set.codes = {0};
    set.positions.setZero(1, 3);
    set.raw.assign(13, 0.f);
    set.raw[GaussianSet::kQuatW] = 1.f;
    set.raw[GaussianSet::kScaleX] = 0.f; // softplus(0) = ln 2

    const auto act = activate_params(set);
    CHECK(act.opacity[0] == doctest::Approx(0.5f));
    CHECK(std::abs(act.scale[0] - 0.0069315f) <= 1e-7f);
    CHECK(act.albedo[0] == doctest::Approx(0.5f));

    // identity rotation with scales (a,b,c) -> diagonal covariance
    GaussianSet diag = set;
    diag.raw[GaussianSet::kScaleX] = inv_softplus(0.2f / 0.01f);
    diag.raw[GaussianSet::kScaleY] = inv_softplus(0.3f / 0.01f);
    diag.raw[GaussianSet::kScaleZ] = inv_softplus(0.4f / 0.01f);
    const auto act2 = activate_params(diag);
    CHECK(act2.cov[0] == doctest::Approx(0.04f).epsilon(1e-4));
    CHECK(act2.cov[3] == doctest::Approx(0.09f).epsilon(1e-4));
    CHECK(act2.cov[5] == doctest::Approx(0.16f).epsilon(1e-4));
    CHECK(act2.cov[1] == doctest::Approx(0.f).epsilon(1e-7));

    // quaternion stays unit after activation
    GaussianSet rot = set;
    rot.raw[GaussianSet::kQuatW] = 0.3f;
    rot.raw[GaussianSet::kQuatX] = -1.2f;
    rot.raw[GaussianSet::kQuatY] = 0.5f;
    rot.raw[GaussianSet::kQuatZ] = 2.0f;
    const auto act3 = activate_params(rot);
    const float qn = std::sqrt(act3.quat[0] * act3.quat[0] + act3.quat[1] * act3.quat[1] +
                               act3.quat[2] * act3.quat[2] + act3.quat[3] * act3.quat[3]);
    CHECK(std::abs(qn - 1.f) <= 1e-7f);
}

TEST_CASE("activation errors: zero quaternion and non-finite parameters") {
    GaussianSet set;
    set.depth = 1;
    set.codes = {0, 1};
    set.positions.setZero(2, 3);
    set.raw.assign(26, 0.f);
    set.raw[GaussianSet::kQuatW * 2 + 0] = 1.f; // gaussian 0 fine, gaussian 1 zero quat
    CHECK_THROWS_WITH_AS(activate_params(set), doctest::Contains("quaternion"), Error);

    set.raw[GaussianSet::kQuatW * 2 + 1] = 1.f;
    set.raw[GaussianSet::kScaleY * 2 + 1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_WITH_AS(activate_params(set), doctest::Contains("non-finite"), Error);
}

TEST_CASE("projection: on-axis isotropic gaussian, f=100, z=2, sigma=0.01") {
    const Camera cam = axis_camera(17, 100.f);
    float cov[6] = {1e-4f, 0, 0, 1e-4f, 0, 1e-4f}; // (0.01)^2 I
    const auto proj = project_gaussian(cam, Vec3f::Zero(), cov);
    REQUIRE(proj.valid);
    CHECK(proj.depth == doctest::Approx(2.f));
    // (f*sigma/z)^2 = 0.25, plus the 0.3 dilation
    CHECK(proj.cov2d.x() == doctest::Approx(0.55f).epsilon(1e-5));
    CHECK(proj.cov2d.z() == doctest::Approx(0.55f).epsilon(1e-5));
    CHECK(std::abs(proj.cov2d.y()) <= 1e-7f);
    CHECK(proj.mean2d.x() == doctest::Approx(cam.cx));

    // doubling the focal length quadruples the pre-dilation covariance
    Camera cam2 = cam;
    cam2.fx = cam2.fy = 200.f;
    const auto proj2 = project_gaussian(cam2, Vec3f::Zero(), cov);
    CHECK((proj2.cov2d.x() - 0.3f) == doctest::Approx(4.f * (proj.cov2d.x() - 0.3f)).epsilon(1e-4));

    // behind-camera culled
    Camera back = cam;
    back.t = Vec3d(0, 0, -2);
    CHECK_FALSE(project_gaussian(back, Vec3f::Zero(), cov).valid);
}

TEST_CASE("forward: empty set gives background and alpha 0") {
    const Camera cam = axis_camera();
    ActivatedGaussians<float> act;
    act.count = 0;
    MatX3f positions(0, 3);
    RenderConfig cfg;
    cfg.background = Vec3f(0.2f, 0.4f, 0.8f);
    const FrameBuffer fb = rasterize_forward(act, positions, cam, cfg);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const float* px = fb.pixel(y, x);
            CHECK(px[kChR] == doctest::Approx(0.2f));
            CHECK(px[kChG] == doctest::Approx(0.4f));
            CHECK(px[kChB] == doctest::Approx(0.8f));
            CHECK(px[kChAlpha] == 0.f);
            CHECK(px[kChRough] == 0.f);
            CHECK(px[kChMetal] == 0.f);
        }
}

TEST_CASE("forward: single pixel-centered gaussian composites exactly") {
    const Camera cam = axis_camera();
    const auto act = constant_act(1, 0.5f, Vec3f(1, 0, 0), 0.25f, 0.75f, 0.05f);
    MatX3f positions(1, 3);
    positions.setZero();
    RenderConfig cfg;
    cfg.background = Vec3f::Zero();
    const FrameBuffer fb = rasterize_forward(act, positions, cam, cfg);
    const float* px = fb.pixel(8, 8); // center pixel (cx = 8.5 = pixel center)
    CHECK(px[kChR] == 0.5f);
    CHECK(px[kChG] == 0.f);
    CHECK(px[kChAlpha] == 0.5f);
    CHECK(px[kChRough] == 0.5f * 0.25f);
    CHECK(px[kChMetal] == 0.5f * 0.75f);
}

TEST_CASE("forward: two coincident pixel-centered gaussians follow the compositing identity") {
    const Camera cam = axis_camera();
    auto act = constant_act(2, 0.5f, Vec3f(1, 0, 0), 0.f, 0.f, 0.05f);
    act.albedo[3 + 0] = 0.f;
    act.albedo[3 + 1] = 1.f; // second gaussian green
    MatX3f positions(2, 3);
    positions.setZero();
    positions(1, 2) = 1e-3f; // strictly behind the first
    RenderConfig cfg;
    cfg.background = Vec3f::Zero();
    const FrameBuffer fb = rasterize_forward(act, positions, cam, cfg);
    const float* px = fb.pixel(8, 8);
    CHECK(px[kChR] == 0.5f);
    CHECK(px[kChG] == 0.25f);
    CHECK(px[kChB] == 0.f);
    CHECK(px[kChAlpha] == 0.75f);
}

TEST_CASE("tile renderer is bit-identical to the naive reference on random scenes") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Scene scene = random_scene(seed + 100, 40);
        const GaussianSet set = to_float_set(scene);
        const auto act = activate_params(set);
        OrbitConfig oc;
        oc.count = 1;
        oc.resolution = 64;
        oc.seed = seed;
        oc.mode = OrbitMode::Random;
        const Camera cam = make_orbit_cameras(oc)[0];
        RenderConfig cfg;
        cfg.background = Vec3f(0.1f, 0.2f, 0.3f);
        const FrameBuffer tiled = rasterize_forward(act, set.positions, cam, cfg);
        const FrameBuffer naive = rasterize_reference(act, set.positions, cam, cfg);
        REQUIRE(tiled.color.size() == naive.color.size());
        std::size_t diff = 0;
        for (std::size_t i = 0; i < tiled.color.size(); ++i)
            if (tiled.color[i] != naive.color[i]) ++diff;
        CHECK(diff == 0);
    }
}

TEST_CASE("rendering is invariant under permutation of the gaussian list") {
    const Scene scene = random_scene(7, 30);
    const GaussianSet set = to_float_set(scene);
    const Camera cam = axis_camera(48, 60.f);
    RenderConfig cfg;

    GaussianSet shuffled = set;
    Rng rng(3);
    std::vector<int> perm(static_cast<std::size_t>(set.count()));
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.below(i)]);
    const std::size_t n = static_cast<std::size_t>(set.count());
    for (std::size_t i = 0; i < n; ++i) {
        shuffled.positions.row(static_cast<Eigen::Index>(i)) =
            set.positions.row(perm[i]);
        for (int c = 0; c < 13; ++c)
            shuffled.raw[static_cast<std::size_t>(c) * n + i] =
                set.raw[static_cast<std::size_t>(c) * n + static_cast<std::size_t>(perm[i])];
    }
    const FrameBuffer a = rasterize_forward(activate_params(set), set.positions, cam, cfg);
    const FrameBuffer b =
        rasterize_forward(activate_params(shuffled), shuffled.positions, cam, cfg);
    // identical up to float addition order; depths differ so sorting makes the
    // composition order identical, hence exact equality
    for (std::size_t i = 0; i < a.color.size(); ++i) CHECK(a.color[i] == b.color[i]);
}

TEST_CASE("alpha and color channels stay in [0,1] for any parameters") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const Scene scene = random_scene(seed + 500, 60);
        const GaussianSet set = to_float_set(scene);
        const Camera cam = axis_camera(32, 40.f);
        RenderConfig cfg;
        cfg.background = Vec3f(1, 1, 1);
        const FrameBuffer fb = rasterize_forward(activate_params(set), set.positions, cam, cfg);
        for (std::size_t i = 0; i < fb.color.size(); ++i) {
            CHECK(fb.color[i] >= 0.f);
            CHECK(fb.color[i] <= 1.f + 1e-6f);
        }
    }
}

TEST_CASE("backward: zero-opacity gaussians get vanishing gradients") {
    Scene scene = random_scene(11, 3);
    const auto n = static_cast<std::size_t>(scene.count);
    scene.raw[GaussianSet::kOpacity * n + 1] = -20.0; // effectively invisible
    const GaussianSet set = to_float_set(scene);
    const Camera cam = axis_camera(24, 40.f);
    RenderConfig cfg;

    const auto act = activate_params(set);
    RenderCache<float> cache;
    const FrameBuffer fb = rasterize_forward(act, set.positions, cam, cfg, &cache);
    std::vector<float> upstream(fb.color.size(), 1.f);
    std::vector<float> grads(set.raw.size(), 0.f);
    rasterize_backward(set, act, cam, cfg, fb, cache, upstream, grads);
    for (int c = 0; c < 13; ++c)
        CHECK(std::abs(grads[static_cast<std::size_t>(c) * n + 1]) <= 1e-12f);
}

TEST_CASE("backward: clamped-alpha front gaussian keeps the linear color path") {
    GaussianSet set;
    set.depth = 1;
    set.codes = {0};
    set.positions.setZero(1, 3);
    set.raw.assign(13, 0.f);
    set.raw[GaussianSet::kQuatW] = 1.f;
    set.raw[GaussianSet::kOpacity] = 10.f; // sigmoid ~ 0.99995 -> alpha clamps at 0.99
    set.raw[GaussianSet::kScaleX] = set.raw[GaussianSet::kScaleY] = set.raw[GaussianSet::kScaleZ] =
        inv_softplus(0.5f / 0.01f); // huge footprint so the clamp holds on many pixels

    const Camera cam = axis_camera(17, 100.f);
    RenderConfig cfg;
    const auto act = activate_params(set);
    RenderCache<float> cache;
    const FrameBuffer fb = rasterize_forward(act, set.positions, cam, cfg, &cache);

    std::vector<float> upstream(fb.color.size(), 0.f);
    double upstream_sum = 0;
    Rng rng(2);
    std::size_t covered = 0;
    for (std::size_t p = 0; p < fb.transmittance.size(); ++p) {
        const float u = rng.uniformf();
        if (fb.color[p * kRenderChannels + kChAlpha] == 0.99f) {
            upstream[p * kRenderChannels + kChR] = u;
            upstream_sum += u;
            ++covered;
        }
    }
    REQUIRE(covered > 20);
    std::vector<float> grads(set.raw.size(), 0.f);
    rasterize_backward(set, act, cam, cfg, fb, cache, upstream, grads);
    // raw albedo gradient = 0.99 * sum(upstream) * sigmoid'(0)
    const double expected = 0.99 * upstream_sum * 0.25;
    CHECK(grads[GaussianSet::kAlbedoR] == doctest::Approx(expected).epsilon(1e-3));
    // opacity gradient is cut by the clamp
    CHECK(grads[GaussianSet::kOpacity] == 0.f);
}

TEST_CASE("backward matches central finite differences on random scenes (double)") {
    using namespace ogs::detail;
    int total = 0, bad = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Scene scene = random_scene(seed + 900, 6);
        const auto n = static_cast<std::size_t>(scene.count);
        OrbitConfig oc;
        oc.count = 1;
        oc.resolution = 32;
        oc.seed = seed + 1;
        oc.mode = OrbitMode::Random;
        const Camera cam = make_orbit_cameras(oc)[0];
        const auto camk = CameraK<double>::from(cam);
        const Vec3<double> bg(0.15, 0.35, 0.55);

        Rng urng(seed + 33);
        std::vector<double> upstream(static_cast<std::size_t>(32 * 32 * kRenderChannels));
        for (auto& u : upstream) u = urng.uniform(-1.0, 1.0);

        auto phi = [&](const std::vector<double>& raw) {
            const auto act = activate_params_impl<double>(raw.data(), scene.count);
            const auto fb = rasterize_forward_impl<double>(act, scene.positions, camk, bg, 16,
                                                           nullptr);
            double v = 0;
            for (std::size_t i = 0; i < fb.color.size(); ++i) v += upstream[i] * fb.color[i];
            return v;
        };

        // analytic
        const auto act = activate_params_impl<double>(scene.raw.data(), scene.count);
        RenderCache<double> cache;
        const auto fb =
            rasterize_forward_impl<double>(act, scene.positions, camk, bg, 16, &cache);
        std::vector<double> grads(scene.raw.size(), 0.0);
        rasterize_backward_impl<double>(scene.raw.data(), act, camk, bg, fb, cache, upstream,
                                        grads.data());

        const double eps = 1e-3;
        for (std::size_t i = 0; i < scene.raw.size(); ++i) {
            std::vector<double> pert = scene.raw;
            pert[i] += eps;
            const double fp = phi(pert);
            pert[i] -= 2 * eps;
            const double fm = phi(pert);
            const double fd = (fp - fm) / (2 * eps);
            const double rel =
                std::abs(fd - grads[i]) / std::max({std::abs(fd), std::abs(grads[i]), 1e-6});
            ++total;
            if (rel > 1e-3) ++bad;
        }
        (void)n;
    }
    // >= 99% of coordinates within tolerance
    CHECK(static_cast<double>(bad) <= 0.01 * static_cast<double>(total));
}

TEST_CASE("checkpoint round-trips bit-exactly and validates") {
    const Scene scene = random_scene(77, 9);
    GaussianSet set = to_float_set(scene);
    set.depth = 4;
    for (std::size_t i = 0; i < set.codes.size(); ++i) set.codes[i] = i * 7 + 1;
    const auto path = std::filesystem::temp_directory_path() / "ogs_ckpt.ogs";
    save_gaussians(path.string(), set);
    const GaussianSet loaded = load_gaussians(path.string());
    CHECK(loaded.depth == set.depth);
    CHECK(loaded.codes == set.codes);
    CHECK(loaded.raw == set.raw);
    // positions recomputed from codes
    CHECK(loaded.positions.rows() == set.count());

    CHECK_THROWS_AS(load_gaussians("/nonexistent.ogs"), Error);
}
