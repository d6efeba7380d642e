// SPDX-License-Identifier: Apache-2.0
#include "ogs/baking.hpp"

#include "ogs/detail/bake_kernels.hpp"
#include "ogs/fitting.hpp"
#include "ogs/io_image.hpp"
#include "ogs/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

namespace ogs {

namespace {

UvRaster rasterize_impl(const Mesh& mesh, const Camera& cam, bool want_uv) {
    UvRaster out;
    out.width = cam.width;
    out.height = cam.height;
    const std::size_t np = static_cast<std::size_t>(cam.width) * cam.height;
    out.tri.assign(np, -1);
    out.bary.assign(np * 3, 0.f);
    out.uv.assign(np * 2, 0.f);
    out.depth.assign(np, std::numeric_limits<float>::infinity());

    const int nv = mesh.vertex_count();
    std::vector<float> sx(static_cast<std::size_t>(nv)), sy(static_cast<std::size_t>(nv)),
        sz(static_cast<std::size_t>(nv));
    std::vector<std::uint8_t> in_front(static_cast<std::size_t>(nv));
    for (int i = 0; i < nv; ++i) {
        const auto pr = cam.project(mesh.vertices.row(i).transpose().cast<double>());
        sx[static_cast<std::size_t>(i)] = static_cast<float>(pr.x);
        sy[static_cast<std::size_t>(i)] = static_cast<float>(pr.y);
        sz[static_cast<std::size_t>(i)] = static_cast<float>(pr.depth);
        in_front[static_cast<std::size_t>(i)] = pr.in_front ? 1 : 0;
    }

    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const int ia = mesh.triangles(t, 0), ib = mesh.triangles(t, 1), ic = mesh.triangles(t, 2);
        // triangles crossing the near plane are skipped; orbit rigs keep the
        // whole mesh in front of the camera
        if (!(in_front[static_cast<std::size_t>(ia)] && in_front[static_cast<std::size_t>(ib)] &&
              in_front[static_cast<std::size_t>(ic)]))
            continue;
        const float ax = sx[static_cast<std::size_t>(ia)], ay = sy[static_cast<std::size_t>(ia)];
        const float bx = sx[static_cast<std::size_t>(ib)], by = sy[static_cast<std::size_t>(ib)];
        const float cx = sx[static_cast<std::size_t>(ic)], cy = sy[static_cast<std::size_t>(ic)];
        const float area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
        if (area == 0.f) continue;
        const float inv_area = 1.f / area;

        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({ax, bx, cx}))));
        const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(std::max({ax, bx, cx}))));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({ay, by, cy}))));
        const int y1 =
            std::min(cam.height - 1, static_cast<int>(std::ceil(std::max({ay, by, cy}))));

        const float za = sz[static_cast<std::size_t>(ia)], zb = sz[static_cast<std::size_t>(ib)],
                    zc = sz[static_cast<std::size_t>(ic)];
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const float px = static_cast<float>(x) + 0.5f;
                const float py = static_cast<float>(y) + 0.5f;
                // signed areas, normalized to barycentrics of (a,b,c)
                float l0 = ((bx - px) * (cy - py) - (by - py) * (cx - px)) * inv_area;
                float l1 = ((cx - px) * (ay - py) - (cy - py) * (ax - px)) * inv_area;
                float l2 = 1.f - l0 - l1;
                if (l0 < 0.f || l1 < 0.f || l2 < 0.f) continue;
                // perspective-correct weights via 1/z interpolation
                const float w0 = l0 / za, w1 = l1 / zb, w2 = l2 / zc;
                const float den = w0 + w1 + w2;
                const float z = 1.f / den;
                const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
                if (z >= out.depth[p]) continue;
                out.depth[p] = z;
                out.tri[p] = t;
                out.bary[p * 3 + 0] = w0 / den;
                out.bary[p * 3 + 1] = w1 / den;
                out.bary[p * 3 + 2] = w2 / den;
                if (want_uv) {
                    const float u = out.bary[p * 3 + 0] * mesh.uvs(ia, 0) +
                                    out.bary[p * 3 + 1] * mesh.uvs(ib, 0) +
                                    out.bary[p * 3 + 2] * mesh.uvs(ic, 0);
                    const float v = out.bary[p * 3 + 0] * mesh.uvs(ia, 1) +
                                    out.bary[p * 3 + 1] * mesh.uvs(ib, 1) +
                                    out.bary[p * 3 + 2] * mesh.uvs(ic, 1);
                    out.uv[p * 2 + 0] = u;
                    out.uv[p * 2 + 1] = v;
                }
            }
    }
    return out;
}

} // namespace

UvRaster rasterize_mesh(const Mesh& mesh, const Camera& cam) {
    return rasterize_impl(mesh, cam, mesh.has_uvs());
}

UvRaster rasterize_mesh_uv(const Mesh& mesh, const Camera& cam) {
    OGS_REQUIRE(mesh.has_uvs(),
                "rasterize_mesh_uv: mesh has no UVs (use make_fallback_atlas first)");
    return rasterize_impl(mesh, cam, true);
}

std::vector<Camera> baking_cameras(int resolution) {
    auto cams = evaluation_cameras(resolution);
    OrbitConfig extra;
    extra.count = 12;
    extra.resolution = resolution;
    extra.elevations_deg = {50.f, -50.f};
    for (auto& c : make_orbit_cameras(extra)) cams.push_back(c);
    return cams;
}

Vec3f sample_atlas(const Image& img, float u, float v) {
    const auto tap = detail::bilinear_tap(u, v, img.width);
    Vec3f out = Vec3f::Zero();
    for (int c = 0; c < std::min(3, img.channels); ++c) {
        const float* plane = img.plane(c);
        float acc = 0.f;
        for (int k = 0; k < 4; ++k) acc += tap.w[k] * plane[tap.idx[k]];
        out[c] = acc;
    }
    return out;
}

BakeResult bake_textures(const Mesh& mesh, const GaussianSet& gaussians,
                         const std::vector<Camera>& cams, const BakeConfig& cfg) {
    OGS_REQUIRE(mesh.has_uvs(), "bake_textures: mesh has no UVs (use make_fallback_atlas)");
    OGS_REQUIRE(!cams.empty(), "bake_textures: no views");
    const int size = cfg.resolution;
    const std::size_t plane = static_cast<std::size_t>(size) * size;

    // gaussian targets and mesh coverage per view
    RenderConfig rcfg;
    rcfg.background = cfg.background;
    const auto renders = render_views(gaussians, cams, rcfg);
    std::vector<UvRaster> rasters(cams.size());
    std::vector<std::vector<float>> targets(cams.size());
    std::vector<std::vector<std::uint8_t>> masks(cams.size());
    for (std::size_t v = 0; v < cams.size(); ++v) {
        rasters[v] = rasterize_mesh_uv(mesh, cams[v]);
        const auto& fb = renders[v];
        const std::size_t npx = fb.transmittance.size();
        targets[v].resize(npx * 5);
        masks[v].resize(npx);
        for (std::size_t p = 0; p < npx; ++p) {
            const float* px = fb.color.data() + p * kRenderChannels;
            targets[v][0 * npx + p] = px[kChR];
            targets[v][1 * npx + p] = px[kChG];
            targets[v][2 * npx + p] = px[kChB];
            targets[v][3 * npx + p] = px[kChRough];
            targets[v][4 * npx + p] = px[kChMetal];
            masks[v][p] = px[kChAlpha] > cfg.alpha_threshold ? 1 : 0;
        }
    }

    // init: weighted scatter-average of the targets
    std::vector<float> tex(plane * 5, 0.f);
    std::vector<float> wsum(plane, 0.f);
    for (std::size_t v = 0; v < cams.size(); ++v) {
        const std::size_t npx = rasters[v].pixels();
        for (std::size_t p = 0; p < npx; ++p) {
            if (!rasters[v].covered(p) || !masks[v][p]) continue;
            const auto tap =
                detail::bilinear_tap(rasters[v].uv[p * 2 + 0], rasters[v].uv[p * 2 + 1], size);
            for (int k = 0; k < 4; ++k) {
                wsum[static_cast<std::size_t>(tap.idx[k])] += tap.w[k];
                for (int c = 0; c < 5; ++c)
                    tex[static_cast<std::size_t>(c) * plane + tap.idx[k]] +=
                        tap.w[k] * targets[v][static_cast<std::size_t>(c) * npx + p];
            }
        }
    }
    std::size_t covered_texels = 0;
    for (std::size_t i = 0; i < plane; ++i) {
        if (wsum[i] > 0.f) {
            ++covered_texels;
            for (int c = 0; c < 5; ++c) tex[static_cast<std::size_t>(c) * plane + i] /= wsum[i];
        } else {
            for (int c = 0; c < 5; ++c) tex[static_cast<std::size_t>(c) * plane + i] = 0.5f;
        }
    }
    OGS_REQUIRE(covered_texels > 0, "bake_textures: atlas received no coverage");

    // texel refinement against the gaussian renders
    BakeResult result;
    AdamConfig acfg;
    acfg.lr = cfg.lr;
    Adam adam(tex.size(), acfg);
    std::vector<float> grad(tex.size());
    const int nthreads = global_pool().size();
    std::vector<std::vector<float>> partial(static_cast<std::size_t>(nthreads));
    std::vector<double> sq_thread(static_cast<std::size_t>(nthreads));
    std::vector<std::size_t> count_thread(static_cast<std::size_t>(nthreads));

    for (int it = 0; it < cfg.iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.f);
        std::fill(sq_thread.begin(), sq_thread.end(), 0.0);
        std::fill(count_thread.begin(), count_thread.end(), std::size_t(0));
        parallel_chunks(static_cast<std::int64_t>(cams.size()),
                        [&](std::int64_t begin, std::int64_t end, int thread) {
                            auto& local = partial[static_cast<std::size_t>(thread)];
                            local.assign(tex.size(), 0.f);
                            for (std::int64_t v = begin; v < end; ++v) {
                                sq_thread[static_cast<std::size_t>(thread)] +=
                                    detail::bake_view_pass<float>(
                                        tex, size, rasters[static_cast<std::size_t>(v)],
                                        targets[static_cast<std::size_t>(v)],
                                        masks[static_cast<std::size_t>(v)], &local,
                                        count_thread[static_cast<std::size_t>(thread)]);
                            }
                        });
        double sq = 0;
        std::size_t supervised = 0;
        for (int t = 0; t < nthreads; ++t) {
            sq += sq_thread[static_cast<std::size_t>(t)];
            supervised += count_thread[static_cast<std::size_t>(t)];
            if (!partial[static_cast<std::size_t>(t)].empty())
                for (std::size_t i = 0; i < grad.size(); ++i)
                    grad[i] += partial[static_cast<std::size_t>(t)][i];
        }
        OGS_REQUIRE(supervised > 0, "bake_textures: no supervised pixels");
        const float scale = static_cast<float>(2.0 / (static_cast<double>(supervised) * 5.0));
        for (auto& g : grad) g *= scale;
        const double loss = sq / (static_cast<double>(supervised) * 5.0);
        result.loss_history.push_back(loss);
        adam.step(tex, grad);
        if (cfg.verbose) std::fprintf(stderr, "bake iter %3d  mse %.8f\n", it, loss);
    }

    TextureAtlas& atlas = result.atlas;
    atlas.size = size;
    atlas.albedo = Image(size, size, 3);
    atlas.rough = Image(size, size, 1);
    atlas.metal = Image(size, size, 1);
    atlas.coverage = Image(size, size, 1);
    for (std::size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < 3; ++c)
            atlas.albedo.data[static_cast<std::size_t>(c) * plane + i] =
                std::clamp(tex[static_cast<std::size_t>(c) * plane + i], 0.f, 1.f);
        atlas.rough.data[i] = std::clamp(tex[3 * plane + i], 0.f, 1.f);
        atlas.metal.data[i] = std::clamp(tex[4 * plane + i], 0.f, 1.f);
        atlas.coverage.data[i] = wsum[i] > 0.f ? 1.f : 0.f;
    }
    if (cfg.fill) fill_texels(atlas);
    return result;
}

void fill_texels(TextureAtlas& atlas, int max_rounds) {
    const int size = atlas.size;
    Image cov = atlas.coverage;
    for (int round = 0; round < max_rounds; ++round) {
        Image next_cov = cov;
        bool changed = false;
        Image albedo = atlas.albedo, rough = atlas.rough, metal = atlas.metal;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                if (cov.at(0, y, x) > 0.f) continue;
                float n = 0;
                float acc[5] = {0, 0, 0, 0, 0};
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= size || ny >= size) continue;
                        if (cov.at(0, ny, nx) <= 0.f) continue;
                        n += 1.f;
                        for (int c = 0; c < 3; ++c) acc[c] += atlas.albedo.at(c, ny, nx);
                        acc[3] += atlas.rough.at(0, ny, nx);
                        acc[4] += atlas.metal.at(0, ny, nx);
                    }
                if (n == 0.f) continue;
                for (int c = 0; c < 3; ++c) albedo.at(c, y, x) = acc[c] / n;
                rough.at(0, y, x) = acc[3] / n;
                metal.at(0, y, x) = acc[4] / n;
                next_cov.at(0, y, x) = 1.f;
                changed = true;
            }
        atlas.albedo = std::move(albedo);
        atlas.rough = std::move(rough);
        atlas.metal = std::move(metal);
        cov = std::move(next_cov);
        if (!changed) break;
    }
}

Mesh make_fallback_atlas(const Mesh& mesh, int resolution) {
    const int tris = mesh.triangle_count();
    OGS_REQUIRE(tris > 0, "make_fallback_atlas: empty mesh");
    const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(tris))));
    const float cell = 1.f / static_cast<float>(grid);
    const float margin = 1.5f / static_cast<float>(resolution); // 3-texel chart separation

    // split every triangle so each gets its own chart
    Mesh out;
    out.vertices.resize(static_cast<Eigen::Index>(tris) * 3, 3);
    out.normals.resize(static_cast<Eigen::Index>(tris) * 3, 3);
    out.uvs.resize(static_cast<Eigen::Index>(tris) * 3, 2);
    out.triangles.resize(tris, 3);
    out.material_ids = mesh.material_ids;
    for (int t = 0; t < tris; ++t) {
        const int gx = t % grid, gy = t / grid;
        const float u0 = static_cast<float>(gx) * cell + margin;
        const float v0 = static_cast<float>(gy) * cell + margin;
        const float side = cell - 2.f * margin;
        const Vec2f chart[3] = {Vec2f(u0, v0), Vec2f(u0 + side, v0), Vec2f(u0, v0 + side)};
        for (int c = 0; c < 3; ++c) {
            const int src = mesh.triangles(t, c);
            const int dst = t * 3 + c;
            out.vertices.row(dst) = mesh.vertices.row(src);
            out.normals.row(dst) = mesh.normals.row(src);
            out.uvs.row(dst) = chart[c].transpose();
            out.triangles(t, c) = dst;
        }
    }
    return out;
}

void save_atlas(const std::string& dir, const TextureAtlas& atlas) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_png(dir + "/albedo.png", atlas.albedo);
    write_png(dir + "/roughness.png", atlas.rough);
    write_png(dir + "/metallic.png", atlas.metal);
    write_png(dir + "/coverage.png", atlas.coverage);
    write_exr(dir + "/albedo.exr", atlas.albedo);
    write_exr(dir + "/roughness.exr", atlas.rough);
    write_exr(dir + "/metallic.exr", atlas.metal);
}

TextureAtlas load_atlas(const std::string& dir) {
    namespace fs = std::filesystem;
    TextureAtlas atlas;
    if (fs::exists(dir + "/albedo.exr")) {
        atlas.albedo = read_exr(dir + "/albedo.exr");
        atlas.rough = read_exr(dir + "/roughness.exr");
        atlas.metal = read_exr(dir + "/metallic.exr");
    } else {
        atlas.albedo = read_png(dir + "/albedo.png");
        atlas.rough = read_png(dir + "/roughness.png");
        atlas.metal = read_png(dir + "/metallic.png");
    }
    if (fs::exists(dir + "/coverage.png"))
        atlas.coverage = read_png(dir + "/coverage.png");
    else
        atlas.coverage = Image(atlas.albedo.width, atlas.albedo.height, 1, 1.f);
    atlas.size = atlas.albedo.width;
    OGS_REQUIRE(atlas.albedo.channels == 3 && atlas.rough.channels >= 1 &&
                    atlas.metal.channels >= 1,
                "load_atlas: unexpected channel layout in " + dir);
    return atlas;
}

} // namespace ogs
