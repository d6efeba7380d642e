// SPDX-License-Identifier: Apache-2.0
#include "ogs/synth.hpp"

#include "ogs/io_image.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace ogs {

MaterialPreset material_preset_from_name(const std::string& name) {
    if (name == "bands") return MaterialPreset::Bands;
    if (name == "checker") return MaterialPreset::Checker;
    if (name == "constant") return MaterialPreset::Constant;
    throw Error("unknown material preset: " + name);
}

std::string material_preset_name(MaterialPreset preset) {
    switch (preset) {
    case MaterialPreset::Bands: return "bands";
    case MaterialPreset::Checker: return "checker";
    case MaterialPreset::Constant: return "constant";
    }
    return "bands";
}

MaterialSample eval_material(MaterialPreset preset, const Vec3f& p) {
    MaterialSample s;
    switch (preset) {
    case MaterialPreset::Bands:
        s.albedo = Vec3f(0.5f + 0.35f * std::sin(3.1f * p.x() + 1.3f),
                         0.5f + 0.35f * std::sin(2.6f * p.y() + 0.4f),
                         0.5f + 0.35f * std::sin(3.7f * p.z() + 2.1f));
        s.rough = p.z() > 0.f ? 0.75f : 0.25f;
        s.metal = p.x() > 0.f ? 0.9f : 0.1f;
        break;
    case MaterialPreset::Checker: {
        const auto cell = [](float v) { return static_cast<int>(std::floor(v * 2.f + 2.f)); };
        const bool odd = (cell(p.x()) + cell(p.y()) + cell(p.z())) % 2 != 0;
        s.albedo = odd ? Vec3f(0.85f, 0.75f, 0.25f) : Vec3f(0.15f, 0.3f, 0.65f);
        s.rough = p.y() > 0.f ? 0.8f : 0.2f;
        s.metal = p.z() > 0.f ? 0.85f : 0.05f;
        break;
    }
    case MaterialPreset::Constant:
        s.albedo = Vec3f(0.8f, 0.2f, 0.1f);
        s.rough = 0.5f;
        s.metal = 0.2f;
        break;
    }
    return s;
}

ViewSet synthesize_views(const Mesh& mesh, MaterialPreset preset,
                         const std::vector<Camera>& cams, const Vec3f& background) {
    ViewSet out;
    out.cams = cams;
    out.background = background;
    out.images.reserve(cams.size());
    for (const Camera& cam : cams) {
        const UvRaster raster = rasterize_mesh(mesh, cam);
        Image img(cam.width, cam.height, kRenderChannels);
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
                if (!raster.covered(p)) {
                    for (int c = 0; c < 3; ++c) img.at(c, y, x) = background[c];
                    continue;
                }
                const int t = raster.tri[p];
                Vec3f pos = Vec3f::Zero();
                for (int c = 0; c < 3; ++c)
                    pos += raster.bary[p * 3 + static_cast<std::size_t>(c)] *
                           mesh.vertices.row(mesh.triangles(t, c)).transpose();
                const MaterialSample m = eval_material(preset, pos);
                img.at(kChR, y, x) = m.albedo.x();
                img.at(kChG, y, x) = m.albedo.y();
                img.at(kChB, y, x) = m.albedo.z();
                img.at(kChAlpha, y, x) = 1.f;
                img.at(kChRough, y, x) = m.rough;
                img.at(kChMetal, y, x) = m.metal;
            }
        out.images.push_back(std::move(img));
    }
    return out;
}

Image render_mesh_with_atlas(const Mesh& mesh, const TextureAtlas& atlas, const Camera& cam,
                             const Vec3f& background) {
    const UvRaster raster = rasterize_mesh_uv(mesh, cam);
    Image img(cam.width, cam.height, kRenderChannels);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
            if (!raster.covered(p)) {
                for (int c = 0; c < 3; ++c) img.at(c, y, x) = background[c];
                continue;
            }
            const float u = raster.uv[p * 2 + 0], v = raster.uv[p * 2 + 1];
            const Vec3f albedo = sample_atlas(atlas.albedo, u, v);
            img.at(kChR, y, x) = albedo.x();
            img.at(kChG, y, x) = albedo.y();
            img.at(kChB, y, x) = albedo.z();
            img.at(kChAlpha, y, x) = 1.f;
            img.at(kChRough, y, x) = sample_atlas(atlas.rough, u, v).x();
            img.at(kChMetal, y, x) = sample_atlas(atlas.metal, u, v).x();
        }
    return img;
}

void save_viewset(const std::string& dir, const ViewSet& views) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_cameras(dir + "/cameras.txt", views.cams);

    nlohmann::json manifest;
    manifest["background"] = {views.background.x(), views.background.y(), views.background.z()};
    manifest["views"] = views.count();
    std::ofstream(dir + "/manifest.json") << manifest.dump(2) << "\n";

    char name[64];
    for (int v = 0; v < views.count(); ++v) {
        const Image& img = views.images[static_cast<std::size_t>(v)];
        Image albedo(img.width, img.height, 4);
        for (int c = 0; c < 4; ++c)
            std::copy(img.plane(c), img.plane(c) + img.pixels(),
                      albedo.plane(c)); // rgb + alpha
        std::snprintf(name, sizeof(name), "/view_%03d_albedo.png", v);
        write_png(dir + name, albedo);
        std::snprintf(name, sizeof(name), "/view_%03d_rough.png", v);
        write_png(dir + name, img.slice(kChRough, 1));
        std::snprintf(name, sizeof(name), "/view_%03d_metal.png", v);
        write_png(dir + name, img.slice(kChMetal, 1));
    }
}

ViewSet load_viewset(const std::string& dir) {
    namespace fs = std::filesystem;
    ViewSet out;
    out.cams = load_cameras(dir + "/cameras.txt");
    if (fs::exists(dir + "/manifest.json")) {
        nlohmann::json manifest;
        std::ifstream(dir + "/manifest.json") >> manifest;
        if (manifest.contains("background")) {
            const auto& bg = manifest["background"];
            out.background = Vec3f(bg[0].get<float>(), bg[1].get<float>(), bg[2].get<float>());
        }
    }
    char name[64];
    for (std::size_t v = 0; v < out.cams.size(); ++v) {
        std::snprintf(name, sizeof(name), "/view_%03zu_albedo.png", v);
        const Image albedo = read_png(dir + name);
        OGS_REQUIRE(albedo.channels == 4, "targets: expected RGBA albedo png");
        std::snprintf(name, sizeof(name), "/view_%03zu_rough.png", v);
        const Image rough = read_png(dir + name);
        std::snprintf(name, sizeof(name), "/view_%03zu_metal.png", v);
        const Image metal = read_png(dir + name);

        Image img(albedo.width, albedo.height, kRenderChannels);
        for (int c = 0; c < 4; ++c)
            std::copy(albedo.plane(c), albedo.plane(c) + albedo.pixels(), img.plane(c));
        std::copy(rough.plane(0), rough.plane(0) + rough.pixels(), img.plane(kChRough));
        std::copy(metal.plane(0), metal.plane(0) + metal.pixels(), img.plane(kChMetal));
        out.images.push_back(std::move(img));
    }
    return out;
}

} // namespace ogs
