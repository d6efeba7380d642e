// SPDX-License-Identifier: Apache-2.0
#include "ogs/evalrender.hpp"

#include "ogs/losses.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace ogs {

LightRig LightRig::default_rig() {
    LightRig rig;
    rig.lights.push_back({Vec3f(0.4f, 0.3f, 0.85f).normalized(), Vec3f(1.f, 0.98f, 0.95f)});
    rig.lights.push_back({Vec3f(-0.7f, -0.2f, 0.4f).normalized(), Vec3f(0.25f, 0.28f, 0.35f)});
    rig.ambient = Vec3f(0.03f, 0.03f, 0.03f);
    return rig;
}

LightRig load_light_rig(const std::string& path) {
    std::ifstream in(path);
    OGS_REQUIRE(in.good(), "cannot open light rig: " + path);
    nlohmann::json j;
    in >> j;
    LightRig rig;
    for (const auto& l : j.at("lights")) {
        DirectionalLight light;
        light.direction = Vec3f(l.at("direction")[0].get<float>(),
                                l.at("direction")[1].get<float>(),
                                l.at("direction")[2].get<float>())
                              .normalized();
        light.intensity = Vec3f(l.at("intensity")[0].get<float>(),
                                l.at("intensity")[1].get<float>(),
                                l.at("intensity")[2].get<float>());
        rig.lights.push_back(light);
    }
    if (j.contains("ambient"))
        rig.ambient = Vec3f(j["ambient"][0].get<float>(), j["ambient"][1].get<float>(),
                            j["ambient"][2].get<float>());
    return rig;
}

void save_light_rig(const std::string& path, const LightRig& rig) {
    nlohmann::json j;
    for (const auto& l : rig.lights)
        j["lights"].push_back(
            {{"direction", {l.direction.x(), l.direction.y(), l.direction.z()}},
             {"intensity", {l.intensity.x(), l.intensity.y(), l.intensity.z()}}});
    j["ambient"] = {rig.ambient.x(), rig.ambient.y(), rig.ambient.z()};
    std::ofstream out(path);
    OGS_REQUIRE(out.good(), "cannot write light rig: " + path);
    out << j.dump(2) << "\n";
}

float ggx_distribution(float n_dot_h, float alpha) {
    const float a2 = alpha * alpha;
    const float d = n_dot_h * n_dot_h * (a2 - 1.f) + 1.f;
    return a2 / (3.14159265358979323846f * d * d);
}

namespace {

float smith_ggx(float n_dot_v, float n_dot_l, float alpha) {
    // Schlick-GGX with k = alpha/2
    const float k = alpha * 0.5f;
    const float gv = n_dot_v / (n_dot_v * (1.f - k) + k);
    const float gl = n_dot_l / (n_dot_l * (1.f - k) + k);
    return gv * gl;
}

} // namespace

Image shade_pbr(const Mesh& mesh, const TextureAtlas& atlas, const Camera& cam,
                const LightRig& rig, const Vec3f& background) {
    const UvRaster raster = rasterize_mesh_uv(mesh, cam);
    const Vec3f eye = cam.position().cast<float>();
    Image img(cam.width, cam.height, 3);
    constexpr float kPi = 3.14159265358979323846f;

    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
            if (!raster.covered(p)) {
                for (int c = 0; c < 3; ++c) img.at(c, y, x) = background[c];
                continue;
            }
            const int t = raster.tri[p];
            Vec3f pos = Vec3f::Zero(), normal = Vec3f::Zero();
            for (int c = 0; c < 3; ++c) {
                const float b = raster.bary[p * 3 + static_cast<std::size_t>(c)];
                pos += b * mesh.vertices.row(mesh.triangles(t, c)).transpose();
                normal += b * mesh.normals.row(mesh.triangles(t, c)).transpose();
            }
            normal.normalize();
            const Vec3f view = (eye - pos).normalized();
            if (normal.dot(view) < 0.f) normal = -normal; // double-sided shading

            const float u = raster.uv[p * 2 + 0], v = raster.uv[p * 2 + 1];
            const Vec3f albedo = sample_atlas(atlas.albedo, u, v);
            const float rough = sample_atlas(atlas.rough, u, v).x();
            const float metal = sample_atlas(atlas.metal, u, v).x();
            const float alpha_ggx = rough * rough;
            const Vec3f f0 = Vec3f(0.04f, 0.04f, 0.04f) * (1.f - metal) + albedo * metal;
            const Vec3f diffuse = albedo * (1.f - metal) / kPi;

            Vec3f lo = rig.ambient.cwiseProduct(albedo);
            const float n_dot_v = std::max(normal.dot(view), 1e-4f);
            for (const auto& light : rig.lights) {
                const float n_dot_l = normal.dot(light.direction);
                if (n_dot_l <= 0.f) continue;
                const Vec3f h = (view + light.direction).normalized();
                const float n_dot_h = std::max(normal.dot(h), 0.f);
                const float v_dot_h = std::max(view.dot(h), 0.f);
                const float d = ggx_distribution(n_dot_h, alpha_ggx);
                const float g = smith_ggx(n_dot_v, n_dot_l, alpha_ggx);
                const Vec3f f =
                    f0 + (Vec3f::Ones() - f0) * std::pow(1.f - v_dot_h, 5.f); // Schlick
                const Vec3f spec = f * (d * g / (4.f * n_dot_v * n_dot_l));
                lo += (diffuse + spec).cwiseProduct(light.intensity) * n_dot_l;
            }
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = std::clamp(lo[c], 0.f, 1.f);
        }
    return img;
}

MetricsTable evaluate_images(const std::vector<Image>& rendered,
                             const std::vector<Image>& reference) {
    OGS_REQUIRE(rendered.size() == reference.size() && !rendered.empty(),
                "evaluate: view count mismatch");
    MetricsTable table;
    for (std::size_t v = 0; v < rendered.size(); ++v) {
        MetricsRow row;
        row.view = static_cast<int>(v);
        row.psnr = psnr(rendered[v], reference[v]);
        row.ssim = ssim(rendered[v], reference[v]);
        table.mean_psnr += row.psnr;
        table.mean_ssim += row.ssim;
        table.rows.push_back(row);
    }
    table.mean_psnr /= static_cast<double>(table.rows.size());
    table.mean_ssim /= static_cast<double>(table.rows.size());
    return table;
}

void write_metrics_csv(const std::string& path, const MetricsTable& table) {
    std::ofstream out(path);
    OGS_REQUIRE(out.good(), "cannot write csv: " + path);
    out << "view,psnr,ssim\n";
    char buf[128];
    for (const auto& r : table.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.4f,%.6f\n", r.view, r.psnr, r.ssim);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "mean,%.4f,%.6f\n", table.mean_psnr, table.mean_ssim);
    out << buf;
}

} // namespace ogs
