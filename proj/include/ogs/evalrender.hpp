// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ogs/baking.hpp"
#include "ogs/camera.hpp"
#include "ogs/geometry.hpp"
#include "ogs/image.hpp"

#include <string>
#include <vector>

namespace ogs {

struct DirectionalLight {
    Vec3f direction = Vec3f(0, 0, 1); // unit vector from surface toward the light
    Vec3f intensity = Vec3f::Ones();
};

struct LightRig {
    std::vector<DirectionalLight> lights;
    Vec3f ambient = Vec3f::Zero();

    static LightRig default_rig();
};

LightRig load_light_rig(const std::string& path); // json
void save_light_rig(const std::string& path, const LightRig& rig);

// Cook-Torrance GGX + Lambertian metallic-roughness preview; output clamped
// to [0,1].
Image shade_pbr(const Mesh& mesh, const TextureAtlas& atlas, const Camera& cam,
                const LightRig& rig, const Vec3f& background = Vec3f::Zero());

// GGX normal distribution (exposed for verification)
float ggx_distribution(float n_dot_h, float alpha);

struct MetricsRow {
    int view = 0;
    double psnr = 0;
    double ssim = 0;
};

struct MetricsTable {
    std::vector<MetricsRow> rows;
    double mean_psnr = 0;
    double mean_ssim = 0;
};

MetricsTable evaluate_images(const std::vector<Image>& rendered,
                             const std::vector<Image>& reference);

void write_metrics_csv(const std::string& path, const MetricsTable& table);

} // namespace ogs
