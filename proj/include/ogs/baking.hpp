// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ogs/camera.hpp"
#include "ogs/geometry.hpp"
#include "ogs/image.hpp"
#include "ogs/splat.hpp"

#include <string>
#include <vector>

namespace ogs {

// Per-pixel mesh coverage from a z-buffered rasterization with
// perspective-correct attribute interpolation.
struct UvRaster {
    int width = 0, height = 0;
    std::vector<std::int32_t> tri; // -1 where uncovered
    std::vector<float> bary;       // 3 per pixel
    std::vector<float> uv;         // 2 per pixel (zero when the mesh has no UVs)
    std::vector<float> depth;      // view-space z

    bool covered(std::size_t p) const { return tri[p] >= 0; }
    std::size_t pixels() const { return tri.size(); }
};

// UVs required; use make_fallback_atlas first when the mesh has none.
UvRaster rasterize_mesh_uv(const Mesh& mesh, const Camera& cam);

// Same rasterization without the UV requirement (used for target synthesis
// and PBR preview).
UvRaster rasterize_mesh(const Mesh& mesh, const Camera& cam);

struct TextureAtlas {
    int size = 0;
    Image albedo;   // 3ch
    Image rough;    // 1ch
    Image metal;    // 1ch
    Image coverage; // 1ch, 1 where texels received supervision
};

struct BakeConfig {
    int resolution = 1024;
    int iterations = 32;
    float lr = 0.05f;
    float alpha_threshold = 0.5f; // gaussian-alpha mask for supervision
    Vec3f background = Vec3f::Ones();
    bool fill = true;
    bool verbose = false;
};

struct BakeResult {
    TextureAtlas atlas;
    std::vector<double> loss_history; // masked MSE per iteration
};

BakeResult bake_textures(const Mesh& mesh, const GaussianSet& gaussians,
                         const std::vector<Camera>& cams, const BakeConfig& cfg);

// Iterative dilation of uncovered texels (covered texels never change).
void fill_texels(TextureAtlas& atlas, int max_rounds = 32);

// Per-triangle chart packing with >=2 texel gutters at the given resolution.
Mesh make_fallback_atlas(const Mesh& mesh, int resolution = 1024);

// 20-view evaluation rig plus high-elevation coverage views.
std::vector<Camera> baking_cameras(int resolution);

void save_atlas(const std::string& dir, const TextureAtlas& atlas);
TextureAtlas load_atlas(const std::string& dir);

// bilinear sample of a channel-major image at UV (v flipped to image rows)
Vec3f sample_atlas(const Image& img, float u, float v);

} // namespace ogs
