// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ogs/baking.hpp"
#include "ogs/fitting.hpp"
#include "ogs/geometry.hpp"

#include <string>

namespace ogs {

// Procedural ground-truth materials for benchmark objects. Albedo varies
// smoothly with position; roughness/metallic are piecewise constant with
// planar splits.
enum class MaterialPreset { Bands, Checker, Constant };

MaterialPreset material_preset_from_name(const std::string& name);
std::string material_preset_name(MaterialPreset preset);

struct MaterialSample {
    Vec3f albedo;
    float rough;
    float metal;
};

MaterialSample eval_material(MaterialPreset preset, const Vec3f& position);

// Rasterize the mesh from every camera and fill the 6-channel target images
// (albedo over background, binary alpha, roughness/metallic over zero).
ViewSet synthesize_views(const Mesh& mesh, MaterialPreset preset,
                         const std::vector<Camera>& cams, const Vec3f& background);

// Mesh re-render using a baked atlas, producing the same 6-channel layout.
Image render_mesh_with_atlas(const Mesh& mesh, const TextureAtlas& atlas, const Camera& cam,
                             const Vec3f& background);

// targets directory: cameras.txt, manifest.json, view_###_{albedo,rough,metal}.png
void save_viewset(const std::string& dir, const ViewSet& views);
ViewSet load_viewset(const std::string& dir);

} // namespace ogs
