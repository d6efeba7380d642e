// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ogs/camera.hpp"
#include "ogs/common.hpp"
#include "ogs/image.hpp"
#include "ogs/octree.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ogs {

// Raw trainable parameters, one column per leaf, channel-major storage
// matching the checkpoint layout. Positions are anchored to leaf centers
// and never trained.
struct GaussianSet {
    static constexpr int kChannels = 13;
    enum Channel : int {
        kOpacity = 0,
        kScaleX = 1,
        kScaleY = 2,
        kScaleZ = 3,
        kQuatW = 4,
        kQuatX = 5,
        kQuatY = 6,
        kQuatZ = 7,
        kAlbedoR = 8,
        kAlbedoG = 9,
        kAlbedoB = 10,
        kRough = 11,
        kMetal = 12
    };

    int depth = 0;
    std::vector<std::uint64_t> codes;
    MatX3f positions;
    std::vector<float> raw; // kChannels * count, channel-major

    int count() const { return static_cast<int>(codes.size()); }
    float& raw_at(int channel, int i) {
        return raw[static_cast<std::size_t>(channel) * codes.size() + static_cast<std::size_t>(i)];
    }
    float raw_at(int channel, int i) const {
        return raw[static_cast<std::size_t>(channel) * codes.size() + static_cast<std::size_t>(i)];
    }

    // opacity logit 0, activated scale = half leaf size, identity rotation,
    // mid-gray color/material
    static GaussianSet init_from_octree(const Octree& tree);
};

void save_gaussians(const std::string& path, const GaussianSet& set);
GaussianSet load_gaussians(const std::string& path);

// Activated (world-space) per-gaussian quantities.
template <typename S> struct ActivatedGaussians {
    std::vector<S> opacity;            // (0,1)
    std::vector<S> scale;              // 3 per gaussian
    std::vector<S> quat;               // 4 per gaussian, unit
    std::vector<S> albedo;             // 3 per gaussian
    std::vector<S> rough;
    std::vector<S> metal;
    std::vector<S> cov;                // packed symmetric (xx,xy,xz,yy,yz,zz)
    int count = 0;
};

// Per-pixel composited channels, interleaved [r g b alpha rough metal].
template <typename S> struct FrameBufferT {
    int width = 0;
    int height = 0;
    std::vector<S> color;          // 6 * width * height
    std::vector<S> transmittance;  // width * height

    FrameBufferT() = default;
    FrameBufferT(int w, int h)
        : width(w), height(h),
          color(static_cast<std::size_t>(w) * h * kRenderChannels, S(0)),
          transmittance(static_cast<std::size_t>(w) * h, S(1)) {}

    S* pixel(int y, int x) {
        return color.data() + (static_cast<std::size_t>(y) * width + x) * kRenderChannels;
    }
    const S* pixel(int y, int x) const {
        return color.data() + (static_cast<std::size_t>(y) * width + x) * kRenderChannels;
    }

    ImageT<S> to_image() const {
        ImageT<S> out(width, height, kRenderChannels);
        for (int c = 0; c < kRenderChannels; ++c)
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x)
                    out.at(c, y, x) = pixel(y, x)[c];
        return out;
    }
};

using FrameBuffer = FrameBufferT<float>;

template <typename S> struct ProjectedGaussian {
    Vec2<S> mean2d = Vec2<S>::Zero();
    Vec3<S> cov2d = Vec3<S>::Zero(); // (xx, xy, yy), dilation included
    Vec3<S> conic = Vec3<S>::Zero();
    Vec3<S> tview = Vec3<S>::Zero();
    S depth = S(0);
    bool valid = false;
};

// Forward state kept for the analytic backward pass: projections plus
// per-pixel contributor lists (gaussian index, composited alpha).
template <typename S> struct RenderCache {
    std::vector<ProjectedGaussian<S>> proj;
    std::vector<std::uint32_t> offsets;            // pixels+1
    std::vector<std::pair<std::int32_t, S>> contribs;
};

struct RenderConfig {
    Vec3f background = Vec3f::Zero();
    int tile_size = 16;
};

ActivatedGaussians<float> activate_params(const GaussianSet& set);

// mu', Sigma' (+0.3 px^2 dilation) and view depth for a single gaussian
ProjectedGaussian<float> project_gaussian(const Camera& cam, const Vec3f& position,
                                          const float* cov_packed);

FrameBuffer rasterize_forward(const ActivatedGaussians<float>& act, const MatX3f& positions,
                              const Camera& cam, const RenderConfig& cfg,
                              RenderCache<float>* cache = nullptr);

// All-gaussians-per-pixel oracle; bit-identical to the tiled path.
FrameBuffer rasterize_reference(const ActivatedGaussians<float>& act, const MatX3f& positions,
                                const Camera& cam, const RenderConfig& cfg);

// upstream: 6 channels per pixel, same interleaving as FrameBuffer::color.
// Gradients accumulate (+=) into grad_raw (13 * count, channel-major).
void rasterize_backward(const GaussianSet& set, const ActivatedGaussians<float>& act,
                        const Camera& cam, const RenderConfig& cfg,
                        const FrameBuffer& fb, const RenderCache<float>& cache,
                        const std::vector<float>& upstream, std::vector<float>& grad_raw);

// Renders every view; convenience wrapper used by fitting and baking.
std::vector<FrameBuffer> render_views(const GaussianSet& set, const std::vector<Camera>& cams,
                                      const RenderConfig& cfg,
                                      std::vector<RenderCache<float>>* caches = nullptr);

} // namespace ogs
