// SPDX-License-Identifier: Apache-2.0
#include "ogs/splat.hpp"

#include "ogs/detail/splat_kernels.hpp"

#include <cstring>
#include <fstream>

namespace ogs {

GaussianSet GaussianSet::init_from_octree(const Octree& tree) {
    GaussianSet set;
    set.depth = tree.depth;
    set.codes = tree.finest().codes;
    set.positions = leaf_centers(tree);
    const auto n = set.codes.size();
    set.raw.assign(static_cast<std::size_t>(kChannels) * n, 0.f);

    const float half_leaf = 0.5f * tree.cell_size(tree.depth);
    const float s_raw = inv_softplus(half_leaf / 0.01f);
    for (std::size_t i = 0; i < n; ++i) {
        set.raw[kScaleX * n + i] = s_raw;
        set.raw[kScaleY * n + i] = s_raw;
        set.raw[kScaleZ * n + i] = s_raw;
        set.raw[kQuatW * n + i] = 1.f;
    }
    return set;
}

namespace {

template <typename T> void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T> T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

constexpr char kGaussianMagic[5] = {'O', 'G', 'S', 'V', '1'};

} // namespace

void save_gaussians(const std::string& path, const GaussianSet& set) {
    std::ofstream out(path, std::ios::binary);
    OGS_REQUIRE(out.good(), "cannot write checkpoint: " + path);
    out.write(kGaussianMagic, sizeof(kGaussianMagic));
    write_pod(out, static_cast<std::uint32_t>(set.depth));
    write_pod(out, static_cast<std::uint64_t>(set.codes.size()));
    out.write(reinterpret_cast<const char*>(set.codes.data()),
              static_cast<std::streamsize>(set.codes.size() * sizeof(std::uint64_t)));
    out.write(reinterpret_cast<const char*>(set.raw.data()),
              static_cast<std::streamsize>(set.raw.size() * sizeof(float)));
    OGS_REQUIRE(out.good(), "write failed: " + path);
}

GaussianSet load_gaussians(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    OGS_REQUIRE(in.good(), "cannot open checkpoint: " + path);
    char magic[5];
    in.read(magic, sizeof(magic));
    OGS_REQUIRE(in.good() && std::memcmp(magic, kGaussianMagic, 5) == 0,
                "not a gaussian checkpoint: " + path);
    GaussianSet set;
    set.depth = static_cast<int>(read_pod<std::uint32_t>(in));
    OGS_REQUIRE(set.depth >= 1 && set.depth <= 12, "checkpoint depth out of range: " + path);
    const auto count = read_pod<std::uint64_t>(in);
    set.codes.resize(count);
    in.read(reinterpret_cast<char*>(set.codes.data()),
            static_cast<std::streamsize>(count * sizeof(std::uint64_t)));
    set.raw.resize(static_cast<std::size_t>(GaussianSet::kChannels) * count);
    in.read(reinterpret_cast<char*>(set.raw.data()),
            static_cast<std::streamsize>(set.raw.size() * sizeof(float)));
    OGS_REQUIRE(in.good(), "truncated checkpoint: " + path);
    for (std::size_t i = 1; i < set.codes.size(); ++i)
        OGS_REQUIRE(set.codes[i - 1] < set.codes[i],
                    "checkpoint codes not strictly ascending: " + path);

    const float cell = 2.f / static_cast<float>(1u << set.depth);
    set.positions.resize(static_cast<Eigen::Index>(count), 3);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t x, y, z;
        morton_decode(set.codes[i], x, y, z);
        set.positions(static_cast<Eigen::Index>(i), 0) = -1.f + (x + 0.5f) * cell;
        set.positions(static_cast<Eigen::Index>(i), 1) = -1.f + (y + 0.5f) * cell;
        set.positions(static_cast<Eigen::Index>(i), 2) = -1.f + (z + 0.5f) * cell;
    }
    return set;
}

ActivatedGaussians<float> activate_params(const GaussianSet& set) {
    return detail::activate_params_impl<float>(set.raw.data(), set.count());
}

ProjectedGaussian<float> project_gaussian(const Camera& cam, const Vec3f& position,
                                          const float* cov_packed) {
    return detail::project_gaussian_impl<float>(detail::CameraK<float>::from(cam), position,
                                                cov_packed);
}

FrameBuffer rasterize_forward(const ActivatedGaussians<float>& act, const MatX3f& positions,
                              const Camera& cam, const RenderConfig& cfg,
                              RenderCache<float>* cache) {
    return detail::rasterize_forward_impl<float>(act, positions,
                                                 detail::CameraK<float>::from(cam),
                                                 cfg.background, cfg.tile_size, cache);
}

FrameBuffer rasterize_reference(const ActivatedGaussians<float>& act, const MatX3f& positions,
                                const Camera& cam, const RenderConfig& cfg) {
    return detail::rasterize_reference_impl<float>(act, positions,
                                                   detail::CameraK<float>::from(cam),
                                                   cfg.background);
}

void rasterize_backward(const GaussianSet& set, const ActivatedGaussians<float>& act,
                        const Camera& cam, const RenderConfig& cfg, const FrameBuffer& fb,
                        const RenderCache<float>& cache, const std::vector<float>& upstream,
                        std::vector<float>& grad_raw) {
    OGS_REQUIRE(grad_raw.size() == set.raw.size(), "rasterize_backward: gradient size mismatch");
    detail::rasterize_backward_impl<float>(set.raw.data(), act,
                                           detail::CameraK<float>::from(cam), cfg.background, fb,
                                           cache, upstream, grad_raw.data());
}

std::vector<FrameBuffer> render_views(const GaussianSet& set, const std::vector<Camera>& cams,
                                      const RenderConfig& cfg,
                                      std::vector<RenderCache<float>>* caches) {
    const auto act = activate_params(set);
    std::vector<FrameBuffer> out;
    out.reserve(cams.size());
    if (caches) caches->resize(cams.size());
    for (std::size_t v = 0; v < cams.size(); ++v)
        out.push_back(rasterize_forward(act, set.positions, cams[v], cfg,
                                        caches ? &(*caches)[v] : nullptr));
    return out;
}

} // namespace ogs
