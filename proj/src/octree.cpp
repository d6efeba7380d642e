// SPDX-License-Identifier: Apache-2.0
#include "ogs/octree.hpp"

#include <algorithm>
#include <cmath>

namespace ogs {

namespace {

// spread low 21 bits of v to every third bit
std::uint64_t spread3(std::uint64_t v) {
    v &= 0x1fffffull;
    v = (v | (v << 32)) & 0x1f00000000ffffull;
    v = (v | (v << 16)) & 0x1f0000ff0000ffull;
    v = (v | (v << 8)) & 0x100f00f00f00f00full;
    v = (v | (v << 4)) & 0x10c30c30c30c30c3ull;
    v = (v | (v << 2)) & 0x1249249249249249ull;
    return v;
}

std::uint32_t compact3(std::uint64_t v) {
    v &= 0x1249249249249249ull;
    v = (v ^ (v >> 2)) & 0x10c30c30c30c30c3ull;
    v = (v ^ (v >> 4)) & 0x100f00f00f00f00full;
    v = (v ^ (v >> 8)) & 0x1f0000ff0000ffull;
    v = (v ^ (v >> 16)) & 0x1f00000000ffffull;
    v = (v ^ (v >> 32)) & 0x1fffffull;
    return static_cast<std::uint32_t>(v);
}

} // namespace

std::uint64_t morton_encode(std::uint32_t x, std::uint32_t y, std::uint32_t z) {
    return spread3(x) | (spread3(y) << 1) | (spread3(z) << 2);
}

void morton_decode(std::uint64_t code, std::uint32_t& x, std::uint32_t& y, std::uint32_t& z) {
    x = compact3(code);
    y = compact3(code >> 1);
    z = compact3(code >> 2);
}

std::uint32_t cell_index(float coord, int depth) {
    const std::uint32_t cells = 1u << depth;
    // ceil(t)-1 assigns boundary points to the lower cell
    const double t = (static_cast<double>(coord) + 1.0) * 0.5 * cells;
    const double idx = std::ceil(t) - 1.0;
    if (idx < 0) return 0;
    if (idx >= cells) return cells - 1;
    return static_cast<std::uint32_t>(idx);
}

std::int32_t Octree::find(int level, std::uint64_t code) const {
    const auto& codes = levels[static_cast<std::size_t>(level)].codes;
    auto it = std::lower_bound(codes.begin(), codes.end(), code);
    if (it == codes.end() || *it != code) return -1;
    return static_cast<std::int32_t>(it - codes.begin());
}

namespace {

// fill child_mask / parent links from sorted per-level code lists
void link_levels(Octree& tree) {
    for (int l = 1; l <= tree.depth; ++l) {
        auto& fine = tree.levels[static_cast<std::size_t>(l)];
        auto& coarse = tree.levels[static_cast<std::size_t>(l - 1)];
        fine.parent.resize(fine.codes.size());
        coarse.child_mask.assign(coarse.codes.size(), 0);
        std::size_t p = 0;
        for (std::size_t i = 0; i < fine.codes.size(); ++i) {
            const std::uint64_t pc = fine.codes[i] >> 3;
            while (coarse.codes[p] != pc) ++p;
            fine.parent[i] = static_cast<std::int32_t>(p);
            coarse.child_mask[p] |= static_cast<std::uint8_t>(1u << (fine.codes[i] & 7u));
        }
    }
    tree.levels[0].parent.assign(tree.levels[0].codes.size(), -1);
    tree.levels[static_cast<std::size_t>(tree.depth)].child_mask.assign(
        tree.finest().codes.size(), 0);
}

} // namespace

Octree build_octree(const SurfaceSamples& samples, int depth) {
    OGS_REQUIRE(samples.count() > 0, "build_octree: no samples");
    OGS_REQUIRE(depth >= 1 && depth <= 12, "build_octree: depth must be in [1,12]");

    Octree tree;
    tree.depth = depth;
    tree.levels.resize(static_cast<std::size_t>(depth) + 1);

    auto& leaves = tree.levels[static_cast<std::size_t>(depth)].codes;
    leaves.reserve(static_cast<std::size_t>(samples.count()));
    for (int i = 0; i < samples.count(); ++i) {
        const std::uint32_t x = cell_index(samples.points(i, 0), depth);
        const std::uint32_t y = cell_index(samples.points(i, 1), depth);
        const std::uint32_t z = cell_index(samples.points(i, 2), depth);
        leaves.push_back(morton_encode(x, y, z));
    }
    std::sort(leaves.begin(), leaves.end());
    leaves.erase(std::unique(leaves.begin(), leaves.end()), leaves.end());

    for (int l = depth - 1; l >= 0; --l) {
        auto& coarse = tree.levels[static_cast<std::size_t>(l)].codes;
        const auto& fine = tree.levels[static_cast<std::size_t>(l + 1)].codes;
        coarse.reserve(fine.size());
        for (std::uint64_t c : fine) {
            const std::uint64_t pc = c >> 3;
            if (coarse.empty() || coarse.back() != pc) coarse.push_back(pc);
        }
    }
    link_levels(tree);
    return tree;
}

Octree build_dense_octree(int depth) {
    OGS_REQUIRE(depth >= 1 && depth <= 8, "build_dense_octree: depth must be in [1,8]");
    Octree tree;
    tree.depth = depth;
    tree.levels.resize(static_cast<std::size_t>(depth) + 1);
    for (int l = 0; l <= depth; ++l) {
        auto& codes = tree.levels[static_cast<std::size_t>(l)].codes;
        codes.resize(std::size_t(1) << (3 * l));
        for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = i;
    }
    link_levels(tree);
    return tree;
}

MatX3f leaf_centers(const Octree& tree) {
    const auto& codes = tree.finest().codes;
    const float cell = tree.cell_size(tree.depth);
    MatX3f centers(static_cast<Eigen::Index>(codes.size()), 3);
    for (std::size_t i = 0; i < codes.size(); ++i) {
        std::uint32_t x, y, z;
        morton_decode(codes[i], x, y, z);
        centers(static_cast<Eigen::Index>(i), 0) = -1.f + (static_cast<float>(x) + 0.5f) * cell;
        centers(static_cast<Eigen::Index>(i), 1) = -1.f + (static_cast<float>(y) + 0.5f) * cell;
        centers(static_cast<Eigen::Index>(i), 2) = -1.f + (static_cast<float>(z) + 0.5f) * cell;
    }
    return centers;
}

LeafFeatures compute_leaf_features(const Octree& tree, const SurfaceSamples& samples) {
    const int leaves = tree.leaf_count();
    const MatX3f centers = leaf_centers(tree);
    const float half = 0.5f * tree.cell_size(tree.depth);

    MatX3f normal_sum = MatX3f::Zero(leaves, 3);
    MatX3f offset_sum = MatX3f::Zero(leaves, 3);
    std::vector<int> counts(static_cast<std::size_t>(leaves), 0);

    for (int i = 0; i < samples.count(); ++i) {
        const std::uint32_t x = cell_index(samples.points(i, 0), tree.depth);
        const std::uint32_t y = cell_index(samples.points(i, 1), tree.depth);
        const std::uint32_t z = cell_index(samples.points(i, 2), tree.depth);
        const std::int32_t leaf = tree.find(tree.depth, morton_encode(x, y, z));
        OGS_REQUIRE(leaf >= 0, "compute_leaf_features: sample outside tree");
        normal_sum.row(leaf) += samples.normals.row(i);
        offset_sum.row(leaf) += samples.points.row(i) - centers.row(leaf);
        counts[static_cast<std::size_t>(leaf)] += 1;
    }

    LeafFeatures out;
    out.normals.resize(leaves, 3);
    out.displacement.resize(leaves);
    for (int i = 0; i < leaves; ++i) {
        OGS_REQUIRE(counts[static_cast<std::size_t>(i)] > 0,
                    "compute_leaf_features: empty leaf; tree/sample mismatch");
        Vec3f n = normal_sum.row(i).transpose();
        const float len = n.norm();
        n = len > 1e-12f ? (n / len).eval() : Vec3f(0, 0, 1);
        out.normals.row(i) = n.transpose();
        const Vec3f mean_offset =
            offset_sum.row(i).transpose() / static_cast<float>(counts[static_cast<std::size_t>(i)]);
        out.displacement(i) = mean_offset.dot(n) / half;
    }
    return out;
}

Eigen::Matrix<float, Eigen::Dynamic, 4, Eigen::RowMajor> LeafFeatures::packed() const {
    Eigen::Matrix<float, Eigen::Dynamic, 4, Eigen::RowMajor> out(normals.rows(), 4);
    out.leftCols<3>() = normals;
    out.col(3) = displacement;
    return out;
}

std::array<std::optional<std::uint64_t>, 27>
neighbor_lookup(const Octree& tree, int level, std::uint64_t code) {
    OGS_REQUIRE(level >= 0 && level <= tree.depth, "neighbor_lookup: bad level");
    OGS_REQUIRE(tree.find(level, code) >= 0, "neighbor_lookup: unknown code");

    std::array<std::optional<std::uint64_t>, 27> out;
    std::uint32_t x, y, z;
    morton_decode(code, x, y, z);
    const std::int64_t cells = std::int64_t(1) << level;
    int k = 0;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx, ++k) {
                const std::int64_t nx = static_cast<std::int64_t>(x) + dx;
                const std::int64_t ny = static_cast<std::int64_t>(y) + dy;
                const std::int64_t nz = static_cast<std::int64_t>(z) + dz;
                if (nx < 0 || ny < 0 || nz < 0 || nx >= cells || ny >= cells || nz >= cells)
                    continue;
                const std::uint64_t nc =
                    morton_encode(static_cast<std::uint32_t>(nx), static_cast<std::uint32_t>(ny),
                                  static_cast<std::uint32_t>(nz));
                if (tree.find(level, nc) >= 0) out[static_cast<std::size_t>(k)] = nc;
            }
    return out;
}

std::vector<std::int32_t> neighbor_indices(const Octree& tree, int level) {
    const auto& codes = tree.levels[static_cast<std::size_t>(level)].codes;
    std::vector<std::int32_t> table(codes.size() * 27, -1);
    const std::int64_t cells = std::int64_t(1) << level;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        std::uint32_t x, y, z;
        morton_decode(codes[i], x, y, z);
        int k = 0;
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx, ++k) {
                    const std::int64_t nx = static_cast<std::int64_t>(x) + dx;
                    const std::int64_t ny = static_cast<std::int64_t>(y) + dy;
                    const std::int64_t nz = static_cast<std::int64_t>(z) + dz;
                    if (nx < 0 || ny < 0 || nz < 0 || nx >= cells || ny >= cells || nz >= cells)
                        continue;
                    table[i * 27 + static_cast<std::size_t>(k)] = tree.find(
                        level, morton_encode(static_cast<std::uint32_t>(nx),
                                             static_cast<std::uint32_t>(ny),
                                             static_cast<std::uint32_t>(nz)));
                }
    }
    return table;
}

std::vector<float> coarsen(const Octree& tree, int level, const std::vector<float>& feats,
                           int channels) {
    OGS_REQUIRE(level >= 1 && level <= tree.depth, "coarsen: bad level");
    const auto& fine = tree.levels[static_cast<std::size_t>(level)];
    const std::size_t parents = tree.levels[static_cast<std::size_t>(level - 1)].codes.size();
    OGS_REQUIRE(feats.size() == fine.codes.size() * static_cast<std::size_t>(channels),
                "coarsen: feature size does not match level");

    std::vector<float> out(parents * static_cast<std::size_t>(channels), 0.f);
    std::vector<int> counts(parents, 0);
    for (std::size_t i = 0; i < fine.codes.size(); ++i) {
        const auto p = static_cast<std::size_t>(fine.parent[i]);
        counts[p] += 1;
        for (int c = 0; c < channels; ++c)
            out[p * channels + static_cast<std::size_t>(c)] +=
                feats[i * channels + static_cast<std::size_t>(c)];
    }
    for (std::size_t p = 0; p < parents; ++p)
        for (int c = 0; c < channels; ++c)
            out[p * channels + static_cast<std::size_t>(c)] /= static_cast<float>(counts[p]);
    return out;
}

std::vector<float> broadcast(const Octree& tree, int level, const std::vector<float>& parent_feats,
                             int channels) {
    OGS_REQUIRE(level >= 1 && level <= tree.depth, "broadcast: bad level");
    const auto& fine = tree.levels[static_cast<std::size_t>(level)];
    const std::size_t parents = tree.levels[static_cast<std::size_t>(level - 1)].codes.size();
    OGS_REQUIRE(parent_feats.size() == parents * static_cast<std::size_t>(channels),
                "broadcast: feature size does not match level");

    std::vector<float> out(fine.codes.size() * static_cast<std::size_t>(channels));
    for (std::size_t i = 0; i < fine.codes.size(); ++i) {
        const auto p = static_cast<std::size_t>(fine.parent[i]);
        for (int c = 0; c < channels; ++c)
            out[i * channels + static_cast<std::size_t>(c)] =
                parent_feats[p * channels + static_cast<std::size_t>(c)];
    }
    return out;
}

} // namespace ogs
