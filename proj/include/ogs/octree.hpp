// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ogs/common.hpp"
#include "ogs/geometry.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace ogs {

std::uint64_t morton_encode(std::uint32_t x, std::uint32_t y, std::uint32_t z);
void morton_decode(std::uint64_t code, std::uint32_t& x, std::uint32_t& y, std::uint32_t& z);

// Sparse octree over [-1,1]^3. Level l holds the occupied cells of the
// 2^l-per-axis grid, as ascending Morton codes; level `depth` is the finest.
struct Octree {
    struct Level {
        std::vector<std::uint64_t> codes;   // sorted ascending
        std::vector<std::uint8_t> child_mask;
        std::vector<std::int32_t> parent;   // index into the coarser level
    };

    int depth = 0;
    std::vector<Level> levels; // size depth+1, levels[0] = root

    const Level& finest() const { return levels[static_cast<std::size_t>(depth)]; }
    int leaf_count() const { return static_cast<int>(finest().codes.size()); }
    int node_count(int level) const {
        return static_cast<int>(levels[static_cast<std::size_t>(level)].codes.size());
    }
    float cell_size(int level) const { return 2.0f / static_cast<float>(1u << level); }

    // index of `code` at `level`, or -1
    std::int32_t find(int level, std::uint64_t code) const;
};

struct LeafFeatures {
    MatX3f normals;              // average unit normal per leaf
    Eigen::VectorXf displacement; // signed offset along the normal / half cell

    static constexpr int kChannels = 4;
    // packed [normal xyz, displacement] rows, leaf-major
    Eigen::Matrix<float, Eigen::Dynamic, 4, Eigen::RowMajor> packed() const;
};

Octree build_octree(const SurfaceSamples& samples, int depth);

// Every cell of the 2^depth grid occupied (the dense-voxel baseline carrier).
Octree build_dense_octree(int depth);

// Cell index of a point along one axis; boundary values go to the lower cell.
std::uint32_t cell_index(float coord, int depth);

MatX3f leaf_centers(const Octree& tree);

LeafFeatures compute_leaf_features(const Octree& tree, const SurfaceSamples& samples);

// 3x3x3 neighborhood in raster order (z major, then y, then x); entry 13 is
// the cell itself. Missing neighbors are nullopt. Throws if `code` is absent.
std::array<std::optional<std::uint64_t>, 27>
neighbor_lookup(const Octree& tree, int level, std::uint64_t code);

// Node-index table, rows in code order, -1 for absent neighbors.
std::vector<std::int32_t> neighbor_indices(const Octree& tree, int level);

// Mean over occupied children; feats is rows=node_count(level) x channels
// (row-major). Result has rows=node_count(level-1).
std::vector<float> coarsen(const Octree& tree, int level, const std::vector<float>& feats,
                           int channels);

// Inverse of coarsen's indexing: each child gets its parent's value.
std::vector<float> broadcast(const Octree& tree, int level, const std::vector<float>& parent_feats,
                             int channels);

} // namespace ogs
