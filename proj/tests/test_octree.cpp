// SPDX-License-Identifier: Apache-2.0
#include "ogs/octree.hpp"

#include "ogs/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace ogs;

namespace {

SurfaceSamples samples_from_points(const std::vector<Vec3f>& pts,
                                   const Vec3f& normal = Vec3f(0, 0, 1)) {
    SurfaceSamples s;
    s.points.resize(static_cast<Eigen::Index>(pts.size()), 3);
    s.normals.resize(static_cast<Eigen::Index>(pts.size()), 3);
    s.tri_ids.assign(pts.size(), 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        s.points.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
        s.normals.row(static_cast<Eigen::Index>(i)) = normal.transpose();
    }
    return s;
}

} // namespace

TEST_CASE("morton: encode/decode round-trips below 2^12 per axis") {
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        const auto x = static_cast<std::uint32_t>(rng.below(1u << 12));
        const auto y = static_cast<std::uint32_t>(rng.below(1u << 12));
        const auto z = static_cast<std::uint32_t>(rng.below(1u << 12));
        std::uint32_t dx, dy, dz;
        morton_decode(morton_encode(x, y, z), dx, dy, dz);
        CHECK(dx == x);
        CHECK(dy == y);
        CHECK(dz == z);
    }
}

TEST_CASE("build: single point at (0.5,0.5,0.5) depth 1 gives one leaf at the octant center") {
    const auto s = samples_from_points({Vec3f(0.5f, 0.5f, 0.5f)});
    const Octree tree = build_octree(s, 1);
    CHECK(tree.leaf_count() == 1);
    const MatX3f centers = leaf_centers(tree);
    CHECK(centers(0, 0) == doctest::Approx(0.5f));
    CHECK(centers(0, 1) == doctest::Approx(0.5f));
    CHECK(centers(0, 2) == doctest::Approx(0.5f));
    CHECK(tree.cell_size(1) == doctest::Approx(1.0f)); // half-size 0.5
}

TEST_CASE("build: 8 octant centers give 8 leaves; parents are linked") {
    std::vector<Vec3f> pts;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
                pts.push_back(Vec3f(dx - 0.5f, dy - 0.5f, dz - 0.5f));
    const Octree tree = build_octree(samples_from_points(pts), 1);
    CHECK(tree.leaf_count() == 8);
    CHECK(tree.node_count(0) == 1);
    CHECK(tree.levels[0].child_mask[0] == 0xff);
}

TEST_CASE("build: errors on bad input") {
    const auto s = samples_from_points({Vec3f(0, 0, 0)});
    CHECK_THROWS_AS(build_octree(s, 0), Error);
    CHECK_THROWS_AS(build_octree(s, 13), Error);
    SurfaceSamples empty;
    empty.points.resize(0, 3);
    empty.normals.resize(0, 3);
    CHECK_THROWS_AS(build_octree(empty, 4), Error);
}

TEST_CASE("leaf centers: closed forms at depth 8 and strict interiority") {
    const auto s = samples_from_points({Vec3f(-1.f, -1.f, -1.f), Vec3f(0.6f, -0.2f, 0.99f)});
    const Octree tree = build_octree(s, 8);
    const MatX3f centers = leaf_centers(tree);
    // cell (0,0,0) center is -1 + 1/256
    CHECK(centers(0, 0) == doctest::Approx(-1.f + 1.f / 256.f));
    for (Eigen::Index i = 0; i < centers.rows(); ++i)
        for (int c = 0; c < 3; ++c) {
            CHECK(centers(i, c) > -1.f);
            CHECK(centers(i, c) < 1.f);
        }
}

TEST_CASE("build: order-independent under sample permutation") {
    Rng rng(17);
    std::vector<Vec3f> pts;
    for (int i = 0; i < 300; ++i)
        pts.push_back(Vec3f(rng.uniformf() * 2 - 1, rng.uniformf() * 2 - 1,
                            rng.uniformf() * 2 - 1));
    const Octree a = build_octree(samples_from_points(pts), 5);
    std::reverse(pts.begin(), pts.end());
    const Octree b = build_octree(samples_from_points(pts), 5);
    CHECK(a.finest().codes == b.finest().codes);
}

TEST_CASE("cells: every point maps into its leaf box; boundaries go to the lower cell") {
    // boundary between cells at coordinate 0 (depth 1): point 0 -> lower cell
    CHECK(cell_index(0.f, 1) == 0);
    CHECK(cell_index(-1.f, 1) == 0);
    CHECK(cell_index(1.f, 1) == 1);
    CHECK(cell_index(1e-6f, 1) == 1);

    Rng rng(23);
    const int depth = 6;
    const float cell = 2.f / 64.f;
    for (int i = 0; i < 3000; ++i) {
        const float x = rng.uniformf() * 2 - 1;
        const auto idx = cell_index(x, depth);
        const float lo = -1.f + static_cast<float>(idx) * cell;
        const float hi = lo + cell;
        CHECK(x >= lo - 1e-6f);
        CHECK(x <= hi + 1e-6f);
    }
}

TEST_CASE("features: center sample, symmetric pair, quarter-offset example") {
    const int depth = 3;
    const float half = 1.f / 8.f; // cell 2/8, half 1/8
    // leaf center at cell (4,4,4): (0.125, 0.125, 0.125)
    const Vec3f center(0.125f, 0.125f, 0.125f);
    const Vec3f n(0, 0, 1);

    SUBCASE("single sample at the exact center -> displacement 0") {
        const Octree tree = build_octree(samples_from_points({center}, n), depth);
        const LeafFeatures f = compute_leaf_features(tree, samples_from_points({center}, n));
        CHECK(f.displacement(0) == doctest::Approx(0.f).epsilon(1e-6));
        CHECK(f.normals(0, 2) == doctest::Approx(1.f));
    }
    SUBCASE("two samples symmetric about the center -> displacement 0") {
        const auto s = samples_from_points(
            {center + 0.3f * half * n, center - 0.3f * half * n}, n);
        const Octree tree = build_octree(s, depth);
        const LeafFeatures f = compute_leaf_features(tree, s);
        CHECK(f.displacement(0) == doctest::Approx(0.f).epsilon(1e-5));
    }
    SUBCASE("one sample at +quarter-cell along the normal -> displacement 0.5") {
        // quarter of the leaf size = half * 0.5
        const auto s = samples_from_points({center + 0.5f * half * n}, n);
        const Octree tree = build_octree(s, depth);
        const LeafFeatures f = compute_leaf_features(tree, s);
        CHECK(f.displacement(0) == doctest::Approx(0.5f).epsilon(1e-5));
        CHECK(std::abs(f.displacement(0)) <= std::sqrt(3.f));
    }
}

TEST_CASE("neighbors: interior 27, corner 8, isolated 1") {
    // fully occupied 4^3 region at depth 2
    std::vector<Vec3f> pts;
    const float cell = 0.5f;
    for (int z = 0; z < 4; ++z)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                pts.push_back(Vec3f(-1 + (x + 0.5f) * cell, -1 + (y + 0.5f) * cell,
                                    -1 + (z + 0.5f) * cell));
    const Octree full = build_octree(samples_from_points(pts), 2);
    REQUIRE(full.leaf_count() == 64);

    const auto interior = neighbor_lookup(full, 2, morton_encode(1, 1, 1));
    CHECK(std::count_if(interior.begin(), interior.end(),
                        [](const auto& o) { return o.has_value(); }) == 27);
    CHECK(interior[13].value() == morton_encode(1, 1, 1)); // self at the center slot

    const auto corner = neighbor_lookup(full, 2, morton_encode(0, 0, 0));
    CHECK(std::count_if(corner.begin(), corner.end(),
                        [](const auto& o) { return o.has_value(); }) == 8);

    const Octree lone = build_octree(samples_from_points({Vec3f(0.9f, 0.9f, 0.9f)}), 3);
    const auto only = neighbor_lookup(lone, 3, lone.finest().codes[0]);
    CHECK(std::count_if(only.begin(), only.end(),
                        [](const auto& o) { return o.has_value(); }) == 1);

    CHECK_THROWS_AS(neighbor_lookup(full, 2, morton_encode(30, 30, 30)), Error);
}

TEST_CASE("neighbor table mirrors neighbor_lookup in raster order") {
    Rng rng(31);
    std::vector<Vec3f> pts;
    for (int i = 0; i < 120; ++i)
        pts.push_back(Vec3f(rng.uniformf() * 2 - 1, rng.uniformf() * 2 - 1,
                            rng.uniformf() * 2 - 1));
    const Octree tree = build_octree(samples_from_points(pts), 4);
    const auto table = neighbor_indices(tree, 4);
    for (int i = 0; i < tree.leaf_count(); ++i) {
        const auto codes = neighbor_lookup(tree, 4, tree.finest().codes[static_cast<std::size_t>(i)]);
        for (int k = 0; k < 27; ++k) {
            const std::int32_t idx = table[static_cast<std::size_t>(i) * 27 + static_cast<std::size_t>(k)];
            if (codes[static_cast<std::size_t>(k)].has_value()) {
                REQUIRE(idx >= 0);
                CHECK(tree.finest().codes[static_cast<std::size_t>(idx)] ==
                      codes[static_cast<std::size_t>(k)].value());
            } else {
                CHECK(idx == -1);
            }
        }
    }
}

TEST_CASE("coarsen: means of occupied children; broadcast inverts on constants") {
    std::vector<Vec3f> pts;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
                pts.push_back(Vec3f(-1 + (dx + 0.5f) * 0.5f, -1 + (dy + 0.5f) * 0.5f,
                                    -1 + (dz + 0.5f) * 0.5f)); // one full parent at depth 2
    pts.push_back(Vec3f(0.9f, 0.9f, 0.9f)); // a lone child elsewhere
    const Octree tree = build_octree(samples_from_points(pts), 2);
    REQUIRE(tree.leaf_count() == 9);
    REQUIRE(tree.node_count(1) == 2);

    // values 1..8 for the full parent (morton order groups children first)
    std::vector<float> feats(9, 0.f);
    for (int i = 0; i < 8; ++i) feats[static_cast<std::size_t>(i)] = static_cast<float>(i + 1);
    feats[8] = 42.f;
    const auto parents = coarsen(tree, 2, feats, 1);
    CHECK(parents[0] == doctest::Approx(4.5f));
    CHECK(parents[1] == doctest::Approx(42.f)); // mean of one

    // broadcast(coarsen(constant)) == constant
    std::vector<float> constant(9, 3.25f);
    const auto up = broadcast(tree, 2, coarsen(tree, 2, constant, 1), 1);
    for (const float v : up) CHECK(v == doctest::Approx(3.25f));

    CHECK_THROWS_AS(coarsen(tree, 2, std::vector<float>(5, 0.f), 1), Error);
}

TEST_CASE("dense octree: full occupancy per level") {
    const Octree dense = build_dense_octree(3);
    CHECK(dense.leaf_count() == 512);
    CHECK(dense.node_count(2) == 64);
    CHECK(dense.node_count(0) == 1);
    for (const auto m : dense.levels[1].child_mask) CHECK(m == 0xff);
}

TEST_CASE("every sample maps to exactly one existing leaf containing it") {
    Rng rng(41);
    std::vector<Vec3f> pts;
    for (int i = 0; i < 500; ++i)
        pts.push_back(Vec3f(rng.uniformf() * 2 - 1, rng.uniformf() * 2 - 1,
                            rng.uniformf() * 2 - 1));
    const auto s = samples_from_points(pts);
    const int depth = 5;
    const Octree tree = build_octree(s, depth);
    const float cell = tree.cell_size(depth);
    for (int i = 0; i < s.count(); ++i) {
        const std::uint32_t x = cell_index(s.points(i, 0), depth);
        const std::uint32_t y = cell_index(s.points(i, 1), depth);
        const std::uint32_t z = cell_index(s.points(i, 2), depth);
        const auto idx = tree.find(depth, morton_encode(x, y, z));
        REQUIRE(idx >= 0);
        for (int c = 0; c < 3; ++c) {
            const std::uint32_t ic = c == 0 ? x : (c == 1 ? y : z);
            const float lo = -1.f + static_cast<float>(ic) * cell;
            CHECK(s.points(i, c) >= lo - 1e-6f);
            CHECK(s.points(i, c) <= lo + cell + 1e-6f);
        }
    }
}
