// SPDX-License-Identifier: Apache-2.0
#include "ogs/geometry.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

using namespace ogs;

namespace {

std::string write_temp(const std::string& name, const std::string& contents) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream(path) << contents;
    return path.string();
}

} // namespace

TEST_CASE("obj loader: cube has 12 triangles and 6 distinct face normals") {
    const Mesh cube = make_cube();
    const auto path = std::filesystem::temp_directory_path() / "ogs_cube.obj";
    save_obj(cube, path.string());
    const Mesh loaded = load_mesh(path.string());

    CHECK(loaded.triangle_count() == 12);
    std::set<std::array<int, 3>> normals;
    for (int t = 0; t < loaded.triangle_count(); ++t) {
        const Vec3f a = loaded.vertices.row(loaded.triangles(t, 0));
        const Vec3f b = loaded.vertices.row(loaded.triangles(t, 1));
        const Vec3f c = loaded.vertices.row(loaded.triangles(t, 2));
        const Vec3f n = (b - a).cross(c - a).normalized();
        normals.insert({static_cast<int>(std::round(n.x())), static_cast<int>(std::round(n.y())),
                        static_cast<int>(std::round(n.z()))});
    }
    CHECK(normals.size() == 6);
}

TEST_CASE("obj loader: quad face fan-triangulates to 2 triangles") {
    const auto path = write_temp("ogs_quad.obj",
                                 "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
    const Mesh mesh = load_mesh(path);
    CHECK(mesh.triangle_count() == 2);
}

TEST_CASE("obj loader: no triangles is an error") {
    const auto path = write_temp("ogs_empty.obj", "# empty\nv 0 0 0\n");
    CHECK_THROWS_WITH_AS(load_mesh(path), doctest::Contains("no triangles"), Error);
    CHECK_THROWS_AS(load_mesh("/nonexistent/mesh.obj"), Error);
}

TEST_CASE("obj loader: computes vertex normals when absent") {
    const auto path = write_temp("ogs_tri.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
    const Mesh mesh = load_mesh(path);
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        CHECK(mesh.normals.row(i).norm() == doctest::Approx(1.f).epsilon(1e-6));
        CHECK(mesh.normals(i, 2) == doctest::Approx(1.f));
    }
}

TEST_CASE("normalize: unit cube at (0..2)^3 maps to [-1,1]^3") {
    Mesh cube = make_cube();
    cube.vertices = (cube.vertices.array() + 1.f).matrix(); // corners 0..2
    const Mesh norm = normalize_mesh(cube);
    CHECK(norm.vertices.minCoeff() == doctest::Approx(-1.f));
    CHECK(norm.vertices.maxCoeff() == doctest::Approx(1.f));
}

TEST_CASE("normalize: idempotent within 1e-7") {
    Mesh sphere = make_uv_sphere(12, 24);
    for (Eigen::Index i = 0; i < sphere.vertices.rows(); ++i)
        sphere.vertices.row(i) = sphere.vertices.row(i) * 0.37f;
    const Mesh once = normalize_mesh(sphere);
    const Mesh twice = normalize_mesh(once);
    CHECK((once.vertices - twice.vertices).cwiseAbs().maxCoeff() <= 1e-7f);
}

TEST_CASE("normalize: anisotropic extents scale uniformly") {
    Mesh cube = make_cube(); // [-1,1]^3
    for (Eigen::Index i = 0; i < cube.vertices.rows(); ++i) {
        cube.vertices(i, 0) *= 2.0f;  // extent 4
        cube.vertices(i, 1) *= 1.0f;  // extent 2
        cube.vertices(i, 2) *= 0.5f;  // extent 1
    }
    const Mesh norm = normalize_mesh(cube);
    const Vec3f lo = norm.vertices.colwise().minCoeff();
    const Vec3f hi = norm.vertices.colwise().maxCoeff();
    CHECK((hi - lo).x() == doctest::Approx(2.f));
    CHECK((hi - lo).y() == doctest::Approx(1.f));
    CHECK((hi - lo).z() == doctest::Approx(0.5f));

    Mesh flat = make_quad();
    flat.vertices.setZero();
    CHECK_THROWS_AS(normalize_mesh(flat), Error);
}

TEST_CASE("sampling: deterministic, on-surface, n=0 rejected") {
    const Mesh sphere = normalize_mesh(make_uv_sphere(16, 32));
    CHECK_THROWS_AS(sample_surface(sphere, 0, 1), Error);

    const SurfaceSamples a = sample_surface(sphere, 500, 42);
    const SurfaceSamples b = sample_surface(sphere, 500, 42);
    CHECK((a.points - b.points).cwiseAbs().maxCoeff() == 0.f);

    // barycentric reconstruction: sample lies on its source triangle
    for (int i = 0; i < a.count(); i += 37) {
        const int t = a.tri_ids[static_cast<std::size_t>(i)];
        const Vec3f p = a.points.row(i);
        const Vec3f v0 = sphere.vertices.row(sphere.triangles(t, 0));
        const Vec3f v1 = sphere.vertices.row(sphere.triangles(t, 1));
        const Vec3f v2 = sphere.vertices.row(sphere.triangles(t, 2));
        // solve for barycentrics in the triangle plane
        const Vec3f e1 = v1 - v0, e2 = v2 - v0, d = p - v0;
        const float d11 = e1.dot(e1), d12 = e1.dot(e2), d22 = e2.dot(e2);
        const float r1 = d.dot(e1), r2 = d.dot(e2);
        const float det = d11 * d22 - d12 * d12;
        const float u = (d22 * r1 - d12 * r2) / det;
        const float v = (d11 * r2 - d12 * r1) / det;
        const Vec3f recon = v0 + u * e1 + v * e2;
        CHECK((recon - p).norm() <= 1e-6f);
        CHECK(u >= -1e-5f);
        CHECK(v >= -1e-5f);
        CHECK(u + v <= 1.f + 1e-5f);
    }
}

TEST_CASE("sampling: cube faces receive area-proportional counts (chi-square)") {
    const Mesh cube = make_cube();
    const int n = 60000;
    const SurfaceSamples s = sample_surface(cube, n, 7);
    // face id = triangle/2 (two triangles per face)
    std::map<int, int> counts;
    for (int i = 0; i < n; ++i) counts[s.tri_ids[static_cast<std::size_t>(i)] / 2] += 1;
    const double expected = n / 6.0;
    double chi2 = 0;
    for (int f = 0; f < 6; ++f) {
        const double d = counts[f] - expected;
        chi2 += d * d / expected;
    }
    CHECK(chi2 < 20.5); // chi2_{5, 0.999}
}

TEST_CASE("sampling: zero-area triangles are never selected") {
    Mesh mesh = make_quad();
    // append a degenerate triangle
    const int base = mesh.vertex_count();
    mesh.vertices.conservativeResize(base + 3, 3);
    mesh.normals.conservativeResize(base + 3, 3);
    mesh.uvs.conservativeResize(base + 3, 2);
    for (int k = 0; k < 3; ++k) {
        mesh.vertices.row(base + k) = Eigen::RowVector3f(0.5f, 0.5f, 0.5f);
        mesh.normals.row(base + k) = Eigen::RowVector3f(0, 0, 1);
        mesh.uvs.row(base + k) = Eigen::RowVector2f(0, 0);
    }
    mesh.triangles.conservativeResize(mesh.triangle_count() + 1, 3);
    mesh.triangles.row(mesh.triangle_count() - 1) << base, base + 1, base + 2;

    const SurfaceSamples s = sample_surface(mesh, 2000, 3);
    const int degenerate = mesh.triangle_count() - 1;
    for (int i = 0; i < s.count(); ++i)
        CHECK(s.tri_ids[static_cast<std::size_t>(i)] != degenerate);
}

TEST_CASE("sampling: per-triangle frequency matches area fraction at n=1e6") {
    const Mesh sphere = normalize_mesh(make_uv_sphere(8, 16));
    const int n = 1000000;
    const SurfaceSamples s = sample_surface(sphere, n, 11);
    std::vector<int> counts(static_cast<std::size_t>(sphere.triangle_count()), 0);
    for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(s.tri_ids[static_cast<std::size_t>(i)])]++;
    const double total = surface_area(sphere);
    // chi-square over triangles; normal approximation of the chi2 tail at p=0.01
    double chi2 = 0;
    int k = 0;
    for (int t = 0; t < sphere.triangle_count(); ++t) {
        const double expected = n * triangle_area(sphere, t) / total;
        if (expected < 5) continue;
        const double d = counts[static_cast<std::size_t>(t)] - expected;
        chi2 += d * d / expected;
        ++k;
    }
    const double z = (chi2 - k) / std::sqrt(2.0 * k);
    CHECK(z < 2.33); // one-sided p > 0.01
}
