// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ogs/common.hpp"

#include <string>
#include <vector>

namespace ogs {

// Triangle mesh with unified indexing: one normal/uv per vertex, vertices
// split on load when OBJ corners disagree.
struct Mesh {
    MatX3f vertices;
    MatX3i triangles;
    MatX3f normals;       // per-vertex, unit length
    MatX2f uvs;           // rows == vertices when present, else 0 rows
    std::vector<int> material_ids; // per-triangle, empty when single group

    int vertex_count() const { return static_cast<int>(vertices.rows()); }
    int triangle_count() const { return static_cast<int>(triangles.rows()); }
    bool has_uvs() const { return uvs.rows() == vertices.rows() && uvs.rows() > 0; }
};

struct SurfaceSamples {
    MatX3f points;
    MatX3f normals;
    std::vector<int> tri_ids;

    int count() const { return static_cast<int>(points.rows()); }
};

Mesh load_mesh(const std::string& path);
void save_obj(const Mesh& mesh, const std::string& path);

// Center at bbox center, uniform scale so the longest axis spans [-1,1].
Mesh normalize_mesh(const Mesh& mesh);

// Area-weighted triangle selection, uniform barycentric within the triangle.
SurfaceSamples sample_surface(const Mesh& mesh, int n, std::uint64_t seed);

// Recompute per-vertex normals as area-weighted averages of incident faces.
void compute_vertex_normals(Mesh& mesh);

double triangle_area(const Mesh& mesh, int tri);
double surface_area(const Mesh& mesh);

// Benchmark primitives (unit-scale, with UVs and normals).
Mesh make_cube();
Mesh make_quad();
Mesh make_uv_sphere(int rings, int segments);
Mesh make_torus(int rings, int segments, float major, float minor);

Mesh rotate_mesh(const Mesh& mesh, const Mat3f& rotation);

} // namespace ogs
