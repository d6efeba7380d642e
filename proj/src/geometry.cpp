// SPDX-License-Identifier: Apache-2.0
#include "ogs/geometry.hpp"

#include "ogs/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace ogs {

namespace {

struct ObjIndex {
    int v = -1;
    int vt = -1;
    int vn = -1;
    bool operator<(const ObjIndex& o) const {
        return std::tie(v, vt, vn) < std::tie(o.v, o.vt, o.vn);
    }
};

int resolve(int idx, int count) {
    // OBJ indices are 1-based; negative counts from the end.
    if (idx > 0) return idx - 1;
    if (idx < 0) return count + idx;
    return -1;
}

ObjIndex parse_corner(const std::string& token, int nv, int nvt, int nvn) {
    ObjIndex out;
    int vals[3] = {0, 0, 0};
    int slot = 0;
    std::size_t pos = 0;
    while (pos <= token.size() && slot < 3) {
        std::size_t next = token.find('/', pos);
        if (next == std::string::npos) next = token.size();
        if (next > pos) vals[slot] = std::stoi(token.substr(pos, next - pos));
        ++slot;
        pos = next + 1;
    }
    out.v = resolve(vals[0], nv);
    out.vt = resolve(vals[1], nvt);
    out.vn = resolve(vals[2], nvn);
    OGS_REQUIRE(out.v >= 0 && out.v < nv, "obj: vertex index out of range: " + token);
    OGS_REQUIRE(out.vt < nvt, "obj: uv index out of range: " + token);
    OGS_REQUIRE(out.vn < nvn, "obj: normal index out of range: " + token);
    return out;
}

} // namespace

Mesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    OGS_REQUIRE(in.good(), "cannot open mesh file: " + path);

    std::vector<Vec3f> positions;
    std::vector<Vec3f> raw_normals;
    std::vector<Vec2f> raw_uvs;
    std::vector<std::array<ObjIndex, 3>> faces;
    std::vector<int> face_materials;
    std::map<std::string, int> material_names;
    int current_material = -1;

    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            Vec3f p;
            ls >> p.x() >> p.y() >> p.z();
            positions.push_back(p);
        } else if (tag == "vn") {
            Vec3f n;
            ls >> n.x() >> n.y() >> n.z();
            raw_normals.push_back(n);
        } else if (tag == "vt") {
            Vec2f t;
            ls >> t.x() >> t.y();
            raw_uvs.push_back(t);
        } else if (tag == "usemtl") {
            std::string name;
            ls >> name;
            auto [it, inserted] =
                material_names.emplace(name, static_cast<int>(material_names.size()));
            current_material = it->second;
            (void)inserted;
        } else if (tag == "f") {
            std::vector<ObjIndex> corners;
            std::string token;
            while (ls >> token)
                corners.push_back(parse_corner(token, static_cast<int>(positions.size()),
                                               static_cast<int>(raw_uvs.size()),
                                               static_cast<int>(raw_normals.size())));
            OGS_REQUIRE(corners.size() >= 3, "obj: face with fewer than 3 corners");
            for (std::size_t k = 2; k < corners.size(); ++k) {
                faces.push_back({corners[0], corners[k - 1], corners[k]});
                face_materials.push_back(current_material);
            }
        }
    }
    OGS_REQUIRE(!faces.empty(), "no triangles in mesh file: " + path);

    // Split vertices so each (v, vt, vn) triple is unique.
    std::map<ObjIndex, int> remap;
    std::vector<ObjIndex> unified;
    Mesh mesh;
    mesh.triangles.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (int c = 0; c < 3; ++c) {
            const ObjIndex& key = faces[f][c];
            auto it = remap.find(key);
            if (it == remap.end()) {
                it = remap.emplace(key, static_cast<int>(unified.size())).first;
                unified.push_back(key);
            }
            mesh.triangles(static_cast<Eigen::Index>(f), c) = it->second;
        }
    }

    const bool any_uv = !raw_uvs.empty();
    const bool all_normals =
        !raw_normals.empty() &&
        std::all_of(unified.begin(), unified.end(), [](const ObjIndex& i) { return i.vn >= 0; });

    mesh.vertices.resize(static_cast<Eigen::Index>(unified.size()), 3);
    if (any_uv) mesh.uvs.setZero(static_cast<Eigen::Index>(unified.size()), 2);
    if (all_normals) mesh.normals.resize(static_cast<Eigen::Index>(unified.size()), 3);
    for (std::size_t i = 0; i < unified.size(); ++i) {
        const ObjIndex& key = unified[i];
        mesh.vertices.row(static_cast<Eigen::Index>(i)) = positions[key.v].transpose();
        if (any_uv && key.vt >= 0)
            mesh.uvs.row(static_cast<Eigen::Index>(i)) = raw_uvs[key.vt].transpose();
        if (all_normals) {
            Vec3f n = raw_normals[key.vn];
            const float len = n.norm();
            mesh.normals.row(static_cast<Eigen::Index>(i)) =
                (len > 0 ? (n / len).eval() : Vec3f(0, 0, 1)).transpose();
        }
    }
    if (material_names.size() > 1) mesh.material_ids = face_materials;
    if (!all_normals) compute_vertex_normals(mesh);
    return mesh;
}

void save_obj(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path);
    OGS_REQUIRE(out.good(), "cannot write mesh file: " + path);
    char buf[256];
    for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
        std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", mesh.vertices(i, 0),
                      mesh.vertices(i, 1), mesh.vertices(i, 2));
        out << buf;
    }
    for (Eigen::Index i = 0; i < mesh.normals.rows(); ++i) {
        std::snprintf(buf, sizeof(buf), "vn %.9g %.9g %.9g\n", mesh.normals(i, 0),
                      mesh.normals(i, 1), mesh.normals(i, 2));
        out << buf;
    }
    const bool uvs = mesh.has_uvs();
    for (Eigen::Index i = 0; i < mesh.uvs.rows() && uvs; ++i) {
        std::snprintf(buf, sizeof(buf), "vt %.9g %.9g\n", mesh.uvs(i, 0), mesh.uvs(i, 1));
        out << buf;
    }
    for (Eigen::Index t = 0; t < mesh.triangles.rows(); ++t) {
        out << "f";
        for (int c = 0; c < 3; ++c) {
            const int i = mesh.triangles(t, c) + 1;
            if (uvs)
                out << ' ' << i << '/' << i << '/' << i;
            else
                out << ' ' << i << "//" << i;
        }
        out << '\n';
    }
}

void compute_vertex_normals(Mesh& mesh) {
    mesh.normals.setZero(mesh.vertices.rows(), 3);
    for (Eigen::Index t = 0; t < mesh.triangles.rows(); ++t) {
        const Vec3f a = mesh.vertices.row(mesh.triangles(t, 0));
        const Vec3f b = mesh.vertices.row(mesh.triangles(t, 1));
        const Vec3f c = mesh.vertices.row(mesh.triangles(t, 2));
        const Vec3f n = (b - a).cross(c - a); // length == 2*area weights the average
        for (int k = 0; k < 3; ++k)
            mesh.normals.row(mesh.triangles(t, k)) += n.transpose();
    }
    for (Eigen::Index i = 0; i < mesh.normals.rows(); ++i) {
        const float len = mesh.normals.row(i).norm();
        if (len > 0)
            mesh.normals.row(i) /= len;
        else
            mesh.normals.row(i) = Eigen::RowVector3f(0, 0, 1);
    }
}

Mesh normalize_mesh(const Mesh& mesh) {
    OGS_REQUIRE(mesh.triangle_count() > 0, "normalize_mesh: empty mesh");
    const Vec3f lo = mesh.vertices.colwise().minCoeff();
    const Vec3f hi = mesh.vertices.colwise().maxCoeff();
    const Vec3f extent = hi - lo;
    const float longest = extent.maxCoeff();
    OGS_REQUIRE(longest > 0, "normalize_mesh: mesh has zero extent");
    const Vec3f center = (lo + hi) * 0.5f;
    const float scale = 2.0f / longest;

    Mesh out = mesh;
    for (Eigen::Index i = 0; i < out.vertices.rows(); ++i)
        out.vertices.row(i) = ((mesh.vertices.row(i).transpose() - center) * scale).transpose();
    return out;
}

double triangle_area(const Mesh& mesh, int tri) {
    const Vec3f a = mesh.vertices.row(mesh.triangles(tri, 0));
    const Vec3f b = mesh.vertices.row(mesh.triangles(tri, 1));
    const Vec3f c = mesh.vertices.row(mesh.triangles(tri, 2));
    return 0.5 * static_cast<double>((b - a).cross(c - a).norm());
}

double surface_area(const Mesh& mesh) {
    double total = 0;
    for (int t = 0; t < mesh.triangle_count(); ++t) total += triangle_area(mesh, t);
    return total;
}

SurfaceSamples sample_surface(const Mesh& mesh, int n, std::uint64_t seed) {
    OGS_REQUIRE(n > 0, "sample_surface: sample count must be positive");
    const int tris = mesh.triangle_count();
    OGS_REQUIRE(tris > 0, "sample_surface: empty mesh");

    std::vector<double> cdf(static_cast<std::size_t>(tris));
    double total = 0;
    for (int t = 0; t < tris; ++t) {
        total += triangle_area(mesh, t);
        cdf[static_cast<std::size_t>(t)] = total;
    }
    OGS_REQUIRE(total > 0, "sample_surface: mesh has no positive-area triangles");

    SurfaceSamples out;
    out.points.resize(n, 3);
    out.normals.resize(n, 3);
    out.tri_ids.resize(static_cast<std::size_t>(n));

    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        const double r = rng.uniform() * total;
        const int t = static_cast<int>(
            std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
        const int tc = std::min(t, tris - 1);

        // uniform barycentric via sqrt trick
        const float su = std::sqrt(rng.uniformf());
        const float v = rng.uniformf();
        const float w0 = 1.0f - su;
        const float w1 = su * (1.0f - v);
        const float w2 = su * v;

        const int ia = mesh.triangles(tc, 0);
        const int ib = mesh.triangles(tc, 1);
        const int ic = mesh.triangles(tc, 2);
        out.points.row(i) = w0 * mesh.vertices.row(ia) + w1 * mesh.vertices.row(ib) +
                            w2 * mesh.vertices.row(ic);
        Vec3f normal = w0 * mesh.normals.row(ia).transpose() +
                       w1 * mesh.normals.row(ib).transpose() +
                       w2 * mesh.normals.row(ic).transpose();
        const float len = normal.norm();
        if (len > 1e-12f)
            normal /= len;
        else
            normal = (mesh.vertices.row(ib) - mesh.vertices.row(ia))
                         .transpose()
                         .cross((mesh.vertices.row(ic) - mesh.vertices.row(ia)).transpose())
                         .normalized();
        out.normals.row(i) = normal.transpose();
        out.tri_ids[static_cast<std::size_t>(i)] = tc;
    }
    return out;
}

Mesh rotate_mesh(const Mesh& mesh, const Mat3f& rotation) {
    Mesh out = mesh;
    for (Eigen::Index i = 0; i < out.vertices.rows(); ++i) {
        out.vertices.row(i) = (rotation * mesh.vertices.row(i).transpose()).transpose();
        out.normals.row(i) = (rotation * mesh.normals.row(i).transpose()).transpose();
    }
    return out;
}

namespace {

void push_quad(std::vector<std::array<int, 3>>& tris, int a, int b, int c, int d) {
    tris.push_back({a, b, c});
    tris.push_back({a, c, d});
}

Mesh from_buffers(const std::vector<Vec3f>& pos, const std::vector<Vec3f>& nrm,
                  const std::vector<Vec2f>& uv, const std::vector<std::array<int, 3>>& tris) {
    Mesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(pos.size()), 3);
    mesh.normals.resize(static_cast<Eigen::Index>(nrm.size()), 3);
    mesh.uvs.resize(static_cast<Eigen::Index>(uv.size()), 2);
    for (std::size_t i = 0; i < pos.size(); ++i) {
        mesh.vertices.row(static_cast<Eigen::Index>(i)) = pos[i].transpose();
        mesh.normals.row(static_cast<Eigen::Index>(i)) = nrm[i].normalized().transpose();
        mesh.uvs.row(static_cast<Eigen::Index>(i)) = uv[i].transpose();
    }
    mesh.triangles.resize(static_cast<Eigen::Index>(tris.size()), 3);
    for (std::size_t t = 0; t < tris.size(); ++t)
        for (int c = 0; c < 3; ++c)
            mesh.triangles(static_cast<Eigen::Index>(t), c) = tris[t][c];
    return mesh;
}

} // namespace

Mesh make_cube() {
    // 24 vertices (4 per face) so normals and UVs stay per-face.
    static const int axes[6][3] = {{0, 1, 2}, {0, 1, 2}, {1, 2, 0},
                                   {1, 2, 0}, {2, 0, 1}, {2, 0, 1}};
    static const float signs[6] = {1, -1, 1, -1, 1, -1};
    std::vector<Vec3f> pos, nrm;
    std::vector<Vec2f> uv;
    std::vector<std::array<int, 3>> tris;
    for (int f = 0; f < 6; ++f) {
        const int u_axis = axes[f][0], v_axis = axes[f][1], w_axis = axes[f][2];
        const float s = signs[f];
        const int base = static_cast<int>(pos.size());
        for (int corner = 0; corner < 4; ++corner) {
            const float cu = (corner == 1 || corner == 2) ? 1.f : -1.f;
            const float cv = (corner >= 2) ? 1.f : -1.f;
            Vec3f p = Vec3f::Zero(), n = Vec3f::Zero();
            p[u_axis] = cu * s;
            p[v_axis] = cv;
            p[w_axis] = s;
            n[w_axis] = s;
            pos.push_back(p);
            nrm.push_back(n);
            uv.push_back(Vec2f((cu * s + 1) * 0.5f, (cv + 1) * 0.5f));
        }
        push_quad(tris, base, base + 1, base + 2, base + 3);
    }
    return from_buffers(pos, nrm, uv, tris);
}

Mesh make_quad() {
    std::vector<Vec3f> pos = {{-1, -1, 0}, {1, -1, 0}, {1, 1, 0}, {-1, 1, 0}};
    std::vector<Vec3f> nrm(4, Vec3f(0, 0, 1));
    std::vector<Vec2f> uv = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    std::vector<std::array<int, 3>> tris;
    push_quad(tris, 0, 1, 2, 3);
    return from_buffers(pos, nrm, uv, tris);
}

Mesh make_uv_sphere(int rings, int segments) {
    OGS_REQUIRE(rings >= 2 && segments >= 3, "make_uv_sphere: too few subdivisions");
    std::vector<Vec3f> pos, nrm;
    std::vector<Vec2f> uv;
    std::vector<std::array<int, 3>> tris;
    const float pi = 3.14159265358979323846f;
    // (rings+1) x (segments+1) grid with a duplicated seam column
    for (int r = 0; r <= rings; ++r) {
        const float theta = pi * static_cast<float>(r) / static_cast<float>(rings);
        for (int s = 0; s <= segments; ++s) {
            const float phi = 2.f * pi * static_cast<float>(s) / static_cast<float>(segments);
            const Vec3f p(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                          std::cos(theta));
            pos.push_back(p);
            nrm.push_back(p);
            uv.push_back(Vec2f(static_cast<float>(s) / segments,
                               1.f - static_cast<float>(r) / rings));
        }
    }
    const int stride = segments + 1;
    for (int r = 0; r < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            const int a = r * stride + s;
            const int b = a + 1;
            const int c = a + stride + 1;
            const int d = a + stride;
            if (r > 0) tris.push_back({a, b, c});
            if (r < rings - 1) tris.push_back({a, c, d});
        }
    }
    return from_buffers(pos, nrm, uv, tris);
}

Mesh make_torus(int rings, int segments, float major, float minor) {
    OGS_REQUIRE(rings >= 3 && segments >= 3, "make_torus: too few subdivisions");
    std::vector<Vec3f> pos, nrm;
    std::vector<Vec2f> uv;
    std::vector<std::array<int, 3>> tris;
    const float pi = 3.14159265358979323846f;
    for (int r = 0; r <= rings; ++r) {
        const float u = 2.f * pi * static_cast<float>(r) / static_cast<float>(rings);
        for (int s = 0; s <= segments; ++s) {
            const float v = 2.f * pi * static_cast<float>(s) / static_cast<float>(segments);
            const Vec3f center(major * std::cos(u), major * std::sin(u), 0.f);
            const Vec3f radial(std::cos(u) * std::cos(v), std::sin(u) * std::cos(v),
                               std::sin(v));
            pos.push_back(center + minor * radial);
            nrm.push_back(radial);
            uv.push_back(Vec2f(static_cast<float>(r) / rings, static_cast<float>(s) / segments));
        }
    }
    const int stride = segments + 1;
    for (int r = 0; r < rings; ++r)
        for (int s = 0; s < segments; ++s) {
            const int a = r * stride + s;
            push_quad(tris, a, a + stride, a + stride + 1, a + 1);
        }
    return from_buffers(pos, nrm, uv, tris);
}

} // namespace ogs
