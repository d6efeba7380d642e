// SPDX-License-Identifier: Apache-2.0
#include "ogs/camera.hpp"

#include "ogs/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ogs {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Camera Camera::look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up, int width,
                       int height, double vfov_deg) {
    const Vec3d forward = (target - eye).normalized();
    Vec3d right = forward.cross(up);
    if (right.norm() < 1e-9) right = forward.cross(Vec3d(1, 0, 0));
    right.normalize();
    const Vec3d down = forward.cross(right).normalized();

    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.R.row(0) = right.transpose();
    cam.R.row(1) = down.transpose();
    cam.R.row(2) = forward.transpose();
    cam.t = -cam.R * eye;
    cam.fy = 0.5 * height / std::tan(vfov_deg * kPi / 360.0);
    cam.fx = cam.fy;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    return cam;
}

std::vector<Camera> make_orbit_cameras(const OrbitConfig& cfg) {
    OGS_REQUIRE(cfg.count >= 1, "make_orbit_cameras: count must be >= 1");
    OGS_REQUIRE(cfg.radius > std::sqrt(3.0),
                "make_orbit_cameras: radius too small to contain the unit cube");
    const double deg = kPi / 180.0;
    std::vector<Camera> cams;
    cams.reserve(static_cast<std::size_t>(cfg.count));

    auto orbit_camera = [&](double azimuth_rad, double elevation_rad) {
        const Vec3d eye(cfg.radius * std::cos(elevation_rad) * std::cos(azimuth_rad),
                        cfg.radius * std::cos(elevation_rad) * std::sin(azimuth_rad),
                        cfg.radius * std::sin(elevation_rad));
        return Camera::look_at(eye, Vec3d::Zero(), Vec3d(0, 0, 1), cfg.resolution,
                               cfg.resolution, cfg.vfov_deg);
    };

    if (cfg.mode == OrbitMode::Uniform) {
        const int rings = std::max<int>(static_cast<int>(cfg.elevations_deg.size()), 1);
        for (int r = 0; r < rings; ++r) {
            const int ring_count = cfg.count / rings + (r < cfg.count % rings ? 1 : 0);
            const double elev =
                cfg.elevations_deg.empty() ? 0.0 : cfg.elevations_deg[static_cast<std::size_t>(r)];
            for (int k = 0; k < ring_count; ++k)
                cams.push_back(orbit_camera(2.0 * kPi * k / ring_count, elev * deg));
        }
    } else {
        Rng rng(cfg.seed);
        double lo = -20.0, hi = 20.0;
        if (!cfg.elevations_deg.empty()) {
            lo = *std::min_element(cfg.elevations_deg.begin(), cfg.elevations_deg.end());
            hi = *std::max_element(cfg.elevations_deg.begin(), cfg.elevations_deg.end());
        }
        for (int k = 0; k < cfg.count; ++k) {
            const double az = rng.uniform(0.0, 2.0 * kPi);
            const double elev = rng.uniform(lo, hi) * deg;
            cams.push_back(orbit_camera(az, elev));
        }
    }
    return cams;
}

std::vector<Camera> evaluation_cameras(int resolution) {
    OrbitConfig cfg;
    cfg.count = 20;
    cfg.resolution = resolution;
    cfg.elevations_deg = {20.f, -20.f};
    cfg.mode = OrbitMode::Uniform;
    return make_orbit_cameras(cfg);
}

void save_cameras(const std::string& path, const std::vector<Camera>& cams) {
    std::ofstream out(path);
    OGS_REQUIRE(out.good(), "cannot write camera file: " + path);
    out << "# width height fx fy cx cy near far T(3x4 row-major)\n";
    char buf[768];
    for (const Camera& c : cams) {
        std::snprintf(buf, sizeof(buf),
                      "%d %d %.17g %.17g %.17g %.17g %.17g %.17g "
                      "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                      c.width, c.height, c.fx, c.fy, c.cx, c.cy, c.near, c.far, c.R(0, 0),
                      c.R(0, 1), c.R(0, 2), c.t(0), c.R(1, 0), c.R(1, 1), c.R(1, 2), c.t(1),
                      c.R(2, 0), c.R(2, 1), c.R(2, 2), c.t(2));
        out << buf;
    }
}

std::vector<Camera> load_cameras(const std::string& path) {
    std::ifstream in(path);
    OGS_REQUIRE(in.good(), "cannot open camera file: " + path);
    std::vector<Camera> cams;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        Camera c;
        ls >> c.width >> c.height >> c.fx >> c.fy >> c.cx >> c.cy >> c.near >> c.far;
        for (int r = 0; r < 3; ++r) {
            ls >> c.R(r, 0) >> c.R(r, 1) >> c.R(r, 2) >> c.t(r);
        }
        OGS_REQUIRE(!ls.fail(), "malformed camera line: " + line);
        cams.push_back(c);
    }
    OGS_REQUIRE(!cams.empty(), "camera file has no cameras: " + path);
    return cams;
}

} // namespace ogs
