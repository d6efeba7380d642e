// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ogs/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ogs {

using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;

// Pinhole camera, world -> view is v = R*x + t with view +z forward,
// image x right / y down, pixel centers at (i+0.5, j+0.5). Double storage so
// rig invariants hold to 1e-9; render kernels cast down as needed.
struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    double near = 0.05, far = 100.0;
    Mat3d R = Mat3d::Identity();
    Vec3d t = Vec3d::Zero();

    Vec3d view_point(const Vec3d& world) const { return R * world + t; }

    struct Projection {
        double x = 0, y = 0; // pixel coordinates
        double depth = 0;    // view-space z
        bool in_front = false;
    };
    Projection project(const Vec3d& world) const {
        const Vec3d v = view_point(world);
        Projection p;
        p.depth = v.z();
        p.in_front = v.z() > near;
        if (p.in_front) {
            p.x = fx * v.x() / v.z() + cx;
            p.y = fy * v.y() / v.z() + cy;
        }
        return p;
    }

    Vec3d position() const { return -R.transpose() * t; } // camera center in world

    static Camera look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up, int width,
                          int height, double vfov_deg);
};

enum class OrbitMode { Uniform, Random };

struct OrbitConfig {
    int count = 64;
    int resolution = 512;
    std::vector<float> elevations_deg = {20.f, -20.f};
    double radius = 2.4;
    double vfov_deg = 40.0;
    std::uint64_t seed = 0;
    OrbitMode mode = OrbitMode::Uniform;
};

std::vector<Camera> make_orbit_cameras(const OrbitConfig& cfg);

// 20 views on +-20 degree rings, the held-out evaluation rig.
std::vector<Camera> evaluation_cameras(int resolution);

void save_cameras(const std::string& path, const std::vector<Camera>& cams);
std::vector<Camera> load_cameras(const std::string& path);

} // namespace ogs
