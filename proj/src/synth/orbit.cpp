// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/synth/orbit.hpp"

#include "dragon/core/error.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace dragon {

void Intrinsics::validate() const {
    if (width <= 0 || height <= 0) throw InvalidInput("intrinsics: image size must be positive");
    if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidInput("intrinsics: focal lengths must be positive");
}

CameraView Intrinsics::apply(CameraView view) const {
    view.width = width;
    view.height = height;
    view.fx = fx;
    view.fy = fy;
    view.cx = cx;
    view.cy = cy;
    return view;
}

void OrbitSpec::validate() const {
    if (!(trajectory_radius > 0.0)) throw InvalidInput("orbit: trajectory radius must be > 0");
    if (image_count < 3) throw InvalidInput("orbit: image_count must be >= 3");
    if (elevation_index < 0) throw InvalidInput("orbit: elevation index must be >= 0");
}

Mat3 look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& up) {
    const Vec3 d = target - eye;
    if (!(d.norm() > 0.0)) throw DegenerateConfiguration("look_at: camera coincides with target");
    const Vec3 fwd = d.normalized();
    Vec3 right = fwd.cross(up);
    if (right.norm() < 1e-12) right = fwd.cross(Vec3::UnitZ());
    right.normalize();
    const Vec3 down = fwd.cross(right);
    Mat3 R;
    R.row(0) = right.transpose();
    R.row(1) = down.transpose();
    R.row(2) = fwd.transpose();
    return R;
}

std::vector<CameraView> generate_orbit_poses(const OrbitSpec& orbit, const Vec3& scene_center,
                                             const Intrinsics& intrinsics) {
    orbit.validate();
    intrinsics.validate();
    const Vec3 target(scene_center.x(), orbit.target_altitude, scene_center.z());
    std::vector<CameraView> views;
    views.reserve(orbit.image_count);
    for (int k = 0; k < orbit.image_count; ++k) {
        const double a = 2.0 * std::numbers::pi * k / orbit.image_count;
        const Vec3 eye(scene_center.x() + orbit.trajectory_radius * std::cos(a), orbit.camera_altitude,
                       scene_center.z() + orbit.trajectory_radius * std::sin(a));
        CameraView v = intrinsics.apply(CameraView::from_center(look_at_rotation(eye, target), eye));
        v.elevation_index = orbit.elevation_index;
        views.push_back(v);
    }
    return views;
}

} // namespace dragon
