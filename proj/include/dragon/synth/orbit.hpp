// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/scene/scene.hpp"

#include <vector>

namespace dragon {

/// Intrinsics shared by every camera of a dataset.
struct Intrinsics {
    int width = 192;
    int height = 128;
    double fx = 240.0;
    double fy = 240.0;
    double cx = 96.0;
    double cy = 64.0;

    void validate() const;
    [[nodiscard]] CameraView apply(CameraView view) const;
};

/// A ring of cameras at one altitude aimed at a point on the vertical axis.
/// Altitudes are heights above the ground plane y = 0 (world is y-up).
struct OrbitSpec {
    double camera_altitude = 0.0;
    double trajectory_radius = 1.0;
    double target_altitude = 0.0;
    int image_count = 24;
    int elevation_index = 0;

    void validate() const;
};

/// World-to-camera rotation of a camera at `eye` looking at `target` with
/// world up projected into the image as "up" (camera y points down).
/// Falls back to +z as the up hint when the view is vertical. Throws
/// DegenerateConfiguration when eye == target.
Mat3 look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitY());

/// Camera k sits at azimuth 2*pi*k/image_count, at
/// center + (r cos a, altitude, r sin a) with center.y ignored.
std::vector<CameraView> generate_orbit_poses(const OrbitSpec& orbit, const Vec3& scene_center,
                                             const Intrinsics& intrinsics = {});

} // namespace dragon
