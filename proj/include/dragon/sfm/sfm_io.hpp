// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/scene/scene.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dragon {

/// One line of a poses file:
///   name qw qx qy qz cx cy cz elevation
/// where q is the world-to-camera rotation and c the camera center in meters.
struct PoseRecord {
    std::string name;
    Mat3 rotation_w2c = Mat3::Identity();
    Vec3 center = Vec3::Zero();
    int elevation_index = 0;

    /// Pose with the given intrinsics attached.
    [[nodiscard]] CameraView view(const CameraView& intrinsics) const;
    static PoseRecord from_view(const std::string& name, const CameraView& view);
};

std::string format_poses(const std::vector<PoseRecord>& records);
std::vector<PoseRecord> parse_poses(const std::string& text);
void write_poses(const std::filesystem::path& path, const std::vector<PoseRecord>& records);
std::vector<PoseRecord> read_poses(const std::filesystem::path& path);

/// ASCII PLY with float64 xyz and uchar RGB.
void write_ply(const std::filesystem::path& path, const std::vector<ColoredPoint>& points);
std::vector<ColoredPoint> read_ply(const std::filesystem::path& path);

} // namespace dragon
