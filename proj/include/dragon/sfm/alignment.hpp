// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/sfm/sparse_map.hpp"

#include <string>
#include <vector>

namespace dragon {

/// y = scale * R * x + t
struct Similarity {
    double scale = 1.0;
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    [[nodiscard]] Vec3 apply(const Vec3& x) const { return scale * (R * x) + t; }
    /// Moves a camera into the target frame (same image, same intrinsics).
    [[nodiscard]] CameraView apply(const CameraView& v) const;
};

/// Closed-form least-squares similarity between paired point sets (Umeyama).
/// Throws DegenerateConfiguration for fewer than 3 pairs or collinear sources.
Similarity align_points(const std::vector<Vec3>& source, const std::vector<Vec3>& target);

/// Similarity taking estimated camera centers onto ground-truth centers.
Similarity align_similarity(const std::vector<CameraView>& estimated, const std::vector<CameraView>& truth);

/// Geodesic angle in degrees between two rotations.
double rotation_angle_deg(const Mat3& a, const Mat3& b);

struct RegistrationReport {
    int total = 0;
    int registered = 0;
    double matched_fraction = 0;
    std::vector<int> registered_indices;
    std::vector<double> rotation_error_deg; // parallel to registered_indices
    std::vector<double> position_error;     // meters, ground-truth scale
    double rotation_mean = 0, rotation_std = 0;
    double position_mean = 0, position_std = 0;
    bool aligned = false; // false when too few registrations for a similarity
    Similarity alignment;
};

/// Aligns registered cameras to ground truth and reports per-image errors.
/// With fewer than 3 registered views only the matched fraction is filled.
RegistrationReport registration_errors(const SparseMap& map, const std::vector<CameraView>& truth);

std::string registration_report_json(const RegistrationReport& report, const std::vector<std::string>& names);

} // namespace dragon
