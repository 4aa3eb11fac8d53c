// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/scene/scene.hpp"

#include <random>
#include <vector>

namespace dragon {

/// Rigid transform x_cam = R x + t.
struct RigidPose {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();
};

/// Normalized image coordinates (K^-1 applied) of a continuous pixel.
Vec2 normalize_pixel(const CameraView& intrinsics, const Vec2& pixel);

/// Essential matrix from >= 8 normalized correspondences (x2^T E x1 = 0) by
/// the Hartley-normalized eight-point method, projected to singular values (1,1,0).
Mat3 essential_eight_point(const std::vector<Vec2>& x1, const std::vector<Vec2>& x2);

/// First-order geometric (Sampson) distance of one correspondence, squared.
double sampson_error_sq(const Mat3& E, const Vec2& x1, const Vec2& x2);

struct RansacConfig {
    double threshold = 2.0;   // pixels
    double confidence = 0.999;
    int max_iterations = 10000;
};

struct EssentialResult {
    bool ok = false;
    Mat3 E = Mat3::Zero();
    std::vector<int> inliers; // ascending
};

/// `pixel_scale` converts the pixel threshold to normalized units (usually the focal length).
EssentialResult estimate_essential_ransac(const std::vector<Vec2>& x1, const std::vector<Vec2>& x2,
                                          double pixel_scale, const RansacConfig& config,
                                          std::mt19937_64& rng);

/// Decomposes E into the relative pose of camera 2 w.r.t. camera 1 (unit
/// translation) choosing the candidate with most points in front of both.
RigidPose decompose_essential(const Mat3& E, const std::vector<Vec2>& x1, const std::vector<Vec2>& x2,
                              int* in_front = nullptr);

/// Number of correspondences explained by a homography within the threshold.
int count_homography_inliers(const std::vector<Vec2>& x1, const std::vector<Vec2>& x2, double pixel_scale,
                             const RansacConfig& config, std::mt19937_64& rng);

/// Linear multi-view triangulation from normalized observations.
Vec3 triangulate(const std::vector<RigidPose>& poses, const std::vector<Vec2>& normalized);

/// Angle in degrees between the rays from two camera centers to a point.
double triangulation_angle_deg(const Vec3& c1, const Vec3& c2, const Vec3& point);

/// Pixel reprojection error; infinity when the point is behind the camera.
double reprojection_error(const CameraView& view, const Vec3& point, const Vec2& pixel);

struct PnpResult {
    bool ok = false;
    RigidPose pose;
    std::vector<int> inliers;
};

/// Camera pose from 2D-3D correspondences: six-point DLT inside RANSAC,
/// then nonlinear refinement on the inliers.
PnpResult estimate_pose_ransac(const CameraView& intrinsics, const std::vector<Vec3>& points,
                               const std::vector<Vec2>& pixels, const RansacConfig& config,
                               std::mt19937_64& rng);

/// Minimizes pixel reprojection error over the pose only.
RigidPose refine_pose(const CameraView& intrinsics, const RigidPose& initial, const std::vector<Vec3>& points,
                      const std::vector<Vec2>& pixels);

CameraView with_pose(CameraView intrinsics, const RigidPose& pose);
RigidPose pose_of(const CameraView& view);

} // namespace dragon
