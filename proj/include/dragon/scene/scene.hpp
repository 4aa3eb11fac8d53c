// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include <array>
#include <cmath>
#include <filesystem>
#include <span>
#include <vector>

namespace dragon {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Rotation matrix of the quaternion (w, x, y, z). The quaternion is
/// normalized first, so any non-zero 4-vector is accepted.
Mat3 quaternion_to_matrix(const Vec4& q);

/// Unit quaternion (w, x, y, z) with w >= 0 for a rotation matrix.
Vec4 matrix_to_quaternion(const Mat3& R);

/// Number of extra color coefficients carried by degree-1 spherical harmonics
/// (three basis functions per RGB channel).
inline constexpr int kSh1Coefficients = 9;

/// One anisotropic 3D Gaussian. Scale lives in log space and opacity in logit
/// space so unconstrained updates keep both valid.
struct GaussianSplat {
    Vec3 mean = Vec3::Zero();
    Vec3 log_scale = Vec3::Zero();
    Vec4 rotation{1.0, 0.0, 0.0, 0.0}; // (w, x, y, z), unit norm
    double opacity_logit = 0.0;
    Vec3 color = Vec3::Zero();
    /// sh1[3 * k + channel] multiplies basis function k (ordering y, z, x).
    std::array<double, kSh1Coefficients> sh1{};

    [[nodiscard]] double opacity() const { return sigmoid(opacity_logit); }
    [[nodiscard]] Vec3 scale() const { return log_scale.array().exp(); }
};

struct Scene {
    std::vector<GaussianSplat> splats;
    Vec3 background = Vec3::Zero();
    int sh_degree = 0; // 0 or 1

    [[nodiscard]] std::size_t size() const { return splats.size(); }
};

/// Pinhole camera with a world-to-camera rigid transform. Camera axes follow
/// the x-right, y-down, z-forward convention; pixel (i, j) covers
/// [i, i+1) x [j, j+1) so its center sits at (i + 0.5, j + 0.5).
struct CameraView {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
    int width = 1, height = 1;
    Mat3 rotation_w2c = Mat3::Identity();
    Vec3 translation_w2c = Vec3::Zero();
    int elevation_index = 0;

    [[nodiscard]] Vec3 center() const { return -rotation_w2c.transpose() * translation_w2c; }
    [[nodiscard]] Vec3 to_camera(const Vec3& world) const {
        return rotation_w2c * world + translation_w2c;
    }
    /// Continuous pixel coordinates of a camera-frame point.
    [[nodiscard]] Vec2 project(const Vec3& cam) const {
        return {fx * cam.x() / cam.z() + cx, fy * cam.y() / cam.z() + cy};
    }
    /// Throws InvalidInput if the rotation is not a proper orthonormal matrix
    /// or the image size is not positive.
    void validate(double tolerance = 1e-9) const;

    static CameraView from_center(const Mat3& rotation_w2c, const Vec3& center);
};

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
Mat3 covariance_of(const GaussianSplat& splat);

/// Normalization-free Gaussian exp(-1/2 (x-mu)^T Sigma^-1 (x-mu)).
/// Throws DegenerateSplat when the covariance condition number exceeds 1e12.
double evaluate_density(const GaussianSplat& splat, const Vec3& x);

struct ColoredPoint {
    Vec3 position;
    Vec3 rgb;
};

struct SceneInitConfig {
    double fallback_scale = 0.1;   // meters, used when a point has no neighbors
    double initial_opacity = 0.1;
    int sh_degree = 0;
    Vec3 background = Vec3::Zero();
};

/// One isotropic splat per point, scaled by the mean distance to its (up to)
/// three nearest neighbors. Throws InvalidInput on an empty list.
Scene init_scene_from_points(std::span<const ColoredPoint> points,
                             const SceneInitConfig& config = {});

/// Mean distance from each point to its k nearest other points (fewer when
/// the set is smaller); entries with no neighbors are 0.
std::vector<double> mean_knn_distance(std::span<const Vec3> points, int k);

/// Versioned text scene format. Floats are written in shortest round-trip
/// form, so save/load is lossless at double precision.
void save_scene(const std::filesystem::path& path, const Scene& scene);
Scene load_scene(const std::filesystem::path& path);
std::string serialize_scene(const Scene& scene);
Scene deserialize_scene(const std::string& text);

} // namespace dragon
