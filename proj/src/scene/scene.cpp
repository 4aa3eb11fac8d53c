// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/scene/scene.hpp"

#include "dragon/core/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <numeric>

namespace dragon {

Mat3 quaternion_to_matrix(const Vec4& q_raw) {
    const Vec4 q = q_raw.normalized();
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

Vec4 matrix_to_quaternion(const Mat3& R) {
    const Eigen::Quaterniond q(R);
    Vec4 out(q.w(), q.x(), q.y(), q.z());
    if (out[0] < 0) out = -out;
    return out.normalized();
}

void CameraView::validate(double tolerance) const {
    if (width <= 0 || height <= 0) throw InvalidInput("camera image size must be positive");
    const Mat3 gram = rotation_w2c * rotation_w2c.transpose();
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tolerance)
        throw InvalidInput("camera rotation is not orthonormal");
    if (std::abs(rotation_w2c.determinant() - 1.0) > tolerance)
        throw InvalidInput("camera rotation must have determinant +1");
}

CameraView CameraView::from_center(const Mat3& rotation_w2c, const Vec3& center) {
    CameraView view;
    view.rotation_w2c = rotation_w2c;
    view.translation_w2c = -rotation_w2c * center;
    return view;
}

Mat3 covariance_of(const GaussianSplat& splat) {
    const Mat3 R = quaternion_to_matrix(splat.rotation);
    const Mat3 M = R * splat.scale().asDiagonal();
    const Mat3 cov = M * M.transpose();
    // Symmetrize so the result is symmetric to the last bit.
    return 0.5 * (cov + cov.transpose());
}

double evaluate_density(const GaussianSplat& splat, const Vec3& x) {
    const double spread = splat.log_scale.maxCoeff() - splat.log_scale.minCoeff();
    // cond(Sigma) = exp(2 * spread); compare in log space.
    if (2.0 * spread > std::log(1e12) || !splat.log_scale.allFinite()) {
        throw DegenerateSplat("splat covariance is ill-conditioned (condition number > 1e12)");
    }
    const Mat3 R = quaternion_to_matrix(splat.rotation);
    const Vec3 local = R.transpose() * (x - splat.mean);
    const Vec3 whitened = local.cwiseQuotient(splat.scale());
    return std::exp(-0.5 * whitened.squaredNorm());
}

std::vector<double> mean_knn_distance(std::span<const Vec3> points, int k) {
    const std::size_t n = points.size();
    std::vector<double> result(n, 0.0);
    if (n < 2 || k <= 0) return result;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return points[a].x() < points[b].x() || (points[a].x() == points[b].x() && a < b);
    });

    const std::size_t kk = std::min<std::size_t>(k, n - 1);
    std::vector<double> best;
    best.reserve(kk + 1);
    for (std::size_t rank = 0; rank < n; ++rank) {
        const Vec3& p = points[order[rank]];
        best.clear();
        auto worst = [&] {
            return best.size() < kk ? std::numeric_limits<double>::infinity() : best.back();
        };
        auto offer = [&](std::size_t other_rank) {
            const double d2 = (points[order[other_rank]] - p).squaredNorm();
            if (d2 >= worst()) return;
            best.insert(std::upper_bound(best.begin(), best.end(), d2), d2);
            if (best.size() > kk) best.pop_back();
        };
        // Sweep outward along x; stop a side once its x gap exceeds the
        // current k-th best distance.
        std::size_t lo = rank, hi = rank;
        bool left = rank > 0, right = rank + 1 < n;
        while (left || right) {
            if (left) {
                --lo;
                const double dx = p.x() - points[order[lo]].x();
                if (dx * dx > worst()) left = false;
                else offer(lo);
                if (lo == 0) left = false;
            }
            if (right) {
                ++hi;
                const double dx = points[order[hi]].x() - p.x();
                if (dx * dx > worst()) right = false;
                else offer(hi);
                if (hi + 1 >= n) right = false;
            }
        }
        double sum = 0.0;
        for (double d2 : best) sum += std::sqrt(d2);
        result[order[rank]] = sum / static_cast<double>(best.size());
    }
    return result;
}

Scene init_scene_from_points(std::span<const ColoredPoint> points, const SceneInitConfig& config) {
    if (points.empty()) throw InvalidInput("init_scene_from_points: empty point list");
    if (config.sh_degree != 0 && config.sh_degree != 1)
        throw InvalidInput("sh_degree must be 0 or 1");

    std::vector<Vec3> positions;
    positions.reserve(points.size());
    for (const auto& p : points) positions.push_back(p.position);
    const std::vector<double> knn = mean_knn_distance(positions, 3);

    Scene scene;
    scene.background = config.background;
    scene.sh_degree = config.sh_degree;
    scene.splats.reserve(points.size());
    const double opacity_logit = logit(config.initial_opacity);
    for (std::size_t i = 0; i < points.size(); ++i) {
        GaussianSplat s;
        s.mean = points[i].position;
        const double scale = knn[i] > 0.0 ? knn[i] : config.fallback_scale;
        s.log_scale = Vec3::Constant(std::log(scale));
        s.opacity_logit = opacity_logit;
        s.color = points[i].rgb;
        scene.splats.push_back(s);
    }
    return scene;
}

} // namespace dragon
