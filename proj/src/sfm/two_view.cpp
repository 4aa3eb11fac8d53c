// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/sfm/geometry.hpp"

#include "dragon/core/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace dragon {

namespace {

// Similarity taking the points to zero mean and mean distance sqrt(2).
Mat3 hartley_transform(const std::vector<Vec2>& x) {
    Vec2 mean = Vec2::Zero();
    for (const auto& p : x) mean += p;
    mean /= static_cast<double>(x.size());
    double dist = 0.0;
    for (const auto& p : x) dist += (p - mean).norm();
    dist /= static_cast<double>(x.size());
    const double s = dist > 0.0 ? std::sqrt(2.0) / dist : 1.0;
    Mat3 T;
    T << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
    return T;
}

Vec3 hom(const Vec2& p) { return {p.x(), p.y(), 1.0}; }

int ransac_iterations(double inlier_ratio, int sample_size, const RansacConfig& config) {
    if (inlier_ratio <= 0.0) return config.max_iterations;
    const double w = std::pow(inlier_ratio, sample_size);
    if (w >= 1.0) return 1;
    const double n = std::log(1.0 - config.confidence) / std::log(1.0 - w);
    return static_cast<int>(std::min<double>(config.max_iterations, std::ceil(n)));
}

std::vector<int> sample_indices(std::size_t n, int k, std::mt19937_64& rng) {
    std::vector<int> out;
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    while (static_cast<int>(out.size()) < k) {
        const int idx = static_cast<int>(dist(rng));
        if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
    }
    return out;
}

Mat3 homography_dlt(const std::vector<Vec2>& x1, const std::vector<Vec2>& x2) {
    const Mat3 T1 = hartley_transform(x1), T2 = hartley_transform(x2);
    Eigen::MatrixXd A(2 * x1.size(), 9);
    for (std::size_t i = 0; i < x1.size(); ++i) {
        const Vec3 a = T1 * hom(x1[i]);
        const Vec3 b = T2 * hom(x2[i]);
        A.row(2 * i) << 0, 0, 0, -a.x(), -a.y(), -1, b.y() * a.x(), b.y() * a.y(), b.y();
        A.row(2 * i + 1) << a.x(), a.y(), 1, 0, 0, 0, -b.x() * a.x(), -b.x() * a.y(), -b.x();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Mat3 Hn;
    Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    return T2.inverse() * Hn * T1;
}

} // namespace

Vec2 normalize_pixel(const CameraView& v, const Vec2& p) {
    return {(p.x() - v.cx) / v.fx, (p.y() - v.cy) / v.fy};
}

Mat3 essential_eight_point(const std::vector<Vec2>& x1, const std::vector<Vec2>& x2) {
    if (x1.size() != x2.size() || x1.size() < 8)
        throw InvalidInput("essential_eight_point: need >= 8 paired points");
    const Mat3 T1 = hartley_transform(x1), T2 = hartley_transform(x2);
    Eigen::MatrixXd A(x1.size(), 9);
    for (std::size_t i = 0; i < x1.size(); ++i) {
        const Vec3 a = T1 * hom(x1[i]);
        const Vec3 b = T2 * hom(x2[i]);
        A.row(static_cast<Eigen::Index>(i)) << b.x() * a.x(), b.x() * a.y(), b.x(), b.y() * a.x(), b.y() * a.y(),
            b.y(), a.x(), a.y(), 1.0;
    }
    // Null vector via the 9x9 normal matrix; cheap and well conditioned after normalization.
    const Eigen::Matrix<double, 9, 9> AtA = A.transpose() * A;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(AtA);
    const Eigen::Matrix<double, 9, 1> e = eig.eigenvectors().col(0);
    Mat3 En;
    En << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
    Mat3 E = T2.transpose() * En * T1;
    Eigen::JacobiSVD<Mat3> s2(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    E = s2.matrixU() * Vec3(1, 1, 0).asDiagonal() * s2.matrixV().transpose();
    return E;
}

double sampson_error_sq(const Mat3& E, const Vec2& x1, const Vec2& x2) {
    const Vec3 a = hom(x1), b = hom(x2);
    const Vec3 Ea = E * a, Etb = E.transpose() * b;
    const double num = b.dot(Ea);
    const double den = Ea.x() * Ea.x() + Ea.y() * Ea.y() + Etb.x() * Etb.x() + Etb.y() * Etb.y();
    if (den <= 0.0) return std::numeric_limits<double>::infinity();
    return num * num / den;
}

namespace {

// Relative-pose candidates of E and, for the one with most points in front
// of both cameras, the indices (into `subset`) that satisfy cheirality.
RigidPose best_decomposition(const Mat3& E, const std::vector<Vec2>& x1, const std::vector<Vec2>& x2,
                             const std::vector<int>& subset, std::vector<int>& in_front) {
    Eigen::JacobiSVD<Mat3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 U = svd.matrixU(), V = svd.matrixV();
    if (U.determinant() < 0) U = -U;
    if (V.determinant() < 0) V = -V;
    Mat3 W;
    W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    const Mat3 Ra = U * W * V.transpose();
    const Mat3 Rb = U * W.transpose() * V.transpose();
    const Vec3 u3 = U.col(2);
    const RigidPose candidates[4] = {{Ra, u3}, {Ra, -u3}, {Rb, u3}, {Rb, -u3}};
    const RigidPose identity;
    RigidPose best;
    in_front.clear();
    bool first = true;
    for (const auto& cand : candidates) {
        std::vector<int> ok;
        for (int i : subset) {
            const Vec3 X = triangulate({identity, cand}, {x1[i], x2[i]});
            if (X.allFinite() && X.z() > 0.0 && (cand.R * X + cand.t).z() > 0.0) ok.push_back(i);
        }
        if (first || ok.size() > in_front.size()) {
            first = false;
            best = cand;
            in_front = std::move(ok);
        }
    }
    return best;
}

} // namespace

EssentialResult estimate_essential_ransac(const std::vector<Vec2>& x1, const std::vector<Vec2>& x2,
                                          double pixel_scale, const RansacConfig& config,
                                          std::mt19937_64& rng) {
    EssentialResult best;
    const std::size_t n = x1.size();
    if (n < 8 || x2.size() != n) return best;
    const double thr = config.threshold / pixel_scale;
    const double thr_sq = thr * thr;
    auto sampson_inliers = [&](const Mat3& E) {
        std::vector<int> in;
        for (std::size_t i = 0; i < n; ++i)
            if (sampson_error_sq(E, x1[i], x2[i]) <= thr_sq) in.push_back(static_cast<int>(i));
        return in;
    };
    // Support = epipolar inliers that also triangulate in front of both cameras;
    // plain epipolar support admits epipole-in-image models on small images.
    auto support = [&](const Mat3& E, std::size_t at_least) {
        auto in = sampson_inliers(E);
        std::vector<int> front;
        if (in.size() < at_least) return front;
        best_decomposition(E, x1, x2, in, front);
        return front;
    };
    constexpr int kMinIterations = 200;
    int needed = std::min(config.max_iterations, kMinIterations);
    for (int it = 0; it < needed; ++it) {
        const auto idx = sample_indices(n, 8, rng);
        std::vector<Vec2> a, b;
        for (int i : idx) {
            a.push_back(x1[i]);
            b.push_back(x2[i]);
        }
        const Mat3 E = essential_eight_point(a, b);
        if (!E.allFinite()) continue;
        auto in = support(E, best.inliers.size() + 1);
        if (in.size() > best.inliers.size()) {
            best.E = E;
            best.inliers = std::move(in);
            best.ok = true;
            needed = std::max(std::min(config.max_iterations, kMinIterations),
                              ransac_iterations(static_cast<double>(best.inliers.size()) / n, 8, config));
        }
    }
    // Least-squares polish on the consensus set; kept only if it does not lose support.
    for (int round = 0; best.ok && best.inliers.size() >= 8 && round < 3; ++round) {
        std::vector<Vec2> a, b;
        for (int i : best.inliers) {
            a.push_back(x1[i]);
            b.push_back(x2[i]);
        }
        const Mat3 E = essential_eight_point(a, b);
        if (!E.allFinite()) break;
        auto in = support(E, best.inliers.size());
        if (in.size() < best.inliers.size()) break;
        const bool same = in == best.inliers;
        best.E = E;
        best.inliers = std::move(in);
        if (same) break;
    }
    return best;
}

RigidPose decompose_essential(const Mat3& E, const std::vector<Vec2>& x1, const std::vector<Vec2>& x2,
                              int* in_front) {
    std::vector<int> all(x1.size()), front;
    std::iota(all.begin(), all.end(), 0);
    const RigidPose pose = best_decomposition(E, x1, x2, all, front);
    if (in_front) *in_front = static_cast<int>(front.size());
    return pose;
}

int count_homography_inliers(const std::vector<Vec2>& x1, const std::vector<Vec2>& x2, double pixel_scale,
                             const RansacConfig& config, std::mt19937_64& rng) {
    const std::size_t n = x1.size();
    if (n < 4) return 0;
    const double thr = config.threshold / pixel_scale;
    std::size_t best = 0;
    int needed = config.max_iterations;
    for (int it = 0; it < needed; ++it) {
        const auto idx = sample_indices(n, 4, rng);
        std::vector<Vec2> a, b;
        for (int i : idx) {
            a.push_back(x1[i]);
            b.push_back(x2[i]);
        }
        const Mat3 H = homography_dlt(a, b);
        if (!H.allFinite()) continue;
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 p = H * hom(x1[i]);
            if (p.z() == 0.0) continue;
            if ((p.head<2>() / p.z() - x2[i]).norm() <= thr) ++count;
        }
        if (count > best) {
            best = count;
            needed = ransac_iterations(static_cast<double>(best) / n, 4, config);
        }
    }
    return static_cast<int>(best);
}

Vec3 triangulate(const std::vector<RigidPose>& poses, const std::vector<Vec2>& x) {
    Eigen::MatrixXd A(2 * poses.size(), 4);
    for (std::size_t i = 0; i < poses.size(); ++i) {
        Eigen::Matrix<double, 3, 4> P;
        P.leftCols<3>() = poses[i].R;
        P.col(3) = poses[i].t;
        A.row(2 * i) = x[i].x() * P.row(2) - P.row(0);
        A.row(2 * i + 1) = x[i].y() * P.row(2) - P.row(1);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const Eigen::Vector4d h = svd.matrixV().col(3);
    if (h(3) == 0.0) return Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
    return h.head<3>() / h(3);
}

double triangulation_angle_deg(const Vec3& c1, const Vec3& c2, const Vec3& p) {
    const Vec3 a = (p - c1).normalized(), b = (p - c2).normalized();
    return std::atan2(a.cross(b).norm(), a.dot(b)) * 180.0 / std::numbers::pi;
}

double reprojection_error(const CameraView& view, const Vec3& point, const Vec2& pixel) {
    const Vec3 c = view.to_camera(point);
    if (!(c.z() > 1e-12)) return std::numeric_limits<double>::infinity();
    return (view.project(c) - pixel).norm();
}

CameraView with_pose(CameraView v, const RigidPose& pose) {
    v.rotation_w2c = pose.R;
    v.translation_w2c = pose.t;
    return v;
}

RigidPose pose_of(const CameraView& v) { return {v.rotation_w2c, v.translation_w2c}; }

} // namespace dragon
