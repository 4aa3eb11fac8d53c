// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/sfm/geometry.hpp"

#include "reprojection.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace dragon {

namespace {

// Direct linear transform on normalized coordinates, projected onto SE(3).
bool pnp_dlt(const std::vector<Vec3>& X, const std::vector<Vec2>& x, RigidPose& out) {
    const std::size_t n = X.size();
    Vec3 mean = Vec3::Zero();
    for (const auto& p : X) mean += p;
    mean /= static_cast<double>(n);
    double spread = 0.0;
    for (const auto& p : X) spread += (p - mean).norm();
    spread /= static_cast<double>(n);
    if (!(spread > 0.0)) return false;
    const double s = 1.0 / spread;

    Eigen::MatrixXd A(2 * n, 12);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector4d h((X[i] - mean).x() * s, (X[i] - mean).y() * s, (X[i] - mean).z() * s, 1.0);
        A.row(2 * i) << h.transpose(), Eigen::RowVector4d::Zero(), -x[i].x() * h.transpose();
        A.row(2 * i + 1) << Eigen::RowVector4d::Zero(), h.transpose(), -x[i].y() * h.transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const Eigen::VectorXd p = svd.matrixV().col(11);
    Eigen::Matrix<double, 3, 4> P;
    P << p(0), p(1), p(2), p(3), p(4), p(5), p(6), p(7), p(8), p(9), p(10), p(11);
    Mat3 M = P.leftCols<3>();
    Vec3 tt = P.col(3);
    if (M.determinant() < 0) {
        M = -M;
        tt = -tt;
    }
    Eigen::JacobiSVD<Mat3> ms(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double scale = ms.singularValues().mean();
    if (!(scale > 0.0)) return false;
    const Mat3 R = ms.matrixU() * ms.matrixV().transpose();
    if (R.determinant() < 0) return false;
    // Undo the point normalization: x_cam ~ R s (X - mean) + tt/scale.
    out.R = R;
    out.t = (tt / scale) / s - R * mean;
    return out.R.allFinite() && out.t.allFinite();
}

} // namespace

RigidPose refine_pose(const CameraView& k, const RigidPose& initial, const std::vector<Vec3>& points,
                      const std::vector<Vec2>& pixels) {
    double pose[6];
    detail::pose_to_params(initial.R, initial.t, pose);
    std::vector<Vec3> pts = points;
    ceres::Problem problem;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        problem.AddResidualBlock(detail::ReprojectionCost::create(k, pixels[i]), nullptr, pose, pts[i].data());
        problem.SetParameterBlockConstant(pts[i].data());
    }
    if (pts.empty()) return initial;
    ceres::Solver::Options opts;
    opts.linear_solver_type = ceres::DENSE_QR;
    opts.max_num_iterations = 50;
    opts.function_tolerance = 1e-10;
    opts.num_threads = 1;
    ceres::Solver::Summary summary;
    ceres::Solve(opts, &problem, &summary);
    RigidPose out;
    detail::params_to_pose(pose, out.R, out.t);
    if (!out.R.allFinite() || !out.t.allFinite() || summary.final_cost > summary.initial_cost) return initial;
    return out;
}

PnpResult estimate_pose_ransac(const CameraView& k, const std::vector<Vec3>& X, const std::vector<Vec2>& px,
                               const RansacConfig& config, std::mt19937_64& rng) {
    PnpResult best;
    const std::size_t n = X.size();
    constexpr int kSample = 6;
    if (n < static_cast<std::size_t>(kSample)) return best;
    std::vector<Vec2> xn(n);
    for (std::size_t i = 0; i < n; ++i) xn[i] = normalize_pixel(k, px[i]);

    auto inliers_of = [&](const RigidPose& pose) {
        const CameraView v = with_pose(k, pose);
        std::vector<int> in;
        for (std::size_t i = 0; i < n; ++i)
            if (reprojection_error(v, X[i], px[i]) <= config.threshold) in.push_back(static_cast<int>(i));
        return in;
    };

    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    int needed = config.max_iterations;
    for (int it = 0; it < needed; ++it) {
        std::vector<int> idx;
        while (static_cast<int>(idx.size()) < kSample) {
            const int i = static_cast<int>(dist(rng));
            if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
        }
        std::vector<Vec3> sX;
        std::vector<Vec2> sx;
        for (int i : idx) {
            sX.push_back(X[i]);
            sx.push_back(xn[i]);
        }
        RigidPose pose;
        if (!pnp_dlt(sX, sx, pose)) continue;
        auto in = inliers_of(pose);
        if (in.size() > best.inliers.size()) {
            best.ok = true;
            best.pose = pose;
            best.inliers = std::move(in);
            const double w = std::pow(static_cast<double>(best.inliers.size()) / n, kSample);
            if (w >= 1.0) needed = 0;
            else if (w > 0.0)
                needed = static_cast<int>(std::min<double>(
                    config.max_iterations, std::ceil(std::log(1.0 - config.confidence) / std::log(1.0 - w))));
        }
    }
    for (int round = 0; best.ok && best.inliers.size() >= static_cast<std::size_t>(kSample) && round < 3;
         ++round) {
        std::vector<Vec3> iX;
        std::vector<Vec2> ix;
        for (int i : best.inliers) {
            iX.push_back(X[i]);
            ix.push_back(px[i]);
        }
        const RigidPose refined = refine_pose(k, best.pose, iX, ix);
        auto in = inliers_of(refined);
        if (in.size() < best.inliers.size()) break;
        const bool same = in == best.inliers;
        best.pose = refined;
        best.inliers = std::move(in);
        if (same) break;
    }
    return best;
}

} // namespace dragon
