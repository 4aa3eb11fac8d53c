// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/scene/scene.hpp"

#include <ceres/ceres.h>
#include <ceres/rotation.h>

namespace dragon::detail {

// Pixel residual of a pinhole camera; pose = (angle-axis, translation).
struct ReprojectionCost {
    double fx, fy, cx, cy, u, v;

    template <typename T>
    bool operator()(const T* pose, const T* point, T* residual) const {
        T p[3];
        ceres::AngleAxisRotatePoint(pose, point, p);
        p[0] += pose[3];
        p[1] += pose[4];
        p[2] += pose[5];
        residual[0] = T(fx) * p[0] / p[2] + T(cx) - T(u);
        residual[1] = T(fy) * p[1] / p[2] + T(cy) - T(v);
        return true;
    }

    static ceres::CostFunction* create(const CameraView& k, const Vec2& pixel) {
        return new ceres::AutoDiffCostFunction<ReprojectionCost, 2, 6, 3>(
            new ReprojectionCost{k.fx, k.fy, k.cx, k.cy, pixel.x(), pixel.y()});
    }
};

inline void pose_to_params(const Mat3& R, const Vec3& t, double* out) {
    ceres::RotationMatrixToAngleAxis(ceres::ColumnMajorAdapter3x3(R.data()), out);
    out[3] = t.x();
    out[4] = t.y();
    out[5] = t.z();
}

inline void params_to_pose(const double* p, Mat3& R, Vec3& t) {
    ceres::AngleAxisToRotationMatrix(p, ceres::ColumnMajorAdapter3x3(R.data()));
    t = Vec3(p[3], p[4], p[5]);
}

} // namespace dragon::detail
