// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/sfm/alignment.hpp"

#include "dragon/core/error.hpp"

#include <Eigen/SVD>
#include <json.hpp>

#include <cmath>
#include <numbers>

namespace dragon {

CameraView Similarity::apply(const CameraView& v) const {
    CameraView out = v;
    // x_cam = R_c x + t_c and x = R^T (y - t) / s give R_c' = R_c R^T, center' = apply(center).
    out.rotation_w2c = v.rotation_w2c * R.transpose();
    const Vec3 c = apply(v.center());
    out.translation_w2c = -out.rotation_w2c * c;
    return out;
}

Similarity align_points(const std::vector<Vec3>& x, const std::vector<Vec3>& y) {
    if (x.size() != y.size()) throw ShapeMismatch("align_points: point counts differ");
    const std::size_t n = x.size();
    if (n < 3) throw DegenerateConfiguration("align_points: need at least 3 pairs");
    Vec3 mx = Vec3::Zero(), my = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    Mat3 cov = Mat3::Zero();
    double var_x = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (y[i] - my) * (x[i] - mx).transpose();
        var_x += (x[i] - mx).squaredNorm();
    }
    cov /= static_cast<double>(n);
    var_x /= static_cast<double>(n);
    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    // Collinear sources leave a rank <= 1 cross-covariance.
    if (!(var_x > 0.0) || sv(1) <= 1e-12 * std::max(1.0, sv(0)))
        throw DegenerateConfiguration("align_points: collinear or coincident points");
    Mat3 S = Mat3::Identity();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) S(2, 2) = -1;
    Similarity out;
    out.R = svd.matrixU() * S * svd.matrixV().transpose();
    out.scale = (sv.asDiagonal() * S).trace() / var_x;
    out.t = my - out.scale * out.R * mx;
    return out;
}

Similarity align_similarity(const std::vector<CameraView>& est, const std::vector<CameraView>& gt) {
    if (est.size() != gt.size()) throw ShapeMismatch("align_similarity: pose counts differ");
    std::vector<Vec3> a, b;
    for (std::size_t i = 0; i < est.size(); ++i) {
        a.push_back(est[i].center());
        b.push_back(gt[i].center());
    }
    return align_points(a, b);
}

double rotation_angle_deg(const Mat3& a, const Mat3& b) {
    const Mat3 d = a * b.transpose();
    const double c = std::clamp(0.5 * (d.trace() - 1.0), -1.0, 1.0);
    // acos loses precision near 0; use atan2 of the skew part.
    const Vec3 w(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
    return std::atan2(0.5 * w.norm(), c) * 180.0 / std::numbers::pi;
}

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = sd = 0.0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    for (double x : v) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / static_cast<double>(v.size()));
}

} // namespace

RegistrationReport registration_errors(const SparseMap& map, const std::vector<CameraView>& truth) {
    if (truth.size() != map.views.size()) throw ShapeMismatch("registration_errors: ground truth count differs");
    RegistrationReport r;
    r.total = static_cast<int>(truth.size());
    std::vector<CameraView> est, gt;
    for (int i = 0; i < r.total; ++i) {
        if (!map.views[i]) continue;
        r.registered_indices.push_back(i);
        est.push_back(*map.views[i]);
        gt.push_back(truth[i]);
    }
    r.registered = static_cast<int>(est.size());
    r.matched_fraction = r.total ? static_cast<double>(r.registered) / r.total : 0.0;
    if (r.registered < 3) return r;
    r.alignment = align_similarity(est, gt);
    r.aligned = true;
    for (std::size_t k = 0; k < est.size(); ++k) {
        const CameraView a = r.alignment.apply(est[k]);
        r.rotation_error_deg.push_back(rotation_angle_deg(a.rotation_w2c, gt[k].rotation_w2c));
        r.position_error.push_back((a.center() - gt[k].center()).norm());
    }
    mean_std(r.rotation_error_deg, r.rotation_mean, r.rotation_std);
    mean_std(r.position_error, r.position_mean, r.position_std);
    return r;
}

std::string registration_report_json(const RegistrationReport& r, const std::vector<std::string>& names) {
    nlohmann::ordered_json j;
    j["total"] = r.total;
    j["registered"] = r.registered;
    j["matched_fraction"] = r.matched_fraction;
    j["aligned"] = r.aligned;
    j["rotation_error_deg"] = {{"mean", r.rotation_mean}, {"std", r.rotation_std}};
    j["position_error_m"] = {{"mean", r.position_mean}, {"std", r.position_std}};
    auto per = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < r.registered_indices.size(); ++k) {
        const int i = r.registered_indices[k];
        nlohmann::ordered_json e;
        e["image"] = i < static_cast<int>(names.size()) ? names[i] : std::to_string(i);
        if (r.aligned) {
            e["rotation_error_deg"] = r.rotation_error_deg[k];
            e["position_error_m"] = r.position_error[k];
        }
        per.push_back(e);
    }
    j["images"] = per;
    return j.dump(2) + "\n";
}

} // namespace dragon
