// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/sfm/sparse_map.hpp"

#include "dragon/core/error.hpp"
#include "dragon/sfm/geometry.hpp"

#include "reprojection.hpp"

#include <array>
#include <cmath>

namespace dragon {

int SparseMap::registered_count() const {
    int n = 0;
    for (const auto& v : views) n += v.has_value();
    return n;
}

double SparseMap::matched_fraction() const {
    return views.empty() ? 0.0 : static_cast<double>(registered_count()) / static_cast<double>(views.size());
}

double SparseMap::mean_reprojection_error() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& p : points)
        for (const auto& o : p.track) {
            if (!views[o.image]) continue;
            sum += reprojection_error(*views[o.image], p.position, o.pixel);
            ++n;
        }
    return n ? sum / static_cast<double>(n) : 0.0;
}

std::vector<ColoredPoint> SparseMap::colored_points() const {
    std::vector<ColoredPoint> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back({p.position, p.rgb});
    return out;
}

void filter_map(SparseMap& map, double max_error, double min_angle_deg) {
    std::vector<MapPoint> kept;
    kept.reserve(map.points.size());
    for (auto& p : map.points) {
        std::vector<MapObservation> obs;
        for (const auto& o : p.track)
            if (map.views[o.image] && reprojection_error(*map.views[o.image], p.position, o.pixel) <= max_error)
                obs.push_back(o);
        if (obs.size() < 2) continue;
        double best = 0.0;
        for (std::size_t i = 0; i < obs.size() && best < min_angle_deg; ++i)
            for (std::size_t j = i + 1; j < obs.size(); ++j)
                best = std::max(best, triangulation_angle_deg(map.views[obs[i].image]->center(),
                                                              map.views[obs[j].image]->center(), p.position));
        if (best < min_angle_deg) continue;
        p.track = std::move(obs);
        kept.push_back(std::move(p));
    }
    map.points = std::move(kept);
}

BundleResult bundle_adjust(const SparseMap& map, const BundleConfig& config) {
    BundleResult result;
    result.map = map;
    if (config.max_iterations <= 0) return result;

    const std::size_t nv = map.views.size();
    std::vector<std::array<double, 6>> poses(nv);
    for (std::size_t i = 0; i < nv; ++i)
        if (map.views[i]) detail::pose_to_params(map.views[i]->rotation_w2c, map.views[i]->translation_w2c, poses[i].data());
    std::vector<Vec3> points(map.points.size());
    for (std::size_t k = 0; k < points.size(); ++k) points[k] = map.points[k].position;

    auto is_variable = [&](int i) {
        if (config.constant_views.count(i)) return false;
        return !config.variable_views || config.variable_views->count(i) > 0;
    };

    ceres::Problem problem;
    std::vector<bool> pose_added(nv, false);
    std::size_t residuals = 0;
    for (std::size_t k = 0; k < points.size(); ++k) {
        const auto& p = map.points[k];
        bool touches_variable = false;
        for (const auto& o : p.track)
            if (map.views[o.image] && is_variable(o.image)) touches_variable = true;
        if (!touches_variable) continue;
        for (const auto& o : p.track) {
            if (!map.views[o.image]) continue;
            problem.AddResidualBlock(detail::ReprojectionCost::create(*map.views[o.image], o.pixel), nullptr,
                                     poses[o.image].data(), points[k].data());
            pose_added[o.image] = true;
            ++residuals;
        }
        if (!config.optimize_points) problem.SetParameterBlockConstant(points[k].data());
    }
    if (residuals == 0) return result;
    for (std::size_t i = 0; i < nv; ++i)
        if (pose_added[i] && !is_variable(static_cast<int>(i))) problem.SetParameterBlockConstant(poses[i].data());

    ceres::Solver::Options opts;
    opts.linear_solver_type = ceres::SPARSE_SCHUR;
    opts.minimizer_type = ceres::TRUST_REGION;
    opts.trust_region_strategy_type = ceres::LEVENBERG_MARQUARDT;
    opts.max_num_iterations = config.max_iterations;
    opts.function_tolerance = config.function_tolerance;
    opts.num_threads = 1;
    opts.logging_type = ceres::SILENT;
    ceres::Solver::Summary summary;
    ceres::Solve(opts, &problem, &summary);

    result.initial_cost = summary.initial_cost;
    result.final_cost = summary.final_cost;
    result.iterations = static_cast<int>(summary.iterations.size()) - 1;
    result.converged = summary.termination_type == ceres::CONVERGENCE;
    if (summary.termination_type == ceres::FAILURE || !std::isfinite(summary.final_cost)) {
        result.converged = false;
        return result; // input map is the best known iterate
    }
    for (std::size_t i = 0; i < nv; ++i) {
        if (!map.views[i] || !pose_added[i]) continue;
        Mat3 R;
        Vec3 t;
        detail::params_to_pose(poses[i].data(), R, t);
        result.map.views[i]->rotation_w2c = R;
        result.map.views[i]->translation_w2c = t;
    }
    for (std::size_t k = 0; k < points.size(); ++k) result.map.points[k].position = points[k];
    return result;
}

} // namespace dragon
