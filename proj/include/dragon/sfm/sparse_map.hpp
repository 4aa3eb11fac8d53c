// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/core/image.hpp"
#include "dragon/sfm/matching.hpp"

#include <optional>
#include <set>
#include <vector>

namespace dragon {

struct MapObservation {
    int image = -1;
    int keypoint = -1;
    Vec2 pixel = Vec2::Zero();
};

struct MapPoint {
    Vec3 position = Vec3::Zero();
    Vec3 rgb = Vec3::Zero();
    std::vector<MapObservation> track; // at most one observation per image
};

/// Registered cameras (nullopt = not registered) and the triangulated cloud.
struct SparseMap {
    std::vector<std::optional<CameraView>> views;
    std::vector<MapPoint> points;
    bool degenerate = false;        // only planar-dominant seeds were available

    [[nodiscard]] int registered_count() const;
    [[nodiscard]] double matched_fraction() const;
    /// Mean pixel error over all observations of registered views (0 if none).
    [[nodiscard]] double mean_reprojection_error() const;
    [[nodiscard]] std::vector<ColoredPoint> colored_points() const;
};

struct BundleConfig {
    int max_iterations = 100;
    double function_tolerance = 1e-8; // relative cost decrease that stops the solver
    std::set<int> constant_views;     // poses held fixed
    std::optional<std::set<int>> variable_views; // when set, every other pose is fixed
    bool optimize_points = true;
};

struct BundleResult {
    SparseMap map;
    bool converged = true;
    double initial_cost = 0, final_cost = 0;
    int iterations = 0;
};

/// Levenberg-Marquardt on pixel reprojection error over registered poses and
/// points with intrinsics fixed. A zero iteration budget returns the input.
BundleResult bundle_adjust(const SparseMap& map, const BundleConfig& config = {});

struct RegistrationConfig {
    FeatureConfig features;
    MatchConfig matching;
    double pnp_threshold = 4.0;          // px
    int min_correspondences = 12;        // 2D-3D needed to try an image
    double min_triangulation_angle = 1.5; // degrees
    double max_reprojection_error = 4.0; // px, for kept observations
    int local_ba_interval = 5;
    int local_ba_window = 5;
    std::uint64_t seed = 0;
};

/// Incremental structure from motion with known intrinsics. `intrinsics`
/// supplies per-image camera intrinsics; its poses are ignored.
SparseMap register_incremental(const std::vector<Image>& images, const std::vector<CameraView>& intrinsics,
                               const RegistrationConfig& config = {});

/// Same, from precomputed features and matches.
SparseMap register_from_matches(const std::vector<FeatureSet>& features, const std::vector<CameraView>& intrinsics,
                                const MatchGraph& graph, const RegistrationConfig& config = {});

/// Drops observations above the error bound, then points with fewer than two
/// observations or a maximum pairwise ray angle below the bound.
void filter_map(SparseMap& map, double max_error, double min_angle_deg);

} // namespace dragon
