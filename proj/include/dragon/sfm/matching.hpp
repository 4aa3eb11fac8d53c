// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/sfm/features.hpp"
#include "dragon/sfm/geometry.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace dragon {

struct MatchConfig {
    double ratio = 0.8;
    RansacConfig ransac{2.0, 0.999, 10000};
    int min_inliers = 15;        // fewer verified inliers leaves the pair unverified
    double planar_ratio = 0.9;   // homography support / essential support that flags a planar pair
};

struct TwoViewGeometry {
    RigidPose relative;          // camera b w.r.t. camera a, unit baseline
    int inliers = 0;
    int homography_inliers = 0;
    bool planar = false;
    double median_angle_deg = 0; // triangulation angle over inliers
};

struct PairMatch {
    int a = -1, b = -1;
    int putative = 0;                           // after ratio + mutual tests
    bool verified = false;
    std::vector<std::pair<int, int>> matches;   // one-to-one keypoint indices, inliers only when verified
    TwoViewGeometry geometry;
};

/// Mutual nearest neighbors passing the ratio test, by descriptor distance.
std::vector<std::pair<int, int>> match_descriptors(const FeatureSet& a, const FeatureSet& b, double ratio);

/// Ratio + mutual matching followed by essential-matrix RANSAC. Pairs with
/// fewer than 8 putative matches come back unverified, never as an error.
PairMatch match_pair(const FeatureSet& a, const FeatureSet& b, const CameraView& intr_a,
                     const CameraView& intr_b, const MatchConfig& config, std::uint64_t seed);

/// Exhaustive matching over all pairs i < j; verified pairs only, in (i, j) order.
struct MatchGraph {
    int image_count = 0;
    std::vector<PairMatch> pairs;
};

MatchGraph build_match_graph(const std::vector<FeatureSet>& features, const std::vector<CameraView>& intrinsics,
                             const MatchConfig& config, std::uint64_t seed);

/// Stable per-pair generator seed so results do not depend on scheduling.
std::uint64_t pair_seed(std::uint64_t seed, int a, int b);

} // namespace dragon
