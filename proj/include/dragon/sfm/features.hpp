// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/core/image.hpp"
#include "dragon/scene/scene.hpp"

#include <Eigen/Core>

#include <vector>

namespace dragon {

struct Keypoint {
    Vec2 pixel;        // continuous coordinates, pixel centers at i + 0.5
    double scale = 0;  // detector sigma in pixels
    double angle = 0;  // degrees
};

/// Keypoints and their 128-float descriptors; row i of `descriptors` has unit
/// L2 norm and belongs to keypoints[i].
struct FeatureSet {
    int width = 0, height = 0;
    std::vector<Keypoint> keypoints;
    Eigen::Matrix<float, Eigen::Dynamic, 128, Eigen::RowMajor> descriptors;
    std::vector<Vec3> colors; // image RGB at each keypoint

    [[nodiscard]] std::size_t size() const { return keypoints.size(); }
};

struct FeatureConfig {
    int max_features = 2000; // strongest responses kept, ties by position
    int min_size = 64;
    double contrast_threshold = 0.02; // DoG response floor, relative to unit intensity
};

/// Difference-of-Gaussians keypoints with 128-bin orientation-histogram
/// descriptors. Deterministic for identical input.
FeatureSet detect_features(const Image& image, const FeatureConfig& config = {});

} // namespace dragon
