// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/sfm/features.hpp"

#include "dragon/core/error.hpp"

#include <opencv2/core.hpp>
#include <opencv2/features2d.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dragon {

FeatureSet detect_features(const Image& image, const FeatureConfig& config) {
    if (image.width < config.min_size || image.height < config.min_size)
        throw InvalidInput("detect_features: image must be at least " + std::to_string(config.min_size) +
                           " pixels on each side");
    cv::Mat gray(image.height, image.width, CV_8UC1);
    const auto g = to_gray(image);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const double v = std::clamp(g[static_cast<std::size_t>(y) * image.width + x], 0.0, 1.0);
            gray.at<unsigned char>(y, x) = static_cast<unsigned char>(std::lrint(v * 255.0));
        }

    std::vector<cv::KeyPoint> kps;
    cv::Mat desc;
    {
        // The detector keeps internal buffers; one instance per call keeps it reentrant.
        auto sift = cv::SIFT::create(0, 3, config.contrast_threshold);
        sift->detectAndCompute(gray, cv::noArray(), kps, desc);
    }

    std::vector<int> order(kps.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (kps[a].response != kps[b].response) return kps[a].response > kps[b].response;
        if (kps[a].pt.y != kps[b].pt.y) return kps[a].pt.y < kps[b].pt.y;
        return kps[a].pt.x < kps[b].pt.x;
    });
    if (static_cast<int>(order.size()) > config.max_features) order.resize(config.max_features);

    FeatureSet out;
    out.width = image.width;
    out.height = image.height;
    out.descriptors.resize(static_cast<Eigen::Index>(order.size()), 128);
    Eigen::Index row = 0;
    for (int idx : order) {
        const auto& k = kps[idx];
        Keypoint kp;
        kp.pixel = Vec2(std::clamp(static_cast<double>(k.pt.x) + 0.5, 0.0, static_cast<double>(image.width)),
                        std::clamp(static_cast<double>(k.pt.y) + 0.5, 0.0, static_cast<double>(image.height)));
        kp.scale = 0.5 * k.size;
        kp.angle = k.angle;
        Eigen::Map<const Eigen::Matrix<float, 1, 128>> d(desc.ptr<float>(idx));
        const float n = d.norm();
        if (!(n > 0.0f)) continue;
        out.descriptors.row(row++) = d / n;
        out.keypoints.push_back(kp);
        const int px = std::min(image.width - 1, static_cast<int>(kp.pixel.x()));
        const int py = std::min(image.height - 1, static_cast<int>(kp.pixel.y()));
        out.colors.emplace_back(image.at(px, py, 0), image.at(px, py, 1), image.at(px, py, 2));
    }
    out.descriptors.conservativeResize(row, 128);
    return out;
}

} // namespace dragon
