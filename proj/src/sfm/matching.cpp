// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/sfm/matching.hpp"

#include "dragon/core/error.hpp"
#include "dragon/core/parallel.hpp"

#include <algorithm>
#include <limits>

namespace dragon {

namespace {

struct Best2 {
    int idx = -1;
    float d1 = std::numeric_limits<float>::infinity();
    float d2 = std::numeric_limits<float>::infinity();
    void offer(int i, float d) {
        if (d < d1) {
            d2 = d1;
            d1 = d;
            idx = i;
        } else if (d < d2) {
            d2 = d;
        }
    }
    [[nodiscard]] bool passes(double ratio) const {
        return idx >= 0 && static_cast<double>(d1) < ratio * static_cast<double>(d2);
    }
};

} // namespace

std::uint64_t pair_seed(std::uint64_t seed, int a, int b) {
    std::uint64_t z = seed ^ (static_cast<std::uint64_t>(a) << 32) ^ static_cast<std::uint64_t>(b);
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<std::pair<int, int>> match_descriptors(const FeatureSet& a, const FeatureSet& b, double ratio) {
    std::vector<std::pair<int, int>> out;
    const auto na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
    if (na < 2 || nb < 2) return out;
    // Unit descriptors: squared distance = 2 - 2 a.b; Euclidean distances feed the ratio test.
    const Eigen::MatrixXf dot = a.descriptors * b.descriptors.transpose();
    std::vector<Best2> ab(na), ba(nb);
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < nb; ++j) {
            const float d = std::sqrt(std::max(0.0f, 2.0f - 2.0f * dot(i, j)));
            ab[i].offer(j, d);
            ba[j].offer(i, d);
        }
    for (int i = 0; i < na; ++i) {
        if (!ab[i].passes(ratio)) continue;
        const int j = ab[i].idx;
        if (ba[j].passes(ratio) && ba[j].idx == i) out.emplace_back(i, j);
    }
    return out;
}

PairMatch match_pair(const FeatureSet& a, const FeatureSet& b, const CameraView& ka, const CameraView& kb,
                     const MatchConfig& config, std::uint64_t seed) {
    if (a.size() == 0 || b.size() == 0) throw InvalidInput("match_pair: empty feature set");
    PairMatch result;
    auto putative = match_descriptors(a, b, config.ratio);
    result.putative = static_cast<int>(putative.size());
    if (putative.size() < 8) {
        result.matches = std::move(putative);
        return result;
    }
    std::vector<Vec2> x1, x2;
    for (const auto& [i, j] : putative) {
        x1.push_back(normalize_pixel(ka, a.keypoints[i].pixel));
        x2.push_back(normalize_pixel(kb, b.keypoints[j].pixel));
    }
    std::mt19937_64 rng(seed);
    const double scale = 0.25 * (ka.fx + ka.fy + kb.fx + kb.fy);
    const auto ess = estimate_essential_ransac(x1, x2, scale, config.ransac, rng);
    if (!ess.ok || static_cast<int>(ess.inliers.size()) < config.min_inliers) {
        result.matches = std::move(putative);
        return result;
    }
    std::vector<Vec2> i1, i2;
    for (int k : ess.inliers) {
        i1.push_back(x1[k]);
        i2.push_back(x2[k]);
        result.matches.push_back(putative[k]);
    }
    int in_front = 0;
    auto& g = result.geometry;
    g.relative = decompose_essential(ess.E, i1, i2, &in_front);
    g.inliers = static_cast<int>(ess.inliers.size());
    g.homography_inliers = count_homography_inliers(x1, x2, scale, config.ransac, rng);
    g.planar = g.homography_inliers >= config.planar_ratio * g.inliers;
    std::vector<double> angles;
    const Vec3 c2 = -g.relative.R.transpose() * g.relative.t;
    const RigidPose identity;
    for (std::size_t k = 0; k < i1.size(); ++k) {
        const Vec3 X = triangulate({identity, g.relative}, {i1[k], i2[k]});
        if (X.allFinite()) angles.push_back(triangulation_angle_deg(Vec3::Zero(), c2, X));
    }
    if (!angles.empty()) {
        std::nth_element(angles.begin(), angles.begin() + angles.size() / 2, angles.end());
        g.median_angle_deg = angles[angles.size() / 2];
    }
    // Cheirality: most inliers must lie in front of both cameras.
    result.verified = in_front >= config.min_inliers;
    return result;
}

MatchGraph build_match_graph(const std::vector<FeatureSet>& features, const std::vector<CameraView>& intrinsics,
                             const MatchConfig& config, std::uint64_t seed) {
    if (features.size() != intrinsics.size()) throw ShapeMismatch("build_match_graph: features vs intrinsics");
    const int n = static_cast<int>(features.size());
    std::vector<std::pair<int, int>> jobs;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) jobs.emplace_back(i, j);
    std::vector<PairMatch> results(jobs.size());
    parallel_for(0, jobs.size(), [&](std::size_t k) {
        const auto [i, j] = jobs[k];
        if (features[i].size() == 0 || features[j].size() == 0) return;
        results[k] = match_pair(features[i], features[j], intrinsics[i], intrinsics[j], config, pair_seed(seed, i, j));
        results[k].a = i;
        results[k].b = j;
    });
    MatchGraph graph;
    graph.image_count = n;
    for (auto& r : results)
        if (r.verified) graph.pairs.push_back(std::move(r));
    return graph;
}

} // namespace dragon
