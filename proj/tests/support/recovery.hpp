// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/eval/metrics.hpp"
#include "dragon/optim/trainer.hpp"
#include "dragon/synth/orbit.hpp"
#include "support/micro_scene.hpp"

#include <random>

namespace dragon::fixtures {

/// Known scene of `count` splats near the origin.
inline Scene known_scene(std::mt19937_64& rng, int count) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Scene scene;
    scene.background = Vec3(0.05, 0.05, 0.1);
    for (int i = 0; i < count; ++i) {
        GaussianSplat s;
        s.mean = Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5) * 1.6;
        for (int k = 0; k < 3; ++k) s.log_scale[k] = std::log(0.15 + 0.2 * u(rng));
        s.rotation = random_quaternion(rng);
        s.opacity_logit = logit(0.6 + 0.3 * u(rng));
        for (int k = 0; k < 3; ++k) s.color[k] = 0.1 + 0.8 * u(rng);
        scene.splats.push_back(s);
    }
    return scene;
}

/// `count` cameras split over two rings around the origin.
inline std::vector<CameraView> recovery_views(int count, int size = 64) {
    Intrinsics in;
    in.width = in.height = size;
    in.fx = in.fy = size * 1.2;
    in.cx = in.cy = size / 2.0;
    std::vector<CameraView> views;
    const int lower = count / 2;
    for (const auto& [n, alt] : {std::pair{lower, 1.2}, std::pair{count - lower, 3.0}}) {
        OrbitSpec o;
        o.camera_altitude = alt;
        o.trajectory_radius = 4.0;
        o.target_altitude = 0.0;
        o.image_count = n;
        auto ring = generate_orbit_poses(o, Vec3::Zero(), in);
        views.insert(views.end(), ring.begin(), ring.end());
    }
    return views;
}

inline Scene perturbed_copy(const Scene& scene, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Scene out = scene;
    for (auto& s : out.splats) {
        for (int k = 0; k < 3; ++k) {
            s.mean[k] += 0.05 * n(rng);
            s.log_scale[k] += 0.1 * n(rng);
            s.color[k] = std::clamp(s.color[k] + 0.1 * n(rng), 0.0, 1.0);
        }
        s.opacity_logit += 0.3 * n(rng);
    }
    return out;
}

struct RecoveryResult {
    double min_psnr = 0.0;
    double mean_psnr = 0.0;
};

/// Renders targets from a known scene, fits a perturbed copy with
/// train_basic and reports train-view PSNR.
inline RecoveryResult run_recovery(std::uint64_t seed, int splats, int views, int iterations) {
    std::mt19937_64 rng(seed);
    const Scene truth = known_scene(rng, splats);
    const auto poses = recovery_views(views);
    std::vector<Image> targets;
    for (const auto& p : poses) targets.push_back(render(truth, p).rgb);
    const Scene init = perturbed_copy(truth, rng);
    TrainConfig cfg;
    cfg.total_iterations = iterations;
    cfg.seed = seed;
    const Scene fit = train_basic(init, targets, poses, cfg);
    RecoveryResult r;
    r.min_psnr = 1e9;
    for (std::size_t i = 0; i < poses.size(); ++i) {
        const double p = psnr(targets[i], render(fit, poses[i]).rgb);
        r.min_psnr = std::min(r.min_psnr, p);
        r.mean_psnr += p / poses.size();
    }
    return r;
}

} // namespace dragon::fixtures
