// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/render/rasterizer.hpp"
#include "dragon/scene/scene.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace dragon {

struct TrainConfig {
    int total_iterations = 3000;
    double lr_mean_start = 1.6e-4;
    double lr_mean_end = 1.6e-6;
    double lr_color = 0.0025; // base color and degree-1 SH
    double lr_opacity = 0.05;
    double lr_scale = 0.005;
    double lr_rotation = 0.001;
    /// Multiply the mean learning rate by the scene extent, so it is
    /// expressed relative to scene size.
    bool scale_mean_lr_by_extent = true;

    bool densify = true;
    int densify_interval = 100;
    int densify_start = 200;
    double densify_until_fraction = 0.5; // of total_iterations
    int opacity_reset_interval = 3000;
    double densify_grad_threshold = 2e-4;
    double prune_opacity_threshold = 0.005;
    double split_cutoff_fraction = 0.01; // of scene extent
    double split_scale_divisor = 1.6;
    double prune_world_scale_fraction = 0.5; // of scene extent
    std::size_t max_splats = 60000;

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-15;

    /// 0 derives the extent from the training cameras.
    double scene_extent = 0.0;
    std::uint64_t seed = 1;
    int log_interval = 100;

    void validate() const;
    [[nodiscard]] double mean_lr(long iteration, double extent) const;
};

/// Parameters per splat in the optimizer layout: mean 3, log_scale 3,
/// rotation 4, opacity_logit 1, color 3, sh1 9.
inline constexpr int kParamsPerSplat = 23;

std::array<double, kParamsPerSplat> pack_splat(const GaussianSplat& s);
void unpack_splat(const std::array<double, kParamsPerSplat>& p, GaussianSplat& s);
std::array<double, kParamsPerSplat> pack_gradient(const SplatGradient& g);

struct TrainState {
    long iteration = 0;  // completed iterations
    long adam_steps = 0; // iterations whose update was applied
    std::vector<double> m, v; // kParamsPerSplat per splat
    std::vector<double> grad_accum; // summed screen-space gradient norms
    std::vector<int> grad_count;
    std::vector<Vec3> grad_dir; // summed world-space mean gradients
    std::mt19937_64 rng;
    long skipped_steps = 0;     // non-finite gradients
    long saturation_events = 0; // densify candidates dropped at max_splats

    void reset_for(const Scene& scene, std::uint64_t seed);
    [[nodiscard]] bool matches(const Scene& scene) const;
};

/// One Adam update. Returns false (and counts a skipped step) when any
/// gradient is non-finite; the scene is then left untouched.
bool adam_step(Scene& scene, TrainState& state, const RenderGradients& grads,
               const TrainConfig& config, double extent);

/// Adds one view's screen-space statistics to the densification accumulators.
void accumulate_densify_stats(TrainState& state, const RenderGradients& grads);

struct DensifyStats {
    int cloned = 0;
    int split = 0;
    int pruned = 0;
    int saturated = 0;
};

/// Clones small and splits large splats whose mean screen-space gradient
/// exceeds the threshold, then prunes transparent or oversized splats.
/// Accumulators are cleared; moments follow their splats, new splats start
/// at zero.
DensifyStats densify_and_prune(Scene& scene, TrainState& state, const TrainConfig& config,
                               double extent);

/// opacity <- min(opacity, 0.01). Opacity moments are cleared.
void reset_opacity(Scene& scene, TrainState* state = nullptr);

/// 1.1 times the largest camera distance from the camera centroid.
double camera_extent(const std::vector<CameraView>& views);

/// Scene file plus a `.state` sidecar with the optimizer state.
void save_checkpoint(const std::filesystem::path& scene_path, const Scene& scene, const TrainState& state);
void load_checkpoint(const std::filesystem::path& scene_path, Scene& scene, TrainState& state);

} // namespace dragon
