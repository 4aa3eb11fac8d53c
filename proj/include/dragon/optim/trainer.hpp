// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/loss/dragon_loss.hpp"
#include "dragon/optim/optimizer.hpp"

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dragon {

struct TrainView {
    Image image;
    CameraView pose;
    double weight = 1.0; // scales this view's photometric terms
    bool generated = false;
    std::string name;
};

/// One drawn training sample: a view index and, optionally, the pose whose
/// render is compared perceptually against that view's image.
struct TrainSample {
    std::size_t view = 0;
    std::optional<CameraView> adjacent;
};

using TrainSampler = std::function<TrainSample(std::mt19937_64&)>;

struct TrainLoss {
    LossWeights weights{0.2, 0.0, 0.0};
    const PerceptualMetric* metric_ds = nullptr;
    const PerceptualMetric* metric_clip = nullptr;
    /// lambda_clip is applied only during the final fraction of iterations.
    double clip_phase_fraction = 1.0 / 6.0;
};

struct TrainLogRow {
    long iteration = 0;
    LossBreakdown loss;
    std::size_t splats = 0;
    double lr_mean = 0.0;
};

struct TrainSummary {
    long iterations = 0;
    long skipped_steps = 0;
    long saturation_events = 0;
    int densify_events = 0;
    double extent = 0.0;
    std::vector<TrainLogRow> log; // every log_interval iterations and the last
};

/// Runs config.total_iterations iterations (counted by state.iteration) of
/// sample, render, loss, backward, Adam, then the scheduled densify, prune
/// and opacity reset. The sampler defaults to uniform over views with no
/// perceptual anchor. Throws InvalidInput on an empty view set and on
/// perceptual weights without differentiable metrics. A non-negative
/// stop_at ends the call early at that iteration, keeping the schedule of
/// the full run so a later call can resume it.
TrainSummary train(Scene& scene, TrainState& state, const std::vector<TrainView>& views,
                   const TrainConfig& config, const TrainLoss& loss,
                   const TrainSampler& sampler = {}, const RenderSettings& settings = {},
                   long stop_at = -1);

/// Fresh state seeded from config.seed, uniform sampling, L1 + SSIM loss.
Scene train_basic(const Scene& init, const std::vector<Image>& images,
                  const std::vector<CameraView>& poses, const TrainConfig& config,
                  const LossWeights& weights = {0.2, 0.0, 0.0}, TrainSummary* summary = nullptr);

void write_train_log_csv(std::ostream& out, const std::vector<TrainLogRow>& rows);

} // namespace dragon
