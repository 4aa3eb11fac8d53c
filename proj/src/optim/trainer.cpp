// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/optim/trainer.hpp"

#include "dragon/core/error.hpp"
#include "dragon/core/text_io.hpp"

#include <algorithm>
#include <cmath>

namespace dragon {

namespace {

void add_gradients(RenderGradients& into, const RenderGradients& from) {
    for (std::size_t i = 0; i < into.splats.size(); ++i) {
        auto& a = into.splats[i];
        const auto& b = from.splats[i];
        a.mean += b.mean;
        a.log_scale += b.log_scale;
        a.rotation += b.rotation;
        a.opacity_logit += b.opacity_logit;
        a.color += b.color;
        for (int k = 0; k < kSh1Coefficients; ++k) a.sh1[k] += b.sh1[k];
    }
}

} // namespace

TrainSummary train(Scene& scene, TrainState& state, const std::vector<TrainView>& views,
                   const TrainConfig& config, const TrainLoss& loss, const TrainSampler& sampler,
                   const RenderSettings& settings, long stop_at) {
    config.validate();
    loss.weights.validate();
    if (views.empty()) throw InvalidInput("train: empty training set");
    for (const auto& v : views) {
        if (v.image.width != v.pose.width || v.image.height != v.pose.height)
            throw ShapeMismatch("train: image '" + v.name + "' does not match its camera size");
    }
    const bool wants_ds = loss.weights.lambda_ds > 0.0, wants_clip = loss.weights.lambda_clip > 0.0;
    if (wants_ds && (!loss.metric_ds || !loss.metric_ds->differentiable()))
        throw InvalidInput("train: lambda_ds > 0 needs a differentiable metric");
    if (wants_clip && (!loss.metric_clip || !loss.metric_clip->differentiable()))
        throw InvalidInput("train: lambda_clip > 0 needs a differentiable metric");
    if (!state.matches(scene)) throw ShapeMismatch("train: optimizer state does not match the scene");

    TrainSummary summary;
    std::vector<CameraView> poses;
    for (const auto& v : views) poses.push_back(v.pose);
    const double extent = config.scene_extent > 0.0 ? config.scene_extent : camera_extent(poses);
    summary.extent = extent;

    const long total = config.total_iterations;
    const long densify_until = static_cast<long>(config.densify_until_fraction * total);
    const long clip_start = total - static_cast<long>(std::llround(loss.clip_phase_fraction * total));
    std::uniform_int_distribution<std::size_t> uniform(0, views.size() - 1);

    RenderGradients grads, adj_grads;
    const long end = stop_at >= 0 ? std::min(stop_at, total) : total;
    while (state.iteration < end) {
        const long it = state.iteration;
        TrainSample sample = sampler ? sampler(state.rng) : TrainSample{uniform(state.rng), std::nullopt};
        if (sample.view >= views.size()) throw InvalidInput("train: sampler returned an invalid view");
        const TrainView& tv = views[sample.view];

        LossWeights w = loss.weights;
        if (it < clip_start) w.lambda_clip = 0.0;
        const bool anchor = sample.adjacent && (w.lambda_ds > 0.0 || w.lambda_clip > 0.0);
        if (!anchor) w.lambda_ds = w.lambda_clip = 0.0;

        const ForwardState fs = render_forward(scene, tv.pose, settings);
        Image g_main, g_adj;
        LossBreakdown b;
        std::optional<ForwardState> fa;
        if (anchor) {
            fa = render_forward(scene, *sample.adjacent, settings);
            b = loss_dragon(tv.image, fs.image.rgb, fa->image.rgb, w, loss.metric_ds, loss.metric_clip,
                            &g_main, &g_adj, tv.weight);
        } else {
            b = loss_3dgs(tv.image, fs.image.rgb, w, &g_main, tv.weight);
        }

        grads.reset(scene.size());
        render_backward(scene, tv.pose, fs, g_main, grads, settings);
        accumulate_densify_stats(state, grads);
        if (fa) {
            adj_grads.reset(scene.size());
            render_backward(scene, *sample.adjacent, *fa, g_adj, adj_grads, settings);
            add_gradients(grads, adj_grads);
        }
        const double lr_mean = config.mean_lr(it, extent);
        adam_step(scene, state, grads, config, extent);
        state.iteration = it + 1;
        const long done = state.iteration;

        if (config.densify && done >= config.densify_start && done <= densify_until) {
            if (done % config.densify_interval == 0) {
                densify_and_prune(scene, state, config, extent);
                ++summary.densify_events;
            }
            if (done % config.opacity_reset_interval == 0) reset_opacity(scene, &state);
        }
        if (config.log_interval > 0 && (done % config.log_interval == 0 || done == total))
            summary.log.push_back({done, b, scene.size(), lr_mean});
    }
    summary.iterations = state.iteration;
    summary.skipped_steps = state.skipped_steps;
    summary.saturation_events = state.saturation_events;
    return summary;
}

Scene train_basic(const Scene& init, const std::vector<Image>& images, const std::vector<CameraView>& poses,
                  const TrainConfig& config, const LossWeights& weights, TrainSummary* summary) {
    if (images.empty()) throw InvalidInput("train_basic: empty training set");
    if (images.size() != poses.size()) throw InvalidInput("train_basic: image and pose counts differ");
    std::vector<TrainView> views;
    views.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) views.push_back({images[i], poses[i], 1.0, false, ""});
    Scene scene = init;
    TrainState state;
    state.reset_for(scene, config.seed);
    TrainLoss loss;
    loss.weights = weights;
    loss.weights.lambda_ds = loss.weights.lambda_clip = 0.0;
    auto s = train(scene, state, views, config, loss);
    if (summary) *summary = std::move(s);
    return scene;
}

void write_train_log_csv(std::ostream& out, const std::vector<TrainLogRow>& rows) {
    out << "iteration,total,l1,ssim_term,ds_term,clip_term,splats,lr_mean\n";
    for (const auto& r : rows) {
        out << r.iteration << ',' << format_double(r.loss.total) << ',' << format_double(r.loss.l1) << ','
            << format_double(r.loss.ssim_term) << ',' << format_double(r.loss.ds_term) << ','
            << format_double(r.loss.clip_term) << ',' << r.splats << ',' << format_double(r.lr_mean) << '\n';
    }
}

} // namespace dragon
