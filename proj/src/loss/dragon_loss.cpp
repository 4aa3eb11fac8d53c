// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/loss/dragon_loss.hpp"

#include "dragon/core/error.hpp"
#include "dragon/loss/image_losses.hpp"

#include <cmath>

namespace dragon {

void LossWeights::validate() const {
    for (double v : {lambda_ssim, lambda_ds, lambda_clip})
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("loss weights must be finite and >= 0");
}

namespace {

double recombine(const LossBreakdown& b, const LossWeights& w) {
    return b.l1 + w.lambda_ssim * b.ssim_term + w.lambda_ds * b.ds_term + w.lambda_clip * b.clip_term;
}

} // namespace

LossBreakdown loss_3dgs(const Image& gt, const Image& render, const LossWeights& weights,
                        Image* grad_render, double sample_weight) {
    weights.validate();
    require_same_shape(gt, render, "loss_3dgs");
    LossBreakdown b;
    Image g_l1, g_ssim;
    b.l1 = sample_weight * l1_loss(gt, render, grad_render ? &g_l1 : nullptr);
    if (weights.lambda_ssim != 0.0)
        b.ssim_term = sample_weight * (1.0 - ssim(gt, render, grad_render ? &g_ssim : nullptr));
    LossWeights w = weights;
    w.lambda_ds = w.lambda_clip = 0.0;
    b.total = recombine(b, w);
    if (grad_render) {
        *grad_render = Image(gt.width, gt.height);
        for (std::size_t i = 0; i < gt.size(); ++i) {
            double g = g_l1.data[i];
            if (weights.lambda_ssim != 0.0) g -= weights.lambda_ssim * g_ssim.data[i];
            grad_render->data[i] = sample_weight * g;
        }
    }
    return b;
}

LossBreakdown loss_dragon(const Image& gt_k, const Image& render_k, const Image& render_adj,
                          const LossWeights& weights, const PerceptualMetric* metric_ds,
                          const PerceptualMetric* metric_clip, Image* grad_render_k,
                          Image* grad_render_adj, double sample_weight) {
    weights.validate();
    require_same_shape(gt_k, render_k, "loss_dragon");
    require_same_shape(gt_k, render_adj, "loss_dragon adjacent render");
    if (weights.lambda_ds > 0.0 && !metric_ds) throw InvalidInput("loss_dragon: lambda_ds > 0 without a metric");
    if (weights.lambda_clip > 0.0 && !metric_clip)
        throw InvalidInput("loss_dragon: lambda_clip > 0 without a metric");

    LossBreakdown b = loss_3dgs(gt_k, render_k, weights, grad_render_k, sample_weight);
    if (grad_render_adj) *grad_render_adj = Image(gt_k.width, gt_k.height);

    auto term = [&](const PerceptualMetric* m, double lambda) -> double {
        if (lambda == 0.0) return 0.0;
        if (!grad_render_adj) return m->distance(gt_k, render_adj);
        Image g;
        const double d = m->distance_with_gradient(gt_k, render_adj, g);
        for (std::size_t i = 0; i < g.size(); ++i) grad_render_adj->data[i] += lambda * g.data[i];
        return d;
    };
    b.ds_term = term(metric_ds, weights.lambda_ds);
    b.clip_term = term(metric_clip, weights.lambda_clip);
    b.total = recombine(b, weights);
    return b;
}

} // namespace dragon
