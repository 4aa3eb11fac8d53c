// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/core/image.hpp"
#include "dragon/loss/perceptual.hpp"

namespace dragon {

struct LossWeights {
    double lambda_ssim = 0.2;
    double lambda_ds = 0.01;
    /// Active only during the fine-tune phase of a schedule.
    double lambda_clip = 0.01;

    void validate() const;
};

/// Per-term values. l1 and ssim_term carry the sample weight already, so
/// total = l1 + lambda_ssim*ssim_term + lambda_ds*ds_term + lambda_clip*clip_term
/// holds exactly as computed.
struct LossBreakdown {
    double l1 = 0.0;
    double ssim_term = 0.0; // 1 - SSIM
    double ds_term = 0.0;
    double clip_term = 0.0;
    double total = 0.0;
};

/// L1 + lambda_ssim * (1 - SSIM) between the ground truth and the render.
/// grad_render, when non-null, receives (is overwritten with) dtotal/drender.
LossBreakdown loss_3dgs(const Image& gt, const Image& render, const LossWeights& weights,
                        Image* grad_render = nullptr, double sample_weight = 1.0);

/// The photometric terms on (gt_k, render_k) plus perceptual terms comparing
/// gt_k against the render at the adjacent elevation. A metric may be null
/// only when its lambda is zero. Gradients w.r.t. both renders are written
/// when the pointers are non-null; that requires differentiable metrics.
LossBreakdown loss_dragon(const Image& gt_k, const Image& render_k, const Image& render_adj,
                          const LossWeights& weights, const PerceptualMetric* metric_ds,
                          const PerceptualMetric* metric_clip, Image* grad_render_k = nullptr,
                          Image* grad_render_adj = nullptr, double sample_weight = 1.0);

} // namespace dragon
