// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/core/image.hpp"

#include <array>

namespace dragon {

/// Canonical SSIM parameters: 11x11 Gaussian window with sigma 1.5,
/// K1 = 0.01, K2 = 0.03, dynamic range 1.
struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Mean absolute difference over all pixels and channels. When grad_b is
/// non-null it receives dL/db.
double l1_loss(const Image& a, const Image& b, Image* grad_b = nullptr);

/// Mean local SSIM over every fully-contained window position and channel.
/// Throws InvalidInput if either dimension is smaller than the window.
double ssim(const Image& a, const Image& b, Image* grad_b = nullptr,
            const SsimParams& params = {});

/// weight * (L1(gt, rendered) + lambda_ssim * (1 - SSIM(gt, rendered))).
/// Gradient is with respect to the rendered image and is accumulated
/// (added) into grad_rendered when non-null.
double photometric_loss(const Image& gt, const Image& rendered, double lambda_ssim,
                        double weight, Image* grad_rendered);

/// Normalized 1D Gaussian taps.
std::vector<double> gaussian_kernel(int size, double sigma);

} // namespace dragon
