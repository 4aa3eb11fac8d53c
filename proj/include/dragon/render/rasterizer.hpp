// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/core/image.hpp"
#include "dragon/scene/scene.hpp"

#include <array>
#include <optional>
#include <vector>

namespace dragon {

struct RenderSettings {
    double blur = 0.3;               // px^2 added to the 2D covariance diagonal
    double alpha_max = 0.99;
    double alpha_min = 1.0 / 255.0;  // smaller contributions are skipped
    double min_transmittance = 1e-4; // a pixel stops compositing below this
    double near_plane = 0.2;         // camera-frame z, same units as the scene
    double frustum_slack = 1.3;      // centers beyond this multiple of the half-FOV are culled
    int tile_size = 8;
};

/// A splat after projection into one view.
struct ProjectedSplat {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    Vec3 conic = Vec3::Zero(); // inverse of cov2d as (a, b, c) = [[a, b], [b, c]]
    double depth = 0.0;
    Vec3 color_view = Vec3::Zero();
    double opacity = 0.0;
    /// Exponents below this cannot reach alpha_min; a conservative early-out
    /// that skips exp() without changing which pixels contribute.
    double power_cut = 0.0;
    int x0 = 0, x1 = 0, y0 = 0, y1 = 0; // covered pixel range, half-open
};

/// Projects one splat; returns nullopt when it is culled (behind the near
/// plane, outside the widened frustum, or with no pixel able to reach
/// alpha_min).
std::optional<ProjectedSplat> project_splat(const GaussianSplat& splat, int sh_degree,
                                            const CameraView& view,
                                            const RenderSettings& settings = {});

/// View-dependent color of a splat for a camera center.
Vec3 splat_color(const GaussianSplat& splat, int sh_degree, const Vec3& camera_center);

struct RenderedImage {
    Image rgb;                 // clamped to [0, 1]
    std::vector<double> alpha; // 1 - final transmittance, per pixel
    std::vector<double> depth; // transmittance-weighted camera depth, per pixel
};

/// Everything the backward pass needs from a forward render.
struct ForwardState {
    RenderedImage image;
    Image raw_rgb; // before the output clamp
    std::vector<ProjectedSplat> projected;
    std::vector<int> source;       // projected index -> scene splat index
    std::vector<int> tile_offsets; // CSR over tiles, entries sorted front to back
    std::vector<int> tile_entries; // projected indices
    int tiles_x = 0, tiles_y = 0;
};

ForwardState render_forward(const Scene& scene, const CameraView& view,
                            const RenderSettings& settings = {});

RenderedImage render(const Scene& scene, const CameraView& view,
                     const RenderSettings& settings = {});

struct SplatGradient {
    Vec3 mean = Vec3::Zero();
    Vec3 log_scale = Vec3::Zero();
    Vec4 rotation = Vec4::Zero();
    double opacity_logit = 0.0;
    Vec3 color = Vec3::Zero();
    std::array<double, kSh1Coefficients> sh1{};
    /// Screen-space gradient in normalized device units, summed over the
    /// views accumulated into this buffer (drives densification).
    Vec2 mean2d_ndc = Vec2::Zero();
    bool visible = false;
};

struct RenderGradients {
    std::vector<SplatGradient> splats;

    void reset(std::size_t count) { splats.assign(count, SplatGradient{}); }
    [[nodiscard]] bool all_finite() const;
    /// Squared L2 norm over every parameter partial.
    [[nodiscard]] double squared_norm() const;
};

/// Accumulates dL/dparams into grads given dL/d(rendered rgb). The gradient is
/// taken through the output clamp (zero where the clamp is active).
void render_backward(const Scene& scene, const CameraView& view, const ForwardState& forward,
                     const Image& dloss_drgb, RenderGradients& grads,
                     const RenderSettings& settings = {});

/// Photometric training loss: weight * (L1 + lambda_ssim * (1 - SSIM)).
struct PhotometricLoss {
    double lambda_ssim = 0.2;
    double weight = 1.0;
};

struct RenderLossResult {
    RenderedImage image;
    double loss = 0.0;
    RenderGradients gradients;
};

/// Renders, evaluates the photometric loss against target, and returns the
/// analytic parameter gradients. Throws ShapeMismatch if the target size does
/// not match the view.
RenderLossResult render_with_gradients(const Scene& scene, const CameraView& view,
                                       const Image& target, const PhotometricLoss& loss = {},
                                       const RenderSettings& settings = {});

} // namespace dragon
