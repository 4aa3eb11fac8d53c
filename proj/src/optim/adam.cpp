// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/core/error.hpp"
#include "dragon/optim/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace dragon {

void TrainConfig::validate() const {
    if (total_iterations < 0) throw InvalidInput("total_iterations must be >= 0");
    if (densify_interval <= 0 || opacity_reset_interval <= 0)
        throw InvalidInput("densify and opacity reset intervals must be > 0");
    for (double lr : {lr_mean_start, lr_mean_end, lr_color, lr_opacity, lr_scale, lr_rotation})
        if (!(lr > 0.0)) throw InvalidInput("learning rates must be > 0");
    if (lr_mean_start < lr_mean_end) throw InvalidInput("lr_mean_start must be >= lr_mean_end");
    if (split_scale_divisor <= 1.0) throw InvalidInput("split_scale_divisor must be > 1");
    if (max_splats == 0) throw InvalidInput("max_splats must be > 0");
}

double TrainConfig::mean_lr(long iteration, double extent) const {
    const double r = total_iterations > 0
                         ? std::clamp(static_cast<double>(iteration) / total_iterations, 0.0, 1.0)
                         : 0.0;
    const double lr = std::exp((1.0 - r) * std::log(lr_mean_start) + r * std::log(lr_mean_end));
    return scale_mean_lr_by_extent ? lr * extent : lr;
}

std::array<double, kParamsPerSplat> pack_splat(const GaussianSplat& s) {
    std::array<double, kParamsPerSplat> p{};
    for (int k = 0; k < 3; ++k) {
        p[k] = s.mean[k];
        p[3 + k] = s.log_scale[k];
        p[11 + k] = s.color[k];
    }
    for (int k = 0; k < 4; ++k) p[6 + k] = s.rotation[k];
    p[10] = s.opacity_logit;
    for (int k = 0; k < kSh1Coefficients; ++k) p[14 + k] = s.sh1[k];
    return p;
}

void unpack_splat(const std::array<double, kParamsPerSplat>& p, GaussianSplat& s) {
    for (int k = 0; k < 3; ++k) {
        s.mean[k] = p[k];
        s.log_scale[k] = p[3 + k];
        s.color[k] = p[11 + k];
    }
    for (int k = 0; k < 4; ++k) s.rotation[k] = p[6 + k];
    s.opacity_logit = p[10];
    for (int k = 0; k < kSh1Coefficients; ++k) s.sh1[k] = p[14 + k];
}

std::array<double, kParamsPerSplat> pack_gradient(const SplatGradient& g) {
    std::array<double, kParamsPerSplat> p{};
    for (int k = 0; k < 3; ++k) {
        p[k] = g.mean[k];
        p[3 + k] = g.log_scale[k];
        p[11 + k] = g.color[k];
    }
    for (int k = 0; k < 4; ++k) p[6 + k] = g.rotation[k];
    p[10] = g.opacity_logit;
    for (int k = 0; k < kSh1Coefficients; ++k) p[14 + k] = g.sh1[k];
    return p;
}

void TrainState::reset_for(const Scene& scene, std::uint64_t seed) {
    const std::size_t n = scene.size();
    iteration = 0;
    adam_steps = 0;
    m.assign(n * kParamsPerSplat, 0.0);
    v.assign(n * kParamsPerSplat, 0.0);
    grad_accum.assign(n, 0.0);
    grad_count.assign(n, 0);
    grad_dir.assign(n, Vec3::Zero());
    rng.seed(seed);
    skipped_steps = 0;
    saturation_events = 0;
}

bool TrainState::matches(const Scene& scene) const {
    const std::size_t n = scene.size();
    return m.size() == n * kParamsPerSplat && v.size() == m.size() && grad_accum.size() == n &&
           grad_count.size() == n && grad_dir.size() == n;
}

bool adam_step(Scene& scene, TrainState& state, const RenderGradients& grads, const TrainConfig& config,
               double extent) {
    if (!state.matches(scene) || grads.splats.size() != scene.size())
        throw ShapeMismatch("adam_step: optimizer state does not match the scene");
    if (!grads.all_finite()) {
        ++state.skipped_steps;
        return false;
    }
    std::array<double, kParamsPerSplat> lr{};
    const double lr_mean = config.mean_lr(state.iteration, extent);
    for (int k = 0; k < 3; ++k) {
        lr[k] = lr_mean;
        lr[3 + k] = config.lr_scale;
        lr[11 + k] = config.lr_color;
    }
    for (int k = 0; k < 4; ++k) lr[6 + k] = config.lr_rotation;
    lr[10] = config.lr_opacity;
    for (int k = 0; k < kSh1Coefficients; ++k) lr[14 + k] = config.lr_color;

    ++state.adam_steps;
    const double b1 = config.adam_beta1, b2 = config.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.adam_steps));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.adam_steps));
    const bool use_sh = scene.sh_degree >= 1;

    for (std::size_t i = 0; i < scene.size(); ++i) {
        auto p = pack_splat(scene.splats[i]);
        const auto g = pack_gradient(grads.splats[i]);
        double* m = &state.m[i * kParamsPerSplat];
        double* v = &state.v[i * kParamsPerSplat];
        const int count = use_sh ? kParamsPerSplat : 14;
        for (int k = 0; k < count; ++k) {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            const double mh = m[k] / c1, vh = v[k] / c2;
            p[k] -= lr[k] * mh / (std::sqrt(vh) + config.adam_eps);
        }
        GaussianSplat& s = scene.splats[i];
        const Vec4 q_before = s.rotation;
        unpack_splat(p, s);
        if (s.rotation != q_before) {
            const double qn = s.rotation.norm();
            s.rotation = qn > 0.0 ? Vec4(s.rotation / qn) : Vec4(1.0, 0.0, 0.0, 0.0);
        }
    }
    return true;
}

double camera_extent(const std::vector<CameraView>& views) {
    if (views.empty()) return 1.0;
    Vec3 centroid = Vec3::Zero();
    for (const auto& v : views) centroid += v.center();
    centroid /= static_cast<double>(views.size());
    double r = 0.0;
    for (const auto& v : views) r = std::max(r, (v.center() - centroid).norm());
    return r > 0.0 ? 1.1 * r : 1.0;
}

} // namespace dragon
