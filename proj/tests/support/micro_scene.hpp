// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/render/rasterizer.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace dragon::fixtures {

inline Vec4 random_quaternion(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec4 q(n(rng), n(rng), n(rng), n(rng));
    return q.normalized();
}

/// Camera at the origin looking down +z with the principal point at the
/// image center.
inline CameraView micro_view(int size = 16, double focal = 20.0) {
    CameraView v;
    v.fx = v.fy = focal;
    v.cx = v.cy = size / 2.0;
    v.width = v.height = size;
    return v;
}

/// Random scene of `count` splats in front of micro_view. Opacities stay
/// below the alpha clamp and colors keep raw pixels inside [0, 1], so the
/// loss is smooth in every parameter.
inline Scene random_micro_scene(std::mt19937_64& rng, int count, int sh_degree) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Scene scene;
    scene.sh_degree = sh_degree;
    scene.background = Vec3(0.1 + 0.3 * u(rng), 0.1 + 0.3 * u(rng), 0.1 + 0.3 * u(rng));
    for (int i = 0; i < count; ++i) {
        GaussianSplat s;
        const double z = 2.0 + 2.0 * u(rng);
        s.mean = Vec3((u(rng) - 0.5) * 0.6 * z, (u(rng) - 0.5) * 0.6 * z, z);
        for (int k = 0; k < 3; ++k) s.log_scale[k] = std::log(0.1 + 0.3 * u(rng));
        s.rotation = random_quaternion(rng);
        s.opacity_logit = logit(0.3 + 0.6 * u(rng));
        for (int k = 0; k < 3; ++k) s.color[k] = 0.15 + 0.7 * u(rng);
        if (sh_degree >= 1)
            for (double& c : s.sh1) c = (u(rng) - 0.5) * 0.1;
        scene.splats.push_back(s);
    }
    return scene;
}

inline Image random_image(std::mt19937_64& rng, int w, int h) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(w, h);
    for (double& v : img.data) v = u(rng);
    return img;
}

/// Addresses every scalar parameter of a scene in a fixed order.
struct ParamRef {
    std::string name;
    std::function<double&(Scene&)> get;
    std::function<double(const RenderGradients&)> grad;
};

inline std::vector<ParamRef> scene_parameters(const Scene& scene) {
    std::vector<ParamRef> refs;
    for (std::size_t i = 0; i < scene.splats.size(); ++i) {
        const std::string p = "splat" + std::to_string(i) + ".";
        for (int k = 0; k < 3; ++k) {
            refs.push_back({p + "mean" + std::to_string(k),
                            [i, k](Scene& s) -> double& { return s.splats[i].mean[k]; },
                            [i, k](const RenderGradients& g) { return g.splats[i].mean[k]; }});
            refs.push_back({p + "log_scale" + std::to_string(k),
                            [i, k](Scene& s) -> double& { return s.splats[i].log_scale[k]; },
                            [i, k](const RenderGradients& g) { return g.splats[i].log_scale[k]; }});
            refs.push_back({p + "color" + std::to_string(k),
                            [i, k](Scene& s) -> double& { return s.splats[i].color[k]; },
                            [i, k](const RenderGradients& g) { return g.splats[i].color[k]; }});
        }
        for (int k = 0; k < 4; ++k)
            refs.push_back({p + "rotation" + std::to_string(k),
                            [i, k](Scene& s) -> double& { return s.splats[i].rotation[k]; },
                            [i, k](const RenderGradients& g) { return g.splats[i].rotation[k]; }});
        refs.push_back({p + "opacity_logit",
                        [i](Scene& s) -> double& { return s.splats[i].opacity_logit; },
                        [i](const RenderGradients& g) { return g.splats[i].opacity_logit; }});
        if (scene.sh_degree >= 1)
            for (int k = 0; k < kSh1Coefficients; ++k)
                refs.push_back({p + "sh1_" + std::to_string(k),
                                [i, k](Scene& s) -> double& { return s.splats[i].sh1[k]; },
                                [i, k](const RenderGradients& g) { return g.splats[i].sh1[k]; }});
    }
    return refs;
}

struct GradCheckResult {
    int checked = 0;
    int failed = 0;
    double worst_relative = 0.0;
    std::string worst_name;
};

/// Central finite differences of render_with_gradients' loss against its
/// analytic gradient. A parameter passes when
/// |analytic - numeric| <= rel_tol * max(|analytic|, |numeric|) + abs_floor.
inline GradCheckResult gradient_check(const Scene& scene, const CameraView& view, const Image& target,
                                      const PhotometricLoss& loss, double eps, double rel_tol,
                                      double abs_floor) {
    const auto analytic = render_with_gradients(scene, view, target, loss).gradients;
    GradCheckResult r;
    Scene work = scene;
    for (const auto& ref : scene_parameters(scene)) {
        double& value = ref.get(work);
        const double orig = value;
        value = orig + eps;
        const double lp = render_with_gradients(work, view, target, loss).loss;
        value = orig - eps;
        const double lm = render_with_gradients(work, view, target, loss).loss;
        value = orig;
        const double numeric = (lp - lm) / (2.0 * eps);
        const double a = ref.grad(analytic);
        const double err = std::abs(a - numeric);
        const double scale = std::max(std::abs(a), std::abs(numeric));
        ++r.checked;
        if (err > rel_tol * scale + abs_floor) ++r.failed;
        const double rel = scale > 0 ? err / scale : 0.0;
        if (err > abs_floor && rel > r.worst_relative) {
            r.worst_relative = rel;
            r.worst_name = ref.name;
        }
    }
    return r;
}

} // namespace dragon::fixtures
