// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/core/error.hpp"
#include "dragon/optim/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dragon {

void accumulate_densify_stats(TrainState& state, const RenderGradients& grads) {
    if (grads.splats.size() != state.grad_accum.size())
        throw ShapeMismatch("accumulate_densify_stats: gradient count does not match the state");
    for (std::size_t i = 0; i < grads.splats.size(); ++i) {
        const auto& g = grads.splats[i];
        if (!g.visible) continue;
        state.grad_accum[i] += g.mean2d_ndc.norm();
        state.grad_count[i] += 1;
        state.grad_dir[i] += g.mean;
    }
}

DensifyStats densify_and_prune(Scene& scene, TrainState& state, const TrainConfig& config, double extent) {
    if (!state.matches(scene)) throw ShapeMismatch("densify_and_prune: state does not match the scene");
    DensifyStats stats;
    const std::size_t n = scene.size();

    // Candidates by descending mean gradient; index breaks ties.
    std::vector<std::size_t> candidates;
    std::vector<double> mean_grad(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (state.grad_count[i] > 0) mean_grad[i] = state.grad_accum[i] / state.grad_count[i];
        if (mean_grad[i] > config.densify_grad_threshold) candidates.push_back(i);
    }
    std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        return mean_grad[a] > mean_grad[b] || (mean_grad[a] == mean_grad[b] && a < b);
    });

    std::vector<char> replaced(n, 0);
    std::vector<GaussianSplat> added;
    std::size_t projected = n;
    const double cutoff = config.split_cutoff_fraction * extent;

    for (std::size_t i : candidates) {
        const GaussianSplat& s = scene.splats[i];
        const Vec3 sc = s.scale();
        int axis = 0;
        sc.maxCoeff(&axis);
        const double smax = sc[axis];
        if (smax <= cutoff) {
            if (projected + 1 > config.max_splats) {
                ++stats.saturated;
                continue;
            }
            GaussianSplat c = s;
            const Vec3 dir = state.grad_dir[i];
            if (dir.norm() > 0.0) c.mean -= 0.5 * smax * dir.normalized();
            added.push_back(c);
            ++projected;
            ++stats.cloned;
        } else {
            // Split replaces one splat by two.
            if (projected + 1 > config.max_splats) {
                ++stats.saturated;
                continue;
            }
            const Vec3 offset = quaternion_to_matrix(s.rotation).col(axis) * (0.5 * smax);
            GaussianSplat a = s, b = s;
            a.mean += offset;
            b.mean -= offset;
            const double shrink = std::log(config.split_scale_divisor);
            a.log_scale.array() -= shrink;
            b.log_scale.array() -= shrink;
            replaced[i] = 1;
            added.push_back(a);
            added.push_back(b);
            ++projected;
            ++stats.split;
        }
    }
    state.saturation_events += stats.saturated;

    const double max_world_scale = config.prune_world_scale_fraction * extent;
    auto keep = [&](const GaussianSplat& s) {
        return s.opacity() >= config.prune_opacity_threshold && s.scale().maxCoeff() <= max_world_scale;
    };

    Scene out;
    out.background = scene.background;
    out.sh_degree = scene.sh_degree;
    std::vector<double> m, v;
    auto push = [&](const GaussianSplat& s, const double* sm, const double* sv) {
        out.splats.push_back(s);
        for (int k = 0; k < kParamsPerSplat; ++k) {
            m.push_back(sm ? sm[k] : 0.0);
            v.push_back(sv ? sv[k] : 0.0);
        }
    };
    for (std::size_t i = 0; i < n; ++i) {
        if (replaced[i]) continue;
        if (!keep(scene.splats[i])) {
            ++stats.pruned;
            continue;
        }
        push(scene.splats[i], &state.m[i * kParamsPerSplat], &state.v[i * kParamsPerSplat]);
    }
    for (const auto& s : added) {
        if (!keep(s)) {
            ++stats.pruned;
            continue;
        }
        push(s, nullptr, nullptr);
    }
    scene = std::move(out);
    state.m = std::move(m);
    state.v = std::move(v);
    state.grad_accum.assign(scene.size(), 0.0);
    state.grad_count.assign(scene.size(), 0);
    state.grad_dir.assign(scene.size(), Vec3::Zero());
    return stats;
}

void reset_opacity(Scene& scene, TrainState* state) {
    const double cap = logit(0.01);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        auto& s = scene.splats[i];
        s.opacity_logit = std::min(s.opacity_logit, cap);
        if (state && state->matches(scene)) {
            state->m[i * kParamsPerSplat + 10] = 0.0;
            state->v[i * kParamsPerSplat + 10] = 0.0;
        }
    }
}

} // namespace dragon
