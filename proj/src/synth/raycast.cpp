// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/synth/raycast.hpp"

#include "dragon/core/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace dragon {

Vec3 pixel_ray(const CameraView& view, double px, double py) {
    const Vec3 cam((px - view.cx) / view.fx, (py - view.cy) / view.fy, 1.0);
    return (view.rotation_w2c.transpose() * cam).normalized();
}

Image render_ground_truth(const BuildingSpec& spec, const CameraView& view, const RaycastSettings& settings) {
    view.validate(1e-9);
    const int W = view.width, H = view.height, S = std::max(1, settings.supersample);
    const Vec3 origin = view.center();
    const Vec3 sun = spec.sun_direction.normalized();
    const double focal = 0.5 * (view.fx + view.fy);
    Image img(W, H);
    parallel_for(0, static_cast<std::size_t>(H), [&](std::size_t row) {
        const int y = static_cast<int>(row);
        for (int x = 0; x < W; ++x) {
            Vec3 acc = Vec3::Zero();
            for (int sy = 0; sy < S; ++sy)
                for (int sx = 0; sx < S; ++sx) {
                    const double px = x + (sx + 0.5) / S, py = y + (sy + 0.5) / S;
                    const Vec3 dir = pixel_ray(view, px, py);
                    const auto hit = intersect(spec, origin, dir);
                    if (!hit) {
                        const double h = std::clamp(dir.y(), 0.0, 1.0);
                        acc += spec.sky_horizon + (spec.sky_zenith - spec.sky_horizon) * std::sqrt(h);
                        continue;
                    }
                    // Pixel footprint on the surface, stretched at grazing incidence.
                    const double cos_in = std::max(0.15, std::abs(hit->normal.dot(dir)));
                    const double footprint = hit->t / focal / cos_in;
                    const Vec3 albedo = shade_material(*hit->material, hit->point, hit->u, hit->normal, footprint);
                    const double light = spec.ambient + (1.0 - spec.ambient) * std::max(0.0, hit->normal.dot(sun));
                    acc += albedo * light;
                }
            acc /= static_cast<double>(S * S);
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = std::clamp(acc[c], 0.0, 1.0);
        }
    });
    return img;
}

} // namespace dragon
