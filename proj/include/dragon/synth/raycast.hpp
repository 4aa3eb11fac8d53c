// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/core/image.hpp"
#include "dragon/synth/building.hpp"

namespace dragon {

struct RaycastSettings {
    int supersample = 3; // per axis
};

/// Ray-traced reference image: Lambert-shaded procedural materials over a
/// vertical sky gradient, box-filtered over supersample^2 rays per pixel.
Image render_ground_truth(const BuildingSpec& spec, const CameraView& view,
                          const RaycastSettings& settings = {});

/// World-space direction of the ray through continuous pixel (px, py).
Vec3 pixel_ray(const CameraView& view, double px, double py);

} // namespace dragon
