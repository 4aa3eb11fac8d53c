// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/core/image.hpp"
#include "dragon/scene/scene.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dragon {

enum class TextureKind { Flat, Noise, Windows, Stripes };

/// Solid procedural texture. `frequency` is the dominant spatial frequency
/// in cycles per meter; octaves finer than the pixel footprint fade out, so
/// high-frequency detail disappears with distance.
struct Material {
    Vec3 base{0.6, 0.6, 0.6};
    Vec3 accent{0.3, 0.3, 0.3};
    TextureKind kind = TextureKind::Flat;
    double frequency = 4.0;
    double contrast = 1.0;
    int octaves = 3;
    std::uint64_t seed = 1;
};

/// Convex solids, optionally minus a horizontal cylinder (arches).
/// Vertical cylinders and domes have their axis along world y.
struct Primitive {
    enum class Shape { Box, Cylinder, Pyramid, Dome };
    Shape shape = Shape::Box;
    Vec3 min = Vec3::Zero(); // box/pyramid footprint corner, base height in y
    Vec3 max = Vec3::Ones();
    Vec3 center = Vec3::Zero(); // cylinder/dome base center
    double radius = 1.0;
    double height = 1.0;
    /// Arch cut: a horizontal cylinder along x (axis_x) or z, through
    /// (cut_center), subtracted from the solid.
    bool has_cut = false;
    bool cut_along_x = true;
    Vec3 cut_center = Vec3::Zero();
    double cut_radius = 0.0;
    Material side;
    Material top;
};

struct BuildingSpec {
    std::string name;
    std::vector<Primitive> primitives;
    Material ground;
    Vec3 sky_zenith{0.35, 0.55, 0.85};
    Vec3 sky_horizon{0.8, 0.85, 0.9};
    Vec3 sun_direction{0.4, 0.8, 0.3}; // toward the sun
    double ambient = 0.45;
    double bounding_radius = 1.5; // every primitive lies within this of the y axis

    void validate() const;
};

/// "tower", "arch", "dome", or "gap" (the default registration-gap scene).
/// Shipped specs: "gap" (default, registration-adversarial), "tower", "arch",
/// "dome". A nonzero seed reshuffles every texture without moving geometry.
BuildingSpec make_building(const std::string& name, std::uint64_t seed = 0);
std::vector<std::string> building_names();

/// Hit record of a ray against the building and ground.
struct RayHit {
    double t = 0.0;
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
    const Material* material = nullptr;
    double u = 0.0; // horizontal surface coordinate for facade patterns
};

/// Closest hit with t > t_min against every primitive and the ground plane
/// y = 0. Returns nullopt for sky.
std::optional<RayHit> intersect(const BuildingSpec& spec, const Vec3& origin, const Vec3& dir,
                                double t_min = 1e-9);

/// Procedural texture color at a surface point; footprint is the pixel size
/// in meters at that point.
Vec3 shade_material(const Material& m, const Vec3& point, double u, const Vec3& normal, double footprint);

} // namespace dragon
