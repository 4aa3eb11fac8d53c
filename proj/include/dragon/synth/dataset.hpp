// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/core/image.hpp"
#include "dragon/synth/building.hpp"
#include "dragon/synth/orbit.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dragon {

/// Train on the lowest and highest elevations, test on every elevation.
struct DatasetSplit {
    std::vector<int> train; // {0, N}
    std::vector<int> test;  // {0..N}

    static DatasetSplit standard(int max_elevation);
    [[nodiscard]] bool is_train(int elevation) const;
};

/// Ground-to-drone orbits scaled from an amphitheater-sized landmark:
/// altitude / radius / target in meters for elevations 0..4.
std::vector<OrbitSpec> default_orbits(int image_count = 24);

/// `count` orbits spanning the default ground and drone rings; count 5
/// returns the defaults, other counts interpolate altitude and radius.
std::vector<OrbitSpec> orbits_for_elevations(int count, int image_count = 24);

struct DatasetConfig {
    std::string building = "gap";
    std::uint64_t seed = 0;
    Intrinsics intrinsics;
    std::vector<OrbitSpec> orbits = default_orbits();
    int supersample = 3;

    void validate() const; // orbits must cover 0..N exactly once
    [[nodiscard]] int max_elevation() const;
};

/// Images grouped by elevation 0..N with their ground-truth cameras.
struct ElevationDataset {
    DatasetConfig config;
    DatasetSplit split;
    std::vector<std::vector<CameraView>> poses;  // [elevation][azimuth index]
    std::vector<std::vector<Image>> images;      // same shape; empty when not loaded
    std::filesystem::path root;

    [[nodiscard]] int max_elevation() const { return static_cast<int>(poses.size()) - 1; }
    [[nodiscard]] std::size_t count(const std::vector<int>& elevations) const;
    static std::string image_name(int elevation, int index); // e{elev}_v{idx}.png
};

/// Renders every orbit and returns the in-memory dataset (no disk I/O).
ElevationDataset generate_dataset(const DatasetConfig& config);

/// Renders and writes manifest, images/e{elev}_v{idx}.png and poses_gt.txt. Written images are 8-bit; the returned dataset holds the
/// quantized images so it equals what load_dataset reads back.
ElevationDataset build_dataset(const DatasetConfig& config, const std::filesystem::path& dir);

/// Poses are regenerated from the manifest's orbit parameters, so they are
/// bitwise identical to the ones the dataset was rendered with.
ElevationDataset load_dataset(const std::filesystem::path& dir, bool load_images = true);

std::string format_manifest(const DatasetConfig& config);
DatasetConfig parse_manifest(const std::string& text);

} // namespace dragon
