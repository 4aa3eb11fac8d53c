// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/loss/dragon_loss.hpp"
#include "dragon/optim/trainer.hpp"
#include "dragon/sfm/alignment.hpp"
#include "dragon/sfm/sparse_map.hpp"
#include "dragon/synth/dataset.hpp"

#include <random>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dragon {

/// Render targets for the intermediate elevations 1..N-1, azimuth-indexed
/// like the real orbits so "same azimuth" is the same list position.
struct ElevationSchedule {
    int max_elevation = 0;                          // N
    std::map<int, std::vector<CameraView>> targets; // elevation -> poses

    void validate() const; // keys exactly 1..N-1, poses valid
    static ElevationSchedule from_dataset(const ElevationDataset& dataset);
};

/// One image of X_cum with its provenance.
struct AccumulatedImage {
    std::string name;
    Image image;
    CameraView nominal; // pose it was captured or rendered at
    int elevation = 0;
    int azimuth = 0;    // position within its orbit
    bool generated = false;
};

struct StageSummary {
    std::string label;          // "stage_3", "final"
    int frontier = 0;           // elevation rendered by this stage (-1 for final)
    int images = 0;             // |X_cum| registered this stage
    int registered = 0;
    int generated_new = 0;      // generated views of the newest elevation in X_cum
    int generated_new_registered = 0;
    bool low_generated_registration = false; // fewer than half of the newest generated views registered
    long iterations = 0;
    std::size_t splats = 0;
};

struct PipelineConfig {
    TrainConfig train;              // total_iterations is the whole budget
    int min_stage_iterations = 500;
    LossWeights weights{0.2, 0.01, 0.01};
    std::string metric_ds = "builtin";
    std::string metric_clip = "builtin-coarse";
    double generated_weight = 0.5;
    RegistrationConfig registration;
    SceneInitConfig init{0.05, 0.1, 0, Vec3(0.7, 0.78, 0.88)};
    /// Render target of stage i is i-1 instead of i (so the last stage
    /// renders the ground elevation); kept for comparison only.
    bool literal_indexing = false;
    /// Keep the perceptual anchor during the final training on real images.
    bool perceptual_in_final = true;
    std::uint64_t seed = 1;

    void validate() const;
    /// Iterations per training stage: total / stages, at least min_stage_iterations.
    [[nodiscard]] int stage_iterations(int stages) const;
    /// Stable text form of every field; stage checkpoints embed it.
    [[nodiscard]] std::string fingerprint() const;
};

struct PipelineState {
    std::vector<AccumulatedImage> x_cum;
    std::vector<std::optional<CameraView>> c_cum; // aligned registered poses, parallel to x_cum
    int cursor = 0;                               // elevation most recently rendered
    std::vector<StageSummary> stages;
};

/// Real training images: X^0 (ground) and X^N (drone).
struct RealImages {
    std::vector<AccumulatedImage> ground;
    std::vector<AccumulatedImage> drone;

    static RealImages from_dataset(const ElevationDataset& dataset);
};

struct DragonResult {
    Scene scene;
    /// Final poses of the real images, ground first then drone; nullopt
    /// where registration failed. Expressed in the nominal frame.
    std::vector<std::optional<CameraView>> c_train;
    std::vector<std::string> c_train_names;
    RegistrationReport registration; // real images only, against their nominal poses
    PipelineState state;
    std::vector<std::string> training_images; // names used by the final training
    std::vector<std::string> warnings;
};

/// Trains on the images with the given poses and renders every test pose.
struct BasicResult {
    Scene scene;
    std::vector<Image> renders;
    TrainSummary summary;
};
BasicResult run_basic(const Scene& init, const std::vector<Image>& images, const std::vector<CameraView>& poses,
                      const std::vector<CameraView>& test_poses, const TrainConfig& config,
                      const LossWeights& weights = {0.2, 0.0, 0.0});

/// Renders each pose with the scene and tags the outputs as generated; images
/// are quantized to 8 bits so they equal their saved PNGs.
std::vector<AccumulatedImage> extrapolate_elevation(const Scene& scene, const std::vector<CameraView>& poses,
                                                    int elevation);

/// Uniform over available elevations, then uniform within one. The adjacent
/// pose is the same-azimuth schedule pose one elevation toward the ground,
/// when the schedule has one.
struct TrainingTuple {
    std::size_t view = 0;
    int elevation = 0;
    std::optional<CameraView> adjacent;
};
TrainingTuple sample_training_tuple(const std::vector<int>& view_elevations, const std::vector<int>& view_azimuths,
                                    const ElevationSchedule& schedule, std::mt19937_64& rng);

/// Registers a set of images and expresses the result in the nominal frame
/// via a similarity fitted on every registered image's nominal pose.
struct AlignedRegistration {
    SparseMap map;                                // aligned
    std::vector<std::optional<CameraView>> poses; // parallel to the input
    int registered = 0;
};
AlignedRegistration register_and_align(const std::vector<AccumulatedImage>& images, const RegistrationConfig& config);

/// Direct baseline: joint registration of X^0 and X^N, report over both.
RegistrationReport register_direct(const RealImages& real, const RegistrationConfig& config);

/// Runs the full iterative loop. With a run directory, every stage writes
/// stage_{i}/ (generated PNGs, poses.txt, registration.json, scene
/// checkpoint, stage.json); completed stages whose fingerprint matches are
/// reused instead of recomputed. Registration failure throws
/// RegistrationFailed tagged with the stage.
/// Stage summaries, warnings, the training-image manifest and the real-image
/// registration; the direct baseline and a failure message when given.
std::string dragon_report_json(const DragonResult& result, const RegistrationReport* direct = nullptr,
                               const std::string& failure = {});

DragonResult run_dragon(const RealImages& real, const ElevationSchedule& schedule, const PipelineConfig& config,
                        const std::filesystem::path& run_dir = {});

} // namespace dragon
