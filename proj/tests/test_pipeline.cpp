// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/core/error.hpp"
#include "dragon/core/text_io.hpp"
#include "dragon/pipeline/dragon.hpp"
#include "dragon/render/rasterizer.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <map>

using namespace dragon;
namespace fs = std::filesystem;

namespace {

ElevationSchedule schedule_of(int n, int per_orbit) {
    DatasetConfig c;
    c.orbits = orbits_for_elevations(n + 1, per_orbit);
    ElevationSchedule s;
    s.max_elevation = n;
    for (int e = 1; e < n; ++e) s.targets[e] = generate_orbit_poses(c.orbits[e], Vec3::Zero(), c.intrinsics);
    return s;
}

Scene small_scene() {
    Scene s;
    s.background = Vec3(0.7, 0.78, 0.88);
    for (int i = 0; i < 5; ++i) {
        GaussianSplat g;
        g.mean = Vec3(0.2 * i - 0.4, 0.5, 0.1 * i);
        g.log_scale = Vec3::Constant(std::log(0.15));
        g.opacity_logit = 1.0;
        g.color = Vec3(0.2 * i, 0.5, 1.0 - 0.2 * i);
        s.splats.push_back(g);
    }
    return s;
}

// Three elevations, a drone ring dense enough to register on its own.
const ElevationDataset& tiny_dataset() {
    static const ElevationDataset d = [] {
        DatasetConfig c;
        c.orbits = orbits_for_elevations(3, 16);
        c.supersample = 1;
        return generate_dataset(c);
    }();
    return d;
}

PipelineConfig tiny_config() {
    PipelineConfig p;
    p.train.total_iterations = 120;
    p.train.densify = false;
    p.min_stage_iterations = 60;
    p.seed = 5;
    return p;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("dragon_pipeline_" + name);
    fs::remove_all(d);
    return d;
}

} // namespace

TEST(Sampler, OnlyDroneAvailableAlwaysPicksTop) {
    const ElevationSchedule s = schedule_of(4, 6);
    std::mt19937_64 rng(1);
    const std::vector<int> elev(6, 4), az{0, 1, 2, 3, 4, 5};
    for (int k = 0; k < 200; ++k) {
        const TrainingTuple t = sample_training_tuple(elev, az, s, rng);
        EXPECT_EQ(t.elevation, 4);
        // elevation 3 is scheduled, so the drone view is anchored to it
        ASSERT_TRUE(t.adjacent.has_value());
        EXPECT_EQ(t.adjacent->center(), s.targets.at(3)[az[t.view]].center());
    }
}

TEST(Sampler, AdjacentIsNextElevationTowardGround) {
    const ElevationSchedule s = schedule_of(4, 6);
    std::mt19937_64 rng(2);
    std::vector<int> elev, az;
    for (int e : {4, 3, 2})
        for (int k = 0; k < 6; ++k) elev.push_back(e), az.push_back(k);
    for (int k = 0; k < 300; ++k) {
        const TrainingTuple t = sample_training_tuple(elev, az, s, rng);
        EXPECT_EQ(t.elevation, elev[t.view]);
        if (t.elevation == 2) {
            ASSERT_TRUE(t.adjacent.has_value());
            EXPECT_EQ(t.adjacent->elevation_index, 1);
            EXPECT_EQ(t.adjacent->center(), s.targets.at(1)[az[t.view]].center());
        }
    }
    // Elevation 1 has no scheduled neighbor below it.
    const std::vector<int> low{1}, low_az{0};
    EXPECT_FALSE(sample_training_tuple(low, low_az, s, rng).adjacent.has_value());
}

TEST(Sampler, ElevationsDrawnUniformly) {
    const ElevationSchedule s = schedule_of(4, 24);
    std::vector<int> elev, az;
    // Unequal view counts per level: the draw is uniform over levels, not views.
    const std::map<int, int> counts{{4, 24}, {3, 10}, {2, 3}};
    for (auto [e, c] : counts)
        for (int k = 0; k < c; ++k) elev.push_back(e), az.push_back(k);
    std::mt19937_64 rng(3);
    std::map<int, int> hits;
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) ++hits[sample_training_tuple(elev, az, s, rng).elevation];
    for (auto [e, c] : counts) EXPECT_NEAR(hits[e] / static_cast<double>(draws), 1.0 / 3.0, 0.02) << e;
}

TEST(Sampler, EmptyInputRejected) {
    std::mt19937_64 rng(4);
    EXPECT_THROW(sample_training_tuple({}, {}, schedule_of(2, 4), rng), InvalidInput);
}

TEST(Schedule, ValidatesIntermediateKeys) {
    ElevationSchedule s = schedule_of(4, 4);
    EXPECT_NO_THROW(s.validate());
    ElevationSchedule missing = s;
    missing.targets.erase(2);
    EXPECT_THROW(missing.validate(), InvalidInput);
    ElevationSchedule extra = s;
    extra.targets[0] = s.targets[1];
    EXPECT_THROW(extra.validate(), InvalidInput);
    ElevationSchedule top = s;
    top.targets[4] = s.targets[1];
    EXPECT_THROW(top.validate(), InvalidInput);
    EXPECT_NO_THROW(schedule_of(1, 4).validate());
}

TEST(Extrapolate, EmptyPosesGiveNothing) {
    EXPECT_TRUE(extrapolate_elevation(small_scene(), {}, 2).empty());
}

TEST(Extrapolate, TagsAndQuantizes) {
    const auto poses = schedule_of(3, 4).targets.at(2);
    const auto out = extrapolate_elevation(small_scene(), poses, 2);
    ASSERT_EQ(out.size(), poses.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        EXPECT_TRUE(out[k].generated);
        EXPECT_EQ(out[k].elevation, 2);
        EXPECT_EQ(out[k].azimuth, static_cast<int>(k));
        EXPECT_EQ(out[k].name, "gen_e2_v" + std::to_string(k) + ".png");
        EXPECT_EQ(out[k].image, quantize_8bit(out[k].image));
        EXPECT_EQ(out[k].image, quantize_8bit(render(small_scene(), poses[k]).rgb));
    }
}

TEST(RunBasic, EmptyTestPosesGiveNoRenders) {
    const Scene init = small_scene();
    const auto poses = schedule_of(3, 4).targets.at(1);
    std::vector<Image> images;
    for (const auto& p : poses) images.push_back(render(init, p).rgb);
    TrainConfig tc;
    tc.total_iterations = 5;
    tc.densify = false;
    const BasicResult r = run_basic(init, images, poses, {}, tc);
    EXPECT_TRUE(r.renders.empty());
    const BasicResult again = run_basic(init, images, poses, poses, tc);
    const BasicResult twice = run_basic(init, images, poses, poses, tc);
    ASSERT_EQ(again.renders.size(), poses.size());
    for (std::size_t k = 0; k < poses.size(); ++k) EXPECT_EQ(again.renders[k], twice.renders[k]);
}

TEST(PipelineConfigTest, StageIterationsRespectFloor) {
    PipelineConfig p;
    p.train.total_iterations = 3000;
    EXPECT_EQ(p.stage_iterations(4), 750);
    EXPECT_EQ(p.stage_iterations(10), 500);
    p.generated_weight = -1.0;
    EXPECT_THROW(p.validate(), InvalidInput);
}

// One small end-to-end run covers provenance, frontier and resume contracts.
TEST(RunDragon, ProvenanceFrontierAndResume) {
    const ElevationDataset& d = tiny_dataset();
    const RealImages real = RealImages::from_dataset(d);
    const ElevationSchedule schedule = ElevationSchedule::from_dataset(d);
    const PipelineConfig cfg = tiny_config();
    const fs::path dir = fresh_dir("resume");

    const DragonResult first = run_dragon(real, schedule, cfg, dir);

    // Final training uses real images only.
    ASSERT_FALSE(first.training_images.empty());
    for (const auto& name : first.training_images) EXPECT_EQ(name.find("gen_"), std::string::npos) << name;
    const std::string manifest = read_text_file(dir / "final" / "training_images.txt");
    EXPECT_EQ(manifest.find("gen_"), std::string::npos);

    // C_train covers exactly the real images, ground first.
    EXPECT_EQ(first.c_train.size(), real.ground.size() + real.drone.size());
    EXPECT_EQ(first.registration.total, static_cast<int>(real.ground.size() + real.drone.size()));
    EXPECT_EQ(first.c_train_names.front(), real.ground.front().name);

    // Monotone frontier: elevations {1..N} all present after the loop.
    std::map<int, int> per_level;
    for (const auto& a : first.state.x_cum) {
        ++per_level[a.elevation];
        EXPECT_EQ(a.generated, a.elevation != d.max_elevation());
    }
    for (int e = 1; e <= d.max_elevation(); ++e) EXPECT_GT(per_level[e], 0) << e;
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    EXPECT_TRUE(fs::exists(dir / "stage_1" / "stage.json"));

    // Resume from the completed stage directory: identical accumulation.
    const DragonResult resumed = run_dragon(real, schedule, cfg, dir);
    ASSERT_EQ(resumed.state.x_cum.size(), first.state.x_cum.size());
    for (std::size_t k = 0; k < first.state.x_cum.size(); ++k) {
        EXPECT_EQ(resumed.state.x_cum[k].name, first.state.x_cum[k].name);
        EXPECT_EQ(resumed.state.x_cum[k].image, first.state.x_cum[k].image);
    }

    // A fresh run with the same seed agrees bitwise.
    const fs::path other = fresh_dir("fresh");
    const DragonResult again = run_dragon(real, schedule, cfg, other);
    EXPECT_EQ(read_text_file(other / "report.json"), read_text_file(dir / "report.json"));
    fs::remove_all(dir);
    fs::remove_all(other);
}

TEST(RunDragon, RejectsEmptyRealSets) {
    const ElevationDataset& d = tiny_dataset();
    RealImages real = RealImages::from_dataset(d);
    real.ground.clear();
    EXPECT_THROW(run_dragon(real, ElevationSchedule::from_dataset(d), tiny_config()), InvalidInput);
}
