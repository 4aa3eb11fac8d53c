// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/pipeline/dragon.hpp"

#include "dragon/core/error.hpp"
#include "dragon/core/text_io.hpp"
#include "dragon/render/rasterizer.hpp"
#include "dragon/sfm/sfm_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace dragon {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void ElevationSchedule::validate() const {
    if (max_elevation < 1) throw InvalidInput("schedule: max elevation must be at least 1");
    for (int i = 1; i < max_elevation; ++i) {
        auto it = targets.find(i);
        if (it == targets.end() || it->second.empty())
            throw InvalidInput("schedule: no poses for elevation " + std::to_string(i));
        for (const auto& v : it->second) v.validate();
    }
    for (const auto& [e, poses] : targets) {
        if (e <= 0 || e >= max_elevation)
            throw InvalidInput("schedule: elevation " + std::to_string(e) + " is not intermediate");
    }
}

ElevationSchedule ElevationSchedule::from_dataset(const ElevationDataset& dataset) {
    ElevationSchedule s;
    s.max_elevation = dataset.max_elevation();
    for (int e = 1; e < s.max_elevation; ++e) s.targets[e] = dataset.poses[e];
    s.validate();
    return s;
}

RealImages RealImages::from_dataset(const ElevationDataset& dataset) {
    const int n = dataset.max_elevation();
    if (n < 1) throw InvalidInput("dataset needs at least two elevations");
    RealImages real;
    for (int e : {0, n}) {
        if (dataset.images.size() <= static_cast<std::size_t>(e) || dataset.images[e].size() != dataset.poses[e].size())
            throw InvalidInput("dataset images are not loaded for elevation " + std::to_string(e));
        auto& out = e == 0 ? real.ground : real.drone;
        for (std::size_t k = 0; k < dataset.poses[e].size(); ++k) {
            out.push_back({ElevationDataset::image_name(e, static_cast<int>(k)), dataset.images[e][k],
                           dataset.poses[e][k], e, static_cast<int>(k), false});
        }
    }
    return real;
}

void PipelineConfig::validate() const {
    train.validate();
    weights.validate();
    if (min_stage_iterations < 1) throw InvalidInput("pipeline: min_stage_iterations must be positive");
    if (!(generated_weight > 0.0)) throw InvalidInput("pipeline: generated_weight must be positive");
}

int PipelineConfig::stage_iterations(int stages) const {
    const int per = train.total_iterations / std::max(stages, 1);
    return std::max(per, min_stage_iterations);
}

std::string PipelineConfig::fingerprint() const {
    std::ostringstream o;
    const auto& t = train;
    o << "train " << t.total_iterations << ' ' << format_double(t.lr_mean_start) << ' ' << format_double(t.lr_mean_end)
      << ' ' << format_double(t.lr_color) << ' ' << format_double(t.lr_opacity) << ' ' << format_double(t.lr_scale)
      << ' ' << format_double(t.lr_rotation) << ' ' << t.scale_mean_lr_by_extent << ' ' << t.densify << ' '
      << t.densify_interval << ' ' << t.densify_start << ' ' << format_double(t.densify_until_fraction) << ' '
      << t.opacity_reset_interval << ' ' << format_double(t.densify_grad_threshold) << ' '
      << format_double(t.prune_opacity_threshold) << ' ' << format_double(t.split_cutoff_fraction) << ' '
      << format_double(t.split_scale_divisor) << ' ' << format_double(t.prune_world_scale_fraction) << ' '
      << t.max_splats << ' ' << format_double(t.scene_extent) << ' ' << t.seed << '\n';
    o << "stage " << min_stage_iterations << " weights " << format_double(weights.lambda_ssim) << ' '
      << format_double(weights.lambda_ds) << ' ' << format_double(weights.lambda_clip) << " metrics " << metric_ds
      << ' ' << metric_clip << " generated " << format_double(generated_weight) << '\n';
    const auto& r = registration;
    o << "registration " << r.features.max_features << ' ' << r.features.min_size << ' '
      << format_double(r.features.contrast_threshold) << ' ' << format_double(r.matching.ratio) << ' '
      << format_double(r.matching.ransac.threshold) << ' ' << format_double(r.matching.ransac.confidence) << ' '
      << r.matching.ransac.max_iterations << ' ' << r.matching.min_inliers << ' '
      << format_double(r.matching.planar_ratio) << ' ' << format_double(r.pnp_threshold) << ' '
      << r.min_correspondences << ' ' << format_double(r.min_triangulation_angle) << ' '
      << format_double(r.max_reprojection_error) << ' ' << r.local_ba_interval << ' ' << r.local_ba_window << ' '
      << r.seed << '\n';
    o << "init " << format_double(init.fallback_scale) << ' ' << format_double(init.initial_opacity) << ' '
      << init.sh_degree << ' ' << format_double(init.background.x()) << ' ' << format_double(init.background.y())
      << ' ' << format_double(init.background.z()) << '\n';
    o << "literal " << literal_indexing << " perceptual_final " << perceptual_in_final << " seed " << seed << '\n';
    return o.str();
}

BasicResult run_basic(const Scene& init, const std::vector<Image>& images, const std::vector<CameraView>& poses,
                      const std::vector<CameraView>& test_poses, const TrainConfig& config,
                      const LossWeights& weights) {
    BasicResult r;
    r.scene = train_basic(init, images, poses, config, weights, &r.summary);
    r.renders.reserve(test_poses.size());
    for (const auto& p : test_poses) r.renders.push_back(render(r.scene, p).rgb);
    return r;
}

std::vector<AccumulatedImage> extrapolate_elevation(const Scene& scene, const std::vector<CameraView>& poses,
                                                    int elevation) {
    std::vector<AccumulatedImage> out;
    out.reserve(poses.size());
    for (std::size_t k = 0; k < poses.size(); ++k) {
        AccumulatedImage a;
        a.name = "gen_e" + std::to_string(elevation) + "_v" + std::to_string(k) + ".png";
        a.image = quantize_8bit(render(scene, poses[k]).rgb);
        a.nominal = poses[k];
        a.elevation = elevation;
        a.azimuth = static_cast<int>(k);
        a.generated = true;
        out.push_back(std::move(a));
    }
    return out;
}

TrainingTuple sample_training_tuple(const std::vector<int>& view_elevations, const std::vector<int>& view_azimuths,
                                    const ElevationSchedule& schedule, std::mt19937_64& rng) {
    if (view_elevations.empty() || view_elevations.size() != view_azimuths.size())
        throw InvalidInput("sample_training_tuple: no training views");
    // Group view indices by elevation; std::map keeps the draw order stable.
    std::map<int, std::vector<std::size_t>> by_elevation;
    for (std::size_t i = 0; i < view_elevations.size(); ++i) by_elevation[view_elevations[i]].push_back(i);
    std::uniform_int_distribution<std::size_t> pick_level(0, by_elevation.size() - 1);
    auto level = std::next(by_elevation.begin(), static_cast<std::ptrdiff_t>(pick_level(rng)));
    std::uniform_int_distribution<std::size_t> pick_view(0, level->second.size() - 1);
    TrainingTuple t;
    t.view = level->second[pick_view(rng)];
    t.elevation = level->first;
    auto adj = schedule.targets.find(t.elevation - 1);
    const int az = view_azimuths[t.view];
    if (adj != schedule.targets.end() && az >= 0 && static_cast<std::size_t>(az) < adj->second.size())
        t.adjacent = adj->second[static_cast<std::size_t>(az)];
    return t;
}

AlignedRegistration register_and_align(const std::vector<AccumulatedImage>& images,
                                       const RegistrationConfig& config) {
    std::vector<Image> pixels;
    std::vector<CameraView> nominal;
    pixels.reserve(images.size());
    for (const auto& a : images) {
        pixels.push_back(a.image);
        nominal.push_back(a.nominal);
    }
    SparseMap map = register_incremental(pixels, nominal, config);
    std::vector<CameraView> est, truth;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (map.views[i]) {
            est.push_back(*map.views[i]);
            truth.push_back(nominal[i]);
        }
    }
    if (est.size() < 3)
        throw RegistrationFailed("only " + std::to_string(est.size()) + " images registered; need 3 to align");
    const Similarity s = align_similarity(est, truth);
    AlignedRegistration out;
    for (auto& v : map.views) {
        if (v) {
            v = s.apply(*v);
            ++out.registered;
        }
    }
    for (auto& p : map.points) p.position = s.apply(p.position);
    out.poses = map.views;
    out.map = std::move(map);
    return out;
}

RegistrationReport register_direct(const RealImages& real, const RegistrationConfig& config) {
    std::vector<Image> pixels;
    std::vector<CameraView> truth;
    for (const auto* set : {&real.ground, &real.drone}) {
        for (const auto& a : *set) {
            pixels.push_back(a.image);
            truth.push_back(a.nominal);
        }
    }
    SparseMap map;
    try {
        map = register_incremental(pixels, truth, config);
    } catch (const RegistrationFailed&) {
        map.views.assign(pixels.size(), std::nullopt);
    }
    return registration_errors(map, truth);
}

namespace {

// Content hash of the real inputs and the schedule; part of every stage key.
std::uint64_t input_hash(const RealImages& real, const ElevationSchedule& schedule) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) h = (h ^ b[i]) * 1099511628211ull;
    };
    for (const auto* set : {&real.ground, &real.drone}) {
        for (const auto& a : *set) {
            mix(a.image.data.data(), a.image.data.size() * sizeof(double));
            mix(a.nominal.rotation_w2c.data(), 9 * sizeof(double));
            mix(a.nominal.translation_w2c.data(), 3 * sizeof(double));
        }
    }
    for (const auto& [e, poses] : schedule.targets) {
        mix(&e, sizeof e);
        for (const auto& v : poses) {
            mix(v.rotation_w2c.data(), 9 * sizeof(double));
            mix(v.translation_w2c.data(), 3 * sizeof(double));
        }
    }
    return h;
}

std::string stage_key(const PipelineConfig& config, std::uint64_t inputs, int stage) {
    std::ostringstream o;
    o << config.fingerprint() << "inputs " << inputs << " stage " << stage << '\n';
    return o.str();
}

json summary_json(const StageSummary& s) {
    return json{{"label", s.label},
                {"frontier", s.frontier},
                {"images", s.images},
                {"registered", s.registered},
                {"generated_new", s.generated_new},
                {"generated_new_registered", s.generated_new_registered},
                {"low_generated_registration", s.low_generated_registration},
                {"iterations", s.iterations},
                {"splats", s.splats}};
}

StageSummary summary_from_json(const json& j) {
    StageSummary s;
    s.label = j.at("label").get<std::string>();
    s.frontier = j.at("frontier").get<int>();
    s.images = j.at("images").get<int>();
    s.registered = j.at("registered").get<int>();
    s.generated_new = j.at("generated_new").get<int>();
    s.generated_new_registered = j.at("generated_new_registered").get<int>();
    s.low_generated_registration = j.at("low_generated_registration").get<bool>();
    s.iterations = j.at("iterations").get<long>();
    s.splats = j.at("splats").get<std::size_t>();
    return s;
}

std::vector<std::string> names_of(const std::vector<AccumulatedImage>& images) {
    std::vector<std::string> names;
    for (const auto& a : images) names.push_back(a.name);
    return names;
}

void write_pose_file(const fs::path& path, const std::vector<AccumulatedImage>& images,
                     const std::vector<std::optional<CameraView>>& poses) {
    std::vector<PoseRecord> records;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (!poses[i]) continue;
        PoseRecord r = PoseRecord::from_view(images[i].name, *poses[i]);
        r.elevation_index = images[i].elevation;
        records.push_back(std::move(r));
    }
    write_poses(path, records);
}

// Reuses a finished stage when its key matches; returns the generated images.
std::optional<std::pair<StageSummary, std::vector<AccumulatedImage>>>
try_resume(const fs::path& dir, const std::string& key, const std::vector<CameraView>& poses, int elevation) {
    const fs::path meta = dir / "stage.json";
    if (!fs::exists(meta)) return std::nullopt;
    json j;
    try {
        j = json::parse(read_text_file(meta));
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (!j.contains("key") || j["key"].get<std::string>() != key || !j.value("complete", false)) return std::nullopt;
    std::vector<AccumulatedImage> images;
    for (std::size_t k = 0; k < poses.size(); ++k) {
        AccumulatedImage a;
        a.name = "gen_e" + std::to_string(elevation) + "_v" + std::to_string(k) + ".png";
        const fs::path png = dir / a.name;
        if (!fs::exists(png)) return std::nullopt;
        a.image = read_png(png);
        a.nominal = poses[k];
        a.elevation = elevation;
        a.azimuth = static_cast<int>(k);
        a.generated = true;
        images.push_back(std::move(a));
    }
    return std::make_pair(summary_from_json(j.at("summary")), std::move(images));
}

struct StageTraining {
    Scene scene;
    TrainSummary summary;
};

// Trains a fresh scene from the aligned sparse cloud on the registered subset.
StageTraining train_stage(const std::vector<AccumulatedImage>& images,
                          const std::vector<std::optional<CameraView>>& poses, const SparseMap& map,
                          const ElevationSchedule& schedule, const PipelineConfig& config, int iterations,
                          std::uint64_t seed, bool perceptual) {
    std::vector<TrainView> views;
    std::vector<int> elevations, azimuths;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (!poses[i]) continue;
        const auto& a = images[i];
        views.push_back({a.image, *poses[i], a.generated ? config.generated_weight : 1.0, a.generated, a.name});
        elevations.push_back(a.elevation);
        azimuths.push_back(a.azimuth);
    }
    const auto cloud = map.colored_points();
    StageTraining out;
    out.scene = init_scene_from_points(cloud, config.init);

    TrainConfig tc = config.train;
    tc.total_iterations = iterations;
    tc.seed = seed;
    TrainState state;
    state.reset_for(out.scene, seed);

    TrainLoss loss;
    loss.weights = config.weights;
    std::unique_ptr<PerceptualMetric> ds, clip;
    if (!perceptual) loss.weights.lambda_ds = loss.weights.lambda_clip = 0.0;
    if (loss.weights.lambda_ds > 0.0) {
        ds = make_metric(config.metric_ds);
        loss.metric_ds = ds.get();
    }
    if (loss.weights.lambda_clip > 0.0) {
        clip = make_metric(config.metric_clip);
        loss.metric_clip = clip.get();
    }
    TrainSampler sampler = [&](std::mt19937_64& rng) {
        const TrainingTuple t = sample_training_tuple(elevations, azimuths, schedule, rng);
        return TrainSample{t.view, t.adjacent};
    };
    out.summary = train(out.scene, state, views, tc, loss, sampler);
    return out;
}

json registration_json(const RegistrationReport& r) {
    return json::parse(registration_report_json(r, {}));
}

} // namespace

std::string dragon_report_json(const DragonResult& result, const RegistrationReport* direct,
                               const std::string& failure) {
    json j;
    json stages = json::array();
    for (const auto& s : result.state.stages) stages.push_back(summary_json(s));
    j["stages"] = stages;
    j["warnings"] = result.warnings;
    j["training_images"] = result.training_images;
    j["registration"] = json::parse(registration_report_json(result.registration, result.c_train_names));
    if (direct) j["direct_registration"] = registration_json(*direct);
    if (!failure.empty()) j["failure"] = failure;
    return j.dump(2) + "\n";
}

DragonResult run_dragon(const RealImages& real, const ElevationSchedule& schedule, const PipelineConfig& config,
                        const fs::path& run_dir) {
    if (real.ground.empty() || real.drone.empty()) throw InvalidInput("run_dragon: ground and drone sets must be non-empty");
    schedule.validate();
    config.validate();
    const int n = schedule.max_elevation;
    for (const auto& a : real.drone) {
        if (a.elevation != n) throw InvalidInput("run_dragon: drone images must sit at the schedule's top elevation");
    }
    const std::uint64_t inputs = input_hash(real, schedule);
    const int per_stage = config.stage_iterations(n);
    const bool has_dir = !run_dir.empty();
    if (has_dir) fs::create_directories(run_dir);

    DragonResult result;
    PipelineState& st = result.state;
    st.x_cum = real.drone;
    st.cursor = n;

    auto fail = [&](const std::string& label, const std::string& what) {
        const std::string msg = label + ": " + what;
        if (has_dir) write_text_file(run_dir / "report.json", dragon_report_json(result, nullptr, msg));
        throw RegistrationFailed(msg);
    };

    for (int i = n - 1; i >= 1; --i) {
        const std::string label = "stage_" + std::to_string(i);
        // The literal reading renders one level lower than the loop index.
        const int target = config.literal_indexing ? i - 1 : i;
        std::vector<CameraView> render_poses;
        if (target == 0) {
            for (const auto& a : real.ground) render_poses.push_back(a.nominal);
        } else {
            render_poses = schedule.targets.at(target);
        }
        const fs::path dir = has_dir ? run_dir / label : fs::path{};
        const std::string key = stage_key(config, inputs, i);

        if (has_dir) {
            if (auto resumed = try_resume(dir, key, render_poses, target)) {
                st.stages.push_back(resumed->first);
                for (auto& a : resumed->second) st.x_cum.push_back(std::move(a));
                st.cursor = target;
                if (st.stages.back().low_generated_registration)
                    result.warnings.push_back(label + ": fewer than half of the newest generated views registered");
                continue;
            }
        }

        AlignedRegistration reg;
        try {
            reg = register_and_align(st.x_cum, config.registration);
        } catch (const RegistrationFailed& e) {
            fail(label, e.what());
        }
        st.c_cum = reg.poses;

        StageSummary summary;
        summary.label = label;
        summary.frontier = target;
        summary.images = static_cast<int>(st.x_cum.size());
        summary.registered = reg.registered;
        for (std::size_t k = 0; k < st.x_cum.size(); ++k) {
            if (st.x_cum[k].generated && st.x_cum[k].elevation == st.cursor) {
                ++summary.generated_new;
                if (reg.poses[k]) ++summary.generated_new_registered;
            }
        }
        if (summary.generated_new > 0 && 2 * summary.generated_new_registered < summary.generated_new) {
            summary.low_generated_registration = true;
            result.warnings.push_back(label + ": fewer than half of the newest generated views registered");
        }

        const std::uint64_t seed = config.seed * 1000003ull + static_cast<std::uint64_t>(i);
        StageTraining trained =
            train_stage(st.x_cum, reg.poses, reg.map, schedule, config, per_stage, seed, true);
        summary.iterations = trained.summary.iterations;
        summary.splats = trained.scene.size();

        auto generated = extrapolate_elevation(trained.scene, render_poses, target);
        if (has_dir) {
            fs::create_directories(dir);
            for (const auto& a : generated) write_png(dir / a.name, a.image);
            write_pose_file(dir / "poses.txt", st.x_cum, reg.poses);
            RegistrationReport rr = registration_errors(reg.map, [&] {
                std::vector<CameraView> t;
                for (const auto& a : st.x_cum) t.push_back(a.nominal);
                return t;
            }());
            write_text_file(dir / "registration.json", registration_report_json(rr, names_of(st.x_cum)));
            save_scene(dir / "scene.txt", trained.scene);
            json meta{{"key", key}, {"complete", true}, {"summary", summary_json(summary)}};
            write_text_file(dir / "stage.json", meta.dump(2) + "\n");
        }
        st.stages.push_back(summary);
        for (auto& a : generated) st.x_cum.push_back(std::move(a));
        st.cursor = target;
    }

    // Final joint registration with the ground ring.
    std::vector<AccumulatedImage> joint = st.x_cum;
    for (const auto& a : real.ground) joint.push_back(a);
    AlignedRegistration reg;
    try {
        reg = register_and_align(joint, config.registration);
    } catch (const RegistrationFailed& e) {
        fail("final", e.what());
    }

    std::vector<AccumulatedImage> real_images;
    std::vector<std::optional<CameraView>> real_poses;
    SparseMap real_map;
    std::vector<CameraView> real_truth;
    // Ground first, then drone: the order of c_train.
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < joint.size(); ++k) {
            const auto& a = joint[k];
            if (a.generated || (pass == 0) != (a.elevation == 0)) continue;
            real_images.push_back(a);
            real_poses.push_back(reg.poses[k]);
            real_truth.push_back(a.nominal);
        }
    }
    real_map.views = real_poses;
    result.registration = registration_errors(real_map, real_truth);
    result.c_train = real_poses;
    result.c_train_names = names_of(real_images);

    StageSummary final_summary;
    final_summary.label = "final";
    final_summary.frontier = -1;
    final_summary.images = static_cast<int>(joint.size());
    final_summary.registered = reg.registered;
    for (std::size_t k = 0; k < joint.size(); ++k) {
        if (joint[k].generated && joint[k].elevation == st.cursor) {
            ++final_summary.generated_new;
            if (reg.poses[k]) ++final_summary.generated_new_registered;
        }
    }
    if (final_summary.generated_new > 0 && 2 * final_summary.generated_new_registered < final_summary.generated_new) {
        final_summary.low_generated_registration = true;
        result.warnings.push_back("final: fewer than half of the newest generated views registered");
    }

    // Final model: real images only, with their inferred poses.
    SparseMap cloud_map;
    cloud_map.points = reg.map.points;
    const std::uint64_t seed = config.seed * 1000003ull;
    StageTraining trained = train_stage(real_images, real_poses, cloud_map, schedule, config, per_stage, seed,
                                        config.perceptual_in_final);
    for (std::size_t k = 0; k < real_images.size(); ++k) {
        if (real_poses[k]) result.training_images.push_back(real_images[k].name);
    }
    final_summary.iterations = trained.summary.iterations;
    final_summary.splats = trained.scene.size();
    st.stages.push_back(final_summary);
    st.c_cum = reg.poses;
    result.scene = std::move(trained.scene);

    if (has_dir) {
        const fs::path dir = run_dir / "final";
        fs::create_directories(dir);
        write_pose_file(dir / "poses.txt", real_images, real_poses);
        write_text_file(dir / "registration.json",
                        registration_report_json(result.registration, result.c_train_names));
        save_scene(dir / "scene.txt", result.scene);
        std::ostringstream manifest;
        for (const auto& name : result.training_images) manifest << name << '\n';
        write_text_file(dir / "training_images.txt", manifest.str());
        write_text_file(run_dir / "report.json", dragon_report_json(result, nullptr, {}));
    }
    return result;
}

} // namespace dragon
