// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/cli/commands.hpp"

#include "dragon/cli/run_config.hpp"
#include "dragon/core/error.hpp"
#include "dragon/core/parallel.hpp"
#include "dragon/core/text_io.hpp"
#include "dragon/eval/metrics.hpp"
#include "dragon/render/rasterizer.hpp"
#include "dragon/sfm/sfm_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace dragon {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct SharedOptions {
    std::optional<long long> seed;
    std::optional<int> threads;
    std::string config_file;
    std::string out;
    bool deterministic = false;
    bool print_config = false;
    std::vector<std::string> sets; // key=value
};

RunConfig resolve(const SharedOptions& shared, const std::vector<std::pair<std::string, std::string>>& flags) {
    RunConfig rc;
    if (!shared.config_file.empty()) rc.merge_text(read_text_file(shared.config_file));
    for (const auto& kv : shared.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InvalidInput("--set expects key=value, got '" + kv + "'");
        rc.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (shared.seed) rc.set("seed", std::to_string(*shared.seed));
    if (shared.threads) rc.set("threads", std::to_string(*shared.threads));
    if (shared.deterministic) rc.set("deterministic", "true");
    for (const auto& [k, v] : flags) rc.set(k, v);
    return rc;
}

void apply_runtime(const RunConfig& rc) {
    // Results never depend on the worker count; the flag only bounds it.
    set_max_threads(rc.get_bool("deterministic") ? 1 : static_cast<int>(rc.get_int("threads")));
}

fs::path require_out(const SharedOptions& shared) {
    if (shared.out.empty()) throw InvalidInput("--out is required");
    fs::create_directories(shared.out);
    return shared.out;
}

void write_config(const fs::path& dir, const RunConfig& rc) { write_text_file(dir / "run_config.txt", rc.format()); }

std::vector<int> parse_index_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(static_cast<int>(parse_int(tok)));
    }
    return out;
}

// Elevation parsed from a dataset image name "e{E}_v{I}.png"; -1 otherwise.
int elevation_from_name(const std::string& name) {
    if (name.size() < 2 || name[0] != 'e') return -1;
    const auto us = name.find('_');
    if (us == std::string::npos) return -1;
    try {
        return static_cast<int>(parse_int(std::string_view(name).substr(1, us - 1)));
    } catch (const IoError&) {
        return -1;
    }
}

Intrinsics camera_intrinsics(const RunConfig& rc) {
    Intrinsics in;
    in.width = static_cast<int>(rc.get_int("camera.width"));
    in.height = static_cast<int>(rc.get_int("camera.height"));
    in.fx = rc.get_double("camera.fx");
    in.fy = rc.get_double("camera.fy");
    in.cx = rc.get_double("camera.cx");
    in.cy = rc.get_double("camera.cy");
    in.validate();
    return in;
}

std::map<std::string, PoseRecord> records_by_name(const std::vector<PoseRecord>& records) {
    std::map<std::string, PoseRecord> out;
    for (const auto& r : records) out[r.name] = r;
    return out;
}

std::vector<ColoredPoint> cloud_in_frame(const SparseMap& map, const Similarity* s) {
    std::vector<ColoredPoint> pts = map.colored_points();
    if (s)
        for (auto& p : pts) p.position = s->apply(p.position);
    return pts;
}

// ---- synth -----------------------------------------------------------------

int cmd_synth(const RunConfig& rc, const SharedOptions& shared, std::ostream& out) {
    const fs::path dir = require_out(shared);
    const DatasetConfig config = rc.dataset_config();
    const ElevationDataset ds = build_dataset(config, dir);
    write_config(dir, rc);
    out << "wrote " << ds.poses.size() << " elevations x " << ds.poses[0].size() << " images to " << dir.string()
        << '\n';
    return kExitOk;
}

// ---- register --------------------------------------------------------------

struct RegisterOptions {
    std::string input;
    std::string gt;
    std::string elevations; // comma list, dataset inputs only
};

int cmd_register(const RunConfig& rc, const SharedOptions& shared, const RegisterOptions& opt, std::ostream& out,
                 std::ostream& err) {
    const fs::path dir = require_out(shared);
    write_config(dir, rc);
    fs::path image_dir = opt.input;
    Intrinsics intr = camera_intrinsics(rc);
    if (fs::exists(fs::path(opt.input) / "manifest")) {
        intr = parse_manifest(read_text_file(fs::path(opt.input) / "manifest")).intrinsics;
        image_dir = fs::path(opt.input) / "images";
    }
    if (!fs::is_directory(image_dir)) throw InvalidInput("not a directory: " + image_dir.string());
    std::set<int> wanted;
    for (int e : parse_index_list(opt.elevations)) wanted.insert(e);

    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(image_dir)) {
        if (entry.path().extension() != ".png") continue;
        const std::string name = entry.path().filename().string();
        if (!wanted.empty() && !wanted.count(elevation_from_name(name))) continue;
        names.push_back(name);
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw InvalidInput("no images selected in " + image_dir.string());
    std::vector<Image> images;
    for (const auto& n : names) images.push_back(read_png(image_dir / n));
    const std::vector<CameraView> cams(names.size(), intr.apply(CameraView{}));

    SparseMap map;
    std::string failure;
    try {
        map = register_incremental(images, cams, rc.registration_config());
    } catch (const RegistrationFailed& e) {
        failure = e.what();
        map.views.assign(names.size(), std::nullopt);
    }

    RegistrationReport report;
    report.total = static_cast<int>(names.size());
    report.registered = map.registered_count();
    report.matched_fraction = map.matched_fraction();
    std::map<std::string, PoseRecord> truth;
    if (!opt.gt.empty()) {
        truth = records_by_name(read_poses(opt.gt));
        std::vector<CameraView> gt_views;
        for (std::size_t i = 0; i < names.size(); ++i) {
            auto it = truth.find(names[i]);
            if (it == truth.end()) {
                err << "error: " << names[i] << ": no ground-truth pose\n";
                failure = failure.empty() ? "missing ground-truth poses" : failure;
                continue;
            }
            gt_views.push_back(it->second.view(intr.apply(CameraView{})));
        }
        if (gt_views.size() == names.size()) report = registration_errors(map, gt_views);
    }

    const Similarity* frame = report.aligned ? &report.alignment : nullptr;
    std::vector<PoseRecord> records;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (!map.views[i]) continue;
        const CameraView v = frame ? frame->apply(*map.views[i]) : *map.views[i];
        PoseRecord r = PoseRecord::from_view(names[i], v);
        auto it = truth.find(names[i]);
        r.elevation_index = it != truth.end() ? it->second.elevation_index : std::max(0, elevation_from_name(names[i]));
        records.push_back(std::move(r));
    }
    write_poses(dir / "poses.txt", records);
    write_ply(dir / "points.ply", cloud_in_frame(map, frame));
    json j = json::parse(registration_report_json(report, names));
    if (!failure.empty()) j["failure"] = failure;
    write_text_file(dir / "registration.json", j.dump(2) + "\n");

    out << "registered " << report.registered << "/" << report.total << " (matched fraction "
        << format_double(report.matched_fraction) << ")\n";
    if (report.aligned)
        out << "rotation error " << format_double(report.rotation_mean) << " deg, position error "
            << format_double(report.position_mean) << " m\n";
    if (!failure.empty()) {
        err << "error: " << failure << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

// ---- train -----------------------------------------------------------------

struct TrainOptions {
    std::string dataset;
    std::string poses;  // optional pose file overriding ground truth
    std::string points; // optional PLY for initialization
};

int cmd_train(const RunConfig& rc, const SharedOptions& shared, const TrainOptions& opt, std::ostream& out,
              std::ostream& err) {
    const fs::path dir = require_out(shared);
    write_config(dir, rc);
    const ElevationDataset ds = load_dataset(opt.dataset, true);
    std::map<std::string, PoseRecord> given;
    if (!opt.poses.empty()) given = records_by_name(read_poses(opt.poses));

    std::vector<Image> images;
    std::vector<CameraView> poses;
    std::vector<std::string> names;
    int missing = 0;
    for (int e : ds.split.train) {
        for (std::size_t k = 0; k < ds.poses[e].size(); ++k) {
            const std::string name = ElevationDataset::image_name(e, static_cast<int>(k));
            CameraView pose = ds.poses[e][k];
            if (!opt.poses.empty()) {
                auto it = given.find(name);
                if (it == given.end()) {
                    ++missing;
                    continue;
                }
                pose = it->second.view(ds.poses[e][k]);
            }
            images.push_back(ds.images[e][k]);
            poses.push_back(pose);
            names.push_back(name);
        }
    }
    if (missing > 0) err << "warning: " << missing << " training images have no pose and are skipped\n";
    if (images.empty()) throw InvalidInput("no training images with poses");

    std::vector<ColoredPoint> cloud;
    if (!opt.points.empty()) {
        cloud = read_ply(opt.points);
    } else {
        // Sparse cloud from the training images, moved into the pose frame.
        SparseMap map = register_incremental(images, poses, rc.registration_config());
        std::vector<CameraView> est, truth;
        for (std::size_t i = 0; i < images.size(); ++i)
            if (map.views[i]) {
                est.push_back(*map.views[i]);
                truth.push_back(poses[i]);
            }
        if (est.size() < 3) throw RegistrationFailed("too few images registered to place the initial cloud");
        const Similarity s = align_similarity(est, truth);
        cloud = cloud_in_frame(map, &s);
    }
    const Scene init = init_scene_from_points(cloud, rc.init_config());
    TrainSummary summary;
    const Scene scene = train_basic(init, images, poses, rc.train_config(), rc.loss_weights(), &summary);
    save_scene(dir / "scene.txt", scene);
    std::ostringstream log;
    write_train_log_csv(log, summary.log);
    write_text_file(dir / "train_log.csv", log.str());
    std::ostringstream manifest;
    for (const auto& n : names) manifest << n << '\n';
    write_text_file(dir / "training_images.txt", manifest.str());
    out << "trained " << summary.iterations << " iterations on " << images.size() << " images, " << scene.size()
        << " splats\n";
    return kExitOk;
}

// ---- render ----------------------------------------------------------------

struct RenderOptions {
    std::string scene;
    std::string dataset;
    std::string elevations;
};

void render_dataset_poses(const Scene& scene, const ElevationDataset& ds, const std::vector<int>& elevations,
                          const fs::path& dir) {
    fs::create_directories(dir);
    for (int e : elevations) {
        if (e < 0 || e > ds.max_elevation()) throw InvalidInput("elevation " + std::to_string(e) + " is not in the dataset");
        for (std::size_t k = 0; k < ds.poses[e].size(); ++k)
            write_png(dir / ElevationDataset::image_name(e, static_cast<int>(k)), render(scene, ds.poses[e][k]).rgb);
    }
}

int cmd_render(const RunConfig& rc, const SharedOptions& shared, const RenderOptions& opt, std::ostream& out) {
    const fs::path dir = require_out(shared);
    write_config(dir, rc);
    const Scene scene = load_scene(opt.scene);
    const ElevationDataset ds = load_dataset(opt.dataset, false);
    std::vector<int> elevations = parse_index_list(opt.elevations);
    if (elevations.empty()) elevations = ds.split.test;
    render_dataset_poses(scene, ds, elevations, dir);
    out << "rendered " << ds.count(elevations) << " views to " << dir.string() << '\n';
    return kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalOptions {
    std::string renders;
    std::string dataset;
    std::string method = "method";
};

// Evaluates every test image that has a render; missing or unreadable
// renders are listed individually and make the result partial.
MetricReport evaluate_directory(const fs::path& renders, const ElevationDataset& ds, const std::string& method,
                                const PerceptualMetric& metric, std::vector<std::string>& errors) {
    std::vector<Image> r, gt;
    std::vector<int> elev;
    std::vector<std::string> names;
    for (int e : ds.split.test) {
        for (std::size_t k = 0; k < ds.poses[e].size(); ++k) {
            const std::string name = ElevationDataset::image_name(e, static_cast<int>(k));
            const fs::path p = renders / name;
            if (!fs::exists(p)) {
                errors.push_back(name + ": missing render");
                continue;
            }
            Image img;
            try {
                img = read_png(p);
            } catch (const Error& ex) {
                errors.push_back(name + ": " + ex.what());
                continue;
            }
            if (!img.same_shape(ds.images[e][k])) {
                errors.push_back(name + ": size does not match the ground truth");
                continue;
            }
            r.push_back(std::move(img));
            gt.push_back(ds.images[e][k]);
            elev.push_back(e);
            names.push_back(name);
        }
    }
    return evaluate_method(method, r, gt, elev, names, ds.max_elevation(), metric);
}

std::string eval_json(const MetricReport& report, const std::vector<std::string>& errors) {
    json j = json::parse(metric_report_json(report));
    j["partial"] = !errors.empty();
    j["errors"] = errors;
    return j.dump(2) + "\n";
}

int cmd_eval(const RunConfig& rc, const SharedOptions& shared, const EvalOptions& opt, std::ostream& out,
             std::ostream& err) {
    const fs::path dir = require_out(shared);
    write_config(dir, rc);
    const ElevationDataset ds = load_dataset(opt.dataset, true);
    const auto metric = make_metric(rc.get("eval.metric"));
    std::vector<std::string> errors;
    const MetricReport report = evaluate_directory(opt.renders, ds, opt.method, *metric, errors);
    write_text_file(dir / "metrics.csv", metrics_csv({report}));
    write_text_file(dir / "report.json", eval_json(report, errors));
    out << compare_methods({report}).text;
    for (const auto& e : errors) err << "error: " << e << '\n';
    return errors.empty() ? kExitOk : kExitFailure;
}

// ---- compare ---------------------------------------------------------------

struct CompareOptions {
    std::vector<std::string> inputs; // metrics.csv files or directories holding one
    int max_elevation = 4;
};

int cmd_compare(const RunConfig& rc, const SharedOptions& shared, const CompareOptions& opt, std::ostream& out) {
    std::vector<MetricReport> reports;
    for (const auto& in : opt.inputs) {
        fs::path p = in;
        if (fs::is_directory(p)) p /= "metrics.csv";
        for (auto& r : parse_metrics_csv(read_text_file(p), opt.max_elevation, rc.get("eval.metric")))
            reports.push_back(std::move(r));
    }
    const Comparison c = compare_methods(reports);
    out << c.text;
    if (!shared.out.empty()) {
        const fs::path dir = require_out(shared);
        write_config(dir, rc);
        write_text_file(dir / "comparison.csv", c.csv);
        write_text_file(dir / "comparison.txt", c.text);
    }
    return kExitOk;
}

// ---- dragon ----------------------------------------------------------------

struct DragonOptions {
    std::string dataset;
    std::string method;
};

int cmd_dragon(const RunConfig& rc, const SharedOptions& shared, const DragonOptions& opt, std::ostream& out,
               std::ostream& err) {
    const fs::path dir = require_out(shared);
    write_config(dir, rc);
    const ElevationDataset ds = load_dataset(opt.dataset, true);
    const RealImages real = RealImages::from_dataset(ds);
    const ElevationSchedule schedule = ElevationSchedule::from_dataset(ds);
    const PipelineConfig pc = rc.pipeline_config();

    const RegistrationReport direct = register_direct(real, pc.registration);
    DragonResult result;
    try {
        result = run_dragon(real, schedule, pc, dir);
    } catch (const RegistrationFailed& e) {
        // run_dragon already left a partial report.json.
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    for (const auto& w : result.warnings) err << "warning: " << w << '\n';

    render_dataset_poses(result.scene, ds, ds.split.test, dir / "renders");
    const auto metric = make_metric(rc.get("eval.metric"));
    std::vector<std::string> errors;
    const std::string method =
        !opt.method.empty() ? opt.method : (pc.weights.lambda_ds > 0.0 || pc.weights.lambda_clip > 0.0 ? "dragon" : "dragon-vanilla");
    const MetricReport report = evaluate_directory(dir / "renders", ds, method, *metric, errors);
    write_text_file(dir / "metrics.csv", metrics_csv({report}));

    json j = json::parse(dragon_report_json(result, &direct));
    j["evaluation"] = json::parse(metric_report_json(report));
    write_text_file(dir / "report.json", j.dump(2) + "\n");

    out << "direct registration: " << direct.registered << "/" << direct.total << " (matched fraction "
        << format_double(direct.matched_fraction) << ")\n";
    out << "dragon registration: " << result.registration.registered << "/" << result.registration.total
        << " (matched fraction " << format_double(result.registration.matched_fraction) << ")\n";
    out << compare_methods({report}).text;
    return errors.empty() ? kExitOk : kExitFailure;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Iterative elevation-bridging gaussian splatting pipeline"};
    app.require_subcommand(0, 1); // --print-config alone is allowed
    SharedOptions shared;
    app.add_option("--seed", shared.seed, "Root seed; every module derives its own stream from it");
    app.add_option("--threads", shared.threads, "Upper bound on worker threads (0 = hardware)");
    app.add_option("--config", shared.config_file, "Config file of 'key = value' lines");
    app.add_option("--out", shared.out, "Output directory");
    app.add_flag("--deterministic", shared.deterministic, "Run single-threaded");
    app.add_flag("--print-config", shared.print_config, "Print the resolved config and exit");
    app.add_option("--set", shared.sets, "Override one config key (key=value); repeatable");

    std::vector<std::pair<std::string, std::string>> flags;

    auto* synth = app.add_subcommand("synth", "Render a synthetic multi-elevation dataset")->fallthrough();
    std::optional<int> elevations;
    std::string building;
    synth->add_option("--elevations", elevations, "Number of elevation rings (2 = ground and drone only)");
    synth->add_option("--building", building, "Building name");

    auto* reg = app.add_subcommand("register", "Register images with structure from motion")->fallthrough();
    RegisterOptions reg_opt;
    reg->add_option("images", reg_opt.input, "Image directory or dataset directory")->required();
    reg->add_option("--gt", reg_opt.gt, "Ground-truth pose file; adds error statistics");
    reg->add_option("--elevations", reg_opt.elevations, "Comma-separated elevations to use (dataset input)");

    auto* train = app.add_subcommand("train", "Train on the dataset's training elevations")->fallthrough();
    TrainOptions train_opt;
    std::optional<int> iterations;
    train->add_option("dataset", train_opt.dataset, "Dataset directory")->required();
    train->add_option("--poses", train_opt.poses, "Pose file to use instead of ground truth");
    train->add_option("--points", train_opt.points, "PLY point cloud for initialization");
    train->add_option("--iterations", iterations, "Training iterations");

    auto* dragon = app.add_subcommand("dragon", "Run the full elevation-bridging pipeline")->fallthrough();
    DragonOptions dragon_opt;
    bool no_perceptual = false;
    dragon->add_option("dataset", dragon_opt.dataset, "Dataset directory")->required();
    dragon->add_flag("--no-perceptual", no_perceptual, "Disable both perceptual terms");
    dragon->add_option("--method", dragon_opt.method, "Method label in the reports");
    dragon->add_option("--iterations", iterations, "Total training iterations");

    auto* rend = app.add_subcommand("render", "Render a trained scene at dataset poses")->fallthrough();
    RenderOptions render_opt;
    rend->add_option("scene", render_opt.scene, "Scene file")->required();
    rend->add_option("dataset", render_opt.dataset, "Dataset directory")->required();
    rend->add_option("--elevations", render_opt.elevations, "Comma-separated elevations (default: all)");

    auto* eval = app.add_subcommand("eval", "Score renders against a dataset")->fallthrough();
    EvalOptions eval_opt;
    eval->add_option("renders", eval_opt.renders, "Directory of renders named like the dataset images")->required();
    eval->add_option("dataset", eval_opt.dataset, "Dataset directory")->required();
    eval->add_option("--method", eval_opt.method, "Method label");

    auto* cmp = app.add_subcommand("compare", "Compare metrics of several methods")->fallthrough();
    CompareOptions cmp_opt;
    cmp->add_option("inputs", cmp_opt.inputs, "metrics.csv files or directories")->required();
    cmp->add_option("--max-elevation", cmp_opt.max_elevation, "Highest elevation index of the test set");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }
    if (app.get_subcommands().empty() && !shared.print_config) {
        err << "error: a subcommand is required\n" << app.help();
        return kExitUsage;
    }

    try {
        if (elevations) flags.emplace_back("dataset.elevations", std::to_string(*elevations));
        if (!building.empty()) flags.emplace_back("dataset.building", building);
        if (iterations) flags.emplace_back("train.iterations", std::to_string(*iterations));
        if (no_perceptual) {
            flags.emplace_back("loss.lambda_ds", "0");
            flags.emplace_back("loss.lambda_clip", "0");
        }
        const RunConfig rc = resolve(shared, flags);
        if (shared.print_config) {
            out << rc.format();
            return kExitOk;
        }
        apply_runtime(rc);
        if (synth->parsed()) return cmd_synth(rc, shared, out);
        if (reg->parsed()) return cmd_register(rc, shared, reg_opt, out, err);
        if (train->parsed()) return cmd_train(rc, shared, train_opt, out, err);
        if (dragon->parsed()) return cmd_dragon(rc, shared, dragon_opt, out, err);
        if (rend->parsed()) return cmd_render(rc, shared, render_opt, out);
        if (eval->parsed()) return cmd_eval(rc, shared, eval_opt, out, err);
        if (cmp->parsed()) return cmd_compare(rc, shared, cmp_opt, out);
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

} // namespace dragon
