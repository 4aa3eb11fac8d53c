// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/cli/run_config.hpp"

#include "dragon/core/error.hpp"
#include "dragon/core/text_io.hpp"

#include <sstream>

namespace dragon {

namespace {

enum class Kind { Int, Double, Bool, String, Vec3 };

struct KeySpec {
    const char* key;
    Kind kind;
    const char* value;
};

// Defaults mirror the library defaults; the dragon run budget is the one
// place the CLI picks its own number.
const KeySpec kKeys[] = {
    {"seed", Kind::Int, "1"},
    {"threads", Kind::Int, "0"},
    {"deterministic", Kind::Bool, "false"},

    {"dataset.building", Kind::String, "gap"},
    {"dataset.seed", Kind::Int, "0"}, // texture variation; independent of the root seed
    {"dataset.elevations", Kind::Int, "5"},
    {"dataset.images_per_orbit", Kind::Int, "24"},
    {"dataset.supersample", Kind::Int, "3"},
    {"camera.width", Kind::Int, "192"},
    {"camera.height", Kind::Int, "128"},
    {"camera.fx", Kind::Double, "240"},
    {"camera.fy", Kind::Double, "240"},
    {"camera.cx", Kind::Double, "96"},
    {"camera.cy", Kind::Double, "64"},

    {"train.iterations", Kind::Int, "3000"},
    {"train.densify", Kind::Bool, "true"},
    {"train.densify_interval", Kind::Int, "100"},
    {"train.densify_until_fraction", Kind::Double, "0.5"},
    {"train.densify_grad_threshold", Kind::Double, "0.0002"},
    {"train.lr_mean_start", Kind::Double, "0.00016"},
    {"train.lr_mean_end", Kind::Double, "0.0000016"},
    {"train.lr_color", Kind::Double, "0.0025"},
    {"train.lr_opacity", Kind::Double, "0.05"},
    {"train.lr_scale", Kind::Double, "0.005"},
    {"train.lr_rotation", Kind::Double, "0.001"},
    {"train.max_splats", Kind::Int, "60000"},

    {"loss.lambda_ssim", Kind::Double, "0.2"},
    {"loss.lambda_ds", Kind::Double, "0.01"},
    {"loss.lambda_clip", Kind::Double, "0.01"},
    {"loss.metric_ds", Kind::String, "builtin"},
    {"loss.metric_clip", Kind::String, "builtin-coarse"},

    {"init.fallback_scale", Kind::Double, "0.05"},
    {"init.opacity", Kind::Double, "0.1"},
    {"init.background", Kind::Vec3, "0.7 0.78 0.88"},

    {"registration.max_features", Kind::Int, "2000"},
    {"registration.contrast_threshold", Kind::Double, "0.02"},
    {"registration.ratio", Kind::Double, "0.8"},
    {"registration.ransac_threshold", Kind::Double, "2"},
    {"registration.min_inliers", Kind::Int, "15"},
    {"registration.pnp_threshold", Kind::Double, "4"},
    {"registration.min_correspondences", Kind::Int, "12"},

    {"pipeline.min_stage_iterations", Kind::Int, "500"},
    {"pipeline.generated_weight", Kind::Double, "0.5"},
    {"pipeline.literal_indexing", Kind::Bool, "false"},
    {"pipeline.perceptual_in_final", Kind::Bool, "true"},

    {"eval.metric", Kind::String, "builtin"},
};

const KeySpec* find_key(const std::string& key) {
    for (const auto& k : kKeys)
        if (key == k.key) return &k;
    return nullptr;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, bool& out) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return out = true, true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return out = false, true;
    return false;
}

void check_value(const KeySpec& spec, const std::string& value) {
    const std::string where = std::string("config key '") + spec.key + "'";
    try {
        switch (spec.kind) {
        case Kind::Int: parse_int(value); break;
        case Kind::Double: parse_double(value); break;
        case Kind::Bool: {
            bool b;
            if (!parse_bool(value, b)) throw IoError("not a boolean");
            break;
        }
        case Kind::Vec3: {
            const auto t = split_ws(value);
            if (t.size() != 3) throw IoError("expected three numbers");
            for (auto x : t) parse_double(x);
            break;
        }
        case Kind::String:
            if (value.empty()) throw IoError("empty value");
            break;
        }
    } catch (const IoError& e) {
        throw InvalidInput(where + ": bad value '" + value + "' (" + e.what() + ")");
    }
}

} // namespace

RunConfig::RunConfig() {
    for (const auto& k : kKeys) values_[k.key] = k.value;
}

std::vector<std::string> RunConfig::keys() {
    std::vector<std::string> out;
    for (const auto& k : kKeys) out.emplace_back(k.key);
    return out;
}

bool RunConfig::has_key(const std::string& key) const { return find_key(key) != nullptr; }

void RunConfig::set(const std::string& key, const std::string& value) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw InvalidInput("unknown config key '" + key + "'");
    const std::string v = trim(value);
    check_value(*spec, v);
    values_[key] = v;
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw InvalidInput("unknown config key '" + key + "'");
    return it->second;
}

long long RunConfig::get_int(const std::string& key) const { return parse_int(get(key)); }
double RunConfig::get_double(const std::string& key) const { return parse_double(get(key)); }

bool RunConfig::get_bool(const std::string& key) const {
    bool b = false;
    parse_bool(get(key), b);
    return b;
}

Vec3 RunConfig::get_vec3(const std::string& key) const {
    const auto t = split_ws(get(key));
    return {parse_double(t.at(0)), parse_double(t.at(1)), parse_double(t.at(2))};
}

void RunConfig::merge_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidInput("config line " + std::to_string(row) + ": expected 'key = value'");
        set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

std::string RunConfig::format() const {
    std::ostringstream o;
    for (const auto& [k, v] : values_) o << k << " = " << v << '\n';
    return o.str();
}

DatasetConfig RunConfig::dataset_config() const {
    DatasetConfig c;
    c.building = get("dataset.building");
    c.seed = static_cast<std::uint64_t>(get_int("dataset.seed"));
    c.intrinsics.width = static_cast<int>(get_int("camera.width"));
    c.intrinsics.height = static_cast<int>(get_int("camera.height"));
    c.intrinsics.fx = get_double("camera.fx");
    c.intrinsics.fy = get_double("camera.fy");
    c.intrinsics.cx = get_double("camera.cx");
    c.intrinsics.cy = get_double("camera.cy");
    const long long elevations = get_int("dataset.elevations");
    if (elevations < 2) throw InvalidInput("dataset.elevations must be at least 2");
    c.orbits = orbits_for_elevations(static_cast<int>(elevations), static_cast<int>(get_int("dataset.images_per_orbit")));
    c.supersample = static_cast<int>(get_int("dataset.supersample"));
    c.validate();
    return c;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.total_iterations = static_cast<int>(get_int("train.iterations"));
    t.densify = get_bool("train.densify");
    t.densify_interval = static_cast<int>(get_int("train.densify_interval"));
    t.densify_until_fraction = get_double("train.densify_until_fraction");
    t.densify_grad_threshold = get_double("train.densify_grad_threshold");
    t.lr_mean_start = get_double("train.lr_mean_start");
    t.lr_mean_end = get_double("train.lr_mean_end");
    t.lr_color = get_double("train.lr_color");
    t.lr_opacity = get_double("train.lr_opacity");
    t.lr_scale = get_double("train.lr_scale");
    t.lr_rotation = get_double("train.lr_rotation");
    t.max_splats = static_cast<std::size_t>(get_int("train.max_splats"));
    t.seed = module_seed(static_cast<std::uint64_t>(get_int("seed")), "train");
    t.validate();
    return t;
}

LossWeights RunConfig::loss_weights() const {
    LossWeights w{get_double("loss.lambda_ssim"), get_double("loss.lambda_ds"), get_double("loss.lambda_clip")};
    w.validate();
    return w;
}

RegistrationConfig RunConfig::registration_config() const {
    RegistrationConfig r;
    r.features.max_features = static_cast<int>(get_int("registration.max_features"));
    r.features.contrast_threshold = get_double("registration.contrast_threshold");
    r.matching.ratio = get_double("registration.ratio");
    r.matching.ransac.threshold = get_double("registration.ransac_threshold");
    r.matching.min_inliers = static_cast<int>(get_int("registration.min_inliers"));
    r.pnp_threshold = get_double("registration.pnp_threshold");
    r.min_correspondences = static_cast<int>(get_int("registration.min_correspondences"));
    r.seed = module_seed(static_cast<std::uint64_t>(get_int("seed")), "registration");
    return r;
}

SceneInitConfig RunConfig::init_config() const {
    SceneInitConfig c;
    c.fallback_scale = get_double("init.fallback_scale");
    c.initial_opacity = get_double("init.opacity");
    c.background = get_vec3("init.background");
    return c;
}

PipelineConfig RunConfig::pipeline_config() const {
    PipelineConfig p;
    p.train = train_config();
    p.min_stage_iterations = static_cast<int>(get_int("pipeline.min_stage_iterations"));
    p.weights = loss_weights();
    p.metric_ds = get("loss.metric_ds");
    p.metric_clip = get("loss.metric_clip");
    p.generated_weight = get_double("pipeline.generated_weight");
    p.registration = registration_config();
    p.init = init_config();
    p.literal_indexing = get_bool("pipeline.literal_indexing");
    p.perceptual_in_final = get_bool("pipeline.perceptual_in_final");
    p.seed = module_seed(static_cast<std::uint64_t>(get_int("seed")), "pipeline");
    p.validate();
    return p;
}

std::uint64_t module_seed(std::uint64_t root, const std::string& module) {
    // FNV-1a over the module name, then a splitmix64 finalizer.
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : module) h = (h ^ c) * 1099511628211ull;
    std::uint64_t z = root + 0x9e3779b97f4a7c15ull * (h | 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace dragon
