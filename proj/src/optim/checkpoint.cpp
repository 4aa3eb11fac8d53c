// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/core/error.hpp"
#include "dragon/core/text_io.hpp"
#include "dragon/optim/optimizer.hpp"

#include <sstream>

namespace dragon {

namespace {

std::filesystem::path state_path(const std::filesystem::path& scene_path) {
    auto p = scene_path;
    p += ".state";
    return p;
}

} // namespace

void save_checkpoint(const std::filesystem::path& scene_path, const Scene& scene, const TrainState& state) {
    if (!state.matches(scene)) throw ShapeMismatch("save_checkpoint: state does not match the scene");
    save_scene(scene_path, scene);
    std::ostringstream out;
    out << "dragon-train-state 1\n";
    out << "iteration " << state.iteration << "\n";
    out << "adam_steps " << state.adam_steps << "\n";
    out << "skipped_steps " << state.skipped_steps << "\n";
    out << "saturation_events " << state.saturation_events << "\n";
    out << "rng " << state.rng << "\n";
    out << "splats " << scene.size() << "\n";
    for (std::size_t i = 0; i < scene.size(); ++i) {
        for (int k = 0; k < kParamsPerSplat; ++k) out << format_double(state.m[i * kParamsPerSplat + k]) << ' ';
        for (int k = 0; k < kParamsPerSplat; ++k) out << format_double(state.v[i * kParamsPerSplat + k]) << ' ';
        out << format_double(state.grad_accum[i]) << ' ' << state.grad_count[i];
        for (int k = 0; k < 3; ++k) out << ' ' << format_double(state.grad_dir[i][k]);
        out << '\n';
    }
    write_text_file(state_path(scene_path), out.str());
}

void load_checkpoint(const std::filesystem::path& scene_path, Scene& scene, TrainState& state) {
    scene = load_scene(scene_path);
    const std::string text = read_text_file(state_path(scene_path));
    std::istringstream in(text);
    std::string line;
    auto next = [&](const char* key) {
        if (!std::getline(in, line)) throw IoError(std::string("train state: missing ") + key);
        const auto pos = line.find(' ');
        if (line.substr(0, pos) != key) throw IoError(std::string("train state: expected ") + key);
        return line.substr(pos + 1);
    };
    if (!std::getline(in, line) || line != "dragon-train-state 1") throw IoError("train state: bad header");
    state.iteration = parse_int(next("iteration"));
    state.adam_steps = parse_int(next("adam_steps"));
    state.skipped_steps = parse_int(next("skipped_steps"));
    state.saturation_events = parse_int(next("saturation_events"));
    {
        std::istringstream rs(next("rng"));
        rs >> state.rng;
        if (!rs) throw IoError("train state: bad rng state");
    }
    const long n = parse_int(next("splats"));
    if (n != static_cast<long>(scene.size())) throw IoError("train state: splat count does not match scene");
    state.m.assign(n * kParamsPerSplat, 0.0);
    state.v.assign(n * kParamsPerSplat, 0.0);
    state.grad_accum.assign(n, 0.0);
    state.grad_count.assign(n, 0);
    state.grad_dir.assign(n, Vec3::Zero());
    for (long i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw IoError("train state: truncated");
        const auto tok = split_ws(line);
        if (tok.size() != 2 * kParamsPerSplat + 5) throw IoError("train state: bad record length");
        for (int k = 0; k < kParamsPerSplat; ++k) {
            state.m[i * kParamsPerSplat + k] = parse_double(tok[k]);
            state.v[i * kParamsPerSplat + k] = parse_double(tok[kParamsPerSplat + k]);
        }
        state.grad_accum[i] = parse_double(tok[2 * kParamsPerSplat]);
        state.grad_count[i] = static_cast<int>(parse_int(tok[2 * kParamsPerSplat + 1]));
        for (int k = 0; k < 3; ++k) state.grad_dir[i][k] = parse_double(tok[2 * kParamsPerSplat + 2 + k]);
    }
}

} // namespace dragon
