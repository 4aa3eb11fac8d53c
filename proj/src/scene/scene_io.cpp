// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/core/error.hpp"
#include "dragon/core/text_io.hpp"
#include "dragon/scene/scene.hpp"

#include <sstream>

namespace dragon {

namespace {
constexpr std::string_view kMagic = "dragon-scene";
constexpr int kVersion = 1;
constexpr std::size_t kFieldsPerSplat = 23;
} // namespace

std::string serialize_scene(const Scene& scene) {
    std::string out;
    out += std::string(kMagic) + " " + std::to_string(kVersion) + "\n";
    out += "sh_degree " + std::to_string(scene.sh_degree) + "\n";
    out += "background " + format_double(scene.background.x()) + " " +
           format_double(scene.background.y()) + " " + format_double(scene.background.z()) + "\n";
    out += "splats " + std::to_string(scene.splats.size()) + "\n";
    for (const auto& s : scene.splats) {
        std::string line;
        auto put = [&](double v) {
            if (!line.empty()) line += ' ';
            line += format_double(v);
        };
        for (int i = 0; i < 3; ++i) put(s.mean[i]);
        for (int i = 0; i < 3; ++i) put(s.log_scale[i]);
        for (int i = 0; i < 4; ++i) put(s.rotation[i]);
        put(s.opacity_logit);
        for (int i = 0; i < 3; ++i) put(s.color[i]);
        for (double v : s.sh1) put(v);
        out += line + "\n";
    }
    return out;
}

Scene deserialize_scene(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto next_tokens = [&](std::string_view expect) {
        if (!std::getline(in, line)) throw IoError("scene file truncated before " + std::string(expect));
        auto tokens = split_ws(line);
        if (tokens.empty() || tokens[0] != expect)
            throw IoError("scene file: expected '" + std::string(expect) + "'");
        return tokens;
    };

    auto header = next_tokens(kMagic);
    if (header.size() != 2 || parse_int(header[1]) != kVersion)
        throw IoError("unsupported scene file version");
    Scene scene;
    auto sh = next_tokens("sh_degree");
    if (sh.size() != 2) throw IoError("scene file: bad sh_degree line");
    scene.sh_degree = static_cast<int>(parse_int(sh[1]));
    auto bg = next_tokens("background");
    if (bg.size() != 4) throw IoError("scene file: bad background line");
    for (int i = 0; i < 3; ++i) scene.background[i] = parse_double(bg[i + 1]);
    auto count_line = next_tokens("splats");
    if (count_line.size() != 2) throw IoError("scene file: bad splat count");
    const long long count = parse_int(count_line[1]);
    if (count < 0) throw IoError("scene file: negative splat count");
    scene.splats.reserve(static_cast<std::size_t>(count));
    for (long long n = 0; n < count; ++n) {
        if (!std::getline(in, line)) throw IoError("scene file truncated in splat records");
        const auto t = split_ws(line);
        if (t.size() != kFieldsPerSplat) throw IoError("scene file: splat record has wrong field count");
        GaussianSplat s;
        std::size_t k = 0;
        for (int i = 0; i < 3; ++i) s.mean[i] = parse_double(t[k++]);
        for (int i = 0; i < 3; ++i) s.log_scale[i] = parse_double(t[k++]);
        for (int i = 0; i < 4; ++i) s.rotation[i] = parse_double(t[k++]);
        s.opacity_logit = parse_double(t[k++]);
        for (int i = 0; i < 3; ++i) s.color[i] = parse_double(t[k++]);
        for (double& v : s.sh1) v = parse_double(t[k++]);
        scene.splats.push_back(s);
    }
    return scene;
}

void save_scene(const std::filesystem::path& path, const Scene& scene) {
    write_text_file(path, serialize_scene(scene));
}

Scene load_scene(const std::filesystem::path& path) {
    return deserialize_scene(read_text_file(path));
}

} // namespace dragon
