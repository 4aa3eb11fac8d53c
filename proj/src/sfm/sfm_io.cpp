// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/sfm/sfm_io.hpp"

#include "dragon/core/error.hpp"
#include "dragon/core/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dragon {

namespace {

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = text.find('\n', start);
        const std::size_t stop = end == std::string_view::npos ? text.size() : end;
        out.push_back(text.substr(start, stop - start));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

int to_byte(double v) { return static_cast<int>(std::lrint(std::clamp(v, 0.0, 1.0) * 255.0)); }

} // namespace

CameraView PoseRecord::view(const CameraView& intrinsics) const {
    CameraView v = CameraView::from_center(rotation_w2c, center);
    v.fx = intrinsics.fx;
    v.fy = intrinsics.fy;
    v.cx = intrinsics.cx;
    v.cy = intrinsics.cy;
    v.width = intrinsics.width;
    v.height = intrinsics.height;
    v.elevation_index = elevation_index;
    return v;
}

PoseRecord PoseRecord::from_view(const std::string& name, const CameraView& v) {
    return {name, v.rotation_w2c, v.center(), v.elevation_index};
}

std::string format_poses(const std::vector<PoseRecord>& records) {
    std::ostringstream out;
    out << "# name qw qx qy qz cx cy cz elevation\n";
    for (const auto& r : records) {
        if (r.name.empty() || r.name.find_first_of(" \t\n") != std::string::npos)
            throw InvalidInput("poses: image name must be non-empty without whitespace: '" + r.name + "'");
        const Vec4 q = matrix_to_quaternion(r.rotation_w2c);
        out << r.name;
        for (int k = 0; k < 4; ++k) out << ' ' << format_double(q[k]);
        for (int k = 0; k < 3; ++k) out << ' ' << format_double(r.center[k]);
        out << ' ' << r.elevation_index << '\n';
    }
    return out.str();
}

std::vector<PoseRecord> parse_poses(const std::string& text) {
    std::vector<PoseRecord> out;
    int line_no = 0;
    for (auto line : lines_of(text)) {
        ++line_no;
        const auto tok = split_ws(line);
        if (tok.empty() || tok[0].front() == '#') continue;
        if (tok.size() != 9)
            throw IoError("poses line " + std::to_string(line_no) + ": expected 9 fields, got " +
                          std::to_string(tok.size()));
        PoseRecord r;
        r.name = std::string(tok[0]);
        Vec4 q;
        for (int k = 0; k < 4; ++k) q[k] = parse_double(tok[1 + k]);
        if (!(std::abs(q.norm() - 1.0) < 1e-6))
            throw IoError("poses line " + std::to_string(line_no) + ": quaternion is not unit length");
        r.rotation_w2c = quaternion_to_matrix(q.normalized());
        for (int k = 0; k < 3; ++k) r.center[k] = parse_double(tok[5 + k]);
        r.elevation_index = static_cast<int>(parse_int(tok[8]));
        out.push_back(std::move(r));
    }
    return out;
}

void write_poses(const std::filesystem::path& path, const std::vector<PoseRecord>& records) {
    write_text_file(path, format_poses(records));
}

std::vector<PoseRecord> read_poses(const std::filesystem::path& path) { return parse_poses(read_text_file(path)); }

void write_ply(const std::filesystem::path& path, const std::vector<ColoredPoint>& points) {
    std::ostringstream out;
    out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
        << "\nproperty double x\nproperty double y\nproperty double z\n"
           "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    for (const auto& p : points)
        out << format_double(p.position.x()) << ' ' << format_double(p.position.y()) << ' '
            << format_double(p.position.z()) << ' ' << to_byte(p.rgb.x()) << ' ' << to_byte(p.rgb.y()) << ' '
            << to_byte(p.rgb.z()) << '\n';
    write_text_file(path, out.str());
}

std::vector<ColoredPoint> read_ply(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    const auto lines = lines_of(text);
    std::size_t count = 0, i = 0;
    bool header_done = false;
    for (; i < lines.size(); ++i) {
        const auto tok = split_ws(lines[i]);
        if (tok.size() == 3 && tok[0] == "element" && tok[1] == "vertex") count = static_cast<std::size_t>(parse_int(tok[2]));
        if (tok.size() == 1 && tok[0] == "end_header") {
            header_done = true;
            ++i;
            break;
        }
    }
    if (!header_done || lines.empty() || split_ws(lines[0]).empty() || split_ws(lines[0])[0] != "ply")
        throw IoError("ply: malformed header in " + path.string());
    std::vector<ColoredPoint> out;
    for (; i < lines.size() && out.size() < count; ++i) {
        const auto tok = split_ws(lines[i]);
        if (tok.empty()) continue;
        if (tok.size() != 6) throw IoError("ply: vertex line needs 6 fields");
        ColoredPoint p;
        for (int k = 0; k < 3; ++k) p.position[k] = parse_double(tok[k]);
        for (int k = 0; k < 3; ++k) p.rgb[k] = static_cast<double>(parse_int(tok[3 + k])) / 255.0;
        out.push_back(p);
    }
    if (out.size() != count) throw IoError("ply: expected " + std::to_string(count) + " vertices");
    return out;
}

} // namespace dragon
