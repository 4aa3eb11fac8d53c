// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/synth/dataset.hpp"

#include "dragon/core/error.hpp"
#include "dragon/core/parallel.hpp"
#include "dragon/core/text_io.hpp"
#include "dragon/sfm/sfm_io.hpp"
#include "dragon/synth/raycast.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace dragon {

DatasetSplit DatasetSplit::standard(int n) {
    if (n < 1) throw InvalidInput("split: need at least two elevations");
    DatasetSplit s;
    s.train = {0, n};
    for (int e = 0; e <= n; ++e) s.test.push_back(e);
    return s;
}

bool DatasetSplit::is_train(int e) const { return std::find(train.begin(), train.end(), e) != train.end(); }

std::vector<OrbitSpec> default_orbits(int image_count) {
    // altitude, radius, target (m): a 1:100 copy of a stadium-scale landmark.
    constexpr double rows[5][3] = {
        {0.77, 3.13, 0.52}, {1.27, 3.75, 0.52}, {2.52, 4.38, 0.52}, {4.52, 5.0, 0.52}, {7.02, 5.0, 0.52}};
    std::vector<OrbitSpec> out;
    for (int e = 0; e < 5; ++e) out.push_back({rows[e][0], rows[e][1], rows[e][2], image_count, e});
    return out;
}

std::vector<OrbitSpec> orbits_for_elevations(int count, int image_count) {
    if (count < 2) throw InvalidInput("dataset: need at least 2 elevations");
    const auto def = default_orbits(image_count);
    if (count == static_cast<int>(def.size())) return def;
    const OrbitSpec& lo = def.front();
    const OrbitSpec& hi = def.back();
    std::vector<OrbitSpec> out;
    for (int e = 0; e < count; ++e) {
        const double t = static_cast<double>(e) / (count - 1);
        out.push_back({lo.camera_altitude + t * (hi.camera_altitude - lo.camera_altitude),
                       lo.trajectory_radius + t * (hi.trajectory_radius - lo.trajectory_radius),
                       lo.target_altitude + t * (hi.target_altitude - lo.target_altitude), image_count, e});
    }
    return out;
}

void DatasetConfig::validate() const {
    intrinsics.validate();
    if (orbits.size() < 2) throw InvalidInput("dataset: need at least 2 orbits");
    std::set<int> seen;
    for (const auto& o : orbits) {
        o.validate();
        if (!seen.insert(o.elevation_index).second)
            throw InvalidInput("dataset: duplicate elevation index " + std::to_string(o.elevation_index));
    }
    if (*seen.begin() != 0 || *seen.rbegin() != static_cast<int>(orbits.size()) - 1)
        throw InvalidInput("dataset: orbits must cover elevation indices 0..N exactly once");
    if (supersample < 1) throw InvalidInput("dataset: supersample must be >= 1");
    (void)make_building(building, seed);
}

int DatasetConfig::max_elevation() const { return static_cast<int>(orbits.size()) - 1; }

std::size_t ElevationDataset::count(const std::vector<int>& elevations) const {
    std::size_t n = 0;
    for (int e : elevations) n += poses.at(e).size();
    return n;
}

std::string ElevationDataset::image_name(int e, int i) {
    return "e" + std::to_string(e) + "_v" + std::to_string(i) + ".png";
}

namespace {

std::vector<OrbitSpec> sorted_orbits(const DatasetConfig& c) {
    auto o = c.orbits;
    std::sort(o.begin(), o.end(), [](const OrbitSpec& a, const OrbitSpec& b) { return a.elevation_index < b.elevation_index; });
    return o;
}

ElevationDataset skeleton(const DatasetConfig& config) {
    config.validate();
    ElevationDataset ds;
    ds.config = config;
    ds.config.orbits = sorted_orbits(config);
    ds.split = DatasetSplit::standard(config.max_elevation());
    for (const auto& o : ds.config.orbits) ds.poses.push_back(generate_orbit_poses(o, Vec3::Zero(), config.intrinsics));
    return ds;
}

} // namespace

ElevationDataset generate_dataset(const DatasetConfig& config) {
    ElevationDataset ds = skeleton(config);
    const BuildingSpec spec = make_building(config.building, config.seed);
    RaycastSettings rs;
    rs.supersample = config.supersample;
    ds.images.resize(ds.poses.size());
    for (std::size_t e = 0; e < ds.poses.size(); ++e)
        for (const auto& v : ds.poses[e]) ds.images[e].push_back(quantize_8bit(render_ground_truth(spec, v, rs)));
    return ds;
}

std::string format_manifest(const DatasetConfig& c) {
    std::ostringstream out;
    out << "dragon-dataset 1\n";
    out << "building " << c.building << "\n";
    out << "seed " << c.seed << "\n";
    out << "supersample " << c.supersample << "\n";
    const auto& k = c.intrinsics;
    out << "intrinsics " << k.width << ' ' << k.height << ' ' << format_double(k.fx) << ' ' << format_double(k.fy)
        << ' ' << format_double(k.cx) << ' ' << format_double(k.cy) << "\n";
    out << "elevations " << c.orbits.size() << "\n";
    for (const auto& o : sorted_orbits(c))
        out << "orbit " << o.elevation_index << ' ' << format_double(o.camera_altitude) << ' '
            << format_double(o.trajectory_radius) << ' ' << format_double(o.target_altitude) << ' '
            << o.image_count << "\n";
    const auto split = DatasetSplit::standard(c.max_elevation());
    out << "train";
    for (int e : split.train) out << ' ' << e;
    out << "\ntest";
    for (int e : split.test) out << ' ' << e;
    out << "\n";
    return out.str();
}

DatasetConfig parse_manifest(const std::string& text) {
    DatasetConfig c;
    c.orbits.clear();
    std::istringstream in(text);
    std::string line;
    bool header = false;
    std::size_t declared = 0;
    while (std::getline(in, line)) {
        const auto tok = split_ws(line);
        if (tok.empty()) continue;
        const std::string key(tok[0]);
        auto need = [&](std::size_t n) {
            if (tok.size() != n) throw IoError("manifest: bad '" + key + "' line");
        };
        if (key == "dragon-dataset") {
            need(2);
            if (parse_int(tok[1]) != 1) throw IoError("manifest: unsupported version");
            header = true;
        } else if (key == "building") {
            need(2);
            c.building = std::string(tok[1]);
        } else if (key == "seed") {
            need(2);
            c.seed = static_cast<std::uint64_t>(parse_int(tok[1]));
        } else if (key == "supersample") {
            need(2);
            c.supersample = static_cast<int>(parse_int(tok[1]));
        } else if (key == "intrinsics") {
            need(7);
            c.intrinsics.width = static_cast<int>(parse_int(tok[1]));
            c.intrinsics.height = static_cast<int>(parse_int(tok[2]));
            c.intrinsics.fx = parse_double(tok[3]);
            c.intrinsics.fy = parse_double(tok[4]);
            c.intrinsics.cx = parse_double(tok[5]);
            c.intrinsics.cy = parse_double(tok[6]);
        } else if (key == "elevations") {
            need(2);
            declared = static_cast<std::size_t>(parse_int(tok[1]));
        } else if (key == "orbit") {
            need(6);
            OrbitSpec o;
            o.elevation_index = static_cast<int>(parse_int(tok[1]));
            o.camera_altitude = parse_double(tok[2]);
            o.trajectory_radius = parse_double(tok[3]);
            o.target_altitude = parse_double(tok[4]);
            o.image_count = static_cast<int>(parse_int(tok[5]));
            c.orbits.push_back(o);
        } else if (key == "train" || key == "test") {
            // Derived from the orbit count; kept in the file for readers.
        } else {
            throw IoError("manifest: unknown key '" + key + "'");
        }
    }
    if (!header) throw IoError("manifest: missing header");
    if (declared != c.orbits.size()) throw IoError("manifest: orbit count does not match 'elevations'");
    c.validate();
    return c;
}

ElevationDataset build_dataset(const DatasetConfig& config, const std::filesystem::path& dir) {
    ElevationDataset ds = generate_dataset(config);
    ds.root = dir;
    std::filesystem::create_directories(dir / "images");
    std::vector<PoseRecord> records;
    for (std::size_t e = 0; e < ds.poses.size(); ++e)
        for (std::size_t i = 0; i < ds.poses[e].size(); ++i) {
            const std::string name = ElevationDataset::image_name(static_cast<int>(e), static_cast<int>(i));
            write_png(dir / "images" / name, ds.images[e][i]);
            records.push_back(PoseRecord::from_view(name, ds.poses[e][i]));
            records.back().elevation_index = static_cast<int>(e);
        }
    write_poses(dir / "poses_gt.txt", records);
    write_text_file(dir / "manifest", format_manifest(ds.config));
    return ds;
}

ElevationDataset load_dataset(const std::filesystem::path& dir, bool load_images) {
    const DatasetConfig config = parse_manifest(read_text_file(dir / "manifest"));
    ElevationDataset ds = skeleton(config);
    ds.root = dir;
    if (!load_images) return ds;
    ds.images.resize(ds.poses.size());
    for (std::size_t e = 0; e < ds.poses.size(); ++e)
        for (std::size_t i = 0; i < ds.poses[e].size(); ++i) {
            Image img = read_png(dir / "images" / ElevationDataset::image_name(static_cast<int>(e), static_cast<int>(i)));
            if (img.width != config.intrinsics.width || img.height != config.intrinsics.height)
                throw IoError("dataset: image size does not match the manifest intrinsics");
            ds.images[e].push_back(std::move(img));
        }
    return ds;
}

} // namespace dragon
