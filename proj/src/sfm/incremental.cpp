// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/core/error.hpp"
#include "dragon/core/parallel.hpp"
#include "dragon/sfm/sparse_map.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace dragon {

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

struct Track {
    std::vector<std::pair<int, int>> nodes; // (image, keypoint), one per image
    int point = -1;
};

class Reconstruction {
public:
    Reconstruction(const std::vector<FeatureSet>& f, const std::vector<CameraView>& k, const MatchGraph& g,
                   const RegistrationConfig& c)
        : features_(f), intrinsics_(k), graph_(g), config_(c) {
        map_.views.resize(f.size());
        build_tracks();
    }

    SparseMap run() {
        initialize();
        register_remaining();
        global_adjust();
        return map_;
    }

private:
    const std::vector<FeatureSet>& features_;
    const std::vector<CameraView>& intrinsics_;
    const MatchGraph& graph_;
    const RegistrationConfig& config_;
    SparseMap map_;
    std::vector<Track> tracks_;
    std::vector<std::vector<int>> track_of_; // [image][keypoint] -> track id or -1
    std::vector<int> order_;                 // registration order

    void build_tracks() {
        const int n = static_cast<int>(features_.size());
        std::vector<int> offset(n + 1, 0);
        for (int i = 0; i < n; ++i) offset[i + 1] = offset[i] + static_cast<int>(features_[i].size());
        UnionFind uf(offset[n]);
        for (const auto& pm : graph_.pairs)
            for (const auto& [ka, kb] : pm.matches) uf.unite(offset[pm.a] + ka, offset[pm.b] + kb);
        std::map<int, std::vector<std::pair<int, int>>> groups;
        for (int i = 0; i < n; ++i)
            for (int kp = 0; kp < static_cast<int>(features_[i].size()); ++kp) {
                const int node = offset[i] + kp;
                groups[uf.find(node)].emplace_back(i, kp);
            }
        track_of_.resize(n);
        for (int i = 0; i < n; ++i) track_of_[i].assign(features_[i].size(), -1);
        for (auto& [root, nodes] : groups) {
            if (nodes.size() < 2) continue;
            bool conflict = false;
            for (std::size_t j = 1; j < nodes.size(); ++j)
                if (nodes[j].first == nodes[j - 1].first) conflict = true;
            if (conflict) continue; // ambiguous chains are not trusted
            const int id = static_cast<int>(tracks_.size());
            for (const auto& [img, kp] : nodes) track_of_[img][kp] = id;
            tracks_.push_back({std::move(nodes), -1});
        }
    }

    Vec2 pixel(int img, int kp) const { return features_[img].keypoints[kp].pixel; }

    // Triangulates the track from its registered observations; keeps it when
    // at least two observations agree within the error bound at a wide enough angle.
    bool triangulate_track(int tid) {
        Track& tr = tracks_[tid];
        std::vector<RigidPose> poses;
        std::vector<Vec2> xs;
        std::vector<std::pair<int, int>> used;
        for (const auto& [img, kp] : tr.nodes) {
            if (!map_.views[img]) continue;
            poses.push_back(pose_of(*map_.views[img]));
            xs.push_back(normalize_pixel(intrinsics_[img], pixel(img, kp)));
            used.emplace_back(img, kp);
        }
        if (used.size() < 2) return false;
        const Vec3 X = triangulate(poses, xs);
        if (!X.allFinite()) return false;
        MapPoint p;
        p.position = X;
        for (const auto& [img, kp] : used)
            if (reprojection_error(*map_.views[img], X, pixel(img, kp)) <= config_.max_reprojection_error)
                p.track.push_back({img, kp, pixel(img, kp)});
        if (p.track.size() < 2) return false;
        double angle = 0.0;
        for (std::size_t i = 0; i < p.track.size(); ++i)
            for (std::size_t j = i + 1; j < p.track.size(); ++j)
                angle = std::max(angle, triangulation_angle_deg(map_.views[p.track[i].image]->center(),
                                                                map_.views[p.track[j].image]->center(), X));
        if (angle < config_.min_triangulation_angle) return false;
        Vec3 rgb = Vec3::Zero();
        for (const auto& o : p.track) rgb += features_[o.image].colors[o.keypoint];
        p.rgb = rgb / static_cast<double>(p.track.size());
        tr.point = static_cast<int>(map_.points.size());
        map_.points.push_back(std::move(p));
        return true;
    }

    void initialize() {
        std::vector<const PairMatch*> candidates;
        for (const auto& pm : graph_.pairs)
            if (pm.geometry.median_angle_deg >= config_.min_triangulation_angle) candidates.push_back(&pm);
        auto score = [](const PairMatch* p) { return p->geometry.inliers * p->geometry.median_angle_deg; };
        std::stable_sort(candidates.begin(), candidates.end(), [&](const PairMatch* x, const PairMatch* y) {
            if (x->geometry.planar != y->geometry.planar) return !x->geometry.planar;
            return score(x) > score(y);
        });
        for (const PairMatch* seed : candidates) {
            map_.views.assign(features_.size(), std::nullopt);
            map_.points.clear();
            for (auto& t : tracks_) t.point = -1;
            map_.views[seed->a] = with_pose(intrinsics_[seed->a], RigidPose{});
            map_.views[seed->b] = with_pose(intrinsics_[seed->b], seed->geometry.relative);
            for (const auto& [ka, kb] : seed->matches) {
                const int tid = track_of_[seed->a][ka];
                if (tid >= 0 && tracks_[tid].point < 0) triangulate_track(tid);
            }
            if (static_cast<int>(map_.points.size()) < config_.min_correspondences) continue;
            map_.degenerate = seed->geometry.planar;
            order_ = {seed->a, seed->b};
            BundleConfig ba;
            ba.constant_views = {seed->a};
            map_ = bundle_adjust(map_, ba).map;
            refilter();
            return;
        }
        throw RegistrationFailed("register_incremental: no verifiable seed pair among " +
                                 std::to_string(features_.size()) + " images");
    }

    void refilter() {
        filter_map(map_, config_.max_reprojection_error, config_.min_triangulation_angle);
        for (auto& t : tracks_) t.point = -1;
        for (std::size_t pid = 0; pid < map_.points.size(); ++pid) {
            auto& p = map_.points[pid];
            const int tid = track_of_[p.track.front().image][p.track.front().keypoint];
            tracks_[tid].point = static_cast<int>(pid);
        }
    }

    int correspondence_count(int img) const {
        int n = 0;
        for (int tid : track_of_[img])
            if (tid >= 0 && tracks_[tid].point >= 0) ++n;
        return n;
    }

    bool try_register(int img, int attempt) {
        std::vector<Vec3> X;
        std::vector<Vec2> px;
        std::vector<std::pair<int, int>> refs; // (keypoint, point)
        for (int kp = 0; kp < static_cast<int>(track_of_[img].size()); ++kp) {
            const int tid = track_of_[img][kp];
            if (tid < 0 || tracks_[tid].point < 0) continue;
            X.push_back(map_.points[tracks_[tid].point].position);
            px.push_back(pixel(img, kp));
            refs.emplace_back(kp, tracks_[tid].point);
        }
        std::mt19937_64 rng(pair_seed(config_.seed ^ 0x5bd1e995ULL, img, attempt));
        RansacConfig rc = config_.matching.ransac;
        rc.threshold = config_.pnp_threshold;
        const auto res = estimate_pose_ransac(intrinsics_[img], X, px, rc, rng);
        if (!res.ok || static_cast<int>(res.inliers.size()) < config_.min_correspondences) return false;
        map_.views[img] = with_pose(intrinsics_[img], res.pose);
        for (int k : res.inliers) {
            const auto [kp, pid] = refs[k];
            map_.points[pid].track.push_back({img, kp, pixel(img, kp)});
        }
        for (int tid : track_of_[img])
            if (tid >= 0 && tracks_[tid].point < 0) triangulate_track(tid);
        order_.push_back(img);
        return true;
    }

    void register_remaining() {
        const int n = static_cast<int>(features_.size());
        std::vector<int> attempts(n, 0);
        std::vector<bool> blocked(n, false);
        int since_ba = 0;
        constexpr int kMaxAttempts = 3;
        while (true) {
            int best = -1, best_count = -1;
            for (int i = 0; i < n; ++i) {
                if (map_.views[i] || blocked[i] || attempts[i] >= kMaxAttempts) continue;
                const int c = correspondence_count(i);
                if (c > best_count) {
                    best = i;
                    best_count = c;
                }
            }
            if (best < 0 || best_count < config_.min_correspondences) break;
            if (!try_register(best, attempts[best]++)) {
                blocked[best] = true;
                continue;
            }
            std::fill(blocked.begin(), blocked.end(), false);
            if (++since_ba >= config_.local_ba_interval) {
                since_ba = 0;
                BundleConfig ba;
                std::set<int> window(order_.end() - std::min<std::ptrdiff_t>(order_.size(), config_.local_ba_window),
                                     order_.end());
                window.erase(order_.front());
                ba.variable_views = window;
                map_ = bundle_adjust(map_, ba).map;
                refilter();
            }
        }
    }

    void global_adjust() {
        BundleConfig ba;
        ba.constant_views = {order_.front()};
        map_ = bundle_adjust(map_, ba).map;
        refilter();
    }
};

} // namespace

SparseMap register_from_matches(const std::vector<FeatureSet>& features, const std::vector<CameraView>& intrinsics,
                                const MatchGraph& graph, const RegistrationConfig& config) {
    if (features.size() < 2) throw InvalidInput("register_incremental: need at least two images");
    if (features.size() != intrinsics.size()) throw ShapeMismatch("register_incremental: features vs intrinsics");
    Reconstruction rec(features, intrinsics, graph, config);
    return rec.run();
}

SparseMap register_incremental(const std::vector<Image>& images, const std::vector<CameraView>& intrinsics,
                               const RegistrationConfig& config) {
    if (images.size() < 2) throw InvalidInput("register_incremental: need at least two images");
    if (images.size() != intrinsics.size()) throw ShapeMismatch("register_incremental: images vs intrinsics");
    std::vector<FeatureSet> features(images.size());
    parallel_for(0, images.size(), [&](std::size_t i) { features[i] = detect_features(images[i], config.features); });
    const auto graph = build_match_graph(features, intrinsics, config.matching, config.seed);
    return register_from_matches(features, intrinsics, graph, config);
}

} // namespace dragon
