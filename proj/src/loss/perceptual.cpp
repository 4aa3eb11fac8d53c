// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/loss/perceptual.hpp"

#include "dragon/core/error.hpp"
#include "dragon/core/text_io.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <sys/wait.h>
#include <unistd.h>

namespace dragon {

double PerceptualMetric::distance_with_gradient(const Image&, const Image&, Image&) const {
    throw MetricError("perceptual metric '" + name() + "' has no gradient");
}

BuiltinPerceptualMetric::BuiltinPerceptualMetric(BuiltinMetricConfig config, std::string name)
    : config_(std::move(config)), name_(std::move(name)) {
    if (config_.scales.empty() || config_.cell < 2) throw InvalidInput("builtin metric: bad config");
    for (int s : config_.scales)
        if (s < 1) throw InvalidInput("builtin metric: scale must be >= 1");
}

double BuiltinPerceptualMetric::distance(const Image& a, const Image& b) const {
    return evaluate(a, b, nullptr);
}

double BuiltinPerceptualMetric::distance_with_gradient(const Image& a, const Image& b,
                                                       Image& grad_b) const {
    if (!grad_b.same_shape(b)) grad_b = Image(b.width, b.height);
    return evaluate(a, b, &grad_b);
}

namespace {

struct Direction {
    double c, s;
};

std::array<Direction, BuiltinPerceptualMetric::kOrientationBins> directions() {
    std::array<Direction, BuiltinPerceptualMetric::kOrientationBins> d{};
    for (int j = 0; j < BuiltinPerceptualMetric::kOrientationBins; ++j) {
        const double t = 2.0 * std::numbers::pi * j / BuiltinPerceptualMetric::kOrientationBins;
        d[j] = {std::cos(t), std::sin(t)};
    }
    return d;
}

// Block-averaged gray-free RGB at one scale, plus its gray image.
struct Level {
    int w = 0, h = 0;
    std::vector<double> rgb;  // w*h*3
    std::vector<double> gray; // w*h
};

Level make_level(const Image& img, int s) {
    Level L;
    L.w = img.width / s;
    L.h = img.height / s;
    L.rgb.assign(static_cast<std::size_t>(L.w) * L.h * 3, 0.0);
    L.gray.assign(static_cast<std::size_t>(L.w) * L.h, 0.0);
    const double inv = 1.0 / (s * s);
    for (int y = 0; y < L.h; ++y)
        for (int x = 0; x < L.w; ++x) {
            const std::size_t o = static_cast<std::size_t>(y) * L.w + x;
            for (int c = 0; c < 3; ++c) {
                double sum = 0.0;
                for (int dy = 0; dy < s; ++dy)
                    for (int dx = 0; dx < s; ++dx) sum += img.at(x * s + dx, y * s + dy, c);
                L.rgb[3 * o + c] = sum * inv;
            }
            L.gray[o] = (L.rgb[3 * o] + L.rgb[3 * o + 1] + L.rgb[3 * o + 2]) / 3.0;
        }
    return L;
}

// Central-difference gradients with clamped borders.
inline void image_gradient(const Level& L, int x, int y, double& gx, double& gy) {
    const int xl = std::max(x - 1, 0), xr = std::min(x + 1, L.w - 1);
    const int yu = std::max(y - 1, 0), yd = std::min(y + 1, L.h - 1);
    gx = L.gray[static_cast<std::size_t>(y) * L.w + xr] - L.gray[static_cast<std::size_t>(y) * L.w + xl];
    gy = L.gray[static_cast<std::size_t>(yd) * L.w + x] - L.gray[static_cast<std::size_t>(yu) * L.w + x];
}

using Descriptor = std::array<double, BuiltinPerceptualMetric::kDescriptorSize>;

Descriptor cell_descriptor(const Level& L, int cx, int cy, int cell,
                           const std::array<Direction, 8>& dirs) {
    Descriptor d{};
    const double inv = 1.0 / (cell * cell);
    for (int y = cy * cell; y < (cy + 1) * cell; ++y)
        for (int x = cx * cell; x < (cx + 1) * cell; ++x) {
            const std::size_t o = static_cast<std::size_t>(y) * L.w + x;
            for (int c = 0; c < 3; ++c) d[c] += L.rgb[3 * o + c];
            double gx, gy;
            image_gradient(L, x, y, gx, gy);
            for (int j = 0; j < 8; ++j) {
                const double p = gx * dirs[j].c + gy * dirs[j].s;
                if (p > 0.0) d[3 + j] += p;
            }
        }
    for (double& v : d) v *= inv;
    return d;
}

} // namespace

double BuiltinPerceptualMetric::evaluate(const Image& a, const Image& b, Image* grad_b) const {
    require_same_shape(a, b, "perceptual distance");
    const auto dirs = directions();
    const int cell = config_.cell;
    const double eps2 = config_.norm_eps * config_.norm_eps;

    std::size_t total_cells = 0;
    for (int s : config_.scales) total_cells += static_cast<std::size_t>(a.width / s / cell) * (a.height / s / cell);
    if (total_cells == 0) throw InvalidInput("perceptual distance: image too small for any cell");
    const double norm = 1.0 / static_cast<double>(total_cells);

    double sum = 0.0;
    for (int s : config_.scales) {
        const int ncx = a.width / s / cell, ncy = a.height / s / cell;
        if (ncx == 0 || ncy == 0) continue;
        const Level la = make_level(a, s), lb = make_level(b, s);
        // Gradient w.r.t. the level's rgb and gray values.
        std::vector<double> g_rgb, g_gray;
        if (grad_b) {
            g_rgb.assign(lb.rgb.size(), 0.0);
            g_gray.assign(lb.gray.size(), 0.0);
        }
        for (int cy = 0; cy < ncy; ++cy)
            for (int cx = 0; cx < ncx; ++cx) {
                const Descriptor da = cell_descriptor(la, cx, cy, cell, dirs);
                const Descriptor db = cell_descriptor(lb, cx, cy, cell, dirs);
                double na = eps2, nb = eps2;
                for (int k = 0; k < kDescriptorSize; ++k) {
                    na += da[k] * da[k];
                    nb += db[k] * db[k];
                }
                na = std::sqrt(na);
                nb = std::sqrt(nb);
                Descriptor diff{};
                double cell_d = 0.0;
                for (int k = 0; k < kDescriptorSize; ++k) {
                    diff[k] = db[k] / nb - da[k] / na;
                    cell_d += diff[k] * diff[k];
                }
                sum += 0.5 * cell_d;
                if (!grad_b) continue;

                // d/d(db) of 0.5*|db/nb - da/na|^2, scaled by the cell weight.
                double dot = 0.0;
                for (int k = 0; k < kDescriptorSize; ++k) dot += db[k] * diff[k];
                Descriptor g{};
                for (int k = 0; k < kDescriptorSize; ++k)
                    g[k] = norm * (diff[k] - db[k] * dot / (nb * nb)) / nb;

                const double inv = 1.0 / (cell * cell);
                for (int y = cy * cell; y < (cy + 1) * cell; ++y)
                    for (int x = cx * cell; x < (cx + 1) * cell; ++x) {
                        const std::size_t o = static_cast<std::size_t>(y) * lb.w + x;
                        for (int c = 0; c < 3; ++c) g_rgb[3 * o + c] += g[c] * inv;
                        double gx, gy;
                        image_gradient(lb, x, y, gx, gy);
                        double ggx = 0.0, ggy = 0.0;
                        for (int j = 0; j < 8; ++j) {
                            const double p = gx * dirs[j].c + gy * dirs[j].s;
                            if (p > 0.0) {
                                ggx += g[3 + j] * inv * dirs[j].c;
                                ggy += g[3 + j] * inv * dirs[j].s;
                            }
                        }
                        const int xl = std::max(x - 1, 0), xr = std::min(x + 1, lb.w - 1);
                        const int yu = std::max(y - 1, 0), yd = std::min(y + 1, lb.h - 1);
                        g_gray[static_cast<std::size_t>(y) * lb.w + xr] += ggx;
                        g_gray[static_cast<std::size_t>(y) * lb.w + xl] -= ggx;
                        g_gray[static_cast<std::size_t>(yd) * lb.w + x] += ggy;
                        g_gray[static_cast<std::size_t>(yu) * lb.w + x] -= ggy;
                    }
            }
        if (grad_b) {
            const double inv = 1.0 / (s * s);
            for (int y = 0; y < lb.h; ++y)
                for (int x = 0; x < lb.w; ++x) {
                    const std::size_t o = static_cast<std::size_t>(y) * lb.w + x;
                    for (int c = 0; c < 3; ++c) {
                        const double g = (g_rgb[3 * o + c] + g_gray[o] / 3.0) * inv;
                        for (int dy = 0; dy < s; ++dy)
                            for (int dx = 0; dx < s; ++dx) grad_b->at(x * s + dx, y * s + dy, c) += g;
                    }
                }
        }
    }
    return sum * norm;
}

ExternalProcessMetric::ExternalProcessMetric(std::string command, std::string name)
    : command_(std::move(command)), name_(std::move(name)) {
    if (command_.empty()) throw InvalidInput("external metric: empty command");
}

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

} // namespace

double ExternalProcessMetric::distance(const Image& a, const Image& b) const {
    require_same_shape(a, b, "external metric");
    std::lock_guard<std::mutex> lock(mutex_);
    const auto dir = std::filesystem::temp_directory_path() /
                     ("dragon-metric-" + std::to_string(::getpid()) + "-" +
                      std::to_string(reinterpret_cast<std::uintptr_t>(this)) + "-" +
                      std::to_string(calls_++));
    std::filesystem::create_directories(dir);
    const auto pa = dir / "a.png", pb = dir / "b.png";
    write_png(pa, a);
    write_png(pb, b);
    const std::string cmd = command_ + " " + shell_quote(pa.string()) + " " + shell_quote(pb.string());
    std::string out;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) {
        std::filesystem::remove_all(dir);
        throw MetricError("external metric: cannot start '" + command_ + "'");
    }
    char buf[256];
    while (std::fgets(buf, sizeof buf, pipe)) out += buf;
    const int status = ::pclose(pipe);
    std::filesystem::remove_all(dir);
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw MetricError("external metric '" + command_ + "' exited with status " + std::to_string(status));
    const auto tokens = split_ws(out);
    if (tokens.size() != 1) throw MetricError("external metric: expected one number, got '" + out + "'");
    double v;
    try {
        v = parse_double(tokens[0]);
    } catch (const IoError&) {
        throw MetricError("external metric: unparsable output '" + std::string(tokens[0]) + "'");
    }
    if (!std::isfinite(v)) throw MetricError("external metric: non-finite output");
    return v;
}

std::unique_ptr<PerceptualMetric> make_metric(const std::string& spec) {
    if (spec == "builtin") return std::make_unique<BuiltinPerceptualMetric>();
    if (spec == "builtin-coarse") {
        BuiltinMetricConfig c;
        c.scales = {4, 8};
        return std::make_unique<BuiltinPerceptualMetric>(c, "builtin-coarse");
    }
    const std::string prefix = "external:";
    if (spec.rfind(prefix, 0) == 0) return std::make_unique<ExternalProcessMetric>(spec.substr(prefix.size()));
    throw InvalidInput("unknown perceptual metric '" + spec + "'");
}

} // namespace dragon
