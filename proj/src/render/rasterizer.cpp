// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/render/rasterizer.hpp"

#include "dragon/core/error.hpp"
#include "dragon/core/parallel.hpp"
#include "dragon/loss/image_losses.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace dragon {

namespace {

constexpr double kShC1 = 0.4886025119029199;

// Degree-1 real SH basis in the (y, z, x) order used by sh1.
std::array<double, 3> sh1_basis(const Vec3& dir) {
    return {-kShC1 * dir.y(), kShC1 * dir.z(), -kShC1 * dir.x()};
}

// Per-entry 2D gradient: dmean2d (2), dconic (3), dopacity, dcolor (3).
constexpr int kEntryGrad = 9;

struct Contribution {
    int entry; // index within the tile
    double alpha;
    double gauss;
    double transmittance; // before this splat
    double dx, dy;
    bool clamped;
};

// Contiguous copy of what the per-pixel loops read, in tile order.
struct TileSplat {
    double mx, my, a, b, c, opacity, cut, depth;
    Vec3 color;
    int x0, x1, y0, y1;
};

void gather_tile(const ForwardState& fs, int begin, int end, std::vector<TileSplat>& out) {
    out.clear();
    for (int e = begin; e < end; ++e) {
        const auto& ps = fs.projected[fs.tile_entries[e]];
        out.push_back({ps.mean2d.x(), ps.mean2d.y(), ps.conic[0], ps.conic[1], ps.conic[2], ps.opacity,
                       ps.power_cut, ps.depth, ps.color_view, ps.x0, ps.x1, ps.y0, ps.y1});
    }
}

} // namespace

Vec3 splat_color(const GaussianSplat& splat, int sh_degree, const Vec3& camera_center) {
    Vec3 color = splat.color;
    if (sh_degree >= 1) {
        const Vec3 dir = (splat.mean - camera_center).normalized();
        const auto basis = sh1_basis(dir);
        for (int k = 0; k < 3; ++k)
            for (int ch = 0; ch < 3; ++ch) color[ch] += basis[k] * splat.sh1[3 * k + ch];
    }
    return color;
}

std::optional<ProjectedSplat> project_splat(const GaussianSplat& splat, int sh_degree,
                                            const CameraView& view,
                                            const RenderSettings& settings) {
    const Vec3 t = view.to_camera(splat.mean);
    if (!(t.z() > settings.near_plane)) return std::nullopt;

    const double lim_x = settings.frustum_slack * std::max(view.cx, view.width - view.cx) / view.fx;
    const double lim_y = settings.frustum_slack * std::max(view.cy, view.height - view.cy) / view.fy;
    if (std::abs(t.x() / t.z()) > lim_x || std::abs(t.y() / t.z()) > lim_y) return std::nullopt;

    const double opacity = splat.opacity();
    if (!(opacity >= settings.alpha_min)) return std::nullopt;

    const double inv_z = 1.0 / t.z();
    Eigen::Matrix<double, 2, 3> J;
    J << view.fx * inv_z, 0.0, -view.fx * t.x() * inv_z * inv_z,
        0.0, view.fy * inv_z, -view.fy * t.y() * inv_z * inv_z;
    const Eigen::Matrix<double, 2, 3> T = J * view.rotation_w2c;
    Mat2 cov2d = T * covariance_of(splat) * T.transpose();
    cov2d(0, 1) = cov2d(1, 0) = 0.5 * (cov2d(0, 1) + cov2d(1, 0));
    cov2d(0, 0) += settings.blur;
    cov2d(1, 1) += settings.blur;
    const double det = cov2d.determinant();
    if (!(det > 0.0) || !std::isfinite(det)) return std::nullopt;

    ProjectedSplat p;
    p.mean2d = view.project(t);
    p.cov2d = cov2d;
    p.conic = Vec3(cov2d(1, 1) / det, -cov2d(0, 1) / det, cov2d(0, 0) / det);
    p.depth = t.z();
    p.opacity = opacity;
    p.color_view = splat_color(splat, sh_degree, view.center());
    p.power_cut = std::log(settings.alpha_min / opacity) - 1e-9;

    // Pixels whose alpha can reach alpha_min satisfy d^T cov^-1 d <= thr.
    const double thr = 2.0 * std::log(opacity / settings.alpha_min);
    const double rx = std::sqrt(std::max(0.0, thr * cov2d(0, 0)));
    const double ry = std::sqrt(std::max(0.0, thr * cov2d(1, 1)));
    const double fx0 = std::ceil(p.mean2d.x() - rx - 0.5);
    const double fx1 = std::floor(p.mean2d.x() + rx - 0.5) + 1.0;
    const double fy0 = std::ceil(p.mean2d.y() - ry - 0.5);
    const double fy1 = std::floor(p.mean2d.y() + ry - 0.5) + 1.0;
    p.x0 = static_cast<int>(std::clamp(fx0, 0.0, static_cast<double>(view.width)));
    p.x1 = static_cast<int>(std::clamp(fx1, 0.0, static_cast<double>(view.width)));
    p.y0 = static_cast<int>(std::clamp(fy0, 0.0, static_cast<double>(view.height)));
    p.y1 = static_cast<int>(std::clamp(fy1, 0.0, static_cast<double>(view.height)));
    if (p.x0 >= p.x1 || p.y0 >= p.y1) return std::nullopt;
    return p;
}

ForwardState render_forward(const Scene& scene, const CameraView& view,
                            const RenderSettings& settings) {
    view.validate(1e-6);
    const int W = view.width, H = view.height;
    ForwardState fs;

    // Project.
    std::vector<std::optional<ProjectedSplat>> maybe(scene.splats.size());
    parallel_for(0, scene.splats.size(), [&](std::size_t i) {
        maybe[i] = project_splat(scene.splats[i], scene.sh_degree, view, settings);
    });
    for (std::size_t i = 0; i < maybe.size(); ++i) {
        if (maybe[i]) {
            fs.projected.push_back(*maybe[i]);
            fs.source.push_back(static_cast<int>(i));
        }
    }

    // Global front-to-back order. Ties are broken on splat content, never on
    // storage position, so the image does not depend on splat order.
    std::vector<int> order(fs.projected.size());
    std::iota(order.begin(), order.end(), 0);
    auto key = [&](int p) {
        const auto& s = scene.splats[fs.source[p]];
        return std::make_tuple(fs.projected[p].depth, s.mean.x(), s.mean.y(), s.mean.z(),
                               s.opacity_logit, s.log_scale.x(), s.log_scale.y(),
                               s.log_scale.z(), s.color.x(), s.color.y(), s.color.z());
    };
    std::sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });

    // Bin into tiles preserving the global order.
    const int ts = settings.tile_size;
    fs.tiles_x = (W + ts - 1) / ts;
    fs.tiles_y = (H + ts - 1) / ts;
    const int tile_count = fs.tiles_x * fs.tiles_y;
    fs.tile_offsets.assign(tile_count + 1, 0);
    for (int p : order) {
        const auto& ps = fs.projected[p];
        for (int ty = ps.y0 / ts; ty <= (ps.y1 - 1) / ts; ++ty)
            for (int tx = ps.x0 / ts; tx <= (ps.x1 - 1) / ts; ++tx)
                ++fs.tile_offsets[ty * fs.tiles_x + tx + 1];
    }
    for (int t = 0; t < tile_count; ++t) fs.tile_offsets[t + 1] += fs.tile_offsets[t];
    fs.tile_entries.assign(fs.tile_offsets.back(), 0);
    std::vector<int> cursor(fs.tile_offsets.begin(), fs.tile_offsets.end() - 1);
    for (int p : order) {
        const auto& ps = fs.projected[p];
        for (int ty = ps.y0 / ts; ty <= (ps.y1 - 1) / ts; ++ty)
            for (int tx = ps.x0 / ts; tx <= (ps.x1 - 1) / ts; ++tx)
                fs.tile_entries[cursor[ty * fs.tiles_x + tx]++] = p;
    }

    fs.raw_rgb = Image(W, H);
    fs.image.alpha.assign(static_cast<std::size_t>(W) * H, 0.0);
    fs.image.depth.assign(static_cast<std::size_t>(W) * H, 0.0);
    const Vec3 bg = scene.background;

    parallel_for(0, tile_count, [&](std::size_t tile) {
        const int tx = static_cast<int>(tile) % fs.tiles_x;
        const int ty = static_cast<int>(tile) / fs.tiles_x;
        thread_local std::vector<TileSplat> local;
        gather_tile(fs, fs.tile_offsets[tile], fs.tile_offsets[tile + 1], local);
        const int n = static_cast<int>(local.size());
        for (int y = ty * ts; y < std::min(H, (ty + 1) * ts); ++y) {
            for (int x = tx * ts; x < std::min(W, (tx + 1) * ts); ++x) {
                const double px = x + 0.5, py = y + 0.5;
                double T = 1.0;
                Vec3 C = Vec3::Zero();
                double depth = 0.0;
                for (int k = 0; k < n; ++k) {
                    const TileSplat& ps = local[k];
                    if (x < ps.x0 || x >= ps.x1 || y < ps.y0 || y >= ps.y1) continue;
                    const double dx = px - ps.mx, dy = py - ps.my;
                    const double power = -0.5 * (ps.a * dx * dx + 2.0 * ps.b * dx * dy + ps.c * dy * dy);
                    if (power > 0.0 || power < ps.cut) continue;
                    const double alpha = std::min(settings.alpha_max, ps.opacity * std::exp(power));
                    if (alpha < settings.alpha_min) continue;
                    const double w = T * alpha;
                    C += w * ps.color;
                    depth += w * ps.depth;
                    T *= 1.0 - alpha;
                    if (T < settings.min_transmittance) break;
                }
                C += T * bg;
                const std::size_t pix = static_cast<std::size_t>(y) * W + x;
                for (int ch = 0; ch < 3; ++ch) fs.raw_rgb.data[3 * pix + ch] = C[ch];
                fs.image.alpha[pix] = 1.0 - T;
                fs.image.depth[pix] = depth;
            }
        }
    });

    fs.image.rgb = fs.raw_rgb;
    for (double& v : fs.image.rgb.data) v = std::clamp(v, 0.0, 1.0);
    return fs;
}

RenderedImage render(const Scene& scene, const CameraView& view, const RenderSettings& settings) {
    return render_forward(scene, view, settings).image;
}

bool RenderGradients::all_finite() const {
    for (const auto& g : splats) {
        if (!g.mean.allFinite() || !g.log_scale.allFinite() || !g.rotation.allFinite() ||
            !std::isfinite(g.opacity_logit) || !g.color.allFinite())
            return false;
        for (double v : g.sh1)
            if (!std::isfinite(v)) return false;
    }
    return true;
}

double RenderGradients::squared_norm() const {
    double sum = 0.0;
    for (const auto& g : splats) {
        sum += g.mean.squaredNorm() + g.log_scale.squaredNorm() + g.rotation.squaredNorm() +
               g.opacity_logit * g.opacity_logit + g.color.squaredNorm();
        for (double v : g.sh1) sum += v * v;
    }
    return sum;
}

namespace {

// dR/dq for R(q) with q = (w, x, y, z) already normalized.
std::array<Mat3, 4> rotation_jacobian(const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    std::array<Mat3, 4> d;
    d[0] << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
    d[1] << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
    d[2] << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
    d[3] << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
    return d;
}

// Chains screen-space partials of one projected splat back to its parameters.
void backward_splat(const GaussianSplat& splat, int sh_degree, const CameraView& view,
                    const ProjectedSplat& ps, const double* g2d, SplatGradient& out) {
    const Vec2 d_mean2d(g2d[0], g2d[1]);
    const double ga = g2d[2], gb = g2d[3], gc = g2d[4];
    const double d_opacity = g2d[5];
    const Vec3 d_color(g2d[6], g2d[7], g2d[8]);

    out.visible = true;
    out.opacity_logit += d_opacity * ps.opacity * (1.0 - ps.opacity);

    Vec3 d_mean = Vec3::Zero();

    // Color and view-dependent SH.
    out.color += d_color;
    if (sh_degree >= 1) {
        const Vec3 v = splat.mean - view.center();
        const double len = v.norm();
        const Vec3 dir = v / len;
        const auto basis = sh1_basis(dir);
        std::array<double, 3> d_basis{};
        for (int k = 0; k < 3; ++k) {
            for (int ch = 0; ch < 3; ++ch) {
                out.sh1[3 * k + ch] += d_color[ch] * basis[k];
                d_basis[k] += d_color[ch] * splat.sh1[3 * k + ch];
            }
        }
        const Vec3 d_dir(-kShC1 * d_basis[2], -kShC1 * d_basis[0], kShC1 * d_basis[1]);
        d_mean += (d_dir - dir * dir.dot(d_dir)) / len;
    }

    // Conic -> 2D covariance.
    Mat2 K;
    K << ps.conic[0], ps.conic[1], ps.conic[1], ps.conic[2];
    Mat2 gK;
    gK << ga, 0.5 * gb, 0.5 * gb, gc;
    const Mat2 gV = -K * gK * K;

    // 2D covariance -> 3D covariance and projection Jacobian.
    const Vec3 t = view.to_camera(splat.mean);
    const double z = t.z(), inv_z = 1.0 / z, inv_z2 = inv_z * inv_z, inv_z3 = inv_z2 * inv_z;
    Eigen::Matrix<double, 2, 3> J;
    J << view.fx * inv_z, 0.0, -view.fx * t.x() * inv_z2, 0.0, view.fy * inv_z,
        -view.fy * t.y() * inv_z2;
    const Mat3& W = view.rotation_w2c;
    const Eigen::Matrix<double, 2, 3> T = J * W;
    const Mat3 R = quaternion_to_matrix(splat.rotation);
    const Vec3 s = splat.scale();
    const Mat3 M = R * s.asDiagonal();
    const Mat3 Sigma = M * M.transpose();

    const Mat3 gSigma = T.transpose() * gV * T;
    const Eigen::Matrix<double, 2, 3> gT = 2.0 * gV * T * Sigma;
    const Eigen::Matrix<double, 2, 3> gJ = gT * W.transpose();

    Vec3 d_t = Vec3::Zero();
    d_t.x() += gJ(0, 2) * (-view.fx * inv_z2);
    d_t.y() += gJ(1, 2) * (-view.fy * inv_z2);
    d_t.z() += gJ(0, 0) * (-view.fx * inv_z2) + gJ(0, 2) * (2.0 * view.fx * t.x() * inv_z3) +
               gJ(1, 1) * (-view.fy * inv_z2) + gJ(1, 2) * (2.0 * view.fy * t.y() * inv_z3);

    // Projected mean.
    d_t.x() += d_mean2d.x() * view.fx * inv_z;
    d_t.y() += d_mean2d.y() * view.fy * inv_z;
    d_t.z() += -d_mean2d.x() * view.fx * t.x() * inv_z2 - d_mean2d.y() * view.fy * t.y() * inv_z2;

    d_mean += W.transpose() * d_t;
    out.mean += d_mean;
    out.mean2d_ndc += Vec2(d_mean2d.x() * 0.5 * view.width, d_mean2d.y() * 0.5 * view.height);

    // Sigma = M M^T, M = R diag(s).
    const Mat3 gM = 2.0 * gSigma * M;
    for (int k = 0; k < 3; ++k) {
        double d_s = 0.0;
        for (int i = 0; i < 3; ++i) d_s += gM(i, k) * R(i, k);
        out.log_scale[k] += d_s * s[k];
    }
    const Mat3 gR = gM * s.asDiagonal();
    const double qnorm = splat.rotation.norm();
    const Vec4 qn = splat.rotation / qnorm;
    const auto dR = rotation_jacobian(qn);
    Vec4 d_qn;
    for (int j = 0; j < 4; ++j) d_qn[j] = gR.cwiseProduct(dR[j]).sum();
    out.rotation += (d_qn - qn * qn.dot(d_qn)) / qnorm;
}

} // namespace

void render_backward(const Scene& scene, const CameraView& view, const ForwardState& fs,
                     const Image& dloss_drgb, RenderGradients& grads,
                     const RenderSettings& settings) {
    const int W = view.width, H = view.height;
    if (dloss_drgb.width != W || dloss_drgb.height != H)
        throw ShapeMismatch("render_backward: gradient image does not match the view");
    if (grads.splats.size() != scene.splats.size()) grads.reset(scene.splats.size());

    std::vector<double> entry_grad(fs.tile_entries.size() * kEntryGrad, 0.0);
    const int ts = settings.tile_size;
    const int tile_count = fs.tiles_x * fs.tiles_y;
    const Vec3 bg = scene.background;

    parallel_for(0, tile_count, [&](std::size_t tile) {
        const int tx = static_cast<int>(tile) % fs.tiles_x;
        const int ty = static_cast<int>(tile) / fs.tiles_x;
        const int begin = fs.tile_offsets[tile];
        thread_local std::vector<TileSplat> local;
        gather_tile(fs, begin, fs.tile_offsets[tile + 1], local);
        const int n = static_cast<int>(local.size());
        thread_local std::vector<Contribution> list;
        for (int y = ty * ts; y < std::min(H, (ty + 1) * ts); ++y) {
            for (int x = tx * ts; x < std::min(W, (tx + 1) * ts); ++x) {
                const std::size_t pix = static_cast<std::size_t>(y) * W + x;
                Vec3 g;
                bool any = false;
                for (int ch = 0; ch < 3; ++ch) {
                    const double raw = fs.raw_rgb.data[3 * pix + ch];
                    g[ch] = (raw >= 0.0 && raw <= 1.0) ? dloss_drgb.data[3 * pix + ch] : 0.0;
                    any = any || g[ch] != 0.0;
                }
                if (!any) continue;

                // Recompute this pixel's front-to-back contributors.
                const double px = x + 0.5, py = y + 0.5;
                list.clear();
                double T = 1.0;
                for (int k = 0; k < n; ++k) {
                    const TileSplat& ps = local[k];
                    if (x < ps.x0 || x >= ps.x1 || y < ps.y0 || y >= ps.y1) continue;
                    const double dx = px - ps.mx, dy = py - ps.my;
                    const double power = -0.5 * (ps.a * dx * dx + 2.0 * ps.b * dx * dy + ps.c * dy * dy);
                    if (power > 0.0 || power < ps.cut) continue;
                    const double gauss = std::exp(power);
                    const double raw_alpha = ps.opacity * gauss;
                    const double alpha = std::min(settings.alpha_max, raw_alpha);
                    if (alpha < settings.alpha_min) continue;
                    list.push_back({k, alpha, gauss, T, dx, dy, raw_alpha > settings.alpha_max});
                    T *= 1.0 - alpha;
                    if (T < settings.min_transmittance) break;
                }

                // Back to front: B is the normalized color seen behind splat i.
                Vec3 B = bg;
                for (auto it = list.rbegin(); it != list.rend(); ++it) {
                    const TileSplat& ps = local[it->entry];
                    double* eg = &entry_grad[static_cast<std::size_t>(begin + it->entry) * kEntryGrad];
                    const double w = it->transmittance * it->alpha;
                    for (int ch = 0; ch < 3; ++ch) eg[6 + ch] += g[ch] * w;
                    const double d_alpha = it->transmittance * g.dot(ps.color - B);
                    B = it->alpha * ps.color + (1.0 - it->alpha) * B;
                    if (it->clamped) continue;
                    eg[5] += d_alpha * it->gauss;
                    const double d_power = d_alpha * it->alpha;
                    const double dx = it->dx, dy = it->dy;
                    eg[0] += d_power * (ps.a * dx + ps.b * dy);
                    eg[1] += d_power * (ps.b * dx + ps.c * dy);
                    eg[2] += d_power * (-0.5 * dx * dx);
                    eg[3] += d_power * (-dx * dy);
                    eg[4] += d_power * (-0.5 * dy * dy);
                }
            }
        }
    });

    // Fixed-order reduction: tiles in index order, entries in list order.
    std::vector<double> per_splat(fs.projected.size() * kEntryGrad, 0.0);
    std::vector<char> touched(fs.projected.size(), 0);
    for (std::size_t e = 0; e < fs.tile_entries.size(); ++e) {
        const int p = fs.tile_entries[e];
        touched[p] = 1;
        for (int k = 0; k < kEntryGrad; ++k)
            per_splat[static_cast<std::size_t>(p) * kEntryGrad + k] += entry_grad[e * kEntryGrad + k];
    }

    parallel_for(0, fs.projected.size(), [&](std::size_t p) {
        if (!touched[p]) return;
        const int src = fs.source[p];
        backward_splat(scene.splats[src], scene.sh_degree, view, fs.projected[p],
                       &per_splat[p * kEntryGrad], grads.splats[src]);
    });
}

RenderLossResult render_with_gradients(const Scene& scene, const CameraView& view,
                                       const Image& target, const PhotometricLoss& loss,
                                       const RenderSettings& settings) {
    if (target.width != view.width || target.height != view.height)
        throw ShapeMismatch("render_with_gradients: target does not match the view size");
    ForwardState fs = render_forward(scene, view, settings);
    Image grad(view.width, view.height);
    const double value = photometric_loss(target, fs.image.rgb, loss.lambda_ssim, loss.weight, &grad);
    RenderLossResult result;
    result.loss = value;
    result.gradients.reset(scene.splats.size());
    render_backward(scene, view, fs, grad, result.gradients, settings);
    result.image = std::move(fs.image);
    return result;
}

} // namespace dragon
