// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/eval/metrics.hpp"

#include "dragon/core/error.hpp"
#include "dragon/core/parallel.hpp"
#include "dragon/loss/image_losses.hpp"

#include <cmath>

namespace dragon {

double psnr(const Image& a, const Image& b) {
    require_same_shape(a, b, "psnr");
    if (a.size() == 0) throw InvalidInput("psnr: empty images");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

namespace {

GroupMeans group_means(const std::vector<ImageMetrics>& images, auto&& member) {
    GroupMeans g;
    for (const auto& m : images) {
        if (!member(m.elevation)) continue;
        ++g.count;
        g.psnr += m.psnr;
        g.ssim += m.ssim;
        g.perceptual += m.perceptual;
    }
    if (g.count > 0) {
        g.psnr /= g.count;
        g.ssim /= g.count;
        g.perceptual /= g.count;
    }
    return g;
}

} // namespace

MetricReport evaluate_method(const std::string& method, const std::vector<Image>& renders,
                             const std::vector<Image>& ground_truth, const std::vector<int>& elevations,
                             const std::vector<std::string>& names, int max_elevation,
                             const PerceptualMetric& metric) {
    const std::size_t n = renders.size();
    if (ground_truth.size() != n || elevations.size() != n || names.size() != n)
        throw ShapeMismatch("evaluate_method: renders, ground truth, elevations and names differ in length");
    for (std::size_t i = 0; i < n; ++i) {
        if (elevations[i] < 0 || elevations[i] > max_elevation)
            throw InvalidInput("evaluate_method: elevation " + std::to_string(elevations[i]) + " of '" +
                               names[i] + "' is outside 0.." + std::to_string(max_elevation));
        require_same_shape(renders[i], ground_truth[i], "evaluate_method");
    }
    MetricReport r;
    r.method = method;
    r.perceptual_name = metric.name();
    r.max_elevation = max_elevation;
    r.images.resize(n);
    parallel_for(0, n, [&](std::size_t i) {
        auto& m = r.images[i];
        m.image = names[i];
        m.elevation = elevations[i];
        m.psnr = psnr(ground_truth[i], renders[i]);
        m.ssim = ssim(ground_truth[i], renders[i]);
        m.perceptual = metric.distance(ground_truth[i], renders[i]);
    });
    compute_group_means(r);
    return r;
}

void compute_group_means(MetricReport& r) {
    const int N = r.max_elevation;
    r.ground_drone = group_means(r.images, [N](int e) { return e == 0 || e == N; });
    r.mid = group_means(r.images, [N](int e) { return e > 0 && e < N; });
    r.all = group_means(r.images, [](int) { return true; });
}

} // namespace dragon
