// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/core/image.hpp"
#include "dragon/loss/perceptual.hpp"

#include <string>
#include <vector>

namespace dragon {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) for unit-range images, capped at kPsnrCap.
double psnr(const Image& a, const Image& b);

struct ImageMetrics {
    std::string image;
    int elevation = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double perceptual = 0.0;
};

struct GroupMeans {
    int count = 0; // means are 0 when count is 0
    double psnr = 0.0;
    double ssim = 0.0;
    double perceptual = 0.0;
};

struct MetricReport {
    std::string method;
    std::string perceptual_name;
    int max_elevation = 0;
    std::vector<ImageMetrics> images;
    GroupMeans ground_drone; // elevations {0, N}
    GroupMeans mid;          // elevations 1..N-1
    GroupMeans all;          // every image, weighted by image
};

/// Per-image metrics and group means. Throws ShapeMismatch on list length
/// or image size mismatches and InvalidInput on an elevation outside 0..N.
MetricReport evaluate_method(const std::string& method, const std::vector<Image>& renders,
                             const std::vector<Image>& ground_truth, const std::vector<int>& elevations,
                             const std::vector<std::string>& names, int max_elevation,
                             const PerceptualMetric& metric);

/// Recomputes the three group means from the per-image rows.
void compute_group_means(MetricReport& report);

struct Comparison {
    std::string text;
    std::string csv;
};

/// Table-style comparison of group means; a cell is marked with '*' when it
/// is strictly better than every other method's. Throws InvalidInput when
/// the reports were computed on different test sets.
Comparison compare_methods(const std::vector<MetricReport>& reports);

/// method,image,elevation,psnr,ssim,perceptual
std::string metrics_csv(const std::vector<MetricReport>& reports);

/// Inverse of metrics_csv; rows of one method must be contiguous.
std::vector<MetricReport> parse_metrics_csv(const std::string& text, int max_elevation,
                                           const std::string& perceptual_name);

/// Group means and header information as JSON text.
std::string metric_report_json(const MetricReport& report);

} // namespace dragon
