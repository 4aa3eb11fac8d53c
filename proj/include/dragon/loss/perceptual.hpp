// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dragon/core/image.hpp"

#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace dragon {

/// Distance between two images. distance(a, a) = 0, symmetric, finite.
class PerceptualMetric {
public:
    virtual ~PerceptualMetric() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual double distance(const Image& a, const Image& b) const = 0;

    /// Whether distance_with_gradient is available. Training needs it.
    [[nodiscard]] virtual bool differentiable() const { return false; }

    /// Distance plus dD/db accumulated into grad_b. Throws MetricError for
    /// metrics that are not differentiable.
    virtual double distance_with_gradient(const Image& a, const Image& b, Image& grad_b) const;
};

struct BuiltinMetricConfig {
    std::vector<int> scales{1, 2, 4, 8};
    int cell = 8;
    /// Softening of the descriptor normalization; keeps zero descriptors finite.
    double norm_eps = 1e-6;
};

/// Multi-scale cell descriptors (mean color plus an 8-direction rectified
/// gradient histogram of the gray image), compared by 1 - cosine per cell and
/// averaged over every cell of every scale. Cells pool over 8x8 pixels, so
/// small shifts move the distance much less than content changes.
class BuiltinPerceptualMetric final : public PerceptualMetric {
public:
    explicit BuiltinPerceptualMetric(BuiltinMetricConfig config = {}, std::string name = "builtin");
    [[nodiscard]] std::string name() const override { return name_; }
    [[nodiscard]] double distance(const Image& a, const Image& b) const override;
    [[nodiscard]] bool differentiable() const override { return true; }
    double distance_with_gradient(const Image& a, const Image& b, Image& grad_b) const override;

    static constexpr int kDescriptorSize = 11;
    static constexpr int kOrientationBins = 8;

private:
    double evaluate(const Image& a, const Image& b, Image* grad_b) const;

    BuiltinMetricConfig config_;
    std::string name_;
};

/// Runs `command <a.png> <b.png>` and parses one decimal from its stdout.
/// Nonzero exit or unparsable output raises MetricError. Calls on one
/// instance are serialized.
class ExternalProcessMetric final : public PerceptualMetric {
public:
    ExternalProcessMetric(std::string command, std::string name = "external");
    [[nodiscard]] std::string name() const override { return name_; }
    [[nodiscard]] double distance(const Image& a, const Image& b) const override;

private:
    std::string command_;
    std::string name_;
    mutable std::mutex mutex_;
    mutable long calls_ = 0;
};

/// "builtin", "builtin-coarse", or "external:<command>".
std::unique_ptr<PerceptualMetric> make_metric(const std::string& spec);

} // namespace dragon
