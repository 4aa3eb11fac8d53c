// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace dragon {

/// Interleaved RGB float64 image, row-major, nominal range [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0);

    [[nodiscard]] bool empty() const { return width == 0 || height == 0; }
    [[nodiscard]] std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    [[nodiscard]] std::size_t size() const { return data.size(); }

    double& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    [[nodiscard]] double at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }

    [[nodiscard]] bool same_shape(const Image& other) const {
        return width == other.width && height == other.height;
    }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Throws ShapeMismatch unless both images have identical dimensions.
void require_same_shape(const Image& a, const Image& b, const char* what);

/// Luma-free grayscale: mean of the three channels.
std::vector<double> to_gray(const Image& img);

/// Round every value to the nearest 8-bit level (ties to even) and back.
Image quantize_8bit(const Image& img);

/// 8-bit PNG I/O. Encoding clamps to [0,1] and rounds half-to-even.
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

/// Average-pool by an integer factor; trailing rows/cols that do not fill a
/// whole block are dropped.
Image downsample(const Image& img, int factor);

Image flip_horizontal(const Image& img);

} // namespace dragon
