// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/core/image.hpp"

#include "dragon/core/error.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace dragon {

Image::Image(int w, int h, double fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {
    if (w < 0 || h < 0) throw InvalidInput("image dimensions must be non-negative");
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch(std::string(what) + ": image shapes differ (" +
                            std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                            std::to_string(b.width) + "x" + std::to_string(b.height) + ")");
    }
}

std::vector<double> to_gray(const Image& img) {
    std::vector<double> gray(img.pixel_count());
    for (std::size_t i = 0; i < gray.size(); ++i) {
        gray[i] = (img.data[3 * i] + img.data[3 * i + 1] + img.data[3 * i + 2]) / 3.0;
    }
    return gray;
}

namespace {

unsigned char to_byte(double v) {
    // nearbyint honours the default FE_TONEAREST mode: ties go to even.
    const double scaled = std::clamp(v, 0.0, 1.0) * 255.0;
    return static_cast<unsigned char>(std::nearbyint(scaled));
}

} // namespace

Image quantize_8bit(const Image& img) {
    Image out = img;
    for (double& v : out.data) v = to_byte(v) / 255.0;
    return out;
}

void write_png(const std::filesystem::path& path, const Image& img) {
    if (img.empty()) throw InvalidInput("write_png: empty image");
    cv::Mat mat(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        auto* row = mat.ptr<unsigned char>(y);
        for (int x = 0; x < img.width; ++x) {
            // OpenCV stores BGR.
            row[3 * x + 0] = to_byte(img.at(x, y, 2));
            row[3 * x + 1] = to_byte(img.at(x, y, 1));
            row[3 * x + 2] = to_byte(img.at(x, y, 0));
        }
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6};
    if (!cv::imwrite(path.string(), mat, params)) {
        throw IoError("failed to write PNG: " + path.string());
    }
}

Image read_png(const std::filesystem::path& path) {
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (mat.empty()) throw IoError("failed to read image: " + path.string());
    Image img(mat.cols, mat.rows);
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<unsigned char>(y);
        for (int x = 0; x < mat.cols; ++x) {
            img.at(x, y, 0) = row[3 * x + 2] / 255.0;
            img.at(x, y, 1) = row[3 * x + 1] / 255.0;
            img.at(x, y, 2) = row[3 * x + 0] / 255.0;
        }
    }
    return img;
}

Image downsample(const Image& img, int factor) {
    if (factor < 1) throw InvalidInput("downsample factor must be >= 1");
    if (factor == 1) return img;
    const int w = img.width / factor;
    const int h = img.height / factor;
    Image out(w, h);
    const double inv = 1.0 / (factor * factor);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double sum = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        sum += img.at(x * factor + dx, y * factor + dy, c);
                out.at(x, y, c) = sum * inv;
            }
        }
    }
    return out;
}

Image flip_horizontal(const Image& img) {
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
    return out;
}

} // namespace dragon
