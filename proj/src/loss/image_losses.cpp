// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/loss/image_losses.hpp"

#include "dragon/core/error.hpp"

#include <cmath>
#include <string>

namespace dragon {

std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(size);
    const double center = (size - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - center;
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

double l1_loss(const Image& a, const Image& b, Image* grad_b) {
    require_same_shape(a, b, "l1_loss");
    const double n = static_cast<double>(a.size());
    if (n == 0) throw InvalidInput("l1_loss: empty images");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a.data[i] - b.data[i]);
    if (grad_b) {
        if (!grad_b->same_shape(a)) *grad_b = Image(a.width, a.height);
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = b.data[i] - a.data[i];
            grad_b->data[i] = d > 0 ? 1.0 / n : (d < 0 ? -1.0 / n : 0.0);
        }
    }
    return sum / n;
}

namespace {

// One channel plane, row-major.
using Plane = std::vector<double>;

// Valid-mode separable correlation: (w, h) -> (w - k + 1, h - k + 1).
Plane filter_valid(const Plane& in, int w, int h, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int ow = w - n + 1, oh = h - n + 1;
    Plane tmp(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int d = 0; d < n; ++d) s += k[d] * in[static_cast<std::size_t>(y) * w + x + d];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    Plane out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int d = 0; d < n; ++d) s += k[d] * tmp[static_cast<std::size_t>(y + d) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

// Adjoint of filter_valid: (w - k + 1, h - k + 1) -> (w, h).
Plane filter_valid_adjoint(const Plane& in, int w, int h, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int iw = w - n + 1, ih = h - n + 1;
    Plane tmp(static_cast<std::size_t>(iw) * h, 0.0);
    for (int y = 0; y < ih; ++y)
        for (int x = 0; x < iw; ++x) {
            const double v = in[static_cast<std::size_t>(y) * iw + x];
            for (int d = 0; d < n; ++d) tmp[static_cast<std::size_t>(y + d) * iw + x] += k[d] * v;
        }
    Plane out(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < iw; ++x) {
            const double v = tmp[static_cast<std::size_t>(y) * iw + x];
            for (int d = 0; d < n; ++d) out[static_cast<std::size_t>(y) * w + x + d] += k[d] * v;
        }
    return out;
}

Plane channel(const Image& img, int c) {
    Plane p(img.pixel_count());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = img.data[3 * i + c];
    return p;
}

} // namespace

double ssim(const Image& a, const Image& b, Image* grad_b, const SsimParams& params) {
    require_same_shape(a, b, "ssim");
    const int w = a.width, h = a.height;
    if (w < params.window || h < params.window) {
        throw InvalidInput("ssim: image " + std::to_string(w) + "x" + std::to_string(h) +
                           " is smaller than the " + std::to_string(params.window) + "px window");
    }
    const auto k = gaussian_kernel(params.window, params.sigma);
    const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
    const double c2 = std::pow(params.k2 * params.dynamic_range, 2);
    const int ow = w - params.window + 1, oh = h - params.window + 1;
    const std::size_t positions = static_cast<std::size_t>(ow) * oh;
    const double norm = 1.0 / (3.0 * static_cast<double>(positions));

    if (grad_b && !grad_b->same_shape(a)) *grad_b = Image(w, h);
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const Plane x = channel(a, c), y = channel(b, c);
        Plane xx(x.size()), yy(x.size()), xy(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const Plane mu_x = filter_valid(x, w, h, k), mu_y = filter_valid(y, w, h, k);
        const Plane e_xx = filter_valid(xx, w, h, k), e_yy = filter_valid(yy, w, h, k);
        const Plane e_xy = filter_valid(xy, w, h, k);

        Plane d_mu(grad_b ? positions : 0), d_yy(grad_b ? positions : 0), d_xy(grad_b ? positions : 0);
        double sum = 0.0;
        for (std::size_t p = 0; p < positions; ++p) {
            const double mx = mu_x[p], my = mu_y[p];
            const double sxx = e_xx[p] - mx * mx;
            const double syy = e_yy[p] - my * my;
            const double sxy = e_xy[p] - mx * my;
            const double A1 = 2.0 * mx * my + c1, A2 = 2.0 * sxy + c2;
            const double B1 = mx * mx + my * my + c1, B2 = sxx + syy + c2;
            const double S = (A1 * A2) / (B1 * B2);
            sum += S;
            if (grad_b) {
                const double B = B1 * B2;
                d_mu[p] = norm * ((2.0 * mx * A2 - 2.0 * mx * A1) / B -
                                  S * (2.0 * my / B1 - 2.0 * my / B2));
                d_yy[p] = norm * (-S / B2);
                d_xy[p] = norm * (2.0 * A1 / B);
            }
        }
        total += sum;
        if (grad_b) {
            const Plane g_mu = filter_valid_adjoint(d_mu, w, h, k);
            const Plane g_yy = filter_valid_adjoint(d_yy, w, h, k);
            const Plane g_xy = filter_valid_adjoint(d_xy, w, h, k);
            for (std::size_t i = 0; i < x.size(); ++i)
                grad_b->data[3 * i + c] = g_mu[i] + 2.0 * y[i] * g_yy[i] + x[i] * g_xy[i];
        }
    }
    return total * norm;
}

double photometric_loss(const Image& gt, const Image& rendered, double lambda_ssim, double weight,
                        Image* grad_rendered) {
    require_same_shape(gt, rendered, "photometric_loss");
    if (grad_rendered && !grad_rendered->same_shape(gt)) *grad_rendered = Image(gt.width, gt.height);
    Image g_l1, g_ssim;
    const double l1 = l1_loss(gt, rendered, grad_rendered ? &g_l1 : nullptr);
    double value = l1;
    double s = 1.0;
    if (lambda_ssim != 0.0) {
        s = ssim(gt, rendered, grad_rendered ? &g_ssim : nullptr);
        value += lambda_ssim * (1.0 - s);
    }
    if (grad_rendered) {
        for (std::size_t i = 0; i < gt.size(); ++i) {
            double g = g_l1.data[i];
            if (lambda_ssim != 0.0) g -= lambda_ssim * g_ssim.data[i];
            grad_rendered->data[i] += weight * g;
        }
    }
    return weight * value;
}

} // namespace dragon
