// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/core/error.hpp"
#include "dragon/core/parallel.hpp"
#include "dragon/render/rasterizer.hpp"
#include "support/micro_scene.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace dragon;

namespace {

// View whose principal point sits on the center of pixel (8, 8).
CameraView centered_view() {
    CameraView v = fixtures::micro_view(16, 20.0);
    v.cx = v.cy = 8.5;
    return v;
}

GaussianSplat on_axis(double depth, double opacity, const Vec3& color, double scale = 0.1) {
    GaussianSplat s;
    s.mean = Vec3(0, 0, depth);
    s.log_scale = Vec3::Constant(std::log(scale));
    s.opacity_logit = logit(opacity);
    s.color = color;
    return s;
}

} // namespace

TEST(Project, OnAxisLandsOnPrincipalPoint) {
    const CameraView v = centered_view();
    const auto p = project_splat(on_axis(3.0, 0.5, Vec3::Ones()), 0, v);
    ASSERT_TRUE(p);
    EXPECT_NEAR(p->mean2d.x(), v.cx, 1e-12);
    EXPECT_NEAR(p->mean2d.y(), v.cy, 1e-12);
    EXPECT_NEAR(p->depth, 3.0, 1e-12);
}

TEST(Project, IsotropicCovarianceScalesWithFocalOverDepth) {
    const CameraView v = centered_view();
    const RenderSettings rs;
    const double sigma = 0.2, d = 4.0;
    const auto p = project_splat(on_axis(d, 0.5, Vec3::Ones(), sigma), 0, v, rs);
    ASSERT_TRUE(p);
    const double want = std::pow(v.fx * sigma / d, 2) + rs.blur;
    EXPECT_NEAR(p->cov2d(0, 0), want, 1e-12);
    EXPECT_NEAR(p->cov2d(1, 1), want, 1e-12);
    EXPECT_NEAR(p->cov2d(0, 1), 0.0, 1e-12);
}

TEST(Project, OffAxisCovarianceMatchesNumericalJacobian) {
    std::mt19937_64 rng(17);
    CameraView v = fixtures::micro_view(64, 50.0);
    v.rotation_w2c = quaternion_to_matrix(Vec4(1.0, 0.05, -0.03, 0.02));
    v.translation_w2c = Vec3(0.1, -0.2, 0.3);
    const RenderSettings rs;
    for (int trial = 0; trial < 10; ++trial) {
        GaussianSplat s;
        s.mean = v.rotation_w2c.transpose() * (Vec3(0.4, -0.3, 3.0) - v.translation_w2c);
        s.rotation = fixtures::random_quaternion(rng);
        s.log_scale = Vec3(-1.5, -2.0, -1.0);
        s.opacity_logit = 0.0;
        const auto p = project_splat(s, 0, v, rs);
        ASSERT_TRUE(p);
        // Jacobian of world point -> pixel by central differences.
        Eigen::Matrix<double, 2, 3> Jn;
        const double h = 1e-6;
        for (int k = 0; k < 3; ++k) {
            Vec3 dp = Vec3::Zero();
            dp[k] = h;
            const Vec2 a = v.project(v.to_camera(s.mean + dp));
            const Vec2 b = v.project(v.to_camera(s.mean - dp));
            Jn.col(k) = (a - b) / (2 * h);
        }
        Mat2 want = Jn * covariance_of(s) * Jn.transpose();
        want(0, 0) += rs.blur;
        want(1, 1) += rs.blur;
        EXPECT_NEAR((p->cov2d - want).cwiseAbs().maxCoeff(), 0.0, 1e-6 * want.norm());
    }
}

TEST(Project, BehindNearPlaneIsCulled) {
    EXPECT_FALSE(project_splat(on_axis(0.1, 0.5, Vec3::Ones()), 0, centered_view()));
    EXPECT_FALSE(project_splat(on_axis(-2.0, 0.5, Vec3::Ones()), 0, centered_view()));
}

TEST(Render, EmptySceneIsBackground) {
    Scene scene;
    scene.background = Vec3(0.2, 0.3, 0.4);
    const auto img = render(scene, centered_view());
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) EXPECT_EQ(img.rgb.at(x, y, c), scene.background[c]);
}

TEST(Render, SingleSplatAtClampedAlpha) {
    Scene scene;
    scene.background = Vec3(0.1, 0.2, 0.3);
    const Vec3 c(0.9, 0.5, 0.25);
    scene.splats.push_back(on_axis(3.0, 0.999, c));
    const auto img = render(scene, centered_view());
    for (int ch = 0; ch < 3; ++ch)
        EXPECT_NEAR(img.rgb.at(8, 8, ch), 0.99 * c[ch] + 0.01 * scene.background[ch], 1e-6);
}

TEST(Render, TwoHalfAlphaSplats) {
    Scene scene;
    scene.background = Vec3(0.1, 0.2, 0.3);
    const Vec3 c1(0.9, 0.1, 0.4), c2(0.2, 0.8, 0.6);
    scene.splats.push_back(on_axis(5.0, 0.5, c2));
    scene.splats.push_back(on_axis(3.0, 0.5, c1));
    const auto img = render(scene, centered_view());
    for (int ch = 0; ch < 3; ++ch)
        EXPECT_NEAR(img.rgb.at(8, 8, ch), 0.5 * c1[ch] + 0.25 * c2[ch] + 0.25 * scene.background[ch], 1e-6);
}

TEST(Render, TransmittanceTelescopes) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        Scene scene = fixtures::random_micro_scene(rng, 5, 0);
        scene.background = Vec3::Zero();
        for (auto& s : scene.splats) s.color = Vec3::Ones();
        const auto fs = render_forward(scene, fixtures::micro_view());
        for (std::size_t p = 0; p < fs.image.alpha.size(); ++p)
            for (int c = 0; c < 3; ++c) EXPECT_NEAR(fs.raw_rgb.data[3 * p + c], fs.image.alpha[p], 1e-9);
    }
}

TEST(Render, StorageOrderInvariance) {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        Scene scene = fixtures::random_micro_scene(rng, 5, 1);
        // Force a depth tie so the content tie-break is exercised.
        scene.splats[1].mean.z() = scene.splats[0].mean.z();
        const auto ref = render(scene, fixtures::micro_view());
        std::vector<GaussianSplat> splats = scene.splats;
        for (int perm = 0; perm < 5; ++perm) {
            std::shuffle(splats.begin(), splats.end(), rng);
            Scene shuffled = scene;
            shuffled.splats = splats;
            EXPECT_EQ(render(shuffled, fixtures::micro_view()).rgb, ref.rgb);
        }
    }
}

TEST(Render, FrontSplatContributionMonotoneInOpacity) {
    Scene scene;
    scene.splats.push_back(on_axis(3.0, 0.2, Vec3::Ones()));
    scene.splats.push_back(on_axis(5.0, 0.7, Vec3(0.5, 0.5, 0.5)));
    double prev = -1.0;
    for (double o = 0.05; o < 0.99; o += 0.05) {
        scene.splats[0].opacity_logit = logit(o);
        scene.splats[1].color = Vec3::Zero();
        scene.background = Vec3::Zero();
        // With everything else black, the pixel equals the front contribution.
        const double contrib = render(scene, centered_view()).rgb.at(8, 8, 0);
        EXPECT_GE(contrib, prev);
        prev = contrib;
    }
}

TEST(Render, DeterministicAcrossThreadCounts) {
    std::mt19937_64 rng(31);
    Scene scene = fixtures::random_micro_scene(rng, 40, 1);
    const CameraView v = fixtures::micro_view(48, 60.0);
    const Image target = fixtures::random_image(rng, 48, 48);
    set_max_threads(1);
    const auto a = render_with_gradients(scene, v, target);
    set_max_threads(4);
    const auto b = render_with_gradients(scene, v, target);
    set_max_threads(0);
    EXPECT_EQ(a.image.rgb, b.image.rgb);
    EXPECT_EQ(a.loss, b.loss);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        EXPECT_EQ(a.gradients.splats[i].mean, b.gradients.splats[i].mean);
        EXPECT_EQ(a.gradients.splats[i].rotation, b.gradients.splats[i].rotation);
    }
}

TEST(Gradients, ZeroAtExactFit) {
    std::mt19937_64 rng(37);
    const Scene scene = fixtures::random_micro_scene(rng, 4, 1);
    const CameraView v = fixtures::micro_view();
    const Image target = render(scene, v).rgb;
    const auto r = render_with_gradients(scene, v, target);
    EXPECT_EQ(r.loss, 0.0);
    EXPECT_LT(std::sqrt(r.gradients.squared_norm()), 1e-10);
}

TEST(Gradients, MatchFiniteDifferences) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 6; ++trial) {
        const Scene scene = fixtures::random_micro_scene(rng, 1 + trial % 5, trial % 2);
        const CameraView v = fixtures::micro_view();
        const Image target = fixtures::random_image(rng, 16, 16);
        const auto r = fixtures::gradient_check(scene, v, target, PhotometricLoss{}, 1e-6, 1e-3, 1e-8);
        EXPECT_EQ(r.failed, 0) << "worst " << r.worst_name << " rel " << r.worst_relative;
    }
}

TEST(Gradients, SingleSplatMeanPerturbation) {
    std::mt19937_64 rng(43);
    const Scene scene = fixtures::random_micro_scene(rng, 1, 0);
    const CameraView v = fixtures::micro_view();
    const Image target = fixtures::random_image(rng, 16, 16);
    const PhotometricLoss l1_only{0.0, 1.0};
    const auto g = render_with_gradients(scene, v, target, l1_only).gradients.splats[0].mean;
    const double eps = 1e-6;
    for (int k = 0; k < 3; ++k) {
        Scene p = scene, m = scene;
        p.splats[0].mean[k] += eps;
        m.splats[0].mean[k] -= eps;
        const double fd = (render_with_gradients(p, v, target, l1_only).loss -
                           render_with_gradients(m, v, target, l1_only).loss) / (2 * eps);
        EXPECT_NEAR(g[k], fd, 1e-3 * std::max(std::abs(fd), std::abs(g[k])) + 1e-8);
    }
}

TEST(Gradients, ColorPerturbationOnlyMovesColorGradient) {
    // A single splat: perturbing its color changes the loss exactly as the
    // color gradient predicts and leaves alpha untouched.
    std::mt19937_64 rng(47);
    const Scene scene = fixtures::random_micro_scene(rng, 1, 0);
    const CameraView v = fixtures::micro_view();
    const Image target = fixtures::random_image(rng, 16, 16);
    const auto base = render_with_gradients(scene, v, target);
    Scene moved = scene;
    moved.splats[0].color += Vec3(1e-6, -1e-6, 2e-6);
    const auto after = render_with_gradients(moved, v, target);
    EXPECT_EQ(after.image.alpha, base.image.alpha);
    const double predicted = base.gradients.splats[0].color.dot(Vec3(1e-6, -1e-6, 2e-6));
    EXPECT_NEAR(after.loss - base.loss, predicted, 1e-3 * std::abs(predicted) + 1e-12);
}

TEST(Gradients, TargetShapeMismatchThrows) {
    Scene scene;
    EXPECT_THROW(render_with_gradients(scene, fixtures::micro_view(), Image(8, 8)), InvalidInput);
}
