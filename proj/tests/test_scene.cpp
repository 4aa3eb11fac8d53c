// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/core/error.hpp"
#include "dragon/scene/scene.hpp"
#include "support/micro_scene.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace dragon;

TEST(Covariance, IdentityQuaternionUnitScaleIsIdentity) {
    GaussianSplat s;
    EXPECT_EQ(covariance_of(s), Mat3::Identity());
}

TEST(Covariance, AxisAlignedScaling) {
    GaussianSplat s;
    s.log_scale = Vec3(std::log(2.0), 0.0, 0.0);
    const Mat3 cov = covariance_of(s);
    EXPECT_NEAR((cov - Vec3(4, 1, 1).asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(Covariance, EigenvaluesMatchSquaredScales) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        GaussianSplat s;
        s.rotation = fixtures::random_quaternion(rng);
        s.log_scale = Vec3(0.3, -0.2, 0.1);
        const Mat3 cov = covariance_of(s);
        EXPECT_EQ(cov, cov.transpose());
        Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
        std::vector<double> got(es.eigenvalues().data(), es.eigenvalues().data() + 3);
        std::vector<double> want{std::exp(0.6), std::exp(-0.4), std::exp(0.2)};
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(got[k], want[k], 1e-12);
        EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
    }
}

TEST(Covariance, InvariantToQuaternionSign) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        GaussianSplat a;
        a.rotation = fixtures::random_quaternion(rng);
        a.log_scale = Vec3(0.5, -1.0, 0.2);
        GaussianSplat b = a;
        b.rotation = -a.rotation;
        EXPECT_EQ(covariance_of(a), covariance_of(b));
    }
}

TEST(Density, PeakAndOneSigma) {
    GaussianSplat s;
    s.mean = Vec3(1, 2, 3);
    EXPECT_EQ(evaluate_density(s, s.mean), 1.0);
    EXPECT_NEAR(evaluate_density(s, s.mean + Vec3(1, 0, 0)), std::exp(-0.5), 1e-15);
}

TEST(Density, MatchesDenseQuadraticForm) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        GaussianSplat s;
        s.mean = Vec3(u(rng), u(rng), u(rng));
        s.rotation = fixtures::random_quaternion(rng);
        s.log_scale = Vec3(u(rng), u(rng), u(rng));
        const Vec3 x = s.mean + 2.0 * Vec3(u(rng), u(rng), u(rng));
        // Independent oracle: build Sigma from an Eigen quaternion and solve.
        const Eigen::Quaterniond q(s.rotation[0], s.rotation[1], s.rotation[2], s.rotation[3]);
        const Mat3 R = q.normalized().toRotationMatrix();
        const Mat3 S2 = (2.0 * s.log_scale).array().exp().matrix().asDiagonal();
        const Mat3 sigma = R * S2 * R.transpose();
        const Vec3 d = x - s.mean;
        const double want = std::exp(-0.5 * d.dot(sigma.ldlt().solve(d)));
        EXPECT_NEAR(evaluate_density(s, x), want, 1e-12 * std::max(1.0, want));
    }
}

TEST(Density, RotationInvariance) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        GaussianSplat s;
        s.rotation = fixtures::random_quaternion(rng);
        s.log_scale = Vec3(u(rng), u(rng), u(rng)) * 0.5;
        s.mean = Vec3(u(rng), u(rng), u(rng));
        const Vec3 d(u(rng), u(rng), u(rng));
        const Vec4 r = fixtures::random_quaternion(rng);
        const Mat3 Rr = quaternion_to_matrix(r);
        GaussianSplat t = s;
        const Eigen::Quaterniond qs(s.rotation[0], s.rotation[1], s.rotation[2], s.rotation[3]);
        const Eigen::Quaterniond qr(r[0], r[1], r[2], r[3]);
        const Eigen::Quaterniond qt = qr * qs;
        t.rotation = Vec4(qt.w(), qt.x(), qt.y(), qt.z());
        EXPECT_NEAR(evaluate_density(s, s.mean + d), evaluate_density(t, t.mean + Rr * d), 1e-9);
    }
}

TEST(Density, IllConditionedThrows) {
    GaussianSplat s;
    s.log_scale = Vec3(0.0, 0.0, -0.5 * std::log(1e13));
    EXPECT_THROW(evaluate_density(s, Vec3::Zero()), DegenerateSplat);
    s.log_scale = Vec3(0.0, 0.0, -0.5 * std::log(1e11));
    EXPECT_NO_THROW(evaluate_density(s, Vec3::Zero()));
}

TEST(InitScene, SinglePointFallsBack) {
    const std::vector<ColoredPoint> pts{{Vec3::Zero(), Vec3(0.2, 0.4, 0.6)}};
    const Scene scene = init_scene_from_points(pts);
    ASSERT_EQ(scene.size(), 1u);
    EXPECT_EQ(scene.splats[0].mean, Vec3::Zero());
    EXPECT_NEAR(scene.splats[0].scale().x(), 0.1, 1e-15);
    EXPECT_NEAR(scene.splats[0].opacity(), 0.1, 1e-15);
}

TEST(InitScene, TetrahedronScaleIsMeanNeighborDistance) {
    std::vector<ColoredPoint> pts;
    for (const Vec3& p : {Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)})
        pts.push_back({p, Vec3(0.5, 0.5, 0.5)});
    const Scene scene = init_scene_from_points(pts);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        // Brute force over all pairs.
        std::vector<double> d;
        for (std::size_t j = 0; j < pts.size(); ++j)
            if (j != i) d.push_back((pts[i].position - pts[j].position).norm());
        std::sort(d.begin(), d.end());
        const double want = (d[0] + d[1] + d[2]) / 3.0;
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(scene.splats[i].scale()[k], want, 1e-12);
    }
}

TEST(InitScene, ColorsPreservedAndPermutationEquivariant) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ColoredPoint> pts;
    for (int i = 0; i < 200; ++i) pts.push_back({Vec3(u(rng), u(rng), u(rng)) * 5.0, Vec3(u(rng), u(rng), u(rng))});
    const Scene a = init_scene_from_points(pts);
    ASSERT_EQ(a.size(), pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(a.splats[i].color, pts[i].rgb);

    std::vector<std::size_t> perm(pts.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<ColoredPoint> shuffled;
    for (auto p : perm) shuffled.push_back(pts[p]);
    const Scene b = init_scene_from_points(shuffled);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        EXPECT_EQ(b.splats[i].mean, a.splats[perm[i]].mean);
        EXPECT_EQ(b.splats[i].log_scale, a.splats[perm[i]].log_scale);
    }
}

TEST(InitScene, KnnMatchesBruteForce) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<Vec3> pts;
    for (int i = 0; i < 300; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
    const auto got = mean_knn_distance(pts, 3);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::vector<double> d;
        for (std::size_t j = 0; j < pts.size(); ++j)
            if (j != i) d.push_back((pts[i] - pts[j]).norm());
        std::partial_sort(d.begin(), d.begin() + 3, d.end());
        EXPECT_NEAR(got[i], (d[0] + d[1] + d[2]) / 3.0, 1e-12);
    }
}

TEST(InitScene, EmptyThrows) {
    EXPECT_THROW(init_scene_from_points(std::vector<ColoredPoint>{}), InvalidInput);
}

TEST(SceneIo, RoundTripIsLossless) {
    std::mt19937_64 rng(13);
    Scene scene = fixtures::random_micro_scene(rng, 7, 1);
    scene.splats[2].mean.x() = 1.0 / 3.0;
    scene.splats[3].opacity_logit = -1e-300;
    const Scene back = deserialize_scene(serialize_scene(scene));
    ASSERT_EQ(back.size(), scene.size());
    EXPECT_EQ(back.background, scene.background);
    EXPECT_EQ(back.sh_degree, scene.sh_degree);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        EXPECT_EQ(back.splats[i].mean, scene.splats[i].mean);
        EXPECT_EQ(back.splats[i].log_scale, scene.splats[i].log_scale);
        EXPECT_EQ(back.splats[i].rotation, scene.splats[i].rotation);
        EXPECT_EQ(back.splats[i].opacity_logit, scene.splats[i].opacity_logit);
        EXPECT_EQ(back.splats[i].color, scene.splats[i].color);
        EXPECT_EQ(back.splats[i].sh1, scene.splats[i].sh1);
    }
}

TEST(SceneIo, RejectsBadHeader) {
    EXPECT_THROW(deserialize_scene("not-a-scene 1\n"), IoError);
}

TEST(CameraViewTest, ValidateRejectsNonRotation) {
    CameraView v;
    v.width = v.height = 4;
    EXPECT_NO_THROW(v.validate());
    v.rotation_w2c(0, 0) = -1.0;
    EXPECT_THROW(v.validate(), InvalidInput);
    v.rotation_w2c = Mat3::Identity() * 1.01;
    EXPECT_THROW(v.validate(), InvalidInput);
}
