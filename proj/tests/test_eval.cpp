// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/core/error.hpp"
#include "dragon/eval/metrics.hpp"
#include "dragon/loss/image_losses.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dragon;

namespace {

Image random_image(std::mt19937_64& rng, int w = 24, int h = 20) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(w, h);
    for (auto& x : img.data) x = u(rng);
    return img;
}

MetricReport report_with(const std::string& method, const std::vector<double>& psnrs,
                         const std::vector<int>& elevations) {
    MetricReport r;
    r.method = method;
    r.perceptual_name = "builtin";
    r.max_elevation = 4;
    for (std::size_t i = 0; i < psnrs.size(); ++i)
        r.images.push_back({"img" + std::to_string(i), elevations[i], psnrs[i], 0.5, 0.25});
    compute_group_means(r);
    return r;
}

} // namespace

TEST(Psnr, IdenticalImagesAreCapped) {
    std::mt19937_64 rng(1);
    const Image a = random_image(rng);
    EXPECT_EQ(psnr(a, a), kPsnrCap);
}

TEST(Psnr, ClosedFormAtTwentyDecibels) {
    Image a(10, 10, 0.5), b(10, 10, 0.6); // every channel off by 0.1, MSE 0.01
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
}

TEST(Psnr, MatchesScalarLoop) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 10; ++t) {
        const Image a = random_image(rng), b = random_image(rng);
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) sum += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
        EXPECT_NEAR(psnr(a, b), -10.0 * std::log10(sum / static_cast<double>(a.size())), 1e-9);
    }
}

TEST(Psnr, DecreasesWithNoiseAmplitude) {
    std::mt19937_64 rng(3);
    const Image clean = random_image(rng, 48, 40);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> unit(clean.size());
    for (auto& x : unit) x = n(rng);
    double prev = kPsnrCap;
    for (double amp : {0.01, 0.03, 0.1}) {
        Image noisy = clean;
        for (std::size_t i = 0; i < noisy.size(); ++i) noisy.data[i] += amp * unit[i];
        const double p = psnr(clean, noisy);
        EXPECT_LT(p, prev);
        prev = p;
    }
}

TEST(Psnr, ShapeMismatchThrows) {
    EXPECT_THROW(psnr(Image(4, 4), Image(5, 4)), ShapeMismatch);
}

TEST(Evaluate, IdenticalRendersArePerfectInEveryGroup) {
    std::mt19937_64 rng(4);
    std::vector<Image> gt;
    std::vector<int> elev;
    std::vector<std::string> names;
    for (int e = 0; e <= 2; ++e) {
        gt.push_back(random_image(rng, 32, 32));
        elev.push_back(e);
        names.push_back("e" + std::to_string(e));
    }
    const MetricReport r = evaluate_method("copy", gt, gt, elev, names, 2, BuiltinPerceptualMetric{});
    for (const GroupMeans* g : {&r.ground_drone, &r.mid, &r.all}) {
        EXPECT_EQ(g->psnr, kPsnrCap);
        EXPECT_EQ(g->ssim, 1.0);
        EXPECT_EQ(g->perceptual, 0.0);
    }
    EXPECT_EQ(r.ground_drone.count, 2);
    EXPECT_EQ(r.mid.count, 1);
    EXPECT_EQ(r.perceptual_name, "builtin");
}

TEST(Evaluate, OutOfRangeElevationThrows) {
    const std::vector<Image> imgs{Image(32, 32, 0.5)};
    EXPECT_THROW(evaluate_method("m", imgs, imgs, {3}, {"x"}, 2, BuiltinPerceptualMetric{}), InvalidInput);
    EXPECT_THROW(evaluate_method("m", imgs, imgs, {0, 1}, {"x"}, 2, BuiltinPerceptualMetric{}), ShapeMismatch);
}

TEST(GroupMeansTest, AllIsImageWeighted) {
    const MetricReport r = report_with("m", {10, 10, 30, 30}, {1, 2, 0, 4});
    EXPECT_DOUBLE_EQ(r.mid.psnr, 10.0);
    EXPECT_DOUBLE_EQ(r.ground_drone.psnr, 30.0);
    EXPECT_DOUBLE_EQ(r.all.psnr, 20.0);
    // Unequal group sizes: the union mean, not the mean of group means.
    const MetricReport u = report_with("m", {10, 30, 30, 30}, {1, 0, 4, 0});
    EXPECT_DOUBLE_EQ(u.all.psnr, 25.0);
}

TEST(Compare, SingleReportIsOneUnmarkedRow) {
    const Comparison c = compare_methods({report_with("solo", {20, 25}, {0, 2})});
    EXPECT_EQ(std::count(c.csv.begin(), c.csv.end(), '\n'), 2);
    EXPECT_EQ(c.csv.find('*'), std::string::npos);
}

TEST(Compare, IdenticalReportsHaveNoStrictBest) {
    const MetricReport a = report_with("a", {20, 25}, {0, 2});
    MetricReport b = a;
    b.method = "b";
    EXPECT_EQ(compare_methods({a, b}).csv.find('*'), std::string::npos);
}

TEST(Compare, GoldenCsv) {
    const MetricReport a = report_with("dragon", {30, 18}, {0, 2});
    const MetricReport b = report_with("vanilla", {30, 17}, {0, 2});
    const std::string want =
        "method,gd_psnr,gd_ssim,gd_perc,mid_psnr,mid_ssim,mid_perc,all_psnr,all_ssim,all_perc\n"
        "dragon,30.0000,0.5000,0.2500,18.0000*,0.5000,0.2500,24.0000*,0.5000,0.2500\n"
        "vanilla,30.0000,0.5000,0.2500,17.0000,0.5000,0.2500,23.5000,0.5000,0.2500\n";
    EXPECT_EQ(compare_methods({a, b}).csv, want);
}

TEST(Compare, MismatchedTestSetsThrow) {
    const MetricReport a = report_with("a", {20, 25}, {0, 2});
    const MetricReport b = report_with("b", {20}, {0});
    EXPECT_THROW(compare_methods({a, b}), InvalidInput);
}

TEST(MetricsCsv, RoundTrip) {
    const MetricReport a = report_with("dragon", {30.125, 18.5, 19.25}, {0, 2, 4});
    const MetricReport b = report_with("basic", {29.0, 15.5, 31.0}, {0, 2, 4});
    const std::string csv = metrics_csv({a, b});
    const auto back = parse_metrics_csv(csv, 4, "builtin");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(metrics_csv(back), csv);
    EXPECT_DOUBLE_EQ(back[0].all.psnr, a.all.psnr);
    EXPECT_DOUBLE_EQ(back[1].mid.psnr, b.mid.psnr);
    EXPECT_THROW(parse_metrics_csv("bad header\n", 4, "builtin"), IoError);
    EXPECT_THROW(parse_metrics_csv(csv, 3, "builtin"), InvalidInput);
}
