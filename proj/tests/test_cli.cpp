// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/cli/commands.hpp"
#include "dragon/cli/run_config.hpp"
#include "dragon/core/error.hpp"
#include "dragon/core/text_io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace dragon;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = -1;
    std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "dragon");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliRun r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("dragon_cli_" + name);
    fs::remove_all(d);
    return d;
}

// Small, fast dataset settings shared by the synth-based tests.
std::vector<std::string> tiny_synth(const fs::path& out, const std::string& elevations = "3") {
    return {"synth", "--out", out.string(), "--elevations", elevations,
            "--set", "dataset.images_per_orbit=3", "--set", "dataset.supersample=1",
            "--set", "camera.width=64", "--set", "camera.height=64",
            "--set", "camera.cx=32", "--set", "camera.cy=32"};
}

std::string resolved(const std::string& printed, const std::string& key) {
    std::istringstream in(printed);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind(key + " = ", 0) == 0) return line.substr(key.size() + 3);
    return {};
}

} // namespace

TEST(RunConfigTest, DefaultsParseAndRoundTrip) {
    RunConfig c;
    EXPECT_EQ(c.get_int("seed"), 1);
    EXPECT_EQ(c.get_vec3("init.background"), Vec3(0.7, 0.78, 0.88));
    RunConfig d;
    d.merge_text(c.format());
    EXPECT_EQ(d.format(), c.format());
    EXPECT_NO_THROW(c.pipeline_config());
    EXPECT_NO_THROW(c.dataset_config());
}

TEST(RunConfigTest, RejectsUnknownKeysAndBadValues) {
    RunConfig c;
    EXPECT_THROW(c.set("no.such.key", "1"), InvalidInput);
    EXPECT_THROW(c.set("seed", "abc"), InvalidInput);
    EXPECT_THROW(c.set("deterministic", "maybe"), InvalidInput);
    EXPECT_THROW(c.set("init.background", "1 2"), InvalidInput);
    EXPECT_THROW(c.merge_text("seed 4\n"), InvalidInput);
    EXPECT_NO_THROW(c.merge_text("# comment\n\nseed = 4 # trailing\n"));
    EXPECT_EQ(c.get_int("seed"), 4);
}

TEST(RunConfigTest, ModuleSeedsDiffer) {
    EXPECT_NE(module_seed(1, "train"), module_seed(1, "registration"));
    EXPECT_NE(module_seed(1, "train"), module_seed(2, "train"));
    EXPECT_EQ(module_seed(7, "pipeline"), module_seed(7, "pipeline"));
}

TEST(Cli, PrintConfigShowsEveryKey) {
    const CliRun r = cli({"--print-config"});
    EXPECT_EQ(r.code, kExitOk);
    for (const auto& k : RunConfig::keys()) EXPECT_NE(r.out.find(k + " = "), std::string::npos) << k;
}

TEST(Cli, PrecedenceDefaultsFileSetFlags) {
    const fs::path dir = fresh_dir("precedence");
    fs::create_directories(dir);
    write_text_file(dir / "run.cfg", "seed = 3\ntrain.iterations = 111\nloss.lambda_ds = 0.5\n");
    const std::string cfg = (dir / "run.cfg").string();

    CliRun r = cli({"--config", cfg, "--print-config"});
    EXPECT_EQ(resolved(r.out, "seed"), "3");
    EXPECT_EQ(resolved(r.out, "train.iterations"), "111");
    EXPECT_EQ(resolved(r.out, "loss.lambda_ssim"), "0.2");

    r = cli({"--config", cfg, "--set", "seed=4", "--set", "loss.lambda_ds=0.25", "--print-config"});
    EXPECT_EQ(resolved(r.out, "seed"), "4");
    EXPECT_EQ(resolved(r.out, "loss.lambda_ds"), "0.25");

    r = cli({"--config", cfg, "--set", "seed=4", "--seed", "5", "--deterministic", "--print-config"});
    EXPECT_EQ(resolved(r.out, "seed"), "5");
    EXPECT_EQ(resolved(r.out, "deterministic"), "true");
    fs::remove_all(dir);
}

TEST(Cli, UnknownKeyIsUsageError) {
    const CliRun r = cli({"--set", "bogus.key=1", "--print-config"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("bogus.key"), std::string::npos);
    EXPECT_EQ(cli({"no-such-subcommand"}).code, kExitUsage);
    EXPECT_EQ(cli({"eval"}).code, kExitUsage);
}

TEST(Cli, SynthIsBitwiseDeterministic) {
    const fs::path a = fresh_dir("synth_a"), b = fresh_dir("synth_b");
    ASSERT_EQ(cli(tiny_synth(a)).code, kExitOk);
    ASSERT_EQ(cli(tiny_synth(b)).code, kExitOk);
    int files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), a);
        EXPECT_EQ(read_text_file(entry.path()), read_text_file(b / rel)) << rel;
        ++files;
    }
    EXPECT_EQ(files, 3 * 3 + 3); // images, manifest, poses, run config
    EXPECT_TRUE(fs::exists(a / "run_config.txt"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Cli, SynthTwoElevationsIsGroundAndDroneOnly) {
    const fs::path a = fresh_dir("synth_two");
    ASSERT_EQ(cli(tiny_synth(a, "2")).code, kExitOk);
    EXPECT_TRUE(fs::exists(a / "images" / "e1_v0.png"));
    EXPECT_FALSE(fs::exists(a / "images" / "e2_v0.png"));
    fs::remove_all(a);
}

TEST(Cli, EvalOfCopiesIsCappedAndMissingFilesAreListed) {
    const fs::path ds = fresh_dir("eval_ds"), renders = fresh_dir("eval_renders"), out = fresh_dir("eval_out");
    ASSERT_EQ(cli(tiny_synth(ds)).code, kExitOk);
    fs::copy(ds / "images", renders);

    CliRun r = cli({"eval", renders.string(), ds.string(), "--out", out.string(), "--method", "copy"});
    EXPECT_EQ(r.code, kExitOk) << r.err;
    const std::string csv = read_text_file(out / "metrics.csv");
    EXPECT_NE(csv.find("copy,e0_v0.png,0,100"), std::string::npos);

    fs::remove(renders / "e1_v2.png");
    fs::remove(renders / "e2_v0.png");
    r = cli({"eval", renders.string(), ds.string(), "--out", out.string()});
    EXPECT_EQ(r.code, kExitFailure);
    EXPECT_NE(r.err.find("e1_v2.png"), std::string::npos);
    EXPECT_NE(r.err.find("e2_v0.png"), std::string::npos);
    EXPECT_TRUE(fs::exists(out / "report.json"));

    // Two methods side by side.
    const fs::path second = fresh_dir("eval_second"), cmp = fresh_dir("eval_cmp");
    fs::copy(ds / "images", renders, fs::copy_options::overwrite_existing | fs::copy_options::recursive);
    ASSERT_EQ(cli({"eval", renders.string(), ds.string(), "--out", out.string(), "--method", "a"}).code, kExitOk);
    ASSERT_EQ(cli({"eval", renders.string(), ds.string(), "--out", second.string(), "--method", "b"}).code, kExitOk);
    r = cli({"compare", out.string(), second.string(), "--max-elevation", "2", "--out", cmp.string()});
    EXPECT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("mid_psnr"), std::string::npos);
    EXPECT_TRUE(fs::exists(cmp / "comparison.csv"));
    for (const auto& d : {ds, renders, out, second, cmp}) fs::remove_all(d);
}
