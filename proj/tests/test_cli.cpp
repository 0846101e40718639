#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "helpers.hpp"
#include "stirkit/report.hpp"

namespace fs = std::filesystem;
using stirkit::read_text;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
};

CliRun cli(const std::string& args, const fs::path& cwd) {
    const std::string cmd = "cd '" + cwd.string() + "' && '" STIRKIT_CLI "' " + args + " 2>/dev/null";
    CliRun r;
    FILE* p = popen(cmd.c_str(), "r");
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

// Two small trained checkpoints shared by the tests below.
const fs::path& workdir() {
    static const fs::path dir = [] {
        auto d = stirkit::testing::scratch_dir("cli");
        cli("gen-data blobs --classes 3 --per-class 30 --dims 4 --spread 0.08 --seed 1 --out blobs.csv", d);
        cli("train --data blobs.csv --arch 4,12,8,6 --epochs 10 --seed 1 --out a.json", d);
        cli("train --data blobs.csv --arch 4,12,8,6 --epochs 10 --seed 2 --out b.json", d);
        return d;
    }();
    return dir;
}

const std::string kPair = "--ref a.json --target b.json --data blobs.csv --k 2 --n 20 --seed 5";
const std::string kStirArgs = kPair + " --steps 100";

}  // namespace

TEST(Cli, GenDataGoldenSummaryAndDeterminism) {
    const auto d = stirkit::testing::scratch_dir("cli_gen");
    const CliRun r = cli("gen-data blobs --classes 4 --per-class 10 --dims 2 --seed 3 --out x.csv", d);
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "n=40 d=2 classes=4 -> x.csv\n");
    cli("gen-data blobs --classes 4 --per-class 10 --dims 2 --seed 3 --out y.csv", d);
    EXPECT_EQ(read_text(d / "x.csv"), read_text(d / "y.csv"));
    EXPECT_EQ(read_text(d / "x.csv").substr(0, 12), "label,f0,f1\n");
}

TEST(Cli, GenDataFromIdx) {
    const auto d = stirkit::testing::scratch_dir("cli_idx");
    const std::string data = STIRKIT_DATA_DIR;
    const CliRun r = cli("gen-data idx --images " + data + "/digits-images-idx3-ubyte --labels " + data +
                          "/digits-labels-idx1-ubyte --limit 100 --seed 0 --out d.csv",
                      d);
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "n=100 d=64 classes=10 -> d.csv\n");
}

TEST(Cli, TrainReportsAccuracy) {
    const CliRun r = cli("train --data blobs.csv --arch 4,12,8,6 --epochs 3 --loss at --at-eps 0.1 --at-iters 2 "
                      "--seed 4 --out at.json",
                      workdir());
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out.rfind("accuracy=", 0), 0u);
    EXPECT_NE(r.out.find("robust_accuracy="), std::string::npos);
    EXPECT_TRUE(fs::exists(workdir() / "at.json"));
}

TEST(Cli, StirWritesReportsAndIsThreadIndependent) {
    const auto& d = workdir();
    const CliRun one = cli("stir " + kStirArgs + " --out s1", d);
    const CliRun three = cli("stir " + kStirArgs + " --threads 3 --out s3", d);
    ASSERT_EQ(one.code, 0);
    ASSERT_EQ(three.code, 0);
    EXPECT_EQ(read_text(d / "s1/stir.csv"), read_text(d / "s3/stir.csv"));
    EXPECT_EQ(one.out, read_text(d / "s1/stir.csv"));
    EXPECT_EQ(one.out.substr(0, one.out.find('\n')), "direction,stir_mean,stir_stderr,cka,agreement,delta,rejected");
    const auto report = stirkit::Json::parse(read_text(d / "s1/stir.json"));
    EXPECT_EQ(report["stir"]["k"], 2);
    EXPECT_EQ(report["results"].size(), 2u);
}

TEST(Cli, ModesAndDirections) {
    const CliRun r = cli("stir " + kStirArgs + " --mode both --direction forward --lambda 0.5 --out sm", workdir());
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("b|a,"), std::string::npos);
    EXPECT_NE(r.out.find("b|a:adversarial,"), std::string::npos);
    EXPECT_EQ(r.out.find("a|b"), std::string::npos);
}

TEST(Cli, ConfigFileWithFlagOverride) {
    const auto& d = workdir();
    std::ofstream(d / "exp.toml") << "[stir]\nref = \"a.json\"\ntarget = \"b.json\"\ndata = \"blobs.csv\"\n"
                                     "k = 1\nn = 30\nsteps = 100\nseed = 5\n";
    const CliRun r = cli("--config exp.toml stir --n 20 --out cfg", d);
    ASSERT_EQ(r.code, 0);
    const auto report = stirkit::Json::parse(read_text(d / "cfg/stir.json"));
    EXPECT_EQ(report["stir"]["k"], 1);
    EXPECT_EQ(report["stir"]["n"], 20);
}

TEST(Cli, LayerwiseAndPlotRegeneration) {
    const auto& d = workdir();
    const CliRun r = cli("layerwise " + kStirArgs + " --out lw", d);
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("slope forward="), std::string::npos);
    ASSERT_EQ(cli("plot lw/layerwise.csv --out again.svg", d).code, 0);
    EXPECT_EQ(read_text(d / "again.svg"), read_text(d / "lw/layerwise.svg"));
}

TEST(Cli, MatrixAndUpdateSim) {
    const auto& d = workdir();
    const CliRun m = cli("matrix --models a.json,b.json --data blobs.csv --k 1 --n 20 --steps 50 --seed 2 --out mx", d);
    ASSERT_EQ(m.code, 0);
    EXPECT_EQ(m.out.substr(0, m.out.find('\n')), "reference,a,b");
    const CliRun u = cli("update-sim --data blobs.csv --arch 4,8,6 --epochs 2 --increments 30,45,60 --holdout 20 "
                      "--k 1 --n 15 --steps 50 --seed 2 --out us",
                      d);
    ASSERT_EQ(u.code, 0);
    EXPECT_EQ(u.out.substr(0, u.out.find('\n')), "t,stir_forward,stir_backward");
    EXPECT_NE(u.out.find("spearman forward="), std::string::npos);
    EXPECT_TRUE(fs::exists(d / "us/update_sim.svg"));
}

TEST(Cli, ExitCodes) {
    const auto& d = workdir();
    EXPECT_EQ(cli("", d).code, 1);
    EXPECT_EQ(cli("stir --ref a.json --target b.json --data blobs.csv", d).code, 1);  // --seed is required
    EXPECT_EQ(cli("stir --ref missing.json --target b.json --data blobs.csv --seed 1", d).code, 1);
    EXPECT_EQ(cli("stir " + kStirArgs + " --rsm rbf", d).code, 1);
    EXPECT_EQ(cli("train --data blobs.csv --arch 3,8 --epochs 1 --seed 1 --out z.json", d).code, 1);
    EXPECT_EQ(cli("train --data blobs.csv --arch 4,8 --epochs 5 --lr 1e250 --momentum 0 --seed 1 --out z.json", d).code,
              2);
    fs::copy_file(d / "a.json", d / "a_copy.json", fs::copy_options::overwrite_existing);
    // Identical robust accuracies cannot confirm a strict robustness order.
    EXPECT_EQ(cli("robustness-order --models a.json,a_copy.json --data blobs.csv --k 2 --n 30 --steps 300 "
                  "--attack-eps 0.1 --seed 1 --out ro",
                  d)
                  .code,
              3);
    EXPECT_EQ(cli("--help", d).code, 0);
}
