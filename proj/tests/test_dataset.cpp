#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "stirkit/dataset.hpp"
#include "stirkit/error.hpp"

using namespace stirkit;
namespace fs = std::filesystem;

namespace {

const fs::path kData = STIRKIT_DATA_DIR;
const fs::path kImages = kData / "digits-images-idx3-ubyte";
const fs::path kLabels = kData / "digits-labels-idx1-ubyte";

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                            static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Blobs, ShapeLabelsAndRange) {
    const Dataset ds = gen_blobs(5, 20, 3, 0.05, 1);
    ds.validate();
    EXPECT_EQ(ds.size(), 100u);
    EXPECT_EQ(ds.dims(), 3u);
    EXPECT_EQ(ds.class_count, 5u);
    std::vector<int> counts(5, 0);
    for (auto l : ds.labels) ++counts[l];
    for (int c : counts) EXPECT_EQ(c, 20);
    for (double v : ds.inputs.values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Blobs, CentersOnLattice) {
    // 4 classes in 2-D: L = 2, centers at 0.25 / 0.75.
    const Dataset ds = gen_blobs(4, 200, 2, 0.01, 3);
    std::vector<double> sx(4, 0), sy(4, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        sx[ds.labels[i]] += ds.inputs(i, 0) / 200;
        sy[ds.labels[i]] += ds.inputs(i, 1) / 200;
    }
    std::set<std::pair<int, int>> centers;
    for (int c = 0; c < 4; ++c) {
        EXPECT_NEAR(std::fmod(sx[c], 0.5), 0.25, 0.01);
        EXPECT_NEAR(std::fmod(sy[c], 0.5), 0.25, 0.01);
        centers.insert({static_cast<int>(std::lround(sx[c] * 4)), static_cast<int>(std::lround(sy[c] * 4))});
    }
    EXPECT_EQ(centers.size(), 4u);
}

TEST(Blobs, DeterministicPerSeed) {
    EXPECT_TRUE(same_contents(gen_blobs(3, 10, 2, 0.1, 7), gen_blobs(3, 10, 2, 0.1, 7)));
    EXPECT_FALSE(same_contents(gen_blobs(3, 10, 2, 0.1, 7), gen_blobs(3, 10, 2, 0.1, 8)));
}

TEST(Rings, Radii) {
    const Dataset ds = gen_rings(100, 0.0, 2);
    EXPECT_EQ(ds.size(), 200u);
    EXPECT_EQ(ds.class_count, 2u);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double r = std::hypot(ds.inputs(i, 0) - 0.5, ds.inputs(i, 1) - 0.5);
        EXPECT_NEAR(r, ds.labels[i] == 0 ? 0.25 : 0.45, 1e-12);
    }
}

TEST(Generators, Errors) {
    EXPECT_THROW(gen_blobs(1, 10, 2, 0.1, 0), InvalidArgument);
    EXPECT_THROW(gen_blobs(3, 10, 1, 0.1, 0), InvalidArgument);
    EXPECT_THROW(gen_blobs(3, 10, 2, -1.0, 0), InvalidArgument);
    EXPECT_THROW(gen_rings(4, 0.1, 0), InvalidArgument);
}

TEST(Idx, LoadsDigits) {
    const Dataset ds = load_idx(kImages, kLabels, 100000);
    ds.validate();
    EXPECT_EQ(ds.size(), 1797u);
    EXPECT_EQ(ds.dims(), 64u);
    EXPECT_EQ(ds.class_count, 10u);
    EXPECT_TRUE(ds.image_like);
    for (double v : ds.inputs.values()) EXPECT_DOUBLE_EQ(std::round(v * 255.0), v * 255.0);
    const auto bytes = read_bytes(kLabels);
    for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(ds.labels[i], bytes[8 + i]);
}

TEST(Idx, LimitCapsSamples) {
    const Dataset ds = load_idx(kImages, kLabels, 50);
    EXPECT_EQ(ds.size(), 50u);
    const Dataset full = load_idx(kImages, kLabels, 100000);
    EXPECT_EQ(ds.inputs.row(49)[10], full.inputs.row(49)[10]);
}

TEST(Idx, RejectsMalformedFiles) {
    const auto dir = stirkit::testing::scratch_dir("idx");
    auto img = read_bytes(kImages);
    auto lab = read_bytes(kLabels);

    auto bad_magic = img;
    bad_magic[3] = 0x01;
    write_bytes(dir / "bad_magic", bad_magic);
    EXPECT_THROW(load_idx(dir / "bad_magic", kLabels, 100000), FormatError);

    write_bytes(dir / "trunc", std::vector<unsigned char>(img.begin(), img.begin() + 1000));
    EXPECT_THROW(load_idx(dir / "trunc", kLabels, 100000), FormatError);

    write_bytes(dir / "hdr", std::vector<unsigned char>(img.begin(), img.begin() + 6));
    EXPECT_THROW(load_idx(dir / "hdr", kLabels, 100000), FormatError);

    auto short_labels = lab;
    short_labels[7] = 0x10;  // count 16 ≠ 1797
    write_bytes(dir / "count", short_labels);
    EXPECT_THROW(load_idx(kImages, dir / "count", 100000), FormatError);

    EXPECT_THROW(load_idx(dir / "missing", kLabels, 10), FormatError);
}

TEST(Split, NestedPrefixesAndFixedHoldout) {
    const Dataset ds = gen_blobs(3, 40, 2, 0.05, 1);
    const SplitPlan plan{{20, 50, 90}, 30, 5};
    std::vector<Dataset> trains;
    Dataset holdout;
    for (std::size_t s = 0; s < 3; ++s) {
        auto [tr, ho] = subset(ds, plan, s);
        EXPECT_EQ(tr.size(), plan.increments[s]);
        EXPECT_EQ(ho.size(), 30u);
        if (s > 0) EXPECT_TRUE(same_contents(ho, holdout));
        holdout = ho;
        trains.push_back(tr);
    }
    for (std::size_t s = 1; s < 3; ++s)
        for (std::size_t i = 0; i < trains[s - 1].size(); ++i)
            ASSERT_EQ(trains[s].inputs.row(i)[0], trains[s - 1].inputs.row(i)[0]);
}

TEST(Split, TrainAndHoldoutDisjoint) {
    Dataset ds = gen_blobs(2, 25, 2, 0.05, 1);
    for (std::size_t i = 0; i < ds.size(); ++i) ds.inputs(i, 0) = i / 100.0;  // tag rows
    auto [tr, ho] = subset(ds, SplitPlan{{30}, 20, 9}, 0);
    std::set<double> seen;
    for (std::size_t i = 0; i < tr.size(); ++i) seen.insert(tr.inputs(i, 0));
    for (std::size_t i = 0; i < ho.size(); ++i) EXPECT_EQ(seen.count(ho.inputs(i, 0)), 0u);
    EXPECT_EQ(seen.size() + ho.size(), 50u);
}

TEST(Split, Errors) {
    const Dataset ds = gen_blobs(2, 10, 2, 0.05, 1);
    EXPECT_THROW(subset(ds, SplitPlan{{}, 0, 0}, 0), InvalidArgument);
    EXPECT_THROW(subset(ds, SplitPlan{{10, 5}, 0, 0}, 0), InvalidArgument);
    EXPECT_THROW(subset(ds, SplitPlan{{15}, 10, 0}, 0), InvalidArgument);
    EXPECT_THROW(subset(ds, SplitPlan{{5}, 0, 0}, 1), InvalidArgument);
}

TEST(Csv, RoundTripIsBitExact) {
    const auto dir = stirkit::testing::scratch_dir("csv");
    const Dataset ds = gen_blobs(3, 15, 4, 0.2, 11);
    save_csv(ds, dir / "d.csv");
    const Dataset back = load_csv(dir / "d.csv");
    EXPECT_TRUE(same_contents(ds, back));
    EXPECT_EQ(ds.inputs.values(), back.inputs.values());
}

TEST(Csv, RejectsMalformed) {
    const auto dir = stirkit::testing::scratch_dir("csv_bad");
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream(dir / name) << text;
        return dir / name;
    };
    EXPECT_THROW(load_csv(write("empty.csv", "")), FormatError);
    EXPECT_THROW(load_csv(write("hdr.csv", "y,f0\n0,0.5\n")), FormatError);
    EXPECT_THROW(load_csv(write("cols.csv", "label,f0,f1\n0,0.5\n")), FormatError);
    EXPECT_THROW(load_csv(write("num.csv", "label,f0\n0,abc\n")), FormatError);
    EXPECT_THROW(load_csv(write("lab.csv", "label,f0\nx,0.5\n")), FormatError);
    EXPECT_THROW(load_csv(write("range.csv", "label,f0\n0,1.5\n1,0.2\n")), InvalidArgument);
    EXPECT_THROW(load_csv(dir / "nope.csv"), FormatError);
}

TEST(Dataset, ValidateCatchesInvariants) {
    Dataset ds = gen_blobs(2, 10, 2, 0.05, 1);
    ds.labels[0] = 7;
    EXPECT_THROW(ds.validate(), InvalidArgument);
    ds = gen_blobs(2, 10, 2, 0.05, 1);
    ds.labels.pop_back();
    EXPECT_THROW(ds.validate(), InvalidArgument);
}

TEST(FormatReal, RoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5e-7}) EXPECT_EQ(std::stod(format_real(v)), v);
}
