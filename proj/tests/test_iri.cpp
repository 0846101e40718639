#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "stirkit/error.hpp"
#include "stirkit/iri.hpp"

using namespace stirkit;

namespace {

struct Fixture {
    Dataset ds = gen_blobs(4, 30, 6, 0.08, 1);
    Model m1, m2;

    Fixture() {
        TrainConfig c;
        c.epochs = 15;
        c.seed = 1;
        m1 = train(init_model(Architecture{6, {12, 6}, 4}, 1), ds, c);
        c.seed = 2;
        m2 = train(init_model(Architecture{6, {12, 6}, 4}, 2), ds, c);
    }

    Matrix sample(std::size_t n) const {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = (i * 37) % ds.size();
        return ds.inputs.select_rows(idx);
    }
};

const Fixture& fx() {
    static const Fixture f;
    return f;
}

InversionConfig quick_cfg() {
    InversionConfig c;
    c.steps = 200;
    c.alpha = 0.05;
    c.seed = 5;
    return c;
}

}  // namespace

TEST(Residual, ZeroDenominatorConvention) {
    EXPECT_EQ(relative_residual(0.0, 0.0), 0.0);
    EXPECT_EQ(relative_residual(1e-13, 0.0), 0.0);
    EXPECT_EQ(relative_residual(1e-3, 0.0), std::numeric_limits<double>::infinity());
    EXPECT_DOUBLE_EQ(relative_residual(1.0, 4.0), 0.25);
}

TEST(SeedInit, PixelGridValues) {
    const Matrix s = seed_init(5, InputDomain::pixel_grid(10), 3);
    for (double v : s.values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        EXPECT_DOUBLE_EQ(std::round(v * 255.0), v * 255.0);
    }
}

TEST(SeedInit, BoundingBoxAndRowStreams) {
    const auto& ds = fx().ds;
    const InputDomain d = InputDomain::for_dataset(ds);
    EXPECT_FALSE(d.pixels);
    const Matrix all = seed_init(10, d, 4);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < d.dims(); ++j) {
            EXPECT_GE(all(i, j), d.lo[j]);
            EXPECT_LE(all(i, j), d.hi[j]);
        }
    const Matrix tail = seed_init(4, d, 4, 6);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < d.dims(); ++j) EXPECT_EQ(tail(i, j), all(6 + i, j));
    EXPECT_NE(seed_init(1, d, 5), seed_init(1, d, 4));
}

TEST(Arbitrary, AcceptanceMatchesResidualBoundExactly) {
    const auto& f = fx();
    const Matrix x = f.sample(20);
    InversionConfig cfg = quick_cfg();
    const IriBatch b = invert_arbitrary(f.m1, x, cfg, InputDomain::for_dataset(f.ds));
    EXPECT_EQ(b.mode, IriMode::arbitrary);
    const auto r = residuals_at(f.m1, f.m1.penultimate(), x, b.x_prime);
    ASSERT_EQ(b.residuals.size(), 20u);
    for (std::size_t i = 0; i < 20; ++i) {
        EXPECT_EQ(b.residuals[i], r[i]);
        EXPECT_EQ(b.accepted[i], r[i] <= cfg.delta);
    }
    for (double v : b.x_prime.values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    EXPECT_GT(b.accepted_count(), 0u);
    EXPECT_LT(b.accepted_count(), 20u);
}

TEST(Arbitrary, DescentImprovesOnTheSeed) {
    const auto& f = fx();
    const Matrix x = f.sample(15);
    InversionConfig cfg = quick_cfg();
    const InputDomain d = InputDomain::for_dataset(f.ds);
    const IriBatch b = invert_arbitrary(f.m1, x, cfg, d);
    const auto before = residuals_at(f.m1, f.m1.penultimate(), x, seed_init(15, d, cfg.seed));
    for (std::size_t i = 0; i < 15; ++i) EXPECT_LE(b.residuals[i], before[i]);
}

TEST(Arbitrary, RowsAreIndependentAndDeterministic) {
    const auto& f = fx();
    const Matrix x = f.sample(12);
    const InversionConfig cfg = quick_cfg();
    const InputDomain d = InputDomain::for_dataset(f.ds);
    const IriBatch full = invert_arbitrary(f.m1, x, cfg, d);
    EXPECT_EQ(invert_arbitrary(f.m1, x, cfg, d).x_prime, full.x_prime);
    const std::vector<std::size_t> tail_idx{8, 9, 10, 11};
    const IriBatch tail = invert_arbitrary(f.m1, x.select_rows(tail_idx), cfg, d, 8);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) EXPECT_EQ(tail.x_prime(i, j), full.x_prime(8 + i, j));
}

TEST(Arbitrary, AllLossesDriveResidualDown) {
    const auto& f = fx();
    const Matrix x = f.sample(10);
    const InputDomain d = InputDomain::for_dataset(f.ds);
    double before = 0;
    for (double r : residuals_at(f.m1, f.m1.penultimate(), x, seed_init(10, d, quick_cfg().seed))) before += r / 10;
    for (InversionLoss loss : {InversionLoss::norm, InversionLoss::relative, InversionLoss::scaled}) {
        InversionConfig cfg = quick_cfg();
        cfg.loss = loss;
        const IriBatch b = invert_arbitrary(f.m1, x, cfg, d);
        double mean = 0;
        for (double r : b.residuals) mean += r / 10;
        EXPECT_LT(mean, 0.75 * before) << to_string(loss);
    }
}

TEST(Arbitrary, LongerBudgetAcceptsMore) {
    const auto& f = fx();
    const Matrix x = f.sample(20);
    InversionConfig cfg = quick_cfg();
    const InputDomain d = InputDomain::for_dataset(f.ds);
    const std::size_t short_run = invert_arbitrary(f.m1, x, cfg, d).accepted_count();
    cfg.steps = 2000;
    EXPECT_GE(invert_arbitrary(f.m1, x, cfg, d).accepted_count(), short_run);
}

TEST(Arbitrary, HiddenTapIsHonored) {
    const auto& f = fx();
    const Matrix x = f.sample(8);
    InversionConfig cfg = quick_cfg();
    cfg.tap = Tap::hidden(0);
    const IriBatch b = invert_arbitrary(f.m1, x, cfg, InputDomain::for_dataset(f.ds));
    const auto r = residuals_at(f.m1, Tap::hidden(0), x, b.x_prime);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(b.residuals[i], r[i]);
    cfg.tap = Tap::hidden(5);
    EXPECT_THROW(invert_arbitrary(f.m1, x, cfg, InputDomain::for_dataset(f.ds)), InvalidArgument);
}

TEST(Adversarial, AcceptanceJudgedOnReferenceOnly) {
    const auto& f = fx();
    const Matrix x = f.sample(12);
    InversionConfig cfg = quick_cfg();
    cfg.lambda = 0.5;
    const IriBatch b = invert_adversarial(f.m1, f.m2, x, cfg, InputDomain::for_dataset(f.ds));
    EXPECT_EQ(b.mode, IriMode::adversarial);
    const auto r1 = residuals_at(f.m1, f.m1.penultimate(), x, b.x_prime);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(b.accepted[i], r1[i] <= cfg.delta);
}

TEST(Adversarial, PushesTargetFurtherThanArbitrary) {
    const auto& f = fx();
    const Matrix x = f.sample(20);
    InversionConfig cfg = quick_cfg();
    cfg.lambda = 0.5;
    const InputDomain d = InputDomain::for_dataset(f.ds);
    const IriBatch arb = invert_arbitrary(f.m1, x, cfg, d);
    const IriBatch adv = invert_adversarial(f.m1, f.m2, x, cfg, d);
    auto mean_r2 = [&](const IriBatch& b) {
        const auto r = residuals_at(f.m2, f.m2.penultimate(), x, b.x_prime);
        double s = 0;
        for (double v : r) s += v / r.size();
        return s;
    };
    EXPECT_GT(mean_r2(adv), mean_r2(arb));
}

TEST(Controversial, StopsNearTargetAndIsDeterministic) {
    const auto& f = fx();
    const Matrix x = f.sample(10);
    InversionConfig cfg = quick_cfg();
    const IriBatch b = controversial(f.m1, f.m2, x, cfg);
    EXPECT_EQ(b.mode, IriMode::controversial);
    const auto r2 = residuals_at(f.m2, f.m2.penultimate(), x, b.x_prime);
    for (std::size_t i = 0; i < 10; ++i)
        if (b.accepted[i] && r2[i] >= cfg.controversial_target) {
            // The stop rule keeps the first qualifying iterate, so it is not
            // pushed far beyond the target.
            EXPECT_LT(r2[i], 10 * cfg.controversial_target);
        }
    EXPECT_EQ(controversial(f.m1, f.m2, x, cfg).x_prime, b.x_prime);
    for (double v : b.x_prime.values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Batch, DispatchAndErrors) {
    const auto& f = fx();
    const Matrix x = f.sample(4);
    const InversionConfig cfg = quick_cfg();
    const InputDomain d = InputDomain::for_dataset(f.ds);
    EXPECT_EQ(batch_iris(f.m1, nullptr, x, cfg, IriMode::arbitrary, d).x_prime,
              invert_arbitrary(f.m1, x, cfg, d).x_prime);
    EXPECT_THROW(batch_iris(f.m1, nullptr, x, cfg, IriMode::adversarial, d), InvalidArgument);
    EXPECT_EQ(batch_iris(f.m1, nullptr, Matrix(0, 6), cfg, IriMode::arbitrary, d).accepted_count(), 0u);
    EXPECT_THROW(invert_arbitrary(f.m1, Matrix(2, 3, 0.5), cfg, d), DimensionError);
    EXPECT_THROW(invert_arbitrary(f.m1, x, cfg, InputDomain::pixel_grid(3)), DimensionError);
    InversionConfig bad = cfg;
    bad.alpha = 0;
    EXPECT_THROW(bad.validate(), InvalidArgument);
    bad = cfg;
    bad.steps = 0;
    EXPECT_THROW(bad.validate(), InvalidArgument);
    bad = cfg;
    bad.delta = -1;
    EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Batch, DistanceSummaries) {
    IriBatch b;
    b.x = Matrix::from_rows({{0, 0}, {0, 0}});
    b.x_prime = Matrix::from_rows({{3, 4}, {1, 0}});
    b.accepted = {true, false};
    EXPECT_DOUBLE_EQ(b.mean_distance(), 5.0);
    EXPECT_DOUBLE_EQ(b.mean_distance_all(), 3.0);
    EXPECT_EQ(b.accepted_indices(), std::vector<std::size_t>{0});
}

TEST(Parse, ModesAndLosses) {
    for (IriMode m : {IriMode::arbitrary, IriMode::adversarial, IriMode::controversial})
        EXPECT_EQ(parse_iri_mode(to_string(m)), m);
    for (InversionLoss l : {InversionLoss::norm, InversionLoss::relative, InversionLoss::scaled})
        EXPECT_EQ(parse_inversion_loss(to_string(l)), l);
    EXPECT_THROW(parse_iri_mode("random"), InvalidArgument);
    EXPECT_THROW(parse_inversion_loss("l1"), InvalidArgument);
}
