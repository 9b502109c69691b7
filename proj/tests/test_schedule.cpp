// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "test_support.h"

#include "snk/rng.h"
#include "snk/schedule.h"

#include <gtest/gtest.h>

using namespace snk;

namespace {

/// Closed-form noise range of the standard 1600-epoch schedule.
NoiseRange
closedFormRange(int epoch) {
    if (epoch <= 500) {
        return {1.0, 1.0};
    }
    if (epoch <= 600) {
        return {0.7, 1.0};
    }
    if (epoch <= 1500) {
        const double t = (epoch - 600) / 900.0;
        return {(1.0 - t) * 0.7 + t * 0.1, (1.0 - t) * 1.0 + t * 0.4};
    }
    return {0.1, 0.4};
}

} // namespace

TEST(Schedule, StandardStageTable) {
    const auto s = DistillSchedule::standard();
    ASSERT_EQ(s.stages().size(), 7u);
    const int ends[] = {50, 150, 200, 500, 600, 1500, 1600};
    for (std::size_t i = 0; i < 7; ++i) {
        EXPECT_EQ(s.stages()[i].last, ends[i]);
        EXPECT_EQ(s.stages()[i].fitterActive, i >= 3);
    }
    EXPECT_EQ(s.firstEpoch(), 1);
    EXPECT_EQ(s.lastEpoch(), 1600);
    EXPECT_EQ(s.stageAt(550).startRange, (NoiseRange{0.7, 1.0}));
    EXPECT_TRUE(s.stageAt(1000).annealed());
    EXPECT_EQ(s.stageAt(1000).endRange, (NoiseRange{0.1, 0.4}));
}

TEST(Schedule, EveryEpochBelongsToExactlyOneStage) {
    for (const auto &s: {DistillSchedule::standard(), DistillSchedule::scaled(200), DistillSchedule::scaled(7)}) {
        for (int e = s.firstEpoch(); e <= s.lastEpoch(); ++e) {
            int owners = 0;
            for (const auto &st: s.stages()) {
                owners += (st.first <= e && e <= st.last) ? 1 : 0;
            }
            ASSERT_EQ(owners, 1) << e;
            ASSERT_TRUE(s.stageAt(e).first <= e && e <= s.stageAt(e).last);
        }
        EXPECT_THROW(s.stageAt(0), Error);
        EXPECT_THROW(s.stageAt(s.lastEpoch() + 1), Error);
    }
    try {
        DistillSchedule::standard().stageAt(1601);
    } catch (const Error &e) {
        EXPECT_STREQ(e.what(), "epoch out of range");
    }
}

TEST(Schedule, FullNoiseStagesAlwaysGiveOne) {
    const auto s = DistillSchedule::standard();
    for (int e = 1; e <= 500; ++e) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            ASSERT_EQ(noiseLevelAt(s, e, seed), 1.0);
        }
    }
}

TEST(Schedule, PreAnnealStaysInRange) {
    const auto s = DistillSchedule::standard();
    for (int e = 501; e <= 600; ++e) {
        const double l = noiseLevelAt(s, e, 9);
        ASSERT_GE(l, 0.7);
        ASSERT_LE(l, 1.0);
    }
}

TEST(Schedule, AnnealMidpoint) {
    const auto r = noiseRangeAt(DistillSchedule::standard(), 1050);
    EXPECT_NEAR(r.lo, 0.40, 1e-12);
    EXPECT_NEAR(r.hi, 0.70, 1e-12);
    const auto end = noiseRangeAt(DistillSchedule::standard(), 1500);
    EXPECT_NEAR(end.lo, 0.1, 1e-12);
    EXPECT_NEAR(end.hi, 0.4, 1e-12);
}

TEST(Schedule, NoiseLevelMatchesClosedFormExactly) {
    const auto s = DistillSchedule::standard();
    CounterRng pick(2024, {});
    for (int i = 0; i < 1000; ++i) {
        const int epoch           = 1 + int(pick.below(1600));
        const std::uint64_t seed  = pick.next();
        const NoiseRange r        = closedFormRange(epoch);
        const double u            = CounterRng(seed, {0x1a3bda, std::uint64_t(epoch), 0}).uniform();
        ASSERT_EQ(noiseLevelAt(s, epoch, seed), r.lo + u * (r.hi - r.lo)) << "epoch " << epoch;
        ASSERT_EQ(noiseRangeAt(s, epoch), r);
    }
}

TEST(Schedule, AnnealEndpointsNeverIncrease) {
    const auto s = DistillSchedule::standard();
    NoiseRange prev = noiseRangeAt(s, 601);
    for (int e = 602; e <= 1600; ++e) {
        const auto r = noiseRangeAt(s, e);
        ASSERT_LE(r.lo, prev.lo);
        ASSERT_LE(r.hi, prev.hi);
        prev = r;
    }
}

TEST(Schedule, ThreeGenerationStepsPerTrainingStep) {
    const auto s = DistillSchedule::standard();
    for (int e = 1; e <= 200; ++e) {
        ASSERT_TRUE(s.stageAt(e).isTrainStep(e));
    }
    int train = 0;
    for (int e = 201; e <= 1600; ++e) {
        train += s.stageAt(e).isTrainStep(e) ? 1 : 0;
    }
    EXPECT_EQ(train, 350);
    EXPECT_FALSE(s.stageAt(201).isTrainStep(201));
    EXPECT_FALSE(s.stageAt(203).isTrainStep(203));
    EXPECT_TRUE(s.stageAt(204).isTrainStep(204));
}

TEST(Schedule, ScalingAndJson) {
    EXPECT_EQ(DistillSchedule::scaled(1600), DistillSchedule::standard());
    const auto small = DistillSchedule::scaled(200);
    EXPECT_EQ(small.lastEpoch(), 200);
    EXPECT_EQ(DistillSchedule::fromJson(small.toJson()), small);
    EXPECT_EQ(DistillSchedule::fromJson({{"total_epochs", 200}}), small);
    EXPECT_THROW(DistillSchedule::scaled(6), Error);

    auto broken = small.toJson();
    broken["stages"][1]["first"] = broken["stages"][1]["first"].get<int>() + 1;
    EXPECT_THROW(DistillSchedule::fromJson(broken), Error);
    broken                         = small.toJson();
    broken["stages"][0]["range_start"] = {0.5, 0.2};
    EXPECT_THROW(DistillSchedule::fromJson(broken), Error);
}

TEST(Schedule, NoiseLevelIsDeterministicAndUniform) {
    const auto s = DistillSchedule::standard();
    EXPECT_EQ(noiseLevelAt(s, 900, 4), noiseLevelAt(s, 900, 4));
    EXPECT_NE(noiseLevelAt(s, 900, 4), noiseLevelAt(s, 900, 5));
    EXPECT_NE(noiseLevelAt(s, 900, 4, 0), noiseLevelAt(s, 900, 4, 1));
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 20000; ++seed) {
        sum += noiseLevelVariate(seed, 555);
    }
    EXPECT_NEAR(sum / 20000, 0.5, 0.01);
}

TEST(MixInput, Examples) {
    const Image r = test::randomImage(16, 16, 3, 1);
    const Image z = test::randomImage(16, 16, 3, 2);
    EXPECT_EQ(mixInput(r, z, 1.0), z);
    EXPECT_EQ(mixInput(r, z, 0.0), r);
    const Image m = mixInput(Image(16, 16, 3, 0.0f), z, 0.3);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            ASSERT_EQ(m.at(y, x, 1), float(0.3 * double(z.at(y, x, 1))));
        }
    }
}

TEST(MixInput, LatentNoiseIsUpsampled) {
    const Image r     = test::randomImage(16, 16, 3, 1);
    const Image noise = test::randomImage(2, 2, 4, 3);
    const Image m     = mixInput(r, noise, 1.0);
    EXPECT_EQ(m.at(7, 9, 2), noise.at(0, 1, 2));
    EXPECT_EQ(m.channels(), 3);
    EXPECT_EQ(upsampleNoise(noise, 16, 16, 4).at(15, 15, 3), noise.at(1, 1, 3));
}

TEST(MixInput, RejectsBadShapesAndLevels) {
    const Image r = test::randomImage(16, 16, 3, 1);
    EXPECT_THROW(mixInput(r, Image(5, 5, 3), 0.5), Error);
    EXPECT_THROW(mixInput(r, Image(16, 16, 2), 0.5), Error);
    EXPECT_THROW(mixInput(r, r, 1.5), Error);
    EXPECT_THROW(mixInput(r, r, -0.1), Error);
}
