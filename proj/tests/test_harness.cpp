// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "test_support.h"

#include "snk/harness.h"
#include "snk/scene_io.h"

#include <gtest/gtest.h>

#include <atomic>
#include <map>
#include <thread>

using namespace snk;

namespace {

/// Small, fast configuration on the solid desk: 12 views of 32 px.
struct SmallRun {
    SceneDocument doc = builtinScene("desk-solid", 32, 32, 12);
    RunConfig config;

    SmallRun() {
        config.schedule = DistillSchedule::scaled(40);
        config.layout   = {32, 32, 2, 2};
        config.seed     = 5;
    }
    RunReport go() const { return run(doc.scene, doc.cameras, config); }
};

std::string
dumpLines(const RunReport &r) {
    std::string s;
    for (const auto &j: r.toJsonLines()) {
        s += j.dump() + "\n";
    }
    return s;
}

} // namespace

TEST(EditBuffer, AccountingHoldsUnderConcurrency) {
    EditBuffer buffer(16);
    constexpr int kProducers = 4, kItems = 2000;
    std::atomic<int> done{0};
    std::vector<std::int64_t> lastSeen(kProducers, -1);
    std::uint64_t consumed = 0;
    std::jthread consumer([&] {
        while (auto item = buffer.pop()) {
            // FIFO per producer: generations arrive in increasing order.
            ASSERT_GT(item->generation, lastSeen[std::size_t(item->viewId)]);
            lastSeen[std::size_t(item->viewId)] = item->generation;
            ++consumed;
        }
    });
    {
        std::vector<std::jthread> producers;
        for (int p = 0; p < kProducers; ++p) {
            producers.emplace_back([&, p] {
                for (int i = 0; i < kItems; ++i) {
                    buffer.push({p, Image(), i});
                }
                ++done;
            });
        }
    }
    buffer.close();
    consumer.join();
    const auto s = buffer.stats();
    EXPECT_EQ(s.produced, std::uint64_t(kProducers * kItems));
    EXPECT_EQ(s.consumed, consumed);
    EXPECT_EQ(s.consumed + s.evicted + s.resident, s.produced);
    EXPECT_EQ(s.resident, 0u);
}

TEST(EditBuffer, EvictsOldestAndHonoursPauseAndClose) {
    EditBuffer buffer(2);
    EXPECT_FALSE(buffer.push({1, Image(), 1}));
    EXPECT_FALSE(buffer.push({2, Image(), 2}));
    EXPECT_TRUE(buffer.push({3, Image(), 3}));
    EXPECT_EQ(buffer.size(), 2u);
    EXPECT_EQ(buffer.tryPop()->viewId, 2);

    buffer.setPaused(true);
    std::atomic<bool> got{false};
    std::jthread reader([&] {
        auto item = buffer.pop();
        got       = item.has_value();
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    EXPECT_FALSE(got);
    buffer.setPaused(false);
    reader.join();
    EXPECT_TRUE(got);

    buffer.close();
    EXPECT_FALSE(buffer.pop().has_value());
    EXPECT_THROW(buffer.push({4, Image(), 4}), Error);
    const auto s = buffer.stats();
    EXPECT_EQ(s.produced, 3u);
    EXPECT_EQ(s.evicted, 1u);
    EXPECT_EQ(s.consumed, 2u);
    EXPECT_THROW(EditBuffer(0), Error);
}

TEST(Editors, IdentityAndColorMatrix) {
    const Image orig  = test::randomImage(4, 4, 3, 1);
    const Image noise = test::randomImage(4, 4, 3, 2);
    const Image zero(4, 4, 3);
    const EditInputs in{orig, zero, noise, zero, nullptr, 0.5};
    EXPECT_EQ(IdentityEditor().edit(in), orig);

    Eigen::Matrix3d m;
    m << 0.9, 0.1, 0.0, 0.05, 0.8, 0.15, 0.1, 0.1, 0.6;
    const Eigen::Vector3d b(0.05, 0.0, 0.1);
    EXPECT_EQ(ColorMatrixEditor::defaultMatrix(), m);
    EXPECT_EQ(ColorMatrixEditor::defaultBias(), b);
    const ColorMatrixEditor cm(m, b, 0.2);
    const Image out = cm.edit(in);
    for (int c = 0; c < 3; ++c) {
        double expected = b[c] + 0.2 * 0.5 * noise.at(2, 3, c);
        for (int k = 0; k < 3; ++k) {
            expected += m(c, k) * orig.at(2, 3, k);
        }
        EXPECT_NEAR(out.at(2, 3, c), expected, 1e-6);
    }
    EXPECT_FALSE(cm.targetColor(Color(0.5f, 0.5f, 0.5f)));
    const auto target = ColorMatrixEditor(m, b).targetColor(Color(1.0f, 0.0f, 0.0f));
    ASSERT_TRUE(target);
    EXPECT_NEAR((*target - Eigen::Vector3d(0.95, 0.05, 0.2)).norm(), 0.0, 1e-12);

    EXPECT_EQ(makeEditor("identity")->name(), "identity");
    EXPECT_EQ(makeEditor(nlohmann::json{{"name", "color-matrix"}, {"noise_gain", 0.1}})->name(), "color-matrix");
    EXPECT_THROW(makeEditor("sharpen"), Error);
}

TEST(TextureFitter, RunningMeanPerTexel) {
    const auto doc = builtinScene("desk-solid", 32, 32, 2);
    TextureFitter fitter(doc.scene, doc.cameras);
    const auto &v = doc.cameras[0];
    const Image orig = renderAlbedo(doc.scene, v, Resolution::Full);
    // Unobserved texels render the original albedo.
    EXPECT_EQ(fitter.render(v.id()), orig);
    EXPECT_EQ(fitter.observedTexels(), 0u);

    EXPECT_EQ(fitter.consume(v.id(), orig), 0.0);
    EXPECT_EQ(*fitter.maxTargetError(IdentityEditor()), 0.0);
    Image brighter = orig;
    for (auto &x: brighter.data()) {
        x += 0.25f;
    }
    fitter.consume(v.id(), brighter);
    EXPECT_NEAR(*fitter.maxTargetError(IdentityEditor()), 0.125, 1e-6);
    EXPECT_GT(fitter.observedTexels(), 0u);
    EXPECT_THROW(fitter.consume(99, orig), Error);
    EXPECT_THROW(fitter.consume(v.id(), Image(8, 8, 3)), Error);
}

TEST(RunConfig, JsonHandling) {
    const auto c = RunConfig::fromJson({{"n_workers", 3}, {"epochs", 50}, {"editor", "identity"}});
    EXPECT_EQ(c.workers, 3);
    EXPECT_EQ(c.slots, 3);
    EXPECT_EQ(c.schedule.lastEpoch(), 50);
    EXPECT_EQ(RunConfig::fromJson({{"n_workers", 3}, {"slots", 2}}).slots, 2);
    EXPECT_THROW(RunConfig::fromJson({{"n_wrokers", 3}}), Error);
    const RunConfig d;
    EXPECT_EQ(RunConfig::fromJson(d.toJson()).toJson(), d.toJson());
    EXPECT_EQ(d.k, 3);
    EXPECT_EQ(d.slots, 2);
}

TEST(Harness, IdentityEditorConvergesToTheOracleTexture) {
    SmallRun r;
    r.config.editor = "identity";
    const auto report = r.go();
    ASSERT_EQ(report.epochs.size(), 40u);
    for (const auto &e: report.epochs) {
        if (e.consistencyScore) {
            EXPECT_LT(*e.consistencyScore, 1e-4) << "epoch " << e.epoch;
        }
    }
    ASSERT_TRUE(report.finalTexelError);
    EXPECT_LT(*report.finalTexelError, 1e-3);
    EXPECT_GT(report.epochs.back().coverage, 0.5);
    // Fitted renders match the oracle renderings.
    for (const auto &v: report.renders) {
        EXPECT_EQ(v.image, renderAlbedo(r.doc.scene, v.view, Resolution::Full));
    }
}

TEST(Harness, ColorMatrixEditorConvergesAndRoundsNeverRaiseTheScore) {
    SmallRun r;
    const auto report = r.go();
    ASSERT_TRUE(report.finalTexelError);
    EXPECT_LT(*report.finalTexelError, 1e-3);
    EXPECT_FALSE(report.rounds.empty());

    r.config.editor = {{"name", "color-matrix"}, {"noise_gain", 0.1}};
    const auto noisy = r.go();
    EXPECT_FALSE(noisy.finalTexelError);
    ASSERT_FALSE(noisy.rounds.empty());
    for (const auto &round: noisy.rounds) {
        ASSERT_TRUE(round.rawScore && round.projectedScore);
        EXPECT_GT(*round.rawScore, 0.0);
        EXPECT_LE(*round.projectedScore, *round.rawScore);
        EXPECT_GT(round.loss, 0.0);
    }
}

TEST(Harness, SizesTheBatchAsFourKMinusThreeTimesN) {
    SmallRun r;
    r.config.slots = 3;
    const auto report = r.go();
    // Pushed items per epoch = (4k - 3) n = 27.
    EXPECT_EQ(report.epochs.front().buffer.produced, 27u);
    EXPECT_EQ(report.epochs.back().buffer.produced, 27u * 40);
    for (const auto &e: report.epochs) {
        EXPECT_EQ(e.noiseLevels.size(), 3u);
    }
}

TEST(Harness, DeterministicAcrossRepeatsAndWorkerCounts) {
    SmallRun r;
    r.config.editor  = {{"name", "color-matrix"}, {"noise_gain", 0.1}};
    r.config.slots   = 4;
    r.config.workers = 1;
    const auto one   = r.go();
    r.config.workers = 4;
    const auto four  = r.go();
    const auto again = r.go();
    EXPECT_EQ(one.textureDigest, four.textureDigest);
    EXPECT_EQ(dumpLines(one), dumpLines(four));
    EXPECT_EQ(dumpLines(four), dumpLines(again));
    for (std::size_t i = 0; i < one.renders.size(); ++i) {
        EXPECT_EQ(one.renders[i].image, four.renders[i].image);
    }
}

TEST(Harness, AsynchronousFitterKeepsBufferAccounting) {
    SmallRun r;
    r.config.deterministicReplay = false;
    r.config.workers             = 2;
    r.config.bufferCapacity      = 8;
    const auto report = r.go();
    const auto &s     = report.epochs.back().buffer;
    EXPECT_EQ(s.consumed + s.evicted + s.resident, s.produced);
    ASSERT_TRUE(report.finalTexelError);
    EXPECT_LT(*report.finalTexelError, 1e-3);
}

TEST(Harness, ReportsAsJsonLines) {
    SmallRun r;
    r.config.schedule = DistillSchedule::scaled(10);
    const auto report = r.go();
    const auto lines  = report.toJsonLines();
    ASSERT_EQ(lines.size(), report.epochs.size() + report.rounds.size() + report.refreshes.size() + 1);
    EXPECT_EQ(lines.front().at("type"), "epoch");
    EXPECT_EQ(lines.back().at("type"), "summary");
    EXPECT_TRUE(lines.back().at("texture_digest").is_string());
}

TEST(Harness, RejectsUnusableConfigs) {
    SmallRun r;
    r.config.editor = "sharpen";
    EXPECT_THROW(r.go(), Error);
    SmallRun few;
    few.config.k = 5; // needs 17 views
    EXPECT_THROW(few.go(), Error);
}

TEST(CoarseToFine, WithoutGeometryEqualsRun) {
    SmallRun r;
    r.config.schedule = DistillSchedule::scaled(16);
    const auto a = run(r.doc.scene, r.doc.cameras, r.config);
    const auto b = coarseToFine(r.doc.scene, r.doc.cameras, r.config);
    EXPECT_EQ(dumpLines(a), dumpLines(b));
}

TEST(CoarseToFine, RadiusRampKeepsNoiseAndImprovesConsistency) {
    SmallRun r;
    r.config.schedule = DistillSchedule::scaled(40);
    r.config.editor   = {{"name", "color-matrix"}, {"noise_gain", 0.1}};
    GeometryRamp ramp;
    ramp.firstEpoch   = 22;
    ramp.lastEpoch    = 40;
    r.config.geometry = ramp;
    r.config.phaseSwitchEpoch = 21;
    const auto report = coarseToFine(r.doc.scene, r.doc.cameras, r.config);
    ASSERT_EQ(report.refreshes.size(), 10u);
    for (const auto &f: report.refreshes) {
        EXPECT_TRUE(f.valuesPreserved) << "epoch " << f.epoch;
        EXPECT_GT(f.anchored, 0u);
    }
    std::optional<double> phase1, phase2;
    for (const auto &e: report.epochs) {
        EXPECT_EQ(e.phase, e.epoch < 21 ? 1 : 2);
        if (e.epoch < 21) {
            EXPECT_FALSE(e.trainStep);
        }
        (e.phase == 1 ? phase1 : phase2) = e.consistencyScore;
    }
    ASSERT_TRUE(phase1 && phase2);
    EXPECT_LT(*phase2, *phase1);
}
