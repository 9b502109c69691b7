// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "noise_oracle.h"
#include "test_support.h"

#include "snk/harness.h"
#include "snk/noise_field.h"
#include "snk/scene_io.h"
#include "snk/stats.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace snk;

TEST(NoiseField, CountsOneAnchoredPairPerLatentPixelAndChannel) {
    const Scene scene = test::frontoPlane(3.0);
    const std::vector<CameraView> views{test::axisCamera(0, Vec3::Zero(), 96, 96, 60.0),
                                        test::axisCamera(1, Vec3(0.1, 0, 0), 96, 96, 60.0)};
    const auto field = initField(scene, views, 3, 4);
    EXPECT_EQ(field.anchoredCount(), 2u * 12 * 12 * 4);
    EXPECT_EQ(field.anchoredCount(), 1152u);
    for (const auto &rec: field.views()) {
        EXPECT_EQ(rec.latentWidth, 12);
        EXPECT_EQ(rec.samples.size(), 12u * 12 * 4);
    }
}

TEST(NoiseField, RejectsEmptyViewList) {
    EXPECT_THROW(initField(test::frontoPlane(3.0), {}, 1), Error);
}

TEST(NoiseField, SameSeedGivesBitwiseIdenticalField) {
    const auto doc = builtinScene("desk", 128, 128, 6);
    const auto a   = initField(doc.scene, doc.cameras, 17);
    const auto b   = initField(doc.scene, doc.cameras, 17);
    const auto c   = initField(doc.scene, doc.cameras, 18);
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == c);
    EXPECT_EQ(renderNoise(a, doc.scene, doc.cameras[2]), renderNoise(b, doc.scene, doc.cameras[2]));
    EXPECT_EQ(renderNoise(a, doc.scene, doc.cameras[2]), renderNoise(a, doc.scene, doc.cameras[2]));
}

TEST(NoiseField, WeightsAreDistinctWithinChannelAndOnTheGrid) {
    const auto doc   = builtinScene("desk", 128, 128, 8);
    const auto field = initField(doc.scene, doc.cameras, 5);
    for (int c = 0; c < field.channels(); ++c) {
        std::vector<double> w;
        for (const auto &rec: field.views()) {
            for (std::size_t p = 0; p < rec.anchor.size(); ++p) {
                const double v = rec.samples[p * field.channels() + c].weight;
                ASSERT_GE(v, 0.0);
                ASSERT_LT(v, 1.0);
                ASSERT_EQ(std::ldexp(v, 53), std::floor(std::ldexp(v, 53)));
                w.push_back(v);
            }
        }
        std::ranges::sort(w);
        for (std::size_t i = 1; i < w.size(); ++i) {
            ASSERT_GT(w[i] - w[i - 1], 1e-12);
        }
    }
}

TEST(NoiseField, ChannelsAreUncorrelated) {
    const auto doc   = builtinScene("desk", 320, 320, 8);
    const auto field = initField(doc.scene, doc.cameras, 11);
    const int C      = field.channels();
    std::vector<std::vector<double>> xs(static_cast<std::size_t>(C)), ws(static_cast<std::size_t>(C));
    for (const auto &rec: field.views()) {
        for (std::size_t i = 0; i < rec.samples.size(); ++i) {
            xs[i % C].push_back(rec.samples[i].value);
            ws[i % C].push_back(rec.samples[i].weight);
        }
    }
    ASSERT_GE(xs[0].size(), 10000u);
    for (int a = 0; a < C; ++a) {
        EXPECT_LT(std::abs(stats::pearson(xs[a], ws[a])), 0.05);
        for (int b = a + 1; b < C; ++b) {
            EXPECT_LT(std::abs(stats::pearson(xs[a], xs[b])), 0.05) << a << " vs " << b;
            EXPECT_LT(std::abs(stats::pearson(ws[a], ws[b])), 0.05) << a << " vs " << b;
        }
    }
}

TEST(NoiseAggregation, MaximumWeightWins) {
    const std::vector<NoiseSample> c{{0.42f, 0.3}, {-1.7f, 0.7}};
    EXPECT_EQ(aggregateMaxWeight(c), -1.7f);
    const std::vector<NoiseSample> r{c[1], c[0]};
    EXPECT_EQ(aggregateMaxWeight(r), -1.7f);
}

TEST(RenderNoise, GatherOrderDoesNotMatter) {
    const auto doc   = builtinScene("desk", 128, 128, 8);
    const auto field = initField(doc.scene, doc.cameras, 23);
    std::vector<std::size_t> order(field.views().size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937 rng(4);
    for (const auto &view: doc.cameras) {
        const Image ref = renderNoise(field, doc.scene, view);
        for (int trial = 0; trial < 3; ++trial) {
            std::ranges::shuffle(order, rng);
            ASSERT_EQ(renderNoise(field, doc.scene, view, order), ref);
        }
    }
}

TEST(RenderNoise, MatchesBruteForceCandidateSets) {
    // Every anchored output must be the max-weight member of the oracle's
    // candidate set; empty sets fall back to the view's own sample.
    const auto doc   = builtinScene("plane", 512, 512, 2);
    const auto field = initField(doc.scene, doc.cameras, 29);
    const auto &view = doc.cameras[1];
    const auto sets  = test::candidateSets(field, doc.scene, view);
    const Image out  = renderNoise(field, doc.scene, view);
    const auto *own  = field.find(view.id());
    std::size_t mismatches = 0;
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            const std::size_t q = std::size_t(y) * out.width() + x;
            for (int c = 0; c < field.channels(); ++c) {
                float expected = own->samples[q * field.channels() + c].value;
                double best    = -1.0;
                for (const auto &[s, p]: sets[q]) {
                    const auto &sample = field.views()[s].samples[p * field.channels() + c];
                    if (sample.weight > best) {
                        best     = sample.weight;
                        expected = sample.value;
                    }
                }
                mismatches += out.at(y, x, c) == expected ? 0 : 1;
            }
        }
    }
    EXPECT_EQ(mismatches, 0u);
}

TEST(RenderNoise, CrossViewAgreementMatchesOracle) {
    const auto rig = test::twoViewPlane();
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4};
    const auto study = test::agreementStudy(rig.scene, rig.views[0], rig.views[1], seeds);
    ASSERT_GT(study.pairs, 1000u);
    EXPECT_GT(study.expected, 0.2);
    EXPECT_LT(study.expected, 1.0);
    EXPECT_NEAR(study.measured, study.expected, 0.02);
}

TEST(RenderNoise, TranslatedPlaneViewsAgreeEverywhere) {
    // A pure sideways shift maps cells one-to-one, so matched sets coincide.
    const auto doc = builtinScene("plane", 512, 512, 2);
    const std::vector<std::uint64_t> seeds{5};
    const auto study = test::agreementStudy(doc.scene, doc.cameras[0], doc.cameras[1], seeds);
    ASSERT_GT(study.pairs, 1000u);
    EXPECT_EQ(study.expected, 1.0);
    EXPECT_EQ(study.measured, 1.0);
}

TEST(RenderNoise, PooledChannelsLookStandardNormal) {
    const auto doc = builtinScene("desk", 960, 720, 1);
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    const auto report = verifyGaussian(doc.scene, doc.cameras, doc.cameras[0], seeds);
    EXPECT_GE(report.samplesPerChannel, 10000u);
    EXPECT_GE(report.minimumPasses(), 4);
}

TEST(RenderNoise, UnregisteredViewIsStillRenderable) {
    const auto doc   = builtinScene("desk", 128, 128, 4);
    const std::vector<CameraView> registered(doc.cameras.begin(), doc.cameras.begin() + 3);
    const auto field = initField(doc.scene, registered, 2);
    const Image a    = renderNoise(field, doc.scene, doc.cameras[3]);
    EXPECT_EQ(a.height(), 16);
    EXPECT_EQ(a.channels(), 4);
    EXPECT_EQ(a, renderNoise(field, doc.scene, doc.cameras[3]));
}

TEST(RefreshGeometry, SameSceneLeavesFieldUnchanged) {
    const auto doc   = builtinScene("desk", 128, 128, 6);
    const auto field = initField(doc.scene, doc.cameras, 8);
    EXPECT_TRUE(refreshGeometry(field, doc.scene, doc.scene) == field);
}

TEST(RefreshGeometry, RadiusRampPreservesValuesAndUnchangedRegions) {
    const auto doc = builtinScene("desk", 256, 256, 6);
    GeometryRamp ramp;
    ramp.firstEpoch = 1;
    ramp.lastEpoch  = 10;
    const auto steps = ramp.scenes(doc.scene);
    ASSERT_EQ(steps.size(), 10u);
    const double r0 = std::get<Sphere>(doc.scene.primitives()[1].shape).radius;
    EXPECT_NEAR(std::get<Sphere>(steps.back().second.primitives()[1].shape).radius, 1.1 * r0, 1e-12);

    auto field = initField(doc.scene, doc.cameras, 31);
    Scene current = doc.scene;
    std::size_t unchangedPixels = 0;
    for (const auto &[epoch, next]: steps) {
        const auto refreshed = refreshGeometry(field, current, next);
        const auto &sphere   = std::get<Sphere>(next.primitives()[1].shape);
        for (std::size_t v = 0; v < field.views().size(); ++v) {
            const auto &r0v = field.views()[v];
            const auto &r1v = refreshed.views()[v];
            ASSERT_EQ(r0v.samples, r1v.samples);
            for (std::size_t p = 0; p < r1v.anchor.size(); ++p) {
                if (r1v.primitive[p] == 1) {
                    ASSERT_NEAR((r1v.anchor[p] - sphere.center).norm(), sphere.radius, 1e-9);
                }
            }
        }
        for (const auto &view: doc.cameras) {
            const Image before = renderNoise(field, current, view);
            const Image after  = renderNoise(refreshed, next, view);
            const auto changed = test::changedRegion(field, refreshed, current, next, view);
            for (int y = 0; y < before.height(); ++y) {
                for (int x = 0; x < before.width(); ++x) {
                    if (changed[std::size_t(y) * before.width() + x]) {
                        continue;
                    }
                    ++unchangedPixels;
                    for (int c = 0; c < before.channels(); ++c) {
                        ASSERT_EQ(before.at(y, x, c), after.at(y, x, c)) << "epoch " << epoch << " view " << view.id();
                    }
                }
            }
        }
        field   = refreshed;
        current = next;
    }
    EXPECT_GT(unchangedPixels, 10u * 6 * 32 * 32 / 2);
}

TEST(FieldSerialisation, RoundTripsBitwise) {
    const auto doc   = builtinScene("desk", 128, 128, 4);
    const auto field = initField(doc.scene, doc.cameras, 41, 3);
    test::ScratchDir dir("field");
    saveField(field, dir / "f.snkt", dir / "f.json");
    const auto back = loadField(doc.scene, dir / "f.snkt", dir / "f.json");
    EXPECT_TRUE(back == field);
}
