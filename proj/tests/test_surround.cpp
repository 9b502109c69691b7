// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "test_support.h"

#include "snk/scene_io.h"
#include "snk/surround.h"
#include "snk/warp.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace snk;

namespace {

std::vector<Image>
refImages(const SurroundLayout &layout, unsigned seed) {
    std::vector<Image> refs;
    for (const auto &slot: layout.refs) {
        refs.push_back(test::randomImage(slot.rect.height, slot.rect.width, 3, seed++));
    }
    return refs;
}

} // namespace

TEST(Layout, LandscapeKFiveReproducesTheCanvasArithmetic) {
    const auto l = makeLayout(5);
    EXPECT_EQ(l.canvasWidth, 1152);
    EXPECT_EQ(l.canvasHeight, 864);
    EXPECT_EQ(224 + 8 + 688 + 8 + 224, 1152);
    EXPECT_EQ(168 + 6 + 516 + 6 + 168, 864);
    EXPECT_EQ(5 * 224 + 4 * 8, 1152);
    EXPECT_EQ(l.main.rect, (Rect{232, 174, 688, 516}));
    EXPECT_EQ(l.horizontalSplitter, 6);
    EXPECT_EQ(l.verticalSplitter, 8);
    ASSERT_EQ(l.refs.size(), 16u);
    EXPECT_EQ(l.viewCount(), 17);
    for (const auto &r: l.refs) {
        EXPECT_EQ(r.rect.width, 224);
        EXPECT_EQ(r.rect.height, 168);
    }
    // Top row, bottom row, left column, right column.
    for (int i = 0; i < 5; ++i) {
        EXPECT_EQ(l.refs[std::size_t(i)].rect, (Rect{232 * i, 0, 224, 168}));
        EXPECT_EQ(l.refs[std::size_t(5 + i)].rect, (Rect{232 * i, 696, 224, 168}));
    }
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(l.refs[std::size_t(10 + i)].rect, (Rect{0, 174 + 174 * i, 224, 168}));
        EXPECT_EQ(l.refs[std::size_t(13 + i)].rect, (Rect{928, 174 + 174 * i, 224, 168}));
    }
    // Side column of three refs spans the main height exactly.
    EXPECT_EQ(3 * 168 + 2 * 6, 516);
}

TEST(Layout, SlotsAreDisjointInsideTheCanvasWithMainAboutKMinusTwoTimesLarger) {
    for (int k = 3; k <= 8; ++k) {
        for (const auto o: {Orientation::Landscape, Orientation::Portrait}) {
            const auto l = makeLayout(k, o);
            std::vector<Rect> all{l.main.rect};
            for (const auto &r: l.refs) {
                all.push_back(r.rect);
            }
            ASSERT_EQ(all.size(), std::size_t(4 * k - 3));
            for (std::size_t i = 0; i < all.size(); ++i) {
                EXPECT_GE(all[i].x, 0);
                EXPECT_GE(all[i].y, 0);
                EXPECT_LE(all[i].right(), l.canvasWidth);
                EXPECT_LE(all[i].bottom(), l.canvasHeight);
                for (std::size_t j = i + 1; j < all.size(); ++j) {
                    EXPECT_FALSE(all[i].intersects(all[j]));
                }
            }
            const double ratio = double(l.main.rect.width) * l.main.rect.height /
                                 (double(l.refs[0].rect.width) * l.refs[0].rect.height);
            EXPECT_NEAR(ratio / ((k - 2.0) * (k - 2.0)), 1.0, 0.2) << "k=" << k;
        }
    }
}

TEST(Layout, KThreeHasEightRefsAndPortraitTransposes) {
    EXPECT_EQ(makeLayout(3).refs.size(), 8u);
    const auto p = makeLayout(5, Orientation::Portrait);
    EXPECT_EQ(p.canvasWidth, 864);
    EXPECT_EQ(p.canvasHeight, 1152);
    EXPECT_EQ(p.main.rect, (Rect{174, 232, 516, 688}));
    EXPECT_EQ(p.refs[0].rect.width, 168);
    EXPECT_EQ(p.refs[0].rect.height, 224);
    EXPECT_THROW(makeLayout(2), Error);
}

TEST(Layout, JsonRoundTrip) {
    auto l = makeLayout(4, Orientation::Portrait, {40, 30, 2, 4});
    l.main.viewId = 3;
    EXPECT_EQ(SurroundLayout::fromJson(l.toJson()), l);
}

TEST(Compose, BlackInputsLeaveWhiteExactlyOnMargins) {
    const auto l = makeLayout(5);
    std::vector<Image> refs(16, Image(168, 224, 3, 0.0f));
    const Image canvas = compose(l, Image(516, 688, 3, 0.0f), refs, 1.0f);
    std::size_t white = 0;
    for (int y = 0; y < 864; ++y) {
        for (int x = 0; x < 1152; ++x) {
            bool inSlot = l.main.rect.contains(x, y);
            for (const auto &r: l.refs) {
                inSlot = inSlot || r.rect.contains(x, y);
            }
            for (int c = 0; c < 3; ++c) {
                ASSERT_EQ(canvas.at(y, x, c), inSlot ? 0.0f : 1.0f);
            }
            white += inSlot ? 0 : 1;
        }
    }
    EXPECT_EQ(white, 1152u * 864 - 688 * 516 - 16 * 224 * 168);
}

TEST(Compose, DecomposeIsAnExactInverse) {
    for (int k = 3; k <= 6; ++k) {
        const auto l      = makeLayout(k, k % 2 ? Orientation::Landscape : Orientation::Portrait, {48, 36, 2, 4});
        const Image main  = test::randomImage(l.main.rect.height, l.main.rect.width, 3, 7);
        const auto refs   = refImages(l, 100);
        const Image canvas = compose(l, main, refs);
        const auto back   = decompose(l, canvas);
        EXPECT_EQ(back.main, main);
        EXPECT_EQ(back.refs, refs);
        EXPECT_EQ(canvas.crop(l.main.rect.x, l.main.rect.y, l.main.rect.width, l.main.rect.height), main);
        EXPECT_EQ(canvas.at(l.main.rect.y - 1, l.main.rect.x, 0), kDefaultMarginColor);
    }
}

TEST(Compose, RejectsMismatchedInputs) {
    const auto l = makeLayout(3, Orientation::Landscape, {32, 24, 2, 2});
    auto refs    = refImages(l, 1);
    const Image main(l.main.rect.height, l.main.rect.width, 3);
    EXPECT_NO_THROW(compose(l, main, refs));
    refs.pop_back();
    EXPECT_THROW(compose(l, main, refs), Error);
    refs = refImages(l, 1);
    refs[2] = Image(10, 10, 3);
    EXPECT_THROW(compose(l, main, refs), Error);
    EXPECT_THROW(compose(l, Image(5, 5, 3), refImages(l, 1)), Error);
    EXPECT_THROW(decompose(l, Image(10, 10, 3)), Error);
}

TEST(SelectRefs, FortyPercentRandomRestOverlapping) {
    const auto doc = builtinScene("desk", 64, 64, 24);
    const auto sel = selectRefs(doc.cameras[0], doc.cameras, doc.scene, 16, 3);
    EXPECT_EQ(sel.randomCount, 7);
    EXPECT_EQ(sel.overlapCount, 9);
    EXPECT_FALSE(sel.warning);
    ASSERT_EQ(sel.viewIds.size(), 16u);
    EXPECT_EQ(std::set<int>(sel.viewIds.begin(), sel.viewIds.end()).size(), 16u);
    EXPECT_FALSE(std::ranges::count(sel.viewIds, 0));
    // Oracle overlap of each pick, recomputed independently.
    const auto depth = renderDepth(doc.scene, doc.cameras[0], Resolution::Latent);
    int atLeast20    = 0;
    for (std::size_t i = 0; i < sel.viewIds.size(); ++i) {
        const auto map = correspondences(doc.scene, doc.cameras[0], doc.camera(sel.viewIds[i]), Resolution::Latent);
        EXPECT_DOUBLE_EQ(sel.overlaps[i], overlapFraction(map, depth));
        atLeast20 += sel.overlaps[i] >= 0.2 ? 1 : 0;
    }
    EXPECT_GE(atLeast20, 9);
    for (const int count: {1, 5, 8, 12}) {
        EXPECT_EQ(selectRefs(doc.cameras[0], doc.cameras, doc.scene, count, 1).randomCount,
                  int(std::ceil(0.4 * count - 1e-12)));
    }
}

TEST(SelectRefs, DeterministicInSeed) {
    const auto doc = builtinScene("desk", 64, 64, 20);
    const auto a   = selectRefs(doc.cameras[4], doc.cameras, doc.scene, 8, 11);
    const auto b   = selectRefs(doc.cameras[4], doc.cameras, doc.scene, 8, 11);
    const auto c   = selectRefs(doc.cameras[4], doc.cameras, doc.scene, 8, 12);
    EXPECT_EQ(a.viewIds, b.viewIds);
    EXPECT_NE(a.viewIds, c.viewIds);
}

TEST(SelectRefs, CopiesOfTheMainViewOverlapFully) {
    const auto doc = builtinScene("desk", 64, 64, 1);
    const auto &m  = doc.cameras[0];
    std::vector<CameraView> pool;
    for (int i = 1; i <= 10; ++i) {
        pool.emplace_back(i, m.intrinsics(), m.pose(), m.width(), m.height(), m.latentScale());
    }
    const auto sel = selectRefs(m, pool, doc.scene, 8, 2);
    for (const double o: sel.overlaps) {
        EXPECT_DOUBLE_EQ(o, 1.0);
    }
}

TEST(SelectRefs, WarnsAndFillsWhenOverlapIsScarce) {
    const Scene scene = test::frontoPlane(3.0);
    const auto main   = test::axisCamera(0, Vec3::Zero(), 64, 64, 40.0);
    std::vector<CameraView> pool;
    for (int i = 1; i <= 10; ++i) {
        pool.push_back(test::axisCamera(i, Vec3(20.0 * i, 0, 0), 64, 64, 40.0));
    }
    const auto sel = selectRefs(main, pool, scene, 5, 1);
    EXPECT_EQ(sel.viewIds.size(), 5u);
    EXPECT_EQ(sel.overlapCount, 0);
    EXPECT_TRUE(sel.warning);
    EXPECT_THROW(selectRefs(main, pool, scene, 11, 1), Error);
}

TEST(Overlap, RoughlySymmetricOnConvexScene) {
    const auto doc = builtinScene("two-spheres", 64, 64, 3);
    Scene convex({doc.scene.primitives()[0]}, 8.0);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = i + 1; j < 3; ++j) {
            const auto &a = doc.cameras[i];
            const auto &b = doc.cameras[j];
            const double ab = overlapFraction(correspondences(convex, a, b, Resolution::Full),
                                              renderDepth(convex, a, Resolution::Full));
            const double ba = overlapFraction(correspondences(convex, b, a, Resolution::Full),
                                              renderDepth(convex, b, Resolution::Full));
            EXPECT_NEAR(ab, ba, 0.05);
        }
    }
}
