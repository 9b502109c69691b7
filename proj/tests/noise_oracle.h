// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

// Brute-force references for the structured-noise field, shared by the unit
// tests and the acceptance binary. Nothing here calls the field's renderer.

#pragma once

#include "snk/noise_field.h"
#include "snk/warp.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace snk::test {

/// (registered view index, latent pixel) of one anchor.
using AnchorRef = std::pair<std::size_t, std::size_t>;

/// Anchor visibility by exact ray casting: in the view's frustum and the
/// front-most surface along the ray from the camera is the anchor itself.
inline bool
anchorVisible(const Scene &scene, const CameraView &view, const Vec3 &anchor) {
    if (!project(view, anchor).inFrustum) {
        return false;
    }
    const Vec3 d      = anchor - view.origin();
    const double dist = d.norm();
    const auto hit    = scene.intersect(view.origin(), d / dist);
    return hit && std::abs(hit->distance - dist) <= scene.occlusionTolerance();
}

/// For each latent pixel of `view`: every anchor whose projection falls in
/// that pixel's cell and which the view sees.
inline std::vector<std::set<AnchorRef>>
candidateSets(const WeightedNoiseField &field, const Scene &scene, const CameraView &view) {
    const CameraView cam = view.atResolution(Resolution::Latent);
    std::vector<std::set<AnchorRef>> sets(std::size_t(cam.width()) * cam.height());
    for (std::size_t s = 0; s < field.views().size(); ++s) {
        const auto &rec = field.views()[s];
        for (std::size_t p = 0; p < rec.anchor.size(); ++p) {
            if (!rec.anchored(p) || !anchorVisible(scene, cam, rec.anchor[p])) {
                continue;
            }
            const Vec2 px = project(cam, rec.anchor[p]).pixel;
            const int x   = int(std::floor(px.x()));
            const int y   = int(std::floor(px.y()));
            sets[std::size_t(y) * cam.width() + x].insert({s, p});
        }
    }
    return sets;
}

/// Probability that two max-weight draws over i.i.d. uniform weights pick
/// the same pair: |A n B| / |A u B|. Empty sets fall back to private
/// background samples and never agree.
inline double
agreementProbability(const std::set<AnchorRef> &a, const std::set<AnchorRef> &b) {
    std::size_t common = 0;
    for (const auto &r: a) {
        common += b.count(r);
    }
    const std::size_t all = a.size() + b.size() - common;
    return all == 0 ? 0.0 : double(common) / double(all);
}

struct AgreementStudy {
    std::size_t pairs    = 0; ///< matched latent pixel pairs
    std::size_t samples  = 0; ///< pairs x channels x seeds
    double measured      = 0.0;
    double expected      = 0.0;
};

/// Matched latent pixel pairs between views a and b: mutually visible
/// under both directed maps (each lands in the other's cell) with pixel
/// area ratio in [0.5, 2].
inline std::vector<std::pair<std::size_t, std::size_t>>
matchedPairs(const Scene &scene, const CameraView &a, const CameraView &b) {
    const auto ab = correspondences(scene, a, b, Resolution::Latent);
    const auto ba = correspondences(scene, b, a, Resolution::Latent);
    const auto wa = pixelArea(scene, a, Resolution::Latent);
    const auto wb = pixelArea(scene, b, Resolution::Latent);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (int y = 0; y < ab.srcHeight; ++y) {
        for (int x = 0; x < ab.srcWidth; ++x) {
            const auto i = ab.srcIndex(x, y);
            if (!ab.visible[i]) {
                continue;
            }
            const int bx = int(std::floor(ab.dstCoord[i].x()));
            const int by = int(std::floor(ab.dstCoord[i].y()));
            const auto j = ba.srcIndex(bx, by);
            if (!ba.visible[j] || int(std::floor(ba.dstCoord[j].x())) != x ||
                int(std::floor(ba.dstCoord[j].y())) != y) {
                continue;
            }
            const double ratio = wa.areaAt(x, y) / wb.areaAt(bx, by);
            if (!(ratio >= 0.5 && ratio <= 2.0)) {
                continue;
            }
            out.emplace_back(i, j);
        }
    }
    return out;
}

inline AgreementStudy
agreementStudy(const Scene &scene, const CameraView &a, const CameraView &b, std::span<const std::uint64_t> seeds,
               int channels = 4) {
    const std::vector<CameraView> views{a, b};
    const auto pairs = matchedPairs(scene, a, b);
    AgreementStudy study;
    study.pairs = pairs.size();
    if (pairs.empty()) {
        return study;
    }
    // The candidate sets depend only on geometry, not on the seed.
    const auto probe = initField(scene, views, seeds.empty() ? 0 : seeds[0], channels);
    const auto setsA = candidateSets(probe, scene, a);
    const auto setsB = candidateSets(probe, scene, b);
    for (const auto &[i, j]: pairs) {
        study.expected += agreementProbability(setsA[i], setsB[j]);
    }
    study.expected /= double(pairs.size());

    std::size_t equal = 0;
    for (const auto seed: seeds) {
        const auto field = initField(scene, views, seed, channels);
        const Image na   = renderNoise(field, scene, a);
        const Image nb   = renderNoise(field, scene, b);
        const int wa     = na.width();
        const int wb     = nb.width();
        for (const auto &[i, j]: pairs) {
            for (int c = 0; c < channels; ++c) {
                const float va = na.at(int(i) / wa, int(i) % wa, c);
                const float vb = nb.at(int(j) / wb, int(j) % wb, c);
                equal += va == vb ? 1 : 0;
                ++study.samples;
            }
        }
    }
    study.measured = double(equal) / double(study.samples);
    return study;
}

/// Two views of a fronto-parallel plane related by a general homography
/// (translation, rotation and a depth change), so candidate sets overlap
/// only partially.
struct TwoViewPlane {
    Scene scene;
    std::vector<CameraView> views;
};

inline TwoViewPlane
twoViewPlane(int size = 512) {
    TwoViewPlane rig;
    rig.scene = Scene({Primitive{Plane{Vec3(0, 0, 3), Vec3(0, 0, -1)}, {}}}, 4.0);
    const auto K = Intrinsics::fromVerticalFov(size, size, 60.0);
    rig.views.emplace_back(0, K, Pose{}, size, size);
    rig.views.emplace_back(1, K, Pose::lookAt(Vec3(0.6, -0.2, 0.4), Vec3(0.1, 0.05, 3.0), Vec3(0.15, -1, 0)), size,
                           size);
    return rig;
}

/// Latent pixels of `view` whose candidate set may differ between the two
/// scenes: pixels whose own depth changed, plus the cells any changed
/// anchor of any registered view projects to before or after, dilated by
/// one pixel.
inline std::vector<std::uint8_t>
changedRegion(const WeightedNoiseField &before, const WeightedNoiseField &after, const Scene &oldScene,
              const Scene &newScene, const CameraView &view) {
    const CameraView cam = view.atResolution(Resolution::Latent);
    const int w = cam.width(), h = cam.height();
    std::vector<std::uint8_t> seed(std::size_t(w) * h, 0);
    const auto d0 = renderDepth(oldScene, view, Resolution::Latent);
    const auto d1 = renderDepth(newScene, view, Resolution::Latent);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (d0.at(x, y) != d1.at(x, y) || d0.primitiveAt(x, y) != d1.primitiveAt(x, y)) {
                seed[std::size_t(y) * w + x] = 1;
            }
        }
    }
    auto mark = [&](const Vec3 &p) {
        const auto pr = project(cam, p);
        if (pr.inFrustum) {
            seed[std::size_t(std::floor(pr.pixel.y())) * w + std::size_t(std::floor(pr.pixel.x()))] = 1;
        }
    };
    for (std::size_t s = 0; s < before.views().size(); ++s) {
        const auto &r0 = before.views()[s];
        const auto &r1 = after.views()[s];
        for (std::size_t p = 0; p < r0.anchor.size(); ++p) {
            if (r0.primitive[p] == r1.primitive[p] && r0.anchor[p] == r1.anchor[p]) {
                continue;
            }
            if (r0.anchored(p)) {
                mark(r0.anchor[p]);
            }
            if (r1.anchored(p)) {
                mark(r1.anchor[p]);
            }
        }
    }
    std::vector<std::uint8_t> out(seed.size(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && ny >= 0 && nx < w && ny < h && seed[std::size_t(ny) * w + nx]) {
                        out[std::size_t(y) * w + x] = 1;
                    }
                }
            }
        }
    }
    return out;
}

} // namespace snk::test
