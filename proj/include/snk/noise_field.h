// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "snk/geometry.h"
#include "snk/image.h"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace snk {

/// A weighted noise sample (x, w): x ~ N(0, 1), w ~ U(0, 1).
struct NoiseSample {
    float value   = 0.0f;
    double weight = 0.0; ///< always a multiple of 2^-53
    bool operator==(const NoiseSample &) const = default;
};

/// Value of the sample with the largest weight. Order of the span is
/// irrelevant because weights are distinct by construction.
float aggregateMaxWeight(std::span<const NoiseSample> candidates);

/// Surface-anchored structured noise.
///
/// Every registered view owns one (x, w) pair per latent pixel and channel,
/// generated once from a counter RNG keyed by (seed, view, pixel, channel).
/// Latent pixels whose centre ray hits the scene are anchored at that
/// surface point; the rest are background samples private to their view.
class WeightedNoiseField {
public:
    struct ViewRecord {
        CameraView view;
        int latentWidth  = 0;
        int latentHeight = 0;
        std::vector<Vec3> anchor;       ///< per latent pixel
        std::vector<int> primitive;     ///< per latent pixel, -1 = background
        std::vector<NoiseSample> samples; ///< per latent pixel * channels + channel

        bool anchored(std::size_t pixel) const { return primitive[pixel] >= 0; }
        bool operator==(const ViewRecord &) const = default;
    };

    WeightedNoiseField(std::uint64_t seed, int channels, std::vector<ViewRecord> views);

    std::uint64_t seed() const { return mSeed; }
    int channels() const { return mChannels; }
    const std::vector<ViewRecord> &views() const { return mViews; }
    const ViewRecord *find(int viewId) const;

    /// Number of (view, latent pixel, channel) triples carrying an anchor.
    std::size_t anchoredCount() const;

    bool operator==(const WeightedNoiseField &) const = default;

private:
    std::uint64_t mSeed;
    int mChannels;
    std::vector<ViewRecord> mViews;
};

/// Background sample of a view that has no stored pair at `pixel`; used for
/// views rendered without being registered at initialisation.
float unregisteredBackground(std::uint64_t seed, int viewId, std::size_t pixel, int channel);

WeightedNoiseField initField(const Scene &scene, std::span<const CameraView> views, std::uint64_t seed,
                             int channels = 4);

/// Latent noise image (H / s, W / s, channels) for `view`.
///
/// Anchors from every registered view (this one included) are projected
/// into the view at latent resolution. An anchor lands in the latent pixel
/// whose half-open cell contains its projection and counts as a candidate
/// when it passes the occlusion test. Each pixel outputs the x of its
/// maximum-w candidate, or the view's own background sample when there is
/// none. `sourceOrder` permutes the gather order (indices into
/// field.views()); the result does not depend on it.
Image renderNoise(const WeightedNoiseField &field, const Scene &scene, const CameraView &view,
                  std::span<const std::size_t> sourceOrder = {});

/// Moves anchors onto `newScene` along their original latent pixel rays.
/// All (x, w) pairs are kept bitwise; pixels switch between anchored and
/// background status when their ray starts or stops hitting the scene.
WeightedNoiseField refreshGeometry(const WeightedNoiseField &field, const Scene &oldScene, const Scene &newScene);

/// Serialisation: an [N, 4] tensor in (view, pixel, channel) order holding
/// x and the weight's 53-bit mantissa split into three 18-bit integer
/// chunks (exact in f32), plus a JSON sidecar
/// holding seed, channel count and the registered cameras. Anchors are
/// recomputed from the scene on load.
void saveField(const WeightedNoiseField &field, const std::filesystem::path &tensorPath,
               const std::filesystem::path &sidecarPath);
WeightedNoiseField loadField(const Scene &scene, const std::filesystem::path &tensorPath,
                             const std::filesystem::path &sidecarPath);

struct GaussianityReport {
    double alpha = 0.01;
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<double>> pValues; ///< [trial][channel], KS against N(0, 1)
    std::vector<int> passes;                  ///< per channel, trials with p >= alpha
    std::size_t samplesPerChannel = 0;

    int minimumPasses() const;
};

/// For each seed: initialise a field over `views`, render `target` and KS
/// test every channel of the latent image separately.
GaussianityReport verifyGaussian(const Scene &scene, std::span<const CameraView> views, const CameraView &target,
                                 std::span<const std::uint64_t> seeds, int channels = 4, double alpha = 0.01);

} // namespace snk
