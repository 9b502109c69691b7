// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "snk/consistency.h"
#include "snk/embedding.h"
#include "snk/geometry.h"
#include "snk/image.h"
#include "snk/schedule.h"
#include "snk/surround.h"

#include <json.hpp>

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace snk {

/// One edited view waiting for the fitter.
struct BufferItem {
    int viewId = -1;
    Image image;
    std::int64_t generation = 0;
};

struct BufferStats {
    std::uint64_t produced = 0;
    std::uint64_t consumed = 0;
    std::uint64_t evicted  = 0;
    std::size_t resident   = 0;
};

/// Bounded FIFO between generating workers and the fitter. A push into a
/// full buffer evicts the oldest item. Every critical section is a single
/// move, so readers never hold writers up for longer than one swap.
/// While paused, pop() waits; close() releases it once the buffer drains.
class EditBuffer {
public:
    explicit EditBuffer(std::size_t capacity);

    std::size_t capacity() const { return mCapacity; }

    /// Returns true when an old item was evicted.
    bool push(BufferItem item);

    /// Blocks until an item is available and the buffer is not paused;
    /// nullopt once closed and empty.
    std::optional<BufferItem> pop();
    std::optional<BufferItem> tryPop();

    void setPaused(bool paused);
    void close();

    BufferStats stats() const;
    std::size_t size() const;

private:
    const std::size_t mCapacity;
    mutable std::mutex mMutex;
    std::condition_variable mReady;
    std::deque<BufferItem> mItems;
    BufferStats mStats;
    bool mPaused = false;
    bool mClosed = false;
};

/// Everything a toy editor may condition on. All images share the canvas
/// shape except `features`, which carries its own channel count.
struct EditInputs {
    const Image &original;
    const Image &rendered;
    const Image &noise; ///< upsampled to the canvas, first three channels
    const Image &mixed; ///< lambda * noise + (1 - lambda) * rendered
    const Image *features = nullptr;
    double noiseLevel     = 1.0;
};

/// Stand-in for the 2D editing model. Must be deterministic in its inputs.
class Editor {
public:
    virtual ~Editor() = default;
    virtual std::string name() const                    = 0;
    virtual Image edit(const EditInputs &inputs) const = 0;

    /// Closed-form colour the fitter should converge to for a surface of
    /// albedo `albedo`, when the editor has one.
    virtual std::optional<Eigen::Vector3d> targetColor(const Color &albedo) const;
};

class IdentityEditor final : public Editor {
public:
    std::string name() const override { return "identity"; }
    Image edit(const EditInputs &inputs) const override;
    std::optional<Eigen::Vector3d> targetColor(const Color &albedo) const override;
};

/// out = M * original + b + gain * lambda * noise, per pixel.
class ColorMatrixEditor final : public Editor {
public:
    ColorMatrixEditor(const Eigen::Matrix3d &matrix, const Eigen::Vector3d &bias, double noiseGain = 0.0);

    /// A fixed warm-tint matrix used when none is configured.
    static Eigen::Matrix3d defaultMatrix();
    static Eigen::Vector3d defaultBias();

    std::string name() const override { return "color-matrix"; }
    Image edit(const EditInputs &inputs) const override;
    std::optional<Eigen::Vector3d> targetColor(const Color &albedo) const override;

    double noiseGain() const { return mGain; }

private:
    Eigen::Matrix3d mMatrix;
    Eigen::Vector3d mBias;
    double mGain;
};

/// {"name": "identity"} or {"name": "color-matrix", "matrix": [[..]x3],
/// "bias": [..], "noise_gain": g}. A bare string selects the defaults.
std::shared_ptr<const Editor> makeEditor(const nlohmann::json &spec);

/// Surface texture with one running mean per texel ("NeRF" stand-in).
/// Texels the fitter has not observed render the scene's original albedo.
class TextureFitter {
public:
    struct Texel {
        std::int64_t key = 0;
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        std::uint64_t count  = 0;
        Color albedo         = Color::Zero(); ///< original albedo at the first pixel mapping here
    };

    TextureFitter(const Scene &scene, std::span<const CameraView> views);

    /// Recomputes pixel-to-texel maps for a changed scene. Texel estimates
    /// are kept by key; newly visible texels start unobserved.
    void rebind(const Scene &scene);

    /// Folds one edited full-resolution view into the texel means and
    /// returns the mean squared difference between the image and the
    /// updated texture over the view's surface pixels (0 when none).
    double consume(int viewId, const Image &image);

    Image render(int viewId) const;

    std::size_t texelCount() const { return mTexels.size(); }
    std::size_t observedTexels() const;

    /// Largest per-channel |mean - target| over observed texels.
    std::optional<double> maxTargetError(const Editor &editor) const;

    /// Texels ordered by key.
    std::vector<Texel> snapshot() const;
    std::uint64_t digest() const;

private:
    struct ViewMap {
        CameraView view;
        std::vector<std::int32_t> texel; ///< per pixel, -1 on miss
        Image original;
    };

    void bindView(const Scene &scene, ViewMap &map);
    const ViewMap &viewMap(int viewId) const;

    std::vector<ViewMap> mViews;
    std::vector<Texel> mTexels;
    std::unordered_map<std::int64_t, std::int32_t> mIndex;
};

/// Scripted sphere radius ramp for shape editing: the radius of
/// `primitive` moves from its initial value to factor * initial in `steps`
/// equal increments at epochs spread evenly over [firstEpoch, lastEpoch].
struct GeometryRamp {
    int primitive  = 1;
    double factor  = 1.1;
    int steps      = 10;
    int firstEpoch = 1;
    int lastEpoch  = 1;

    /// (epoch, scene) per step, in order.
    std::vector<std::pair<int, Scene>> scenes(const Scene &initial) const;
};

struct RunConfig {
    DistillSchedule schedule = DistillSchedule::scaled(200);
    int k                    = 3;
    int slots                = 2; ///< n, surrounding canvases per epoch
    int workers              = 2; ///< threads generating the slots
    std::uint64_t seed       = 0;
    bool deterministicReplay = true;
    std::size_t bufferCapacity = 64;
    nlohmann::json editor      = {{"name", "color-matrix"}};
    std::string loss           = "mse";
    bool structuredNoise       = true;
    bool consistencyRounds     = true;
    int channels               = 4;
    LayoutParams layout{64, 64, 2, 2};
    std::optional<HashGridConfig> embedding;
    /// Coarse-to-fine only.
    std::optional<int> phaseSwitchEpoch;
    std::optional<GeometryRamp> geometry;

    /// Unknown keys are rejected; absent keys keep their defaults.
    static RunConfig fromJson(const nlohmann::json &j);
    nlohmann::json toJson() const;
};

struct EpochRecord {
    int epoch = 0;
    std::string stage;
    int phase = 2;
    std::vector<double> noiseLevels; ///< per slot
    bool trainStep = false;
    std::optional<double> consistencyScore; ///< of the views pushed this epoch
    std::optional<double> fitterResidual;   ///< mean over items consumed this epoch
    std::optional<double> texelError;
    double coverage = 0.0;
    BufferStats buffer;
};

struct RoundRecord {
    int epoch = 0;
    std::optional<double> rawScore;
    std::optional<double> projectedScore;
    double loss = 0.0;
};

struct RefreshRecord {
    int epoch = 0;
    bool valuesPreserved = false;
    std::size_t anchored = 0;
};

struct RunReport {
    std::vector<EpochRecord> epochs;
    std::vector<RoundRecord> rounds;
    std::vector<RefreshRecord> refreshes;
    std::vector<TextureFitter::Texel> texture;
    std::uint64_t textureDigest = 0;
    std::optional<double> finalTexelError;
    std::vector<ViewImage> renders; ///< final fitter rendering per view

    /// One JSON object per epoch, round and refresh, then a summary line.
    std::vector<nlohmann::json> toJsonLines() const;
};

/// Runs the schedule. Every epoch each of the `slots` canvases picks a main
/// view and 4(k-1) references, composes original, rendering and noise
/// canvases, mixes them at the epoch's noise level, applies the editor and
/// decomposes the result; the union of all slots forms a (4k-3)n batch. At
/// training steps the batch is replaced by its reference views before it
/// is buffered. The fitter consumes the buffer during fitting stages.
///
/// With deterministic replay every random choice is keyed by (epoch, slot)
/// and the fitter drains the buffer at each epoch barrier, so reports are
/// bit-identical for any worker count. Otherwise the fitter runs on its
/// own thread.
RunReport run(const Scene &scene, std::span<const CameraView> views, const RunConfig &config);

/// Phase 1 (epochs before config.phaseSwitchEpoch) uses independent noise
/// per call and no consistency rounds; phase 2 enables both, with the
/// structured field refreshed at every scripted geometry step. Without a
/// geometry script phase 1 is skipped and the result equals run().
RunReport coarseToFine(const Scene &scene, std::span<const CameraView> views, const RunConfig &config);

} // namespace snk
