// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "snk/geometry.h"
#include "snk/image.h"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace snk {

class WarpCache;

struct Rect {
    int x      = 0;
    int y      = 0;
    int width  = 0;
    int height = 0;

    int right() const { return x + width; }
    int bottom() const { return y + height; }
    bool contains(int px, int py) const { return px >= x && px < right() && py >= y && py < bottom(); }
    bool intersects(const Rect &o) const { return x < o.right() && o.x < right() && y < o.bottom() && o.y < bottom(); }
    bool operator==(const Rect &) const = default;
};

enum class Orientation { Landscape, Portrait };

struct LayoutSlot {
    Rect rect;
    int viewId = -1;
    bool operator==(const LayoutSlot &) const = default;
};

/// Default margin: mid-gray 128 on an 8-bit scale.
inline constexpr float kDefaultMarginColor = 128.0f / 255.0f;

/// One main view ringed by 4(k-1) reference views: k along the top and
/// bottom rows and k-2 down each side, separated by splitters. Ref slots are
/// ordered top row (left to right), bottom row, left column (top to
/// bottom), right column.
struct SurroundLayout {
    int k = 5;
    Orientation orientation = Orientation::Landscape;
    int canvasWidth  = 0;
    int canvasHeight = 0;
    LayoutSlot main;
    std::vector<LayoutSlot> refs;
    int horizontalSplitter = 0; ///< height of splitters between rows (px)
    int verticalSplitter   = 0; ///< width of splitters between columns (px)
    float marginColor      = kDefaultMarginColor;

    /// Number of views a canvas carries: 4k - 3.
    int viewCount() const { return 1 + int(refs.size()); }

    nlohmann::json toJson() const;
    static SurroundLayout fromJson(const nlohmann::json &j);
    bool operator==(const SurroundLayout &) const = default;
};

/// Landscape sizes; portrait layouts transpose everything.
struct LayoutParams {
    int refWidth           = 224;
    int refHeight          = 168;
    int horizontalSplitter = 6;
    int verticalSplitter   = 8;
};

SurroundLayout makeLayout(int k, Orientation orientation = Orientation::Landscape, const LayoutParams &params = {});

/// Copies main and refs verbatim into their slots; every other pixel is
/// `marginColor` in every channel. Images must already match slot sizes.
Image compose(const SurroundLayout &layout, const Image &main, std::span<const Image> refs,
              std::optional<float> marginColor = std::nullopt);

struct Decomposed {
    Image main;
    std::vector<Image> refs;
};

Decomposed decompose(const SurroundLayout &layout, const Image &canvas);

struct RefSelection {
    std::vector<int> viewIds; ///< final (shuffled) order
    int randomCount  = 0;
    int overlapCount = 0;     ///< picks that met the overlap threshold
    std::vector<double> overlaps; ///< per selected view, same order
    std::optional<std::string> warning;
};

inline constexpr double kRandomRefShare   = 0.4;
inline constexpr double kMinRefOverlap    = 0.2;

/// ceil(0.4 * count) views uniformly from the pool, the rest from views
/// whose overlap with the main view is at least 20%, then a uniform
/// shuffle. Overlap is the fraction of the main view's hit pixels visible
/// in the candidate (latent resolution). Pool entries sharing the main
/// view's id are skipped. Deterministic in `seed`.
RefSelection selectRefs(const CameraView &main, std::span<const CameraView> pool, const Scene &scene, int count,
                        std::uint64_t seed, WarpCache *cache = nullptr);

} // namespace snk
