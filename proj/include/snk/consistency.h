// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "snk/geometry.h"
#include "snk/image.h"
#include "snk/surround.h"
#include "snk/warp.h"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace snk {

struct ViewImage {
    CameraView view;
    Image image; ///< at the view's full or latent resolution
};

struct BatchMetadata {
    int generation = -1;
    int worker     = -1;
    std::optional<int> k;              ///< surround parameter the batch came from
    std::optional<int> surroundCount;  ///< n, number of composed canvases
};

/// Views edited together. When k and n are recorded the batch must hold
/// exactly (4k - 3) * n views.
struct ViewBatch {
    std::vector<ViewImage> views;
    BatchMetadata meta;

    std::size_t size() const { return views.size(); }
    void validate() const;
};

/// Resolution an image belongs to for its camera; throws on mismatch.
Resolution imageResolution(const ViewImage &entry);

/// Reference view per batch entry: at each pixel, the 1/S-weighted mean of
/// the entry's own value and every other entry warped onto it where
/// visible. Pixels nothing else sees keep their own value.
ViewBatch buildReferenceViews(const ViewBatch &batch, WarpCache &cache);

/// Same, with caller-provided weight maps (one per entry, at the entry's
/// resolution).
ViewBatch buildReferenceViews(const ViewBatch &batch, const Scene &scene, std::span<const PixelWeightMap> weights,
                              WarpCache *cache = nullptr);

/// Rebuilds one canvas per layout from the reference views named in its
/// slots (nearest-resized to slot size when needed), margins as the layout
/// specifies.
std::vector<Image> reassembleSurround(const ViewBatch &references, std::span<const SurroundLayout> layouts);

/// Mean over matched pixel pairs (every ordered pair of entries, pixels
/// visible in both) of the squared colour difference, weighted by the
/// target pixel's 1/S. Zero iff the batch agrees on all matches. Throws
/// "disjoint views" when nothing matches.
double consistencyScore(const ViewBatch &batch, WarpCache &cache);
double consistencyScore(const ViewBatch &batch, const Scene &scene);

/// Stand-ins for the perceptual losses used to supervise the editor.
class ImageLoss {
public:
    virtual ~ImageLoss() = default;
    virtual std::string name() const                              = 0;
    virtual double operator()(const Image &a, const Image &b) const = 0;
};

class MseLoss final : public ImageLoss {
public:
    std::string name() const override { return "mse"; }
    double operator()(const Image &a, const Image &b) const override;
};

/// Mean of per-level MSEs over a box-filtered pyramid (level 0 = input).
class PyramidLoss final : public ImageLoss {
public:
    explicit PyramidLoss(int levels = 3) : mLevels(levels) {}
    std::string name() const override { return "pyramid"; }
    double operator()(const Image &a, const Image &b) const override;

private:
    int mLevels;
};

/// "mse" or "pyramid".
std::unique_ptr<ImageLoss> makeLoss(const std::string &name);

/// 2x2 box downsample (odd trailing row/column dropped).
Image boxDownsample(const Image &image);

} // namespace snk
