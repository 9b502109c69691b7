// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "snk/geometry.h"
#include "snk/image.h"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

namespace snk {

/// Result of looking a 3D surface point up in another view.
///
/// The point is visible when it projects inside the frustum, at least one
/// of the four surrounding pixel centres hits the same primitive (so images
/// can be sampled there), and the front-most surface along the ray through
/// the projected coordinate lies within the scene's occlusion tolerance of
/// the point. The ray is cast against the analytic scene; interpolating the
/// depth map instead errs by more than the tolerance at latent resolution.
struct SurfaceVisibility {
    Vec2 pixel       = Vec2::Zero();
    double depth     = kMissDepth; ///< ray distance of the point in this view
    double residual  = kMissDepth;
    std::uint8_t taps = 0;         ///< bit i set = bilinear tap i usable
    bool visible     = false;
};

/// `view` must already be at the depth map's resolution (see
/// CameraView::atResolution).
SurfaceVisibility testVisibility(const Scene &scene, const CameraView &view, const DepthMap &depth, const Vec3 &point,
                                 int primitive);

/// Bilinear tap layout for a continuous coordinate. Tap i is at
/// (x0 + (i & 1), y0 + (i >> 1)).
struct BilinearTaps {
    int x0    = 0;
    int y0    = 0;
    double tx = 0.0;
    double ty = 0.0;

    static BilinearTaps at(const Vec2 &pixel);
    int x(int tap) const { return x0 + (tap & 1); }
    int y(int tap) const { return y0 + (tap >> 1); }
    double weight(int tap) const;
    /// Index of the valid tap with the largest weight, or -1.
    int nearest(std::uint8_t valid) const;

    /// Lerp of value(x, y) over the taps; invalid taps take the nearest
    /// valid tap's value. Constant inputs come back exactly.
    template <typename F>
    double
    interpolate(std::uint8_t valid, F &&value) const {
        const int fill = nearest(valid);
        double v[4];
        for (int i = 0; i < 4; ++i) {
            const int src = (valid >> i) & 1 ? i : fill;
            v[i]          = value(x(src), y(src));
        }
        const double top    = v[0] + (v[1] - v[0]) * tx;
        const double bottom = v[2] + (v[3] - v[2]) * tx;
        return top + (bottom - top) * ty;
    }
};

/// Dense src -> dst correspondences at one resolution.
///
/// Forward entries (per src pixel) carry the continuous dst coordinate, the
/// visibility flag and the depth residual. Pull entries (per dst pixel) carry
/// the src coordinate to sample when bringing a src image into the dst
/// frame, with the usable bilinear taps.
struct CorrespondenceMap {
    int srcViewId = -1;
    int dstViewId = -1;
    Resolution resolution = Resolution::Full;
    int srcWidth  = 0;
    int srcHeight = 0;
    int dstWidth  = 0;
    int dstHeight = 0;

    std::vector<Vec2> dstCoord;
    std::vector<double> residual;
    std::vector<std::uint8_t> visible;

    std::vector<Vec2> pullCoord;
    std::vector<std::uint8_t> pullTaps;
    std::vector<std::uint8_t> pullVisible;

    std::size_t srcIndex(int x, int y) const { return std::size_t(y) * srcWidth + x; }
    std::size_t dstIndex(int x, int y) const { return std::size_t(y) * dstWidth + x; }

    /// [H, W, 4] per src pixel: dst x, dst y, visible (0/1), residual.
    Image toImage() const;
};

CorrespondenceMap correspondences(const Scene &scene, const CameraView &src, const CameraView &dst,
                                  Resolution resolution);
CorrespondenceMap correspondences(const Scene &scene, const CameraView &src, const DepthMap &srcDepth,
                                  const CameraView &dst, const DepthMap &dstDepth);

/// Fraction of the src view's hit pixels that are visible in dst.
double overlapFraction(const CorrespondenceMap &map, const DepthMap &srcDepth);

/// Surface area S(p) subtended by each pixel (from its four corner rays) and
/// the weight 1/S(p). Pixels with any corner missing have area +inf and
/// weight 0.
struct PixelWeightMap {
    int viewId = -1;
    Resolution resolution = Resolution::Full;
    int width  = 0;
    int height = 0;
    std::vector<double> area;
    std::vector<double> weight;

    double weightAt(int x, int y) const { return weight[std::size_t(y) * width + x]; }
    double areaAt(int x, int y) const { return area[std::size_t(y) * width + x]; }

    /// [H, W, 2]: area, weight.
    Image toImage() const;
};

/// Area of the planar quadrilateral p1 p2 p3 p4 (in order), as half the
/// magnitude of the cross product of its diagonals.
double quadArea(const Vec3 &p1, const Vec3 &p2, const Vec3 &p3, const Vec3 &p4);

PixelWeightMap pixelArea(const Scene &scene, const CameraView &view, Resolution resolution);

enum class Sampling { Nearest, Bilinear };

struct WarpResult {
    Image image; ///< dst frame
    Image mask;  ///< 1 channel, 1 = visible
};

/// Brings an image living in the map's src view into the dst frame.
/// Nearest sampling takes the src pixel whose cell contains the coordinate
/// and never mixes values; use it for noise.
WarpResult warpImage(const Image &image, const CorrespondenceMap &map, Sampling sampling);

/// Memoised depth maps, weight maps and correspondences over a fixed scene.
/// Views are identified by id; ids must be unique per camera. Thread-safe.
class WarpCache {
public:
    explicit WarpCache(Scene scene) : mScene(std::move(scene)) {}

    const Scene &scene() const { return mScene; }

    std::shared_ptr<const DepthMap> depth(const CameraView &view, Resolution resolution);
    std::shared_ptr<const PixelWeightMap> weights(const CameraView &view, Resolution resolution);
    std::shared_ptr<const CorrespondenceMap> map(const CameraView &src, const CameraView &dst, Resolution resolution);

private:
    Scene mScene;
    std::mutex mMutex;
    std::map<std::pair<int, Resolution>, std::shared_ptr<const DepthMap>> mDepth;
    std::map<std::pair<int, Resolution>, std::shared_ptr<const PixelWeightMap>> mWeights;
    std::map<std::tuple<int, int, Resolution>, std::shared_ptr<const CorrespondenceMap>> mMaps;
};

} // namespace snk
