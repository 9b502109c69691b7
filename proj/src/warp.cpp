// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "snk/warp.h"

#include <algorithm>
#include <cmath>

namespace snk {

BilinearTaps
BilinearTaps::at(const Vec2 &pixel) {
    BilinearTaps t;
    const double fx = pixel.x() - 0.5;
    const double fy = pixel.y() - 0.5;
    t.x0            = int(std::floor(fx));
    t.y0            = int(std::floor(fy));
    t.tx            = fx - t.x0;
    t.ty            = fy - t.y0;
    return t;
}

double
BilinearTaps::weight(int tap) const {
    const double wx = (tap & 1) ? tx : 1.0 - tx;
    const double wy = (tap >> 1) ? ty : 1.0 - ty;
    return wx * wy;
}

int
BilinearTaps::nearest(std::uint8_t valid) const {
    int best      = -1;
    double bestW  = -1.0;
    for (int i = 0; i < 4; ++i) {
        if (((valid >> i) & 1) && weight(i) > bestW) {
            best  = i;
            bestW = weight(i);
        }
    }
    return best;
}

SurfaceVisibility
testVisibility(const Scene &scene, const CameraView &view, const DepthMap &depth, const Vec3 &point, int primitive) {
    check(view.width() == depth.width && view.height() == depth.height,
          "visibility test: camera and depth map resolutions differ");
    SurfaceVisibility out;
    const Projection proj = project(view, point);
    out.pixel             = proj.pixel;
    out.depth             = proj.depth;
    if (!proj.inFrustum) {
        return out;
    }
    const BilinearTaps taps = BilinearTaps::at(proj.pixel);
    for (int i = 0; i < 4; ++i) {
        const int x = taps.x(i);
        const int y = taps.y(i);
        if (x >= 0 && y >= 0 && x < depth.width && y < depth.height && depth.primitiveAt(x, y) == primitive) {
            out.taps |= std::uint8_t(1u << i);
        }
    }
    if (out.taps == 0) {
        return out;
    }
    // The depth oracle is analytic, so evaluate it exactly along the ray
    // through the projected coordinate rather than interpolating the map:
    // bilinear lookups err by far more than the tolerance at latent size.
    const Vec3 ray      = point - view.origin();
    const auto front    = scene.intersect(view.origin(), ray / proj.depth);
    const double hitAt  = front ? front->distance : kMissDepth;
    out.residual        = std::abs(proj.depth - hitAt);
    out.visible         = out.residual <= scene.occlusionTolerance();
    return out;
}

Image
CorrespondenceMap::toImage() const {
    Image img(srcHeight, srcWidth, 4);
    for (int y = 0; y < srcHeight; ++y) {
        for (int x = 0; x < srcWidth; ++x) {
            const auto i  = srcIndex(x, y);
            img.at(y, x, 0) = float(dstCoord[i].x());
            img.at(y, x, 1) = float(dstCoord[i].y());
            img.at(y, x, 2) = visible[i] ? 1.0f : 0.0f;
            img.at(y, x, 3) = float(residual[i]);
        }
    }
    return img;
}

CorrespondenceMap
correspondences(const Scene &scene, const CameraView &src, const DepthMap &srcDepth, const CameraView &dst,
                const DepthMap &dstDepth) {
    check(srcDepth.resolution == dstDepth.resolution, "correspondences: depth maps at different resolutions");
    const Resolution res   = srcDepth.resolution;
    const CameraView srcAt = src.atResolution(res);
    const CameraView dstAt = dst.atResolution(res);
    check(srcDepth.width == srcAt.width() && srcDepth.height == srcAt.height(), "src depth map does not match view");
    check(dstDepth.width == dstAt.width() && dstDepth.height == dstAt.height(), "dst depth map does not match view");

    CorrespondenceMap map;
    map.srcViewId  = src.id();
    map.dstViewId  = dst.id();
    map.resolution = res;
    map.srcWidth   = srcAt.width();
    map.srcHeight  = srcAt.height();
    map.dstWidth   = dstAt.width();
    map.dstHeight  = dstAt.height();
    const std::size_t nSrc = std::size_t(map.srcWidth) * map.srcHeight;
    const std::size_t nDst = std::size_t(map.dstWidth) * map.dstHeight;
    map.dstCoord.assign(nSrc, Vec2::Constant(-1.0));
    map.residual.assign(nSrc, kMissDepth);
    map.visible.assign(nSrc, 0);
    map.pullCoord.assign(nDst, Vec2::Constant(-1.0));
    map.pullTaps.assign(nDst, 0);
    map.pullVisible.assign(nDst, 0);

    parallelFor(std::size_t(map.srcHeight), [&](std::size_t row) {
        const int y = int(row);
        for (int x = 0; x < map.srcWidth; ++x) {
            if (!srcDepth.hit(x, y)) {
                continue;
            }
            const Vec3 p   = unproject(srcAt, pixelCenter(x, y), srcDepth.at(x, y));
            const auto vis = testVisibility(scene, dstAt, dstDepth, p, srcDepth.primitiveAt(x, y));
            const auto i   = map.srcIndex(x, y);
            map.dstCoord[i] = vis.pixel;
            map.residual[i] = vis.residual;
            map.visible[i]  = vis.visible ? 1 : 0;
        }
    });
    parallelFor(std::size_t(map.dstHeight), [&](std::size_t row) {
        const int y = int(row);
        for (int x = 0; x < map.dstWidth; ++x) {
            if (!dstDepth.hit(x, y)) {
                continue;
            }
            const Vec3 p   = unproject(dstAt, pixelCenter(x, y), dstDepth.at(x, y));
            const auto vis = testVisibility(scene, srcAt, srcDepth, p, dstDepth.primitiveAt(x, y));
            const auto i   = map.dstIndex(x, y);
            map.pullCoord[i]   = vis.pixel;
            map.pullTaps[i]    = vis.taps;
            map.pullVisible[i] = vis.visible ? 1 : 0;
        }
    });
    return map;
}

CorrespondenceMap
correspondences(const Scene &scene, const CameraView &src, const CameraView &dst, Resolution resolution) {
    return correspondences(scene, src, renderDepth(scene, src, resolution), dst, renderDepth(scene, dst, resolution));
}

double
overlapFraction(const CorrespondenceMap &map, const DepthMap &srcDepth) {
    std::size_t hits = 0, seen = 0;
    for (int y = 0; y < map.srcHeight; ++y) {
        for (int x = 0; x < map.srcWidth; ++x) {
            if (srcDepth.hit(x, y)) {
                ++hits;
                seen += map.visible[map.srcIndex(x, y)];
            }
        }
    }
    return hits == 0 ? 0.0 : double(seen) / double(hits);
}

Image
PixelWeightMap::toImage() const {
    Image img(height, width, 2);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            img.at(y, x, 0) = float(areaAt(x, y));
            img.at(y, x, 1) = float(weightAt(x, y));
        }
    }
    return img;
}

double
quadArea(const Vec3 &p1, const Vec3 &p2, const Vec3 &p3, const Vec3 &p4) {
    return 0.5 * (p3 - p1).cross(p4 - p2).norm();
}

PixelWeightMap
pixelArea(const Scene &scene, const CameraView &view, Resolution resolution) {
    check(!scene.empty(), "scene has no primitives");
    const CameraView cam = view.atResolution(resolution);
    PixelWeightMap out;
    out.viewId     = view.id();
    out.resolution = resolution;
    out.width      = cam.width();
    out.height     = cam.height();
    out.area.assign(std::size_t(out.width) * out.height, kMissDepth);
    out.weight.assign(out.area.size(), 0.0);

    // Corner (i, j) of the pixel grid is shared by up to four pixels.
    const int cw = out.width + 1;
    std::vector<Vec3> corner(std::size_t(cw) * (out.height + 1));
    std::vector<std::uint8_t> cornerHit(corner.size(), 0);
    parallelFor(std::size_t(out.height + 1), [&](std::size_t row) {
        const int j = int(row);
        for (int i = 0; i <= out.width; ++i) {
            const Vec3 dir = cam.rayDirection(Vec2(i, j));
            if (auto hit = scene.intersect(cam.origin(), dir)) {
                corner[std::size_t(j) * cw + i]    = hit->point;
                cornerHit[std::size_t(j) * cw + i] = 1;
            }
        }
    });
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const std::size_t c1 = std::size_t(y) * cw + x;
            const std::size_t c2 = c1 + 1;
            const std::size_t c3 = c2 + cw;
            const std::size_t c4 = c1 + cw;
            if (!(cornerHit[c1] && cornerHit[c2] && cornerHit[c3] && cornerHit[c4])) {
                continue;
            }
            const double s = quadArea(corner[c1], corner[c2], corner[c3], corner[c4]);
            if (s > 0.0) {
                const std::size_t i = std::size_t(y) * out.width + x;
                out.area[i]         = s;
                out.weight[i]       = 1.0 / s;
            }
        }
    }
    return out;
}

WarpResult
warpImage(const Image &image, const CorrespondenceMap &map, Sampling sampling) {
    if (image.width() != map.srcWidth || image.height() != map.srcHeight) {
        throw Error("warp: image resolution does not match correspondence map");
    }
    WarpResult out{Image(map.dstHeight, map.dstWidth, image.channels()), Image(map.dstHeight, map.dstWidth, 1)};
    for (int y = 0; y < map.dstHeight; ++y) {
        for (int x = 0; x < map.dstWidth; ++x) {
            const auto i = map.dstIndex(x, y);
            if (!map.pullVisible[i]) {
                continue;
            }
            out.mask.at(y, x)       = 1.0f;
            const BilinearTaps taps = BilinearTaps::at(map.pullCoord[i]);
            const std::uint8_t ok   = map.pullTaps[i];
            if (sampling == Sampling::Nearest) {
                // Cell containing the coordinate, if it is a usable tap.
                const int cx = int(std::floor(map.pullCoord[i].x()));
                const int cy = int(std::floor(map.pullCoord[i].y()));
                int tap      = (cx - taps.x0) + 2 * (cy - taps.y0);
                if (!((ok >> tap) & 1)) {
                    tap = taps.nearest(ok);
                }
                std::ranges::copy(image.pixel(taps.y(tap), taps.x(tap)), out.image.pixel(y, x).begin());
                continue;
            }
            for (int c = 0; c < image.channels(); ++c) {
                out.image.at(y, x, c) =
                    float(taps.interpolate(ok, [&](int sx, int sy) { return double(image.at(sy, sx, c)); }));
            }
        }
    }
    return out;
}

std::shared_ptr<const DepthMap>
WarpCache::depth(const CameraView &view, Resolution resolution) {
    const auto key = std::make_pair(view.id(), resolution);
    {
        std::lock_guard lock(mMutex);
        if (auto it = mDepth.find(key); it != mDepth.end()) {
            return it->second;
        }
    }
    auto value = std::make_shared<const DepthMap>(renderDepth(mScene, view, resolution));
    std::lock_guard lock(mMutex);
    return mDepth.emplace(key, std::move(value)).first->second;
}

std::shared_ptr<const PixelWeightMap>
WarpCache::weights(const CameraView &view, Resolution resolution) {
    const auto key = std::make_pair(view.id(), resolution);
    {
        std::lock_guard lock(mMutex);
        if (auto it = mWeights.find(key); it != mWeights.end()) {
            return it->second;
        }
    }
    auto value = std::make_shared<const PixelWeightMap>(pixelArea(mScene, view, resolution));
    std::lock_guard lock(mMutex);
    return mWeights.emplace(key, std::move(value)).first->second;
}

std::shared_ptr<const CorrespondenceMap>
WarpCache::map(const CameraView &src, const CameraView &dst, Resolution resolution) {
    const auto key = std::make_tuple(src.id(), dst.id(), resolution);
    {
        std::lock_guard lock(mMutex);
        if (auto it = mMaps.find(key); it != mMaps.end()) {
            return it->second;
        }
    }
    const auto srcDepth = depth(src, resolution);
    const auto dstDepth = depth(dst, resolution);
    auto value = std::make_shared<const CorrespondenceMap>(correspondences(mScene, src, *srcDepth, dst, *dstDepth));
    std::lock_guard lock(mMutex);
    return mMaps.emplace(key, std::move(value)).first->second;
}

} // namespace snk
