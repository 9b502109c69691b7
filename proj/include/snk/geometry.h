// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "snk/common.h"
#include "snk/image.h"

#include <Eigen/Geometry>

#include <cstdint>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

namespace snk {

inline constexpr double kMissDepth = std::numeric_limits<double>::infinity();

enum class Resolution { Full, Latent };

struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;

    /// Square pixels, principal point at the image centre.
    static Intrinsics fromVerticalFov(int width, int height, double fovYDegrees);
};

/// Rigid transform world <- camera. Camera frame: +x right, +y down,
/// +z forward (optical axis).
struct Pose {
    Mat3 rotation    = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static Pose lookAt(const Vec3 &eye, const Vec3 &target, const Vec3 &up);
};

/// Pinhole camera. Pixel (i, j) covers the continuous cell
/// [i, i+1) x [j, j+1) and samples at its centre (i+0.5, j+0.5). Depth is
/// always Euclidean distance along the viewing ray.
class CameraView {
public:
    CameraView(int id, const Intrinsics &intrinsics, const Pose &pose, int width, int height, int latentScale = 8);

    int id() const { return mId; }
    const Intrinsics &intrinsics() const { return mIntrinsics; }
    const Pose &pose() const { return mPose; }
    int width() const { return mWidth; }
    int height() const { return mHeight; }
    int latentScale() const { return mLatentScale; }

    int width(Resolution r) const { return r == Resolution::Full ? mWidth : mWidth / mLatentScale; }
    int height(Resolution r) const { return r == Resolution::Full ? mHeight : mHeight / mLatentScale; }

    /// The same camera sampled at the requested resolution. The latent view
    /// has intrinsics divided by latentScale and a latent scale of 1.
    CameraView atResolution(Resolution r) const;

    Vec3 origin() const { return mPose.translation; }
    Vec3 forward() const { return mPose.rotation.col(2); }

    /// Unit world-space direction through a continuous pixel coordinate.
    Vec3 rayDirection(const Vec2 &pixel) const;

    bool operator==(const CameraView &other) const;

private:
    int mId;
    Intrinsics mIntrinsics;
    Pose mPose;
    int mWidth;
    int mHeight;
    int mLatentScale;
};

inline Vec2
pixelCenter(int x, int y) {
    return {x + 0.5, y + 0.5};
}

/// World point at ray distance `depth` through the continuous pixel
/// coordinate. Throws "invalid depth" for non-finite or non-positive depth.
Vec3 unproject(const CameraView &view, const Vec2 &pixel, double depth);

struct Projection {
    Vec2 pixel     = Vec2::Zero();
    double depth   = 0.0; ///< ray distance from the camera centre
    bool inFrustum = false;
};

/// inFrustum is false behind or on the camera plane and outside
/// [0, width) x [0, height).
Projection project(const CameraView &view, const Vec3 &point);

// --- analytic scenes ------------------------------------------------------

struct Sphere {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
};

struct Plane {
    Vec3 point  = Vec3::Zero();
    Vec3 normal = Vec3::UnitY();
};

struct Box {
    Vec3 min = -Vec3::Ones();
    Vec3 max = Vec3::Ones();
};

using Shape = std::variant<Sphere, Plane, Box>;
using Color = Eigen::Vector3f;

/// Procedural texture in the primitive's 2D surface coordinates.
struct Albedo {
    enum class Kind { Solid, Checker, Gradient };
    Kind kind     = Kind::Solid;
    Color primary   = Color::Constant(0.5f);
    Color secondary = Color::Constant(0.5f);
    double period = 1.0; ///< checker square size / gradient ramp length (metres)
};

struct Primitive {
    Shape shape;
    Albedo albedo;
};

struct Hit {
    double distance = kMissDepth;
    int primitive   = -1;
    Vec3 point      = Vec3::Zero();
};

/// Location on a primitive's surface: box faces are numbered 0..5, other
/// shapes use face 0.
struct SurfacePoint {
    int primitive = -1;
    int face      = 0;
    Vec2 uv       = Vec2::Zero();
};

class Scene {
public:
    Scene() = default;
    explicit Scene(std::vector<Primitive> primitives, double scale = 0.0, double texelSize = 0.05);

    const std::vector<Primitive> &primitives() const { return mPrimitives; }
    bool empty() const { return mPrimitives.empty(); }

    /// Scene diameter in metres (explicit, or derived from finite geometry).
    double scale() const { return mScale; }
    double texelSize() const { return mTexelSize; }

    /// Occlusion depth tolerance used by all visibility tests.
    double occlusionTolerance() const { return 1e-3 * mScale; }

    /// Closed-form front-most intersection for a ray with unit direction.
    std::optional<Hit> intersect(const Vec3 &origin, const Vec3 &direction) const;

    /// Distance to one primitive along the ray, or kMissDepth.
    double intersectPrimitive(int primitive, const Vec3 &origin, const Vec3 &direction) const;

    SurfacePoint surfacePoint(int primitive, const Vec3 &point) const;
    Color albedoAt(int primitive, const Vec3 &point) const;

    /// Stable texel identifier used by the surface-texture fitter.
    std::int64_t texelKey(int primitive, const Vec3 &point) const;

    bool operator==(const Scene &other) const;

private:
    std::vector<Primitive> mPrimitives;
    double mScale     = 1.0;
    double mTexelSize = 0.05;
};

/// Per-pixel ray depths (kMissDepth on miss) and the id of the primitive hit
/// (-1 on miss).
struct DepthMap {
    int viewId = -1;
    Resolution resolution = Resolution::Full;
    int width  = 0;
    int height = 0;
    std::vector<double> depth;
    std::vector<int> primitive;

    double at(int x, int y) const { return depth[std::size_t(y) * width + x]; }
    int primitiveAt(int x, int y) const { return primitive[std::size_t(y) * width + x]; }
    bool hit(int x, int y) const { return primitive[std::size_t(y) * width + x] >= 0; }

    Image toImage() const;
};

DepthMap renderDepth(const Scene &scene, const CameraView &view, Resolution resolution);

/// Oracle colour rendering: albedo at each pixel-centre hit, `background` on
/// miss. This is the ground truth every warping test compares against.
Image renderAlbedo(const Scene &scene, const CameraView &view, Resolution resolution,
                   const Color &background = Color::Zero());

/// Pixel-integrated oracle: the mean of n x n stratified sub-pixel samples,
/// each the albedo at its hit or `background`. Removes the aliasing that
/// point sampling shows on distant texture.
Image renderAlbedoFiltered(const Scene &scene, const CameraView &view, Resolution resolution, int samplesPerAxis,
                           const Color &background = Color::Zero());

/// `count` cameras on a horizontal circle of `radius` centred `height` above
/// `target`, all looking at it.
std::vector<CameraView> orbitViews(int count, double radius, double height, const Vec3 &target, int width,
                                   int imageHeight, double fovYDegrees, int latentScale = 8, int firstId = 0,
                                   double startAngle = 0.0, double arcDegrees = 360.0);

} // namespace snk
