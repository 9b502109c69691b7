// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "snk/geometry.h"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace snk {

namespace {

constexpr double kRayEpsilon = 1e-9;

bool
isRotation(const Mat3 &r) {
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-9 &&
           std::abs(r.determinant() - 1.0) <= 1e-9;
}

double
intersectSphere(const Sphere &s, const Vec3 &o, const Vec3 &d) {
    const Vec3 oc     = o - s.center;
    const double b    = oc.dot(d);
    const double c    = oc.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - c;
    if (disc < 0.0) {
        return kMissDepth;
    }
    const double root = std::sqrt(disc);
    // Stable form of the near root avoids cancellation for distant spheres.
    const double q    = -b - root;
    if (q > kRayEpsilon) {
        return q;
    }
    const double far = -b + root;
    return far > kRayEpsilon ? far : kMissDepth;
}

double
intersectPlane(const Plane &p, const Vec3 &o, const Vec3 &d) {
    const Vec3 n       = p.normal.normalized();
    const double denom = n.dot(d);
    if (std::abs(denom) < 1e-15) {
        return kMissDepth;
    }
    const double t = n.dot(p.point - o) / denom;
    return t > kRayEpsilon ? t : kMissDepth;
}

double
intersectBox(const Box &b, const Vec3 &o, const Vec3 &d) {
    double tNear = -std::numeric_limits<double>::infinity();
    double tFar  = std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < 3; ++axis) {
        if (d[axis] == 0.0) {
            if (o[axis] < b.min[axis] || o[axis] > b.max[axis]) {
                return kMissDepth;
            }
            continue;
        }
        double t0 = (b.min[axis] - o[axis]) / d[axis];
        double t1 = (b.max[axis] - o[axis]) / d[axis];
        if (t0 > t1) {
            std::swap(t0, t1);
        }
        tNear = std::max(tNear, t0);
        tFar  = std::min(tFar, t1);
        if (tNear > tFar) {
            return kMissDepth;
        }
    }
    if (tNear > kRayEpsilon) {
        return tNear;
    }
    return tFar > kRayEpsilon ? tFar : kMissDepth;
}

Vec3
planeTangent(const Vec3 &normal) {
    const Vec3 n     = normal.normalized();
    const Vec3 seed  = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    return (seed - n * n.dot(seed)).normalized();
}

} // namespace

Intrinsics
Intrinsics::fromVerticalFov(int width, int height, double fovYDegrees) {
    const double f = 0.5 * height / std::tan(0.5 * fovYDegrees * std::numbers::pi / 180.0);
    return {f, f, 0.5 * width, 0.5 * height};
}

Pose
Pose::lookAt(const Vec3 &eye, const Vec3 &target, const Vec3 &up) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right         = forward.cross(up);
    check(right.norm() > 1e-12, "lookAt: up vector parallel to viewing direction");
    right.normalize();
    // Camera +y points down in the image.
    const Vec3 down = forward.cross(right);
    Pose pose;
    pose.rotation.col(0) = right;
    pose.rotation.col(1) = down;
    pose.rotation.col(2) = forward;
    pose.translation     = eye;
    return pose;
}

CameraView::CameraView(int id, const Intrinsics &intrinsics, const Pose &pose, int width, int height,
                       int latentScale)
    : mId(id), mIntrinsics(intrinsics), mPose(pose), mWidth(width), mHeight(height), mLatentScale(latentScale) {
    check(intrinsics.fx > 0.0 && intrinsics.fy > 0.0, "camera focal lengths must be positive");
    check(width > 0 && height > 0, "camera resolution must be positive");
    check(latentScale >= 1, "latent scale must be >= 1");
    check(width % latentScale == 0 && height % latentScale == 0,
          "camera resolution must be divisible by the latent scale");
    check(isRotation(pose.rotation), "camera rotation must be orthonormal with determinant +1");
    check(pose.translation.allFinite(), "camera translation must be finite");
}

CameraView
CameraView::atResolution(Resolution r) const {
    if (r == Resolution::Full) {
        return *this;
    }
    const double s = mLatentScale;
    const Intrinsics k{mIntrinsics.fx / s, mIntrinsics.fy / s, mIntrinsics.cx / s, mIntrinsics.cy / s};
    return CameraView(mId, k, mPose, mWidth / mLatentScale, mHeight / mLatentScale, 1);
}

Vec3
CameraView::rayDirection(const Vec2 &pixel) const {
    const Vec3 local((pixel.x() - mIntrinsics.cx) / mIntrinsics.fx, (pixel.y() - mIntrinsics.cy) / mIntrinsics.fy, 1.0);
    return (mPose.rotation * local).normalized();
}

bool
CameraView::operator==(const CameraView &o) const {
    return mId == o.mId && mIntrinsics.fx == o.mIntrinsics.fx && mIntrinsics.fy == o.mIntrinsics.fy &&
           mIntrinsics.cx == o.mIntrinsics.cx && mIntrinsics.cy == o.mIntrinsics.cy &&
           mPose.rotation == o.mPose.rotation && mPose.translation == o.mPose.translation && mWidth == o.mWidth &&
           mHeight == o.mHeight && mLatentScale == o.mLatentScale;
}

Vec3
unproject(const CameraView &view, const Vec2 &pixel, double depth) {
    if (!std::isfinite(depth) || depth <= 0.0) {
        throw Error("invalid depth");
    }
    check(pixel.allFinite(), "invalid pixel coordinate");
    return view.origin() + depth * view.rayDirection(pixel);
}

Projection
project(const CameraView &view, const Vec3 &point) {
    Projection out;
    const Vec3 local = view.pose().rotation.transpose() * (point - view.origin());
    out.depth        = local.norm();
    if (!(local.z() > 0.0)) {
        return out;
    }
    const auto &k = view.intrinsics();
    out.pixel     = {k.fx * local.x() / local.z() + k.cx, k.fy * local.y() / local.z() + k.cy};
    out.inFrustum = out.pixel.x() >= 0.0 && out.pixel.x() < view.width() && out.pixel.y() >= 0.0 &&
                    out.pixel.y() < view.height();
    return out;
}

Scene::Scene(std::vector<Primitive> primitives, double scale, double texelSize)
    : mPrimitives(std::move(primitives)), mTexelSize(texelSize) {
    check(texelSize > 0.0, "texel size must be positive");
    for (const auto &p: mPrimitives) {
        std::visit(
            [](const auto &s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Sphere>) {
                    check(s.radius > 0.0 && s.center.allFinite(), "sphere needs a finite center and positive radius");
                } else if constexpr (std::is_same_v<T, Plane>) {
                    check(s.normal.norm() > 0.0 && s.point.allFinite(), "plane needs a finite point and nonzero normal");
                } else {
                    check((s.max - s.min).minCoeff() > 0.0, "box min must be strictly below max");
                }
            },
            p.shape);
        check(p.albedo.period > 0.0, "albedo period must be positive");
    }
    if (scale > 0.0) {
        mScale = scale;
        return;
    }
    Eigen::AlignedBox3d bounds;
    for (const auto &p: mPrimitives) {
        std::visit(
            [&](const auto &s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Sphere>) {
                    bounds.extend(s.center - Vec3::Constant(s.radius));
                    bounds.extend(s.center + Vec3::Constant(s.radius));
                } else if constexpr (std::is_same_v<T, Plane>) {
                    bounds.extend(s.point);
                } else {
                    bounds.extend(s.min);
                    bounds.extend(s.max);
                }
            },
            p.shape);
    }
    mScale = bounds.isEmpty() ? 1.0 : std::max(1.0, bounds.diagonal().norm());
}

double
Scene::intersectPrimitive(int primitive, const Vec3 &origin, const Vec3 &direction) const {
    return std::visit(
        [&](const auto &s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Sphere>) {
                return intersectSphere(s, origin, direction);
            } else if constexpr (std::is_same_v<T, Plane>) {
                return intersectPlane(s, origin, direction);
            } else {
                return intersectBox(s, origin, direction);
            }
        },
        mPrimitives.at(std::size_t(primitive)).shape);
}

std::optional<Hit>
Scene::intersect(const Vec3 &origin, const Vec3 &direction) const {
    Hit best;
    for (int i = 0; i < int(mPrimitives.size()); ++i) {
        const double t = intersectPrimitive(i, origin, direction);
        if (t < best.distance) {
            best.distance  = t;
            best.primitive = i;
        }
    }
    if (best.primitive < 0) {
        return std::nullopt;
    }
    best.point = origin + best.distance * direction;
    return best;
}

SurfacePoint
Scene::surfacePoint(int primitive, const Vec3 &point) const {
    SurfacePoint sp;
    sp.primitive = primitive;
    std::visit(
        [&](const auto &s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Sphere>) {
                const Vec3 local   = (point - s.center) / s.radius;
                const double polar = std::acos(std::clamp(local.z(), -1.0, 1.0));
                const double azim  = std::atan2(local.y(), local.x()) + std::numbers::pi;
                sp.uv              = {azim * s.radius, polar * s.radius};
            } else if constexpr (std::is_same_v<T, Plane>) {
                const Vec3 n = s.normal.normalized();
                const Vec3 u = planeTangent(n);
                const Vec3 v = n.cross(u);
                const Vec3 r = point - s.point;
                sp.uv        = {r.dot(u), r.dot(v)};
            } else {
                const Vec3 center = 0.5 * (s.min + s.max);
                const Vec3 half   = 0.5 * (s.max - s.min);
                const Vec3 rel    = (point - center).cwiseQuotient(half);
                int axis          = 0;
                rel.cwiseAbs().maxCoeff(&axis);
                sp.face    = axis * 2 + (rel[axis] > 0.0 ? 1 : 0);
                const int a = (axis + 1) % 3;
                const int b = (axis + 2) % 3;
                sp.uv       = {point[a] - s.min[a], point[b] - s.min[b]};
            }
        },
        mPrimitives.at(std::size_t(primitive)).shape);
    return sp;
}

Color
Scene::albedoAt(int primitive, const Vec3 &point) const {
    const Albedo &albedo = mPrimitives.at(std::size_t(primitive)).albedo;
    switch (albedo.kind) {
    case Albedo::Kind::Solid: return albedo.primary;
    case Albedo::Kind::Checker: {
        const SurfacePoint sp = surfacePoint(primitive, point);
        const auto iu         = static_cast<long long>(std::floor(sp.uv.x() / albedo.period));
        const auto iv         = static_cast<long long>(std::floor(sp.uv.y() / albedo.period));
        return ((iu + iv + sp.face) & 1) == 0 ? albedo.primary : albedo.secondary;
    }
    case Albedo::Kind::Gradient: {
        const SurfacePoint sp = surfacePoint(primitive, point);
        const float t         = float(std::clamp(0.5 + sp.uv.x() / albedo.period, 0.0, 1.0));
        return albedo.primary + t * (albedo.secondary - albedo.primary);
    }
    }
    return albedo.primary;
}

std::int64_t
Scene::texelKey(int primitive, const Vec3 &point) const {
    const SurfacePoint sp = surfacePoint(primitive, point);
    constexpr std::int64_t kBias = std::int64_t{1} << 20;
    const auto iu = std::clamp<std::int64_t>(std::int64_t(std::floor(sp.uv.x() / mTexelSize)) + kBias, 0, 2 * kBias - 1);
    const auto iv = std::clamp<std::int64_t>(std::int64_t(std::floor(sp.uv.y() / mTexelSize)) + kBias, 0, 2 * kBias - 1);
    return ((std::int64_t(primitive) * 8 + sp.face) << 42) | (iu << 21) | iv;
}

bool
Scene::operator==(const Scene &o) const {
    if (mPrimitives.size() != o.mPrimitives.size() || mScale != o.mScale || mTexelSize != o.mTexelSize) {
        return false;
    }
    for (std::size_t i = 0; i < mPrimitives.size(); ++i) {
        const auto &a = mPrimitives[i];
        const auto &b = o.mPrimitives[i];
        if (a.shape.index() != b.shape.index() || a.albedo.kind != b.albedo.kind ||
            a.albedo.primary != b.albedo.primary || a.albedo.secondary != b.albedo.secondary ||
            a.albedo.period != b.albedo.period) {
            return false;
        }
        const bool same = std::visit(
            [&](const auto &s) {
                using T       = std::decay_t<decltype(s)>;
                const auto &t = std::get<T>(b.shape);
                if constexpr (std::is_same_v<T, Sphere>) {
                    return s.center == t.center && s.radius == t.radius;
                } else if constexpr (std::is_same_v<T, Plane>) {
                    return s.point == t.point && s.normal == t.normal;
                } else {
                    return s.min == t.min && s.max == t.max;
                }
            },
            a.shape);
        if (!same) {
            return false;
        }
    }
    return true;
}

Image
DepthMap::toImage() const {
    Image img(height, width, 1);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            img.at(y, x) = static_cast<float>(at(x, y));
        }
    }
    return img;
}

DepthMap
renderDepth(const Scene &scene, const CameraView &view, Resolution resolution) {
    check(!scene.empty(), "scene has no primitives");
    const CameraView cam = view.atResolution(resolution);
    DepthMap map;
    map.viewId     = view.id();
    map.resolution = resolution;
    map.width      = cam.width();
    map.height     = cam.height();
    map.depth.assign(std::size_t(map.width) * map.height, kMissDepth);
    map.primitive.assign(map.depth.size(), -1);
    parallelFor(std::size_t(map.height), [&](std::size_t row) {
        const int y = int(row);
        for (int x = 0; x < map.width; ++x) {
            if (auto hit = scene.intersect(cam.origin(), cam.rayDirection(pixelCenter(x, y)))) {
                const std::size_t i = std::size_t(y) * map.width + x;
                map.depth[i]        = hit->distance;
                map.primitive[i]    = hit->primitive;
            }
        }
    });
    return map;
}

Image
renderAlbedo(const Scene &scene, const CameraView &view, Resolution resolution, const Color &background) {
    const CameraView cam = view.atResolution(resolution);
    Image img(cam.height(), cam.width(), 3);
    parallelFor(std::size_t(cam.height()), [&](std::size_t row) {
        const int y = int(row);
        for (int x = 0; x < cam.width(); ++x) {
            const Vec3 dir = cam.rayDirection(pixelCenter(x, y));
            const auto hit = scene.intersect(cam.origin(), dir);
            const Color c  = hit ? scene.albedoAt(hit->primitive, hit->point) : background;
            for (int ch = 0; ch < 3; ++ch) {
                img.at(y, x, ch) = c[ch];
            }
        }
    });
    return img;
}

Image
renderAlbedoFiltered(const Scene &scene, const CameraView &view, Resolution resolution, int samplesPerAxis,
                     const Color &background) {
    check(samplesPerAxis >= 1, "filtered rendering needs at least one sample per axis");
    const CameraView cam = view.atResolution(resolution);
    const int n          = samplesPerAxis;
    Image img(cam.height(), cam.width(), 3);
    parallelFor(std::size_t(cam.height()), [&](std::size_t row) {
        const int y = int(row);
        for (int x = 0; x < cam.width(); ++x) {
            Eigen::Vector3d sum = Eigen::Vector3d::Zero();
            for (int j = 0; j < n; ++j) {
                for (int i = 0; i < n; ++i) {
                    const Vec2 p(x + (i + 0.5) / n, y + (j + 0.5) / n);
                    const auto hit = scene.intersect(cam.origin(), cam.rayDirection(p));
                    sum += (hit ? scene.albedoAt(hit->primitive, hit->point) : background).cast<double>();
                }
            }
            for (int ch = 0; ch < 3; ++ch) {
                img.at(y, x, ch) = float(sum[ch] / (n * n));
            }
        }
    });
    return img;
}

std::vector<CameraView>
orbitViews(int count, double radius, double height, const Vec3 &target, int width, int imageHeight,
           double fovYDegrees, int latentScale, int firstId, double startAngle, double arcDegrees) {
    check(count >= 1, "orbit needs at least one view");
    std::vector<CameraView> views;
    views.reserve(std::size_t(count));
    const Intrinsics k = Intrinsics::fromVerticalFov(width, imageHeight, fovYDegrees);
    const bool closed  = std::abs(arcDegrees - 360.0) < 1e-9;
    const double step  = arcDegrees / (closed ? count : std::max(1, count - 1));
    for (int i = 0; i < count; ++i) {
        const double a = (startAngle + step * i) * std::numbers::pi / 180.0;
        const Vec3 eye = target + Vec3(radius * std::cos(a), height, radius * std::sin(a));
        views.emplace_back(firstId + i, k, Pose::lookAt(eye, target, Vec3::UnitY()), width, imageHeight, latentScale);
    }
    return views;
}

} // namespace snk
